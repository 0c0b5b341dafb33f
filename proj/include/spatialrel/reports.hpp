/*
 Copyright 2026 The spatialrel Authors.
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "triplets.hpp"

namespace spatialrel {

// ---------------------------------------------------------------------------
// Per-relation table

struct RelationRow {
    Relation relation;
    MetricCounts counts;
    std::optional<double> visor_cond;
    std::optional<double> baseline_visor_cond;
    std::optional<double> delta; // visor_cond - baseline_visor_cond
};

inline void require_same_captions(const EvalReport& a, const EvalReport& b) {
    if (a.captions != b.captions || a.per_triplet.size() != b.per_triplet.size())
        throw DataError("reports cover different caption sets (" + std::to_string(a.captions) + " vs " +
                        std::to_string(b.captions) + " captions)");
    auto ia = a.per_triplet.begin();
    auto ib = b.per_triplet.begin();
    for (; ia != a.per_triplet.end(); ++ia, ++ib) {
        if (!(ia->first == ib->first) || ia->second.images != ib->second.images) {
            std::ostringstream os;
            os << "reports cover different caption sets: " << ia->first << " vs " << ib->first;
            throw DataError(os.str());
        }
    }
}

inline std::vector<RelationRow> per_relation_table(const EvalReport& report, const EvalReport* baseline = nullptr) {
    if (baseline) require_same_captions(report, *baseline);
    std::vector<RelationRow> rows;
    for (auto r : kAllRelations) {
        RelationRow row{r, report.relation(r), report.relation(r).visor_cond_percent(), std::nullopt, std::nullopt};
        if (baseline) {
            row.baseline_visor_cond = baseline->relation(r).visor_cond_percent();
            if (row.visor_cond && row.baseline_visor_cond) row.delta = *row.visor_cond - *row.baseline_visor_cond;
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::string opt_fixed(const std::optional<double>& v) { return v ? format_fixed(*v) : std::string(); }

inline std::string relation_table_csv(const std::vector<RelationRow>& rows) {
    std::ostringstream os;
    os << "relation,images,oa_count,visor_count,visor_cond,baseline_visor_cond,delta\n";
    for (const auto& r : rows)
        os << to_string(r.relation) << ',' << r.counts.images << ',' << r.counts.oa << ',' << r.counts.visor << ','
           << opt_fixed(r.visor_cond) << ',' << opt_fixed(r.baseline_visor_cond) << ','
           << (r.delta ? format_signed(*r.delta) : std::string()) << '\n';
    return os.str();
}

/// Aligned text: "left_of       62.3 (+4.1)"; "-" marks an absent value.
inline std::string relation_table_text(const std::vector<RelationRow>& rows) {
    std::ostringstream os;
    for (const auto& r : rows) {
        std::string name(to_string(r.relation));
        name.resize(13, ' ');
        std::string value = r.visor_cond ? format_fixed(*r.visor_cond) : "-";
        os << name << std::string(value.size() < 6 ? 6 - value.size() : 0, ' ') << value;
        if (r.delta) os << " (" << format_signed(*r.delta) << ")";
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Opposite-pair bias

struct BiasRow {
    std::string run;
    Relation first;
    Relation second;
    std::optional<double> first_visor_cond;
    std::optional<double> second_visor_cond;
    std::optional<double> delta; // first - second
    bool in_figure = true;      // overlapping/separated is emitted but flagged off
};

struct BiasTable {
    std::vector<BiasRow> rows;
};

inline std::optional<double> bias_delta(const std::optional<double>& a, const std::optional<double>& b) {
    if (!a || !b) return std::nullopt;
    return *a - *b;
}

inline BiasRow bias_row(const EvalReport& report, RelationPair pair, const std::string& run) {
    const auto a = report.relation(pair.first).visor_cond_percent();
    const auto b = report.relation(pair.second).visor_cond_percent();
    const bool topo_pair = (pair.first == Relation::overlapping || pair.first == Relation::separated);
    return {run, pair.first, pair.second, a, b, bias_delta(a, b), !topo_pair};
}

/// All seven opposite pairs for the run, then for the baseline when given.
inline BiasTable bias_table(const EvalReport& report, const EvalReport* baseline = nullptr) {
    if (baseline) require_same_captions(report, *baseline);
    BiasTable t;
    for (const auto& p : kOppositePairs) t.rows.push_back(bias_row(report, p, "model"));
    if (baseline)
        for (const auto& p : kOppositePairs) t.rows.push_back(bias_row(*baseline, p, "baseline"));
    return t;
}

inline std::string bias_table_csv(const BiasTable& t) {
    std::ostringstream os;
    os << "run,first,second,first_visor_cond,second_visor_cond,delta,in_figure\n";
    for (const auto& r : t.rows)
        os << r.run << ',' << to_string(r.first) << ',' << to_string(r.second) << ',' << opt_fixed(r.first_visor_cond)
           << ',' << opt_fixed(r.second_visor_cond) << ',' << (r.delta ? format_signed(*r.delta) : std::string())
           << ',' << (r.in_figure ? "true" : "false") << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Frequency binning

struct FrequencyBin {
    std::uint64_t lo = 0;                 // inclusive
    std::optional<std::uint64_t> hi;      // exclusive; absent = unbounded
    std::size_t triplets = 0;
    MetricCounts pooled;

    std::string label() const {
        if (lo == 0 && hi && *hi == 1) return "0";
        return "[" + std::to_string(lo) + "," + (hi ? std::to_string(*hi) : std::string("inf")) + ")";
    }
};

struct FrequencyBinning {
    std::vector<std::uint64_t> edges;
    std::vector<FrequencyBin> bins;
};

/// Powers of ten from 1 to 1e5.
inline std::vector<std::uint64_t> default_frequency_edges() { return {1, 10, 100, 1000, 10000, 100000}; }

/// Bins report triplets by training frequency and pools counts per bin.
/// Bins: {0}, [1, e0) when e0 > 1, [e_i, e_i+1), [e_last, inf).
inline FrequencyBinning frequency_correlation(const EvalReport& report, const TripletTable& freq,
                                              std::vector<std::uint64_t> edges = default_frequency_edges()) {
    if (edges.empty()) throw UsageError("frequency edges must not be empty");
    if (edges.front() < 1) throw UsageError("frequency edges must be >= 1 (zero counts have their own bin)");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (edges[i] <= edges[i - 1]) throw UsageError("frequency edges must be strictly increasing");

    FrequencyBinning out;
    out.edges = edges;
    out.bins.push_back({0, 1, 0, {}});
    if (edges.front() > 1) out.bins.push_back({1, edges.front(), 0, {}});
    for (std::size_t i = 0; i + 1 < edges.size(); ++i) out.bins.push_back({edges[i], edges[i + 1], 0, {}});
    out.bins.push_back({edges.back(), std::nullopt, 0, {}});

    for (const auto& [t, counts] : report.per_triplet) {
        const auto c = freq.count(t);
        auto it = std::find_if(out.bins.begin(), out.bins.end(),
                               [&](const FrequencyBin& b) { return c >= b.lo && (!b.hi || c < *b.hi); });
        if (it == out.bins.end()) throw InvariantError("frequency bins do not cover count " + std::to_string(c));
        ++it->triplets;
        it->pooled += counts;
    }
    return out;
}

inline std::string frequency_csv(const FrequencyBinning& model, const FrequencyBinning* baseline = nullptr) {
    std::ostringstream os;
    os << "bin,lo,hi,triplets,oa_count,visor_count,visor_cond";
    if (baseline) os << ",baseline_oa_count,baseline_visor_count,baseline_visor_cond";
    os << '\n';
    for (std::size_t i = 0; i < model.bins.size(); ++i) {
        const auto& b = model.bins[i];
        os << '"' << b.label() << "\"," << b.lo << ',' << (b.hi ? std::to_string(*b.hi) : std::string("inf")) << ','
           << b.triplets << ',' << b.pooled.oa << ',' << b.pooled.visor << ',' << opt_fixed(b.pooled.visor_cond_percent());
        if (baseline) {
            const auto& c = baseline->bins.at(i).pooled;
            os << ',' << c.oa << ',' << c.visor << ',' << opt_fixed(c.visor_cond_percent());
        }
        os << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Qualitative sampling

struct QualitativeSample {
    std::vector<SpatialTriplet> triplets; // sorted
    std::size_t eligible = 0;
    std::size_t short_by = 0; // requested minus returned
};

/// Uniform sample without replacement of triplets whose count lies in [lo, hi].
inline QualitativeSample sample_qualitative_triplets(const TripletTable& freq, std::uint64_t lo, std::uint64_t hi,
                                                     std::size_t n, std::uint64_t seed) {
    if (!(lo < hi)) throw UsageError("qualitative sampling needs lo < hi");
    std::vector<SpatialTriplet> pool;
    for (const auto& [t, c] : freq)
        if (c >= lo && c <= hi) pool.push_back(t);
    QualitativeSample out;
    out.eligible = pool.size();
    out.short_by = n > pool.size() ? n - pool.size() : 0;
    Rng rng(derive_seed(seed, 3));
    out.triplets = sample_without_replacement(std::move(pool), n, rng);
    std::sort(out.triplets.begin(), out.triplets.end());
    return out;
}

/// Writes CSV text with a leading "# provenance: {...}" comment line.
inline void write_csv(const std::filesystem::path& path, const std::string& body, const json& provenance) {
    write_atomically(path, [&](std::ostream& os) { os << "# provenance: " << provenance.dump() << '\n' << body; });
}

} // namespace spatialrel
