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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "triplets.hpp"

namespace spatialrel {

struct Detection {
    std::string label;
    double score = 0.0;
    BBox bbox;
};

struct DetectionSet {
    std::string caption_id;
    std::size_t image_index = 0;
    std::vector<Detection> detections;
};

/// How a relation is checked when a label has several detections.
enum class PairingMode {
    best_score, // highest-scoring detection per label
    any_pair,   // any (subject, object) detection pair
};

inline std::string_view to_string(PairingMode m) noexcept {
    return m == PairingMode::best_score ? "best_score" : "any_pair";
}

inline PairingMode parse_pairing_mode(std::string_view s) {
    if (s == "best_score") return PairingMode::best_score;
    if (s == "any_pair") return PairingMode::any_pair;
    throw UsageError("unknown pairing mode '" + std::string(s) + "' (expected best_score or any_pair)");
}

struct EvalConfig {
    double score_threshold = 0.1; // detections with score >= threshold count
    std::size_t images_per_caption = 4;
    PairingMode pairing = PairingMode::best_score;
    RelationConfig relation;

    void validate() const {
        if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) throw UsageError("threshold must lie in [0, 1]");
        if (images_per_caption < 1) throw UsageError("images_per_caption must be >= 1");
    }
};

inline json to_json(const EvalConfig& c) {
    return json{{"score_threshold", c.score_threshold},
                {"images_per_caption", c.images_per_caption},
                {"pairing", std::string(to_string(c.pairing))},
                {"containment_tolerance", c.relation.containment_tolerance}};
}

namespace detail {

// Index of the first highest-scoring detection of `label` at or above threshold.
inline std::optional<std::size_t> best_detection(const std::vector<Detection>& dets, const std::string& label,
                                                 double threshold) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (dets[i].label != label || dets[i].score < threshold) continue;
        if (!best || dets[i].score > dets[*best].score) best = i;
    }
    return best;
}

} // namespace detail

/// 1 iff both labels are detected at or above the threshold.
inline int object_accuracy(const DetectionSet& d, const SpatialTriplet& t, const EvalConfig& cfg) {
    const bool s = detail::best_detection(d.detections, t.subject, cfg.score_threshold).has_value();
    const bool o = detail::best_detection(d.detections, t.object, cfg.score_threshold).has_value();
    return s && o ? 1 : 0;
}

/// 1 iff both objects are detected and the relation holds between their boxes.
inline int visor(const DetectionSet& d, const SpatialTriplet& t, const EvalConfig& cfg) {
    const auto s = detail::best_detection(d.detections, t.subject, cfg.score_threshold);
    const auto o = detail::best_detection(d.detections, t.object, cfg.score_threshold);
    if (!s || !o) return 0;
    if (cfg.pairing == PairingMode::best_score)
        return holds(t.relation, d.detections[*s].bbox, d.detections[*o].bbox, cfg.relation) ? 1 : 0;
    for (const auto& a : d.detections) {
        if (a.label != t.subject || a.score < cfg.score_threshold) continue;
        for (const auto& b : d.detections) {
            if (b.label != t.object || b.score < cfg.score_threshold) continue;
            if (holds(t.relation, a.bbox, b.bbox, cfg.relation)) return 1;
        }
    }
    return 0;
}

/// Integer tallies behind the three percentages; merging is plain addition.
struct MetricCounts {
    std::uint64_t images = 0;
    std::uint64_t oa = 0;
    std::uint64_t visor = 0;

    MetricCounts& operator+=(const MetricCounts& o) {
        images += o.images;
        oa += o.oa;
        visor += o.visor;
        return *this;
    }
    friend bool operator==(const MetricCounts&, const MetricCounts&) = default;

    std::optional<double> oa_percent() const {
        if (images == 0) return std::nullopt;
        return 100.0 * static_cast<double>(oa) / static_cast<double>(images);
    }
    std::optional<double> visor_percent() const {
        if (images == 0) return std::nullopt;
        return 100.0 * static_cast<double>(visor) / static_cast<double>(images);
    }
    /// Absent when no image had both objects detected.
    std::optional<double> visor_cond_percent() const {
        if (oa == 0) return std::nullopt;
        return 100.0 * static_cast<double>(visor) / static_cast<double>(oa);
    }
};

struct EvalReport {
    EvalConfig config;
    std::size_t captions = 0;
    MetricCounts overall;
    std::array<MetricCounts, kRelationCount> per_relation{};
    std::map<SpatialTriplet, MetricCounts> per_triplet;

    const MetricCounts& relation(Relation r) const { return per_relation[index_of(r)]; }
};

/// Scores every (caption, image). Each caption needs exactly
/// images_per_caption detection sets with indices 0..n-1; violations are
/// collected and reported together as a DataError naming the caption ids.
inline EvalReport aggregate(const std::vector<DetectionSet>& run, const std::vector<CaptionRecord>& captions,
                            const EvalConfig& cfg) {
    cfg.validate();
    std::map<std::string, const CaptionRecord*> by_id;
    for (const auto& c : captions)
        if (!by_id.emplace(c.caption_id, &c).second) throw DataError("duplicate caption_id " + c.caption_id);

    std::map<std::string, std::vector<const DetectionSet*>> slots;
    std::set<std::string> unknown, bad_index, duplicated, incomplete;
    for (const auto& c : captions) slots[c.caption_id].assign(cfg.images_per_caption, nullptr);
    for (const auto& d : run) {
        auto it = slots.find(d.caption_id);
        if (it == slots.end()) {
            unknown.insert(d.caption_id);
            continue;
        }
        if (d.image_index >= cfg.images_per_caption) {
            bad_index.insert(d.caption_id);
            continue;
        }
        auto& slot = it->second[d.image_index];
        if (slot) duplicated.insert(d.caption_id);
        slot = &d;
    }
    for (const auto& [id, v] : slots)
        for (const auto* p : v)
            if (!p) incomplete.insert(id);

    if (!unknown.empty() || !bad_index.empty() || !duplicated.empty() || !incomplete.empty()) {
        std::string msg = "detection sets do not match captions (expected " + std::to_string(cfg.images_per_caption) +
                          " per caption)";
        auto list = [&](const char* what, const std::set<std::string>& ids) {
            if (ids.empty()) return;
            msg += "; ";
            msg += what;
            msg += ":";
            std::size_t shown = 0;
            for (const auto& id : ids) {
                if (shown++ == 20) {
                    msg += " ... (" + std::to_string(ids.size()) + " total)";
                    break;
                }
                msg += " " + id;
            }
        };
        list("missing detection sets for", incomplete);
        list("unknown caption_ids", unknown);
        list("image_index out of range for", bad_index);
        list("duplicate image_index for", duplicated);
        throw DataError(msg);
    }

    EvalReport rep;
    rep.config = cfg;
    rep.captions = captions.size();
    for (const auto& c : captions) {
        MetricCounts mc;
        for (const auto* d : slots[c.caption_id]) {
            const int oa = object_accuracy(*d, c.triplet, cfg);
            const int vi = visor(*d, c.triplet, cfg);
            if (vi > oa) throw InvariantError("visor exceeds object accuracy for " + c.caption_id);
            mc += MetricCounts{1, static_cast<std::uint64_t>(oa), static_cast<std::uint64_t>(vi)};
        }
        rep.overall += mc;
        rep.per_relation[index_of(c.triplet.relation)] += mc;
        rep.per_triplet[c.triplet] += mc;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline json percent_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json to_json(const MetricCounts& m) {
    return json{{"images", m.images},
                {"oa_count", m.oa},
                {"visor_count", m.visor},
                {"oa", percent_json(m.oa_percent())},
                {"visor", percent_json(m.visor_percent())},
                {"visor_cond", percent_json(m.visor_cond_percent())}};
}

inline MetricCounts counts_from_json(const json& j, const std::string& ctx) {
    return MetricCounts{require<std::uint64_t>(j, "images", ctx), require<std::uint64_t>(j, "oa_count", ctx),
                        require<std::uint64_t>(j, "visor_count", ctx)};
}

inline json to_json(const EvalReport& r) {
    json rel = json::array();
    for (auto x : kAllRelations) {
        auto j = to_json(r.relation(x));
        j["relation"] = std::string(to_string(x));
        rel.push_back(std::move(j));
    }
    json pairs = json::array();
    for (const auto& p : kOppositePairs) {
        const auto a = r.relation(p.first).visor_cond_percent();
        const auto b = r.relation(p.second).visor_cond_percent();
        pairs.push_back({{"first", std::string(to_string(p.first))},
                         {"second", std::string(to_string(p.second))},
                         {"first_visor_cond", percent_json(a)},
                         {"second_visor_cond", percent_json(b)},
                         {"delta", (a && b) ? json(*a - *b) : json(nullptr)}});
    }
    json trip = json::array();
    for (const auto& [t, m] : r.per_triplet) {
        auto j = to_json(m);
        j.update(to_json(t));
        trip.push_back(std::move(j));
    }
    return json{{"config", to_json(r.config)},
                {"captions", r.captions},
                {"overall", to_json(r.overall)},
                {"per_relation", std::move(rel)},
                {"opposite_pairs", std::move(pairs)},
                {"per_triplet", std::move(trip)}};
}

inline EvalReport report_from_json(const json& j, const std::string& ctx) {
    EvalReport r;
    const auto cfg = require<json>(j, "config", ctx);
    r.config.score_threshold = require<double>(cfg, "score_threshold", ctx);
    r.config.images_per_caption = require<std::size_t>(cfg, "images_per_caption", ctx);
    r.config.pairing = parse_pairing_mode(require<std::string>(cfg, "pairing", ctx));
    r.config.relation.containment_tolerance = cfg.value("containment_tolerance", 0.0);
    r.captions = require<std::size_t>(j, "captions", ctx);
    r.overall = counts_from_json(require<json>(j, "overall", ctx), ctx + ": overall");
    for (const auto& row : require<json>(j, "per_relation", ctx)) {
        const auto name = require<std::string>(row, "relation", ctx);
        auto rel = try_parse_relation(name);
        if (!rel) throw SchemaError(ctx + ": unknown relation '" + name + "'");
        r.per_relation[index_of(*rel)] = counts_from_json(row, ctx + ": per_relation " + name);
    }
    for (const auto& row : require<json>(j, "per_triplet", ctx))
        r.per_triplet[triplet_from_json(row, ctx)] = counts_from_json(row, ctx + ": per_triplet");
    return r;
}

inline void write_report(const std::filesystem::path& path, const EvalReport& r, const json& provenance) {
    auto doc = to_json(r);
    doc["provenance"] = provenance;
    write_json_file(path, doc);
}

inline EvalReport read_report(const std::filesystem::path& path) {
    return report_from_json(read_json_file(path), path.string());
}

inline json to_json(const DetectionSet& d) {
    json dets = json::array();
    for (const auto& x : d.detections)
        dets.push_back({{"label", x.label}, {"score", x.score}, {"bbox", x.bbox.corners()}});
    return json{{"caption_id", d.caption_id}, {"image_index", d.image_index}, {"detections", std::move(dets)}};
}

/// Parses one detections line. Boxes are pixel corners unless the record
/// sets "normalized": true together with "image_size": [w, h].
inline DetectionSet detection_set_from_json(const json& rec, const std::string& ctx) {
    DetectionSet d;
    d.caption_id = require<std::string>(rec, "caption_id", ctx);
    d.image_index = require<std::size_t>(rec, "image_index", ctx);
    double sx = 1.0, sy = 1.0;
    if (rec.contains("normalized") && rec["normalized"].is_boolean() && rec["normalized"].get<bool>()) {
        const auto size = require<std::vector<double>>(rec, "image_size", ctx);
        if (size.size() != 2 || !(size[0] > 0.0) || !(size[1] > 0.0))
            throw SchemaError(ctx + ": normalized boxes need a positive image_size [w, h]");
        sx = size[0];
        sy = size[1];
    }
    for (const auto& x : require<json>(rec, "detections", ctx)) {
        Detection det;
        det.label = require<std::string>(x, "label", ctx);
        det.score = require<double>(x, "score", ctx);
        if (!(det.score >= 0.0 && det.score <= 1.0)) throw SchemaError(ctx + ": score outside [0, 1]");
        const auto c = require<std::vector<double>>(x, "bbox", ctx);
        if (c.size() != 4) throw SchemaError(ctx + ": bbox must have 4 numbers");
        const double x0 = c[0] * sx, y0 = c[1] * sy, x1 = c[2] * sx, y1 = c[3] * sy;
        if (!BBox::is_valid(x0, y0, x1, y1)) throw SchemaError(ctx + ": invalid bbox");
        det.bbox = BBox(x0, y0, x1, y1);
        d.detections.push_back(std::move(det));
    }
    return d;
}

inline std::vector<DetectionSet> read_detections(const std::filesystem::path& path) {
    std::vector<DetectionSet> out;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        out.push_back(detection_set_from_json(rec, path.string() + ":" + std::to_string(line)));
    });
    return out;
}

inline void write_detections(const std::filesystem::path& path, const std::vector<DetectionSet>& sets,
                             const json& provenance) {
    write_jsonl(path, provenance, sets, [](const DetectionSet& d) { return to_json(d); });
}

} // namespace spatialrel
