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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "triplets.hpp"
#include "vocabulary.hpp"

namespace spatialrel {

enum class SplitKind { main, unseen };

inline std::string_view to_string(SplitKind k) noexcept { return k == SplitKind::main ? "main" : "unseen"; }

inline SplitKind parse_split_kind(std::string_view s) {
    if (s == "main") return SplitKind::main;
    if (s == "unseen") return SplitKind::unseen;
    throw UsageError("unknown split kind '" + std::string(s) + "' (expected main or unseen)");
}

inline constexpr std::size_t kDefaultValSize = 2500;

struct SplitManifest {
    SplitKind kind = SplitKind::main;
    std::uint64_t seed = 0;
    /// For the main split every list holds the full vocabulary.
    ObjectPartition partition;
    std::vector<SpatialTriplet> test_triplets; // sorted
    std::vector<SpatialTriplet> val_triplets;  // sorted
    std::size_t val_candidates = 0;            // naturally-occurring val candidates
    std::size_t val_candidate_universe = 0;    // before the natural filter (unseen only)
    std::size_t train_label_triplets = 0;      // natural triplets over training objects
    std::vector<std::string> notes;
};

/// Val candidates before the natural filter: ordered pairs with at least one
/// val object and no test object, times 14 relations. Ordered val-val pairs
/// give 6,580 for (45, 5).
constexpr std::uint64_t count_candidate_val_triplets(std::uint64_t n_train, std::uint64_t n_val) noexcept {
    const std::uint64_t val_val = n_val == 0 ? 0 : n_val * (n_val - 1);
    return (2 * n_train * n_val + val_val) * kRelationCount;
}

namespace detail {

inline std::vector<SpatialTriplet> sample_sorted(std::vector<SpatialTriplet> pool, std::size_t k, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 2));
    auto picked = sample_without_replacement(std::move(pool), k, rng);
    std::sort(picked.begin(), picked.end());
    return picked;
}

} // namespace detail

/// Test = every naturally-occurring triplet; val = uniform sample of
/// `val_size` of them (so val is a subset of test).
inline SplitManifest build_main_split(const TripletTable& natural, const Vocabulary& vocab, std::uint64_t seed,
                                      std::size_t val_size = kDefaultValSize) {
    if (natural.empty()) throw DataError("main split: naturally-occurring table is empty");
    if (natural.size() < val_size)
        throw DataError("main split: only " + std::to_string(natural.size()) + " naturally-occurring triplets, " +
                        std::to_string(val_size) + " requested for validation");
    SplitManifest m;
    m.kind = SplitKind::main;
    m.seed = seed;
    m.partition = {vocab.labels(), vocab.labels(), vocab.labels()};
    m.test_triplets = natural.triplets();
    m.val_candidates = natural.size();
    m.train_label_triplets = natural.size();
    m.val_triplets = detail::sample_sorted(m.test_triplets, val_size, seed);
    return m;
}

/// Seeded three-way partition of the vocabulary.
inline ObjectPartition random_partition(const Vocabulary& vocab, std::uint64_t seed, std::size_t n_train = 45,
                                        std::size_t n_val = 5) {
    if (n_train + n_val > vocab.size())
        throw UsageError("partition sizes " + std::to_string(n_train) + "+" + std::to_string(n_val) +
                         " exceed vocabulary size " + std::to_string(vocab.size()));
    Rng rng(derive_seed(seed, 1));
    auto labels = vocab.labels();
    partial_shuffle(labels, labels.size(), rng);
    ObjectPartition p;
    p.train_objects.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_train));
    p.val_objects.assign(labels.begin() + static_cast<std::ptrdiff_t>(n_train),
                         labels.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    p.test_objects.assign(labels.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), labels.end());
    return p;
}

/// Unseen split over `partition` (the canonical 45/5/30 one when absent).
/// Test triplets use only test objects; val candidates mention at least one
/// val object and no test object.
inline SplitManifest build_unseen_split(const TripletTable& natural, const Vocabulary& vocab, std::uint64_t seed,
                                        std::size_t val_size = kDefaultValSize,
                                        std::optional<ObjectPartition> partition = std::nullopt) {
    SplitManifest m;
    m.kind = SplitKind::unseen;
    m.seed = seed;
    m.partition = partition ? std::move(*partition) : canonical_unseen_partition();
    try {
        validate_partition(m.partition, vocab);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("unseen split: ") + e.what());
    }
    const std::set<std::string> train(m.partition.train_objects.begin(), m.partition.train_objects.end());
    const std::set<std::string> val(m.partition.val_objects.begin(), m.partition.val_objects.end());
    const std::set<std::string> test(m.partition.test_objects.begin(), m.partition.test_objects.end());

    std::vector<SpatialTriplet> candidates;
    for (const auto& [t, n] : natural) {
        const bool s_test = test.count(t.subject) != 0, o_test = test.count(t.object) != 0;
        const bool s_val = val.count(t.subject) != 0, o_val = val.count(t.object) != 0;
        if (s_test && o_test) m.test_triplets.push_back(t);
        else if (!s_test && !o_test && (s_val || o_val)) candidates.push_back(t);
        else if (train.count(t.subject) && train.count(t.object)) ++m.train_label_triplets;
    }
    m.val_candidates = candidates.size();
    m.val_candidate_universe = count_candidate_val_triplets(train.size(), val.size());
    if (candidates.size() < val_size)
        throw DataError("unseen split: " + std::to_string(candidates.size()) +
                        " naturally-occurring val candidates, short of the requested " + std::to_string(val_size) +
                        " by " + std::to_string(val_size - candidates.size()));
    m.val_triplets = detail::sample_sorted(std::move(candidates), val_size, seed);
    m.notes.push_back("train_label_triplets counts label-level triplets over training objects (at most "
                      "n_train*(n_train-1)*14); unique training captions built from k concatenated captions are "
                      "a different unit and can exceed it");
    return m;
}

// ---------------------------------------------------------------------------

inline json to_json(const ObjectPartition& p) {
    return json{{"train_objects", p.train_objects}, {"val_objects", p.val_objects}, {"test_objects", p.test_objects}};
}

inline ObjectPartition partition_from_json(const json& j, const std::string& ctx) {
    return ObjectPartition{require<std::vector<std::string>>(j, "train_objects", ctx),
                           require<std::vector<std::string>>(j, "val_objects", ctx),
                           require<std::vector<std::string>>(j, "test_objects", ctx)};
}

inline json to_json(const SplitManifest& m) {
    json test = json::array(), val = json::array();
    for (const auto& t : m.test_triplets) test.push_back(to_json(t));
    for (const auto& t : m.val_triplets) val.push_back(to_json(t));
    return json{{"split_kind", std::string(to_string(m.kind))},
                {"seed", m.seed},
                {"partition", to_json(m.partition)},
                {"counts",
                 {{"test", m.test_triplets.size()},
                  {"val", m.val_triplets.size()},
                  {"val_candidates", m.val_candidates},
                  {"val_candidate_universe", m.val_candidate_universe},
                  {"train_label_triplets", m.train_label_triplets}}},
                {"notes", m.notes},
                {"test_triplets", std::move(test)},
                {"val_triplets", std::move(val)}};
}

inline SplitManifest manifest_from_json(const json& j, const std::string& ctx) {
    SplitManifest m;
    m.kind = parse_split_kind(require<std::string>(j, "split_kind", ctx));
    m.seed = require<std::uint64_t>(j, "seed", ctx);
    m.partition = partition_from_json(require<json>(j, "partition", ctx), ctx + ": partition");
    for (const auto& t : require<json>(j, "test_triplets", ctx)) m.test_triplets.push_back(triplet_from_json(t, ctx));
    for (const auto& t : require<json>(j, "val_triplets", ctx)) m.val_triplets.push_back(triplet_from_json(t, ctx));
    if (j.contains("counts")) {
        const auto& c = j["counts"];
        m.val_candidates = c.value("val_candidates", std::size_t{0});
        m.val_candidate_universe = c.value("val_candidate_universe", std::size_t{0});
        m.train_label_triplets = c.value("train_label_triplets", std::size_t{0});
    }
    if (j.contains("notes")) m.notes = j["notes"].get<std::vector<std::string>>();
    return m;
}

inline void write_manifest(const std::filesystem::path& path, const SplitManifest& m, const json& provenance) {
    auto doc = to_json(m);
    doc["provenance"] = provenance;
    write_json_file(path, doc);
}

inline SplitManifest read_manifest(const std::filesystem::path& path) {
    return manifest_from_json(read_json_file(path), path.string());
}

inline ObjectPartition read_partition(const std::filesystem::path& path) {
    return partition_from_json(read_json_file(path), path.string());
}

} // namespace spatialrel
