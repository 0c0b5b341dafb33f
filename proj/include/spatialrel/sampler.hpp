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
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "rng.hpp"
#include "triplets.hpp"

namespace spatialrel {

struct SamplerConfig {
    std::size_t k = 2;         // captions concatenated per sample
    std::size_t max_iter = 10; // crop redraws before falling back to the full image
    double crop_scale_min = 0.5;
    double crop_scale_max = 1.0; // crop area as a fraction of the image area
    double flip_probability = 0.5;
    std::optional<std::set<std::string>> allowed_objects;
    double min_visible_area = 0.0; // eligible iff visible area is strictly greater
    std::uint64_t seed = 0;
    RelationConfig relation;
    std::size_t max_pair_redraws = 32;
    std::size_t max_attempts_per_sample = 100;
    std::size_t max_global_failures = 100000;
    ArticlePolicy articles = ArticlePolicy::indefinite;

    void validate() const {
        if (k < 1) throw UsageError("sampler: k must be >= 1");
        if (max_iter < 1) throw UsageError("sampler: max_iter must be >= 1");
        if (!(crop_scale_min > 0.0) || !(crop_scale_max <= 1.0) || crop_scale_min > crop_scale_max)
            throw UsageError("sampler: crop scale range must satisfy 0 < min <= max <= 1");
        if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
            throw UsageError("sampler: flip_probability must lie in [0, 1]");
        if (!(min_visible_area >= 0.0)) throw UsageError("sampler: min_visible_area must be >= 0");
    }
};

inline json to_json(const SamplerConfig& c) {
    json j{{"k", c.k},
           {"max_iter", c.max_iter},
           {"crop_scale_range", {c.crop_scale_min, c.crop_scale_max}},
           {"flip_probability", c.flip_probability},
           {"min_visible_area", c.min_visible_area},
           {"seed", c.seed},
           {"containment_tolerance", c.relation.containment_tolerance},
           {"articles", std::string(to_string(c.articles))}};
    if (c.allowed_objects) j["allowed_objects"] = *c.allowed_objects;
    else j["allowed_objects"] = nullptr;
    return j;
}

/// What was done to an image: flip first, then crop. The crop window is in
/// the (possibly flipped) image's coordinates.
struct AugmentationRecord {
    bool flipped = false;
    std::optional<BBox> crop;

    friend bool operator==(const AugmentationRecord&, const AugmentationRecord&) = default;
};

struct AugmentResult {
    ImageAnnotations image;
    AugmentationRecord record;
};

inline bool is_eligible(const ObjectInstance& o, const SamplerConfig& cfg) {
    if (cfg.allowed_objects && cfg.allowed_objects->count(o.label) == 0) return false;
    return o.bbox.area() > cfg.min_visible_area;
}

inline std::size_t count_eligible(const ImageAnnotations& img, const SamplerConfig& cfg) {
    return static_cast<std::size_t>(
        std::count_if(img.objects.begin(), img.objects.end(), [&](const auto& o) { return is_eligible(o, cfg); }));
}

inline ImageAnnotations flip_image(const ImageAnnotations& img) {
    ImageAnnotations out = img;
    for (auto& o : out.objects) o.bbox = flip_h(o.bbox, img.width);
    return out;
}

/// Crops every box to `window`; objects left with no area are dropped.
inline ImageAnnotations crop_image(const ImageAnnotations& img, const BBox& window) {
    ImageAnnotations out;
    out.image_id = img.image_id;
    out.width = window.width();
    out.height = window.height();
    for (const auto& o : img.objects)
        if (auto b = crop(o.bbox, window)) out.objects.push_back({o.instance_id, o.label, *b});
    return out;
}

/// Re-applies a recorded augmentation to the original image.
inline ImageAnnotations replay_augmentation(const ImageAnnotations& img, const AugmentationRecord& rec) {
    ImageAnnotations out = rec.flipped ? flip_image(img) : img;
    if (rec.crop) out = crop_image(out, *rec.crop);
    return out;
}

/// Random flip, then a random crop redrawn up to max_iter times until at
/// least two eligible objects survive; falls back to the uncropped image.
inline AugmentResult augment(const ImageAnnotations& img, const SamplerConfig& cfg, Rng& rng) {
    if (count_eligible(img, cfg) < 2)
        throw NotEnoughObjects("image " + std::to_string(img.image_id) + " has fewer than 2 eligible objects");
    AugmentResult res;
    res.record.flipped = bernoulli(rng, cfg.flip_probability);
    const ImageAnnotations base = res.record.flipped ? flip_image(img) : img;

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        const double scale = uniform_real(rng, cfg.crop_scale_min, cfg.crop_scale_max);
        const double side = std::sqrt(scale);
        const double w = base.width * side, h = base.height * side;
        const double x0 = uniform_real(rng, 0.0, base.width - w);
        const double y0 = uniform_real(rng, 0.0, base.height - h);
        const BBox window(x0, y0, std::min(x0 + w, base.width), std::min(y0 + h, base.height));
        auto cropped = crop_image(base, window);
        if (count_eligible(cropped, cfg) >= 2) {
            res.image = std::move(cropped);
            res.record.crop = window;
            return res;
        }
    }
    res.image = base;
    return res;
}

struct SampledCaption {
    SpatialTriplet triplet;
    std::string text;
    std::size_t subject_index = 0; // into image.objects
    std::size_t object_index = 0;
};

namespace detail {

inline std::vector<std::pair<std::size_t, std::size_t>> distinct_label_pairs(const ImageAnnotations& img,
                                                                             const SamplerConfig& cfg) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < img.objects.size(); ++i)
        if (is_eligible(img.objects[i], cfg)) eligible.push_back(i);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (auto i : eligible)
        for (auto j : eligible)
            if (i != j && img.objects[i].label != img.objects[j].label) pairs.emplace_back(i, j);
    return pairs;
}

inline SampledCaption caption_for(const ImageAnnotations& img, std::size_t s, std::size_t o, Relation r,
                                  const SamplerConfig& cfg) {
    SpatialTriplet t{img.objects[s].label, r, img.objects[o].label};
    auto text = verbalize(t, cfg.articles);
    return {std::move(t), std::move(text), s, o};
}

} // namespace detail

/// One caption: a uniformly drawn ordered pair of distinct-label eligible
/// objects, then a uniformly drawn relation among those that hold.
inline SampledCaption sample_caption(const ImageAnnotations& img, const SamplerConfig& cfg, Rng& rng) {
    const auto pairs = detail::distinct_label_pairs(img, cfg);
    if (pairs.empty()) throw NotEnoughObjects("image " + std::to_string(img.image_id) + " has no distinct-label pair");
    for (std::size_t attempt = 0; attempt < cfg.max_pair_redraws; ++attempt) {
        const auto [s, o] = pairs[uniform_index(rng, pairs.size())];
        const auto rels = valid_relations(img.objects[s].bbox, img.objects[o].bbox, cfg.relation).to_vector();
        if (rels.empty()) continue;
        return detail::caption_for(img, s, o, rels[uniform_index(rng, rels.size())], cfg);
    }
    throw NotEnoughObjects("image " + std::to_string(img.image_id) + ": no pair with a valid relation");
}

/// k captions over k distinct ordered instance pairs of the same image.
inline std::vector<SampledCaption> sample_captions(const ImageAnnotations& img, const SamplerConfig& cfg, Rng& rng,
                                                   std::size_t k) {
    auto pairs = detail::distinct_label_pairs(img, cfg);
    std::vector<SampledCaption> out;
    for (std::size_t i = 0; i < pairs.size() && out.size() < k; ++i) {
        const std::size_t j = i + uniform_index(rng, pairs.size() - i);
        std::swap(pairs[i], pairs[j]);
        const auto [s, o] = pairs[i];
        const auto rels = valid_relations(img.objects[s].bbox, img.objects[o].bbox, cfg.relation).to_vector();
        if (rels.empty()) continue;
        out.push_back(detail::caption_for(img, s, o, rels[uniform_index(rng, rels.size())], cfg));
    }
    if (out.size() < k)
        throw NotEnoughObjects("image " + std::to_string(img.image_id) + " supports " + std::to_string(out.size()) +
                               " of " + std::to_string(k) + " requested captions");
    return out;
}

struct EmittedTriplet {
    SpatialTriplet triplet;
    std::int64_t subject_instance = 0;
    std::int64_t object_instance = 0;
    BBox subject_bbox; // post-augmentation
    BBox object_bbox;
};

struct TrainingSample {
    std::size_t sample_index = 0;
    std::int64_t image_id = 0;
    std::string text;
    std::vector<EmittedTriplet> triplets;
    AugmentationRecord augmentation;
    double width = 0.0; // augmented image size
    double height = 0.0;
    std::uint64_t seed = 0; // replays this sample on its own
    std::size_t failures = 0;
};

/// Images that can supply k distinct ordered distinct-label pairs before
/// augmentation.
inline std::vector<std::size_t> sampling_pool(const std::vector<ImageAnnotations>& corpus, const SamplerConfig& cfg) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (detail::distinct_label_pairs(corpus[i], cfg).size() >= cfg.k) pool.push_back(i);
    return pool;
}

/// Draws sample `index` of the stream defined by cfg.seed. Each sample owns
/// an RNG seeded from (seed, index), so samples can be produced in any order
/// or in parallel.
inline TrainingSample draw_sample(const std::vector<ImageAnnotations>& corpus, const std::vector<std::size_t>& pool,
                                  const SamplerConfig& cfg, std::size_t index) {
    TrainingSample out;
    out.sample_index = index;
    out.seed = derive_seed(cfg.seed, index);
    Rng rng(out.seed);
    for (std::size_t attempt = 0; attempt < cfg.max_attempts_per_sample; ++attempt) {
        const auto& img = corpus[pool[uniform_index(rng, pool.size())]];
        try {
            auto aug = augment(img, cfg, rng);
            auto caps = sample_captions(aug.image, cfg, rng, cfg.k);
            out.image_id = img.image_id;
            out.augmentation = aug.record;
            out.width = aug.image.width;
            out.height = aug.image.height;
            for (const auto& c : caps) {
                if (!out.text.empty()) out.text += ' ';
                out.text += c.text;
                const auto& s = aug.image.objects[c.subject_index];
                const auto& o = aug.image.objects[c.object_index];
                out.triplets.push_back({c.triplet, s.instance_id, o.instance_id, s.bbox, o.bbox});
            }
            return out;
        } catch (const NotEnoughObjects&) {
            ++out.failures;
        }
    }
    throw DataError("sampler: sample " + std::to_string(index) + " failed " +
                    std::to_string(cfg.max_attempts_per_sample) + " times");
}

/// Samples [0, n) of the seeded stream, ordered by index; identical output
/// for any thread count.
inline std::vector<TrainingSample> sample_training_batch(const std::vector<ImageAnnotations>& corpus,
                                                         const SamplerConfig& cfg, std::size_t n,
                                                         unsigned threads = 1) {
    cfg.validate();
    if (corpus.empty()) throw DataError("sampler: corpus is empty");
    const auto pool = sampling_pool(corpus, cfg);
    if (pool.empty()) throw DataError("sampler: no image has enough eligible distinct-label objects");
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));

    std::vector<TrainingSample> out(n);
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](unsigned w) {
        try {
            for (std::size_t i = w; i < n; i += threads) out[i] = draw_sample(corpus, pool, cfg, i);
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> workers;
        for (unsigned w = 0; w < threads; ++w) workers.emplace_back(work, w);
        for (auto& t : workers) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::size_t failures = 0;
    for (const auto& s : out) failures += s.failures;
    if (failures > cfg.max_global_failures)
        throw DataError("sampler: " + std::to_string(failures) + " failed draws exceed the global budget of " +
                        std::to_string(cfg.max_global_failures));
    return out;
}

// ---------------------------------------------------------------------------

inline json to_json(const TrainingSample& s) {
    json trips = json::array();
    for (const auto& t : s.triplets) {
        auto j = to_json(t.triplet);
        j["subject_instance"] = t.subject_instance;
        j["object_instance"] = t.object_instance;
        j["subject_bbox"] = t.subject_bbox.corners();
        j["object_bbox"] = t.object_bbox.corners();
        trips.push_back(std::move(j));
    }
    json j{{"sample_index", s.sample_index}, {"image_id", s.image_id}, {"text", s.text},
           {"triplets", std::move(trips)},   {"flip", s.augmentation.flipped}, {"image_size", {s.width, s.height}},
           {"seed", s.seed}};
    if (s.augmentation.crop) j["crop"] = s.augmentation.crop->corners();
    else j["crop"] = nullptr;
    return j;
}

inline TrainingSample sample_from_json(const json& rec, const std::string& ctx) {
    auto box = [&](const json& j, const char* key) {
        const auto c = require<std::vector<double>>(j, key, ctx);
        if (c.size() != 4 || !BBox::is_valid(c[0], c[1], c[2], c[3])) throw SchemaError(ctx + ": bad box in " + key);
        return BBox(c[0], c[1], c[2], c[3]);
    };
    TrainingSample s;
    s.sample_index = require<std::size_t>(rec, "sample_index", ctx);
    s.image_id = require<std::int64_t>(rec, "image_id", ctx);
    s.text = require<std::string>(rec, "text", ctx);
    s.seed = require<std::uint64_t>(rec, "seed", ctx);
    s.augmentation.flipped = require<bool>(rec, "flip", ctx);
    if (!rec.contains("crop")) throw SchemaError(ctx + ": missing field 'crop'");
    if (!rec["crop"].is_null()) s.augmentation.crop = box(rec, "crop");
    const auto size = require<std::vector<double>>(rec, "image_size", ctx);
    if (size.size() != 2) throw SchemaError(ctx + ": image_size must have 2 numbers");
    s.width = size[0];
    s.height = size[1];
    for (const auto& t : require<json>(rec, "triplets", ctx)) {
        EmittedTriplet e;
        e.triplet = triplet_from_json(t, ctx);
        e.subject_instance = require<std::int64_t>(t, "subject_instance", ctx);
        e.object_instance = require<std::int64_t>(t, "object_instance", ctx);
        e.subject_bbox = box(t, "subject_bbox");
        e.object_bbox = box(t, "object_bbox");
        s.triplets.push_back(std::move(e));
    }
    return s;
}

inline void write_samples(const std::filesystem::path& path, const std::vector<TrainingSample>& samples,
                          const json& provenance) {
    write_jsonl(path, provenance, samples, [](const TrainingSample& s) { return to_json(s); });
}

} // namespace spatialrel
