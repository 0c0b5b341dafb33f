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

// Shared fixtures and independent oracles for the test suites. Oracles here
// recompute results from first principles and never call the code paths
// they are used to check.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "spatialrel/spatialrel.hpp"

namespace spatialrel::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("spatialrel_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// 3 images, 7 annotations, one of them crowd.
inline json coco_fixture_small() {
    return json::parse(R"({
      "info": {"description": "fixture"},
      "images": [
        {"id": 3, "width": 100, "height": 80, "file_name": "c.jpg"},
        {"id": 1, "width": 100, "height": 100, "file_name": "a.jpg"},
        {"id": 2, "width": 64, "height": 64, "file_name": "b.jpg"}
      ],
      "categories": [
        {"id": 1, "name": "person"}, {"id": 3, "name": "car"}, {"id": 8, "name": "truck"},
        {"id": 17, "name": "cat"}, {"id": 18, "name": "dog"}, {"id": 47, "name": "cup"}, {"id": 51, "name": "bowl"}
      ],
      "annotations": [
        {"id": 302, "image_id": 3, "category_id": 8, "bbox": [60, 10, 30, 30], "iscrowd": 0, "area": 900,
         "segmentation": [[60, 10, 90, 10, 90, 40]]},
        {"id": 101, "image_id": 1, "category_id": 18, "bbox": [10, 20, 30, 40], "iscrowd": 0, "area": 1200},
        {"id": 102, "image_id": 1, "category_id": 17, "bbox": [60, 20, 20, 20], "iscrowd": 0, "area": 400},
        {"id": 103, "image_id": 1, "category_id": 1, "bbox": [0, 0, 100, 100], "iscrowd": 1, "area": 10000,
         "segmentation": {"counts": [1, 2, 3], "size": [100, 100]}},
        {"id": 202, "image_id": 2, "category_id": 51, "bbox": [0, 0, 40, 40], "iscrowd": 0, "area": 1600},
        {"id": 201, "image_id": 2, "category_id": 47, "bbox": [5, 5, 10, 10], "iscrowd": 0, "area": 100},
        {"id": 301, "image_id": 3, "category_id": 3, "bbox": [0, 0, 50, 50], "iscrowd": 0, "area": 2500}
      ]
    })");
}

inline ImageAnnotations make_image(std::int64_t id, double w, double h,
                                   std::vector<std::pair<std::string, BBox>> objects) {
    ImageAnnotations img{id, w, h, {}};
    std::int64_t next = id * 100;
    for (auto& [label, box] : objects) img.objects.push_back({++next, label, box});
    return img;
}

/// Seeded synthetic corpus: integer boxes, 2-6 objects over a small label set.
inline std::vector<ImageAnnotations> synthetic_corpus(std::size_t n_images, std::uint64_t seed,
                                                      const std::vector<std::string>& labels = {
                                                          "person", "dog", "cat", "chair", "cup", "bowl", "car",
                                                          "umbrella"}) {
    Rng rng(seed);
    std::vector<ImageAnnotations> out;
    for (std::size_t i = 0; i < n_images; ++i) {
        ImageAnnotations img{static_cast<std::int64_t>(1000 + i), 640, 480, {}};
        const std::size_t n = 2 + uniform_index(rng, 5);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = 8 + static_cast<double>(uniform_index(rng, 300));
            const double h = 8 + static_cast<double>(uniform_index(rng, 240));
            const double x = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(640 - w) + 1));
            const double y = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(480 - h) + 1));
            img.objects.push_back({static_cast<std::int64_t>(img.image_id * 100 + static_cast<std::int64_t>(k)),
                                   labels[uniform_index(rng, labels.size())], BBox(x, y, x + w, y + h)});
        }
        out.push_back(std::move(img));
    }
    return out;
}

inline json to_coco(const std::vector<ImageAnnotations>& images, const Vocabulary& vocab) {
    json doc{{"images", json::array()}, {"annotations", json::array()}, {"categories", json::array()}};
    for (std::size_t i = 0; i < vocab.size(); ++i)
        doc["categories"].push_back({{"id", static_cast<int>(i + 1)}, {"name", vocab[i]}});
    for (const auto& img : images) {
        doc["images"].push_back({{"id", img.image_id}, {"width", img.width}, {"height", img.height}});
        for (const auto& o : img.objects)
            doc["annotations"].push_back({{"id", o.instance_id},
                                          {"image_id", img.image_id},
                                          {"category_id", static_cast<int>(*vocab.index(o.label) + 1)},
                                          {"bbox", {o.bbox.x0(), o.bbox.y0(), o.bbox.width(), o.bbox.height()}},
                                          {"iscrowd", 0}});
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Quantized box generator. Coordinates are multiples of 1/4 inside
// [0, kGridWidth], so sums, differences and reflections are exact doubles.

inline constexpr double kGridWidth = 64.0;

inline double grid_coord(Rng& rng, double lo, double hi) {
    const auto steps = static_cast<std::size_t>((hi - lo) * 4.0);
    return lo + static_cast<double>(uniform_index(rng, steps + 1)) / 4.0;
}

inline BBox random_grid_box(Rng& rng) {
    const double x0 = grid_coord(rng, 0, kGridWidth), x1 = grid_coord(rng, x0, kGridWidth);
    const double y0 = grid_coord(rng, 0, kGridWidth), y1 = grid_coord(rng, y0, kGridWidth);
    return BBox(x0, y0, x1, y1);
}

/// Pairs biased toward ties, shared edges, nesting and identity.
inline std::pair<BBox, BBox> random_box_pair(Rng& rng) {
    BBox a = random_grid_box(rng);
    BBox b = random_grid_box(rng);
    switch (uniform_index(rng, 8)) {
    case 0: b = a; break;
    case 1: { // same size, shifted: ties on all scale relations
        const double dx = grid_coord(rng, 0, kGridWidth - a.width());
        b = BBox(dx, a.y0(), dx + a.width(), a.y1());
        break;
    }
    case 2: { // same horizontal centroid
        const double d = grid_coord(rng, 0, std::floor(a.width() * 2.0) / 4.0);
        b = BBox(a.x0() + d, b.y0(), a.x1() - d, b.y1());
        break;
    }
    case 3: { // nested, possibly sharing edges
        const double x0 = grid_coord(rng, a.x0(), a.x1()), x1 = grid_coord(rng, x0, a.x1());
        const double y0 = grid_coord(rng, a.y0(), a.y1()), y1 = grid_coord(rng, y0, a.y1());
        b = BBox(x0, y0, x1, y1);
        break;
    }
    case 4: // touching edge
        if (a.x1() < kGridWidth) b = BBox(a.x1(), a.y0(), grid_coord(rng, a.x1(), kGridWidth), a.y1());
        break;
    default: break;
    }
    if (uniform_index(rng, 2)) std::swap(a, b);
    return {a, b};
}

// ---------------------------------------------------------------------------
// Predicate oracle in exact integer arithmetic over quarter-pixel units.

struct IntBox {
    std::int64_t x0, y0, x1, y1;
};

inline IntBox to_int(const BBox& b) {
    auto q = [](double v) { return static_cast<std::int64_t>(std::llround(v * 4.0)); };
    return {q(b.x0()), q(b.y0()), q(b.x1()), q(b.y1())};
}

inline bool oracle_holds(Relation r, const BBox& sb, const BBox& ob) {
    const IntBox s = to_int(sb), o = to_int(ob);
    const auto sw = s.x1 - s.x0, sh = s.y1 - s.y0, ow = o.x1 - o.x0, oh = o.y1 - o.y0;
    const auto iw = std::min(s.x1, o.x1) - std::max(s.x0, o.x0);
    const auto ih = std::min(s.y1, o.y1) - std::max(s.y0, o.y0);
    const bool intersect = iw > 0 && ih > 0;
    const bool same = s.x0 == o.x0 && s.y0 == o.y0 && s.x1 == o.x1 && s.y1 == o.y1;
    auto within = [](const IntBox& in, const IntBox& out) {
        return out.x0 <= in.x0 && in.x1 <= out.x1 && out.y0 <= in.y0 && in.y1 <= out.y1;
    };
    switch (r) {
    case Relation::left_of: return s.x0 + s.x1 < o.x0 + o.x1;
    case Relation::right_of: return s.x0 + s.x1 > o.x0 + o.x1;
    case Relation::above: return s.y0 + s.y1 < o.y0 + o.y1;
    case Relation::below: return s.y0 + s.y1 > o.y0 + o.y1;
    case Relation::overlapping: return intersect;
    case Relation::separated: return !intersect;
    case Relation::surrounding: return !same && within(o, s);
    case Relation::inside: return !same && within(s, o);
    case Relation::taller: return sh > oh;
    case Relation::shorter: return sh < oh;
    case Relation::wider: return sw > ow;
    case Relation::narrower: return sw < ow;
    case Relation::larger: return sw * sh > ow * oh;
    case Relation::smaller: return sw * sh < ow * oh;
    }
    return false;
}

/// Brute-force triplet recount straight from the definition.
inline std::map<std::tuple<std::string, Relation, std::string>, std::uint64_t>
oracle_triplet_counts(const std::vector<ImageAnnotations>& corpus) {
    std::map<std::tuple<std::string, Relation, std::string>, std::uint64_t> out;
    for (const auto& img : corpus)
        for (const auto& s : img.objects)
            for (const auto& o : img.objects) {
                if (&s == &o || s.label == o.label) continue;
                for (auto r : kAllRelations)
                    if (oracle_holds(r, s.bbox, o.bbox)) ++out[{s.label, r, o.label}];
            }
    return out;
}

/// Violations of the predicate invariants for one ordered pair; empty when
/// all hold. Flip checks reflect both boxes inside kGridWidth.
inline std::vector<std::string> predicate_violations(const BBox& a, const BBox& b) {
    std::vector<std::string> out;
    auto fail = [&](const std::string& what) {
        std::ostringstream os;
        os << what << " for " << a << " " << b;
        out.push_back(os.str());
    };
    const auto ab = valid_relations(a, b), ba = valid_relations(b, a);
    for (auto r : kAllRelations) {
        const bool symmetric = r == Relation::overlapping || r == Relation::separated;
        const Relation dual = symmetric ? r : opposite(r);
        if (ab.contains(r) != ba.contains(dual)) fail("duality " + std::string(to_string(r)));
        if (!symmetric && ab.contains(r) && ab.contains(opposite(r))) fail("both members of a pair " + std::string(to_string(r)));
    }
    if (ab.contains(Relation::overlapping) == ab.contains(Relation::separated)) fail("overlapping/separated dichotomy");
    auto tie = [&](bool equal, Relation r) {
        if (equal && (ab.contains(r) || ab.contains(opposite(r)))) fail("tie on " + std::string(to_string(r)));
        if (!equal && !ab.contains(r) && !ab.contains(opposite(r))) fail("non-tie without relation " + std::string(to_string(r)));
    };
    tie(a.x0() + a.x1() == b.x0() + b.x1(), Relation::left_of);
    tie(a.y0() + a.y1() == b.y0() + b.y1(), Relation::above);
    tie(a.height() == b.height(), Relation::taller);
    tie(a.width() == b.width(), Relation::wider);
    tie(a.area() == b.area(), Relation::larger);
    if (a == b && (ab.contains(Relation::inside) || ab.contains(Relation::surrounding))) fail("identical boxes contain");
    if (a.area() > 0 && b.area() > 0 && (ab.contains(Relation::inside) || ab.contains(Relation::surrounding)) &&
        !ab.contains(Relation::overlapping))
        fail("containment without overlap");

    const BBox fa = flip_h(a, kGridWidth), fb = flip_h(b, kGridWidth);
    if (!(flip_h(fa, kGridWidth) == a)) fail("flip is not an involution");
    RelationSet mapped;
    for (auto r : ab.to_vector())
        mapped.insert(r == Relation::left_of ? Relation::right_of : r == Relation::right_of ? Relation::left_of : r);
    if (!(valid_relations(fa, fb) == mapped)) fail("flip equivariance");
    for (auto r : kAllRelations)
        if (ab.contains(r) != oracle_holds(r, a, b)) fail("integer oracle disagrees on " + std::string(to_string(r)));
    return out;
}

// ---------------------------------------------------------------------------
// Metric oracle: direct enumeration of the metric definitions.

struct OracleCounts {
    std::uint64_t images = 0, oa = 0, visor = 0;
};

inline OracleCounts oracle_score(const std::vector<Detection>& dets, const SpatialTriplet& t, double threshold,
                                 PairingMode mode) {
    std::vector<const Detection*> subj, obj;
    for (const auto& d : dets) {
        if (!(d.score >= threshold)) continue;
        if (d.label == t.subject) subj.push_back(&d);
        if (d.label == t.object) obj.push_back(&d);
    }
    OracleCounts c{1, 0, 0};
    if (subj.empty() || obj.empty()) return c;
    c.oa = 1;
    if (mode == PairingMode::any_pair) {
        for (auto* a : subj)
            for (auto* b : obj)
                if (oracle_holds(t.relation, a->bbox, b->bbox)) c.visor = 1;
        return c;
    }
    // highest score wins; earliest detection among equal scores
    auto top = [](const std::vector<const Detection*>& v) {
        const Detection* best = v.front();
        for (auto* d : v)
            if (d->score > best->score) best = d;
        return best;
    };
    c.visor = oracle_holds(t.relation, top(subj)->bbox, top(obj)->bbox) ? 1 : 0;
    return c;
}

} // namespace spatialrel::testing
