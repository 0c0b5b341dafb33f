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
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "vocabulary.hpp"

namespace spatialrel {

struct ObjectInstance {
    std::int64_t instance_id = 0;
    std::string label;
    BBox bbox;
};

struct ImageAnnotations {
    std::int64_t image_id = 0;
    double width = 0.0;
    double height = 0.0;
    std::vector<ObjectInstance> objects; // sorted by instance_id
};

struct IngestPolicy {
    bool include_crowd = false;
    /// Clamp boxes that leave the image; when false such boxes are dropped.
    bool clamp_out_of_bounds = true;
};

struct IngestStats {
    std::size_t images = 0;
    std::size_t input_annotations = 0;
    std::size_t retained = 0;
    std::size_t dropped_crowd = 0;
    std::size_t dropped_zero_area = 0;
    std::size_t dropped_out_of_bounds = 0;
    std::size_t dropped_unlisted_label = 0; // category outside the configured vocabulary
    std::size_t clamped = 0;                // retained after clamping

    std::size_t dropped_total() const noexcept {
        return dropped_crowd + dropped_zero_area + dropped_out_of_bounds + dropped_unlisted_label;
    }
};

inline json to_json(const IngestStats& s) {
    return json{{"images", s.images},
                {"input_annotations", s.input_annotations},
                {"retained", s.retained},
                {"dropped_crowd", s.dropped_crowd},
                {"dropped_zero_area", s.dropped_zero_area},
                {"dropped_out_of_bounds", s.dropped_out_of_bounds},
                {"dropped_unlisted_label", s.dropped_unlisted_label},
                {"clamped", s.clamped}};
}

inline json to_json(const IngestPolicy& p) {
    return json{{"include_crowd", p.include_crowd}, {"clamp_out_of_bounds", p.clamp_out_of_bounds}};
}

struct IngestResult {
    std::vector<ImageAnnotations> images; // sorted by image_id
    IngestStats stats;
};

namespace detail {

inline std::string record_context(const char* section, std::size_t index, const json& rec) {
    std::string ctx = std::string(section) + "[" + std::to_string(index) + "]";
    if (rec.is_object() && rec.contains("id") && rec["id"].is_number_integer())
        ctx += " (id=" + std::to_string(rec["id"].get<std::int64_t>()) + ")";
    return ctx;
}

inline void sort_objects(ImageAnnotations& img) {
    std::sort(img.objects.begin(), img.objects.end(),
              [](const ObjectInstance& a, const ObjectInstance& b) { return a.instance_id < b.instance_id; });
}

} // namespace detail

/// Converts a parsed COCO instances document into validated images.
inline IngestResult ingest_coco(const json& doc, const Vocabulary& vocab, const IngestPolicy& policy = {},
                                const std::string& source = "annotations") {
    if (!doc.is_object()) throw SchemaError(source + ": top level is not an object");
    for (const char* key : {"images", "annotations", "categories"})
        if (!doc.contains(key) || !doc[key].is_array())
            throw SchemaError(source + ": missing array '" + std::string(key) + "'");

    std::unordered_map<std::int64_t, std::string> categories;
    const auto& cats = doc["categories"];
    for (std::size_t i = 0; i < cats.size(); ++i) {
        const auto ctx = source + ": " + detail::record_context("categories", i, cats[i]);
        auto id = require<std::int64_t>(cats[i], "id", ctx);
        auto name = require<std::string>(cats[i], "name", ctx);
        if (!categories.emplace(id, name).second) throw SchemaError(ctx + ": duplicate category id");
    }

    IngestResult result;
    std::map<std::int64_t, ImageAnnotations> images;
    const auto& imgs = doc["images"];
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const auto ctx = source + ": " + detail::record_context("images", i, imgs[i]);
        ImageAnnotations img;
        img.image_id = require<std::int64_t>(imgs[i], "id", ctx);
        img.width = require<double>(imgs[i], "width", ctx);
        img.height = require<double>(imgs[i], "height", ctx);
        if (!(img.width > 0.0) || !(img.height > 0.0)) throw SchemaError(ctx + ": non-positive image size");
        if (!images.emplace(img.image_id, std::move(img)).second)
            throw SchemaError(ctx + ": duplicate image id");
    }

    std::unordered_map<std::int64_t, std::unordered_set<std::int64_t>> seen_ids;
    auto& st = result.stats;
    const auto& anns = doc["annotations"];
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const auto& a = anns[i];
        const auto ctx = source + ": " + detail::record_context("annotations", i, a);
        ++st.input_annotations;
        const auto ann_id = require<std::int64_t>(a, "id", ctx);
        const auto image_id = require<std::int64_t>(a, "image_id", ctx);
        const auto cat_id = require<std::int64_t>(a, "category_id", ctx);
        const auto xywh = require<std::vector<double>>(a, "bbox", ctx);
        if (xywh.size() != 4) throw SchemaError(ctx + ": bbox must have 4 numbers");
        for (double v : xywh)
            if (!std::isfinite(v)) throw SchemaError(ctx + ": non-finite bbox coordinate");

        auto img_it = images.find(image_id);
        if (img_it == images.end()) throw SchemaError(ctx + ": unknown image id " + std::to_string(image_id));
        auto cat_it = categories.find(cat_id);
        if (cat_it == categories.end()) throw SchemaError(ctx + ": unknown category id " + std::to_string(cat_id));
        if (!seen_ids[image_id].insert(ann_id).second) throw SchemaError(ctx + ": duplicate annotation id in image");

        if (!vocab.contains(cat_it->second)) {
            ++st.dropped_unlisted_label;
            continue;
        }
        const bool crowd = a.contains("iscrowd") && a["iscrowd"].is_number() && a["iscrowd"].get<int>() == 1;
        if (crowd && !policy.include_crowd) {
            ++st.dropped_crowd;
            continue;
        }
        const double x = xywh[0], y = xywh[1], w = xywh[2], h = xywh[3];
        if (!(w > 0.0) || !(h > 0.0)) {
            ++st.dropped_zero_area;
            continue;
        }
        auto& img = img_it->second;
        double x0 = x, y0 = y, x1 = x + w, y1 = y + h;
        const bool outside = x0 < 0.0 || y0 < 0.0 || x1 > img.width || y1 > img.height;
        if (outside) {
            if (!policy.clamp_out_of_bounds) {
                ++st.dropped_out_of_bounds;
                continue;
            }
            x0 = std::clamp(x0, 0.0, img.width);
            x1 = std::clamp(x1, 0.0, img.width);
            y0 = std::clamp(y0, 0.0, img.height);
            y1 = std::clamp(y1, 0.0, img.height);
            if (!(x1 > x0) || !(y1 > y0)) {
                ++st.dropped_out_of_bounds;
                continue;
            }
            ++st.clamped;
        }
        img.objects.push_back(ObjectInstance{ann_id, cat_it->second, BBox(x0, y0, x1, y1)});
        ++st.retained;
    }

    result.images.reserve(images.size());
    for (auto& [id, img] : images) {
        detail::sort_objects(img);
        result.images.push_back(std::move(img));
    }
    st.images = result.images.size();
    if (st.retained + st.dropped_total() != st.input_annotations)
        throw InvariantError("ingest: annotation count not conserved");
    return result;
}

/// Parses a COCO instances file. Segmentation polygons are discarded while
/// parsing, which keeps memory proportional to the box data.
inline IngestResult load_annotations(const std::filesystem::path& path, const Vocabulary& vocab,
                                     const IngestPolicy& policy = {}) {
    const std::string text = read_text_file(path);
    json doc;
    try {
        doc = json::parse(text, [](int depth, json::parse_event_t event, json& parsed) {
            return !(depth == 3 && event == json::parse_event_t::key && parsed == "segmentation");
        });
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }
    return ingest_coco(doc, vocab, policy, path.string());
}

// ---------------------------------------------------------------------------
// Normalized snapshot: one image per line.

inline json to_json(const ImageAnnotations& img) {
    json objs = json::array();
    for (const auto& o : img.objects)
        objs.push_back({{"instance_id", o.instance_id}, {"label", o.label}, {"bbox", o.bbox.corners()}});
    return json{{"image_id", img.image_id}, {"width", img.width}, {"height", img.height}, {"objects", std::move(objs)}};
}

inline ImageAnnotations image_from_json(const json& rec, const Vocabulary& vocab, const std::string& ctx) {
    ImageAnnotations img;
    img.image_id = require<std::int64_t>(rec, "image_id", ctx);
    img.width = require<double>(rec, "width", ctx);
    img.height = require<double>(rec, "height", ctx);
    if (!(img.width > 0.0) || !(img.height > 0.0)) throw SchemaError(ctx + ": non-positive image size");
    const auto objs = require<json>(rec, "objects", ctx);
    if (!objs.is_array()) throw SchemaError(ctx + ": 'objects' is not an array");
    std::unordered_set<std::int64_t> ids;
    for (const auto& o : objs) {
        ObjectInstance inst;
        inst.instance_id = require<std::int64_t>(o, "instance_id", ctx);
        inst.label = require<std::string>(o, "label", ctx);
        const auto c = require<std::vector<double>>(o, "bbox", ctx);
        if (c.size() != 4) throw SchemaError(ctx + ": bbox must have 4 numbers");
        if (!BBox::is_valid(c[0], c[1], c[2], c[3]) || c[2] > img.width || c[3] > img.height)
            throw SchemaError(ctx + ": invalid bbox for instance " + std::to_string(inst.instance_id));
        inst.bbox = BBox(c[0], c[1], c[2], c[3]);
        if (!(inst.bbox.area() > 0.0)) throw SchemaError(ctx + ": zero-area bbox");
        if (!vocab.contains(inst.label)) throw SchemaError(ctx + ": label '" + inst.label + "' not in vocabulary");
        if (!ids.insert(inst.instance_id).second) throw SchemaError(ctx + ": duplicate instance id");
        img.objects.push_back(std::move(inst));
    }
    detail::sort_objects(img);
    return img;
}

inline void write_snapshot(const std::filesystem::path& path, const std::vector<ImageAnnotations>& images,
                           const json& provenance) {
    write_jsonl(path, provenance, images, [](const ImageAnnotations& img) { return to_json(img); });
}

inline std::vector<ImageAnnotations> read_snapshot(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::map<std::int64_t, ImageAnnotations> images;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        const auto ctx = path.string() + ":" + std::to_string(line);
        auto img = image_from_json(rec, vocab, ctx);
        if (!images.emplace(img.image_id, img).second) throw SchemaError(ctx + ": duplicate image id");
    });
    std::vector<ImageAnnotations> out;
    out.reserve(images.size());
    for (auto& [id, img] : images) out.push_back(std::move(img));
    return out;
}

/// Snapshot (.jsonl) or COCO instances file, chosen by extension.
inline std::vector<ImageAnnotations> load_images(const std::filesystem::path& path, const Vocabulary& vocab,
                                                 const IngestPolicy& policy = {}, IngestStats* stats = nullptr) {
    if (path.extension() == ".jsonl") return read_snapshot(path, vocab);
    auto r = load_annotations(path, vocab, policy);
    if (stats) *stats = r.stats;
    return std::move(r.images);
}

} // namespace spatialrel
