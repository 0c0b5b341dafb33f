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
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spatialrel {

/// Ordered set of distinct object labels with O(1) label -> index lookup.
class Vocabulary {
public:
    Vocabulary() = default;

    /// Throws std::invalid_argument on duplicate or empty labels.
    explicit Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
        index_.reserve(labels_.size());
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i].empty()) throw std::invalid_argument("empty label in vocabulary");
            if (!index_.emplace(labels_[i], i).second)
                throw std::invalid_argument("duplicate label in vocabulary: '" + labels_[i] + "'");
        }
    }

    std::size_t size() const noexcept { return labels_.size(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::string& operator[](std::size_t i) const { return labels_.at(i); }

    bool contains(std::string_view label) const { return index_.count(std::string(label)) != 0; }

    std::optional<std::size_t> index(std::string_view label) const {
        auto it = index_.find(std::string(label));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<std::string> labels_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// The 80 COCO 2017 detection categories in category-id order.
inline const std::vector<std::string>& coco80_labels() {
    static const std::vector<std::string> labels = {
        "person",        "bicycle",      "car",          "motorcycle",   "airplane",
        "bus",           "train",        "truck",        "boat",         "traffic light",
        "fire hydrant",  "stop sign",    "parking meter", "bench",       "bird",
        "cat",           "dog",          "horse",        "sheep",        "cow",
        "elephant",      "bear",         "zebra",        "giraffe",      "backpack",
        "umbrella",      "handbag",      "tie",          "suitcase",     "frisbee",
        "skis",          "snowboard",    "sports ball",  "kite",         "baseball bat",
        "baseball glove", "skateboard",  "surfboard",    "tennis racket", "bottle",
        "wine glass",    "cup",          "fork",         "knife",        "spoon",
        "bowl",          "banana",       "apple",        "sandwich",     "orange",
        "broccoli",      "carrot",       "hot dog",      "pizza",        "donut",
        "cake",          "chair",        "couch",        "potted plant", "bed",
        "dining table",  "toilet",       "tv",           "laptop",       "mouse",
        "remote",        "keyboard",     "cell phone",   "microwave",    "oven",
        "toaster",       "sink",         "refrigerator", "book",         "clock",
        "vase",          "scissors",     "teddy bear",   "hair drier",   "toothbrush",
    };
    return labels;
}

inline Vocabulary coco80() { return Vocabulary(coco80_labels()); }

/// Three-way object partition used by the unseen split.
struct ObjectPartition {
    std::vector<std::string> train_objects;
    std::vector<std::string> val_objects;
    std::vector<std::string> test_objects;
};

/// The canonical 45/5/30 partition of the COCO vocabulary.
inline ObjectPartition canonical_unseen_partition() {
    return ObjectPartition{
        {"person",   "car",           "motorcycle",     "airplane",     "train",     "boat",
         "fire hydrant", "bench",     "bird",           "elephant",     "bear",      "giraffe",
         "handbag",  "tie",           "snowboard",      "baseball bat", "baseball glove", "surfboard",
         "cup",      "knife",         "spoon",          "apple",        "sandwich",  "orange",
         "broccoli", "carrot",        "pizza",          "donut",        "chair",     "couch",
         "potted plant", "bed",       "dining table",   "toilet",       "laptop",    "mouse",
         "remote",   "keyboard",      "oven",           "sink",         "book",      "clock",
         "teddy bear", "hair drier",  "toothbrush"},
        {"umbrella", "cake", "tv", "refrigerator", "vase"},
        {"bicycle",  "bus",          "truck",       "traffic light", "stop sign",     "parking meter",
         "cat",      "dog",          "horse",       "sheep",         "cow",           "zebra",
         "backpack", "suitcase",     "frisbee",     "skis",          "sports ball",   "kite",
         "skateboard", "tennis racket", "bottle",   "wine glass",    "fork",          "bowl",
         "banana",   "hot dog",      "cell phone",  "microwave",     "toaster",       "scissors"},
    };
}

/// Throws std::invalid_argument unless the three lists are pairwise
/// disjoint and together cover `vocab` exactly.
inline void validate_partition(const ObjectPartition& p, const Vocabulary& vocab) {
    std::unordered_map<std::string, int> seen;
    auto add = [&](const std::vector<std::string>& labels, const char* part) {
        for (const auto& l : labels) {
            if (!vocab.contains(l))
                throw std::invalid_argument(std::string(part) + " object '" + l + "' is not in the vocabulary");
            if (++seen[l] > 1) throw std::invalid_argument("object '" + l + "' appears in more than one partition");
        }
    };
    add(p.train_objects, "train");
    add(p.val_objects, "val");
    add(p.test_objects, "test");
    if (seen.size() != vocab.size())
        throw std::invalid_argument("partition covers " + std::to_string(seen.size()) + " of " +
                                    std::to_string(vocab.size()) + " vocabulary labels");
}

} // namespace spatialrel
