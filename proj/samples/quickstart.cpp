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

// Library tour: relations between two boxes, caption text, triplet counting
// over a toy corpus and scoring one generated image.

#include <iostream>

#include "spatialrel/spatialrel.hpp"

int main() {
    using namespace spatialrel;

    const BBox dog(0, 0, 2, 2), cat(4, 0, 6, 2);
    std::cout << "dog vs cat: " << valid_relations(dog, cat) << '\n';

    const SpatialTriplet t{"dog", Relation::left_of, "cat"};
    const auto text = verbalize(t);
    std::cout << "caption: " << text << '\n';
    std::cout << "parsed back: " << parse_caption(text, coco80()) << '\n';

    ImageAnnotations img{1, 10, 10, {{11, "dog", dog}, {12, "cat", cat}, {13, "cup", BBox(4.5, 0.5, 5.5, 1.5)}}};
    const auto natural = natural_filter(coco80(), {img});
    std::cout << natural.size() << " naturally-occurring triplets in the toy corpus, e.g.\n";
    for (const auto& [triplet, count] : natural)
        if (triplet.subject == "cup") std::cout << "  " << verbalize(triplet) << " x" << count << '\n';

    SamplerConfig cfg;
    cfg.seed = 7;
    for (const auto& s : sample_training_batch({img}, cfg, 3)) std::cout << "training text: " << s.text << '\n';

    const DetectionSet detections{"cap-000000", 0, {{"dog", 0.9, BBox(10, 40, 60, 90)}, {"cat", 0.7, BBox(80, 30, 150, 95)}}};
    std::cout << "OA " << object_accuracy(detections, t, EvalConfig{}) << ", VISOR " << visor(detections, t, EvalConfig{})
              << '\n';
    return 0;
}
