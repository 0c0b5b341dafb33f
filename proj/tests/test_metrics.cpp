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

#include <gtest/gtest.h>

#include "spatialrel/metrics.hpp"
#include "support/fixtures.hpp"

using namespace spatialrel;
namespace st = spatialrel::testing;

namespace {

const SpatialTriplet kDogLeftCat{"dog", Relation::left_of, "cat"};

DetectionSet set_of(std::string id, std::size_t index, std::vector<Detection> dets) {
    return {std::move(id), index, std::move(dets)};
}

Detection det(std::string label, double score, BBox box = BBox(0, 0, 1, 1)) {
    return {std::move(label), score, box};
}

std::vector<CaptionRecord> one_caption(const SpatialTriplet& t) { return make_captions({t}); }

} // namespace

TEST(ObjectAccuracy, Examples) {
    const EvalConfig cfg;
    EXPECT_EQ(object_accuracy(set_of("c", 0, {det("dog", 0.6), det("cat", 0.4)}), kDogLeftCat, cfg), 1);
    EXPECT_EQ(object_accuracy(set_of("c", 0, {det("dog", 0.6)}), kDogLeftCat, cfg), 0);
    EXPECT_EQ(object_accuracy(set_of("c", 0, {det("dog", 0.05), det("cat", 0.4)}), kDogLeftCat, cfg), 0);
    // exactly at threshold counts
    EXPECT_EQ(object_accuracy(set_of("c", 0, {det("dog", 0.1), det("cat", 0.1)}), kDogLeftCat, cfg), 1);
}

TEST(Visor, Examples) {
    const EvalConfig cfg;
    const auto d = set_of("c", 0, {det("dog", 0.9, BBox(0, 0, 2, 2)), det("cat", 0.8, BBox(4, 0, 6, 2))});
    EXPECT_EQ(visor(d, kDogLeftCat, cfg), 1);
    EXPECT_EQ(visor(d, {"dog", Relation::right_of, "cat"}, cfg), 0);
    EXPECT_EQ(visor(set_of("c", 0, {det("cat", 0.8, BBox(4, 0, 6, 2))}), kDogLeftCat, cfg), 0);
}

TEST(Visor, BestScoreVersusAnyPair) {
    // the top dog is right of the cat; a weaker dog is left of it
    const auto d = set_of("c", 0,
                          {det("dog", 0.9, BBox(8, 0, 10, 2)), det("dog", 0.5, BBox(0, 0, 2, 2)),
                           det("cat", 0.8, BBox(4, 0, 6, 2))});
    EvalConfig cfg;
    EXPECT_EQ(visor(d, kDogLeftCat, cfg), 0);
    cfg.pairing = PairingMode::any_pair;
    EXPECT_EQ(visor(d, kDogLeftCat, cfg), 1);
}

TEST(Aggregate, FourImageExample) {
    // OA [1,1,0,1], VISOR [1,0,0,1]
    const BBox l(0, 0, 2, 2), r(4, 0, 6, 2);
    std::vector<DetectionSet> run{
        set_of("cap-000000", 0, {det("dog", 0.9, l), det("cat", 0.9, r)}),
        set_of("cap-000000", 1, {det("dog", 0.9, r), det("cat", 0.9, l)}),
        set_of("cap-000000", 2, {det("dog", 0.9, l)}),
        set_of("cap-000000", 3, {det("cat", 0.7, r), det("dog", 0.2, l)}),
    };
    const auto rep = aggregate(run, one_caption(kDogLeftCat), EvalConfig{});
    EXPECT_EQ(rep.overall, (MetricCounts{4, 3, 2}));
    EXPECT_DOUBLE_EQ(*rep.overall.oa_percent(), 75.0);
    EXPECT_DOUBLE_EQ(*rep.overall.visor_percent(), 50.0);
    EXPECT_EQ(format_fixed(*rep.overall.visor_cond_percent(), 1), "66.7");
    EXPECT_EQ(rep.relation(Relation::left_of), rep.overall);
    EXPECT_EQ(rep.per_triplet.at(kDogLeftCat), rep.overall);
    EXPECT_EQ(rep.relation(Relation::above).images, 0u);
}

TEST(Aggregate, EmptyAndPerfectRuns) {
    std::vector<DetectionSet> empty, perfect;
    for (std::size_t i = 0; i < 4; ++i) {
        empty.push_back(set_of("cap-000000", i, {}));
        perfect.push_back(set_of("cap-000000", i, {det("dog", 1, BBox(0, 0, 2, 2)), det("cat", 1, BBox(4, 0, 6, 2))}));
    }
    const auto e = aggregate(empty, one_caption(kDogLeftCat), EvalConfig{});
    EXPECT_EQ(*e.overall.oa_percent(), 0.0);
    EXPECT_EQ(*e.overall.visor_percent(), 0.0);
    EXPECT_FALSE(e.overall.visor_cond_percent().has_value());
    const auto p = aggregate(perfect, one_caption(kDogLeftCat), EvalConfig{});
    EXPECT_EQ(*p.overall.oa_percent(), 100.0);
    EXPECT_EQ(*p.overall.visor_percent(), 100.0);
    EXPECT_EQ(*p.overall.visor_cond_percent(), 100.0);
}

TEST(Aggregate, ValidationNamesCaptionIds) {
    const auto caps = make_captions({kDogLeftCat, {"cup", Relation::inside, "bowl"}});
    std::vector<DetectionSet> run;
    for (std::size_t i = 0; i < 4; ++i) run.push_back(set_of("cap-000000", i, {}));
    run.push_back(set_of("cap-000001", 0, {}));
    run.push_back(set_of("cap-999999", 0, {}));
    try {
        aggregate(run, caps, EvalConfig{});
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("cap-000001"), std::string::npos) << msg;
        EXPECT_NE(msg.find("cap-999999"), std::string::npos) << msg;
        EXPECT_EQ(msg.find("cap-000000"), std::string::npos) << msg;
    }
    run.resize(4);
    run.push_back(set_of("cap-000000", 0, {}));
    EXPECT_THROW(aggregate(run, one_caption(kDogLeftCat), EvalConfig{}), DataError);
    run.resize(3);
    run.push_back(set_of("cap-000000", 4, {}));
    EXPECT_THROW(aggregate(run, one_caption(kDogLeftCat), EvalConfig{}), DataError);
}

TEST(Aggregate, RandomRunsMatchOracleAndProperties) {
    Rng rng(314);
    const std::vector<std::string> labels{"dog", "cat", "cup"};
    std::vector<SpatialTriplet> triplets;
    for (std::size_t i = 0; i < 60; ++i) {
        const auto s = uniform_index(rng, 3);
        auto o = uniform_index(rng, 2);
        if (o >= s) ++o;
        triplets.push_back({labels[s], kAllRelations[uniform_index(rng, kRelationCount)], labels[o]});
    }
    const auto caps = make_captions(triplets);
    std::vector<DetectionSet> run;
    for (const auto& c : caps)
        for (std::size_t i = 0; i < 4; ++i) {
            DetectionSet d{c.caption_id, i, {}};
            const auto n = uniform_index(rng, 5);
            for (std::size_t k = 0; k < n; ++k)
                d.detections.push_back(
                    {labels[uniform_index(rng, 3)], static_cast<double>(uniform_index(rng, 11)) / 10.0, st::random_grid_box(rng)});
            run.push_back(std::move(d));
        }

    std::optional<double> prev_oa;
    for (double th : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
        EvalConfig best, any;
        best.score_threshold = any.score_threshold = th;
        any.pairing = PairingMode::any_pair;
        const auto rb = aggregate(run, caps, best);
        const auto ra = aggregate(run, caps, any);
        for (auto [cfg, rep] : {std::pair{best, rb}, std::pair{any, ra}}) {
            MetricCounts oracle;
            for (const auto& d : run) {
                const auto& t = caps[std::stoul(d.caption_id.substr(4))].triplet;
                const auto o = st::oracle_score(d.detections, t, th, cfg.pairing);
                oracle += MetricCounts{o.images, o.oa, o.visor};
            }
            EXPECT_EQ(rep.overall, oracle) << th;
        }
        EXPECT_EQ(rb.overall.oa, ra.overall.oa);
        EXPECT_GE(ra.overall.visor, rb.overall.visor);
        for (const auto& d : run) {
            const auto& t = caps[std::stoul(d.caption_id.substr(4))].triplet;
            EXPECT_LE(visor(d, t, best), object_accuracy(d, t, best));
            EXPECT_GE(visor(d, t, any), visor(d, t, best));
        }
        if (prev_oa) {
            EXPECT_LE(*rb.overall.oa_percent(), *prev_oa);
        }
        prev_oa = rb.overall.oa_percent();

        MetricCounts sum;
        for (auto r : kAllRelations) sum += rb.relation(r);
        EXPECT_EQ(sum, rb.overall);
    }
}

TEST(Report, JsonRoundTrip) {
    std::vector<DetectionSet> run;
    for (std::size_t i = 0; i < 4; ++i)
        run.push_back(set_of("cap-000000", i, {det("dog", 0.5, BBox(0, 0, 2, 2)), det("cat", i * 0.2, BBox(4, 0, 6, 2))}));
    const auto rep = aggregate(run, one_caption(kDogLeftCat), EvalConfig{});
    const auto dir = st::temp_dir("report");
    write_report(dir / "r.json", rep, make_provenance("evaluate", to_json(rep.config)));
    const auto back = read_report(dir / "r.json");
    EXPECT_EQ(back.overall, rep.overall);
    EXPECT_EQ(back.per_triplet, rep.per_triplet);
    EXPECT_EQ(back.captions, rep.captions);
    EXPECT_EQ(back.config.pairing, rep.config.pairing);
    for (auto r : kAllRelations) EXPECT_EQ(back.relation(r), rep.relation(r));
}

TEST(DetectionsFile, ParsesPixelAndNormalizedBoxes) {
    const auto dir = st::temp_dir("dets");
    st::write_text(dir / "d.jsonl",
                   R"({"caption_id":"cap-000000","image_index":0,"detections":[{"label":"dog","score":0.5,"bbox":[1,2,3,4]}]})"
                   "\n"
                   R"({"caption_id":"cap-000000","image_index":1,"normalized":true,"image_size":[200,100],"detections":[{"label":"cat","score":1,"bbox":[0.1,0.2,0.5,1.0]}]})"
                   "\n"
                   R"({"caption_id":"cap-000000","image_index":2,"detections":[]})"
                   "\n");
    const auto sets = read_detections(dir / "d.jsonl");
    ASSERT_EQ(sets.size(), 3u);
    EXPECT_EQ(sets[0].detections[0].bbox, BBox(1, 2, 3, 4));
    EXPECT_EQ(sets[1].detections[0].bbox, BBox(20, 20, 100, 100));
    EXPECT_TRUE(sets[2].detections.empty());

    write_detections(dir / "w.jsonl", sets, make_provenance("detect", json::object()));
    const auto again = read_detections(dir / "w.jsonl");
    ASSERT_EQ(again.size(), 3u);
    EXPECT_EQ(again[1].detections[0].bbox, BBox(20, 20, 100, 100));
}

TEST(DetectionsFile, SchemaErrors) {
    const auto dir = st::temp_dir("dets_bad");
    auto expect_schema_error = [&](const std::string& line) {
        st::write_text(dir / "d.jsonl", line + "\n");
        EXPECT_THROW(read_detections(dir / "d.jsonl"), SchemaError) << line;
    };
    expect_schema_error(R"({"image_index":0,"detections":[]})");
    expect_schema_error(R"({"caption_id":"c","image_index":0,"detections":[{"label":"dog","score":1.5,"bbox":[0,0,1,1]}]})");
    expect_schema_error(R"({"caption_id":"c","image_index":0,"detections":[{"label":"dog","score":0.5,"bbox":[2,0,1,1]}]})");
    expect_schema_error(R"({"caption_id":"c","image_index":0,"detections":[{"label":"dog","score":0.5,"bbox":[0,0,1]}]})");
    expect_schema_error(R"({"caption_id":"c","image_index":0,"normalized":true,"detections":[]})");
    st::write_text(dir / "d.jsonl", "{not json\n");
    EXPECT_THROW(read_detections(dir / "d.jsonl"), ParseError);
}
