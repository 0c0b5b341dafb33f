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

// Command-line driver for the dataset and evaluation pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "spatialrel/spatialrel.hpp"

namespace fs = std::filesystem;
using namespace spatialrel;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

struct Globals {
    unsigned threads = std::max(1U, std::thread::hardware_concurrency());
    std::string config_path;
    bool print_digest = false;
    json config_file = json::object();
};

void require_input(const std::string& path, const char* flag) {
    if (path.empty()) throw UsageError(std::string("missing required ") + flag);
    if (path != "-" && !fs::exists(path)) throw DataError(std::string(flag) + ": input '" + path + "' does not exist");
}

Vocabulary load_vocabulary(const std::string& spec) {
    if (spec == "coco80") return coco80();
    require_input(spec, "--vocab");
    std::vector<std::string> labels;
    if (fs::path(spec).extension() == ".json") {
        labels = read_json_file(spec).get<std::vector<std::string>>();
    } else {
        std::istringstream in(read_text_file(spec));
        for (std::string line; std::getline(in, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) labels.push_back(line);
        }
    }
    try {
        return Vocabulary(std::move(labels));
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("--vocab: ") + e.what());
    }
}

// Values from the config file apply only where the flag was not given.
template <typename T>
void from_config(const Globals& g, const CLI::App* cmd, const char* flag, const char* key, T& value) {
    if (cmd->count(flag) == 0 && g.config_file.contains(key)) value = g.config_file.at(key).get<T>();
}

// Returns true when the caller should stop after printing the digest.
bool digest_only(const Globals& g, const json& config) {
    if (!g.print_digest) return false;
    std::cout << config_digest(config) << '\n';
    return true;
}

// ---------------------------------------------------------------------------

struct UniverseArgs {
    std::string vocab = "coco80";
    std::string out;
};

void run_build_universe(const Globals& g, const UniverseArgs& a) {
    const auto vocab = load_vocabulary(a.vocab);
    const json config{{"vocab", a.vocab}, {"vocab_size", vocab.size()}};
    if (digest_only(g, config)) return;
    const auto universe = build_universe(vocab);
    write_triplet_list(a.out, universe, make_provenance("build-universe", config));
    std::cerr << "universe: " << universe.size() << " triplets -> " << a.out << '\n';
}

struct IngestArgs {
    std::string annotations;
    std::string vocab = "coco80";
    bool include_crowd = false;
    bool no_clamp = false;
    double tolerance = 0.0;
};

void add_ingest_flags(CLI::App* cmd, IngestArgs& a) {
    cmd->add_option("--annotations", a.annotations, "COCO instances file or normalized .jsonl snapshot")->required();
    cmd->add_option("--vocab", a.vocab, "coco80 or a label file (.json array or one label per line)");
    cmd->add_flag("--include-crowd", a.include_crowd, "keep iscrowd=1 annotations");
    cmd->add_flag("--no-clamp", a.no_clamp, "drop out-of-bounds boxes instead of clamping them");
    cmd->add_option("--tolerance", a.tolerance, "containment tolerance in pixels")->check(CLI::NonNegativeNumber);
}

IngestPolicy policy_of(const IngestArgs& a) { return IngestPolicy{a.include_crowd, !a.no_clamp}; }

struct FilterArgs {
    IngestArgs in;
    std::string out;
    std::string snapshot;
    std::string counting = "instance_pair";
};

void run_filter_natural(const Globals& g, CLI::App* cmd, FilterArgs a) {
    from_config(g, cmd, "--tolerance", "containment_tolerance", a.in.tolerance);
    require_input(a.in.annotations, "--annotations");
    const auto vocab = load_vocabulary(a.in.vocab);
    const auto unit = parse_counting_unit(a.counting);
    const json config{{"annotations", fs::path(a.in.annotations).filename().string()},
                      {"vocab", a.in.vocab},
                      {"ingest", to_json(policy_of(a.in))},
                      {"containment_tolerance", a.in.tolerance},
                      {"counting_unit", std::string(to_string(unit))}};
    if (digest_only(g, config)) return;

    IngestStats stats;
    const auto images = load_images(a.in.annotations, vocab, policy_of(a.in), &stats);
    const auto table = natural_filter(vocab, images, RelationConfig{a.in.tolerance}, unit, g.threads);
    auto prov = make_provenance("filter-natural", config);
    prov["ingest_stats"] = to_json(stats);
    prov["universe_size"] = vocab.size() * (vocab.size() - 1) * kRelationCount;
    write_triplet_table(a.out, table, prov);
    if (!a.snapshot.empty()) write_snapshot(a.snapshot, images, make_provenance("ingest", config));

    const double universe = static_cast<double>(vocab.size() * (vocab.size() - 1) * kRelationCount);
    std::cerr << "images: " << images.size() << ", retained instances: " << stats.retained << '\n'
              << "naturally-occurring triplets: " << table.size() << " ("
              << format_fixed(100.0 * static_cast<double>(table.size()) / universe) << "% of universe) -> " << a.out
              << '\n';
}

struct SplitArgs {
    std::string mode = "main";
    std::string natural;
    std::string vocab = "coco80";
    std::size_t val_size = kDefaultValSize;
    std::uint64_t seed = 0;
    std::string partition_file;
    bool random_partition = false;
    std::size_t n_train = 45;
    std::size_t n_val = 5;
    std::string out;
};

void run_split(const Globals& g, const SplitArgs& a) {
    require_input(a.natural, "--natural");
    const auto kind = parse_split_kind(a.mode);
    const auto vocab = load_vocabulary(a.vocab);
    json config{{"mode", a.mode}, {"vocab", a.vocab}, {"val_size", a.val_size}, {"natural", fs::path(a.natural).filename().string()}};
    std::optional<ObjectPartition> partition;
    if (kind == SplitKind::unseen) {
        if (!a.partition_file.empty()) {
            require_input(a.partition_file, "--partition-file");
            partition = read_partition(a.partition_file);
            config["partition"] = to_json(*partition);
        } else if (a.random_partition) {
            partition = random_partition(vocab, a.seed, a.n_train, a.n_val);
            config["partition"] = "random";
        } else {
            config["partition"] = "canonical";
        }
    }
    if (digest_only(g, config)) return;
    const auto natural = read_triplet_table(a.natural);
    const auto m = kind == SplitKind::main ? build_main_split(natural, vocab, a.seed, a.val_size)
                                           : build_unseen_split(natural, vocab, a.seed, a.val_size, partition);
    write_manifest(a.out, m, make_provenance("split", config, a.seed));
    std::cerr << a.mode << " split: " << m.test_triplets.size() << " test, " << m.val_triplets.size() << " val ("
              << m.val_candidates << " candidates) -> " << a.out << '\n';
}

struct CaptionArgs {
    std::string split;
    std::string set = "test";
    std::string articles = "indefinite";
    std::size_t limit = 0;
    std::uint64_t seed = 0;
    std::string out;
};

void run_gen_captions(const Globals& g, const CaptionArgs& a) {
    require_input(a.split, "--split");
    const auto policy = parse_article_policy(a.articles);
    if (a.set != "test" && a.set != "val") throw UsageError("--set must be test or val");
    const json config{{"split", fs::path(a.split).filename().string()},
                      {"set", a.set},
                      {"articles", a.articles},
                      {"limit", a.limit}};
    if (digest_only(g, config)) return;
    const auto m = read_manifest(a.split);
    auto triplets = a.set == "test" ? m.test_triplets : m.val_triplets;
    if (a.limit > 0 && a.limit < triplets.size()) {
        Rng rng(derive_seed(a.seed, 4));
        triplets = sample_without_replacement(std::move(triplets), a.limit, rng);
        std::sort(triplets.begin(), triplets.end());
    }
    const auto captions = make_captions(triplets, policy);
    write_captions(a.out, captions, make_provenance("gen-captions", config, a.seed));
    std::cerr << "captions: " << captions.size() << " -> " << a.out << '\n';
}

struct SampleArgs {
    std::string annotations;
    std::string vocab = "coco80";
    std::string split = "main";
    std::string manifest;
    std::size_t k = 2;
    std::size_t max_iter = 10;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double flip_probability = 0.5;
    double crop_min = 0.5;
    double crop_max = 1.0;
    double min_visible_area = 0.0;
    double tolerance = 0.0;
    bool include_crowd = false;
    std::string out;
};

void run_sample(const Globals& g, CLI::App* cmd, SampleArgs a) {
    from_config(g, cmd, "--k", "k", a.k);
    from_config(g, cmd, "--max-iter", "max_iter", a.max_iter);
    from_config(g, cmd, "--flip-prob", "flip_probability", a.flip_probability);
    from_config(g, cmd, "--tolerance", "containment_tolerance", a.tolerance);
    require_input(a.annotations, "--annotations");
    const auto vocab = load_vocabulary(a.vocab);
    const auto kind = parse_split_kind(a.split);

    SamplerConfig cfg;
    cfg.k = a.k;
    cfg.max_iter = a.max_iter;
    cfg.seed = a.seed;
    cfg.flip_probability = a.flip_probability;
    cfg.crop_scale_min = a.crop_min;
    cfg.crop_scale_max = a.crop_max;
    cfg.min_visible_area = a.min_visible_area;
    cfg.relation.containment_tolerance = a.tolerance;
    if (kind == SplitKind::unseen) {
        ObjectPartition p = canonical_unseen_partition();
        if (!a.manifest.empty()) {
            require_input(a.manifest, "--manifest");
            p = read_manifest(a.manifest).partition;
        }
        cfg.allowed_objects = std::set<std::string>(p.train_objects.begin(), p.train_objects.end());
    }
    cfg.validate();
    json config = to_json(cfg);
    config["annotations"] = fs::path(a.annotations).filename().string();
    config["split"] = a.split;
    config["n"] = a.n;
    if (digest_only(g, config)) return;

    const auto images = load_images(a.annotations, vocab, IngestPolicy{a.include_crowd, true});
    const auto samples = sample_training_batch(images, cfg, a.n, g.threads);
    write_samples(a.out, samples, make_provenance("sample", config, a.seed));
    std::cerr << "samples: " << samples.size() << " -> " << a.out << '\n';
}

struct EvalArgs {
    std::string captions;
    std::string detections;
    double threshold = 0.1;
    std::size_t images_per_caption = 4;
    std::string pairing = "best_score";
    double tolerance = 0.0;
    std::string out;
};

void run_evaluate(const Globals& g, CLI::App* cmd, EvalArgs a) {
    from_config(g, cmd, "--threshold", "score_threshold", a.threshold);
    from_config(g, cmd, "--images-per-caption", "images_per_caption", a.images_per_caption);
    from_config(g, cmd, "--pairing", "pairing", a.pairing);
    from_config(g, cmd, "--tolerance", "containment_tolerance", a.tolerance);
    require_input(a.captions, "--captions");
    require_input(a.detections, "--detections");
    EvalConfig cfg;
    cfg.score_threshold = a.threshold;
    cfg.images_per_caption = a.images_per_caption;
    cfg.pairing = parse_pairing_mode(a.pairing);
    cfg.relation.containment_tolerance = a.tolerance;
    cfg.validate();
    json config = to_json(cfg);
    config["captions"] = fs::path(a.captions).filename().string();
    config["detections"] = fs::path(a.detections).filename().string();
    if (digest_only(g, config)) return;

    const auto captions = read_captions(a.captions);
    const auto dets = read_detections(a.detections);
    const auto rep = aggregate(dets, captions, cfg);
    write_report(a.out, rep, make_provenance("evaluate", config));
    auto show = [](const std::optional<double>& v) { return v ? format_fixed(*v) : std::string("absent"); };
    std::cerr << "OA " << show(rep.overall.oa_percent()) << "  VISOR " << show(rep.overall.visor_percent())
              << "  VISOR_cond " << show(rep.overall.visor_cond_percent()) << " -> " << a.out << '\n';
}

struct ScanArgs {
    std::vector<std::string> inputs;
    std::size_t column = 0;
    std::string lexicon;
    std::string out;
};

void run_scan_corpus(const Globals& g, const ScanArgs& a) {
    std::vector<fs::path> paths;
    for (const auto& p : a.inputs) {
        require_input(p, "--input");
        paths.emplace_back(p);
    }
    if (paths.empty()) throw UsageError("--input needs at least one path");
    RelationLexicon lex = default_lexicon();
    if (!a.lexicon.empty()) {
        require_input(a.lexicon, "--lexicon");
        lex = lexicon_from_json(read_json_file(a.lexicon), a.lexicon);
    }
    json inputs = json::array();
    for (const auto& p : paths) inputs.push_back(p.filename().string());
    const json config{{"inputs", inputs}, {"column", a.column}, {"lexicon", to_json(lex)}};
    if (digest_only(g, config)) return;
    const auto stats = scan_files(paths, lex, a.column, g.threads);
    auto doc = to_json(stats);
    doc["provenance"] = make_provenance("scan-corpus", config);
    write_json_file(a.out, doc);
    std::cerr << "captions: " << stats.total_captions << ", with relation: " << stats.captions_with_any_relation
              << " -> " << a.out << '\n';
}

struct ReportArgs {
    std::string eval;
    std::string baseline;
    std::string freq;
    std::string out;
    std::vector<std::uint64_t> edges = default_frequency_edges();
    std::uint64_t qual_lo = 100;
    std::uint64_t qual_hi = 1000;
    std::size_t qual_n = 20;
    std::uint64_t seed = 0;
};

void run_report(const Globals& g, const ReportArgs& a) {
    require_input(a.eval, "--eval");
    require_input(a.freq, "--freq");
    if (!a.baseline.empty()) require_input(a.baseline, "--baseline");
    const json config{{"eval", fs::path(a.eval).filename().string()},
                      {"baseline", a.baseline.empty() ? json(nullptr) : json(fs::path(a.baseline).filename().string())},
                      {"freq", fs::path(a.freq).filename().string()},
                      {"edges", a.edges},
                      {"qualitative", {{"lo", a.qual_lo}, {"hi", a.qual_hi}, {"n", a.qual_n}}}};
    if (digest_only(g, config)) return;

    const auto rep = read_report(a.eval);
    std::optional<EvalReport> base;
    if (!a.baseline.empty()) base = read_report(a.baseline);
    const auto freq = read_triplet_table(a.freq);
    const EvalReport* bp = base ? &*base : nullptr;
    const auto prov = make_provenance("report", config, a.seed);
    const fs::path dir(a.out);

    const auto rows = per_relation_table(rep, bp);
    write_csv(dir / "per_relation.csv", relation_table_csv(rows), prov);
    write_atomically(dir / "per_relation.txt", [&](std::ostream& os) { os << relation_table_text(rows); });
    write_csv(dir / "bias.csv", bias_table_csv(bias_table(rep, bp)), prov);
    const auto bins = frequency_correlation(rep, freq, a.edges);
    std::optional<FrequencyBinning> base_bins;
    if (base) base_bins = frequency_correlation(*base, freq, a.edges);
    write_csv(dir / "frequency.csv", frequency_csv(bins, base_bins ? &*base_bins : nullptr), prov);
    const auto qual = sample_qualitative_triplets(freq, a.qual_lo, a.qual_hi, a.qual_n, a.seed);
    if (qual.short_by > 0)
        std::cerr << "warning: only " << qual.eligible << " triplets have counts in [" << a.qual_lo << ", "
                  << a.qual_hi << "]\n";
    write_triplet_list(dir / "qualitative.jsonl", qual.triplets, prov);
    std::cerr << "report written to " << dir.string() << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial-relation caption datasets and VISOR-style evaluation"};
    app.set_version_flag("--version", std::string("spatialrel ") + std::string(kVersion));
    app.require_subcommand(1);

    Globals g;
    if (const char* env = std::getenv("SPATIALREL_CONFIG")) g.config_path = env;
    app.add_option("--threads", g.threads, "worker threads (default: available parallelism)")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config_path, "JSON file with default settings (env SPATIALREL_CONFIG)");
    app.add_flag("--config-digest", g.print_digest, "print the digest of the resolved configuration and exit");

    UniverseArgs ua;
    auto* c_universe = app.add_subcommand("build-universe", "all ordered label pairs times 14 relations");
    c_universe->add_option("--vocab", ua.vocab, "coco80 or a label file");
    c_universe->add_option("--out", ua.out)->required();

    FilterArgs fa;
    auto* c_filter = app.add_subcommand("filter-natural", "count triplets instantiated by annotated images");
    add_ingest_flags(c_filter, fa.in);
    c_filter->add_option("--counting", fa.counting, "instance_pair or image_presence");
    c_filter->add_option("--snapshot", fa.snapshot, "also write the normalized annotation snapshot");
    c_filter->add_option("--out", fa.out)->required();

    SplitArgs sa;
    auto* c_split = app.add_subcommand("split", "build the main or unseen split manifest");
    c_split->add_option("--mode", sa.mode, "main or unseen");
    c_split->add_option("--natural", sa.natural, "naturally-occurring triplet table")->required();
    c_split->add_option("--vocab", sa.vocab);
    c_split->add_option("--val-size", sa.val_size);
    c_split->add_option("--seed", sa.seed);
    c_split->add_option("--partition-file", sa.partition_file, "JSON with train_objects/val_objects/test_objects");
    c_split->add_flag("--random-partition", sa.random_partition, "draw a seeded partition instead of the canonical one");
    c_split->add_option("--n-train", sa.n_train);
    c_split->add_option("--n-val", sa.n_val);
    c_split->add_option("--out", sa.out)->required();

    CaptionArgs ca;
    auto* c_caps = app.add_subcommand("gen-captions", "verbalize a split's triplets");
    c_caps->add_option("--split", ca.split, "split manifest")->required();
    c_caps->add_option("--set", ca.set, "test or val");
    c_caps->add_option("--articles", ca.articles, "indefinite or bare");
    c_caps->add_option("--limit", ca.limit, "seeded subsample of this many captions (0 = all)");
    c_caps->add_option("--seed", ca.seed);
    c_caps->add_option("--out", ca.out)->required();

    SampleArgs pa;
    auto* c_sample = app.add_subcommand("sample", "generate augmented training captions");
    c_sample->add_option("--annotations", pa.annotations)->required();
    c_sample->add_option("--vocab", pa.vocab);
    c_sample->add_option("--split", pa.split, "main or unseen");
    c_sample->add_option("--manifest", pa.manifest, "unseen split manifest supplying the training objects");
    c_sample->add_option("--k", pa.k, "captions concatenated per sample");
    c_sample->add_option("--max-iter", pa.max_iter, "crop redraw budget");
    c_sample->add_option("--n", pa.n, "number of samples");
    c_sample->add_option("--seed", pa.seed);
    c_sample->add_option("--flip-prob", pa.flip_probability);
    c_sample->add_option("--crop-min", pa.crop_min, "minimum crop area fraction");
    c_sample->add_option("--crop-max", pa.crop_max, "maximum crop area fraction");
    c_sample->add_option("--min-visible-area", pa.min_visible_area);
    c_sample->add_option("--tolerance", pa.tolerance)->check(CLI::NonNegativeNumber);
    c_sample->add_flag("--include-crowd", pa.include_crowd);
    c_sample->add_option("--out", pa.out)->required();

    EvalArgs ea;
    auto* c_eval = app.add_subcommand("evaluate", "score detections against captions");
    c_eval->add_option("--captions", ea.captions)->required();
    c_eval->add_option("--detections", ea.detections)->required();
    c_eval->add_option("--threshold", ea.threshold);
    c_eval->add_option("--images-per-caption", ea.images_per_caption);
    c_eval->add_option("--pairing", ea.pairing, "best_score or any_pair");
    c_eval->add_option("--tolerance", ea.tolerance)->check(CLI::NonNegativeNumber);
    c_eval->add_option("--out", ea.out)->required();

    ScanArgs xa;
    auto* c_scan = app.add_subcommand("scan-corpus", "count relation keywords in caption text");
    c_scan->add_option("--input", xa.inputs, "caption files (comma-separated; '-' for stdin)")->required()->delimiter(',');
    c_scan->add_option("--column", xa.column, "1-based tab-separated column (0 = whole line)");
    c_scan->add_option("--lexicon", xa.lexicon, "JSON relation -> keywords map");
    c_scan->add_option("--out", xa.out)->required();

    ReportArgs ra;
    auto* c_report = app.add_subcommand("report", "emit per-relation, bias and frequency tables");
    c_report->add_option("--eval", ra.eval)->required();
    c_report->add_option("--baseline", ra.baseline);
    c_report->add_option("--freq", ra.freq, "triplet frequency table")->required();
    c_report->add_option("--out", ra.out, "output directory")->required();
    c_report->add_option("--edges", ra.edges, "frequency bin edges")->delimiter(',');
    c_report->add_option("--qual-lo", ra.qual_lo);
    c_report->add_option("--qual-hi", ra.qual_hi);
    c_report->add_option("--qual-n", ra.qual_n);
    c_report->add_option("--seed", ra.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (!g.config_path.empty()) {
            require_input(g.config_path, "--config");
            g.config_file = read_json_file(g.config_path);
        }
        if (*c_universe) run_build_universe(g, ua);
        else if (*c_filter) run_filter_natural(g, c_filter, fa);
        else if (*c_split) run_split(g, sa);
        else if (*c_caps) run_gen_captions(g, ca);
        else if (*c_sample) run_sample(g, c_sample, pa);
        else if (*c_eval) run_evaluate(g, c_eval, ea);
        else if (*c_scan) run_scan_corpus(g, xa);
        else if (*c_report) run_report(g, ra);
        return kOk;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const json::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const InvariantError& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return kInternal;
    }
}
