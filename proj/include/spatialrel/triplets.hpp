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
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "ingest.hpp"
#include "io.hpp"
#include "vocabulary.hpp"

namespace spatialrel {

/// Ordered <subject, relation, object> over object labels.
struct SpatialTriplet {
    std::string subject;
    Relation relation = Relation::left_of;
    std::string object;

    friend bool operator==(const SpatialTriplet&, const SpatialTriplet&) = default;

    // Lexicographic over (subject, relation name, object); this is the order
    // of every serialized triplet list.
    friend std::strong_ordering operator<=>(const SpatialTriplet& a, const SpatialTriplet& b) {
        if (auto c = a.subject <=> b.subject; c != 0) return c;
        if (auto c = to_string(a.relation) <=> to_string(b.relation); c != 0) return c;
        return a.object <=> b.object;
    }

    friend std::ostream& operator<<(std::ostream& os, const SpatialTriplet& t) {
        return os << "<" << t.subject << ", " << t.relation << ", " << t.object << ">";
    }
};

inline json to_json(const SpatialTriplet& t) {
    return json{{"subject", t.subject}, {"relation", std::string(to_string(t.relation))}, {"object", t.object}};
}

inline SpatialTriplet triplet_from_json(const json& rec, const std::string& ctx) {
    SpatialTriplet t;
    t.subject = require<std::string>(rec, "subject", ctx);
    t.object = require<std::string>(rec, "object", ctx);
    const auto rel = require<std::string>(rec, "relation", ctx);
    auto r = try_parse_relation(rel);
    if (!r) throw SchemaError(ctx + ": unknown relation '" + rel + "'");
    t.relation = *r;
    if (t.subject == t.object) throw SchemaError(ctx + ": subject and object labels must differ");
    return t;
}

/// Occurrence counts keyed by triplet. Present keys always have count >= 1.
class TripletTable {
public:
    using Map = std::map<SpatialTriplet, std::uint64_t>;

    void add(const SpatialTriplet& t, std::uint64_t n = 1) {
        if (n == 0) return;
        counts_[t] += n;
    }

    std::uint64_t count(const SpatialTriplet& t) const {
        auto it = counts_.find(t);
        return it == counts_.end() ? 0 : it->second;
    }

    bool contains(const SpatialTriplet& t) const { return counts_.count(t) != 0; }
    std::size_t size() const noexcept { return counts_.size(); }
    bool empty() const noexcept { return counts_.empty(); }

    void merge(const TripletTable& other) {
        for (const auto& [t, n] : other.counts_) counts_[t] += n;
    }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (const auto& [t, n] : counts_) s += n;
        return s;
    }

    /// Keys in serialized order.
    std::vector<SpatialTriplet> triplets() const {
        std::vector<SpatialTriplet> out;
        out.reserve(counts_.size());
        for (const auto& [t, n] : counts_) out.push_back(t);
        return out;
    }

    Map::const_iterator begin() const noexcept { return counts_.begin(); }
    Map::const_iterator end() const noexcept { return counts_.end(); }

    friend bool operator==(const TripletTable&, const TripletTable&) = default;

private:
    Map counts_;
};

/// How instances contribute to a triplet's count within one image.
enum class CountingUnit {
    instance_pair,  // one per ordered instance pair
    image_presence, // at most one per image
};

inline std::string_view to_string(CountingUnit u) noexcept {
    return u == CountingUnit::instance_pair ? "instance_pair" : "image_presence";
}

inline CountingUnit parse_counting_unit(std::string_view s) {
    if (s == "instance_pair") return CountingUnit::instance_pair;
    if (s == "image_presence") return CountingUnit::image_presence;
    throw UsageError("unknown counting unit '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------

/// Every ordered pair of distinct labels combined with every relation,
/// |V| * (|V| - 1) * 14 triplets in serialized order.
inline std::vector<SpatialTriplet> build_universe(const Vocabulary& vocab) {
    std::vector<SpatialTriplet> out;
    const auto n = vocab.size();
    out.reserve(n * (n > 0 ? n - 1 : 0) * kRelationCount);
    for (const auto& s : vocab.labels())
        for (const auto& o : vocab.labels()) {
            if (s == o) continue;
            for (auto r : kAllRelations) out.push_back({s, r, o});
        }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<SpatialTriplet> build_universe(const std::vector<std::string>& labels) {
    return build_universe(Vocabulary(labels));
}

/// Triplets instantiated by one image. Pairs of instances that share a
/// label are skipped since a label-level triplet needs two distinct labels.
inline TripletTable extract_image_triplets(const ImageAnnotations& img, const RelationConfig& cfg = {},
                                           CountingUnit unit = CountingUnit::instance_pair) {
    TripletTable table;
    const auto& objs = img.objects;
    for (std::size_t i = 0; i < objs.size(); ++i)
        for (std::size_t j = 0; j < objs.size(); ++j) {
            if (i == j || objs[i].label == objs[j].label) continue;
            const auto rels = valid_relations(objs[i].bbox, objs[j].bbox, cfg);
            for (auto r : rels.to_vector()) {
                SpatialTriplet t{objs[i].label, r, objs[j].label};
                if (unit == CountingUnit::image_presence && table.contains(t)) continue;
                table.add(t);
            }
        }
    return table;
}

namespace detail {

// Dense [subject][object][relation] counters over vocabulary indices.
struct DenseCounts {
    std::size_t n = 0;
    std::vector<std::uint64_t> counts;

    explicit DenseCounts(std::size_t vocab_size) : n(vocab_size), counts(vocab_size * vocab_size * kRelationCount, 0) {}

    std::uint64_t& at(std::size_t s, std::size_t o, Relation r) {
        return counts[(s * n + o) * kRelationCount + index_of(r)];
    }

    void merge(const DenseCounts& other) {
        for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    }
};

inline void accumulate_image(const ImageAnnotations& img, const Vocabulary& vocab, const RelationConfig& cfg,
                             CountingUnit unit, DenseCounts& out, std::vector<std::uint16_t>& seen_scratch) {
    std::vector<std::size_t> idx;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < img.objects.size(); ++i) {
        if (auto k = vocab.index(img.objects[i].label)) {
            idx.push_back(*k);
            keep.push_back(i);
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> touched;
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = 0; b < keep.size(); ++b) {
            if (a == b || idx[a] == idx[b]) continue;
            const auto rels = valid_relations(img.objects[keep[a]].bbox, img.objects[keep[b]].bbox, cfg);
            if (unit == CountingUnit::instance_pair) {
                for (auto r : kAllRelations)
                    if (rels.contains(r)) ++out.at(idx[a], idx[b], r);
            } else {
                auto& seen = seen_scratch[idx[a] * out.n + idx[b]];
                if (seen == 0) touched.emplace_back(idx[a], idx[b]);
                seen |= rels.bits();
            }
        }
    for (auto [s, o] : touched) {
        auto& seen = seen_scratch[s * out.n + o];
        for (auto r : kAllRelations)
            if ((seen >> index_of(r)) & 1U) ++out.at(s, o, r);
        seen = 0;
    }
}

} // namespace detail

/// Naturally-occurring triplets of `corpus` with their counts, restricted to
/// the universe spanned by `vocab`. `threads` == 0 uses available parallelism;
/// the result does not depend on the thread count.
inline TripletTable natural_filter(const Vocabulary& vocab, const std::vector<ImageAnnotations>& corpus,
                                   const RelationConfig& cfg = {}, CountingUnit unit = CountingUnit::instance_pair,
                                   unsigned threads = 1) {
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, corpus.size())));
    const std::size_t n = vocab.size();

    std::vector<detail::DenseCounts> partial(threads, detail::DenseCounts(n));
    auto work = [&](unsigned w) {
        std::vector<std::uint16_t> scratch(n * n, 0);
        for (std::size_t i = w; i < corpus.size(); i += threads)
            detail::accumulate_image(corpus[i], vocab, cfg, unit, partial[w], scratch);
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (unsigned w = 1; w < threads; ++w) partial[0].merge(partial[w]);

    TripletTable table;
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t o = 0; o < n; ++o) {
            if (s == o) continue;
            for (auto r : kAllRelations)
                if (auto c = partial[0].at(s, o, r)) table.add({vocab[s], r, vocab[o]}, c);
        }
    return table;
}

inline void write_triplet_table(const std::filesystem::path& path, const TripletTable& table, const json& provenance) {
    write_jsonl(path, provenance, table, [](const auto& kv) {
        auto j = to_json(kv.first);
        j["count"] = kv.second;
        return j;
    });
}

inline TripletTable read_triplet_table(const std::filesystem::path& path) {
    TripletTable table;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        const auto ctx = path.string() + ":" + std::to_string(line);
        auto t = triplet_from_json(rec, ctx);
        const auto c = require<std::uint64_t>(rec, "count", ctx);
        if (c == 0) throw SchemaError(ctx + ": count must be positive");
        if (table.contains(t)) throw SchemaError(ctx + ": duplicate triplet");
        table.add(t, c);
    });
    return table;
}

inline void write_triplet_list(const std::filesystem::path& path, const std::vector<SpatialTriplet>& triplets,
                               const json& provenance) {
    write_jsonl(path, provenance, triplets, [](const SpatialTriplet& t) { return to_json(t); });
}

// ---------------------------------------------------------------------------
// Captions

enum class ArticlePolicy {
    indefinite, // "a dog", "an apple"
    bare,       // "dog", "apple"
};

inline std::string_view to_string(ArticlePolicy p) noexcept {
    return p == ArticlePolicy::indefinite ? "indefinite" : "bare";
}

inline ArticlePolicy parse_article_policy(std::string_view s) {
    if (s == "indefinite") return ArticlePolicy::indefinite;
    if (s == "bare") return ArticlePolicy::bare;
    throw UsageError("unknown article policy '" + std::string(s) + "'");
}

namespace detail {

struct CaptionTemplate {
    std::string_view infix;  // between <A> and <B>
    std::string_view suffix; // after <B>, before the period
};

inline constexpr std::array<CaptionTemplate, kRelationCount> kTemplates = {{
    {" to the left of ", ""},
    {" to the right of ", ""},
    {" above ", ""},
    {" below ", ""},
    {" overlapping ", ""},
    {" and ", " separated"},
    {" surrounding ", ""},
    {" inside of ", ""},
    {" taller than ", ""},
    {" shorter than ", ""},
    {" wider than ", ""},
    {" narrower than ", ""},
    {" larger than ", ""},
    {" smaller than ", ""},
}};

inline bool starts_with_vowel(std::string_view s) {
    if (s.empty()) return false;
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(s.front())));
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

inline std::string noun_phrase(const std::string& label, ArticlePolicy policy) {
    if (policy == ArticlePolicy::bare) return label;
    return (starts_with_vowel(label) ? "an " : "a ") + label;
}

inline std::optional<std::string> parse_noun_phrase(std::string_view np, const Vocabulary& vocab, ArticlePolicy policy) {
    std::string_view label = np;
    if (policy == ArticlePolicy::indefinite) {
        if (np.rfind("an ", 0) == 0) label = np.substr(3);
        else if (np.rfind("a ", 0) == 0) label = np.substr(2);
        else return std::nullopt;
        if (noun_phrase(std::string(label), policy) != np) return std::nullopt;
    }
    if (!vocab.contains(label)) return std::nullopt;
    return std::string(label);
}

inline std::string template_text(Relation r) {
    const auto& t = kTemplates[index_of(r)];
    return "<A>" + std::string(t.infix) + "<B>" + std::string(t.suffix) + ".";
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::vector<std::string_view> split_words(std::string_view s) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ') ++j;
        if (j > i) words.push_back(s.substr(i, j - i));
        i = j;
    }
    return words;
}

// Template whose connective words are closest (edit distance) to some
// window of the caption's words.
inline Relation nearest_template(std::string_view body) {
    const auto words = split_words(body);
    Relation best = Relation::left_of;
    std::size_t best_d = SIZE_MAX;
    for (auto r : kAllRelations) {
        const auto& t = kTemplates[index_of(r)];
        std::string connective(t.infix.substr(1, t.infix.size() - 2));
        if (!t.suffix.empty()) connective += std::string(t.suffix);
        const auto n = split_words(connective).size();
        std::size_t d = levenshtein(body, connective);
        for (std::size_t i = 0; i + n <= words.size(); ++i) {
            std::string window;
            for (std::size_t k = 0; k < n; ++k) window += (k ? " " : "") + std::string(words[i + k]);
            d = std::min(d, levenshtein(window, connective));
        }
        if (d < best_d) {
            best_d = d;
            best = r;
        }
    }
    return best;
}

} // namespace detail

/// Caption sentence for a triplet: capitalized, single terminal period.
inline std::string verbalize(const SpatialTriplet& t, ArticlePolicy policy = ArticlePolicy::indefinite) {
    const auto& tpl = detail::kTemplates[index_of(t.relation)];
    std::string s = detail::noun_phrase(t.subject, policy);
    s += tpl.infix;
    s += detail::noun_phrase(t.object, policy);
    s += tpl.suffix;
    s += '.';
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    return s;
}

/// Inverse of verbalize. Throws ParseError naming the nearest template when
/// no template matches.
inline SpatialTriplet parse_caption(std::string_view text, const Vocabulary& vocab,
                                    ArticlePolicy policy = ArticlePolicy::indefinite) {
    auto fail = [&](std::string_view body) -> ParseError {
        return ParseError("caption '" + std::string(text) + "' matches no template; nearest template is '" +
                          detail::template_text(detail::nearest_template(body)) + "'");
    };
    if (text.size() < 2 || text.back() != '.') throw fail(text);
    std::string body(text.substr(0, text.size() - 1));
    body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));

    for (auto r : kAllRelations) {
        const auto& tpl = detail::kTemplates[index_of(r)];
        std::string_view rest = body;
        if (!tpl.suffix.empty()) {
            if (rest.size() < tpl.suffix.size() || rest.substr(rest.size() - tpl.suffix.size()) != tpl.suffix) continue;
            rest.remove_suffix(tpl.suffix.size());
        }
        for (auto pos = rest.find(tpl.infix); pos != std::string_view::npos; pos = rest.find(tpl.infix, pos + 1)) {
            auto subj = detail::parse_noun_phrase(rest.substr(0, pos), vocab, policy);
            auto obj = detail::parse_noun_phrase(rest.substr(pos + tpl.infix.size()), vocab, policy);
            if (subj && obj && *subj != *obj) {
                SpatialTriplet t{*subj, r, *obj};
                if (verbalize(t, policy) == text) return t;
            }
        }
    }
    throw fail(body);
}

struct CaptionRecord {
    std::string caption_id;
    SpatialTriplet triplet;
    std::string text;

    friend bool operator==(const CaptionRecord&, const CaptionRecord&) = default;
};

inline std::string caption_id_for(std::size_t index) {
    std::ostringstream os;
    os << "cap-" << std::setw(6) << std::setfill('0') << index;
    return os.str();
}

/// Caption records with sequential ids in the given triplet order.
inline std::vector<CaptionRecord> make_captions(const std::vector<SpatialTriplet>& triplets,
                                                ArticlePolicy policy = ArticlePolicy::indefinite) {
    std::vector<CaptionRecord> out;
    out.reserve(triplets.size());
    for (std::size_t i = 0; i < triplets.size(); ++i)
        out.push_back({caption_id_for(i), triplets[i], verbalize(triplets[i], policy)});
    return out;
}

inline json to_json(const CaptionRecord& c) {
    auto j = to_json(c.triplet);
    j["caption_id"] = c.caption_id;
    j["text"] = c.text;
    return j;
}

inline void write_captions(const std::filesystem::path& path, const std::vector<CaptionRecord>& captions,
                           const json& provenance) {
    write_jsonl(path, provenance, captions, [](const CaptionRecord& c) { return to_json(c); });
}

/// Reads a caption manifest; each text must match its triplet's verbalization
/// under one of the article policies.
inline std::vector<CaptionRecord> read_captions(const std::filesystem::path& path) {
    std::vector<CaptionRecord> out;
    std::map<std::string, std::size_t> ids;
    for_each_jsonl(path, [&](const json& rec, std::size_t line) {
        const auto ctx = path.string() + ":" + std::to_string(line);
        CaptionRecord c;
        c.caption_id = require<std::string>(rec, "caption_id", ctx);
        c.triplet = triplet_from_json(rec, ctx);
        c.text = require<std::string>(rec, "text", ctx);
        if (c.text != verbalize(c.triplet, ArticlePolicy::indefinite) && c.text != verbalize(c.triplet, ArticlePolicy::bare))
            throw SchemaError(ctx + ": text does not match the template for " + to_json(c.triplet).dump());
        if (!ids.emplace(c.caption_id, line).second) throw SchemaError(ctx + ": duplicate caption_id " + c.caption_id);
        out.push_back(std::move(c));
    });
    return out;
}

} // namespace spatialrel
