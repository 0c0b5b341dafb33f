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
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "io.hpp"

namespace spatialrel {

/// Keywords per relation; a caption mentions a relation when any of its
/// keywords appears as a whole word, case-insensitively.
class RelationLexicon {
public:
    using Keywords = std::array<std::vector<std::string>, kRelationCount>;

    RelationLexicon() = default;

    /// Keywords must be lowercase ASCII alphanumeric words, unique across relations.
    explicit RelationLexicon(Keywords keywords) : keywords_(std::move(keywords)) {
        std::unordered_map<std::string, Relation> seen;
        for (auto r : kAllRelations)
            for (const auto& k : keywords_[index_of(r)]) {
                if (k.empty()) throw UsageError("lexicon: empty keyword for " + std::string(to_string(r)));
                for (unsigned char c : k)
                    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')))
                        throw UsageError("lexicon: keyword '" + k + "' must be a lowercase alphanumeric word");
                if (auto [it, ok] = seen.emplace(k, r); !ok)
                    throw UsageError("lexicon: keyword '" + k + "' listed for both " + std::string(to_string(it->second)) +
                                     " and " + std::string(to_string(r)));
            }
    }

    const std::vector<std::string>& keywords(Relation r) const { return keywords_[index_of(r)]; }
    const Keywords& all() const noexcept { return keywords_; }

private:
    Keywords keywords_;
};

/// left, right, above, below, overlapping, ... one word per relation.
inline RelationLexicon default_lexicon() {
    RelationLexicon::Keywords k;
    for (auto r : kAllRelations) {
        std::string word(to_string(r));
        if (auto pos = word.find("_of"); pos != std::string::npos) word.erase(pos);
        k[index_of(r)] = {word};
    }
    return RelationLexicon(std::move(k));
}

/// {"left_of": ["left", ...], ...}; relations not listed get no keywords.
inline RelationLexicon lexicon_from_json(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw SchemaError(ctx + ": lexicon must be an object");
    RelationLexicon::Keywords k;
    for (const auto& [name, words] : j.items()) {
        auto r = try_parse_relation(name);
        if (!r) throw SchemaError(ctx + ": unknown relation '" + name + "'");
        try {
            k[index_of(*r)] = words.get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw SchemaError(ctx + ": " + name + ": " + e.what());
        }
    }
    return RelationLexicon(std::move(k));
}

inline json to_json(const RelationLexicon& lex) {
    json j = json::object();
    for (auto r : kAllRelations) j[std::string(to_string(r))] = lex.keywords(r);
    return j;
}

struct CorpusStats {
    std::uint64_t total_captions = 0;
    std::uint64_t captions_with_any_relation = 0;
    std::uint64_t undecodable = 0;    // invalid UTF-8, skipped
    std::uint64_t missing_column = 0; // too few tab-separated columns, skipped
    std::uint64_t bytes = 0;
    std::array<std::uint64_t, kRelationCount> per_relation{}; // captions mentioning the relation

    std::uint64_t count(Relation r) const { return per_relation[index_of(r)]; }

    CorpusStats& operator+=(const CorpusStats& o) {
        total_captions += o.total_captions;
        captions_with_any_relation += o.captions_with_any_relation;
        undecodable += o.undecodable;
        missing_column += o.missing_column;
        bytes += o.bytes;
        for (std::size_t i = 0; i < kRelationCount; ++i) per_relation[i] += o.per_relation[i];
        return *this;
    }

    friend bool operator==(const CorpusStats&, const CorpusStats&) = default;

    /// Percentage of captions mentioning at least one relation.
    std::optional<double> any_relation_share() const {
        if (total_captions == 0) return std::nullopt;
        return 100.0 * static_cast<double>(captions_with_any_relation) / static_cast<double>(total_captions);
    }
};

namespace detail {

inline bool valid_utf8(std::string_view s) noexcept {
    const auto* p = reinterpret_cast<const unsigned char*>(s.data());
    const auto* end = p + s.size();
    while (p < end) {
        if (*p < 0x80) {
            ++p;
            continue;
        }
        std::size_t n;
        std::uint32_t cp;
        if ((*p & 0xE0) == 0xC0) {
            n = 1;
            cp = *p & 0x1F;
        } else if ((*p & 0xF0) == 0xE0) {
            n = 2;
            cp = *p & 0x0F;
        } else if ((*p & 0xF8) == 0xF0) {
            n = 3;
            cp = *p & 0x07;
        } else {
            return false;
        }
        if (static_cast<std::size_t>(end - p) <= n) return false;
        for (std::size_t i = 1; i <= n; ++i) {
            if ((p[i] & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (p[i] & 0x3F);
        }
        static constexpr std::uint32_t kMin[] = {0, 0x80, 0x800, 0x10000};
        if (cp < kMin[n] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        p += n + 1;
    }
    return true;
}

} // namespace detail

/// Whole-word keyword matcher. Word characters are ASCII letters and digits;
/// everything else separates words.
class KeywordMatcher {
public:
    explicit KeywordMatcher(const RelationLexicon& lex) {
        for (int c = 0; c < 256; ++c) {
            const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
            word_[c] = alpha || (c >= '0' && c <= '9');
            lower_[c] = static_cast<char>((c >= 'A' && c <= 'Z') ? c + ('a' - 'A') : c);
        }
        for (auto r : kAllRelations)
            for (const auto& k : lex.keywords(r)) {
                masks_[k] |= static_cast<std::uint16_t>(1U << index_of(r));
                min_len_ = std::min(min_len_, k.size());
                max_len_ = std::max(max_len_, k.size());
                first_[static_cast<unsigned char>(k[0])] = true;
            }
    }

    /// Bitmask (bit = relation index) of relations mentioned in `text`.
    std::uint16_t match(std::string_view text) const {
        std::uint16_t mask = 0;
        char buf[64];
        const std::size_t n = text.size();
        std::size_t i = 0;
        while (i < n) {
            while (i < n && !word_[static_cast<unsigned char>(text[i])]) ++i;
            const std::size_t start = i;
            while (i < n && word_[static_cast<unsigned char>(text[i])]) ++i;
            const std::size_t len = i - start;
            if (len < min_len_ || len > max_len_ || len > sizeof(buf)) continue;
            if (!first_[static_cast<unsigned char>(lower_[static_cast<unsigned char>(text[start])])]) continue;
            for (std::size_t k = 0; k < len; ++k) buf[k] = lower_[static_cast<unsigned char>(text[start + k])];
            if (auto it = masks_.find(std::string_view(buf, len)); it != masks_.end()) mask |= it->second;
        }
        return mask;
    }

private:
    struct Hash {
        using is_transparent = void;
        std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
    };
    struct Eq {
        using is_transparent = void;
        bool operator()(std::string_view a, std::string_view b) const noexcept { return a == b; }
    };

    std::unordered_map<std::string, std::uint16_t, Hash, Eq> masks_;
    std::array<bool, 256> word_{};
    std::array<char, 256> lower_{};
    std::array<bool, 256> first_{};
    std::size_t min_len_ = SIZE_MAX;
    std::size_t max_len_ = 0;
};

/// Streaming per-caption counter. `column` selects a 1-based tab-separated
/// field; 0 uses the whole line.
class CorpusScanner {
public:
    explicit CorpusScanner(const RelationLexicon& lex, std::size_t column = 0) : matcher_(lex), column_(column) {}

    void add_caption(std::string_view line) {
        stats_.bytes += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        std::string_view text = line;
        if (column_ > 0) {
            std::size_t start = 0;
            for (std::size_t c = 1; c < column_; ++c) {
                const auto tab = line.find('\t', start);
                if (tab == std::string_view::npos) {
                    ++stats_.missing_column;
                    return;
                }
                start = tab + 1;
            }
            const auto end = line.find('\t', start);
            text = line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        }
        if (!detail::valid_utf8(text)) {
            ++stats_.undecodable;
            return;
        }
        ++stats_.total_captions;
        const auto mask = matcher_.match(text);
        if (mask == 0) return;
        ++stats_.captions_with_any_relation;
        for (std::size_t r = 0; r < kRelationCount; ++r)
            if ((mask >> r) & 1U) ++stats_.per_relation[r];
    }

    /// Feeds a raw byte stream; lines may span calls.
    void feed(std::string_view chunk) {
        while (!chunk.empty()) {
            const void* nl = std::memchr(chunk.data(), '\n', chunk.size());
            if (!nl) {
                carry_.append(chunk);
                return;
            }
            const auto len = static_cast<std::size_t>(static_cast<const char*>(nl) - chunk.data());
            if (carry_.empty()) {
                add_caption(chunk.substr(0, len));
            } else {
                carry_.append(chunk.substr(0, len));
                add_caption(carry_);
                carry_.clear();
            }
            chunk.remove_prefix(len + 1);
        }
    }

    /// Flushes a trailing line without newline.
    void finish() {
        if (!carry_.empty()) {
            add_caption(carry_);
            stats_.bytes -= 1;
            carry_.clear();
        }
    }

    const CorpusStats& stats() const noexcept { return stats_; }

private:
    KeywordMatcher matcher_;
    std::size_t column_;
    CorpusStats stats_;
    std::string carry_;
};

template <typename Range>
CorpusStats scan(const Range& captions, const RelationLexicon& lex) {
    CorpusScanner sc(lex);
    for (const auto& c : captions) sc.add_caption(std::string_view(c));
    return sc.stats();
}

inline CorpusStats scan_stream(std::FILE* f, const RelationLexicon& lex, std::size_t column = 0) {
    CorpusScanner sc(lex, column);
    std::vector<char> buf(1 << 20);
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), f)) > 0) sc.feed(std::string_view(buf.data(), got));
    if (std::ferror(f)) throw DataError("read error while scanning corpus");
    sc.finish();
    return sc.stats();
}

inline CorpusStats scan_file(const std::filesystem::path& path, const RelationLexicon& lex, std::size_t column = 0) {
    if (path == "-") return scan_stream(stdin, lex, column);
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!f) throw DataError("cannot open '" + path.string() + "'");
    return scan_stream(f.get(), lex, column);
}

/// Scans shards on up to `threads` workers and merges their stats.
inline CorpusStats scan_files(const std::vector<std::filesystem::path>& paths, const RelationLexicon& lex,
                              std::size_t column = 0, unsigned threads = 1) {
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, paths.size())));
    std::vector<CorpusStats> parts(paths.size());
    std::vector<std::exception_ptr> errors(paths.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < paths.size();) {
            try {
                parts[i] = scan_file(paths[i], lex, column);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < threads; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    CorpusStats total;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (errors[i]) std::rethrow_exception(errors[i]);
        total += parts[i];
    }
    return total;
}

// ---------------------------------------------------------------------------
// Derived shares

struct RatioRow {
    Relation preferred;
    Relation opposite;
    std::uint64_t preferred_count = 0;
    std::uint64_t opposite_count = 0;
    std::optional<double> ratio; // absent when opposite_count == 0
};

/// Opposite pairs as compared in the bias analysis, preferred relation first.
inline constexpr std::array<RelationPair, 6> kPreferredPairs = {{
    {Relation::right_of, Relation::left_of},
    {Relation::above, Relation::below},
    {Relation::inside, Relation::surrounding},
    {Relation::taller, Relation::shorter},
    {Relation::wider, Relation::narrower},
    {Relation::larger, Relation::smaller},
}};

inline std::optional<double> ratio_of(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

inline std::vector<RatioRow> ratios(const CorpusStats& stats) {
    std::vector<RatioRow> rows;
    for (const auto& p : kPreferredPairs) {
        const auto a = stats.count(p.first), b = stats.count(p.second);
        rows.push_back({p.first, p.second, a, b, ratio_of(a, b)});
    }
    return rows;
}

/// left + right mentions as a percentage of all relation mentions.
inline std::optional<double> left_right_share(const CorpusStats& stats) {
    std::uint64_t total = 0;
    for (auto c : stats.per_relation) total += c;
    if (total == 0) return std::nullopt;
    const auto lr = stats.count(Relation::left_of) + stats.count(Relation::right_of);
    return 100.0 * static_cast<double>(lr) / static_cast<double>(total);
}

inline json to_json(const CorpusStats& s) {
    json per = json::object();
    for (auto r : kAllRelations) per[std::string(to_string(r))] = s.count(r);
    json rows = json::array();
    for (const auto& row : ratios(s))
        rows.push_back({{"preferred", std::string(to_string(row.preferred))},
                        {"opposite", std::string(to_string(row.opposite))},
                        {"preferred_count", row.preferred_count},
                        {"opposite_count", row.opposite_count},
                        {"ratio", row.ratio ? json(*row.ratio) : json(nullptr)}});
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"counting_unit", "caption_presence"},
                {"total_captions", s.total_captions},
                {"captions_with_any_relation", s.captions_with_any_relation},
                {"any_relation_share", opt(s.any_relation_share())},
                {"left_right_share", opt(left_right_share(s))},
                {"undecodable", s.undecodable},
                {"missing_column", s.missing_column},
                {"bytes", s.bytes},
                {"per_relation", std::move(per)},
                {"ratios", std::move(rows)}};
}

} // namespace spatialrel
