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

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unistd.h>

#include "json.hpp"

#include "errors.hpp"

namespace spatialrel {

using json = nlohmann::json;

inline constexpr std::string_view kVersion = "1.0.0";

/// Key of the header record that opens every line-delimited artifact.
inline constexpr std::string_view kProvenanceKey = "_provenance";

// 64-bit FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view data) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string config_digest(const json& config) { return hex64(fnv1a64(config.dump())); }

/// Provenance block: tool version, producing stage, seed, config and its digest.
inline json make_provenance(std::string_view stage, const json& config, std::optional<std::uint64_t> seed = std::nullopt) {
    json p;
    p["tool"] = "spatialrel";
    p["version"] = std::string(kVersion);
    p["stage"] = std::string(stage);
    p["config"] = config;
    p["config_digest"] = config_digest(config);
    if (seed) p["seed"] = *seed;
    else p["seed"] = nullptr;
    return p;
}

/// Fixed-point rendering with `places` decimals; "-0.0" is normalized to "0.0".
inline std::string format_fixed(double v, int places = 1) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(places) << v;
    std::string s = os.str();
    if (s.size() > 1 && s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

/// "+1.5" / "-0.3" / "+0.0"
inline std::string format_signed(double v, int places = 1) {
    std::string s = format_fixed(v, places);
    if (s[0] != '-') s.insert(s.begin(), '+');
    return s;
}

/// Writes via a sibling temp file and renames into place; the temp file is
/// removed if the writer throws, so a failed write leaves nothing behind.
inline void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& writer) {
    namespace fs = std::filesystem;
    if (path.has_parent_path() && !path.parent_path().empty()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
            writer(out);
            out.flush();
            if (!out) throw DataError("write to '" + tmp.string() + "' failed");
        }
        fs::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        fs::remove(tmp, ec);
        throw;
    }
}

inline void write_json_file(const std::filesystem::path& path, const json& doc) {
    write_atomically(path, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::size_t line_of_offset(std::string_view text, std::size_t offset) {
    if (offset > text.size()) offset = text.size();
    std::size_t line = 1;
    for (std::size_t i = 0; i < offset; ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline json parse_json_text(std::string_view text, const std::string& source) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(source + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    return parse_json_text(read_text_file(path), path.string());
}

/// Calls `fn(record, line_number)` for each non-empty line of a
/// line-delimited JSON file. A leading provenance record is handed to
/// `on_header` when given and otherwise skipped.
inline void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn,
                           const std::function<void(const json&)>& on_header = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (first_record && rec.is_object() && rec.contains(kProvenanceKey)) {
            if (on_header) on_header(rec.at(kProvenanceKey));
            first_record = false;
            continue;
        }
        first_record = false;
        fn(rec, lineno);
    }
}

/// Writes a provenance header line followed by one compact JSON record per line.
template <typename Range, typename ToJson>
void write_jsonl(const std::filesystem::path& path, const json& provenance, const Range& records, ToJson to_json) {
    write_atomically(path, [&](std::ostream& os) {
        json header;
        header[std::string(kProvenanceKey)] = provenance;
        os << header.dump() << '\n';
        for (const auto& r : records) os << to_json(r).dump() << '\n';
    });
}

/// Field accessor that turns nlohmann type errors into SchemaError with context.
template <typename T>
T require(const json& rec, const char* key, const std::string& context) {
    if (!rec.is_object() || !rec.contains(key)) throw SchemaError(context + ": missing field '" + key + "'");
    try {
        return rec.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(context + ": field '" + key + "': " + e.what());
    }
}

} // namespace spatialrel
