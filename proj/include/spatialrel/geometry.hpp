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
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spatialrel {

/// Axis-aligned box in pixel coordinates, (x0, y0) top-left and (x1, y1)
/// bottom-right. y grows downward.
class BBox {
public:
    BBox() = default;

    /// Throws std::invalid_argument unless 0 <= x0 <= x1 and 0 <= y0 <= y1,
    /// all finite.
    BBox(double x0, double y0, double x1, double y1) : x0_(x0), y0_(y0), x1_(x1), y1_(y1) {
        if (!is_valid(x0, y0, x1, y1)) {
            std::ostringstream os;
            os << "invalid bbox (" << x0 << ", " << y0 << ", " << x1 << ", " << y1 << ")";
            throw std::invalid_argument(os.str());
        }
    }

    static bool is_valid(double x0, double y0, double x1, double y1) noexcept {
        const bool finite = std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) && std::isfinite(y1);
        return finite && x0 >= 0.0 && y0 >= 0.0 && x1 >= x0 && y1 >= y0;
    }

    /// COCO-style (x, y, width, height).
    static BBox from_xywh(double x, double y, double w, double h) { return BBox(x, y, x + w, y + h); }

    double x0() const noexcept { return x0_; }
    double y0() const noexcept { return y0_; }
    double x1() const noexcept { return x1_; }
    double y1() const noexcept { return y1_; }

    double width() const noexcept { return x1_ - x0_; }
    double height() const noexcept { return y1_ - y0_; }
    double area() const noexcept { return width() * height(); }

    std::array<double, 4> corners() const noexcept { return {x0_, y0_, x1_, y1_}; }

    friend bool operator==(const BBox&, const BBox&) = default;

    friend std::ostream& operator<<(std::ostream& os, const BBox& b) {
        return os << "(" << b.x0_ << ", " << b.y0_ << ", " << b.x1_ << ", " << b.y1_ << ")";
    }

private:
    double x0_ = 0.0;
    double y0_ = 0.0;
    double x1_ = 0.0;
    double y1_ = 0.0;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

inline Point centroid(const BBox& b) noexcept {
    return {(b.x0() + b.x1()) / 2.0, (b.y0() + b.y1()) / 2.0};
}

inline double intersection_area(const BBox& a, const BBox& b) noexcept {
    const double w = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    const double h = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

/// Intersection over union; 0 for disjoint boxes and when both areas are 0.
inline double iou(const BBox& a, const BBox& b) noexcept {
    const double inter = intersection_area(a, b);
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0 || inter <= 0.0) return 0.0;
    return inter / uni;
}

// ---------------------------------------------------------------------------
// Relations

enum class Relation : std::uint8_t {
    left_of,
    right_of,
    above,
    below,
    overlapping,
    separated,
    surrounding,
    inside,
    taller,
    shorter,
    wider,
    narrower,
    larger,
    smaller,
};

inline constexpr std::size_t kRelationCount = 14;

inline constexpr std::array<Relation, kRelationCount> kAllRelations = {
    Relation::left_of,     Relation::right_of, Relation::above,  Relation::below,
    Relation::overlapping, Relation::separated, Relation::surrounding, Relation::inside,
    Relation::taller,      Relation::shorter,  Relation::wider,  Relation::narrower,
    Relation::larger,      Relation::smaller,
};

enum class RelationKind { projective, topological, scale };

inline constexpr std::array<std::string_view, kRelationCount> kRelationNames = {
    "left_of",   "right_of", "above",   "below",    "overlapping", "separated", "surrounding",
    "inside",    "taller",   "shorter", "wider",    "narrower",    "larger",    "smaller",
};

constexpr std::size_t index_of(Relation r) noexcept { return static_cast<std::size_t>(r); }

constexpr std::string_view to_string(Relation r) noexcept { return kRelationNames[index_of(r)]; }

inline std::ostream& operator<<(std::ostream& os, Relation r) { return os << to_string(r); }

inline std::optional<Relation> try_parse_relation(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kRelationCount; ++i)
        if (kRelationNames[i] == name) return kAllRelations[i];
    return std::nullopt;
}

inline Relation parse_relation(std::string_view name) {
    if (auto r = try_parse_relation(name)) return *r;
    throw std::invalid_argument("unknown relation '" + std::string(name) + "'");
}

constexpr RelationKind kind_of(Relation r) noexcept {
    const auto i = index_of(r);
    if (i < 4) return RelationKind::projective;
    if (i < 8) return RelationKind::topological;
    return RelationKind::scale;
}

/// Relations come in adjacent pairs, so the opposite flips the low bit.
constexpr Relation opposite(Relation r) noexcept {
    return static_cast<Relation>(index_of(r) ^ 1U);
}

struct RelationPair {
    Relation first;
    Relation second;
};

/// The seven opposite pairs, in declaration order.
inline constexpr std::array<RelationPair, 7> kOppositePairs = {{
    {Relation::left_of, Relation::right_of},
    {Relation::above, Relation::below},
    {Relation::overlapping, Relation::separated},
    {Relation::surrounding, Relation::inside},
    {Relation::taller, Relation::shorter},
    {Relation::wider, Relation::narrower},
    {Relation::larger, Relation::smaller},
}};

/// Small value-type set of relations backed by a bitmask.
class RelationSet {
public:
    constexpr RelationSet() = default;
    RelationSet(std::initializer_list<Relation> rs) {
        for (auto r : rs) insert(r);
    }

    constexpr void insert(Relation r) noexcept { bits_ |= static_cast<std::uint16_t>(1U << index_of(r)); }
    constexpr bool contains(Relation r) const noexcept { return (bits_ >> index_of(r)) & 1U; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(__builtin_popcount(bits_)); }
    constexpr std::uint16_t bits() const noexcept { return bits_; }

    /// Members in declaration order.
    std::vector<Relation> to_vector() const {
        std::vector<Relation> out;
        for (auto r : kAllRelations)
            if (contains(r)) out.push_back(r);
        return out;
    }

    friend bool operator==(const RelationSet&, const RelationSet&) = default;

    friend std::ostream& operator<<(std::ostream& os, const RelationSet& s) {
        os << "{";
        bool first = true;
        for (auto r : s.to_vector()) {
            os << (first ? "" : ", ") << r;
            first = false;
        }
        return os << "}";
    }

private:
    std::uint16_t bits_ = 0;
};

struct RelationConfig {
    /// Slack in pixels applied to the containing box for surrounding/inside.
    double containment_tolerance = 0.0;
};

namespace detail {

// inner within outer expanded by tol on all sides (closed intervals).
inline bool contained_in(const BBox& inner, const BBox& outer, double tol) noexcept {
    return outer.x0() - tol <= inner.x0() && outer.x1() + tol >= inner.x1() &&
           outer.y0() - tol <= inner.y0() && outer.y1() + tol >= inner.y1();
}

} // namespace detail

/// Whether relation r holds for subject box s and object box o.
///
/// Comparisons are strict, so ties (equal centroid coordinate, height, width
/// or area) satisfy neither relation of the pair. Containment uses closed
/// intervals; two identical boxes are a tie and neither surrounds the other.
inline bool holds(Relation r, const BBox& s, const BBox& o, const RelationConfig& cfg = {}) noexcept {
    switch (r) {
    case Relation::left_of: return s.x0() + s.x1() < o.x0() + o.x1();
    case Relation::right_of: return s.x0() + s.x1() > o.x0() + o.x1();
    case Relation::above: return s.y0() + s.y1() < o.y0() + o.y1();
    case Relation::below: return s.y0() + s.y1() > o.y0() + o.y1();
    case Relation::overlapping: return iou(s, o) > 0.0;
    case Relation::separated: return iou(s, o) == 0.0;
    case Relation::surrounding:
        return !(s == o) && detail::contained_in(o, s, cfg.containment_tolerance);
    case Relation::inside:
        return !(s == o) && detail::contained_in(s, o, cfg.containment_tolerance);
    case Relation::taller: return s.height() > o.height();
    case Relation::shorter: return s.height() < o.height();
    case Relation::wider: return s.width() > o.width();
    case Relation::narrower: return s.width() < o.width();
    case Relation::larger: return s.area() > o.area();
    case Relation::smaller: return s.area() < o.area();
    }
    return false;
}

inline RelationSet valid_relations(const BBox& s, const BBox& o, const RelationConfig& cfg = {}) noexcept {
    RelationSet out;
    for (auto r : kAllRelations)
        if (holds(r, s, o, cfg)) out.insert(r);
    return out;
}

// ---------------------------------------------------------------------------
// Relation-consistent transforms

/// Horizontal reflection inside an image of the given width.
inline BBox flip_h(const BBox& b, double image_width) {
    if (!(b.x1() <= image_width)) {
        std::ostringstream os;
        os << "bbox " << b << " exceeds image width " << image_width;
        throw std::invalid_argument(os.str());
    }
    return BBox(image_width - b.x1(), b.y0(), image_width - b.x0(), b.y1());
}

/// Clip b to window and express it relative to the window origin.
/// Empty when the clipped box has zero area.
inline std::optional<BBox> crop(const BBox& b, const BBox& window) {
    const double x0 = std::max(b.x0(), window.x0());
    const double y0 = std::max(b.y0(), window.y0());
    const double x1 = std::min(b.x1(), window.x1());
    const double y1 = std::min(b.y1(), window.y1());
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BBox(x0 - window.x0(), y0 - window.y0(), x1 - window.x0(), y1 - window.y0());
}

} // namespace spatialrel
