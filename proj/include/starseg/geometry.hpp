#pragma once

// Star-convex polygon primitives.
//
// Ray k points at angle 2*pi*k/R measured from the +col axis towards the
// +row axis; its unit direction in (row, col) is (sin, cos). Integer
// coordinates are pixel centers.

#include <cstdint>
#include <span>
#include <vector>

#include "starseg/array.hpp"
#include "starseg/parallel.hpp"

namespace starseg {

struct Direction {
    double row;
    double col;
    friend bool operator==(const Direction&, const Direction&) = default;
};

/// Fixed equiangular ray fan. When R is divisible by 4 the table is built
/// from one octant by exact sign flips and swaps, so quarter turns and flips
/// map ray directions onto each other bit-for-bit.
class RayConfig {
public:
    explicit RayConfig(int n_rays = 64);

    int size() const { return static_cast<int>(dirs_.size()); }
    const Direction& dir(int k) const { return dirs_[static_cast<std::size_t>(k)]; }
    std::span<const Direction> dirs() const { return dirs_; }

private:
    std::vector<Direction> dirs_;
};

struct Pixel {
    std::int64_t row = 0;
    std::int64_t col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct PolygonCandidate {
    Pixel center;
    std::vector<float> radii;
    float score = 0.f;
};

struct Point {
    double row;
    double col;
};

/// Inclusive integer bounds.
struct BBox {
    std::int64_t rmin, rmax, cmin, cmax;
    bool intersects(const BBox& o) const {
        return rmin <= o.rmax && o.rmin <= rmax && cmin <= o.cmax && o.cmin <= cmax;
    }
    std::int64_t height() const { return rmax - rmin + 1; }
    std::int64_t width() const { return cmax - cmin + 1; }
    friend bool operator==(const BBox&, const BBox&) = default;
};

/// A rasterized polygon stored over its own bounding box (which may extend
/// past any image).
struct LocalMask {
    BBox box{0, -1, 0, -1};
    std::vector<std::uint8_t> bits;
    std::size_t area = 0;

    bool test(std::int64_t r, std::int64_t c) const {
        if (r < box.rmin || r > box.rmax || c < box.cmin || c > box.cmax) return false;
        return bits[static_cast<std::size_t>((r - box.rmin) * box.width() + (c - box.cmin))] != 0;
    }
};

/// Tolerance for "point lies on the polygon boundary"; boundary counts as inside.
inline constexpr double kBoundaryEps = 1e-9;

std::vector<Point> polygon_vertices(const PolygonCandidate& c, const RayConfig& rays);

BBox bbox(const PolygonCandidate& c, const RayConfig& rays);

/// Closed even-odd rasterization at pixel centers, unclipped. A candidate
/// with all radii zero owns exactly its center pixel.
LocalMask rasterize_local(const PolygonCandidate& c, const RayConfig& rays);

/// rasterize_local clipped to an H x W image.
Mask rasterize_polygon(const PolygonCandidate& c, const RayConfig& rays, std::size_t height, std::size_t width);

/// IoU of two rasterized masks; 0 when the union is empty.
double mask_iou(const LocalMask& a, const LocalMask& b);

/// Rasterized IoU; disjoint bounding boxes return 0 without rasterizing.
double polygon_iou(const PolygonCandidate& a, const PolygonCandidate& b, const RayConfig& rays);

/// Rasterizes every candidate; the parallel and serial paths are identical.
std::vector<LocalMask> rasterize_all(std::span<const PolygonCandidate> cands, const RayConfig& rays,
                                     Exec exec = Exec::Parallel);

}  // namespace starseg
