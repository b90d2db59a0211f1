#include "starseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "starseg/error.hpp"

namespace starseg {

namespace {

std::vector<Direction> symmetric_table(int n) {
    const int q = n / 4;
    std::vector<Direction> base(static_cast<std::size_t>(q));
    for (int k = 0; k < q; ++k) {
        if (2 * k < q) {
            const double theta = 2.0 * std::numbers::pi * k / n;
            base[k] = {std::sin(theta), std::cos(theta)};
        } else if (2 * k == q) {
            const double h = std::sqrt(0.5);
            base[k] = {h, h};
        }
    }
    for (int k = 0; k < q; ++k) {
        if (2 * k > q) {
            const auto& m = base[q - k];
            base[k] = {m.col, m.row};
        }
    }
    std::vector<Direction> dirs(static_cast<std::size_t>(n));
    for (int k = 0; k < q; ++k) {
        Direction d = base[k];
        for (int quarter = 0; quarter < 4; ++quarter) {
            dirs[k + quarter * q] = d;
            d = {d.col, -d.row};  // +90 degrees
        }
    }
    return dirs;
}

double segment_dist2(double pr, double pc, const Point& a, const Point& b) {
    const double dr = b.row - a.row;
    const double dc = b.col - a.col;
    const double len2 = dr * dr + dc * dc;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((pr - a.row) * dr + (pc - a.col) * dc) / len2, 0.0, 1.0);
    const double er = pr - (a.row + t * dr);
    const double ec = pc - (a.col + t * dc);
    return er * er + ec * ec;
}

}  // namespace

RayConfig::RayConfig(int n_rays) {
    if (n_rays < 3) throw Error(Errc::InvalidArgument, "need at least 3 rays, got " + std::to_string(n_rays));
    if (n_rays % 4 == 0) {
        dirs_ = symmetric_table(n_rays);
        return;
    }
    dirs_.resize(static_cast<std::size_t>(n_rays));
    for (int k = 0; k < n_rays; ++k) {
        const double theta = 2.0 * std::numbers::pi * k / n_rays;
        dirs_[k] = {std::sin(theta), std::cos(theta)};
    }
}

std::vector<Point> polygon_vertices(const PolygonCandidate& c, const RayConfig& rays) {
    std::vector<Point> v(static_cast<std::size_t>(rays.size()));
    const auto r0 = static_cast<double>(c.center.row);
    const auto c0 = static_cast<double>(c.center.col);
    for (int k = 0; k < rays.size(); ++k) {
        const double d = c.radii[k];
        v[k] = {r0 + d * rays.dir(k).row, c0 + d * rays.dir(k).col};
    }
    return v;
}

BBox bbox(const PolygonCandidate& c, const RayConfig& rays) {
    const auto v = polygon_vertices(c, rays);
    double rmin = static_cast<double>(c.center.row), rmax = rmin;
    double cmin = static_cast<double>(c.center.col), cmax = cmin;
    for (const auto& p : v) {
        rmin = std::min(rmin, p.row);
        rmax = std::max(rmax, p.row);
        cmin = std::min(cmin, p.col);
        cmax = std::max(cmax, p.col);
    }
    return {static_cast<std::int64_t>(std::floor(rmin)), static_cast<std::int64_t>(std::ceil(rmax)),
            static_cast<std::int64_t>(std::floor(cmin)), static_cast<std::int64_t>(std::ceil(cmax))};
}

LocalMask rasterize_local(const PolygonCandidate& c, const RayConfig& rays) {
    LocalMask m;
    m.box = bbox(c, rays);
    const std::int64_t h = m.box.height();
    const std::int64_t w = m.box.width();
    m.bits.assign(static_cast<std::size_t>(h * w), 0);
    auto set = [&](std::int64_t r, std::int64_t col) {
        if (col < m.box.cmin || col > m.box.cmax) return;
        m.bits[static_cast<std::size_t>((r - m.box.rmin) * w + (col - m.box.cmin))] = 1;
    };

    const bool degenerate = std::all_of(c.radii.begin(), c.radii.end(), [](float r) { return r <= 0.f; });
    if (!degenerate) {
        const auto v = polygon_vertices(c, rays);
        const std::size_t n = v.size();
        std::vector<double> xs;
        xs.reserve(n);
        for (std::int64_t r = m.box.rmin; r <= m.box.rmax; ++r) {
            const auto y = static_cast<double>(r);

            // Interior: pixels with an odd number of crossings strictly to their right.
            xs.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const Point& a = v[i];
                const Point& b = v[(i + 1) % n];
                if ((a.row > y) != (b.row > y)) {
                    xs.push_back(a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row));
                }
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
                const auto from = static_cast<std::int64_t>(std::ceil(xs[i]));
                const auto to = static_cast<std::int64_t>(std::ceil(xs[i + 1])) - 1;
                for (std::int64_t col = std::max(from, m.box.cmin); col <= std::min(to, m.box.cmax); ++col) {
                    set(r, col);
                }
            }

            // Boundary: pixel centers within kBoundaryEps of an edge.
            for (std::size_t i = 0; i < n; ++i) {
                const Point& a = v[i];
                const Point& b = v[(i + 1) % n];
                const double lo = std::min(a.row, b.row);
                const double hi = std::max(a.row, b.row);
                if (y < lo - kBoundaryEps || y > hi + kBoundaryEps) continue;
                std::int64_t first, last;
                const double dr = b.row - a.row;
                if (std::abs(dr) <= 1e-3) {
                    first = static_cast<std::int64_t>(std::ceil(std::min(a.col, b.col) - kBoundaryEps));
                    last = static_cast<std::int64_t>(std::floor(std::max(a.col, b.col) + kBoundaryEps));
                } else {
                    const double x = a.col + (y - a.row) * (b.col - a.col) / dr;
                    first = static_cast<std::int64_t>(std::llround(x)) - 1;
                    last = first + 2;
                }
                for (std::int64_t col = first; col <= last; ++col) {
                    if (segment_dist2(y, static_cast<double>(col), a, b) <= kBoundaryEps * kBoundaryEps) {
                        set(r, col);
                    }
                }
            }
        }
    }
    set(c.center.row, c.center.col);
    m.area = static_cast<std::size_t>(std::count(m.bits.begin(), m.bits.end(), std::uint8_t{1}));
    return m;
}

Mask rasterize_polygon(const PolygonCandidate& c, const RayConfig& rays, std::size_t height, std::size_t width) {
    Mask out(height, width, 0);
    const auto local = rasterize_local(c, rays);
    const auto rlo = std::max<std::int64_t>(local.box.rmin, 0);
    const auto rhi = std::min<std::int64_t>(local.box.rmax, static_cast<std::int64_t>(height) - 1);
    const auto clo = std::max<std::int64_t>(local.box.cmin, 0);
    const auto chi = std::min<std::int64_t>(local.box.cmax, static_cast<std::int64_t>(width) - 1);
    for (auto r = rlo; r <= rhi; ++r) {
        for (auto col = clo; col <= chi; ++col) {
            if (local.test(r, col)) out(static_cast<std::size_t>(r), static_cast<std::size_t>(col)) = 1;
        }
    }
    return out;
}

double mask_iou(const LocalMask& a, const LocalMask& b) {
    std::size_t inter = 0;
    if (a.box.intersects(b.box)) {
        const auto rlo = std::max(a.box.rmin, b.box.rmin), rhi = std::min(a.box.rmax, b.box.rmax);
        const auto clo = std::max(a.box.cmin, b.box.cmin), chi = std::min(a.box.cmax, b.box.cmax);
        for (auto r = rlo; r <= rhi; ++r) {
            const std::uint8_t* pa = a.bits.data() + (r - a.box.rmin) * a.box.width() + (clo - a.box.cmin);
            const std::uint8_t* pb = b.bits.data() + (r - b.box.rmin) * b.box.width() + (clo - b.box.cmin);
            for (std::int64_t i = 0; i <= chi - clo; ++i) inter += static_cast<std::size_t>(pa[i] & pb[i]);
        }
    }
    const std::size_t uni = a.area + b.area - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double polygon_iou(const PolygonCandidate& a, const PolygonCandidate& b, const RayConfig& rays) {
    if (!bbox(a, rays).intersects(bbox(b, rays))) return 0.0;
    return mask_iou(rasterize_local(a, rays), rasterize_local(b, rays));
}

std::vector<LocalMask> rasterize_all(std::span<const PolygonCandidate> cands, const RayConfig& rays, Exec exec) {
    std::vector<LocalMask> out(cands.size());
    for_each_index(exec, cands.size(), [&](std::size_t i) { out[i] = rasterize_local(cands[i], rays); });
    return out;
}

}  // namespace starseg
