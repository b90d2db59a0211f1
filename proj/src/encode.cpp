#include "starseg/encode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "starseg/error.hpp"

namespace starseg {

namespace {

struct InstanceBox {
    std::int32_t id;
    std::int64_t rmin, rmax, cmin, cmax;
};

std::vector<InstanceBox> instance_boxes(const InstanceMap& map) {
    std::map<std::int32_t, std::size_t> index;
    std::vector<InstanceBox> boxes;
    for (std::size_t r = 0; r < map.rows; ++r) {
        for (std::size_t c = 0; c < map.cols; ++c) {
            const auto id = map(r, c);
            if (id <= 0) continue;
            const auto ri = static_cast<std::int64_t>(r), ci = static_cast<std::int64_t>(c);
            auto [it, fresh] = index.emplace(id, boxes.size());
            if (fresh) {
                boxes.push_back({id, ri, ri, ci, ci});
            } else {
                auto& b = boxes[it->second];
                b.rmin = std::min(b.rmin, ri);
                b.rmax = std::max(b.rmax, ri);
                b.cmin = std::min(b.cmin, ci);
                b.cmax = std::max(b.cmax, ci);
            }
        }
    }
    std::sort(boxes.begin(), boxes.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    return boxes;
}

// Exact 1D squared distance transform (lower envelope of parabolas).
void edt_1d(const double* f, std::size_t n, std::size_t stride, double* out, std::vector<std::size_t>& v,
            std::vector<double>& z) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    v.assign(n, 0);
    z.assign(n + 1, 0.0);
    std::size_t k = 0;
    std::size_t first = 0;
    while (first < n && f[first * stride] == inf) ++first;
    if (first == n) {
        for (std::size_t q = 0; q < n; ++q) out[q * stride] = inf;
        return;
    }
    v[0] = first;
    z[0] = -inf;
    z[1] = inf;
    for (std::size_t q = first + 1; q < n; ++q) {
        const double fq = f[q * stride];
        if (fq == inf) continue;
        const auto dq = static_cast<double>(q);
        auto intersect = [&] {
            const auto vk = static_cast<double>(v[k]);
            return ((fq + dq * dq) - (f[v[k] * stride] + vk * vk)) / (2.0 * dq - 2.0 * vk);
        };
        double s = intersect();
        while (s <= z[k]) {  // z[0] is -inf, so this stops at k == 0
            --k;
            s = intersect();
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (std::size_t q = 0; q < n; ++q) {
        while (z[k + 1] < static_cast<double>(q)) ++k;
        const double d = static_cast<double>(q) - static_cast<double>(v[k]);
        out[q * stride] = d * d + f[v[k] * stride];
    }
}

// Squared distances to the nearest zero of `grid` (zeros mark "outside").
void squared_edt(std::vector<double>& grid, std::size_t h, std::size_t w) {
    std::vector<double> tmp(grid.size());
    std::vector<std::size_t> v;
    std::vector<double> z;
    for (std::size_t c = 0; c < w; ++c) edt_1d(grid.data() + c, h, w, tmp.data() + c, v, z);
    for (std::size_t r = 0; r < h; ++r) edt_1d(tmp.data() + r * w, w, 1, grid.data() + r * w, v, z);
}

}  // namespace

void validate_label(const LabelImage& label, int n_classes) {
    std::set<std::int32_t> ids;
    for (auto id : label.instance_map.data) {
        if (id < 0) throw Error(Errc::InvalidLabel, "negative instance id " + std::to_string(id));
        if (id > 0) ids.insert(id);
    }
    for (auto id : ids) {
        if (!label.classes.contains(id)) {
            throw Error(Errc::InvalidLabel, "instance " + std::to_string(id) + " has no class assignment");
        }
    }
    for (const auto& [id, cls] : label.classes) {
        if (!ids.contains(id)) {
            throw Error(Errc::InvalidLabel, "class assignment for instance " + std::to_string(id) +
                                                " which is absent from the map");
        }
        if (cls < 1 || cls > n_classes) {
            throw Error(Errc::ClassOutOfRange, "instance " + std::to_string(id) + " has class " +
                                                   std::to_string(cls) + ", expected 1.." + std::to_string(n_classes));
        }
    }
}

void validate_pred(const PredTensors& pred, int n_rays, int n_classes) {
    const auto h = pred.prob.rows, w = pred.prob.cols;
    if (pred.dist.rows != h || pred.dist.cols != w || pred.classprob.rows != h || pred.classprob.cols != w) {
        throw Error(Errc::ShapeMismatch, "prob, dist and classprob disagree on H x W");
    }
    if (n_rays > 0 && pred.dist.channels != static_cast<std::size_t>(n_rays)) {
        throw Error(Errc::ShapeMismatch, "dist has " + std::to_string(pred.dist.channels) + " rays, expected " +
                                             std::to_string(n_rays));
    }
    if (n_classes > 0 && pred.classprob.channels != static_cast<std::size_t>(n_classes) + 1) {
        throw Error(Errc::ShapeMismatch, "classprob has " + std::to_string(pred.classprob.channels) +
                                             " channels, expected " + std::to_string(n_classes + 1));
    }
    if (pred.classprob.channels < 2) throw Error(Errc::ShapeMismatch, "classprob needs at least 2 channels");
}

std::vector<float> radial_distance(const LabelImage& label, Pixel pixel, const RayConfig& rays) {
    const auto& map = label.instance_map;
    if (!map.in_bounds(pixel.row, pixel.col)) throw Error(Errc::InvalidArgument, "pixel outside image");
    const auto id = map(static_cast<std::size_t>(pixel.row), static_cast<std::size_t>(pixel.col));
    if (id == 0) throw Error(Errc::BackgroundPixel, "radial distance requested on background");

    std::vector<float> out(static_cast<std::size_t>(rays.size()));
    for (int k = 0; k < rays.size(); ++k) {
        const auto& d = rays.dir(k);
        std::int64_t t = 1;
        while (true) {
            const auto td = static_cast<double>(t);
            const auto r = pixel.row + std::llround(td * d.row);
            const auto c = pixel.col + std::llround(td * d.col);
            if (!map.in_bounds(r, c) || map(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) != id) break;
            ++t;
        }
        out[k] = static_cast<float>(t);
    }
    return out;
}

Array2<float> edt_prob(const InstanceMap& map, Exec exec) {
    Array2<float> prob(map.rows, map.cols, 0.f);
    const auto boxes = instance_boxes(map);
    for_each_index(exec, boxes.size(), [&](std::size_t i) {
        const auto& b = boxes[i];
        // One-pixel ring around the box is always outside the instance.
        const auto h = static_cast<std::size_t>(b.rmax - b.rmin + 3);
        const auto w = static_cast<std::size_t>(b.cmax - b.cmin + 3);
        std::vector<double> grid(h * w, 0.0);
        for (std::size_t y = 1; y + 1 < h; ++y) {
            for (std::size_t x = 1; x + 1 < w; ++x) {
                const auto r = static_cast<std::size_t>(b.rmin) + y - 1;
                const auto c = static_cast<std::size_t>(b.cmin) + x - 1;
                if (map(r, c) == b.id) grid[y * w + x] = std::numeric_limits<double>::infinity();
            }
        }
        squared_edt(grid, h, w);
        double max_d = 0.0;
        for (std::size_t y = 1; y + 1 < h; ++y) {
            for (std::size_t x = 1; x + 1 < w; ++x) {
                const auto r = static_cast<std::size_t>(b.rmin) + y - 1;
                const auto c = static_cast<std::size_t>(b.cmin) + x - 1;
                if (map(r, c) == b.id) max_d = std::max(max_d, std::sqrt(grid[y * w + x]));
            }
        }
        // Instances own disjoint pixels, so concurrent writes never collide.
        for (std::size_t y = 1; y + 1 < h; ++y) {
            for (std::size_t x = 1; x + 1 < w; ++x) {
                const auto r = static_cast<std::size_t>(b.rmin) + y - 1;
                const auto c = static_cast<std::size_t>(b.cmin) + x - 1;
                if (map(r, c) == b.id) prob(r, c) = static_cast<float>(std::sqrt(grid[y * w + x]) / max_d);
            }
        }
    });
    return prob;
}

PredTensors encode_targets(const LabelImage& label, const RayConfig& rays, int n_classes, ProbMode mode,
                           Exec exec) {
    if (n_classes < 1) throw Error(Errc::InvalidArgument, "need at least one class");
    validate_label(label, n_classes);
    const auto& map = label.instance_map;
    const auto h = map.rows, w = map.cols;
    const auto n_rays = static_cast<std::size_t>(rays.size());

    PredTensors out;
    out.dist = Array3<float>(h, w, n_rays, 0.f);
    out.classprob = Array3<float>(h, w, static_cast<std::size_t>(n_classes) + 1, 0.f);

    for_each_index(exec, h, [&](std::size_t r) {
        for (std::size_t c = 0; c < w; ++c) {
            const auto id = map(r, c);
            if (id == 0) {
                out.classprob(r, c, 0) = 1.f;
                continue;
            }
            out.classprob(r, c, static_cast<std::size_t>(label.classes.at(id))) = 1.f;
            const auto d = radial_distance(label, {static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)}, rays);
            std::copy(d.begin(), d.end(), out.dist.pixel(r, c).begin());
        }
    });

    if (mode == ProbMode::Binary) {
        out.prob = Array2<float>(h, w, 0.f);
        for (std::size_t i = 0; i < map.data.size(); ++i) out.prob.data[i] = map.data[i] > 0 ? 1.f : 0.f;
    } else {
        out.prob = edt_prob(map, exec);
    }
    return out;
}

std::vector<std::size_t> class_counts(const ClassAssignment& classes, int n_classes) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
    for (const auto& [id, cls] : classes) {
        if (cls < 1 || cls > n_classes) {
            throw Error(Errc::ClassOutOfRange, "instance " + std::to_string(id) + " has class " + std::to_string(cls));
        }
        ++counts[static_cast<std::size_t>(cls - 1)];
    }
    return counts;
}

std::vector<double> class_frequencies(const std::vector<LabelImage>& labels, int n_classes) {
    std::vector<std::size_t> totals(static_cast<std::size_t>(n_classes), 0);
    for (const auto& l : labels) {
        const auto counts = class_counts(l.classes, n_classes);
        for (std::size_t t = 0; t < counts.size(); ++t) totals[t] += counts[t];
    }
    std::size_t all = 0;
    for (auto n : totals) all += n;
    if (all == 0) throw Error(Errc::EmptyDataset, "no instances in the label set");
    std::vector<double> freqs(totals.size());
    for (std::size_t t = 0; t < totals.size(); ++t) freqs[t] = static_cast<double>(totals[t]) / static_cast<double>(all);
    return freqs;
}

}  // namespace starseg
