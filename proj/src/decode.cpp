#include "starseg/decode.hpp"

#include <algorithm>
#include <string>

#include "starseg/error.hpp"

namespace starseg {

namespace {

// Row-major linear indices of the group's final mask inside an H x W image.
std::vector<std::size_t> group_pixels(const NmsGroup& group, std::span<const LocalMask> masks, bool refine,
                                      std::size_t height, std::size_t width) {
    const auto ih = static_cast<std::int64_t>(height), iw = static_cast<std::int64_t>(width);
    auto clipped = [&](const LocalMask& m) {
        std::vector<std::size_t> px;
        for (auto r = std::max<std::int64_t>(m.box.rmin, 0); r <= std::min(m.box.rmax, ih - 1); ++r) {
            for (auto c = std::max<std::int64_t>(m.box.cmin, 0); c <= std::min(m.box.cmax, iw - 1); ++c) {
                if (m.test(r, c)) px.push_back(static_cast<std::size_t>(r * iw + c));
            }
        }
        return px;
    };
    const LocalMask& winner = masks[group.winner];
    if (!refine || group.suppressed.empty()) return clipped(winner);

    BBox box = winner.box;
    for (auto j : group.suppressed) {
        const auto& b = masks[j].box;
        box = {std::min(box.rmin, b.rmin), std::max(box.rmax, b.rmax), std::min(box.cmin, b.cmin),
               std::max(box.cmax, b.cmax)};
    }
    box = {std::max<std::int64_t>(box.rmin, 0), std::min(box.rmax, ih - 1), std::max<std::int64_t>(box.cmin, 0),
           std::min(box.cmax, iw - 1)};
    if (box.rmin > box.rmax || box.cmin > box.cmax) return clipped(winner);

    const std::size_t voters = group.suppressed.size() + 1;
    std::vector<std::uint32_t> votes(static_cast<std::size_t>(box.height() * box.width()), 0);
    auto add = [&](const LocalMask& m) {
        for (auto r = std::max(m.box.rmin, box.rmin); r <= std::min(m.box.rmax, box.rmax); ++r) {
            for (auto c = std::max(m.box.cmin, box.cmin); c <= std::min(m.box.cmax, box.cmax); ++c) {
                if (m.test(r, c)) ++votes[static_cast<std::size_t>((r - box.rmin) * box.width() + (c - box.cmin))];
            }
        }
    };
    add(winner);
    for (auto j : group.suppressed) add(masks[j]);

    std::vector<std::size_t> px;
    for (auto r = box.rmin; r <= box.rmax; ++r) {
        for (auto c = box.cmin; c <= box.cmax; ++c) {
            if (2 * votes[static_cast<std::size_t>((r - box.rmin) * box.width() + (c - box.cmin))] > voters) {
                px.push_back(static_cast<std::size_t>(r * iw + c));
            }
        }
    }
    if (px.empty()) return clipped(winner);
    return px;
}

ClassVote vote(std::span<const std::size_t> pixels, const Array3<float>& classprob) {
    if (pixels.empty()) throw Error(Errc::EmptyMask, "cannot classify an empty mask");
    const std::size_t channels = classprob.channels;
    std::vector<double> sum(channels, 0.0);
    for (auto p : pixels) {
        const float* v = classprob.data.data() + p * channels;
        for (std::size_t k = 0; k < channels; ++k) sum[k] += v[k];
    }
    std::size_t best = 1;
    for (std::size_t k = 2; k < channels; ++k) {
        if (sum[k] > sum[best]) best = k;
    }
    return {static_cast<int>(best), sum[best] / static_cast<double>(pixels.size())};
}

}  // namespace

void DecodeConfig::validate() const {
    if (!(prob_thresh > 0.0 && prob_thresh < 1.0)) {
        throw Error(Errc::InvalidArgument, "prob_thresh must lie in (0, 1), got " + std::to_string(prob_thresh));
    }
    if (!(nms_thresh > 0.0 && nms_thresh < 1.0)) {
        throw Error(Errc::InvalidArgument, "nms_thresh must lie in (0, 1), got " + std::to_string(nms_thresh));
    }
    if (max_candidates && *max_candidates == 0) throw Error(Errc::InvalidArgument, "max_candidates must be positive");
}

std::vector<PolygonCandidate> extract_candidates(const PredTensors& pred, const DecodeConfig& cfg,
                                                 const RayConfig& rays) {
    validate_pred(pred, rays.size());
    std::vector<PolygonCandidate> out;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const float p = pred.prob(r, c);
            if (!(static_cast<double>(p) > cfg.prob_thresh)) continue;
            const auto d = pred.dist.pixel(r, c);
            PolygonCandidate cand;
            cand.center = {static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)};
            cand.radii.assign(d.begin(), d.end());
            for (auto& x : cand.radii) x = std::max(x, 0.f);
            cand.score = p;
            out.push_back(std::move(cand));
        }
    }
    // Pixels were visited row-major, so a stable sort keeps (row, col) order on ties.
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    if (cfg.max_candidates && out.size() > *cfg.max_candidates) out.resize(*cfg.max_candidates);
    return out;
}

std::vector<NmsGroup> nms(std::span<const PolygonCandidate> cands, std::span<const LocalMask> masks,
                          double nms_thresh) {
    const std::size_t n = cands.size();
    std::vector<char> taken(n, 0);
    std::vector<NmsGroup> groups;
    for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        taken[i] = 1;
        NmsGroup g{i, {}};
        const auto& wm = masks[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (taken[j] || !wm.box.intersects(masks[j].box)) continue;
            if (mask_iou(wm, masks[j]) > nms_thresh) {
                taken[j] = 1;
                g.suppressed.push_back(j);
            }
        }
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<NmsGroup> nms(std::span<const PolygonCandidate> cands, const DecodeConfig& cfg, const RayConfig& rays,
                          Exec exec) {
    const auto masks = rasterize_all(cands, rays, exec);
    return nms(cands, masks, cfg.nms_thresh);
}

Mask refine_shape(const NmsGroup& group, std::span<const PolygonCandidate> cands, const RayConfig& rays,
                  std::size_t height, std::size_t width) {
    // Rasterize only the members, placed at their original indices.
    std::vector<LocalMask> masks(cands.size());
    masks[group.winner] = rasterize_local(cands[group.winner], rays);
    for (auto j : group.suppressed) masks[j] = rasterize_local(cands[j], rays);
    Mask out(height, width, 0);
    for (auto p : group_pixels(group, masks, true, height, width)) out.data[p] = 1;
    return out;
}

ClassVote classify_instance(const Mask& mask, const Array3<float>& classprob) {
    if (mask.rows != classprob.rows || mask.cols != classprob.cols) {
        throw Error(Errc::ShapeMismatch, "mask and classprob disagree on H x W");
    }
    std::vector<std::size_t> px;
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
        if (mask.data[i]) px.push_back(i);
    }
    return vote(px, classprob);
}

InstanceSet decode(const PredTensors& pred, const DecodeConfig& cfg, const RayConfig& rays, Exec exec) {
    cfg.validate();
    validate_pred(pred, rays.size());
    const auto h = pred.rows(), w = pred.cols();

    const auto cands = extract_candidates(pred, cfg, rays);
    const auto masks = rasterize_all(cands, rays, exec);
    const auto groups = nms(cands, masks, cfg.nms_thresh);

    std::vector<std::vector<std::size_t>> shapes(groups.size());
    for_each_index(exec, groups.size(),
                   [&](std::size_t g) { shapes[g] = group_pixels(groups[g], masks, cfg.refine, h, w); });

    // Groups arrive in descending winner score; earlier instances keep their pixels.
    InstanceSet out;
    out.instance_map = InstanceMap(h, w, 0);
    std::vector<std::vector<std::size_t>> owned;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<std::size_t> mine;
        const auto id = static_cast<std::int32_t>(owned.size() + 1);
        for (auto p : shapes[g]) {
            if (out.instance_map.data[p] == 0) {
                out.instance_map.data[p] = id;
                mine.push_back(p);
            }
        }
        if (mine.empty()) continue;
        owned.push_back(std::move(mine));
        out.scores.push_back(cands[groups[g].winner].score);
    }

    std::vector<ClassVote> votes(owned.size());
    for_each_index(exec, owned.size(), [&](std::size_t i) { votes[i] = vote(owned[i], pred.classprob); });
    out.confidences.resize(owned.size());
    for (std::size_t i = 0; i < owned.size(); ++i) {
        out.classes[static_cast<std::int32_t>(i + 1)] = votes[i].label;
        out.confidences[i] = votes[i].confidence;
    }
    return out;
}

}  // namespace starseg
