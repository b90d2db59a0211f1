#include "starseg/tta.hpp"

#include <numeric>

#include "starseg/rng.hpp"

namespace starseg {

std::array<D4Element, 8> D4Element::all() {
    std::array<D4Element, 8> out;
    for (int i = 0; i < 8; ++i) out[i] = from_index(i);
    return out;
}

std::string D4Element::tag() const { return "r" + std::to_string(rotation) + (flip ? "f" : ""); }

D4Element D4Element::parse(const std::string& tag) {
    if (tag == "identity") return {};
    const bool ok = (tag.size() == 2 || (tag.size() == 3 && tag[2] == 'f')) && tag[0] == 'r' && tag[1] >= '0' &&
                    tag[1] <= '3';
    if (!ok) throw Error(Errc::InvalidArgument, "bad D4 tag '" + tag + "', expected r0..r3 with optional f");
    return {tag[1] - '0', tag.size() == 3};
}

std::array<std::int64_t, 2> apply_to_offset(D4Element g, std::int64_t drow, std::int64_t dcol) {
    for (int i = 0; i < g.rotation; ++i) {
        const auto r = -dcol;
        dcol = drow;
        drow = r;
    }
    if (g.flip) dcol = -dcol;
    return {drow, dcol};
}

std::array<std::int64_t, 2> apply_to_pixel(D4Element g, std::size_t height, std::size_t width, std::int64_t r,
                                           std::int64_t c) {
    auto h = static_cast<std::int64_t>(height), w = static_cast<std::int64_t>(width);
    for (int i = 0; i < g.rotation; ++i) {
        const auto nr = w - 1 - c;
        c = r;
        r = nr;
        std::swap(h, w);
    }
    if (g.flip) c = w - 1 - c;
    return {r, c};
}

D4Element compose(D4Element g, D4Element h) {
    const auto a = apply_to_offset(g, apply_to_offset(h, 1, 0)[0], apply_to_offset(h, 1, 0)[1]);
    const auto b = apply_to_offset(g, apply_to_offset(h, 0, 1)[0], apply_to_offset(h, 0, 1)[1]);
    for (auto e : D4Element::all()) {
        if (apply_to_offset(e, 1, 0) == a && apply_to_offset(e, 0, 1) == b) return e;
    }
    throw Error(Errc::InvalidArgument, "D4 composition is not closed");  // unreachable
}

D4Element inverse(D4Element g) {
    for (auto e : D4Element::all()) {
        if (compose(e, g) == D4Element{}) return e;
    }
    throw Error(Errc::InvalidArgument, "D4 element has no inverse");  // unreachable
}

std::vector<int> radial_permutation(D4Element g, int n_rays) {
    if (n_rays % 4 != 0) {
        throw Error(Errc::RaysNotDivisibleBy4, std::to_string(n_rays) + " rays cannot follow quarter turns");
    }
    std::vector<int> sigma(static_cast<std::size_t>(n_rays));
    for (int k = 0; k < n_rays; ++k) {
        int j = k - g.rotation * (n_rays / 4);  // a counter-clockwise quarter turn lowers the angle by 90 degrees
        if (g.flip) j = n_rays / 2 - j;
        sigma[k] = ((j % n_rays) + n_rays) % n_rays;
    }
    return sigma;
}

LabelImage transform(const LabelImage& label, D4Element g) { return {transform(label.instance_map, g), label.classes}; }

PredTensors transform_pred(const PredTensors& pred, D4Element g, const RayConfig& rays) {
    validate_pred(pred, rays.size());
    const auto sigma = radial_permutation(g, rays.size());
    PredTensors out;
    out.prob = transform(pred.prob, g);
    out.classprob = transform(pred.classprob, g);
    const auto spatial = transform(pred.dist, g);
    out.dist = Array3<float>(spatial.rows, spatial.cols, spatial.channels);
    const std::size_t n = spatial.channels;
    for (std::size_t p = 0; p < spatial.rows * spatial.cols; ++p) {
        const float* src = spatial.data.data() + p * n;
        float* dst = out.dist.data.data() + p * n;
        for (std::size_t k = 0; k < n; ++k) dst[sigma[k]] = src[k];
    }
    return out;
}

PredTensors merge_predictions(std::span<const PredTensors> preds) {
    if (preds.empty()) throw Error(Errc::EmptyList, "nothing to merge");
    const auto& first = preds.front();
    validate_pred(first);
    for (const auto& p : preds) {
        validate_pred(p);
        if (p.prob.rows != first.prob.rows || p.prob.cols != first.prob.cols ||
            p.dist.channels != first.dist.channels || p.classprob.channels != first.classprob.channels) {
            throw Error(Errc::ShapeMismatch, "predictions to merge differ in H, W, R or T");
        }
    }
    const auto n = static_cast<double>(preds.size());
    auto mean = [&](auto member) {
        const auto& ref = first.*member;
        auto out = ref;
        for (std::size_t i = 0; i < ref.data.size(); ++i) {
            double s = 0.0;
            for (const auto& p : preds) s += (p.*member).data[i];
            out.data[i] = static_cast<float>(s / n);
        }
        return out;
    };
    PredTensors out;
    out.prob = mean(&PredTensors::prob);
    out.dist = mean(&PredTensors::dist);
    out.classprob = mean(&PredTensors::classprob);
    return out;
}

std::vector<std::vector<D4Element>> sample_augmentations(std::size_t n_models, std::optional<int> augs_per_model,
                                                         std::uint64_t seed) {
    if (augs_per_model && (*augs_per_model < 1 || *augs_per_model > 8)) {
        throw Error(Errc::InvalidArgument, "augs_per_model must lie in 1..8");
    }
    Rng rng(seed);
    std::vector<std::vector<D4Element>> plan(n_models);
    for (auto& elems : plan) {
        std::array<int, 8> idx;
        std::iota(idx.begin(), idx.end(), 0);
        const int take = augs_per_model.value_or(8);
        if (augs_per_model) {
            // Partial Fisher-Yates: the first `take` slots are a uniform sample.
            for (int i = 0; i < take; ++i) {
                const auto j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(8 - i)));
                std::swap(idx[i], idx[j]);
            }
        }
        std::sort(idx.begin(), idx.begin() + take);
        for (int i = 0; i < take; ++i) elems.push_back(D4Element::from_index(idx[i]));
    }
    return plan;
}

}  // namespace starseg
