#pragma once

// The dihedral group D4 acting on images and prediction tensors, and the
// element-wise merging used for test-time augmentation and model ensembles.

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "starseg/array.hpp"
#include "starseg/encode.hpp"
#include "starseg/error.hpp"
#include "starseg/geometry.hpp"
#include "starseg/parallel.hpp"

namespace starseg {

/// `rotation` counter-clockwise quarter turns (numpy rot90 convention),
/// followed by a left-right flip when `flip` is set.
struct D4Element {
    int rotation = 0;
    bool flip = false;

    /// 0..7, rotation + 4 * flip.
    int index() const { return rotation + (flip ? 4 : 0); }
    static D4Element from_index(int i) { return {i % 4, i >= 4}; }
    static std::array<D4Element, 8> all();

    /// Tag like "r0", "r3f".
    std::string tag() const;
    /// Accepts tags produced by tag() and "identity"; throws Errc::InvalidArgument.
    static D4Element parse(const std::string& tag);

    friend bool operator==(const D4Element&, const D4Element&) = default;
};

/// Apply h first, then g.
D4Element compose(D4Element g, D4Element h);
D4Element inverse(D4Element g);

/// Signed-permutation action of g on a displacement (drow, dcol).
std::array<std::int64_t, 2> apply_to_offset(D4Element g, std::int64_t drow, std::int64_t dcol);

/// Where pixel (r, c) of an H x W image lands after g.
std::array<std::int64_t, 2> apply_to_pixel(D4Element g, std::size_t height, std::size_t width, std::int64_t r,
                                           std::int64_t c);

/// sigma[k] is the ray that ray k becomes under g. Throws
/// Errc::RaysNotDivisibleBy4.
std::vector<int> radial_permutation(D4Element g, int n_rays);

template <typename T>
Array2<T> transform(const Array2<T>& a, D4Element g) {
    const bool swap = g.rotation % 2 == 1;
    Array2<T> out(swap ? a.cols : a.rows, swap ? a.rows : a.cols);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) {
            const auto [nr, nc] = apply_to_pixel(g, a.rows, a.cols, static_cast<std::int64_t>(r),
                                                 static_cast<std::int64_t>(c));
            out(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)) = a(r, c);
        }
    }
    return out;
}

/// Spatial transform only; channels are carried along unchanged.
template <typename T>
Array3<T> transform(const Array3<T>& a, D4Element g) {
    const bool swap = g.rotation % 2 == 1;
    Array3<T> out(swap ? a.cols : a.rows, swap ? a.rows : a.cols, a.channels);
    for (std::size_t r = 0; r < a.rows; ++r) {
        for (std::size_t c = 0; c < a.cols; ++c) {
            const auto [nr, nc] = apply_to_pixel(g, a.rows, a.cols, static_cast<std::int64_t>(r),
                                                 static_cast<std::int64_t>(c));
            const auto src = a.pixel(r, c);
            std::copy(src.begin(), src.end(), out.pixel(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)).begin());
        }
    }
    return out;
}

LabelImage transform(const LabelImage& label, D4Element g);

/// prob and classprob move spatially; dist moves spatially and has its ray
/// channels permuted by radial_permutation(g).
PredTensors transform_pred(const PredTensors& pred, D4Element g, const RayConfig& rays);

/// Element-wise arithmetic mean. Throws Errc::EmptyList / Errc::ShapeMismatch.
PredTensors merge_predictions(std::span<const PredTensors> preds);

/// Runs pred_fn on every g-transformed copy of `input`, maps each result back
/// with inverse(g) and merges. The subset is processed in canonical element
/// order, so the result does not depend on the order it was listed in.
template <typename Input, typename PredFn>
PredTensors tta_predict(const Input& input, PredFn&& pred_fn, const RayConfig& rays,
                        std::optional<std::vector<D4Element>> subset = std::nullopt, Exec exec = Exec::Serial) {
    std::vector<D4Element> elems;
    if (subset) {
        if (subset->empty()) throw Error(Errc::EmptyList, "TTA subset is empty");
        elems = *subset;
    } else {
        const auto a = D4Element::all();
        elems.assign(a.begin(), a.end());
    }
    std::sort(elems.begin(), elems.end(), [](auto x, auto y) { return x.index() < y.index(); });
    if (rays.size() % 4 != 0) throw Error(Errc::RaysNotDivisibleBy4, "TTA needs R divisible by 4");

    std::vector<PredTensors> results(elems.size());
    for_each_index(exec, elems.size(), [&](std::size_t i) {
        const PredTensors p = pred_fn(transform(input, elems[i]));
        results[i] = transform_pred(p, inverse(elems[i]), rays);
    });
    return merge_predictions(results);
}

/// The draws ensemble_predict makes: one sorted element list per model.
std::vector<std::vector<D4Element>> sample_augmentations(std::size_t n_models, std::optional<int> augs_per_model,
                                                         std::uint64_t seed);

/// Per model, draws `augs_per_model` distinct elements from one seeded
/// stream (models in order), or uses all 8 when unset; then merges the whole
/// collection once.
template <typename Input>
PredTensors ensemble_predict(const std::vector<std::function<PredTensors(const Input&)>>& pred_fns,
                             const Input& input, std::optional<int> augs_per_model, std::uint64_t seed,
                             const RayConfig& rays, Exec exec = Exec::Serial) {
    if (pred_fns.empty()) throw Error(Errc::EmptyList, "ensemble has no models");
    if (rays.size() % 4 != 0) throw Error(Errc::RaysNotDivisibleBy4, "TTA needs R divisible by 4");
    const auto plan = sample_augmentations(pred_fns.size(), augs_per_model, seed);

    struct Job {
        std::size_t model;
        D4Element g;
    };
    std::vector<Job> jobs;
    for (std::size_t m = 0; m < plan.size(); ++m) {
        for (auto g : plan[m]) jobs.push_back({m, g});
    }
    std::vector<PredTensors> results(jobs.size());
    for_each_index(exec, jobs.size(), [&](std::size_t i) {
        const PredTensors p = pred_fns[jobs[i].model](transform(input, jobs[i].g));
        results[i] = transform_pred(p, inverse(jobs[i].g), rays);
    });
    return merge_predictions(results);
}

}  // namespace starseg
