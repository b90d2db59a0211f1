#pragma once

// Class-imbalance utilities: inverse-frequency image oversampling, class
// weights, and the loss functions used for training, as plain numeric
// functions (no gradients).
//
// Per-pixel inputs are flat row-major spans with `channels` values per pixel.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace starseg {

/// Per-image sampling probabilities; positive and summing to 1.
struct SamplerWeights {
    std::vector<double> weights;
};

/// Weight of image i is proportional to sum_t count_i(t) / freq(t); images
/// without instances get the smallest weight among non-empty images.
/// `counts[i][t]` counts instances of class t + 1 in image i.
SamplerWeights oversampling_weights(const std::vector<std::vector<std::size_t>>& counts,
                                    const std::vector<double>& freqs);

/// n_draws i.i.d. image indices from the weight distribution.
std::vector<std::size_t> sample_epoch(const SamplerWeights& w, std::size_t n_draws, std::uint64_t seed);

/// Inverse class frequency scaled to mean 1 over the classes that occur;
/// absent classes get 0.
std::vector<double> class_weights(const std::vector<double>& freqs);

struct LossParams {
    double focal_gamma = 2.0;
    std::vector<double> focal_alpha;  // per channel; empty means 1 everywhere
    double tversky_alpha = 0.5;       // weight of false negatives
    double tversky_beta = 0.5;        // weight of false positives
    double log_eps = 1e-7;            // probabilities are clamped to [log_eps, 1] before log
    double tversky_eps = 1.0;
};

/// Mean over pixels of -alpha_t (1 - p_t)^gamma log(p_t). Throws
/// Errc::SimplexViolation if a pixel is off the simplex by more than 1e-5 or
/// the target is not one-hot.
double focal_loss(std::span<const double> p, std::span<const double> y, std::size_t channels,
                  const LossParams& params = {});

/// Mean over pixels of -sum_c y_c log(p_c).
double cce_loss(std::span<const double> p, std::span<const double> y, std::size_t channels, double eps = 1e-7);

/// Mean over elements of the binary cross-entropy.
double bce_loss(std::span<const double> p, std::span<const double> y, double eps = 1e-7);

/// Mean absolute error; with a per-pixel mask only pixels where mask != 0
/// contribute (0 if none do).
double mae_loss(std::span<const double> p, std::span<const double> y, std::size_t channels = 1,
                std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

/// 1 - (TP + eps) / (TP + alpha FN + beta FP + eps) on soft counts, averaged
/// over the foreground channels (channel 0 is background when channels > 1).
double tversky_loss(std::span<const double> p, std::span<const double> y, std::size_t channels,
                    const LossParams& params = {});

/// 1 - (2 sum(p y) + smooth) / (sum(p) + sum(y) + smooth), averaged like
/// tversky_loss.
double dice_loss(std::span<const double> p, std::span<const double> y, std::size_t channels, double smooth = 1.0);

}  // namespace starseg
