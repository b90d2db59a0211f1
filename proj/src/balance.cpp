#include "starseg/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "starseg/error.hpp"
#include "starseg/rng.hpp"

namespace starseg {

namespace {

std::size_t pixel_count(std::span<const double> p, std::span<const double> y, std::size_t channels) {
    if (channels == 0) throw Error(Errc::ShapeMismatch, "zero channels");
    if (p.size() != y.size() || p.size() % channels != 0) {
        throw Error(Errc::ShapeMismatch, "prediction has " + std::to_string(p.size()) + " values, target " +
                                             std::to_string(y.size()) + ", channels " + std::to_string(channels));
    }
    if (p.empty()) throw Error(Errc::ShapeMismatch, "empty input");
    return p.size() / channels;
}

std::size_t first_foreground(std::size_t channels) { return channels > 1 ? 1 : 0; }

}  // namespace

SamplerWeights oversampling_weights(const std::vector<std::vector<std::size_t>>& counts,
                                    const std::vector<double>& freqs) {
    if (counts.empty()) throw Error(Errc::EmptyDataset, "no images");
    SamplerWeights w;
    w.weights.resize(counts.size(), 0.0);
    double min_positive = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i].size() != freqs.size()) {
            throw Error(Errc::ShapeMismatch, "image " + std::to_string(i) + " has " + std::to_string(counts[i].size()) +
                                                 " class counts, expected " + std::to_string(freqs.size()));
        }
        double s = 0.0;
        for (std::size_t t = 0; t < freqs.size(); ++t) {
            if (counts[i][t] == 0) continue;
            if (!(freqs[t] > 0.0)) {
                throw Error(Errc::InvalidArgument, "class " + std::to_string(t + 1) + " occurs but has frequency 0");
            }
            s += static_cast<double>(counts[i][t]) / freqs[t];
        }
        w.weights[i] = s;
        if (s > 0.0) min_positive = std::min(min_positive, s);
    }
    if (!std::isfinite(min_positive)) throw Error(Errc::EmptyDataset, "no image contains an instance");
    double total = 0.0;
    for (auto& x : w.weights) {
        if (x == 0.0) x = min_positive;
        total += x;
    }
    for (auto& x : w.weights) x /= total;
    return w;
}

std::vector<std::size_t> sample_epoch(const SamplerWeights& w, std::size_t n_draws, std::uint64_t seed) {
    if (w.weights.empty()) throw Error(Errc::EmptyDataset, "no weights");
    if (n_draws == 0) throw Error(Errc::InvalidArgument, "n_draws must be at least 1");
    std::vector<double> cdf(w.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < cdf.size(); ++i) {
        acc += w.weights[i];
        cdf[i] = acc;
    }
    Rng rng(seed);
    std::vector<std::size_t> out(n_draws);
    for (auto& idx : out) {
        const double u = rng.unit() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    }
    return out;
}

std::vector<double> class_weights(const std::vector<double>& freqs) {
    std::vector<double> w(freqs.size(), 0.0);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t t = 0; t < freqs.size(); ++t) {
        if (freqs[t] > 0.0) {
            w[t] = 1.0 / freqs[t];
            sum += w[t];
            ++present;
        }
    }
    if (present == 0) throw Error(Errc::EmptyDataset, "all class frequencies are zero");
    for (auto& x : w) x *= static_cast<double>(present) / sum;
    return w;
}

double focal_loss(std::span<const double> p, std::span<const double> y, std::size_t channels,
                  const LossParams& params) {
    const std::size_t n = pixel_count(p, y, channels);
    if (!params.focal_alpha.empty() && params.focal_alpha.size() != channels) {
        throw Error(Errc::ShapeMismatch, "focal_alpha needs one weight per channel");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* pi = p.data() + i * channels;
        const double* yi = y.data() + i * channels;
        double sum = 0.0;
        std::size_t target = channels, ones = 0;
        for (std::size_t c = 0; c < channels; ++c) {
            sum += pi[c];
            if (yi[c] == 1.0) {
                target = c;
                ++ones;
            } else if (yi[c] != 0.0) {
                throw Error(Errc::SimplexViolation, "target of pixel " + std::to_string(i) + " is not one-hot");
            }
        }
        if (ones != 1) throw Error(Errc::SimplexViolation, "target of pixel " + std::to_string(i) + " is not one-hot");
        if (std::abs(sum - 1.0) > 1e-5) {
            throw Error(Errc::SimplexViolation, "prediction of pixel " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        const double pt = std::clamp(pi[target], params.log_eps, 1.0);
        const double alpha = params.focal_alpha.empty() ? 1.0 : params.focal_alpha[target];
        total += -alpha * std::pow(1.0 - pt, params.focal_gamma) * std::log(pt);
    }
    return total / static_cast<double>(n);
}

double cce_loss(std::span<const double> p, std::span<const double> y, std::size_t channels, double eps) {
    const std::size_t n = pixel_count(p, y, channels);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (y[i] != 0.0) total -= y[i] * std::log(std::clamp(p[i], eps, 1.0));
    }
    return total / static_cast<double>(n);
}

double bce_loss(std::span<const double> p, std::span<const double> y, double eps) {
    pixel_count(p, y, 1);
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], eps, 1.0 - eps);
        total -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
    }
    return total / static_cast<double>(p.size());
}

double mae_loss(std::span<const double> p, std::span<const double> y, std::size_t channels,
                std::optional<std::span<const std::uint8_t>> mask) {
    const std::size_t n = pixel_count(p, y, channels);
    if (mask && mask->size() != n) throw Error(Errc::ShapeMismatch, "mask needs one entry per pixel");
    double total = 0.0;
    std::size_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask && (*mask)[i] == 0) continue;
        for (std::size_t c = 0; c < channels; ++c) total += std::abs(p[i * channels + c] - y[i * channels + c]);
        used += channels;
    }
    return used ? total / static_cast<double>(used) : 0.0;
}

double tversky_loss(std::span<const double> p, std::span<const double> y, std::size_t channels,
                    const LossParams& params) {
    const std::size_t n = pixel_count(p, y, channels);
    const std::size_t c0 = first_foreground(channels);
    double total = 0.0;
    for (std::size_t c = c0; c < channels; ++c) {
        double tp = 0.0, fn = 0.0, fp = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pv = p[i * channels + c], yv = y[i * channels + c];
            tp += pv * yv;
            fn += (1.0 - pv) * yv;
            fp += pv * (1.0 - yv);
        }
        const double e = params.tversky_eps;
        total += 1.0 - (tp + e) / (tp + params.tversky_alpha * fn + params.tversky_beta * fp + e);
    }
    return total / static_cast<double>(channels - c0);
}

double dice_loss(std::span<const double> p, std::span<const double> y, std::size_t channels, double smooth) {
    const std::size_t n = pixel_count(p, y, channels);
    const std::size_t c0 = first_foreground(channels);
    double total = 0.0;
    for (std::size_t c = c0; c < channels; ++c) {
        double inter = 0.0, sp = 0.0, sy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            inter += p[i * channels + c] * y[i * channels + c];
            sp += p[i * channels + c];
            sy += y[i * channels + c];
        }
        total += 1.0 - (2.0 * inter + smooth) / (sp + sy + smooth);
    }
    return total / static_cast<double>(channels - c0);
}

}  // namespace starseg
