#pragma once

// Ground-truth target generation: label image -> (prob, dist, classprob).

#include <cstddef>
#include <vector>

#include "starseg/array.hpp"
#include "starseg/geometry.hpp"
#include "starseg/parallel.hpp"
#include "starseg/tensorio.hpp"

namespace starseg {

struct LabelImage {
    InstanceMap instance_map;
    ClassAssignment classes;

    friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

/// Per-pixel network outputs. classprob channel 0 is background.
struct PredTensors {
    Array2<float> prob;
    Array3<float> dist;
    Array3<float> classprob;

    std::size_t rows() const { return prob.rows; }
    std::size_t cols() const { return prob.cols; }
    int n_rays() const { return static_cast<int>(dist.channels); }
    int n_classes() const { return static_cast<int>(classprob.channels) - 1; }

    friend bool operator==(const PredTensors&, const PredTensors&) = default;
};

enum class ProbMode { Binary, Edt };

/// Throws Errc::InvalidLabel unless map ids and assignment keys coincide and
/// every class lies in 1..n_classes.
void validate_label(const LabelImage& label, int n_classes);

/// Throws Errc::ShapeMismatch if the three tensors disagree on H/W, or the
/// ray/class channel counts differ from the expected ones (pass 0 to skip).
void validate_pred(const PredTensors& pred, int n_rays = 0, int n_classes = 0);

/// Step count along each ray until the first pixel outside the instance
/// (another id, background, or off-image). Offsets are rounded half away
/// from zero before being added to the start pixel.
std::vector<float> radial_distance(const LabelImage& label, Pixel pixel, const RayConfig& rays);

/// Euclidean distance from every foreground pixel to the nearest pixel not
/// in its instance (off-image counts as outside), divided by the per-instance
/// maximum. Background is 0.
Array2<float> edt_prob(const InstanceMap& map, Exec exec = Exec::Parallel);

PredTensors encode_targets(const LabelImage& label, const RayConfig& rays, int n_classes,
                           ProbMode mode = ProbMode::Edt, Exec exec = Exec::Parallel);

/// Fraction of instances (not pixels) per class 1..T, returned 0-indexed.
std::vector<double> class_frequencies(const std::vector<LabelImage>& labels, int n_classes);

/// Number of instances per class 1..T (0-indexed) in a single image.
std::vector<std::size_t> class_counts(const ClassAssignment& classes, int n_classes);

}  // namespace starseg
