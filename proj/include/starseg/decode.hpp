#pragma once

// Prediction tensors -> classified, non-overlapping instances:
// threshold -> candidates -> greedy NMS with suppression groups ->
// optional majority-vote shape refinement -> per-instance class vote.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "starseg/encode.hpp"
#include "starseg/geometry.hpp"

namespace starseg {

struct DecodeConfig {
    double prob_thresh = 0.5;
    double nms_thresh = 0.5;
    bool refine = true;
    std::optional<std::size_t> max_candidates;

    void validate() const;
};

/// Ids run 1..N in descending score order; scores[i] and confidences[i]
/// belong to id i + 1.
struct InstanceSet {
    InstanceMap instance_map;
    ClassAssignment classes;
    std::vector<float> scores;
    std::vector<double> confidences;

    std::size_t size() const { return scores.size(); }
    LabelImage label() const { return {instance_map, classes}; }

    friend bool operator==(const InstanceSet&, const InstanceSet&) = default;
};

/// Indices into the candidate list.
struct NmsGroup {
    std::size_t winner;
    std::vector<std::size_t> suppressed;

    friend bool operator==(const NmsGroup&, const NmsGroup&) = default;
};

struct ClassVote {
    int label;
    double confidence;
};

/// One candidate per pixel with prob > prob_thresh, sorted by score
/// descending then (row, col) ascending.
std::vector<PolygonCandidate> extract_candidates(const PredTensors& pred, const DecodeConfig& cfg,
                                                 const RayConfig& rays);

/// Greedy NMS over score-sorted candidates. Every candidate ends up either as
/// a winner or in exactly one suppressed list.
std::vector<NmsGroup> nms(std::span<const PolygonCandidate> cands, const DecodeConfig& cfg, const RayConfig& rays,
                          Exec exec = Exec::Parallel);

/// Same, over rasterizations computed beforehand (masks[i] for cands[i]).
std::vector<NmsGroup> nms(std::span<const PolygonCandidate> cands, std::span<const LocalMask> masks,
                          double nms_thresh);

/// Pixels covered by strictly more than half of the group's polygons, clipped
/// to the image; falls back to the winner alone when that is empty.
Mask refine_shape(const NmsGroup& group, std::span<const PolygonCandidate> cands, const RayConfig& rays,
                  std::size_t height, std::size_t width);

/// Mean class-probability over the mask; argmax over foreground channels,
/// ties to the smallest class. Throws Errc::EmptyMask.
ClassVote classify_instance(const Mask& mask, const Array3<float>& classprob);

InstanceSet decode(const PredTensors& pred, const DecodeConfig& cfg, const RayConfig& rays,
                   Exec exec = Exec::Parallel);

}  // namespace starseg
