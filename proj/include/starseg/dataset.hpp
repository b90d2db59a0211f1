#pragma once

// On-disk layout shared by the CLI and the augmentation job. Files are
// paired by stem inside a directory:
//
//   <stem>.npy            int32 H x W instance map (0 = background)
//   <stem>.classes.json   {"<id>": <class>, ...}
//   <stem>.scores.json    decoder scores and class confidences
//   <stem>.prob.npy       float32 H x W
//   <stem>.dist.npy       float32 H x W x R
//   <stem>.classprob.npy  float32 H x W x (T + 1)
//   <stem>.image.npy      float32 H x W x 3 RGB in [0, 1]

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "starseg/decode.hpp"
#include "starseg/encode.hpp"

namespace starseg {

inline constexpr std::string_view kClassesSuffix = ".classes.json";
inline constexpr std::string_view kScoresSuffix = ".scores.json";
inline constexpr std::string_view kProbSuffix = ".prob.npy";
inline constexpr std::string_view kDistSuffix = ".dist.npy";
inline constexpr std::string_view kClassprobSuffix = ".classprob.npy";
inline constexpr std::string_view kImageSuffix = ".image.npy";

/// Sorted stems of regular files in `dir` ending in `suffix`.
std::vector<std::string> list_stems(const std::filesystem::path& dir, std::string_view suffix);

/// Stems of instance maps: *.npy files that are not prob/dist/classprob/image tensors.
std::vector<std::string> list_label_stems(const std::filesystem::path& dir);

/// Stems with at least one of the three prediction tensors.
std::vector<std::string> list_pred_stems(const std::filesystem::path& dir);

LabelImage read_label(const std::filesystem::path& dir, const std::string& stem, int n_classes);
void write_label(const std::filesystem::path& dir, const std::string& stem, const LabelImage& label);

/// Throws Errc::IoFailure naming the missing file when a tensor is absent.
PredTensors read_pred(const std::filesystem::path& dir, const std::string& stem);
void write_pred(const std::filesystem::path& dir, const std::string& stem, const PredTensors& pred);

void write_instances(const std::filesystem::path& dir, const std::string& stem, const InstanceSet& inst);

}  // namespace starseg
