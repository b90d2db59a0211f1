#pragma once

// Pixel-wise color augmentations (brightness, hue, H&E stain) and an offline
// job that materializes an augmented dataset with a manifest of every drawn
// parameter.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "starseg/array.hpp"
#include "starseg/parallel.hpp"
#include "starseg/rng.hpp"
#include "starseg/tta.hpp"

namespace starseg {

enum class ColorMode { Brightness, BrightnessHue, BrightnessHe };

std::string to_string(ColorMode m);
ColorMode parse_color_mode(const std::string& s);

/// Sampling ranges are closed intervals; lo == hi pins the value.
struct ColorAugConfig {
    ColorMode mode = ColorMode::BrightnessHe;
    std::array<double, 2> brightness{0.7, 1.3};
    std::array<double, 2> hue_degrees{-30.0, 30.0};
    std::array<double, 2> stain_factor{0.7, 1.3};  // drawn independently for H and E
    bool geometric = true;                         // random D4 element per copy
    std::uint64_t seed = 0;

    void validate() const;
};

/// Ruifrok-Johnston optical-density vectors in RGB order, normalized to unit
/// length. The third basis vector is their normalized cross product.
struct StainBasis {
    static constexpr std::array<double, 3> hematoxylin_raw{0.650, 0.704, 0.286};
    static constexpr std::array<double, 3> eosin_raw{0.072, 0.990, 0.105};
    static std::array<std::array<double, 3>, 3> rows();
};

/// clamp(img * factor, 0, 1).
Image brightness_aug(const Image& img, double factor);

/// Rotates hue in HSV space by `degrees` (mod 360); S and V are kept.
Image hue_aug(const Image& img, double degrees);

/// Optical density -log10((255 v + 1) / 256), unmixed on the stain basis;
/// H and E concentrations are scaled, then mixed back and clamped.
Image he_stain_aug(const Image& img, double h_factor, double e_factor);

struct AugParams {
    D4Element g;
    double brightness = 1.0;
    std::optional<double> hue_degrees;
    std::optional<std::array<double, 2>> stain;
};

AugParams draw_params(const ColorAugConfig& cfg, Rng& rng);

/// Color part only: stain or hue first, brightness last.
Image apply_color(const Image& img, const AugParams& p);

struct ManifestEntry {
    std::string source;
    std::string output;
    int copy = 0;
    bool has_label = false;
    AugParams params;
};

/// For every `<stem>.image.npy` in in_dir (sorted), writes copies_per_image
/// variants `<stem>_aug<k>.image.npy`; a paired `<stem>.npy` +
/// `<stem>.classes.json` label follows the same geometric transform. All
/// parameters are drawn up front in manifest order. Writes
/// out_dir/manifest.json and returns its entries.
std::vector<ManifestEntry> augment_dataset(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                                           const ColorAugConfig& cfg, int copies_per_image, int n_classes,
                                           Exec exec = Exec::Parallel);

std::string manifest_json(const ColorAugConfig& cfg, const std::vector<ManifestEntry>& entries);

}  // namespace starseg
