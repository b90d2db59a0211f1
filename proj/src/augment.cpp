#include "starseg/augment.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <json.hpp>

#include "starseg/dataset.hpp"
#include "starseg/error.hpp"
#include "starseg/tensorio.hpp"

namespace starseg {

namespace fs = std::filesystem;

namespace {

void require_rgb(const Image& img) {
    if (img.channels != 3) {
        throw Error(Errc::ShapeMismatch, "expected 3 color channels, got " + std::to_string(img.channels));
    }
}

std::array<double, 3> rgb_to_hsv(double r, double g, double b) {
    const double maxc = std::max({r, g, b});
    const double minc = std::min({r, g, b});
    if (maxc == minc) return {0.0, 0.0, maxc};
    const double span = maxc - minc;
    const double rc = (maxc - r) / span, gc = (maxc - g) / span, bc = (maxc - b) / span;
    double h;
    if (r == maxc) {
        h = bc - gc;
    } else if (g == maxc) {
        h = 2.0 + rc - bc;
    } else {
        h = 4.0 + gc - rc;
    }
    h = h / 6.0;
    h -= std::floor(h);
    return {h, span / maxc, maxc};
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    if (s == 0.0) return {v, v, v};
    const double h6 = h * 6.0;
    const auto sector = static_cast<int>(std::floor(h6));
    const double f = h6 - sector;
    const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
    switch (((sector % 6) + 6) % 6) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

float clamp01(double x) { return static_cast<float>(std::clamp(x, 0.0, 1.0)); }

void check_range(const std::array<double, 2>& r, const char* name, bool positive) {
    if (!(r[0] <= r[1]) || (positive && !(r[0] > 0.0))) {
        throw Error(Errc::InvalidArgument, std::string(name) + " range must satisfy " +
                                               (positive ? "0 < lo <= hi" : "lo <= hi"));
    }
}

}  // namespace

std::string to_string(ColorMode m) {
    switch (m) {
        case ColorMode::Brightness: return "brightness";
        case ColorMode::BrightnessHue: return "brightness_hue";
        case ColorMode::BrightnessHe: return "brightness_he";
    }
    return "";
}

ColorMode parse_color_mode(const std::string& s) {
    if (s == "brightness") return ColorMode::Brightness;
    if (s == "brightness_hue") return ColorMode::BrightnessHue;
    if (s == "brightness_he") return ColorMode::BrightnessHe;
    throw Error(Errc::InvalidArgument, "unknown color mode '" + s + "'");
}

void ColorAugConfig::validate() const {
    check_range(brightness, "brightness", true);
    check_range(hue_degrees, "hue", false);
    check_range(stain_factor, "stain factor", true);
}

std::array<std::array<double, 3>, 3> StainBasis::rows() {
    auto unit = [](std::array<double, 3> v) {
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        return std::array<double, 3>{v[0] / n, v[1] / n, v[2] / n};
    };
    const auto h = unit(hematoxylin_raw);
    const auto e = unit(eosin_raw);
    const auto res = unit({h[1] * e[2] - h[2] * e[1], h[2] * e[0] - h[0] * e[2], h[0] * e[1] - h[1] * e[0]});
    return {h, e, res};
}

Image brightness_aug(const Image& img, double factor) {
    Image out = img;
    for (auto& v : out.data) v = clamp01(static_cast<double>(v) * factor);
    return out;
}

Image hue_aug(const Image& img, double degrees) {
    require_rgb(img);
    Image out = img;
    double shift = std::fmod(degrees / 360.0, 1.0);
    if (shift < 0.0) shift += 1.0;
    for (std::size_t i = 0; i < out.data.size(); i += 3) {
        auto hsv = rgb_to_hsv(img.data[i], img.data[i + 1], img.data[i + 2]);
        double h = hsv[0] + shift;
        h -= std::floor(h);
        const auto rgb = hsv_to_rgb(h, hsv[1], hsv[2]);
        for (int c = 0; c < 3; ++c) out.data[i + c] = clamp01(rgb[c]);
    }
    return out;
}

Image he_stain_aug(const Image& img, double h_factor, double e_factor) {
    require_rgb(img);
    const auto basis = StainBasis::rows();
    Eigen::Matrix3d stains;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) stains(r, c) = basis[r][c];
    }
    // od (row vector) = conc * stains  =>  conc = od * stains^-1
    const Eigen::Matrix3d unmix = stains.inverse();
    const Eigen::Vector3d scale(h_factor, e_factor, 1.0);

    Image out = img;
    for (std::size_t i = 0; i < out.data.size(); i += 3) {
        Eigen::RowVector3d od;
        for (int c = 0; c < 3; ++c) od(c) = -std::log10((static_cast<double>(img.data[i + c]) * 255.0 + 1.0) / 256.0);
        Eigen::RowVector3d conc = od * unmix;
        conc = conc.cwiseProduct(scale.transpose());
        const Eigen::RowVector3d mixed = conc * stains;
        for (int c = 0; c < 3; ++c) out.data[i + c] = clamp01((256.0 * std::pow(10.0, -mixed(c)) - 1.0) / 255.0);
    }
    return out;
}

AugParams draw_params(const ColorAugConfig& cfg, Rng& rng) {
    AugParams p;
    if (cfg.geometric) p.g = D4Element::from_index(static_cast<int>(rng.index(8)));
    p.brightness = rng.uniform(cfg.brightness[0], cfg.brightness[1]);
    if (cfg.mode == ColorMode::BrightnessHue) p.hue_degrees = rng.uniform(cfg.hue_degrees[0], cfg.hue_degrees[1]);
    if (cfg.mode == ColorMode::BrightnessHe) {
        const double h = rng.uniform(cfg.stain_factor[0], cfg.stain_factor[1]);
        const double e = rng.uniform(cfg.stain_factor[0], cfg.stain_factor[1]);
        p.stain = std::array<double, 2>{h, e};
    }
    return p;
}

Image apply_color(const Image& img, const AugParams& p) {
    Image out = img;
    if (p.stain) out = he_stain_aug(out, (*p.stain)[0], (*p.stain)[1]);
    if (p.hue_degrees) out = hue_aug(out, *p.hue_degrees);
    if (p.brightness != 1.0) out = brightness_aug(out, p.brightness);
    return out;
}

std::vector<ManifestEntry> augment_dataset(const fs::path& in_dir, const fs::path& out_dir, const ColorAugConfig& cfg,
                                           int copies_per_image, int n_classes, Exec exec) {
    cfg.validate();
    if (copies_per_image < 1) throw Error(Errc::InvalidArgument, "copies_per_image must be at least 1");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create '" + out_dir.string() + "': " + ec.message());

    const auto stems = list_stems(in_dir, kImageSuffix);
    std::vector<ManifestEntry> entries;
    Rng rng(cfg.seed);
    for (const auto& stem : stems) {
        const bool has_label = fs::exists(in_dir / (stem + ".npy")) && fs::exists(in_dir / (stem + std::string(kClassesSuffix)));
        for (int k = 0; k < copies_per_image; ++k) {
            entries.push_back({stem, stem + "_aug" + std::to_string(k), k, has_label, draw_params(cfg, rng)});
        }
    }

    for_each_index(exec, entries.size(), [&](std::size_t i) {
        const auto& e = entries[i];
        const Image img = to_array3f(read_tensor(in_dir / (e.source + std::string(kImageSuffix))));
        require_rgb(img);
        write_tensor(out_dir / (e.output + std::string(kImageSuffix)), from_array(transform(apply_color(img, e.params), e.params.g)));
        if (e.has_label) write_label(out_dir, e.output, transform(read_label(in_dir, e.source, n_classes), e.params.g));
    });

    write_file(out_dir / "manifest.json", manifest_json(cfg, entries));
    return entries;
}

std::string manifest_json(const ColorAugConfig& cfg, const std::vector<ManifestEntry>& entries) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["seed"] = cfg.seed;
    j["mode"] = to_string(cfg.mode);
    j["geometric"] = cfg.geometric;
    j["brightness_range"] = cfg.brightness;
    j["hue_range_degrees"] = cfg.hue_degrees;
    j["stain_factor_range"] = cfg.stain_factor;
    ordered_json list = ordered_json::array();
    for (const auto& e : entries) {
        ordered_json x;
        x["source"] = e.source;
        x["output"] = e.output;
        x["copy"] = e.copy;
        x["label"] = e.has_label;
        x["d4"] = e.params.g.tag();
        x["brightness"] = e.params.brightness;
        x["hue_degrees"] = e.params.hue_degrees ? ordered_json(*e.params.hue_degrees) : ordered_json(nullptr);
        x["stain_factors"] = e.params.stain ? ordered_json(*e.params.stain) : ordered_json(nullptr);
        list.push_back(std::move(x));
    }
    j["entries"] = std::move(list);
    return j.dump(2) + "\n";
}

}  // namespace starseg
