#include "starseg/dataset.hpp"

#include <algorithm>

#include <json.hpp>

#include "starseg/error.hpp"
#include "starseg/metrics.hpp"

namespace starseg {

namespace fs = std::filesystem;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

void require_dir(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw Error(Errc::IoFailure, "'" + dir.string() + "' is not a directory");
}

void require_file(const fs::path& p) {
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw Error(Errc::IoFailure, "missing file '" + p.string() + "'");
}

}  // namespace

std::vector<std::string> list_stems(const fs::path& dir, std::string_view suffix) {
    require_dir(dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto name = e.path().filename().string();
        if (ends_with(name, suffix) && name.size() > suffix.size()) out.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> list_label_stems(const fs::path& dir) {
    std::vector<std::string> out;
    for (auto& stem : list_stems(dir, ".npy")) {
        const auto tagged = stem + ".npy";
        if (ends_with(tagged, kProbSuffix) || ends_with(tagged, kDistSuffix) || ends_with(tagged, kClassprobSuffix) ||
            ends_with(tagged, kImageSuffix)) {
            continue;
        }
        out.push_back(std::move(stem));
    }
    return out;
}

std::vector<std::string> list_pred_stems(const fs::path& dir) {
    std::vector<std::string> out;
    for (auto suffix : {kProbSuffix, kDistSuffix, kClassprobSuffix}) {
        auto s = list_stems(dir, suffix);
        out.insert(out.end(), s.begin(), s.end());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

LabelImage read_label(const fs::path& dir, const std::string& stem, int n_classes) {
    const auto map_path = dir / (stem + ".npy");
    const auto cls_path = dir / (stem + std::string(kClassesSuffix));
    require_file(map_path);
    require_file(cls_path);
    LabelImage label{to_array2i(read_tensor(map_path)), read_class_assignment(cls_path, n_classes)};
    validate_label(label, n_classes);
    return label;
}

void write_label(const fs::path& dir, const std::string& stem, const LabelImage& label) {
    write_tensor(dir / (stem + ".npy"), from_array(label.instance_map));
    write_class_assignment(dir / (stem + std::string(kClassesSuffix)), label.classes);
}

PredTensors read_pred(const fs::path& dir, const std::string& stem) {
    const auto p = dir / (stem + std::string(kProbSuffix));
    const auto d = dir / (stem + std::string(kDistSuffix));
    const auto c = dir / (stem + std::string(kClassprobSuffix));
    require_file(p);
    require_file(d);
    require_file(c);
    PredTensors pred{to_array2f(read_tensor(p)), to_array3f(read_tensor(d)), to_array3f(read_tensor(c))};
    validate_pred(pred);
    return pred;
}

void write_pred(const fs::path& dir, const std::string& stem, const PredTensors& pred) {
    write_tensor(dir / (stem + std::string(kProbSuffix)), from_array(pred.prob));
    write_tensor(dir / (stem + std::string(kDistSuffix)), from_array(pred.dist));
    write_tensor(dir / (stem + std::string(kClassprobSuffix)), from_array(pred.classprob));
}

void write_instances(const fs::path& dir, const std::string& stem, const InstanceSet& inst) {
    write_label(dir, stem, inst.label());
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < inst.size(); ++i) {
        j[std::to_string(i + 1)] = {{"score", round4(inst.scores[i])}, {"confidence", round4(inst.confidences[i])}};
    }
    write_file(dir / (stem + std::string(kScoresSuffix)), j.dump(2) + "\n");
}

}  // namespace starseg
