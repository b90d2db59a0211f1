#include "starseg/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "starseg/augment.hpp"
#include "starseg/balance.hpp"
#include "starseg/dataset.hpp"
#include "starseg/decode.hpp"
#include "starseg/encode.hpp"
#include "starseg/error.hpp"
#include "starseg/metrics.hpp"
#include "starseg/parallel.hpp"
#include "starseg/tensorio.hpp"
#include "starseg/tta.hpp"

namespace starseg::cli {

namespace fs = std::filesystem;

namespace {

struct Global {
    int rays = 64;
    int classes = 6;
    int threads = 0;
    std::uint64_t seed = 0;
    int verbosity = 0;
};

// Runs job(i) for every file, one OpenMP worker per file. Failures are
// reported per file in input order; returns the number of failures.
template <typename Job>
std::size_t run_files(const std::vector<std::string>& stems, Job&& job, const Global& g) {
    std::vector<std::string> errors(stems.size());
    for_each_index(Exec::Parallel, stems.size(), [&](std::size_t i) {
        try {
            job(i);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    std::size_t failed = 0;
    for (std::size_t i = 0; i < stems.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "error: " << stems[i] << ": " << errors[i] << '\n';
            ++failed;
        } else if (g.verbosity > 0) {
            std::cerr << "ok: " << stems[i] << '\n';
        }
    }
    return failed;
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(Errc::IoFailure, "cannot create '" + dir.string() + "': " + ec.message());
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
    } else {
        write_file(path, text);
    }
}

std::array<double, 2> parse_range(const std::string& s, const char* flag) {
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos) {
            const double v = std::stod(s);
            return {v, v};
        }
        return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
    } catch (const std::exception&) {
        throw Error(Errc::InvalidArgument, std::string(flag) + " expects LO,HI or a single value, got '" + s + "'");
    }
}

struct EncodeArgs {
    std::string labels, out, prob_mode = "edt";
};

int cmd_encode(const EncodeArgs& a, const Global& g) {
    const auto stems = list_label_stems(a.labels);
    if (stems.empty()) {
        std::cerr << "warning: no instance maps found in '" << a.labels << "'\n";
        return 0;
    }
    make_dir(a.out);
    const RayConfig rays(g.rays);
    const auto mode = a.prob_mode == "binary" ? ProbMode::Binary : ProbMode::Edt;
    const auto failed = run_files(
        stems,
        [&](std::size_t i) {
            const auto label = read_label(a.labels, stems[i], g.classes);
            write_pred(a.out, stems[i], encode_targets(label, rays, g.classes, mode, Exec::Serial));
        },
        g);
    return failed ? 1 : 0;
}

struct DecodeArgs {
    std::string pred, out;
    double prob_thresh = 0.5, nms_thresh = 0.5;
    bool no_refine = false;
    std::size_t max_candidates = 0;
};

int cmd_decode(const DecodeArgs& a, const Global& g) {
    DecodeConfig cfg;
    cfg.prob_thresh = a.prob_thresh;
    cfg.nms_thresh = a.nms_thresh;
    cfg.refine = !a.no_refine;
    if (a.max_candidates > 0) cfg.max_candidates = a.max_candidates;
    cfg.validate();

    const auto stems = list_pred_stems(a.pred);
    if (stems.empty()) {
        std::cerr << "warning: no prediction tensors found in '" << a.pred << "'\n";
        return 0;
    }
    make_dir(a.out);
    const auto failed = run_files(
        stems,
        [&](std::size_t i) {
            const auto pred = read_pred(a.pred, stems[i]);
            const RayConfig rays(pred.n_rays());
            write_instances(a.out, stems[i], decode(pred, cfg, rays, Exec::Serial));
        },
        g);
    return failed ? 1 : 0;
}

struct EvalArgs {
    std::string gt, pred, report;
    bool counts = false;
};

int cmd_eval(const EvalArgs& a, const Global& g) {
    const auto gt_stems = list_label_stems(a.gt);
    const auto pred_stems = list_label_stems(a.pred);
    if (gt_stems != pred_stems) {
        std::vector<std::string> only_gt, only_pred;
        std::set_difference(gt_stems.begin(), gt_stems.end(), pred_stems.begin(), pred_stems.end(),
                            std::back_inserter(only_gt));
        std::set_difference(pred_stems.begin(), pred_stems.end(), gt_stems.begin(), gt_stems.end(),
                            std::back_inserter(only_pred));
        std::cerr << "error: ground truth and prediction directories hold different files\n";
        for (const auto& s : only_gt) std::cerr << "  only in " << a.gt << ": " << s << '\n';
        for (const auto& s : only_pred) std::cerr << "  only in " << a.pred << ": " << s << '\n';
        return 1;
    }
    if (gt_stems.empty()) {
        std::cerr << "error: no instance maps found in '" << a.gt << "'\n";
        return 1;
    }
    std::vector<LabelImage> gt(gt_stems.size()), pred(gt_stems.size());
    const auto failed = run_files(
        gt_stems,
        [&](std::size_t i) {
            gt[i] = read_label(a.gt, gt_stems[i], g.classes);
            pred[i] = read_label(a.pred, gt_stems[i], g.classes);
        },
        g);
    if (failed) return 1;

    const auto report = evaluate(gt, pred, g.classes, Exec::Parallel);
    std::cout << report_table(report, a.counts);
    if (!a.report.empty()) write_file(a.report, report_json(report, gt_stems, a.counts));
    return 0;
}

struct MergeArgs {
    std::vector<std::string> inputs;
    std::string out;
};

int cmd_merge(const MergeArgs& a, const Global& g) {
    struct Source {
        fs::path dir;
        D4Element g;
    };
    std::vector<Source> sources;
    for (const auto& spec : a.inputs) {
        const auto at = spec.rfind('@');
        if (at == std::string::npos) {
            sources.push_back({spec, {}});
        } else {
            sources.push_back({spec.substr(0, at), D4Element::parse(spec.substr(at + 1))});
        }
    }
    const auto stems = list_pred_stems(sources.front().dir);
    if (stems.empty()) {
        std::cerr << "warning: no prediction tensors found in '" << sources.front().dir.string() << "'\n";
        return 0;
    }
    make_dir(a.out);
    const auto failed = run_files(
        stems,
        [&](std::size_t i) {
            std::vector<PredTensors> preds;
            for (const auto& s : sources) {
                auto p = read_pred(s.dir, stems[i]);
                if (!(s.g == D4Element{})) p = transform_pred(p, inverse(s.g), RayConfig(p.n_rays()));
                preds.push_back(std::move(p));
            }
            write_pred(a.out, stems[i], merge_predictions(preds));
        },
        g);
    return failed ? 1 : 0;
}

struct SampleArgs {
    std::string labels, out;
    std::size_t draws = 0;
};

int cmd_sample(const SampleArgs& a, const Global& g) {
    const auto stems = list_label_stems(a.labels);
    if (stems.empty()) {
        std::cerr << "error: no instance maps found in '" << a.labels << "'\n";
        return 1;
    }
    std::vector<LabelImage> labels(stems.size());
    if (run_files(stems, [&](std::size_t i) { labels[i] = read_label(a.labels, stems[i], g.classes); }, g)) return 1;

    const auto freqs = class_frequencies(labels, g.classes);
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& l : labels) counts.push_back(class_counts(l.classes, g.classes));
    const auto w = oversampling_weights(counts, freqs);

    nlohmann::ordered_json j;
    j["class_frequencies"] = freqs;
    j["class_weights"] = class_weights(freqs);
    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < stems.size(); ++i) {
        images.push_back({{"name", stems[i]}, {"instances", counts[i]}, {"weight", w.weights[i]}});
    }
    j["images"] = std::move(images);
    if (a.draws > 0) {
        j["seed"] = g.seed;
        j["epoch"] = sample_epoch(w, a.draws, g.seed);
    }
    emit(j.dump(2) + "\n", a.out);
    return 0;
}

struct AugmentArgs {
    std::string images, out, mode = "brightness_he";
    std::string brightness = "0.7,1.3", hue = "-30,30", stain = "0.7,1.3";
    int copies = 1;
    bool no_geometric = false;
};

int cmd_augment(const AugmentArgs& a, const Global& g) {
    ColorAugConfig cfg;
    cfg.mode = parse_color_mode(a.mode);
    cfg.brightness = parse_range(a.brightness, "--brightness");
    cfg.hue_degrees = parse_range(a.hue, "--hue");
    cfg.stain_factor = parse_range(a.stain, "--stain");
    cfg.geometric = !a.no_geometric;
    cfg.seed = g.seed;
    const auto entries = augment_dataset(a.images, a.out, cfg, a.copies, g.classes, Exec::Parallel);
    if (entries.empty()) std::cerr << "warning: no *.image.npy files found in '" << a.images << "'\n";
    if (g.verbosity > 0) std::cerr << entries.size() << " augmented images written\n";
    return 0;
}

int default_threads() {
    if (const char* env = std::getenv(kThreadsEnv)) {
        try {
            return std::max(0, std::stoi(env));
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring non-numeric " << kThreadsEnv << "='" << env << "'\n";
        }
    }
    return 0;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Star-convex nuclei segmentation: target encoding, decoding, TTA merging and PQ evaluation"};
    app.require_subcommand(1);
    app.fallthrough();

    Global g;
    g.threads = default_threads();
    app.add_option("--rays", g.rays, "Number of radial directions R")->check(CLI::Range(3, 1 << 16))->capture_default_str();
    app.add_option("--classes", g.classes, "Number of cell classes T")->check(CLI::Range(1, 1 << 16))->capture_default_str();
    app.add_option("--threads", g.threads, std::string("Worker threads (0 = runtime default; env ") + kThreadsEnv + ")")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
    app.add_flag("-v,--verbose", g.verbosity, "Per-file progress on standard error");

    EncodeArgs enc;
    auto* s_enc = app.add_subcommand("encode", "Label images -> prob/dist/classprob target tensors");
    s_enc->add_option("--labels", enc.labels, "Directory of <stem>.npy + <stem>.classes.json")->required();
    s_enc->add_option("--out", enc.out, "Output directory")->required();
    s_enc->add_option("--prob-mode", enc.prob_mode, "Object probability target")
        ->check(CLI::IsMember({"edt", "binary"}))
        ->capture_default_str();

    DecodeArgs dec;
    auto* s_dec = app.add_subcommand("decode", "Prediction tensors -> classified instance maps");
    s_dec->add_option("--pred", dec.pred, "Directory of <stem>.prob/.dist/.classprob.npy")->required();
    s_dec->add_option("--out", dec.out, "Output directory")->required();
    s_dec->add_option("--prob-thresh", dec.prob_thresh, "Candidate threshold on object probability")->capture_default_str();
    s_dec->add_option("--nms-thresh", dec.nms_thresh, "IoU above which a candidate is suppressed")->capture_default_str();
    s_dec->add_flag("--no-refine", dec.no_refine, "Keep winner polygons instead of the majority vote");
    s_dec->add_option("--max-candidates", dec.max_candidates, "Keep only the top-scoring candidates (0 = all)");

    EvalArgs ev;
    auto* s_eval = app.add_subcommand("eval", "Panoptic-quality evaluation of predictions against ground truth");
    s_eval->add_option("--gt", ev.gt, "Ground-truth directory")->required();
    s_eval->add_option("--pred", ev.pred, "Prediction directory")->required();
    s_eval->add_option("--report", ev.report, "Write the JSON report here");
    s_eval->add_flag("--counts", ev.counts, "Add per-class instance counts");

    MergeArgs mg;
    auto* s_merge = app.add_subcommand("merge", "Average prediction tensors from TTA or ensemble runs");
    s_merge->add_option("--inputs,--input", mg.inputs,
                        "DIR[@TAG] per source; TAG (r0..r3, optional f) is the D4 element the input was transformed by")
        ->required();
    s_merge->add_option("--out", mg.out, "Output directory")->required();

    SampleArgs sm;
    auto* s_sample = app.add_subcommand("sample", "Class frequencies and oversampling weights");
    s_sample->add_option("--labels", sm.labels, "Directory of label images")->required();
    s_sample->add_option("--draws", sm.draws, "Also draw an epoch of this many image indices");
    s_sample->add_option("--out", sm.out, "Write JSON here instead of standard output");

    AugmentArgs ag;
    auto* s_aug = app.add_subcommand("augment", "Write color/geometry augmented copies of a dataset");
    s_aug->add_option("--images", ag.images, "Directory of <stem>.image.npy (+ optional labels)")->required();
    s_aug->add_option("--out", ag.out, "Output directory")->required();
    s_aug->add_option("--copies", ag.copies, "Augmented copies per image")->check(CLI::PositiveNumber)->capture_default_str();
    s_aug->add_option("--mode", ag.mode, "Color augmentation")
        ->check(CLI::IsMember({"brightness", "brightness_hue", "brightness_he"}))
        ->capture_default_str();
    s_aug->add_option("--brightness", ag.brightness, "Multiplicative brightness range LO,HI")->capture_default_str();
    s_aug->add_option("--hue", ag.hue, "Hue shift range in degrees LO,HI")->capture_default_str();
    s_aug->add_option("--stain", ag.stain, "H and E concentration factor range LO,HI")->capture_default_str();
    s_aug->add_flag("--no-geometric", ag.no_geometric, "Skip the random rotation/flip");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    set_thread_count(g.threads);
    try {
        if (*s_enc) return cmd_encode(enc, g);
        if (*s_dec) return cmd_decode(dec, g);
        if (*s_eval) return cmd_eval(ev, g);
        if (*s_merge) return cmd_merge(mg, g);
        if (*s_sample) return cmd_sample(sm, g);
        if (*s_aug) return cmd_augment(ag, g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == Errc::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    for (auto& s : copy) argv.push_back(s.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace starseg::cli
