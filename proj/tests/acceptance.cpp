// Acceptance gate: one PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "starseg/balance.hpp"
#include "starseg/cli.hpp"
#include "starseg/dataset.hpp"
#include "starseg/decode.hpp"
#include "starseg/encode.hpp"
#include "starseg/error.hpp"
#include "starseg/metrics.hpp"
#include "starseg/parallel.hpp"
#include "starseg/tensorio.hpp"
#include "starseg/tta.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"
#include "support/tempdir.hpp"

using namespace starseg;
using testing_support::TempDir;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

void require(Outcome& o, bool ok, const std::string& what) {
    if (!ok && o.pass) {
        o.pass = false;
        o.detail = what;
    }
}

constexpr int kRays = 64;
constexpr int kClasses = 6;

// Shared by the round-trip and shape-refinement criteria.
struct RoundTripSuite {
    std::vector<LabelImage> labels;
    std::vector<PredTensors> targets;
    double encode_seconds = 0.0;
};

const RoundTripSuite& round_trip_suite() {
    static const RoundTripSuite suite = [] {
        RoundTripSuite s;
        const RayConfig rays(kRays);
        const auto t0 = std::chrono::steady_clock::now();
        for (std::uint64_t i = 0; i < 50; ++i) {
            s.labels.push_back(synth::make_label(1000 + i));
            s.targets.push_back(encode_targets(s.labels.back(), rays, kClasses, ProbMode::Edt, Exec::Serial));
        }
        s.encode_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return s;
    }();
    return suite;
}

std::vector<LabelImage> decode_suite(const RoundTripSuite& s, bool refine) {
    const RayConfig rays(kRays);
    DecodeConfig cfg;
    cfg.refine = refine;
    std::vector<LabelImage> out;
    for (const auto& t : s.targets) out.push_back(decode(t, cfg, rays, Exec::Serial).label());
    return out;
}

// Fraction of matched (IoU > 0.5, class-agnostic) instances whose class agrees.
double classification_accuracy(const std::vector<LabelImage>& gt, const std::vector<LabelImage>& pred,
                               std::size_t& matched) {
    std::size_t correct = 0;
    matched = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        std::map<std::pair<int, int>, std::size_t> inter;
        std::map<int, std::size_t> ga, pa;
        const auto& g = gt[i].instance_map.data;
        const auto& p = pred[i].instance_map.data;
        for (std::size_t k = 0; k < g.size(); ++k) {
            if (g[k]) ++ga[g[k]];
            if (p[k]) ++pa[p[k]];
            if (g[k] && p[k]) ++inter[{g[k], p[k]}];
        }
        for (const auto& [key, n] : inter) {
            if (2 * n > ga[key.first] + pa[key.second] - n) {
                ++matched;
                correct += gt[i].classes.at(key.first) == pred[i].classes.at(key.second);
            }
        }
    }
    return matched ? static_cast<double>(correct) / static_cast<double>(matched) : 0.0;
}

Outcome criterion_round_trip() {
    Outcome o;
    set_thread_count(1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto& s = round_trip_suite();
    const auto pred = decode_suite(s, true);
    const auto report = evaluate(s.labels, pred, kClasses, Exec::Serial);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t matched = 0;
    const double acc = classification_accuracy(s.labels, pred, matched);
    std::size_t instances = 0;
    for (const auto& l : s.labels) instances += l.classes.size();

    o.detail = std::to_string(instances) + " instances, mPQ+=" + fmt("%.4f", report.mpq_plus) +
               " mPQ=" + fmt("%.4f", report.mpq) + " acc=" + fmt("%.4f", acc) + " time=" + fmt("%.1fs", seconds);
    const auto detail = o.detail;
    require(o, report.mpq_plus >= 0.95, "mPQ+ below 0.95: " + detail);
    require(o, report.mpq >= 0.95, "mPQ below 0.95: " + detail);
    require(o, acc == 1.0 && matched == instances, "classification not perfect: " + detail);
    require(o, seconds < 60.0, "too slow: " + detail);
    return o;
}

Outcome criterion_nms_oracle() {
    Outcome o;
    Rng rng(42);
    const double thresholds[] = {0.3, 0.5, 0.7};
    std::size_t total = 0;
    for (int set = 0; set < 200 && o.pass; ++set) {
        const int n_rays = set % 2 ? 32 : 17;
        const RayConfig rays(n_rays);
        const auto n = 1 + rng.index(200);
        const auto cands = synth::random_candidates(rng, n, n_rays);
        DecodeConfig cfg;
        cfg.nms_thresh = thresholds[set % 3];
        const auto got = nms(cands, cfg, rays, Exec::Parallel);
        const auto want = oracle::nms(cands, rays, cfg.nms_thresh);
        total += n;
        require(o, got == want, "set " + std::to_string(set) + " (" + std::to_string(n) + " candidates) differs");
    }
    if (o.pass) o.detail = "200 sets, " + std::to_string(total) + " candidates, groups identical";
    return o;
}

Outcome criterion_metric_oracle() {
    Outcome o;
    Rng rng(7);
    for (int i = 0; i < 100 && o.pass; ++i) {
        const auto a = synth::random_blobs(rng, 24, 20, 8, 3);
        const auto b = synth::random_blobs(rng, 24, 20, 8, 3);
        const auto got = match_instances(a.instance_map, b.instance_map);
        const auto want = oracle::match(a.instance_map, b.instance_map);
        require(o, got.tp == want.tp && got.fp == want.fp && got.fn == want.fn &&
                       std::abs(got.sum_iou - want.sum_iou) < 1e-12,
                "pair " + std::to_string(i) + " disagrees with the all-pairs matcher");
    }
    const auto q = dq_sq_pq({1, 1, 0, 0.8});
    require(o, std::abs(q.pq - 0.5333) <= 1e-4, "tp=1 fp=1 fn=0 sum_iou=0.8 gave PQ " + fmt("%.6f", q.pq));

    std::vector<LabelImage> xs;
    for (std::uint64_t s = 0; s < 6; ++s) xs.push_back(synth::make_label(500 + s, {.rows = 128, .cols = 128, .min_instances = 6, .max_instances = 10, .min_radius = 6, .max_radius = 12}));
    const auto r = evaluate(xs, xs, kClasses);
    bool all_one = round4(r.mpq_plus) == 1.0 && round4(r.mpq) == 1.0 && round4(r.overall_plus.pq) == 1.0 &&
                   round4(r.overall_mean.pq) == 1.0 && round4(r.mpq_image_first) == 1.0;
    for (std::size_t t = 0; t < r.per_class_plus.size(); ++t) {
        all_one = all_one && round4(r.per_class_plus[t].pq) == 1.0 && r.per_class_mean[t] && round4(r.per_class_mean[t]->pq) == 1.0;
    }
    require(o, all_one, "evaluate(X, X) is not 1.0000 everywhere");
    if (o.pass) o.detail = "100 pairs match the all-pairs matcher; PQ(1,1,0,0.8)=" + fmt("%.4f", q.pq) + "; evaluate(X,X)=1";
    return o;
}

Outcome criterion_equivariance() {
    Outcome o;
    const RayConfig rays(kRays);
    const synth::LabelSpec spec{.rows = 96, .cols = 128, .min_instances = 3, .max_instances = 8, .min_radius = 7, .max_radius = 14};
    double worst_edt = 0.0;
    for (std::uint64_t i = 0; i < 20 && o.pass; ++i) {
        const auto label = synth::make_label(2000 + i, spec);
        const auto bin = encode_targets(label, rays, kClasses, ProbMode::Binary, Exec::Serial);
        const auto edt = encode_targets(label, rays, kClasses, ProbMode::Edt, Exec::Serial);
        auto noisy = edt;
        synth::break_ties(noisy, 77 + i);
        const auto decoded = decode(noisy, {}, rays, Exec::Serial).label();
        for (auto g : D4Element::all()) {
            const auto moved = transform(label, g);
            require(o, transform_pred(bin, g, rays) == encode_targets(moved, rays, kClasses, ProbMode::Binary, Exec::Serial),
                    "binary targets not equivariant, image " + std::to_string(i) + " element " + g.tag());
            const auto a = transform_pred(edt, g, rays);
            const auto b = encode_targets(moved, rays, kClasses, ProbMode::Edt, Exec::Serial);
            require(o, a.dist == b.dist && a.classprob == b.classprob, "edt-mode dist/classprob differ under " + g.tag());
            for (std::size_t k = 0; k < a.prob.data.size(); ++k) {
                worst_edt = std::max(worst_edt, static_cast<double>(std::abs(a.prob.data[k] - b.prob.data[k])));
            }
            const auto lhs = decode(transform_pred(noisy, g, rays), {}, rays, Exec::Serial).label();
            require(o, lhs == transform(decoded, g),
                    "decode does not commute with " + g.tag() + " on image " + std::to_string(i));
        }
    }
    require(o, worst_edt <= 1e-6, "edt probability differs by " + fmt("%.3g", worst_edt));
    if (o.pass) o.detail = "20 images x 8 elements; max edt deviation " + fmt("%.3g", worst_edt);
    return o;
}

Outcome criterion_tta() {
    Outcome o;
    const RayConfig rays(kRays);
    Rng rng(5);
    const auto p = synth::random_pred(rng, 40, 56, kRays, kClasses);
    const std::vector<PredTensors> same(5, p);
    require(o, merge_predictions(same) == p, "merging identical tensors changed them");

    const auto label = synth::make_label(3, {.rows = 80, .cols = 112, .min_instances = 4, .max_instances = 8, .min_radius = 6, .max_radius = 12});
    for (auto mode : {ProbMode::Binary, ProbMode::Edt}) {
        auto oracle_net = [&](const LabelImage& l) { return encode_targets(l, rays, kClasses, mode, Exec::Serial); };
        require(o, tta_predict(label, oracle_net, rays) == oracle_net(label),
                std::string("tta_predict with the encoder differs from plain encode (") +
                    (mode == ProbMode::Binary ? "binary" : "edt") + ")");
    }

    const std::vector<std::function<PredTensors(const LabelImage&)>> models{
        [&](const LabelImage& l) { return encode_targets(l, rays, kClasses, ProbMode::Binary, Exec::Serial); },
        [&](const LabelImage& l) { return encode_targets(l, rays, kClasses, ProbMode::Edt, Exec::Serial); },
    };
    auto bytes = [](const PredTensors& t) {
        return std::make_tuple(encode_npy(from_array(t.prob)), encode_npy(from_array(t.dist)),
                               encode_npy(from_array(t.classprob)));
    };
    const auto e1 = ensemble_predict(models, label, 3, 99, rays, Exec::Serial);
    const auto e2 = ensemble_predict(models, label, 3, 99, rays, Exec::Parallel);
    require(o, bytes(e1) == bytes(e2), "seeded ensemble runs differ");
    if (o.pass) o.detail = "merge identity, tta(encode)=encode in both modes, ensemble byte-reproducible";
    return o;
}

Outcome criterion_losses() {
    Outcome o;
    Rng rng(11);
    double worst_focal = 0.0, worst_tversky = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t channels = 2 + rng.index(6), pixels = 1 + rng.index(30);
        std::vector<double> p(channels * pixels), y(channels * pixels, 0.0), soft(channels * pixels);
        for (std::size_t px = 0; px < pixels; ++px) {
            double sum = 0.0;
            for (std::size_t c = 0; c < channels; ++c) sum += (p[px * channels + c] = rng.uniform(0.001, 1.0));
            for (std::size_t c = 0; c < channels; ++c) p[px * channels + c] /= sum;
            y[px * channels + rng.index(channels)] = 1.0;
        }
        for (auto& v : soft) v = rng.unit();
        LossParams fp;
        fp.focal_gamma = 0.0;
        worst_focal = std::max(worst_focal, std::abs(focal_loss(p, y, channels, fp) - cce_loss(p, y, channels)));
        // Tversky smoothing eps matches Dice smoothing 2 * eps.
        LossParams tp;
        tp.tversky_alpha = tp.tversky_beta = 0.5;
        tp.tversky_eps = 1.0;
        worst_tversky = std::max(worst_tversky, std::abs(tversky_loss(p, soft, channels, tp) - dice_loss(p, soft, channels, 2.0)));
    }
    const std::vector<double> uniform(7, 1.0 / 7.0);
    std::vector<double> onehot(7, 0.0);
    onehot[4] = 1.0;
    const double cce = cce_loss(uniform, onehot, 7);
    require(o, worst_focal <= 1e-9, "focal(gamma=0) vs CCE differs by " + fmt("%.3g", worst_focal));
    require(o, worst_tversky <= 1e-9, "Tversky(0.5,0.5) vs Dice differs by " + fmt("%.3g", worst_tversky));
    require(o, std::abs(cce - std::log(7.0)) <= 1e-9, "uniform CCE " + fmt("%.12f", cce));
    if (o.pass) {
        o.detail = "max |focal-cce|=" + fmt("%.2g", worst_focal) + " max |tversky-dice|=" + fmt("%.2g", worst_tversky) +
                   " CCE(uniform7)=" + fmt("%.6f", cce);
    }
    return o;
}

Outcome criterion_oversampling() {
    Outcome o;
    // Each image shows a single class; 900 / 50 / 50 instances overall.
    std::vector<LabelImage> labels;
    auto add = [&](int cls, int images) {
        for (int i = 0; i < images; ++i) {
            LabelImage l;
            l.instance_map = InstanceMap(1, 5, 0);
            for (int id = 1; id <= 5; ++id) {
                l.instance_map(0, static_cast<std::size_t>(id - 1)) = id;
                l.classes[id] = cls;
            }
            labels.push_back(std::move(l));
        }
    };
    add(1, 180);
    add(2, 10);
    add(3, 10);
    const auto freqs = class_frequencies(labels, 3);
    std::vector<std::vector<std::size_t>> counts;
    for (const auto& l : labels) counts.push_back(class_counts(l.classes, 3));
    const auto w = oversampling_weights(counts, freqs);
    const auto draws = sample_epoch(w, 100000, 2024);
    std::vector<double> seen(3, 0.0);
    for (auto i : draws) {
        for (std::size_t t = 0; t < 3; ++t) seen[t] += static_cast<double>(counts[i][t]);
    }
    const double total = seen[0] + seen[1] + seen[2];
    double worst = 0.0;
    for (auto& s : seen) {
        s /= total;
        worst = std::max(worst, std::abs(s - 1.0 / 3.0) / (1.0 / 3.0));
    }
    require(o, std::abs(freqs[0] - 0.9) < 1e-12 && std::abs(freqs[1] - 0.05) < 1e-12, "fixture frequencies are off");
    require(o, worst <= 0.10, "class frequencies deviate by " + fmt("%.1f%%", 100 * worst));
    o.detail = "epoch class frequencies " + fmt("%.4f", seen[0]) + " / " + fmt("%.4f", seen[1]) + " / " +
               fmt("%.4f", seen[2]) + " (max deviation " + fmt("%.1f%%", 100 * worst) + ")";
    return o;
}

Outcome criterion_refinement() {
    Outcome o;
    const auto& s = round_trip_suite();
    const auto on = evaluate(s.labels, decode_suite(s, true), kClasses, Exec::Serial);
    const auto off = evaluate(s.labels, decode_suite(s, false), kClasses, Exec::Serial);
    o.detail = "SQ " + fmt("%.4f", off.overall_plus.sq) + " -> " + fmt("%.4f", on.overall_plus.sq) + ", DQ " +
               fmt("%.4f", off.overall_plus.dq) + " -> " + fmt("%.4f", on.overall_plus.dq);
    const auto detail = o.detail;
    require(o, on.overall_plus.sq >= off.overall_plus.sq, "refinement lowered SQ: " + detail);
    require(o, on.overall_plus.dq >= off.overall_plus.dq - 0.01, "refinement lowered DQ by more than 0.01: " + detail);
    return o;
}

template <typename F>
bool throws_code(F&& f, Errc code) {
    try {
        f();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

Outcome criterion_format() {
    Outcome o;
    Rng rng(9);
    const DType types[] = {DType::Float32, DType::Int32, DType::UInt8};
    TempDir dir("npy");
    for (int i = 0; i < 1000 && o.pass; ++i) {
        TensorFile t;
        t.dtype = types[rng.index(3)];
        const auto rank = 2 + rng.index(2);
        for (std::size_t d = 0; d < rank; ++d) t.shape.push_back(1 + rng.index(12));
        t.payload.resize(t.element_count() * dtype_size(t.dtype));
        for (auto& b : t.payload) b = static_cast<std::uint8_t>(rng.index(256));
        const auto bytes = encode_npy(t);
        const auto back = decode_npy(bytes);
        require(o, back == t && encode_npy(back) == bytes && bytes.size() % 64 == (t.payload.size() % 64),
                "in-memory round trip " + std::to_string(i));
        if (i % 50 == 0) {
            const auto path = dir / ("t" + std::to_string(i) + ".npy");
            write_tensor(path, t);
            require(o, read_tensor(path) == t && testing_support::slurp(path) == std::string(bytes.begin(), bytes.end()),
                    "file round trip " + std::to_string(i));
        }
    }

    TensorFile ok{{4, 3}, DType::Float32, std::vector<std::uint8_t>(48, 0)};
    const auto good = encode_npy(ok);
    auto with_header = [&](const std::string& from, const std::string& to) {
        std::string s(good.begin(), good.end());
        const auto at = s.find(from);
        s.replace(at, from.size(), to);
        return std::vector<std::uint8_t>(s.begin(), s.end());
    };
    auto bad_magic = good;
    bad_magic[1] = 'X';
    auto bad_version = good;
    bad_version[6] = 3;
    auto truncated = good;
    truncated.resize(truncated.size() - 4);
    const std::pair<std::function<void()>, Errc> cases[] = {
        {[&] { decode_npy(bad_magic); }, Errc::MalformedHeader},
        {[&] { decode_npy(bad_version); }, Errc::MalformedHeader},
        {[&] { decode_npy(std::vector<std::uint8_t>(good.begin(), good.begin() + 20)); }, Errc::MalformedHeader},
        {[&] { decode_npy(with_header("<f4", "<f8")); }, Errc::UnsupportedDtype},
        {[&] { decode_npy(with_header("<f4", ">f4")); }, Errc::UnsupportedDtype},
        {[&] { decode_npy(with_header("False", "True ")); }, Errc::FortranOrderUnsupported},
        {[&] { decode_npy(with_header("(4, 3)", "(12,) ")); }, Errc::InvalidShape},
        {[&] { decode_npy(truncated); }, Errc::TruncatedPayload},
    };
    int k = 0;
    for (const auto& [f, code] : cases) {
        require(o, throws_code(f, code), "corrupt case " + std::to_string(k) + " not rejected with " + std::string(to_string(code)));
        ++k;
    }
    if (o.pass) o.detail = "1000 round trips byte-identical; " + std::to_string(k) + " corrupt headers rejected";
    return o;
}

Outcome criterion_parallel_determinism() {
    Outcome o;
    TempDir root("det");
    const auto labels = root / "labels";
    std::filesystem::create_directories(labels);
    const RayConfig rays(32);
    for (std::uint64_t i = 0; i < 6; ++i) {
        const auto l = synth::make_label(4000 + i, {.rows = 96, .cols = 96, .min_instances = 3, .max_instances = 8, .min_radius = 6, .max_radius = 12});
        write_label(labels, "img" + std::to_string(i), l);
        auto p = encode_targets(l, rays, kClasses);
        synth::break_ties(p, i);
        std::filesystem::create_directories(root / "pred");
        write_pred(root / "pred", "img" + std::to_string(i), p);
    }
    auto run = [&](const std::string& threads) {
        const auto dec = (root / ("dec" + threads)).string();
        const int a = cli::run({"starseg", "--threads", threads, "decode", "--pred", (root / "pred").string(), "--out", dec});
        const int b = cli::run({"starseg", "--threads", threads, "eval", "--gt", labels.string(), "--pred", dec,
                                "--report", (root / ("report" + threads + ".json")).string(), "--counts"});
        return a == 0 && b == 0;
    };
    require(o, run("1") && run("8"), "a CLI run failed");
    std::string why;
    require(o, testing_support::same_tree(root / "dec1", root / "dec8", &why), "decode outputs differ: " + why);
    require(o, testing_support::slurp(root / "report1.json") == testing_support::slurp(root / "report8.json"),
            "eval reports differ");
    if (o.pass) o.detail = "decode and eval outputs byte-identical at --threads 1 and 8";
    return o;
}

}  // namespace

int main() {
    const std::pair<const char*, std::function<Outcome()>> criteria[] = {
        {"round-trip fidelity", criterion_round_trip},
        {"NMS oracle equivalence", criterion_nms_oracle},
        {"metric oracle", criterion_metric_oracle},
        {"dihedral equivariance", criterion_equivariance},
        {"TTA/ensemble identities", criterion_tta},
        {"loss identities", criterion_losses},
        {"oversampling effect", criterion_oversampling},
        {"shape refinement", criterion_refinement},
        {"format fidelity", criterion_format},
        {"determinism under parallelism", criterion_parallel_determinism},
    };
    int failed = 0, index = 0;
    for (const auto& [name, fn] : criteria) {
        ++index;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s  %2d  %-30s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed ? 1 : 0;
}
