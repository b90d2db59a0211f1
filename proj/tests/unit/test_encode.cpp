#include <doctest.h>

#include "starseg/encode.hpp"
#include "support/checks.hpp"
#include "support/oracles.hpp"
#include "support/synth.hpp"

using namespace starseg;

namespace {

LabelImage square(std::size_t h, std::size_t w, std::size_t r0, std::size_t c0, std::size_t side, int cls) {
    LabelImage l;
    l.instance_map = InstanceMap(h, w, 0);
    for (std::size_t r = r0; r < r0 + side; ++r) {
        for (std::size_t c = c0; c < c0 + side; ++c) l.instance_map(r, c) = 1;
    }
    l.classes[1] = cls;
    return l;
}

}  // namespace

TEST_CASE("radial distance on hand cases") {
    const RayConfig rays(4);
    CHECK(radial_distance(square(5, 5, 2, 2, 1, 1), {2, 2}, rays) == std::vector<float>{1, 1, 1, 1});
    CHECK(radial_distance(square(7, 7, 2, 2, 3, 1), {3, 3}, rays) == std::vector<float>{2, 2, 2, 2});
    // Border pixel: the ray pointing off-image stops after one step.
    const auto d = radial_distance(square(4, 4, 0, 0, 4, 1), {0, 0}, rays);
    CHECK(d == std::vector<float>{4, 4, 1, 1});
}

TEST_CASE("radial distance errors") {
    const auto l = square(5, 5, 2, 2, 1, 1);
    CHECK_ERRC(radial_distance(l, {0, 0}, RayConfig(4)), Errc::BackgroundPixel);
    CHECK_ERRC(radial_distance(l, {9, 0}, RayConfig(4)), Errc::InvalidArgument);
}

TEST_CASE("radial distance matches the direct-angle oracle") {
    const RayConfig rays(64);
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto l = synth::make_label(s, {.rows = 64, .cols = 64, .min_instances = 2, .max_instances = 4, .min_radius = 5, .max_radius = 10});
        for (std::size_t r = 0; r < 64; r += 3) {
            for (std::size_t c = 0; c < 64; c += 3) {
                if (l.instance_map(r, c) == 0) continue;
                const auto pr = static_cast<std::int64_t>(r), pc = static_cast<std::int64_t>(c);
                CHECK(radial_distance(l, {pr, pc}, rays) == oracle::radial_distance(l.instance_map, pr, pc, 64));
            }
        }
    }
}

TEST_CASE("empty label image encodes to background everywhere") {
    LabelImage l{InstanceMap(4, 5, 0), {}};
    const auto p = encode_targets(l, RayConfig(8), 6);
    for (auto v : p.prob.data) CHECK(v == 0.f);
    for (auto v : p.dist.data) CHECK(v == 0.f);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 5; ++c) {
            CHECK(p.classprob(r, c, 0) == 1.f);
            for (std::size_t k = 1; k < 7; ++k) CHECK(p.classprob(r, c, k) == 0.f);
        }
    }
}

TEST_CASE("3x3 square of class 2 in binary mode") {
    const auto p = encode_targets(square(7, 7, 2, 2, 3, 2), RayConfig(4), 6, ProbMode::Binary);
    float ones = 0;
    for (auto v : p.prob.data) ones += v;
    CHECK(ones == 9);
    CHECK(std::vector<float>(p.dist.pixel(3, 3).begin(), p.dist.pixel(3, 3).end()) == std::vector<float>{2, 2, 2, 2});
    float class2 = 0;
    for (std::size_t r = 0; r < 7; ++r) {
        for (std::size_t c = 0; c < 7; ++c) class2 += p.classprob(r, c, 2);
    }
    CHECK(class2 == 9);
    CHECK(p.classprob(0, 0, 0) == 1.f);
}

TEST_CASE("edt mode on a 5x5 square") {
    const auto p = encode_targets(square(9, 9, 2, 2, 5, 1), RayConfig(4), 6, ProbMode::Edt);
    CHECK(p.prob(4, 4) == 1.f);
    CHECK(p.prob(2, 2) < 1.f);
    CHECK(p.prob(2, 2) == p.prob(2, 6));
    CHECK(p.prob(2, 2) == p.prob(6, 2));
    CHECK(p.prob(2, 2) == p.prob(6, 6));
    CHECK(p.prob(2, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("edt probability equals the brute-force distance transform") {
    Rng rng(12);
    for (int i = 0; i < 20; ++i) {
        const auto l = synth::random_blobs(rng, 18, 23, 5, 3);
        const auto got = edt_prob(l.instance_map, Exec::Serial);
        const auto want = oracle::edt_prob(l.instance_map);
        for (std::size_t k = 0; k < got.data.size(); ++k) CHECK(got.data[k] == doctest::Approx(want.data[k]).epsilon(1e-6));
    }
}

TEST_CASE("edt treats the image border as outside") {
    const auto p = edt_prob(square(3, 3, 0, 0, 3, 1).instance_map);
    CHECK(p(1, 1) == 1.f);
    CHECK(p(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("label validation") {
    auto l = square(5, 5, 1, 1, 2, 1);
    CHECK_NOTHROW(validate_label(l, 6));
    l.classes[2] = 1;
    CHECK_ERRC(validate_label(l, 6), Errc::InvalidLabel);
    l.classes.erase(2);
    l.classes[1] = 9;
    CHECK_ERRC(validate_label(l, 6), Errc::ClassOutOfRange);
    l.classes.clear();
    CHECK_ERRC(validate_label(l, 6), Errc::InvalidLabel);
    auto neg = square(5, 5, 1, 1, 2, 1);
    neg.instance_map(0, 0) = -1;
    CHECK_ERRC(validate_label(neg, 6), Errc::InvalidLabel);
}

TEST_CASE("prediction validation") {
    PredTensors p;
    p.prob = Array2<float>(3, 4);
    p.dist = Array3<float>(3, 4, 8);
    p.classprob = Array3<float>(3, 4, 7);
    CHECK_NOTHROW(validate_pred(p, 8, 6));
    CHECK_ERRC(validate_pred(p, 16), Errc::ShapeMismatch);
    CHECK_ERRC(validate_pred(p, 0, 5), Errc::ShapeMismatch);
    p.dist = Array3<float>(3, 5, 8);
    CHECK_ERRC(validate_pred(p), Errc::ShapeMismatch);
}

TEST_CASE("class frequencies") {
    LabelImage l;
    l.instance_map = InstanceMap(1, 3, 0);
    for (int id = 1; id <= 3; ++id) l.instance_map(0, static_cast<std::size_t>(id - 1)) = id;
    l.classes = {{1, 1}, {2, 1}, {3, 2}};
    const auto f = class_frequencies({l}, 2);
    CHECK(f[0] == doctest::Approx(2.0 / 3.0));
    CHECK(f[1] == doctest::Approx(1.0 / 3.0));
    l.classes = {{1, 4}, {2, 4}, {3, 4}};
    CHECK(class_frequencies({l}, 6) == std::vector<double>{0, 0, 0, 1, 0, 0});
    CHECK_ERRC(class_frequencies({LabelImage{InstanceMap(2, 2, 0), {}}}, 6), Errc::EmptyDataset);
}

TEST_CASE("class frequencies match generator bookkeeping on 100 images") {
    std::vector<LabelImage> ls;
    std::vector<std::size_t> tally(6, 0);
    std::size_t all = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        ls.push_back(synth::make_label(s, {.rows = 64, .cols = 64, .min_instances = 1, .max_instances = 6, .min_radius = 3, .max_radius = 6}));
        for (const auto& [id, cls] : ls.back().classes) {
            ++tally[static_cast<std::size_t>(cls - 1)];
            ++all;
        }
    }
    const auto f = class_frequencies(ls, 6);
    for (std::size_t t = 0; t < 6; ++t) CHECK(f[t] == static_cast<double>(tally[t]) / static_cast<double>(all));
}

TEST_CASE("serial and parallel encoding are identical") {
    const auto l = synth::make_label(9, {.rows = 128, .cols = 128});
    const RayConfig rays(32);
    for (auto mode : {ProbMode::Binary, ProbMode::Edt}) {
        CHECK(encode_targets(l, rays, 6, mode, Exec::Serial) == encode_targets(l, rays, 6, mode, Exec::Parallel));
    }
}
