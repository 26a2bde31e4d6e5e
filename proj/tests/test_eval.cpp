#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cdftn/eval.hpp"
#include "cdftn/rng.hpp"
#include "eval_refs.hpp"
#include "test_util.hpp"

using namespace cdftn;
using namespace cdftn::eval;

TEST_SUITE_BEGIN("eval");

namespace oracle = evalref;

namespace {

ScoreSet random_grid_set(Rng& rng) {
    for (;;) {
        const int64_t n = 2 + static_cast<int64_t>(rng.below(7));  // size <= 8
        ScoreSet s;
        for (int64_t i = 0; i < n; ++i) {
            s.scores.push_back(0.1 * static_cast<double>(1 + rng.below(9)));  // {0.1..0.9}
            s.labels.push_back(static_cast<int>(rng.below(2)));
        }
        if (s.live_count() > 0 && s.spoof_count() > 0) return s;
    }
}

}  // namespace

TEST_CASE("hand examples: frr_far") {
    ScoreSet s{{0.9, 0.2, 0.8, 0.1}, {1, 1, 0, 0}};
    auto [fr, fa] = frr_far(s, 0.5);
    CHECK(fr == doctest::Approx(0.5));
    CHECK(fa == doctest::Approx(0.5));

    ScoreSet sep{{0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}};
    auto [fr2, fa2] = frr_far(sep, 0.5);
    CHECK(fr2 == doctest::Approx(0.0));
    CHECK(fa2 == doctest::Approx(0.0));

    auto [fr3, fa3] = frr_far(sep, 2.0);  // above max: everything rejected
    CHECK(fr3 == doctest::Approx(1.0));
    CHECK(fa3 == doctest::Approx(0.0));

    ScoreSet one_class{{0.5, 0.6}, {1, 1}};
    CHECK_THROWS_AS(frr_far(one_class, 0.5), std::invalid_argument);
}

TEST_CASE("hand examples: hter") {
    CHECK(hter(0.1, 0.3) == doctest::Approx(0.2));
    CHECK(hter(0.0, 0.0) == doctest::Approx(0.0));
    CHECK(hter(1.0, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(hter(-0.1, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(hter(0.1, 1.5), std::invalid_argument);
}

TEST_CASE("hand examples: auc") {
    CHECK(auc({{0.9, 0.8, 0.4, 0.3}, {1, 1, 0, 0}}) == doctest::Approx(1.0));
    CHECK(auc({{0.9, 0.4, 0.8, 0.3}, {1, 1, 0, 0}}) == doctest::Approx(0.75));
    CHECK(auc({{0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(auc({{0.5}, {1}}), std::invalid_argument);
}

TEST_CASE("hand examples: eer threshold") {
    ScoreSet sep{{0.9, 0.8, 0.1, 0.2}, {1, 1, 0, 0}};
    const double thr = eer_threshold(sep);
    CHECK(thr > 0.2);
    CHECK(thr < 0.8);
    auto [fr, fa] = frr_far(sep, thr);
    CHECK(fr == doctest::Approx(0.0));
    CHECK(fa == doctest::Approx(0.0));

    ScoreSet mixed{{0.9, 0.2, 0.8, 0.1}, {1, 1, 0, 0}};
    const double thr2 = eer_threshold(mixed);
    auto [fr2, fa2] = frr_far(mixed, thr2);
    CHECK(std::fabs(fr2 - fa2) == doctest::Approx(0.0));
    CHECK(fr2 == doctest::Approx(0.5));

    // translation equivariance
    ScoreSet shifted = mixed;
    for (auto& v : shifted.scores) v += 1.0;
    CHECK(eer_threshold(shifted) == doctest::Approx(thr2 + 1.0).epsilon(1e-9));
    auto [fr3, fa3] = frr_far(shifted, eer_threshold(shifted));
    CHECK(fr3 == doctest::Approx(fr2));
    CHECK(fa3 == doctest::Approx(fa2));
}

TEST_CASE("metric oracle: >= 1000 sampled grid score sets of size <= 8") {
    Rng rng(2024);
    for (int it = 0; it < 1200; ++it) {
        ScoreSet s = random_grid_set(rng);
        // AUC: rank-sum equals pairwise brute force exactly
        CHECK(auc(s) == oracle::auc_pairwise(s));
        // FRR/FAR at a random grid threshold, plus HTER
        const double thr = 0.05 + 0.1 * static_cast<double>(rng.below(10));
        const auto got = frr_far(s, thr);
        const auto want = oracle::frr_far_count(s, thr);
        CHECK(got.first == want.first);
        CHECK(got.second == want.second);
        CHECK(hter(got.first, got.second) == (want.first + want.second) / 2.0);
        // EER threshold agrees with the exhaustive scan
        const double eer = eer_threshold(s);
        CHECK(eer == oracle::eer_scan(s));
    }
}

TEST_CASE("property: HTER at EER within one sample's quantization (distinct scores)") {
    // with tied scores a threshold step can flip several samples at once, so
    // the one-sample bound is stated for distinct scores
    Rng rng(2025);
    for (int it = 0; it < 300; ++it) {
        ScoreSet s;
        const int64_t n = 4 + static_cast<int64_t>(rng.below(40));
        for (int64_t i = 0; i < n; ++i) {
            s.scores.push_back(rng.uniform(0.0, 1.0));
            s.labels.push_back(static_cast<int>(rng.below(2)));
        }
        if (s.live_count() == 0 || s.spoof_count() == 0) continue;
        const double eer = eer_threshold(s);
        const auto at = frr_far(s, eer);
        const double quantum =
            1.0 / static_cast<double>(std::min(s.live_count(), s.spoof_count()));
        CHECK(std::fabs(at.first - at.second) <= quantum + 1e-12);
        CHECK(hter(at.first, at.second) == doctest::Approx((at.first + at.second) / 2.0));
    }
}

TEST_CASE("property: auc invariant under strictly increasing transforms") {
    Rng rng(77);
    for (int it = 0; it < 200; ++it) {
        ScoreSet s = random_grid_set(rng);
        ScoreSet t = s;
        for (auto& v : t.scores) v = std::exp(3.0 * v) + v * v * v;
        CHECK(auc(s) == doctest::Approx(auc(t)).epsilon(1e-12));
    }
}

TEST_CASE("property: frr_far monotone in the threshold") {
    Rng rng(78);
    for (int it = 0; it < 100; ++it) {
        ScoreSet s = random_grid_set(rng);
        double prev_frr = -1.0, prev_far = 2.0;
        for (double thr = -0.05; thr <= 1.15; thr += 0.05) {
            auto [fr, fa] = frr_far(s, thr);
            CHECK(fr >= prev_frr - 1e-12);
            CHECK(fa <= prev_far + 1e-12);
            prev_frr = fr;
            prev_far = fa;
        }
    }
}

TEST_CASE("evaluate_scores fills both operating points") {
    ScoreSet s{{0.9, 0.7, 0.3, 0.1, 0.6, 0.2}, {1, 1, 1, 0, 0, 0}};
    EvalReport r = evaluate_scores(s);
    CHECK(r.n_live == 3);
    CHECK(r.n_spoof == 3);
    CHECK(r.hter == doctest::Approx((r.frr + r.far) / 2.0));
    CHECK(r.hter05 == doctest::Approx((r.frr05 + r.far05) / 2.0));
    CHECK(r.auc == doctest::Approx(auc(s)));
}

TEST_CASE("project_2d: centered 2-d data is rotated, distances preserved") {
    Rng rng(79);
    const int64_t n = 24;
    Tensor x({n, 2});
    for (int64_t i = 0; i < n; ++i) {
        x.at2(i, 0) = rng.normal() * 2.0;
        x.at2(i, 1) = rng.normal() * 0.7;
    }
    // center it
    for (int64_t j = 0; j < 2; ++j) {
        double m = 0.0;
        for (int64_t i = 0; i < n; ++i) m += x.at2(i, j);
        m /= n;
        for (int64_t i = 0; i < n; ++i) x.at2(i, j) -= m;
    }
    auto p = project_2d(x);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = i + 1; j < n; ++j) {
            const double d0 = std::hypot(x.at2(i, 0) - x.at2(j, 0), x.at2(i, 1) - x.at2(j, 1));
            const double d1 = std::hypot(p[i][0] - p[j][0], p[i][1] - p[j][1]);
            CHECK(d1 == doctest::Approx(d0).epsilon(1e-6));
        }
}

TEST_CASE("project_2d: rank-1 data has a null second coordinate") {
    Rng rng(80);
    const int64_t n = 12, d = 5;
    Tensor x({n, d});
    for (int64_t i = 0; i < n; ++i) {
        const double t = rng.uniform(-2.0, 2.0);
        for (int64_t j = 0; j < d; ++j) x.at2(i, j) = t * (0.3 + static_cast<double>(j));
    }
    auto p = project_2d(x);
    for (const auto& pt : p) CHECK(std::fabs(pt[1]) < 1e-8);
}

TEST_CASE("project_2d: duplicated points project identically") {
    Rng rng(81);
    const int64_t n = 9, d = 6;
    Tensor x({2 * n, d});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) {
            const double v = rng.uniform(-1.0, 1.0);
            x.at2(i, j) = v;
            x.at2(n + i, j) = v;
        }
    auto p = project_2d(x);
    for (int64_t i = 0; i < n; ++i) {
        CHECK(p[i][0] == doctest::Approx(p[n + i][0]).epsilon(1e-10));
        CHECK(p[i][1] == doctest::Approx(p[n + i][1]).epsilon(1e-10));
    }
}

TEST_CASE("project_2d error paths") {
    CHECK_THROWS_AS(project_2d(Tensor({2, 8})), std::invalid_argument);
    CHECK_THROWS_AS(project_2d(Tensor({5, 1})), std::invalid_argument);
}

TEST_SUITE_END();
