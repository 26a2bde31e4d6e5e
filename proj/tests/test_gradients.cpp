#include <doctest.h>

#include <cmath>

#include "cdftn/losses.hpp"
#include "stage1_objective.hpp"
#include "test_util.hpp"

using namespace cdftn;
using namespace cdftn::losses;
using testutil::max_grad_rel_err;
using testutil::rand_tensor;

TEST_SUITE_BEGIN("gradients");

// Central differences, 64-bit, step 1e-5, max relative error 1e-4.
static constexpr double kTol = 1e-4;

TEST_CASE("fd: liveness adversarial loss wrt probabilities") {
    Rng rng(201);
    for (int it = 0; it < 20; ++it) {
        auto ps = rand_tensor({3}, rng, 0.05, 0.95);
        auto pt = rand_tensor({2}, rng, 0.05, 0.95);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) {
                      return liveness_adversarial_loss(v[0], v[1]);
                  },
                  {ps, pt}) < kTol);
    }
}

TEST_CASE("fd: source classification loss wrt logits") {
    Rng rng(202);
    for (int it = 0; it < 20; ++it) {
        Tensor y({3, 2});
        for (int64_t i = 0; i < 3; ++i) y.at2(i, static_cast<int64_t>(rng.below(2))) = 1.0;
        auto logits = rand_tensor({3, 2}, rng, -2.0, 2.0);
        CHECK(max_grad_rel_err(
                  [&](const std::vector<Var>& v) { return source_cls_loss(v[0], y); }, {logits}) <
              kTol);
    }
}

TEST_CASE("fd: reconstruction family wrt both arguments") {
    Rng rng(203);
    for (int it = 0; it < 20; ++it) {
        auto a = rand_tensor({2, 2, 3, 3}, rng);
        auto b = rand_tensor({2, 2, 3, 3}, rng);
        auto c = rand_tensor({2, 2, 3, 3}, rng);
        auto d = rand_tensor({2, 2, 3, 3}, rng);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) { return l1_reconstruction(v[0], v[1]); },
                  {a, b}) < kTol);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) { return cycle_loss(v[0], v[1], v[2], v[3]); },
                  {a, b, c, d}) < kTol);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) { return latent_loss(v[0], v[1], v[2], v[3]); },
                  {a, b, c, d}) < kTol);
    }
}

TEST_CASE("fd: image adversarial and generator surrogate") {
    Rng rng(204);
    for (int it = 0; it < 20; ++it) {
        auto pr = rand_tensor({4}, rng, 0.05, 0.95);
        auto pf = rand_tensor({4}, rng, 0.05, 0.95);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) { return image_adversarial_loss(v[0], v[1]); },
                  {pr, pf}) < kTol);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) { return generator_adversarial_loss(v[0]); },
                  {pf}) < kTol);
        CHECK(max_grad_rel_err(
                  [](const std::vector<Var>& v) {
                      return generator_adversarial_loss(v[0], true);
                  },
                  {pf}) < kTol);
    }
}

TEST_CASE("fd: spoof cue loss") {
    Rng rng(205);
    for (int it = 0; it < 20; ++it) {
        auto cue = rand_tensor({3, 1, 3, 3}, rng, 0.1, 1.0);  // keep |.| away from its kink
        for (int64_t i = 0; i < cue.numel(); ++i)
            if (rng.below(2)) cue[i] = -cue[i];
        const std::vector<int> labels{1, 0, 1};
        CHECK(max_grad_rel_err(
                  [&](const std::vector<Var>& v) { return spoof_cue_loss(v[0], labels); },
                  {cue}) < kTol);
    }
}

TEST_CASE("fd: triplet loss") {
    Rng rng(206);
    for (int it = 0; it < 20; ++it) {
        auto emb = rand_tensor({5, 3}, rng);
        const std::vector<int> labels{1, 1, 0, 0, 1};
        CHECK(max_grad_rel_err(
                  [&](const std::vector<Var>& v) { return triplet_loss(v[0], labels, 0.3); },
                  {emb}) < kTol);
    }
}

// One full Eq.7 total through a micro bundle: 8x8 images, 4-channel latents,
// finite differences on a sample of every parameter tensor.
TEST_CASE("fd: stage-1 total through a micro bundle") {
    Rng rng(207);
    auto bundle = testutil::make_micro_bundle(1, 77);
    Tensor x_s = rand_tensor({2, 3, 8, 8}, rng, 0.05, 0.95);
    std::vector<Tensor> x_t{rand_tensor({2, 3, 8, 8}, rng, 0.05, 0.95)};
    Tensor y({2, 2});
    y.at2(0, 1) = 1.0;
    y.at2(1, 0) = 1.0;
    LossWeights w;

    const double worst = testutil::stage1_fd_worst_rel_err(bundle, x_s, y, x_t, w, 208);
    CHECK(worst < kTol);
}

TEST_SUITE_END();
