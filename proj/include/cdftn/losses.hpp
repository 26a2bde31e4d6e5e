#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdftn/autodiff.hpp"

namespace cdftn::losses {

// Probabilities are clamped into [kProbEps, 1-kProbEps] before any log.
inline constexpr double kProbEps = 1e-7;

struct LossWeights {
    double lambda1 = 1.0;   // liveness-domain adversarial
    double lambda2 = 1.0;   // image adversarial
    double lambda3 = 10.0;  // self-reconstruction
    double lambda4 = 10.0;  // cycle consistency
    double lambda5 = 10.0;  // latent reconstruction
    double alpha1 = 1.0;    // stage-2 classification
    double alpha2 = 1.0;    // stage-2 spoof cue
    double alpha3 = 1.0;    // stage-2 triplet

    void validate() const;
};

// Named per-component values plus the weighted total, one row per step.
struct LossBreakdown {
    std::vector<std::pair<std::string, double>> items;
    double total = 0.0;

    double get(const std::string& name) const;
    std::string csv_header() const;  // "step,<components...>,total"
    std::string csv_row(int64_t step) const;
    bool operator==(const LossBreakdown& o) const { return items == o.items && total == o.total; }
};

// ---- stage-1 objectives ------------------------------------------------
// Value of the liveness-domain minimax game: the discriminator ascends it,
// the encoders descend it.
Var liveness_adversarial_loss(const Var& p_source, const Var& p_target);

// Mean cross entropy of classifier C on source liveness features.
Var source_cls_loss(const Var& logits, const Tensor& labels_onehot);

// Mean absolute deviation over all elements.
Var l1_reconstruction(const Var& x_hat, const Var& x);

// Value of the image-level minimax game (one real/fake pair).
Var image_adversarial_loss(const Var& p_real, const Var& p_fake);

// Generator-side surrogate for the image game. Non-saturating form
// -mean(log p_fake) by default; the saturating form mean(log(1-p_fake))
// is kept for fidelity experiments.
Var generator_adversarial_loss(const Var& p_fake, bool saturating = false);

Var cycle_loss(const Var& x_cyc_s, const Var& x_s, const Var& x_cyc_t, const Var& x_t);

// Eq-6 pairing: E^L_s(x_hat_s) with E^L_t(x_t), E^L_t(x_hat_t) with E^L_s(x_s).
Var latent_loss(const Var& zL_of_xhat_s, const Var& zL_of_x_t, const Var& zL_of_xhat_t,
                const Var& zL_of_x_s);

// Weighted Eq-7 total. Pure arithmetic: the minimax split is the trainer's
// job. Components must contain exactly the six stage-1 names.
double stage1_total(const std::map<std::string, double>& components, const LossWeights& w);
LossBreakdown make_stage1_breakdown(double cls_L, double D_L, double adv_D, double re, double cyc,
                                    double lat, const LossWeights& w);

// ---- stage-2 objectives ------------------------------------------------
// Mean |cue| over live samples only; zero when the batch has no live sample.
Var spoof_cue_loss(const Var& cue_map, const std::vector<int>& labels);

// Batch-all triplet margin loss; zero when no valid triplet exists.
Var triplet_loss(const Var& embeddings, const std::vector<int>& labels, double margin);

double stage2_total(double l_a, double l_r, double l_tri, const LossWeights& w);
LossBreakdown make_stage2_breakdown(double l_a, double l_r, double l_tri, const LossWeights& w);

// scalar-value conveniences (graph-free), used by diagnostics and tests
double value_of(const Var& v);

}  // namespace cdftn::losses
