#include "cdftn/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cdftn::losses {

void LossWeights::validate() const {
    const double all[] = {lambda1, lambda2, lambda3, lambda4, lambda5, alpha1, alpha2, alpha3};
    for (double v : all)
        if (!std::isfinite(v) || v < 0.0)
            throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
}

double LossBreakdown::get(const std::string& name) const {
    for (const auto& [k, v] : items)
        if (k == name) return v;
    throw std::invalid_argument("LossBreakdown: no component '" + name + "'");
}

std::string LossBreakdown::csv_header() const {
    std::string s = "step";
    for (const auto& [k, v] : items) s += "," + k;
    return s + ",total";
}

std::string LossBreakdown::csv_row(int64_t step) const {
    std::ostringstream os;
    os.precision(17);
    os << step;
    for (const auto& [k, v] : items) os << "," << v;
    os << "," << total;
    return os.str();
}

namespace {

Var clamped_prob(const Var& p) { return clamp_(p, kProbEps, 1.0 - kProbEps); }

void check_nonempty(const Var& p, const char* who) {
    if (p->value.numel() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
}

Var mean_log(const Var& p) { return mean_all(log_(clamped_prob(p))); }

}  // namespace

Var liveness_adversarial_loss(const Var& p_source, const Var& p_target) {
    check_nonempty(p_source, "liveness_adversarial_loss");
    check_nonempty(p_target, "liveness_adversarial_loss");
    return add(mean_log(p_source), mean_log(rsub_scalar(1.0, p_target)));
}

Var source_cls_loss(const Var& logits, const Tensor& labels_onehot) {
    const auto& s = labels_onehot.shape();
    if (s.size() != 2) throw std::invalid_argument("source_cls_loss: labels must be [B,K]");
    for (int64_t b = 0; b < s[0]; ++b) {
        double sum = 0.0;
        bool binary = true;
        for (int64_t k = 0; k < s[1]; ++k) {
            const double y = labels_onehot.at2(b, k);
            if (y != 0.0 && y != 1.0) binary = false;
            sum += y;
        }
        if (!binary || sum != 1.0)
            throw std::invalid_argument("source_cls_loss: row " + std::to_string(b) +
                                        " is not one-hot");
    }
    return cross_entropy_with_logits(logits, labels_onehot);
}

Var l1_reconstruction(const Var& x_hat, const Var& x) {
    if (!x_hat->value.same_shape(x->value))
        throw std::invalid_argument("l1_reconstruction: shape mismatch " +
                                    x_hat->value.shape_str() + " vs " + x->value.shape_str());
    return mean_all(abs_(sub(x_hat, x)));
}

Var image_adversarial_loss(const Var& p_real, const Var& p_fake) {
    check_nonempty(p_real, "image_adversarial_loss");
    check_nonempty(p_fake, "image_adversarial_loss");
    return add(mean_log(p_real), mean_log(rsub_scalar(1.0, p_fake)));
}

Var generator_adversarial_loss(const Var& p_fake, bool saturating) {
    check_nonempty(p_fake, "generator_adversarial_loss");
    if (saturating) return mean_log(rsub_scalar(1.0, p_fake));
    return neg(mean_log(p_fake));
}

Var cycle_loss(const Var& x_cyc_s, const Var& x_s, const Var& x_cyc_t, const Var& x_t) {
    return add(l1_reconstruction(x_cyc_s, x_s), l1_reconstruction(x_cyc_t, x_t));
}

Var latent_loss(const Var& zL_of_xhat_s, const Var& zL_of_x_t, const Var& zL_of_xhat_t,
                const Var& zL_of_x_s) {
    return add(l1_reconstruction(zL_of_xhat_s, zL_of_x_t),
               l1_reconstruction(zL_of_xhat_t, zL_of_x_s));
}

double stage1_total(const std::map<std::string, double>& components, const LossWeights& w) {
    w.validate();
    const char* names[] = {"cls_L", "D_L", "adv_D", "re", "cyc", "lat"};
    for (const char* n : names)
        if (!components.count(n))
            throw std::invalid_argument(std::string("stage1_total: missing component '") + n +
                                        "'");
    return components.at("cls_L") + w.lambda1 * components.at("D_L") +
           w.lambda2 * components.at("adv_D") + w.lambda3 * components.at("re") +
           w.lambda4 * components.at("cyc") + w.lambda5 * components.at("lat");
}

LossBreakdown make_stage1_breakdown(double cls_L, double D_L, double adv_D, double re, double cyc,
                                    double lat, const LossWeights& w) {
    LossBreakdown b;
    b.items = {{"cls_L", cls_L}, {"D_L", D_L}, {"adv_D", adv_D},
               {"re", re},       {"cyc", cyc}, {"lat", lat}};
    b.total = stage1_total({b.items.begin(), b.items.end()}, w);
    return b;
}

Var spoof_cue_loss(const Var& cue_map, const std::vector<int>& labels) {
    const int64_t B = cue_map->value.dim(0);
    if (static_cast<int64_t>(labels.size()) != B)
        throw std::invalid_argument("spoof_cue_loss: label count != batch");
    int64_t n_live = 0;
    for (int l : labels) n_live += (l == 1);
    if (n_live == 0) return constant(Tensor::scalar(0.0));
    const int64_t per = cue_map->value.numel() / B;
    std::vector<double> w(static_cast<size_t>(B), 0.0);
    for (int64_t b = 0; b < B; ++b)
        if (labels[static_cast<size_t>(b)] == 1)
            w[static_cast<size_t>(b)] = 1.0 / static_cast<double>(n_live * per);
    return batch_weighted_sum(abs_(cue_map), std::move(w));
}

Var triplet_loss(const Var& embeddings, const std::vector<int>& labels, double margin) {
    return triplet_margin_batch_all(embeddings, labels, margin);
}

double stage2_total(double l_a, double l_r, double l_tri, const LossWeights& w) {
    w.validate();
    return w.alpha1 * l_a + w.alpha2 * l_r + w.alpha3 * l_tri;
}

LossBreakdown make_stage2_breakdown(double l_a, double l_r, double l_tri, const LossWeights& w) {
    LossBreakdown b;
    b.items = {{"a", l_a}, {"r", l_r}, {"tri", l_tri}};
    b.total = stage2_total(l_a, l_r, l_tri, w);
    return b;
}

double value_of(const Var& v) { return v->value.item(); }

}  // namespace cdftn::losses
