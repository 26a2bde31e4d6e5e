#include "cdftn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cdftn/rng.hpp"

namespace cdftn::trainer {

namespace fs = std::filesystem;
using losses::LossBreakdown;

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::SS2ST: return "SS2ST";
        case Mode::SS2BT: return "SS2BT";
        case Mode::SS2MT: return "SS2MT";
    }
    return "?";
}

Mode mode_from_name(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), ::toupper);
    if (u == "SS2ST") return Mode::SS2ST;
    if (u == "SS2BT") return Mode::SS2BT;
    if (u == "SS2MT") return Mode::SS2MT;
    throw std::invalid_argument("unknown mode '" + s + "' (expected SS2ST, SS2BT or SS2MT)");
}

void Topology::validate() const {
    if (targets.empty()) throw std::invalid_argument("Topology: targets must be nonempty");
    for (int t : targets)
        if (t == source)
            throw std::invalid_argument("Topology: source domain cannot also be a target");
    if (mode == Mode::SS2ST && targets.size() != 1)
        throw std::invalid_argument("Topology: SS2ST requires exactly one target");
}

void StageOneConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || learning_rate <= 0.0 || beta1 <= 0.0 || beta2 <= 0.0)
        throw std::invalid_argument("StageOneConfig: all values must be positive");
    weights.validate();
}

void StageTwoConfig::validate() const {
    if (epochs < 1 || batch_size < 1 || learning_rate <= 0.0)
        throw std::invalid_argument("StageTwoConfig: all values must be positive");
    weights.validate();
}

void UnlabeledView::append(const synthdomain::DatasetHandle& d) {
    for (const auto& s : d.samples) images_.push_back(s.image);
}

Tensor UnlabeledView::batch(const std::vector<int64_t>& idx) const {
    if (idx.empty()) throw std::invalid_argument("UnlabeledView::batch: empty index list");
    const auto& first = image(idx[0]);
    const int64_t C = first.dim(0), H = first.dim(1), W = first.dim(2);
    Tensor out({static_cast<int64_t>(idx.size()), C, H, W});
    for (size_t b = 0; b < idx.size(); ++b)
        std::copy_n(image(idx[b]).data(), C * H * W,
                    out.data() + static_cast<int64_t>(b) * C * H * W);
    return out;
}

std::string CallTrace::to_string() const {
    std::ostringstream os;
    for (const auto& e : events)
        os << e.op << "(" << e.actor << "," << e.arg1 << "," << e.arg2 << ")\n";
    return os.str();
}

// ------------------------------------------------------------- Stage1Trainer

Stage1Trainer::Stage1Trainer(nets::ModelBundle& bundle, StageOneConfig cfg, Topology topo)
    : bundle_(bundle), cfg_(std::move(cfg)), topo_(std::move(topo)),
      opt_(cfg_.learning_rate, cfg_.beta1, cfg_.beta2) {
    cfg_.validate();
    topo_.validate();
    if (bundle_.n_targets() != topo_.ring_size())
        throw std::invalid_argument("Stage1Trainer: bundle has " +
                                    std::to_string(bundle_.n_targets()) +
                                    " target slots, topology needs " +
                                    std::to_string(topo_.ring_size()));
    opt_.register_params(bundle_.stage1_parameters());
}

void Stage1Trainer::check_finite(double v, const char* component) const {
    if (!std::isfinite(v))
        throw std::runtime_error(std::string("stage1_step: non-finite loss component '") +
                                 component + "'");
}

Tensor Stage1Trainer::encode_value(int slot, bool liveness, const Tensor& x, int trace_src) {
    Graph g;
    if (trace_) trace_->add(liveness ? "enc_L" : "enc_C", slot, trace_src);
    const auto& enc = liveness ? bundle_.enc_liveness(slot) : bundle_.enc_content(slot);
    return enc.encode(g, g.input(x))->value;
}

double Stage1Trainer::phase_cls(const Tensor& x_s, const Tensor& y) {
    Graph g;
    if (trace_) trace_->add("enc_L", 0, 0);
    Var zs = bundle_.enc_liveness(0).encode(g, g.input(x_s));
    if (trace_) trace_->add("cls", 0);
    auto out = bundle_.classifier_c().classify(g, zs);
    Var loss = losses::source_cls_loss(out.logits, y);
    const double v = loss->value.item();
    check_finite(v, "cls_L");
    auto set = bundle_.params_classifier_c();
    auto enc = bundle_.params_enc_liveness(0);
    set.insert(set.end(), enc.begin(), enc.end());
    Adam::zero_grad(bundle_.stage1_parameters());
    g.backward(loss);
    g.accumulate_param_grads();
    opt_.step(set);
    return v;
}

double Stage1Trainer::eq1_value(const Tensor& x_s, const std::vector<Tensor>& x_t) {
    const int N = bundle_.n_targets();
    Graph g;
    Var zs = bundle_.enc_liveness(0).encode(g, g.input(x_s));
    Var v;
    for (int i = 1; i <= N; ++i) {
        Var zt = bundle_.enc_liveness(i).encode(g, g.input(x_t[static_cast<size_t>(i - 1)]));
        Var p_s = bundle_.latent_disc(i - 1).probability(g, zs);
        Var p_t = bundle_.latent_disc(i - 1).probability(g, zt);
        Var vi = losses::liveness_adversarial_loss(p_s, p_t);
        v = v ? add(v, vi) : vi;
    }
    return v->value.item();
}

void Stage1Trainer::eq1_discriminator_step(const Tensor& x_s, const std::vector<Tensor>& x_t) {
    const int N = bundle_.n_targets();
    // latents detached: only the discriminators learn here
    Tensor zs_val = encode_value(0, true, x_s, 0);
    std::vector<Tensor> zt_val;
    for (int i = 1; i <= N; ++i)
        zt_val.push_back(encode_value(i, true, x_t[static_cast<size_t>(i - 1)], i));
    Graph g;
    Var v;
    std::vector<Parameter*> dset;
    for (int i = 1; i <= N; ++i) {
        if (trace_) trace_->add("disc_L", i, 0);
        Var p_s = bundle_.latent_disc(i - 1).probability(g, g.input(zs_val));
        if (trace_) trace_->add("disc_L", i, 1);
        Var p_t = bundle_.latent_disc(i - 1).probability(g, g.input(zt_val[static_cast<size_t>(i - 1)]));
        Var vi = losses::liveness_adversarial_loss(p_s, p_t);
        v = v ? add(v, vi) : vi;
        auto ps = bundle_.params_latent_disc(i - 1);
        dset.insert(dset.end(), ps.begin(), ps.end());
    }
    // ascent on the game value
    Var obj = mul_scalar(v, -cfg_.weights.lambda1);
    Adam::zero_grad(bundle_.stage1_parameters());
    g.backward(obj);
    g.accumulate_param_grads();
    opt_.step(dset);
}

void Stage1Trainer::eq1_encoder_step(const Tensor& x_s, const std::vector<Tensor>& x_t) {
    const int N = bundle_.n_targets();
    Graph g;
    if (trace_) trace_->add("enc_L", 0, 0);
    Var zs = bundle_.enc_liveness(0).encode(g, g.input(x_s));
    std::vector<Var> zt;
    for (int i = 1; i <= N; ++i) {
        if (trace_) trace_->add("enc_L", i, i);
        zt.push_back(bundle_.enc_liveness(i).encode(g, g.input(x_t[static_cast<size_t>(i - 1)])));
    }
    Var v;
    for (int i = 1; i <= N; ++i) {
        if (trace_) trace_->add("disc_L", i, 0);
        Var p_s = bundle_.latent_disc(i - 1).probability(g, zs);
        if (trace_) trace_->add("disc_L", i, 1);
        Var p_t = bundle_.latent_disc(i - 1).probability(g, zt[static_cast<size_t>(i - 1)]);
        Var vi = losses::liveness_adversarial_loss(p_s, p_t);
        v = v ? add(v, vi) : vi;
    }
    Var obj = mul_scalar(v, cfg_.weights.lambda1);  // encoders descend
    std::vector<Parameter*> eset;
    for (int d = 0; d <= N; ++d) {
        auto ps = bundle_.params_enc_liveness(d);
        eset.insert(eset.end(), ps.begin(), ps.end());
    }
    Adam::zero_grad(bundle_.stage1_parameters());
    g.backward(obj);
    g.accumulate_param_grads();
    opt_.step(eset);
}

losses::LossBreakdown Stage1Trainer::step(const Tensor& x_s, const Tensor& y_s_onehot,
                                          const std::vector<Tensor>& x_t) {
    if (static_cast<int>(x_t.size()) != bundle_.n_targets())
        throw std::invalid_argument("stage1_step: expected one batch per target slot");
    if (topo_.mode == Mode::SS2MT) return step_ring(x_s, y_s_onehot, x_t);
    return step_single(x_s, y_s_onehot, x_t[0]);
}

// Algorithm-1 body for the N-target ring.
losses::LossBreakdown Stage1Trainer::step_ring(const Tensor& x_s, const Tensor& y,
                                               const std::vector<Tensor>& x_t) {
    const int N = bundle_.n_targets();
    const auto& w = cfg_.weights;
    auto x_of = [&](int d) -> const Tensor& { return d == 0 ? x_s : x_t[static_cast<size_t>(d - 1)]; };

    // (b) adversarial domain adaptation
    const double v_cls = phase_cls(x_s, y);
    eq1_discriminator_step(x_s, x_t);
    // encoder descent, with the game value recorded from this graph
    double v_dl = 0.0;
    {
        Graph g;
        if (trace_) trace_->add("enc_L", 0, 0);
        Var zs = bundle_.enc_liveness(0).encode(g, g.input(x_s));
        std::vector<Var> zt;
        for (int i = 1; i <= N; ++i) {
            if (trace_) trace_->add("enc_L", i, i);
            zt.push_back(bundle_.enc_liveness(i).encode(g, g.input(x_t[static_cast<size_t>(i - 1)])));
        }
        Var v;
        for (int i = 1; i <= N; ++i) {
            if (trace_) trace_->add("disc_L", i, 0);
            Var p_s = bundle_.latent_disc(i - 1).probability(g, zs);
            if (trace_) trace_->add("disc_L", i, 1);
            Var p_t = bundle_.latent_disc(i - 1).probability(g, zt[static_cast<size_t>(i - 1)]);
            Var vi = losses::liveness_adversarial_loss(p_s, p_t);
            v = v ? add(v, vi) : vi;
        }
        v_dl = v->value.item();
        check_finite(v_dl, "D_L");
        Var obj = mul_scalar(v, w.lambda1);
        std::vector<Parameter*> eset;
        for (int d = 0; d <= N; ++d) {
            auto ps = bundle_.params_enc_liveness(d);
            eset.insert(eset.end(), ps.begin(), ps.end());
        }
        Adam::zero_grad(bundle_.stage1_parameters());
        g.backward(obj);
        g.accumulate_param_grads();
        opt_.step(eset);
    }

    // (c) image generation along the ring: liveness latents are detached,
    // content encoders and generators learn (Eq. 3 + Eq. 4)
    double v_adv = 0.0, v_re = 0.0;
    {
        std::vector<Tensor> zl_val;
        for (int d = 0; d <= N; ++d) zl_val.push_back(encode_value(d, true, x_of(d), d));
        Graph gc;
        std::vector<Var> zc, recon;
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("enc_C", d, d);
            zc.push_back(bundle_.enc_content(d).encode(gc, gc.input(x_of(d))));
        }
        Var l_re;
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("gen", d, d, d);
            recon.push_back(bundle_.generator(d).generate(gc, gc.input(zl_val[static_cast<size_t>(d)]), zc[static_cast<size_t>(d)]));
            Var term = losses::l1_reconstruction(recon.back(), gc.input(x_of(d)));
            l_re = l_re ? add(l_re, term) : term;
        }
        std::vector<Var> xhat(static_cast<size_t>(N + 1));
        if (trace_) trace_->add("gen", 0, N, 0);
        xhat[0] = bundle_.generator(0).generate(gc, gc.input(zl_val[static_cast<size_t>(N)]), zc[0]);
        for (int i = 1; i <= N; ++i) {
            if (trace_) trace_->add("gen", i, i - 1, i);
            xhat[static_cast<size_t>(i)] = bundle_.generator(i).generate(
                gc, gc.input(zl_val[static_cast<size_t>(i - 1)]), zc[static_cast<size_t>(i)]);
        }

        // discriminator ascent on Eq. 4, translated images detached
        {
            Graph gd;
            Var v;
            std::vector<Parameter*> dset;
            for (int d = 0; d <= N; ++d) {
                if (trace_) trace_->add("disc", d, 0);
                Var p_real = bundle_.image_disc(d).probability(gd, gd.input(x_of(d)));
                if (trace_) trace_->add("disc", d, 1);
                Var p_fake = bundle_.image_disc(d).probability(gd, gd.input(xhat[static_cast<size_t>(d)]->value));
                Var vd = losses::image_adversarial_loss(p_real, p_fake);
                v = v ? add(v, vd) : vd;
                auto ps = bundle_.params_image_disc(d);
                dset.insert(dset.end(), ps.begin(), ps.end());
            }
            v_adv = v->value.item();
            check_finite(v_adv, "adv_D");
            Var obj = mul_scalar(v, -w.lambda2);
            Adam::zero_grad(bundle_.stage1_parameters());
            gd.backward(obj);
            gd.accumulate_param_grads();
            opt_.step(dset);
        }

        // generator/content-encoder descent against the updated discriminators
        Var gen_adv;
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("disc", d, 1);
            Var p_fake = bundle_.image_disc(d).probability(gc, xhat[static_cast<size_t>(d)]);
            Var term = losses::generator_adversarial_loss(p_fake, cfg_.saturating_generator_loss);
            gen_adv = gen_adv ? add(gen_adv, term) : term;
        }
        v_re = l_re->value.item();
        check_finite(v_re, "re");
        Var obj = add(mul_scalar(gen_adv, w.lambda2), mul_scalar(l_re, w.lambda3));
        std::vector<Parameter*> gset;
        for (int d = 0; d <= N; ++d) {
            auto pc = bundle_.params_enc_content(d);
            auto pg = bundle_.params_generator(d);
            gset.insert(gset.end(), pc.begin(), pc.end());
            gset.insert(gset.end(), pg.begin(), pg.end());
        }
        Adam::zero_grad(bundle_.stage1_parameters());
        gc.backward(obj);
        gc.accumulate_param_grads();
        opt_.step(gset);
    }

    // (d) cycle consistency + latent reconstruction through a fresh graph,
    // every encoder and generator learns (Eq. 5 + Eq. 6)
    double v_cyc = 0.0, v_lat = 0.0;
    {
        Graph g;
        std::vector<Var> zl, zc, xhat(static_cast<size_t>(N + 1));
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("enc_L", d, d);
            zl.push_back(bundle_.enc_liveness(d).encode(g, g.input(x_of(d))));
        }
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("enc_C", d, d);
            zc.push_back(bundle_.enc_content(d).encode(g, g.input(x_of(d))));
        }
        if (trace_) trace_->add("gen", 0, N, 0);
        xhat[0] = bundle_.generator(0).generate(g, zl[static_cast<size_t>(N)], zc[0]);
        for (int i = 1; i <= N; ++i) {
            if (trace_) trace_->add("gen", i, i - 1, i);
            xhat[static_cast<size_t>(i)] = bundle_.generator(i).generate(
                g, zl[static_cast<size_t>(i - 1)], zc[static_cast<size_t>(i)]);
        }
        std::vector<Var> zl_hat, zc_hat;
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("enc_L", d, kHatCode + d);
            zl_hat.push_back(bundle_.enc_liveness(d).encode(g, xhat[static_cast<size_t>(d)]));
        }
        for (int d = 0; d <= N; ++d) {
            if (trace_) trace_->add("enc_C", d, kHatCode + d);
            zc_hat.push_back(bundle_.enc_content(d).encode(g, xhat[static_cast<size_t>(d)]));
        }
        std::vector<Var> cyc(static_cast<size_t>(N + 1));
        if (trace_) trace_->add("gen", 0, kHatCode + 1, kHatCode + 0);
        cyc[0] = bundle_.generator(0).generate(g, zl_hat[1], zc_hat[0]);
        for (int i = 1; i < N; ++i) {
            if (trace_) trace_->add("gen", i, kHatCode + i + 1, kHatCode + i);
            cyc[static_cast<size_t>(i)] = bundle_.generator(i).generate(
                g, zl_hat[static_cast<size_t>(i + 1)], zc_hat[static_cast<size_t>(i)]);
        }
        if (trace_) trace_->add("gen", N, kHatCode + 0, kHatCode + N);
        cyc[static_cast<size_t>(N)] = bundle_.generator(N).generate(g, zl_hat[0], zc_hat[static_cast<size_t>(N)]);

        Var l_cyc;
        for (int d = 0; d <= N; ++d) {
            Var term = losses::l1_reconstruction(cyc[static_cast<size_t>(d)], g.input(x_of(d)));
            l_cyc = l_cyc ? add(l_cyc, term) : term;
        }
        // liveness features must survive the translation they rode in on
        Var l_lat = losses::l1_reconstruction(zl_hat[0], zl[static_cast<size_t>(N)]);
        l_lat = add(l_lat, losses::l1_reconstruction(zl_hat[1], zl[0]));
        for (int i = 2; i <= N; ++i)
            l_lat = add(l_lat, losses::l1_reconstruction(zl_hat[static_cast<size_t>(i)],
                                                         zl[static_cast<size_t>(i - 1)]));
        v_cyc = l_cyc->value.item();
        v_lat = l_lat->value.item();
        check_finite(v_cyc, "cyc");
        check_finite(v_lat, "lat");
        Var obj = add(mul_scalar(l_cyc, w.lambda4), mul_scalar(l_lat, w.lambda5));
        std::vector<Parameter*> all;
        for (int d = 0; d <= N; ++d) {
            for (auto* p : bundle_.params_enc_liveness(d)) all.push_back(p);
            for (auto* p : bundle_.params_enc_content(d)) all.push_back(p);
            for (auto* p : bundle_.params_generator(d)) all.push_back(p);
        }
        Adam::zero_grad(bundle_.stage1_parameters());
        g.backward(obj);
        g.accumulate_param_grads();
        opt_.step(all);
    }

    return losses::make_stage1_breakdown(v_cls, v_dl, v_adv, v_re, v_cyc, v_lat, w);
}

// Dedicated single-target path, written from Eq. 1-6 directly. With one
// target the ring above must reduce to exactly this call sequence.
losses::LossBreakdown Stage1Trainer::step_single(const Tensor& x_s, const Tensor& y,
                                                 const Tensor& x_t) {
    const auto& w = cfg_.weights;

    // Eq. 2: classifier C and source liveness encoder
    const double v_cls = phase_cls(x_s, y);

    // Eq. 1: discriminator ascent then encoder descent
    eq1_discriminator_step(x_s, {x_t});
    double v_dl = 0.0;
    {
        Graph g;
        if (trace_) trace_->add("enc_L", 0, 0);
        Var zs = bundle_.enc_liveness(0).encode(g, g.input(x_s));
        if (trace_) trace_->add("enc_L", 1, 1);
        Var zt = bundle_.enc_liveness(1).encode(g, g.input(x_t));
        if (trace_) trace_->add("disc_L", 1, 0);
        Var p_s = bundle_.latent_disc(0).probability(g, zs);
        if (trace_) trace_->add("disc_L", 1, 1);
        Var p_t = bundle_.latent_disc(0).probability(g, zt);
        Var v = losses::liveness_adversarial_loss(p_s, p_t);
        v_dl = v->value.item();
        check_finite(v_dl, "D_L");
        Var obj = mul_scalar(v, w.lambda1);
        auto eset = bundle_.params_enc_liveness(0);
        auto e1 = bundle_.params_enc_liveness(1);
        eset.insert(eset.end(), e1.begin(), e1.end());
        Adam::zero_grad(bundle_.stage1_parameters());
        g.backward(obj);
        g.accumulate_param_grads();
        opt_.step(eset);
    }

    // Eq. 3 + Eq. 4: x_hat_s = G_s(z_t^L, z_s^C), x_hat_t = G_t(z_s^L, z_t^C)
    double v_adv = 0.0, v_re = 0.0;
    {
        Tensor zl_s = encode_value(0, true, x_s, 0);
        Tensor zl_t = encode_value(1, true, x_t, 1);
        Graph gc;
        if (trace_) trace_->add("enc_C", 0, 0);
        Var zc_s = bundle_.enc_content(0).encode(gc, gc.input(x_s));
        if (trace_) trace_->add("enc_C", 1, 1);
        Var zc_t = bundle_.enc_content(1).encode(gc, gc.input(x_t));
        if (trace_) trace_->add("gen", 0, 0, 0);
        Var recon_s = bundle_.generator(0).generate(gc, gc.input(zl_s), zc_s);
        Var l_re = losses::l1_reconstruction(recon_s, gc.input(x_s));
        if (trace_) trace_->add("gen", 1, 1, 1);
        Var recon_t = bundle_.generator(1).generate(gc, gc.input(zl_t), zc_t);
        l_re = add(l_re, losses::l1_reconstruction(recon_t, gc.input(x_t)));
        if (trace_) trace_->add("gen", 0, 1, 0);
        Var xhat_s = bundle_.generator(0).generate(gc, gc.input(zl_t), zc_s);
        if (trace_) trace_->add("gen", 1, 0, 1);
        Var xhat_t = bundle_.generator(1).generate(gc, gc.input(zl_s), zc_t);

        {
            Graph gd;
            if (trace_) trace_->add("disc", 0, 0);
            Var pr_s = bundle_.image_disc(0).probability(gd, gd.input(x_s));
            if (trace_) trace_->add("disc", 0, 1);
            Var pf_s = bundle_.image_disc(0).probability(gd, gd.input(xhat_s->value));
            Var v = losses::image_adversarial_loss(pr_s, pf_s);
            if (trace_) trace_->add("disc", 1, 0);
            Var pr_t = bundle_.image_disc(1).probability(gd, gd.input(x_t));
            if (trace_) trace_->add("disc", 1, 1);
            Var pf_t = bundle_.image_disc(1).probability(gd, gd.input(xhat_t->value));
            v = add(v, losses::image_adversarial_loss(pr_t, pf_t));
            v_adv = v->value.item();
            check_finite(v_adv, "adv_D");
            Var obj = mul_scalar(v, -w.lambda2);
            auto dset = bundle_.params_image_disc(0);
            auto d1 = bundle_.params_image_disc(1);
            dset.insert(dset.end(), d1.begin(), d1.end());
            Adam::zero_grad(bundle_.stage1_parameters());
            gd.backward(obj);
            gd.accumulate_param_grads();
            opt_.step(dset);
        }

        if (trace_) trace_->add("disc", 0, 1);
        Var pf_s = bundle_.image_disc(0).probability(gc, xhat_s);
        Var gen_adv = losses::generator_adversarial_loss(pf_s, cfg_.saturating_generator_loss);
        if (trace_) trace_->add("disc", 1, 1);
        Var pf_t = bundle_.image_disc(1).probability(gc, xhat_t);
        gen_adv = add(gen_adv, losses::generator_adversarial_loss(pf_t, cfg_.saturating_generator_loss));
        v_re = l_re->value.item();
        check_finite(v_re, "re");
        Var obj = add(mul_scalar(gen_adv, w.lambda2), mul_scalar(l_re, w.lambda3));
        std::vector<Parameter*> gset;
        for (int d = 0; d <= 1; ++d) {
            for (auto* p : bundle_.params_enc_content(d)) gset.push_back(p);
            for (auto* p : bundle_.params_generator(d)) gset.push_back(p);
        }
        Adam::zero_grad(bundle_.stage1_parameters());
        gc.backward(obj);
        gc.accumulate_param_grads();
        opt_.step(gset);
    }

    // Eq. 5 + Eq. 6 on a fresh forward
    double v_cyc = 0.0, v_lat = 0.0;
    {
        Graph g;
        if (trace_) trace_->add("enc_L", 0, 0);
        Var zl_s = bundle_.enc_liveness(0).encode(g, g.input(x_s));
        if (trace_) trace_->add("enc_L", 1, 1);
        Var zl_t = bundle_.enc_liveness(1).encode(g, g.input(x_t));
        if (trace_) trace_->add("enc_C", 0, 0);
        Var zc_s = bundle_.enc_content(0).encode(g, g.input(x_s));
        if (trace_) trace_->add("enc_C", 1, 1);
        Var zc_t = bundle_.enc_content(1).encode(g, g.input(x_t));
        if (trace_) trace_->add("gen", 0, 1, 0);
        Var xhat_s = bundle_.generator(0).generate(g, zl_t, zc_s);
        if (trace_) trace_->add("gen", 1, 0, 1);
        Var xhat_t = bundle_.generator(1).generate(g, zl_s, zc_t);
        if (trace_) trace_->add("enc_L", 0, kHatCode + 0);
        Var zl_hat_s = bundle_.enc_liveness(0).encode(g, xhat_s);
        if (trace_) trace_->add("enc_L", 1, kHatCode + 1);
        Var zl_hat_t = bundle_.enc_liveness(1).encode(g, xhat_t);
        if (trace_) trace_->add("enc_C", 0, kHatCode + 0);
        Var zc_hat_s = bundle_.enc_content(0).encode(g, xhat_s);
        if (trace_) trace_->add("enc_C", 1, kHatCode + 1);
        Var zc_hat_t = bundle_.enc_content(1).encode(g, xhat_t);
        if (trace_) trace_->add("gen", 0, kHatCode + 1, kHatCode + 0);
        Var cyc_s = bundle_.generator(0).generate(g, zl_hat_t, zc_hat_s);
        if (trace_) trace_->add("gen", 1, kHatCode + 0, kHatCode + 1);
        Var cyc_t = bundle_.generator(1).generate(g, zl_hat_s, zc_hat_t);

        Var l_cyc = losses::cycle_loss(cyc_s, g.input(x_s), cyc_t, g.input(x_t));
        Var l_lat = losses::latent_loss(zl_hat_s, zl_t, zl_hat_t, zl_s);
        v_cyc = l_cyc->value.item();
        v_lat = l_lat->value.item();
        check_finite(v_cyc, "cyc");
        check_finite(v_lat, "lat");
        Var obj = add(mul_scalar(l_cyc, w.lambda4), mul_scalar(l_lat, w.lambda5));
        std::vector<Parameter*> all;
        for (int d = 0; d <= 1; ++d) {
            for (auto* p : bundle_.params_enc_liveness(d)) all.push_back(p);
            for (auto* p : bundle_.params_enc_content(d)) all.push_back(p);
            for (auto* p : bundle_.params_generator(d)) all.push_back(p);
        }
        Adam::zero_grad(bundle_.stage1_parameters());
        g.backward(obj);
        g.accumulate_param_grads();
        opt_.step(all);
    }

    return losses::make_stage1_breakdown(v_cls, v_dl, v_adv, v_re, v_cyc, v_lat, w);
}

namespace {

void write_csv_rows(const std::string& path, const std::vector<LossBreakdown>& history,
                    bool truncate, int64_t first_step) {
    std::ofstream f(path, truncate ? std::ios::trunc : std::ios::app);
    if (!f) throw std::runtime_error("cannot open loss history file " + path);
    if (truncate && !history.empty()) f << history.front().csv_header() << "\n";
    for (size_t i = 0; i < history.size(); ++i)
        f << history[i].csv_row(first_step + static_cast<int64_t>(i)) << "\n";
}

}  // namespace

std::vector<LossBreakdown> Stage1Trainer::train(const synthdomain::DatasetHandle& source,
                                                const std::vector<UnlabeledView>& targets,
                                                const std::string& run_dir, int start_epoch) {
    if (std::llabs(source.live_count() - source.spoof_count()) > 1)
        throw std::invalid_argument("train_stage1: source dataset is not balanced (" +
                                    std::to_string(source.live_count()) + " live vs " +
                                    std::to_string(source.spoof_count()) + " spoof)");
    if (static_cast<int>(targets.size()) != bundle_.n_targets())
        throw std::invalid_argument("train_stage1: expected one dataset per target slot");
    int64_t max_n = source.size();
    for (const auto& t : targets) {
        if (t.size() == 0) throw std::invalid_argument("train_stage1: empty target dataset");
        max_n = std::max(max_n, t.size());
    }
    const int64_t B = cfg_.batch_size;
    const int64_t steps_per_epoch = (max_n + B - 1) / B;
    const std::string csv_path = run_dir.empty() ? "" : run_dir + "/stage1_losses.csv";
    if (!run_dir.empty()) fs::create_directories(run_dir);

    std::vector<LossBreakdown> history;
    for (int epoch = start_epoch; epoch < cfg_.epochs; ++epoch) {
        // per-epoch seeded orders; resuming at epoch k replays epochs >= k
        // exactly as an uninterrupted run would
        std::vector<int64_t> src_order(static_cast<size_t>(source.size()));
        for (size_t i = 0; i < src_order.size(); ++i) src_order[i] = static_cast<int64_t>(i);
        Rng rs(mix_seed(cfg_.seed, 0xE11, static_cast<uint64_t>(epoch)));
        rs.shuffle(src_order);
        std::vector<std::vector<int64_t>> tgt_order(targets.size());
        for (size_t t = 0; t < targets.size(); ++t) {
            tgt_order[t].resize(static_cast<size_t>(targets[t].size()));
            for (size_t i = 0; i < tgt_order[t].size(); ++i) tgt_order[t][i] = static_cast<int64_t>(i);
            Rng rt(mix_seed(cfg_.seed, 0xE12 + t, static_cast<uint64_t>(epoch)));
            rt.shuffle(tgt_order[t]);
        }
        std::vector<LossBreakdown> epoch_rows;
        for (int64_t st = 0; st < steps_per_epoch; ++st) {
            std::vector<int64_t> src_idx(static_cast<size_t>(B));
            for (int64_t j = 0; j < B; ++j)
                src_idx[static_cast<size_t>(j)] =
                    src_order[static_cast<size_t>((st * B + j) % source.size())];
            Tensor xs = synthdomain::batch_images(source, src_idx);
            Tensor ys = synthdomain::batch_onehot(source, src_idx);
            std::vector<Tensor> xt;
            for (size_t t = 0; t < targets.size(); ++t) {
                std::vector<int64_t> idx(static_cast<size_t>(B));
                for (int64_t j = 0; j < B; ++j)
                    idx[static_cast<size_t>(j)] =
                        tgt_order[t][static_cast<size_t>((st * B + j) % targets[t].size())];
                xt.push_back(targets[t].batch(idx));
            }
            epoch_rows.push_back(step(xs, ys, xt));
        }
        if (!run_dir.empty()) {
            write_csv_rows(csv_path, epoch_rows, /*truncate=*/epoch == 0,
                           static_cast<int64_t>(epoch) * steps_per_epoch);
            const std::string ckpt = run_dir + "/ckpt/epoch_" + std::to_string(epoch);
            bundle_.save(ckpt);
            opt_.save_state(ckpt + "/optimizer.bin");
        }
        history.insert(history.end(), epoch_rows.begin(), epoch_rows.end());
    }
    return history;
}

// ----------------------------------------------------------- stage 2 & eval

PseudoLabeledSet synthesize_pseudo(const nets::ModelBundle& bundle,
                                   const synthdomain::DatasetHandle& source,
                                   const std::vector<UnlabeledView>& targets,
                                   const std::vector<int>& target_ids, int multiplicity) {
    if (source.size() == 0) throw std::invalid_argument("synthesize_pseudo: empty source dataset");
    if (targets.size() != target_ids.size() ||
        static_cast<int>(targets.size()) != bundle.n_targets())
        throw std::invalid_argument("synthesize_pseudo: one view and id per target slot required");
    if (multiplicity < 1) throw std::invalid_argument("synthesize_pseudo: multiplicity must be >= 1");

    PseudoLabeledSet out;
    out.data.origin = synthdomain::Origin::synthetic;
    const int64_t n_s = source.size();
    const int64_t chunk = 16;
    for (size_t t = 0; t < targets.size(); ++t) {
        const auto& view = targets[t];
        if (view.size() == 0) throw std::invalid_argument("synthesize_pseudo: empty target dataset");
        for (int rep = 0; rep < multiplicity; ++rep) {
            for (int64_t start = 0; start < n_s; start += chunk) {
                const int64_t b = std::min(chunk, n_s - start);
                std::vector<int64_t> sidx(static_cast<size_t>(b));
                std::vector<int64_t> cidx(static_cast<size_t>(b));
                for (int64_t j = 0; j < b; ++j) {
                    sidx[static_cast<size_t>(j)] = start + j;
                    // cyclic pairing of source liveness with target content
                    cidx[static_cast<size_t>(j)] =
                        ((start + j) * multiplicity + rep) % view.size();
                }
                Graph g;
                Var zl = bundle.enc_liveness(0).encode(g, g.input(synthdomain::batch_images(source, sidx)));
                Var zc = bundle.enc_content(static_cast<int>(t) + 1)
                             .encode(g, g.input(view.batch(cidx)));
                Var xh = bundle.generator(static_cast<int>(t) + 1).generate(g, zl, zc);
                const Tensor& img = xh->value;
                const int64_t C = img.dim(1), H = img.dim(2), W = img.dim(3);
                for (int64_t j = 0; j < b; ++j) {
                    synthdomain::Sample s;
                    s.image = Tensor({C, H, W});
                    std::copy_n(img.data() + j * C * H * W, C * H * W, s.image.data());
                    s.label = source.samples[static_cast<size_t>(start + j)].label;
                    s.domain_id = target_ids[t];
                    s.sample_seed = start + j;
                    out.data.samples.push_back(std::move(s));
                    out.provenance.emplace_back(start + j, target_ids[t]);
                }
            }
        }
    }
    return out;
}

std::vector<LossBreakdown> train_classifier(nets::ImageClassifier& m,
                                            const synthdomain::DatasetHandle& data,
                                            const StageTwoConfig& cfg,
                                            const std::string& csv_path) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train_classifier: empty training set");
    const bool variant_l = m.variant() == nets::ClassifierVariant::L;
    Adam opt(cfg.learning_rate, cfg.beta1, cfg.beta2);
    opt.register_params(m.parameters());
    std::vector<LossBreakdown> history;
    const int64_t n = data.size();
    const int64_t B = cfg.batch_size;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int64_t> order(static_cast<size_t>(n));
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);
        Rng r(mix_seed(cfg.seed, 0x52a6e2, static_cast<uint64_t>(epoch)));
        r.shuffle(order);
        std::vector<LossBreakdown> epoch_rows;
        for (int64_t start = 0; start < n; start += B) {
            const int64_t b = std::min(B, n - start);
            std::vector<int64_t> idx(order.begin() + start, order.begin() + start + b);
            Tensor x = synthdomain::batch_images(data, idx);
            Tensor y = synthdomain::batch_onehot(data, idx);
            const std::vector<int> labels = synthdomain::batch_labels(data, idx);
            Graph g;
            auto out = m.classify(g, g.input(x));
            Var l_a = losses::source_cls_loss(out.logits, y);
            double v_a = l_a->value.item();
            double v_r = 0.0, v_tri = 0.0;
            Var total = mul_scalar(l_a, cfg.weights.alpha1);
            if (variant_l) {
                Var l_r = losses::spoof_cue_loss(*out.cue_map, labels);
                Var l_tri = losses::triplet_loss(*out.embedding, labels, cfg.triplet_margin);
                v_r = l_r->value.item();
                v_tri = l_tri->value.item();
                total = add(total, mul_scalar(l_r, cfg.weights.alpha2));
                total = add(total, mul_scalar(l_tri, cfg.weights.alpha3));
            }
            auto row = variant_l
                           ? losses::make_stage2_breakdown(v_a, v_r, v_tri, cfg.weights)
                           : losses::make_stage2_breakdown(
                                 v_a, 0.0, 0.0,
                                 [&] {  // R variant hard-zeroes the auxiliary weights
                                     losses::LossWeights w = cfg.weights;
                                     w.alpha2 = 0.0;
                                     w.alpha3 = 0.0;
                                     return w;
                                 }());
            for (const auto& [k, v] : row.items)
                if (!std::isfinite(v))
                    throw std::runtime_error("train_classifier: non-finite loss component '" + k +
                                             "'");
            Adam::zero_grad(m.parameters());
            g.backward(total);
            g.accumulate_param_grads();
            opt.step(m.parameters());
            epoch_rows.push_back(std::move(row));
        }
        if (!csv_path.empty())
            write_csv_rows(csv_path, epoch_rows, epoch == 0,
                           static_cast<int64_t>(history.size()));
        history.insert(history.end(), epoch_rows.begin(), epoch_rows.end());
    }
    return history;
}

std::vector<LossBreakdown> train_stage2(nets::ImageClassifier& m, const PseudoLabeledSet& pseudo,
                                        const StageTwoConfig& cfg, const std::string& csv_path) {
    if (pseudo.data.live_count() == 0 || pseudo.data.spoof_count() == 0)
        throw std::invalid_argument("train_stage2: pseudo-labeled set must contain both classes");
    return train_classifier(m, pseudo.data, cfg, csv_path);
}

std::vector<double> score_images(const nets::ImageClassifier& m,
                                 const synthdomain::DatasetHandle& ds, int batch) {
    std::vector<double> scores;
    scores.reserve(static_cast<size_t>(ds.size()));
    for (int64_t start = 0; start < ds.size(); start += batch) {
        const int64_t b = std::min<int64_t>(batch, ds.size() - start);
        std::vector<int64_t> idx(static_cast<size_t>(b));
        for (int64_t j = 0; j < b; ++j) idx[static_cast<size_t>(j)] = start + j;
        Graph g;
        auto out = m.classify(g, g.input(synthdomain::batch_images(ds, idx)));
        Tensor probs = softmax_rows(out.logits->value);
        for (int64_t j = 0; j < b; ++j) scores.push_back(probs.at2(j, 1));
    }
    return scores;
}

Tensor liveness_latents(const nets::ModelBundle& bundle, int slot,
                        const std::vector<Tensor>& images) {
    if (images.empty()) throw std::invalid_argument("liveness_latents: no images");
    const int64_t C = images[0].dim(0), H = images[0].dim(1), W = images[0].dim(2);
    const int64_t n = static_cast<int64_t>(images.size());
    Tensor flat;
    const int64_t chunk = 32;
    std::vector<double> out;
    int64_t d_flat = 0;
    for (int64_t start = 0; start < n; start += chunk) {
        const int64_t b = std::min(chunk, n - start);
        Tensor x({b, C, H, W});
        for (int64_t j = 0; j < b; ++j)
            std::copy_n(images[static_cast<size_t>(start + j)].data(), C * H * W,
                        x.data() + j * C * H * W);
        Graph g;
        Var z = bundle.enc_liveness(slot).encode(g, g.input(x));
        d_flat = z->value.numel() / b;
        for (int64_t i = 0; i < z->value.numel(); ++i) out.push_back(z->value[i]);
    }
    return Tensor({n, d_flat}, std::move(out));
}

}  // namespace cdftn::trainer
