#include "cdftn/nn.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cdftn {

void quantize_f32(Tensor& t) {
    for (auto& v : t.vec()) v = to_f32_grid(v);
}

namespace {

Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t.vec()) v = to_f32_grid(std * rng.normal());
    return t;
}

}  // namespace

Conv2d::Conv2d(std::string name, int64_t in_ch, int64_t out_ch, int64_t k, int stride, int pad,
               Rng& rng)
    : w_(name + ".w", he_normal({out_ch, in_ch, k, k}, in_ch * k * k, rng)),
      b_(name + ".b", Tensor({out_ch})),
      stride_(stride),
      pad_(pad) {}

InstanceNorm2d::InstanceNorm2d(std::string name, int64_t ch)
    : gamma_(name + ".gamma", Tensor::full({ch}, 1.0)), beta_(name + ".beta", Tensor({ch})) {}

Linear::Linear(std::string name, int64_t in_f, int64_t out_f, Rng& rng)
    : w_(name + ".w", he_normal({out_f, in_f}, in_f, rng)), b_(name + ".b", Tensor({out_f})) {}

ResidualBlock::ResidualBlock(const std::string& name, int64_t ch, Rng& rng, bool use_norm)
    : c1_(name + ".c1", ch, ch, 3, 1, 1, rng), c2_(name + ".c2", ch, ch, 3, 1, 1, rng) {
    if (use_norm) {
        n1_ = std::make_unique<InstanceNorm2d>(name + ".n1", ch);
        n2_ = std::make_unique<InstanceNorm2d>(name + ".n2", ch);
    }
}

Var ResidualBlock::forward(Graph& g, const Var& x) {
    Var h = c1_.forward(g, x);
    if (n1_) h = n1_->forward(g, h);
    h = leaky_relu(h, 0.2);
    h = c2_.forward(g, h);
    if (n2_) h = n2_->forward(g, h);
    return leaky_relu(add(h, x), 0.2);
}

void ResidualBlock::collect(std::vector<Parameter*>& out) {
    c1_.collect(out);
    if (n1_) n1_->collect(out);
    c2_.collect(out);
    if (n2_) n2_->collect(out);
}

Adam::Slot* Adam::find(Parameter* p) {
    for (auto& s : state_)
        if (s.p == p) return &s;
    return nullptr;
}

void Adam::step(const std::vector<Parameter*>& subset) {
    for (auto* p : subset) {
        Slot* s = find(p);
        if (!s) throw std::logic_error("Adam::step: unregistered parameter " + p->name);
        s->t += 1;
        const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(s->t));
        const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(s->t));
        const int64_t n = p->value.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double gr = p->grad[i];
            s->m[i] = b1_ * s->m[i] + (1.0 - b1_) * gr;
            s->v[i] = b2_ * s->v[i] + (1.0 - b2_) * gr * gr;
            const double mhat = s->m[i] / bc1;
            const double vhat = s->v[i] / bc2;
            p->value[i] = to_f32_grid(p->value[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
        }
    }
}

void Adam::save_state(const std::string& path) const {
    FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("Adam::save_state: cannot open " + path);
    const uint64_t count = state_.size();
    std::fwrite(&count, sizeof(count), 1, f);
    for (const auto& s : state_) {
        const uint64_t n = static_cast<uint64_t>(s.m.numel());
        std::fwrite(&n, sizeof(n), 1, f);
        std::fwrite(&s.t, sizeof(s.t), 1, f);
        std::fwrite(s.m.data(), sizeof(double), n, f);
        std::fwrite(s.v.data(), sizeof(double), n, f);
    }
    std::fclose(f);
}

bool Adam::load_state(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return false;
    uint64_t count = 0;
    if (std::fread(&count, sizeof(count), 1, f) != 1 || count != state_.size()) {
        std::fclose(f);
        return false;
    }
    for (auto& s : state_) {
        uint64_t n = 0;
        if (std::fread(&n, sizeof(n), 1, f) != 1 || n != static_cast<uint64_t>(s.m.numel())) {
            std::fclose(f);
            return false;
        }
        if (std::fread(&s.t, sizeof(s.t), 1, f) != 1 ||
            std::fread(s.m.data(), sizeof(double), n, f) != n ||
            std::fread(s.v.data(), sizeof(double), n, f) != n) {
            std::fclose(f);
            return false;
        }
    }
    std::fclose(f);
    return true;
}

}  // namespace cdftn
