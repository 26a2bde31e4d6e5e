#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cdftn/autodiff.hpp"
#include "cdftn/rng.hpp"
#include "cdftn/tensor.hpp"

namespace cdftn {

// Snaps a value to the nearest float32. Parameters live on the float32 grid
// so the float32 checkpoint payload round-trips bit-exactly.
inline double to_f32_grid(double v) { return static_cast<double>(static_cast<float>(v)); }
void quantize_f32(Tensor& t);

// Base for anything that owns parameters.
class Module {
public:
    virtual ~Module() = default;

    // Parameters in a fixed, construction-determined order.
    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> out;
        collect(out);
        return out;
    }
    virtual void collect(std::vector<Parameter*>& out) = 0;

    int64_t parameter_count() {
        int64_t n = 0;
        for (auto* p : parameters()) n += p->value.numel();
        return n;
    }
};

class Conv2d : public Module {
public:
    Conv2d(std::string name, int64_t in_ch, int64_t out_ch, int64_t k, int stride, int pad,
           Rng& rng);
    Var forward(Graph& g, const Var& x) {
        return conv2d(x, g.leaf(w_), g.leaf(b_), stride_, pad_);
    }
    void collect(std::vector<Parameter*>& out) override {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    Parameter w_, b_;
    int stride_, pad_;
};

class InstanceNorm2d : public Module {
public:
    InstanceNorm2d(std::string name, int64_t ch);
    Var forward(Graph& g, const Var& x) { return instance_norm(x, g.leaf(gamma_), g.leaf(beta_)); }
    void collect(std::vector<Parameter*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    Parameter gamma_, beta_;
};

class Linear : public Module {
public:
    Linear(std::string name, int64_t in_f, int64_t out_f, Rng& rng);
    Var forward(Graph& g, const Var& x) { return linear(x, g.leaf(w_), g.leaf(b_)); }
    void collect(std::vector<Parameter*>& out) override {
        out.push_back(&w_);
        out.push_back(&b_);
    }

private:
    Parameter w_, b_;
};

// conv -> instance norm -> leaky relu
class ConvINLReLU : public Module {
public:
    ConvINLReLU(const std::string& name, int64_t in_ch, int64_t out_ch, int64_t k, int stride,
                int pad, Rng& rng, double slope = 0.2)
        : conv_(name + ".conv", in_ch, out_ch, k, stride, pad, rng),
          norm_(name + ".norm", out_ch),
          slope_(slope) {}
    Var forward(Graph& g, const Var& x) {
        return leaky_relu(norm_.forward(g, conv_.forward(g, x)), slope_);
    }
    void collect(std::vector<Parameter*>& out) override {
        conv_.collect(out);
        norm_.collect(out);
    }

private:
    Conv2d conv_;
    InstanceNorm2d norm_;
    double slope_;
};

// two 3x3 convs with instance norm and an identity skip
class ResidualBlock : public Module {
public:
    ResidualBlock(const std::string& name, int64_t ch, Rng& rng, bool use_norm = true);
    Var forward(Graph& g, const Var& x);
    void collect(std::vector<Parameter*>& out) override;

private:
    Conv2d c1_, c2_;
    std::unique_ptr<InstanceNorm2d> n1_, n2_;
};

// Adam with one state slot per parameter, shared by every phase that updates
// that parameter.
class Adam {
public:
    Adam(double lr, double beta1, double beta2, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    void register_params(const std::vector<Parameter*>& ps) {
        for (auto* p : ps) state_.emplace_back(p);
    }

    // Applies one Adam update to every parameter in `subset` from its
    // accumulated .grad, then re-snaps values to the float32 grid.
    void step(const std::vector<Parameter*>& subset);
    static void zero_grad(const std::vector<Parameter*>& ps) {
        for (auto* p : ps) p->zero_grad();
    }

    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

    void save_state(const std::string& path) const;
    bool load_state(const std::string& path);

private:
    struct Slot {
        Parameter* p;
        Tensor m, v;
        int64_t t = 0;
        explicit Slot(Parameter* pp) : p(pp), m(pp->value.shape()), v(pp->value.shape()) {}
    };
    Slot* find(Parameter* p);
    double lr_, b1_, b2_, eps_;
    std::vector<Slot> state_;
};

}  // namespace cdftn
