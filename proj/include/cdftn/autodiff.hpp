#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "cdftn/tensor.hpp"

namespace cdftn {

struct Parameter;
struct Node;
using Var = std::shared_ptr<Node>;

// One node of the dynamically built computation graph.
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first use
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::function<void(Node&)> backward_fn;  // scatter node.grad into inputs
    Parameter* param = nullptr;              // set for parameter leaves

    Tensor& ensure_grad() {
        if (grad.empty()) grad = Tensor(value.shape());
        return grad;
    }
};

// A trainable tensor with persistent gradient and identity.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape());
    }
    void zero_grad() {
        for (auto& g : grad.vec()) g = 0.0;
    }
};

// Per-forward-pass graph context. Caches one leaf per parameter so that a
// module used twice in the same graph accumulates both gradient paths.
class Graph {
public:
    Var leaf(Parameter& p);
    Var input(Tensor x);       // constant leaf, no gradient
    Var input_grad(Tensor x);  // differentiable leaf (used by gradient tests)

    // Reverse-mode sweep from a scalar root; fills node grads.
    void backward(const Var& root);

    // Adds each bound parameter leaf's gradient into Parameter::grad.
    void accumulate_param_grads();

private:
    std::unordered_map<Parameter*, Var> param_leaves_;
    std::vector<std::pair<Parameter*, Var>> bound_;  // deterministic order
};

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);
Var constant(Tensor x);  // non-differentiable leaf
Var variable(Tensor x);  // differentiable leaf (not bound to a Parameter)

// ---- elementwise / arithmetic ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var mul_scalar(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var rsub_scalar(double s, const Var& a);  // s - a
Var abs_(const Var& a);
Var log_(const Var& a);
Var clamp_(const Var& a, double lo, double hi);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var tanh_(const Var& a);
Var sigmoid_(const Var& a);

// ---- reductions ----
Var mean_all(const Var& a);                                // -> [1]
Var mean_per_sample(const Var& a);                         // [B,...] -> [B]
Var batch_weighted_sum(const Var& a, std::vector<double> w);  // sum_b w_b * sum(a_b) -> [1]

// ---- structure ----
Var concat_channels(const Var& a, const Var& b);  // [B,Ca,H,W]+[B,Cb,H,W]
Var upsample_nearest2(const Var& a);
Var global_avg_pool(const Var& a);  // [B,C,H,W] -> [B,C]

// ---- layers ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var linear(const Var& x, const Var& w, const Var& b);  // w: [out,in], b: [out]
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// ---- classification ----
// Mean over batch of -sum_k y[k] * log softmax(logits)[k].
Var cross_entropy_with_logits(const Var& logits, const Tensor& onehot);

// Batch-all triplet margin loss over an embedding batch; labels binary.
// Returns 0 when the batch has no valid (anchor,positive,negative) triplet.
Var triplet_margin_batch_all(const Var& emb, const std::vector<int>& labels, double margin);

// plain-value softmax rows (no autodiff), for scoring
Tensor softmax_rows(const Tensor& logits);

}  // namespace cdftn
