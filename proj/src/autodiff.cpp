#include "cdftn/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cdftn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

Var make_node(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    n->backward_fn = std::move(backward_fn);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    return n;
}

Var Graph::leaf(Parameter& p) {
    auto it = param_leaves_.find(&p);
    if (it != param_leaves_.end()) return it->second;
    auto n = std::make_shared<Node>();
    n->value = p.value;
    n->requires_grad = true;
    n->param = &p;
    param_leaves_.emplace(&p, n);
    bound_.emplace_back(&p, n);
    return n;
}

Var constant(Tensor x) {
    auto n = std::make_shared<Node>();
    n->value = std::move(x);
    n->requires_grad = false;
    return n;
}

Var variable(Tensor x) {
    auto n = std::make_shared<Node>();
    n->value = std::move(x);
    n->requires_grad = true;
    return n;
}

Var Graph::input(Tensor x) { return constant(std::move(x)); }

Var Graph::input_grad(Tensor x) { return variable(std::move(x)); }

void Graph::backward(const Var& root) {
    if (root->value.numel() != 1)
        throw std::logic_error("Graph::backward: root must be scalar");
    // iterative post-order DFS
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->inputs.size()) {
            Node* child = n->inputs[idx].get();
            ++idx;
            if (child->requires_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root->ensure_grad()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

void Graph::accumulate_param_grads() {
    for (auto& [p, leaf] : bound_) {
        if (leaf->grad.empty()) continue;
        double* dst = p->grad.data();
        const double* src = leaf->grad.data();
        const int64_t n = p->grad.numel();
        for (int64_t i = 0; i < n; ++i) dst[i] += src[i];
    }
}

namespace {

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->value.shape_str() +
                                    " vs " + b->value.shape_str());
}

void axpy(Tensor& dst, const Tensor& src, double s = 1.0) {
    double* d = dst.data();
    const double* x = src.data();
    const int64_t n = dst.numel();
    for (int64_t i = 0; i < n; ++i) d[i] += s * x[i];
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out = a->value;
    axpy(out, b->value);
    return make_node(std::move(out), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->ensure_grad(), n.grad);
        if (n.inputs[1]->requires_grad) axpy(n.inputs[1]->ensure_grad(), n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out = a->value;
    axpy(out, b->value, -1.0);
    return make_node(std::move(out), {a, b}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->ensure_grad(), n.grad);
        if (n.inputs[1]->requires_grad) axpy(n.inputs[1]->ensure_grad(), n.grad, -1.0);
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a->value[i] * b->value[i];
    return make_node(std::move(out), {a, b}, [](Node& n) {
        const int64_t m = n.value.numel();
        if (n.inputs[0]->requires_grad) {
            Tensor& g = n.inputs[0]->ensure_grad();
            for (int64_t i = 0; i < m; ++i) g[i] += n.grad[i] * n.inputs[1]->value[i];
        }
        if (n.inputs[1]->requires_grad) {
            Tensor& g = n.inputs[1]->ensure_grad();
            for (int64_t i = 0; i < m; ++i) g[i] += n.grad[i] * n.inputs[0]->value[i];
        }
    });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var mul_scalar(const Var& a, double s) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
    return make_node(std::move(out), {a}, [s](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->ensure_grad(), n.grad, s);
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
    return make_node(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->ensure_grad(), n.grad);
    });
}

Var rsub_scalar(double s, const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = s - a->value[i];
    return make_node(std::move(out), {a}, [](Node& n) {
        if (n.inputs[0]->requires_grad) axpy(n.inputs[0]->ensure_grad(), n.grad, -1.0);
    });
}

Var abs_(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::fabs(a->value[i]);
    return make_node(std::move(out), {a}, [](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const Tensor& x = n.inputs[0]->value;
        for (int64_t i = 0; i < n.value.numel(); ++i)
            g[i] += n.grad[i] * (x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0));
    });
}

Var log_(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(a->value[i]);
    return make_node(std::move(out), {a}, [](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const Tensor& x = n.inputs[0]->value;
        for (int64_t i = 0; i < n.value.numel(); ++i) g[i] += n.grad[i] / x[i];
    });
}

Var clamp_(const Var& a, double lo, double hi) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::min(hi, std::max(lo, a->value[i]));
    return make_node(std::move(out), {a}, [lo, hi](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const Tensor& x = n.inputs[0]->value;
        for (int64_t i = 0; i < n.value.numel(); ++i)
            if (x[i] > lo && x[i] < hi) g[i] += n.grad[i];
    });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double x = a->value[i];
        out[i] = x > 0.0 ? x : slope * x;
    }
    return make_node(std::move(out), {a}, [slope](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const Tensor& x = n.inputs[0]->value;
        for (int64_t i = 0; i < n.value.numel(); ++i)
            g[i] += n.grad[i] * (x[i] > 0.0 ? 1.0 : slope);
    });
}

Var tanh_(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->value[i]);
    return make_node(std::move(out), {a}, [](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i)
            g[i] += n.grad[i] * (1.0 - n.value[i] * n.value[i]);
    });
}

Var sigmoid_(const Var& a) {
    Tensor out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->value[i]));
    return make_node(std::move(out), {a}, [](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t i = 0; i < n.value.numel(); ++i)
            g[i] += n.grad[i] * n.value[i] * (1.0 - n.value[i]);
    });
}

Var mean_all(const Var& a) {
    const int64_t n = a->value.numel();
    if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += a->value[i];
    return make_node(Tensor::scalar(s / static_cast<double>(n)), {a}, [n](Node& nd) {
        if (!nd.inputs[0]->requires_grad) return;
        Tensor& g = nd.inputs[0]->ensure_grad();
        const double d = nd.grad[0] / static_cast<double>(n);
        for (int64_t i = 0; i < n; ++i) g[i] += d;
    });
}

Var mean_per_sample(const Var& a) {
    const int64_t B = a->value.dim(0);
    const int64_t per = a->value.numel() / B;
    Tensor out({B});
    for (int64_t b = 0; b < B; ++b) {
        double s = 0.0;
        const double* p = a->value.data() + b * per;
        for (int64_t i = 0; i < per; ++i) s += p[i];
        out[b] = s / static_cast<double>(per);
    }
    return make_node(std::move(out), {a}, [B, per](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t b = 0; b < B; ++b) {
            const double d = n.grad[b] / static_cast<double>(per);
            double* p = g.data() + b * per;
            for (int64_t i = 0; i < per; ++i) p[i] += d;
        }
    });
}

Var batch_weighted_sum(const Var& a, std::vector<double> w) {
    const int64_t B = a->value.dim(0);
    if (static_cast<int64_t>(w.size()) != B)
        throw std::invalid_argument("batch_weighted_sum: weight count != batch");
    const int64_t per = a->value.numel() / B;
    double s = 0.0;
    for (int64_t b = 0; b < B; ++b) {
        double t = 0.0;
        const double* p = a->value.data() + b * per;
        for (int64_t i = 0; i < per; ++i) t += p[i];
        s += w[static_cast<size_t>(b)] * t;
    }
    return make_node(Tensor::scalar(s), {a}, [B, per, w = std::move(w)](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t b = 0; b < B; ++b) {
            const double d = n.grad[0] * w[static_cast<size_t>(b)];
            double* p = g.data() + b * per;
            for (int64_t i = 0; i < per; ++i) p[i] += d;
        }
    });
}

Var concat_channels(const Var& a, const Var& b) {
    const auto& sa = a->value.shape();
    const auto& sb = b->value.shape();
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3])
        throw std::invalid_argument("concat_channels: incompatible shapes " +
                                    a->value.shape_str() + " vs " + b->value.shape_str());
    const int64_t B = sa[0], Ca = sa[1], Cb = sb[1], H = sa[2], W = sa[3];
    Tensor out({B, Ca + Cb, H, W});
    const int64_t plane = H * W;
    for (int64_t bi = 0; bi < B; ++bi) {
        std::copy_n(a->value.data() + bi * Ca * plane, Ca * plane,
                    out.data() + bi * (Ca + Cb) * plane);
        std::copy_n(b->value.data() + bi * Cb * plane, Cb * plane,
                    out.data() + (bi * (Ca + Cb) + Ca) * plane);
    }
    return make_node(std::move(out), {a, b}, [B, Ca, Cb, plane](Node& n) {
        for (int64_t bi = 0; bi < B; ++bi) {
            if (n.inputs[0]->requires_grad) {
                double* g = n.inputs[0]->ensure_grad().data() + bi * Ca * plane;
                const double* s = n.grad.data() + bi * (Ca + Cb) * plane;
                for (int64_t i = 0; i < Ca * plane; ++i) g[i] += s[i];
            }
            if (n.inputs[1]->requires_grad) {
                double* g = n.inputs[1]->ensure_grad().data() + bi * Cb * plane;
                const double* s = n.grad.data() + (bi * (Ca + Cb) + Ca) * plane;
                for (int64_t i = 0; i < Cb * plane; ++i) g[i] += s[i];
            }
        }
    });
}

Var upsample_nearest2(const Var& a) {
    const auto& s = a->value.shape();
    const int64_t B = s[0], C = s[1], H = s[2], W = s[3];
    Tensor out({B, C, H * 2, W * 2});
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* src = a->value.data() + bc * H * W;
        double* dst = out.data() + bc * 4 * H * W;
        for (int64_t h = 0; h < H; ++h)
            for (int64_t w = 0; w < W; ++w) {
                const double v = src[h * W + w];
                double* d = dst + (2 * h) * (2 * W) + 2 * w;
                d[0] = v;
                d[1] = v;
                d[2 * W] = v;
                d[2 * W + 1] = v;
            }
    }
    return make_node(std::move(out), {a}, [B, C, H, W](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t bc = 0; bc < B * C; ++bc) {
            double* dst = g.data() + bc * H * W;
            const double* src = n.grad.data() + bc * 4 * H * W;
            for (int64_t h = 0; h < H; ++h)
                for (int64_t w = 0; w < W; ++w) {
                    const double* s2 = src + (2 * h) * (2 * W) + 2 * w;
                    dst[h * W + w] += s2[0] + s2[1] + s2[2 * W] + s2[2 * W + 1];
                }
        }
    });
}

Var global_avg_pool(const Var& a) {
    const auto& s = a->value.shape();
    const int64_t B = s[0], C = s[1], plane = s[2] * s[3];
    Tensor out({B, C});
    for (int64_t bc = 0; bc < B * C; ++bc) {
        double t = 0.0;
        const double* p = a->value.data() + bc * plane;
        for (int64_t i = 0; i < plane; ++i) t += p[i];
        out[bc] = t / static_cast<double>(plane);
    }
    return make_node(std::move(out), {a}, [B, C, plane](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const double d = n.grad[bc] / static_cast<double>(plane);
            double* p = g.data() + bc * plane;
            for (int64_t i = 0; i < plane; ++i) p[i] += d;
        }
    });
}

namespace {

struct ConvDims {
    int64_t B, Cin, H, W, Cout, kH, kW, oH, oW;
    int stride, pad;
};

void im2col(const double* x, const ConvDims& d, int64_t b, double* col) {
    // col layout: [Cin*kH*kW, oH*oW] row-major
    const int64_t oHW = d.oH * d.oW;
    for (int64_t c = 0; c < d.Cin; ++c) {
        const double* xc = x + (b * d.Cin + c) * d.H * d.W;
        for (int64_t ki = 0; ki < d.kH; ++ki)
            for (int64_t kj = 0; kj < d.kW; ++kj) {
                double* row = col + ((c * d.kH + ki) * d.kW + kj) * oHW;
                for (int64_t oh = 0; oh < d.oH; ++oh) {
                    const int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.H) {
                        std::fill_n(row + oh * d.oW, d.oW, 0.0);
                        continue;
                    }
                    const double* xr = xc + ih * d.W;
                    double* rr = row + oh * d.oW;
                    for (int64_t ow = 0; ow < d.oW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kj;
                        rr[ow] = (iw >= 0 && iw < d.W) ? xr[iw] : 0.0;
                    }
                }
            }
    }
}

void col2im_add(const double* col, const ConvDims& d, int64_t b, double* gx) {
    const int64_t oHW = d.oH * d.oW;
    for (int64_t c = 0; c < d.Cin; ++c) {
        double* xc = gx + (b * d.Cin + c) * d.H * d.W;
        for (int64_t ki = 0; ki < d.kH; ++ki)
            for (int64_t kj = 0; kj < d.kW; ++kj) {
                const double* row = col + ((c * d.kH + ki) * d.kW + kj) * oHW;
                for (int64_t oh = 0; oh < d.oH; ++oh) {
                    const int64_t ih = oh * d.stride - d.pad + ki;
                    if (ih < 0 || ih >= d.H) continue;
                    double* xr = xc + ih * d.W;
                    const double* rr = row + oh * d.oW;
                    for (int64_t ow = 0; ow < d.oW; ++ow) {
                        const int64_t iw = ow * d.stride - d.pad + kj;
                        if (iw >= 0 && iw < d.W) xr[iw] += rr[ow];
                    }
                }
            }
    }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 4 || ws.size() != 4)
        throw std::invalid_argument("conv2d: expected 4-d input and weight");
    if (xs[1] != ws[1])
        throw std::invalid_argument("conv2d: input channels " + std::to_string(xs[1]) +
                                    " != weight channels " + std::to_string(ws[1]));
    ConvDims d;
    d.B = xs[0];
    d.Cin = xs[1];
    d.H = xs[2];
    d.W = xs[3];
    d.Cout = ws[0];
    d.kH = ws[2];
    d.kW = ws[3];
    d.stride = stride;
    d.pad = pad;
    d.oH = (d.H + 2 * pad - d.kH) / stride + 1;
    d.oW = (d.W + 2 * pad - d.kW) / stride + 1;
    if (d.oH <= 0 || d.oW <= 0) throw std::invalid_argument("conv2d: output would be empty");

    const int64_t K = d.Cin * d.kH * d.kW;
    const int64_t oHW = d.oH * d.oW;
    // cache im2col for the backward pass
    auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(d.B * K * oHW));

    Tensor out({d.B, d.Cout, d.oH, d.oW});
    CMapRM Wm(w->value.data(), d.Cout, K);
    for (int64_t bi = 0; bi < d.B; ++bi) {
        double* col = cols->data() + bi * K * oHW;
        im2col(x->value.data(), d, bi, col);
        MapRM Om(out.data() + bi * d.Cout * oHW, d.Cout, oHW);
        CMapRM Cm(col, K, oHW);
        Om.noalias() = Wm * Cm;
        for (int64_t co = 0; co < d.Cout; ++co)
            Om.row(co).array() += b->value[co];
    }

    return make_node(std::move(out), {x, w, b}, [d, K, oHW, cols](Node& n) {
        const bool need_x = n.inputs[0]->requires_grad;
        const bool need_w = n.inputs[1]->requires_grad;
        const bool need_b = n.inputs[2]->requires_grad;
        MapRM* gW = nullptr;
        Tensor* gx = need_x ? &n.inputs[0]->ensure_grad() : nullptr;
        Tensor* gw = need_w ? &n.inputs[1]->ensure_grad() : nullptr;
        Tensor* gb = need_b ? &n.inputs[2]->ensure_grad() : nullptr;
        (void)gW;
        CMapRM Wm(n.inputs[1]->value.data(), d.Cout, K);
        std::vector<double> dcol(need_x ? static_cast<size_t>(K * oHW) : 0);
        for (int64_t bi = 0; bi < d.B; ++bi) {
            CMapRM Gm(n.grad.data() + bi * d.Cout * oHW, d.Cout, oHW);
            const double* col = cols->data() + bi * K * oHW;
            if (need_w) {
                MapRM gWm(gw->data(), d.Cout, K);
                CMapRM Cm(col, K, oHW);
                gWm.noalias() += Gm * Cm.transpose();
            }
            if (need_b) {
                for (int64_t co = 0; co < d.Cout; ++co) (*gb)[co] += Gm.row(co).sum();
            }
            if (need_x) {
                MapRM Dm(dcol.data(), K, oHW);
                Dm.noalias() = Wm.transpose() * Gm;
                col2im_add(dcol.data(), d, bi, gx->data());
            }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const auto& xs = x->value.shape();
    const auto& ws = w->value.shape();
    if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[1])
        throw std::invalid_argument("linear: shape mismatch " + x->value.shape_str() + " vs " +
                                    w->value.shape_str());
    const int64_t B = xs[0], F = xs[1], O = ws[0];
    Tensor out({B, O});
    CMapRM Xm(x->value.data(), B, F);
    CMapRM Wm(w->value.data(), O, F);
    MapRM Om(out.data(), B, O);
    Om.noalias() = Xm * Wm.transpose();
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t o = 0; o < O; ++o) out.at2(bi, o) += b->value[o];
    return make_node(std::move(out), {x, w, b}, [B, F, O](Node& n) {
        CMapRM Gm(n.grad.data(), B, O);
        if (n.inputs[0]->requires_grad) {
            MapRM gX(n.inputs[0]->ensure_grad().data(), B, F);
            CMapRM Wm(n.inputs[1]->value.data(), O, F);
            gX.noalias() += Gm * Wm;
        }
        if (n.inputs[1]->requires_grad) {
            MapRM gW(n.inputs[1]->ensure_grad().data(), O, F);
            CMapRM Xm(n.inputs[0]->value.data(), B, F);
            gW.noalias() += Gm.transpose() * Xm;
        }
        if (n.inputs[2]->requires_grad) {
            Tensor& gb = n.inputs[2]->ensure_grad();
            for (int64_t o = 0; o < O; ++o) gb[o] += Gm.col(o).sum();
        }
    });
}

Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const auto& s = x->value.shape();
    if (s.size() != 4) throw std::invalid_argument("instance_norm: expected 4-d input");
    const int64_t B = s[0], C = s[1], plane = s[2] * s[3];
    if (gamma->value.numel() != C || beta->value.numel() != C)
        throw std::invalid_argument("instance_norm: affine params must have C entries");
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(B * C));
    auto istd = std::make_shared<std::vector<double>>(static_cast<size_t>(B * C));
    Tensor out(s);
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* p = x->value.data() + bc * plane;
        double m = 0.0;
        for (int64_t i = 0; i < plane; ++i) m += p[i];
        m /= static_cast<double>(plane);
        double v = 0.0;
        for (int64_t i = 0; i < plane; ++i) {
            const double dlt = p[i] - m;
            v += dlt * dlt;
        }
        v /= static_cast<double>(plane);
        const double is = 1.0 / std::sqrt(v + eps);
        (*mean)[static_cast<size_t>(bc)] = m;
        (*istd)[static_cast<size_t>(bc)] = is;
        const int64_t c = bc % C;
        const double g = gamma->value[c], bt = beta->value[c];
        double* o = out.data() + bc * plane;
        for (int64_t i = 0; i < plane; ++i) o[i] = g * (p[i] - m) * is + bt;
    }
    return make_node(std::move(out), {x, gamma, beta}, [B, C, plane, mean, istd](Node& n) {
        const bool need_x = n.inputs[0]->requires_grad;
        const bool need_g = n.inputs[1]->requires_grad;
        const bool need_b = n.inputs[2]->requires_grad;
        Tensor* gx = need_x ? &n.inputs[0]->ensure_grad() : nullptr;
        Tensor* gg = need_g ? &n.inputs[1]->ensure_grad() : nullptr;
        Tensor* gb = need_b ? &n.inputs[2]->ensure_grad() : nullptr;
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const int64_t c = bc % C;
            const double m = (*mean)[static_cast<size_t>(bc)];
            const double is = (*istd)[static_cast<size_t>(bc)];
            const double g = n.inputs[1]->value[c];
            const double* xp = n.inputs[0]->value.data() + bc * plane;
            const double* dy = n.grad.data() + bc * plane;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t i = 0; i < plane; ++i) {
                const double xhat = (xp[i] - m) * is;
                sum_dy += dy[i];
                sum_dy_xhat += dy[i] * xhat;
            }
            if (need_g) (*gg)[c] += sum_dy_xhat;
            if (need_b) (*gb)[c] += sum_dy;
            if (need_x) {
                double* gxp = gx->data() + bc * plane;
                const double inv_n = 1.0 / static_cast<double>(plane);
                for (int64_t i = 0; i < plane; ++i) {
                    const double xhat = (xp[i] - m) * is;
                    gxp[i] += g * is * (dy[i] - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
                }
            }
        }
    });
}

Var cross_entropy_with_logits(const Var& logits, const Tensor& onehot) {
    const auto& s = logits->value.shape();
    if (s.size() != 2) throw std::invalid_argument("cross_entropy: logits must be [B,K]");
    if (!logits->value.same_shape(onehot))
        throw std::invalid_argument("cross_entropy: labels shape " +
                                    Tensor::shape_str(onehot.shape()) + " != logits shape " +
                                    logits->value.shape_str());
    const int64_t B = s[0], K = s[1];
    if (B == 0) throw std::invalid_argument("cross_entropy: empty batch");
    auto probs = std::make_shared<Tensor>(softmax_rows(logits->value));
    double loss = 0.0;
    for (int64_t bi = 0; bi < B; ++bi) {
        double row = 0.0;
        for (int64_t k = 0; k < K; ++k)
            if (onehot.at2(bi, k) != 0.0)
                row -= onehot.at2(bi, k) * std::log(std::max(probs->at2(bi, k), 1e-300));
        loss += row;
    }
    loss /= static_cast<double>(B);
    auto y = std::make_shared<Tensor>(onehot);
    return make_node(Tensor::scalar(loss), {logits}, [B, K, probs, y](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const double d = n.grad[0] / static_cast<double>(B);
        for (int64_t bi = 0; bi < B; ++bi)
            for (int64_t k = 0; k < K; ++k)
                g.at2(bi, k) += d * (probs->at2(bi, k) - y->at2(bi, k));
    });
}

Var triplet_margin_batch_all(const Var& emb, const std::vector<int>& labels, double margin) {
    const auto& s = emb->value.shape();
    if (s.size() != 2) throw std::invalid_argument("triplet: embeddings must be [B,e]");
    const int64_t B = s[0], E = s[1];
    if (static_cast<int64_t>(labels.size()) != B)
        throw std::invalid_argument("triplet: label count != batch");
    // pairwise distances
    auto dist = std::make_shared<std::vector<double>>(static_cast<size_t>(B * B), 0.0);
    const double* e = emb->value.data();
    for (int64_t i = 0; i < B; ++i)
        for (int64_t j = i + 1; j < B; ++j) {
            double d2 = 1e-12;
            for (int64_t k = 0; k < E; ++k) {
                const double dl = e[i * E + k] - e[j * E + k];
                d2 += dl * dl;
            }
            const double d = std::sqrt(d2);
            (*dist)[static_cast<size_t>(i * B + j)] = d;
            (*dist)[static_cast<size_t>(j * B + i)] = d;
        }
    int64_t n_valid = 0;
    double loss = 0.0;
    for (int64_t a = 0; a < B; ++a)
        for (int64_t p = 0; p < B; ++p) {
            if (p == a || labels[p] != labels[a]) continue;
            for (int64_t ng = 0; ng < B; ++ng) {
                if (labels[ng] == labels[a]) continue;
                ++n_valid;
                const double h = (*dist)[a * B + p] - (*dist)[a * B + ng] + margin;
                if (h > 0.0) loss += h;
            }
        }
    if (n_valid == 0) return make_node(Tensor::scalar(0.0), {emb}, {});
    loss /= static_cast<double>(n_valid);
    auto lab = labels;
    return make_node(Tensor::scalar(loss), {emb},
                     [B, E, margin, dist, lab = std::move(lab), n_valid](Node& n) {
        if (!n.inputs[0]->requires_grad) return;
        Tensor& g = n.inputs[0]->ensure_grad();
        const double* e = n.inputs[0]->value.data();
        const double scale = n.grad[0] / static_cast<double>(n_valid);
        auto add_pair = [&](int64_t i, int64_t j, double c) {
            // c * d||e_i - e_j|| / d e_i  added to grad of i
            const double d = (*dist)[i * B + j];
            for (int64_t k = 0; k < E; ++k)
                g[i * E + k] += c * (e[i * E + k] - e[j * E + k]) / d;
        };
        for (int64_t a = 0; a < B; ++a)
            for (int64_t p = 0; p < B; ++p) {
                if (p == a || lab[p] != lab[a]) continue;
                for (int64_t ng = 0; ng < B; ++ng) {
                    if (lab[ng] == lab[a]) continue;
                    const double h = (*dist)[a * B + p] - (*dist)[a * B + ng] + margin;
                    if (h <= 0.0) continue;
                    add_pair(a, p, scale);
                    add_pair(p, a, scale);
                    add_pair(a, ng, -scale);
                    add_pair(ng, a, -scale);
                }
            }
    });
}

Tensor softmax_rows(const Tensor& logits) {
    const int64_t B = logits.dim(0), K = logits.dim(1);
    Tensor out({B, K});
    for (int64_t bi = 0; bi < B; ++bi) {
        double mx = logits.at2(bi, 0);
        for (int64_t k = 1; k < K; ++k) mx = std::max(mx, logits.at2(bi, k));
        double z = 0.0;
        for (int64_t k = 0; k < K; ++k) z += std::exp(logits.at2(bi, k) - mx);
        for (int64_t k = 0; k < K; ++k) out.at2(bi, k) = std::exp(logits.at2(bi, k) - mx) / z;
    }
    return out;
}

}  // namespace cdftn
