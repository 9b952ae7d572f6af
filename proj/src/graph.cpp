#include "refvid/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "refvid/error.hpp"

namespace refvid {

namespace {

Value make_node(Tensor val, std::vector<Value> parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    quantize(val);
    n->val = std::move(val);
    for (const auto& p : parents) {
        if (p->needs_grad) {
            n->needs_grad = true;
            break;
        }
    }
    n->parents = std::move(parents);
    if (n->needs_grad) n->backward_fn = std::move(bw);
    return n;
}

// Accumulate g into a parent's grad, respecting needs_grad.
void accum(const Value& parent, const Tensor& g) {
    if (!parent->needs_grad) return;
    parent->ensure_grad();
    const int64_t n = g.numel();
    for (int64_t i = 0; i < n; ++i) parent->grad[i] += g[i];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape) +
                             " vs " + shape_str(b.shape));
}

} // namespace

Value input(Tensor t) {
    auto n = std::make_shared<Node>();
    quantize(t);
    n->val = std::move(t);
    return n;
}

Value input_scalar(double x) { return input(Tensor::scalar(x)); }

Value leaf(const ParamPtr& p) {
    auto n = std::make_shared<Node>();
    n->val = p->value;
    n->needs_grad = p->trainable;
    n->param = p.get();
    if (n->needs_grad) {
        n->backward_fn = [p](Node& self) {
            const int64_t cnt = self.grad.numel();
            for (int64_t i = 0; i < cnt; ++i) p->grad[i] += self.grad[i];
        };
    }
    return n;
}

Value add(const Value& a, const Value& b) {
    check_same_shape(a->val, b->val, "add");
    Tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] += b->val[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        accum(self.parents[0], self.grad);
        accum(self.parents[1], self.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    check_same_shape(a->val, b->val, "sub");
    Tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] -= b->val[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        accum(self.parents[0], self.grad);
        if (self.parents[1]->needs_grad) {
            auto& p = self.parents[1];
            p->ensure_grad();
            const int64_t n2 = self.grad.numel();
            for (int64_t i = 0; i < n2; ++i) p->grad[i] -= self.grad[i];
        }
    });
}

Value scale(const Value& a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x *= s;
    return make_node(std::move(out), {a}, [s](Node& self) {
        if (!self.parents[0]->needs_grad) return;
        auto& p = self.parents[0];
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) p->grad[i] += s * self.grad[i];
    });
}

Value add_scalar(const Value& a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x += s;
    return make_node(std::move(out), {a},
                     [](Node& self) { accum(self.parents[0], self.grad); });
}

Value mul(const Value& a, const Value& b) {
    check_same_shape(a->val, b->val, "mul");
    Tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] *= b->val[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const Tensor& av = self.parents[0]->val;
        const Tensor& bv = self.parents[1]->val;
        const int64_t n2 = self.grad.numel();
        if (self.parents[0]->needs_grad) {
            auto& p = self.parents[0];
            p->ensure_grad();
            for (int64_t i = 0; i < n2; ++i) p->grad[i] += self.grad[i] * bv[i];
        }
        if (self.parents[1]->needs_grad) {
            auto& p = self.parents[1];
            p->ensure_grad();
            for (int64_t i = 0; i < n2; ++i) p->grad[i] += self.grad[i] * av[i];
        }
    });
}

Value scale_by(const Value& x, const Value& s) {
    if (s->val.numel() != 1) throw DimensionError("scale_by: scale must be scalar");
    const double sv = s->val[0];
    Tensor out = x->val;
    for (double& v : out.v) v *= sv;
    return make_node(std::move(out), {x, s}, [](Node& self) {
        auto& xp = self.parents[0];
        auto& sp = self.parents[1];
        const double sv2 = sp->val[0];
        const int64_t n = self.grad.numel();
        if (xp->needs_grad) {
            xp->ensure_grad();
            for (int64_t i = 0; i < n; ++i) xp->grad[i] += self.grad[i] * sv2;
        }
        if (sp->needs_grad) {
            sp->ensure_grad();
            double acc = 0.0;
            for (int64_t i = 0; i < n; ++i) acc += self.grad[i] * xp->val[i];
            sp->grad[0] += acc;
        }
    });
}

Value concat(const std::vector<Value>& xs) {
    if (xs.empty()) throw ArgumentError("concat: empty input list");
    int64_t total = 0;
    for (const auto& x : xs) {
        if (x->val.rank() != 1) throw DimensionError("concat expects rank-1 tensors");
        total += x->val.numel();
    }
    Tensor out({static_cast<int>(total)});
    int64_t off = 0;
    for (const auto& x : xs) {
        std::memcpy(out.data() + off, x->val.data(),
                    static_cast<size_t>(x->val.numel()) * sizeof(double));
        off += x->val.numel();
    }
    return make_node(std::move(out), xs, [](Node& self) {
        int64_t off2 = 0;
        for (auto& p : self.parents) {
            const int64_t n = p->val.numel();
            if (p->needs_grad) {
                p->ensure_grad();
                for (int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[off2 + i];
            }
            off2 += n;
        }
    });
}

Value slice(const Value& x, int start, int len) {
    if (x->val.rank() != 1) throw DimensionError("slice expects rank-1 tensor");
    if (start < 0 || len <= 0 || start + len > x->val.dim(0))
        throw DimensionError("slice [" + std::to_string(start) + "," +
                             std::to_string(start + len) + ") out of range for " +
                             shape_str(x->val.shape));
    Tensor out({len});
    std::memcpy(out.data(), x->val.data() + start, static_cast<size_t>(len) * sizeof(double));
    return make_node(std::move(out), {x}, [start](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) p->grad[start + i] += self.grad[i];
    });
}

Value relu(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i)
            if (p->val[i] > 0.0) p->grad[i] += self.grad[i];
    });
}

namespace {
// Stable logistic clamped away from {0,1} so downstream logs stay finite and
// gate/probability outputs are strictly interior even after f32 rounding.
constexpr double kSigmoidMargin = 1e-7;
double sigmoid_scalar(double x) {
    double y;
    if (x >= 0.0) {
        y = 1.0 / (1.0 + std::exp(-x));
    } else {
        double e = std::exp(x);
        y = e / (1.0 + e);
    }
    return std::clamp(y, kSigmoidMargin, 1.0 - kSigmoidMargin);
}
} // namespace

Value sigmoid(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = sigmoid_scalar(v);
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            double y = self.val[i];
            p->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Value tanh_act(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = std::tanh(v);
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            double y = self.val[i];
            p->grad[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    throw ArgumentError("unknown activation kind: " + s);
}

Value apply_activation(Activation kind, const Value& x) {
    switch (kind) {
        case Activation::Relu: return relu(x);
        case Activation::Sigmoid: return sigmoid(x);
        case Activation::Tanh: return tanh_act(x);
    }
    throw ArgumentError("unknown activation kind");
}

Value softmax(const Value& x) {
    if (x->val.rank() != 1 || x->val.dim(0) < 1)
        throw ArgumentError("softmax expects a nonempty rank-1 tensor");
    Tensor out = x->val;
    double mx = out[0];
    for (double v : out.v) mx = std::max(mx, v);
    double denom = 0.0;
    for (double& v : out.v) {
        v = std::exp(v - mx);
        denom += v;
    }
    for (double& v : out.v) v /= denom;
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        double dot = 0.0;
        for (int64_t i = 0; i < n; ++i) dot += self.grad[i] * self.val[i];
        for (int64_t i = 0; i < n; ++i) p->grad[i] += self.val[i] * (self.grad[i] - dot);
    });
}

Value l2_normalize(const Value& x, double eps) {
    if (eps <= 0.0) throw ArgumentError("l2_normalize: eps must be positive");
    double sq = 0.0;
    for (double v : x->val.v) sq += v * v;
    const double norm = std::sqrt(sq);
    const double denom = std::max(norm, eps);
    Tensor out = x->val;
    for (double& v : out.v) v /= denom;
    const bool below = norm < eps;
    return make_node(std::move(out), {x}, [denom, below](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        if (below) {
            for (int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i] / denom;
            return;
        }
        double xg = 0.0;
        for (int64_t i = 0; i < n; ++i) xg += p->val[i] * self.grad[i];
        const double d3 = denom * denom * denom;
        for (int64_t i = 0; i < n; ++i)
            p->grad[i] += self.grad[i] / denom - p->val[i] * xg / d3;
    });
}

Value sum(const Value& x) {
    double s = 0.0;
    for (double v : x->val.v) s += v;
    return make_node(Tensor::scalar(s), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const double g = self.grad[0];
        const int64_t n = p->grad.numel();
        for (int64_t i = 0; i < n; ++i) p->grad[i] += g;
    });
}

Value mean(const Value& x) { return scale(sum(x), 1.0 / static_cast<double>(x->val.numel())); }

Value matvec(const Value& W, const Value& x) {
    if (W->val.rank() != 2 || x->val.rank() != 1 || W->val.dim(1) != x->val.dim(0))
        throw DimensionError("matvec: weight " + shape_str(W->val.shape) + " vs input " +
                             shape_str(x->val.shape));
    const int m = W->val.dim(0), n = W->val.dim(1);
    Tensor out({m});
    const double* wv = W->val.data();
    const double* xv = x->val.data();
    for (int i = 0; i < m; ++i) {
        const double* row = wv + static_cast<int64_t>(i) * n;
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += row[j] * xv[j];
        out[i] = acc;
    }
    return make_node(std::move(out), {W, x}, [m, n](Node& self) {
        auto& W2 = self.parents[0];
        auto& x2 = self.parents[1];
        const double* g = self.grad.data();
        if (W2->needs_grad) {
            W2->ensure_grad();
            double* gw = W2->grad.data();
            const double* xv2 = x2->val.data();
            for (int i = 0; i < m; ++i) {
                const double gi = g[i];
                double* row = gw + static_cast<int64_t>(i) * n;
                for (int j = 0; j < n; ++j) row[j] += gi * xv2[j];
            }
        }
        if (x2->needs_grad) {
            x2->ensure_grad();
            double* gx = x2->grad.data();
            const double* wv2 = W2->val.data();
            for (int i = 0; i < m; ++i) {
                const double gi = g[i];
                const double* row = wv2 + static_cast<int64_t>(i) * n;
                for (int j = 0; j < n; ++j) gx[j] += gi * row[j];
            }
        }
    });
}

Value affine_rows(const Value& X, const Value& W, const Value& b) {
    const Tensor& xv = X->val;
    const Tensor& wv = W->val;
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(1))
        throw DimensionError("affine_rows: input " + shape_str(xv.shape) + " vs weight " +
                             shape_str(wv.shape));
    const int m = xv.dim(0), n = xv.dim(1), p = wv.dim(0);
    if (b->val.rank() != 1 || b->val.dim(0) != p)
        throw DimensionError("affine_rows: bias " + shape_str(b->val.shape));
    Tensor out({m, p});
    {
        const double* xd = xv.data();
        const double* wd = wv.data();
        double* od = out.data();
        for (int j = 0; j < p; ++j) {
            const double* wrow = wd + static_cast<int64_t>(j) * n;
            const double bias = b->val[j];
            for (int i = 0; i < m; ++i) {
                const double* xrow = xd + static_cast<int64_t>(i) * n;
                double acc = 0.0;
                for (int k = 0; k < n; ++k) acc += wrow[k] * xrow[k];
                od[static_cast<int64_t>(i) * p + j] = acc + bias;
            }
        }
    }
    return make_node(std::move(out), {X, W, b}, [m, n, p](Node& self) {
        auto& Xp = self.parents[0];
        auto& Wp = self.parents[1];
        auto& bp = self.parents[2];
        const double* g = self.grad.data();
        if (bp->needs_grad) {
            bp->ensure_grad();
            for (int j = 0; j < p; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += g[static_cast<int64_t>(i) * p + j];
                bp->grad[j] += acc;
            }
        }
        if (Xp->needs_grad) {
            Xp->ensure_grad();
            double* gx = Xp->grad.data();
            const double* wd = Wp->val.data();
            for (int j = 0; j < p; ++j) {
                const double* wrow = wd + static_cast<int64_t>(j) * n;
                for (int i = 0; i < m; ++i) {
                    const double gij = g[static_cast<int64_t>(i) * p + j];
                    double* gxrow = gx + static_cast<int64_t>(i) * n;
                    for (int k = 0; k < n; ++k) gxrow[k] += gij * wrow[k];
                }
            }
        }
        if (Wp->needs_grad) {
            Wp->ensure_grad();
            double* gw = Wp->grad.data();
            const double* xd = Xp->val.data();
            for (int j = 0; j < p; ++j) {
                double* gwrow = gw + static_cast<int64_t>(j) * n;
                for (int i = 0; i < m; ++i) {
                    const double gij = g[static_cast<int64_t>(i) * p + j];
                    const double* xrow = xd + static_cast<int64_t>(i) * n;
                    for (int k = 0; k < n; ++k) gwrow[k] += gij * xrow[k];
                }
            }
        }
    });
}

Value reshape(const Value& x, std::vector<int> shape) {
    if (shape_numel(shape) != x->val.numel())
        throw DimensionError("reshape: " + shape_str(x->val.shape) + " to " + shape_str(shape));
    Tensor out;
    out.shape = std::move(shape);
    out.v = x->val.v;
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i];
    });
}

Value slice_row(const Value& x, int row) {
    if (x->val.rank() != 2) throw DimensionError("slice_row expects a rank-2 tensor");
    const int m = x->val.dim(0), n = x->val.dim(1);
    if (row < 0 || row >= m) throw DimensionError("slice_row: row out of range");
    Tensor out({n});
    std::memcpy(out.data(), x->val.data() + static_cast<int64_t>(row) * n,
                static_cast<size_t>(n) * sizeof(double));
    return make_node(std::move(out), {x}, [row, n](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        double* dst = p->grad.data() + static_cast<int64_t>(row) * n;
        for (int i = 0; i < n; ++i) dst[i] += self.grad[i];
    });
}

Value linear(const Value& x, const Value& W, const Value& b) {
    if (W->val.rank() != 2 || x->val.rank() != 1 || b->val.rank() != 1 ||
        W->val.dim(1) != x->val.dim(0) || W->val.dim(0) != b->val.dim(0))
        throw DimensionError("linear: weight " + shape_str(W->val.shape) + ", bias " +
                             shape_str(b->val.shape) + " vs input " + shape_str(x->val.shape));
    return add(matvec(W, x), b);
}

Value conv2d(const Value& x, const Value& k, const Value& b, int stride, int pad) {
    const Tensor& xv = x->val;
    const Tensor& kv = k->val;
    if (xv.rank() != 3 || kv.rank() != 4)
        throw DimensionError("conv2d: input " + shape_str(xv.shape) + ", kernel " +
                             shape_str(kv.shape));
    const int ci = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    const int co = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
    if (kv.dim(1) != ci)
        throw DimensionError("conv2d: kernel channels " + shape_str(kv.shape) +
                             " vs input " + shape_str(xv.shape));
    if (kh != kw || kh % 2 == 0) throw DimensionError("conv2d: kernel must be square and odd");
    if (b->val.rank() != 1 || b->val.dim(0) != co)
        throw DimensionError("conv2d: bias " + shape_str(b->val.shape));
    if (stride < 1 || pad < 0) throw ArgumentError("conv2d: bad stride/pad");
    if (h + 2 * pad < kh || w + 2 * pad < kw)
        throw DimensionError("conv2d: non-integral output extent for input " +
                             shape_str(xv.shape) + " kernel " + shape_str(kv.shape));
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (w + 2 * pad - kw) / stride + 1;

    // Valid output range along one axis for a given kernel offset.
    auto range = [stride, pad](int koff, int in_extent, int out_extent, int& lo, int& hi) {
        int a = pad - koff;
        lo = a <= 0 ? 0 : (a + stride - 1) / stride;
        hi = std::min(out_extent - 1, (in_extent - 1 - koff + pad) / stride);
    };

    Tensor out({co, ho, wo});
    {
        const double* xd = xv.data();
        const double* kd = kv.data();
        double* od = out.data();
        for (int oc = 0; oc < co; ++oc) {
            const double bias = b->val[oc];
            double* oplane = od + static_cast<int64_t>(oc) * ho * wo;
            for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) oplane[i] = bias;
            for (int ic = 0; ic < ci; ++ic) {
                const double* xplane = xd + static_cast<int64_t>(ic) * h * w;
                for (int ky = 0; ky < kh; ++ky) {
                    int ylo, yhi;
                    range(ky, h, ho, ylo, yhi);
                    for (int kx = 0; kx < kw; ++kx) {
                        const double wk = kd[((static_cast<int64_t>(oc) * ci + ic) * kh + ky) * kw + kx];
                        int xlo, xhi;
                        range(kx, w, wo, xlo, xhi);
                        const int kxp = kx - pad;
                        if (stride == 1) {
                            const int count = xhi - xlo + 1;
                            for (int yo = ylo; yo <= yhi; ++yo) {
                                const double* __restrict xp =
                                    xplane + static_cast<int64_t>(yo + ky - pad) * w + kxp + xlo;
                                double* __restrict op = oplane + static_cast<int64_t>(yo) * wo + xlo;
                                for (int i = 0; i < count; ++i) op[i] += wk * xp[i];
                            }
                        } else {
                            for (int yo = ylo; yo <= yhi; ++yo) {
                                const double* xrow = xplane + static_cast<int64_t>(yo * stride + ky - pad) * w;
                                double* orow = oplane + static_cast<int64_t>(yo) * wo;
                                for (int xo = xlo; xo <= xhi; ++xo) orow[xo] += wk * xrow[xo * stride + kxp];
                            }
                        }
                    }
                }
            }
        }
    }

    auto bw = [ci, h, w, co, kh, kw, ho, wo, stride, pad, range](Node& self) {
        auto& xp = self.parents[0];
        auto& kp = self.parents[1];
        auto& bp = self.parents[2];
        const double* g = self.grad.data();
        if (bp->needs_grad) {
            bp->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                const double* gplane = g + static_cast<int64_t>(oc) * ho * wo;
                double acc = 0.0;
                for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) acc += gplane[i];
                bp->grad[oc] += acc;
            }
        }
        const bool need_dx = xp->needs_grad;
        const bool need_dk = kp->needs_grad;
        if (!need_dx && !need_dk) return;
        if (need_dx) xp->ensure_grad();
        if (need_dk) kp->ensure_grad();
        const double* xd = xp->val.data();
        const double* kd = kp->val.data();
        double* gx = need_dx ? xp->grad.data() : nullptr;
        double* gk = need_dk ? kp->grad.data() : nullptr;
        for (int oc = 0; oc < co; ++oc) {
            const double* gplane = g + static_cast<int64_t>(oc) * ho * wo;
            for (int ic = 0; ic < ci; ++ic) {
                const double* xplane = xd + static_cast<int64_t>(ic) * h * w;
                double* gxplane = need_dx ? gx + static_cast<int64_t>(ic) * h * w : nullptr;
                for (int ky = 0; ky < kh; ++ky) {
                    int ylo, yhi;
                    range(ky, h, ho, ylo, yhi);
                    for (int kx = 0; kx < kw; ++kx) {
                        const int64_t kidx = ((static_cast<int64_t>(oc) * ci + ic) * kh + ky) * kw + kx;
                        int xlo, xhi;
                        range(kx, w, wo, xlo, xhi);
                        double wsum = 0.0;
                        const double wk = kd[kidx];
                        const int kxp = kx - pad;
                        if (stride == 1) {
                            const int count = xhi - xlo + 1;
                            for (int yo = ylo; yo <= yhi; ++yo) {
                                const int64_t xoff = static_cast<int64_t>(yo + ky - pad) * w + kxp + xlo;
                                const double* __restrict grow =
                                    gplane + static_cast<int64_t>(yo) * wo + xlo;
                                if (need_dk) {
                                    const double* __restrict xrow = xplane + xoff;
                                    for (int i = 0; i < count; ++i) wsum += grow[i] * xrow[i];
                                }
                                if (need_dx) {
                                    double* __restrict gxrow = gxplane + xoff;
                                    for (int i = 0; i < count; ++i) gxrow[i] += wk * grow[i];
                                }
                            }
                        } else {
                            for (int yo = ylo; yo <= yhi; ++yo) {
                                const int64_t xoff = static_cast<int64_t>(yo * stride + ky - pad) * w;
                                const double* grow = gplane + static_cast<int64_t>(yo) * wo;
                                if (need_dk) {
                                    const double* xrow = xplane + xoff;
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        wsum += grow[xo] * xrow[xo * stride + kxp];
                                }
                                if (need_dx) {
                                    double* gxrow = gxplane + xoff;
                                    for (int xo = xlo; xo <= xhi; ++xo)
                                        gxrow[xo * stride + kxp] += wk * grow[xo];
                                }
                            }
                        }
                        if (need_dk) gk[kidx] += wsum;
                    }
                }
            }
        }
    };
    return make_node(std::move(out), {x, k, b}, std::move(bw));
}

Value avgpool2(const Value& x) {
    const Tensor& xv = x->val;
    if (xv.rank() != 3) throw DimensionError("avgpool2 expects rank-3 input");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (h % 2 != 0 || w % 2 != 0)
        throw DimensionError("avgpool2: extents must be even, got " + shape_str(xv.shape));
    const int ho = h / 2, wo = w / 2;
    Tensor out({c, ho, wo});
    for (int ic = 0; ic < c; ++ic) {
        const double* xp = xv.data() + static_cast<int64_t>(ic) * h * w;
        double* op = out.data() + static_cast<int64_t>(ic) * ho * wo;
        for (int y = 0; y < ho; ++y) {
            const double* r0 = xp + static_cast<int64_t>(2 * y) * w;
            const double* r1 = r0 + w;
            double* orow = op + static_cast<int64_t>(y) * wo;
            for (int xo = 0; xo < wo; ++xo)
                orow[xo] = 0.25 * (r0[2 * xo] + r0[2 * xo + 1] + r1[2 * xo] + r1[2 * xo + 1]);
        }
    }
    return make_node(std::move(out), {x}, [c, h, w, ho, wo](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        for (int ic = 0; ic < c; ++ic) {
            double* gx = p->grad.data() + static_cast<int64_t>(ic) * h * w;
            const double* g = self.grad.data() + static_cast<int64_t>(ic) * ho * wo;
            for (int y = 0; y < ho; ++y) {
                double* r0 = gx + static_cast<int64_t>(2 * y) * w;
                double* r1 = r0 + w;
                const double* grow = g + static_cast<int64_t>(y) * wo;
                for (int xo = 0; xo < wo; ++xo) {
                    const double q = 0.25 * grow[xo];
                    r0[2 * xo] += q;
                    r0[2 * xo + 1] += q;
                    r1[2 * xo] += q;
                    r1[2 * xo + 1] += q;
                }
            }
        }
    });
}

Value deconv2d(const Value& x, const Value& k, const Value& b) {
    const Tensor& xv = x->val;
    const Tensor& kv = k->val;
    if (xv.rank() != 3 || kv.rank() != 4 || kv.dim(2) != 2 || kv.dim(3) != 2)
        throw DimensionError("deconv2d: input " + shape_str(xv.shape) + ", kernel " +
                             shape_str(kv.shape) + " (kernel must be [Ci,Co,2,2])");
    const int ci = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (kv.dim(0) != ci)
        throw DimensionError("deconv2d: kernel channels " + shape_str(kv.shape) +
                             " vs input " + shape_str(xv.shape));
    const int co = kv.dim(1);
    if (b->val.rank() != 1 || b->val.dim(0) != co)
        throw DimensionError("deconv2d: bias " + shape_str(b->val.shape));
    const int ho = 2 * h, wo = 2 * w;
    Tensor out({co, ho, wo});
    for (int oc = 0; oc < co; ++oc) {
        double* op = out.data() + static_cast<int64_t>(oc) * ho * wo;
        const double bias = b->val[oc];
        for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) op[i] = bias;
    }
    for (int ic = 0; ic < ci; ++ic) {
        const double* xp = xv.data() + static_cast<int64_t>(ic) * h * w;
        for (int oc = 0; oc < co; ++oc) {
            double* op = out.data() + static_cast<int64_t>(oc) * ho * wo;
            const double* kk = kv.data() + ((static_cast<int64_t>(ic) * co + oc) * 2) * 2;
            for (int y = 0; y < h; ++y) {
                const double* xrow = xp + static_cast<int64_t>(y) * w;
                double* o0 = op + static_cast<int64_t>(2 * y) * wo;
                double* o1 = o0 + wo;
                for (int xc = 0; xc < w; ++xc) {
                    const double v = xrow[xc];
                    o0[2 * xc] += v * kk[0];
                    o0[2 * xc + 1] += v * kk[1];
                    o1[2 * xc] += v * kk[2];
                    o1[2 * xc + 1] += v * kk[3];
                }
            }
        }
    }
    return make_node(std::move(out), {x, k, b}, [ci, co, h, w, ho, wo](Node& self) {
        auto& xp = self.parents[0];
        auto& kp = self.parents[1];
        auto& bp = self.parents[2];
        const double* g = self.grad.data();
        if (bp->needs_grad) {
            bp->ensure_grad();
            for (int oc = 0; oc < co; ++oc) {
                const double* gp = g + static_cast<int64_t>(oc) * ho * wo;
                double acc = 0.0;
                for (int64_t i = 0; i < static_cast<int64_t>(ho) * wo; ++i) acc += gp[i];
                bp->grad[oc] += acc;
            }
        }
        const bool need_dx = xp->needs_grad;
        const bool need_dk = kp->needs_grad;
        if (!need_dx && !need_dk) return;
        if (need_dx) xp->ensure_grad();
        if (need_dk) kp->ensure_grad();
        for (int ic = 0; ic < ci; ++ic) {
            const double* xv2 = xp->val.data() + static_cast<int64_t>(ic) * h * w;
            double* gx = need_dx ? xp->grad.data() + static_cast<int64_t>(ic) * h * w : nullptr;
            for (int oc = 0; oc < co; ++oc) {
                const double* gp = g + static_cast<int64_t>(oc) * ho * wo;
                const int64_t kbase = (static_cast<int64_t>(ic) * co + oc) * 4;
                const double* kk = kp->val.data() + kbase;
                double dk[4] = {0, 0, 0, 0};
                for (int y = 0; y < h; ++y) {
                    const double* g0 = gp + static_cast<int64_t>(2 * y) * wo;
                    const double* g1 = g0 + wo;
                    const double* xrow = xv2 + static_cast<int64_t>(y) * w;
                    double* gxrow = need_dx ? gx + static_cast<int64_t>(y) * w : nullptr;
                    for (int xc = 0; xc < w; ++xc) {
                        const double ga = g0[2 * xc], gb = g0[2 * xc + 1];
                        const double gc = g1[2 * xc], gd = g1[2 * xc + 1];
                        if (need_dx)
                            gxrow[xc] += kk[0] * ga + kk[1] * gb + kk[2] * gc + kk[3] * gd;
                        if (need_dk) {
                            const double v = xrow[xc];
                            dk[0] += v * ga;
                            dk[1] += v * gb;
                            dk[2] += v * gc;
                            dk[3] += v * gd;
                        }
                    }
                }
                if (need_dk)
                    for (int i = 0; i < 4; ++i) kp->grad[kbase + i] += dk[i];
            }
        }
    });
}

namespace {
struct BilinearTap {
    int64_t i00, i01, i10, i11;
    double w00, w01, w10, w11;
};

// Bilinear sample geometry at continuous feature coordinates with border clamp.
BilinearTap bilinear_tap(double fy, double fx, int h, int w) {
    const int y0 = static_cast<int>(std::floor(fy));
    const int x0 = static_cast<int>(std::floor(fx));
    const double dy = fy - y0, dx = fx - x0;
    const int y0c = std::clamp(y0, 0, h - 1), y1c = std::clamp(y0 + 1, 0, h - 1);
    const int x0c = std::clamp(x0, 0, w - 1), x1c = std::clamp(x0 + 1, 0, w - 1);
    BilinearTap t;
    t.i00 = static_cast<int64_t>(y0c) * w + x0c;
    t.i01 = static_cast<int64_t>(y0c) * w + x1c;
    t.i10 = static_cast<int64_t>(y1c) * w + x0c;
    t.i11 = static_cast<int64_t>(y1c) * w + x1c;
    t.w00 = (1.0 - dy) * (1.0 - dx);
    t.w01 = (1.0 - dy) * dx;
    t.w10 = dy * (1.0 - dx);
    t.w11 = dy * dx;
    return t;
}
} // namespace

Value roi_align(const Value& fmap, const Box& box, int out, double frame_w, double frame_h) {
    const Tensor& fv = fmap->val;
    if (fv.rank() != 3) throw DimensionError("roi_align expects rank-3 feature map");
    if (out < 1) throw ArgumentError("roi_align: output size must be positive");
    const int c = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
    const Box cb = box.clamped(frame_w, frame_h);
    if (cb.width() <= 0.0 || cb.height() <= 0.0)
        throw DegenerateBoxError("roi_align: zero-area box after clamping to frame");
    const double sx = static_cast<double>(w) / frame_w;
    const double sy = static_cast<double>(h) / frame_h;
    const double fx0 = cb.x0 * sx, fy0 = cb.y0 * sy;
    const double bw = cb.width() * sx / out, bh = cb.height() * sy / out;

    // 2x2 regular sub-grid per bin at bin fractions 1/4 and 3/4.
    std::vector<BilinearTap> taps;
    taps.reserve(static_cast<size_t>(out) * out * 4);
    for (int by = 0; by < out; ++by)
        for (int bx = 0; bx < out; ++bx)
            for (int s = 0; s < 4; ++s) {
                const double oy = (s / 2 + 0.5) / 2.0;
                const double ox = (s % 2 + 0.5) / 2.0;
                taps.push_back(bilinear_tap(fy0 + (by + oy) * bh, fx0 + (bx + ox) * bw, h, w));
            }

    Tensor o({c, out, out});
    for (int ic = 0; ic < c; ++ic) {
        const double* plane = fv.data() + static_cast<int64_t>(ic) * h * w;
        double* op = o.data() + static_cast<int64_t>(ic) * out * out;
        size_t t = 0;
        for (int64_t bin = 0; bin < static_cast<int64_t>(out) * out; ++bin) {
            double acc = 0.0;
            for (int s = 0; s < 4; ++s, ++t) {
                const BilinearTap& tp = taps[t];
                acc += tp.w00 * plane[tp.i00] + tp.w01 * plane[tp.i01] +
                       tp.w10 * plane[tp.i10] + tp.w11 * plane[tp.i11];
            }
            op[bin] = 0.25 * acc;
        }
    }
    return make_node(std::move(o), {fmap}, [c, h, w, out, taps](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        for (int ic = 0; ic < c; ++ic) {
            double* gplane = p->grad.data() + static_cast<int64_t>(ic) * h * w;
            const double* g = self.grad.data() + static_cast<int64_t>(ic) * out * out;
            size_t t = 0;
            for (int64_t bin = 0; bin < static_cast<int64_t>(out) * out; ++bin) {
                const double q = 0.25 * g[bin];
                for (int s = 0; s < 4; ++s, ++t) {
                    const BilinearTap& tp = taps[t];
                    gplane[tp.i00] += q * tp.w00;
                    gplane[tp.i01] += q * tp.w01;
                    gplane[tp.i10] += q * tp.w10;
                    gplane[tp.i11] += q * tp.w11;
                }
            }
        }
    });
}

Value flatten(const Value& x) {
    Tensor out;
    out.shape = {static_cast<int>(x->val.numel())};
    out.v = x->val.v;
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& p = self.parents[0];
        if (!p->needs_grad) return;
        p->ensure_grad();
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) p->grad[i] += self.grad[i];
    });
}

Value concat_channels(const Value& a, const Value& b) {
    const Tensor& av = a->val;
    const Tensor& bv = b->val;
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(1) != bv.dim(1) || av.dim(2) != bv.dim(2))
        throw DimensionError("concat_channels: " + shape_str(av.shape) + " vs " +
                             shape_str(bv.shape));
    Tensor out({av.dim(0) + bv.dim(0), av.dim(1), av.dim(2)});
    std::memcpy(out.data(), av.data(), static_cast<size_t>(av.numel()) * sizeof(double));
    std::memcpy(out.data() + av.numel(), bv.data(),
                static_cast<size_t>(bv.numel()) * sizeof(double));
    return make_node(std::move(out), {a, b}, [](Node& self) {
        auto& pa = self.parents[0];
        auto& pb = self.parents[1];
        const int64_t na = pa->val.numel();
        const int64_t nb = pb->val.numel();
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (int64_t i = 0; i < na; ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (int64_t i = 0; i < nb; ++i) pb->grad[i] += self.grad[na + i];
        }
    });
}

Value bce_mean(const Value& kappa, const Tensor& target) {
    check_same_shape(kappa->val, target, "bce_mean");
    const int64_t n = kappa->val.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double p = kappa->val[i];
        const double t = target[i];
        if (!(p > 0.0 && p < 1.0))
            throw NumericError("bce_mean: probability outside (0,1): " + std::to_string(p));
        if (t != 0.0 && t != 1.0)
            throw ArgumentError("bce_mean: target must be binary, got " + std::to_string(t));
        acc += t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor tgt = target;
    return make_node(Tensor::scalar(-acc * inv_n), {kappa},
                     [tgt = std::move(tgt), inv_n](Node& self) {
                         auto& p = self.parents[0];
                         if (!p->needs_grad) return;
                         p->ensure_grad();
                         const double g = self.grad[0] * inv_n;
                         const int64_t n2 = p->val.numel();
                         for (int64_t i = 0; i < n2; ++i) {
                             const double pv = p->val[i];
                             p->grad[i] += g * (pv - tgt[i]) / (pv * (1.0 - pv));
                         }
                     });
}

void backward(const Value& root) {
    if (root->val.numel() != 1) throw ArgumentError("backward requires a scalar root");
    if (!root->needs_grad) return;

    // Iterative post-order DFS over needs_grad ancestors; reversed post-order
    // guarantees every consumer runs before its producers.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        Node* n = stack.back().first;
        size_t& idx = stack.back().second;
        bool descended = false;
        while (idx < n->parents.size()) {
            Node* p = n->parents[idx].get();
            ++idx;
            if (p->needs_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (descended) continue;
        order.push_back(n);
        stack.pop_back();
    }

    root->ensure_grad();
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        n->ensure_grad();
        if (n->backward_fn) n->backward_fn(*n);
    }
}

double scalar(const Value& v) {
    if (v->val.numel() != 1) throw ArgumentError("scalar() on non-scalar value");
    return v->val[0];
}

} // namespace refvid
