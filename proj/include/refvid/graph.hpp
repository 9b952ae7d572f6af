#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "refvid/geometry.hpp"
#include "refvid/param.hpp"
#include "refvid/tensor.hpp"

namespace refvid {

// Reverse-mode tape. A forward pass builds a DAG of Nodes; backward() walks
// it in reverse topological order and accumulates gradients into the leaf
// Params. Graphs for disjoint samples share no state and may be evaluated on
// different threads; gradient accumulation into the same Param must be
// serialized by the caller.
struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad; // allocated lazily during backward
    bool needs_grad = false;
    std::vector<Value> parents;
    std::function<void(Node&)> backward_fn;
    Param* param = nullptr;

    void ensure_grad() {
        if (grad.shape != val.shape) grad = Tensor::zeros(val.shape);
    }
};

/// Wrap a tensor as a constant graph input (no gradient).
Value input(Tensor t);
Value input_scalar(double x);

/// Wrap a parameter as a trainable leaf. Reuse the returned handle when the
/// same parameter feeds several consumers in one graph.
Value leaf(const ParamPtr& p);

// Elementwise / vector ops ---------------------------------------------------
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value scale(const Value& a, double s);
Value add_scalar(const Value& a, double s);
Value mul(const Value& a, const Value& b);
/// x * s where s is a scalar graph value.
Value scale_by(const Value& x, const Value& s);
Value concat(const std::vector<Value>& xs);
Value slice(const Value& x, int start, int len);
Value relu(const Value& x);
Value sigmoid(const Value& x);
Value tanh_act(const Value& x);
Value softmax(const Value& x);
Value l2_normalize(const Value& x, double eps = 1e-8);
Value sum(const Value& x);
Value mean(const Value& x);

enum class Activation { Relu, Sigmoid, Tanh };
Activation activation_from_string(const std::string& s);
Value apply_activation(Activation kind, const Value& x);

// Linear algebra ---------------------------------------------------------------
/// y = W*x + b with W:[m,n], x:[n], b:[m].
Value linear(const Value& x, const Value& W, const Value& b);
Value matvec(const Value& W, const Value& x);

/// Row-batched affine map: X:[m,n], W:[p,n], b:[p] -> [m,p] with
/// Y[i,j] = sum_k X[i,k]*W[j,k] + b[j]. One weight pass serves all rows.
Value affine_rows(const Value& X, const Value& W, const Value& b);

/// Reinterpret the element buffer under a new shape of equal size.
Value reshape(const Value& x, std::vector<int> shape);

/// Extract row i of a rank-2 tensor as a rank-1 vector.
Value slice_row(const Value& x, int row);

// Spatial ops -------------------------------------------------------------------
/// Cross-correlation with zero padding. x:[Ci,H,W], k:[Co,Ci,kh,kw] (kh=kw odd),
/// b:[Co]. Output extents must be integral.
Value conv2d(const Value& x, const Value& k, const Value& b, int stride, int pad);

/// 2x2 average pooling with stride 2. Extents must be even.
Value avgpool2(const Value& x);

/// Transposed convolution, stride fixed to 2, kernel 2x2, exact 2x upsample.
/// x:[Ci,H,W], k:[Ci,Co,2,2], b:[Co] -> [Co,2H,2W].
Value deconv2d(const Value& x, const Value& k, const Value& b);

/// RoIAlign: continuous box mapping (no rounding), P*P bins, 2x2 regular
/// sub-grid per bin, bilinear sampling with border clamping, averaged.
/// Feature grid values sit at integer coordinates. Differentiable w.r.t. fmap.
Value roi_align(const Value& fmap, const Box& box, int out, double frame_w, double frame_h);

Value flatten(const Value& x);
Value concat_channels(const Value& a, const Value& b);

// Losses --------------------------------------------------------------------------
/// Mean binary cross-entropy of probabilities vs {0,1} targets.
/// Probabilities must lie strictly inside (0,1).
Value bce_mean(const Value& kappa, const Tensor& target);

// Engine ---------------------------------------------------------------------------
/// Backpropagate from a scalar root; accumulates into Param::grad.
void backward(const Value& root);

double scalar(const Value& v);

} // namespace refvid
