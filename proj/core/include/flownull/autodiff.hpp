#ifndef FLOWNULL_AUTODIFF_HPP
#define FLOWNULL_AUTODIFF_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "flownull/tensor.hpp"

namespace flownull::ad {

using NodeId = std::int32_t;

/// Single-owner reverse-mode tape over real tensors. Ops append nodes in
/// topological order; backward() walks the record once in reverse.
/// Complex MRI operators stay outside the tape (their adjoints are applied
/// manually where needed).
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    /// Differentiable input (parameters, or the free variable of an
    /// optimization).
    NodeId leaf(Tensor value);
    /// Non-differentiable input; backward never propagates into it.
    NodeId constant(Tensor value);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool needs_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].needs_grad; }
    size_t size() const { return nodes_.size(); }

    /// Accumulates dLoss/dNode for every node reachable from `loss`.
    /// `loss` must be scalar (one element). Leaves that do not participate
    /// keep zero gradients.
    void backward(NodeId loss);

    /// Valid after backward(); zeros if the node never participated.
    const Tensor& grad(NodeId id);

    // --- used by op implementations ---
    NodeId emplace(const char* op, Tensor value, bool needs_grad,
                   std::function<void(Tape&, const Tensor&)> back);
    Tensor& grad_buffer(NodeId id);
    const char* op_name(NodeId id) const { return nodes_[static_cast<size_t>(id)].op; }

private:
    struct Node {
        Tensor value;
        const char* op;
        bool needs_grad;
        std::function<void(Tape&, const Tensor&)> back;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
    bool ran_backward_ = false;
};

// Elementwise (same shape).
NodeId add(Tape& t, NodeId a, NodeId b);
NodeId sub(Tape& t, NodeId a, NodeId b);
NodeId mul(Tape& t, NodeId a, NodeId b);
// Scalar broadcast.
NodeId scale(Tape& t, NodeId a, float c);
NodeId add_scalar(Tape& t, NodeId a, float c);
NodeId neg(Tape& t, NodeId a);
// Unary.
NodeId vexp(Tape& t, NodeId a);
NodeId vtanh(Tape& t, NodeId a);
NodeId relu(Tape& t, NodeId a);
/// log|x|; domain error if any |x| is ~0.
NodeId log_abs(Tape& t, NodeId a);
// Reductions to a scalar node of shape (1).
NodeId sum(Tape& t, NodeId a);
NodeId sum_squares(Tape& t, NodeId a);

/// y = s_max * tanh(x / s_max): smooth clamp used for coupling log-scales.
NodeId soft_clamp(Tape& t, NodeId x, float s_max);

/// 2-D convolution on (C,H,W) tensors; w is (Cout,Cin,kh,kw), b is (Cout).
/// stride in {1,2}; pad pads symmetrically with zeros.
NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b, int stride, int pad);

/// y[c,:,:] = s[c] * (x[c,:,:] + b[c]) with per-channel s,b of shape (C).
NodeId channel_affine(Tape& t, NodeId x, NodeId s, NodeId b);

/// Fixed channel mixing: y[o,:,:] = sum_i Q[o,i] x[i,:,:]. Q is not a tape
/// node (never trained); pass transpose=true to apply Q^T.
NodeId channel_matmul(Tape& t, NodeId x, const Tensor& q, bool transpose = false);

NodeId concat_ch(Tape& t, NodeId a, NodeId b);
NodeId slice_ch(Tape& t, NodeId x, int from, int to);

/// (C,H,W) -> (4C,H/2,W/2) space-to-channel rearrangement; H,W must be even.
NodeId squeeze2(Tape& t, NodeId x);
NodeId unsqueeze2(Tape& t, NodeId x);

NodeId avgpool2(Tape& t, NodeId x);
NodeId upsample_nearest2(Tape& t, NodeId x);

} // namespace flownull::ad

#endif
