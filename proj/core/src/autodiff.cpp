#include "flownull/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "flownull/errors.hpp"

namespace flownull::ad {

namespace {

void check_finite(const Tensor& v, const char* op) {
    if (!v.all_finite()) fail("poisoned-value", std::string("NaN/Inf produced by op '") + op + "'");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), "shape-mismatch",
            std::string(op) + ": shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void axpy(Tensor& dst, const Tensor& src, float c = 1.0f) {
    float* d = dst.data();
    const float* s = src.data();
    const std::int64_t n = dst.value_count();
    for (std::int64_t i = 0; i < n; ++i) d[i] += c * s[i];
}

} // namespace

NodeId Tape::leaf(Tensor value) {
    check_finite(value, "leaf");
    return emplace("leaf", std::move(value), true, nullptr);
}

NodeId Tape::constant(Tensor value) {
    check_finite(value, "constant");
    return emplace("constant", std::move(value), false, nullptr);
}

NodeId Tape::emplace(const char* op, Tensor value, bool needs_grad,
                     std::function<void(Tape&, const Tensor&)> back) {
    check_finite(value, op);
    nodes_.push_back(Node{std::move(value), op, needs_grad, std::move(back)});
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(NodeId id) {
    auto& g = grads_[static_cast<size_t>(id)];
    if (g.numel() == 0 || g.shape() != nodes_[static_cast<size_t>(id)].value.shape())
        g = Tensor::zeros(nodes_[static_cast<size_t>(id)].value.shape());
    return g;
}

void Tape::backward(NodeId loss) {
    const Tensor& lv = value(loss);
    require(lv.numel() == 1 && !lv.is_complex(), "bad-shape", "backward: loss must be a real scalar");
    if (!std::isfinite(lv[0])) fail("poisoned-gradient", "backward: loss is NaN/Inf");
    grads_.assign(nodes_.size(), Tensor{});
    grad_buffer(loss)[0] = 1.0f;
    for (std::int64_t i = loss; i >= 0; --i) {
        auto& node = nodes_[static_cast<size_t>(i)];
        if (!node.back || !node.needs_grad) continue;
        Tensor& g = grads_[static_cast<size_t>(i)];
        if (g.numel() == 0) continue; // not reachable from the loss
        if (!g.all_finite())
            fail("poisoned-gradient", std::string("NaN/Inf gradient at op '") + node.op + "'");
        node.back(*this, g);
    }
    ran_backward_ = true;
}

const Tensor& Tape::grad(NodeId id) {
    require(ran_backward_, "no-backward", "grad() before backward()");
    return grad_buffer(id);
}

// ---------------------------------------------------------------- elementwise

NodeId add(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "add");
    Tensor out = t.value(a);
    axpy(out, t.value(b));
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.emplace("add", std::move(out), ng, [a, b](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(a)) axpy(tp.grad_buffer(a), g);
        if (tp.needs_grad(b)) axpy(tp.grad_buffer(b), g);
    });
}

NodeId sub(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "sub");
    Tensor out = t.value(a);
    axpy(out, t.value(b), -1.0f);
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.emplace("sub", std::move(out), ng, [a, b](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(a)) axpy(tp.grad_buffer(a), g);
        if (tp.needs_grad(b)) axpy(tp.grad_buffer(b), g, -1.0f);
    });
}

NodeId mul(Tape& t, NodeId a, NodeId b) {
    check_same_shape(t.value(a), t.value(b), "mul");
    Tensor out = t.value(a);
    {
        float* o = out.data();
        const float* vb = t.value(b).data();
        for (std::int64_t i = 0; i < out.value_count(); ++i) o[i] *= vb[i];
    }
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.emplace("mul", std::move(out), ng, [a, b](Tape& tp, const Tensor& g) {
        const std::int64_t n = g.value_count();
        if (tp.needs_grad(a)) {
            float* ga = tp.grad_buffer(a).data();
            const float* vb = tp.value(b).data();
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
        }
        if (tp.needs_grad(b)) {
            float* gb = tp.grad_buffer(b).data();
            const float* va = tp.value(a).data();
            for (std::int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
        }
    });
}

NodeId scale(Tape& t, NodeId a, float c) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] *= c;
    return t.emplace("scale", std::move(out), t.needs_grad(a), [a, c](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(a)) axpy(tp.grad_buffer(a), g, c);
    });
}

NodeId add_scalar(Tape& t, NodeId a, float c) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] += c;
    return t.emplace("add_scalar", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(a)) axpy(tp.grad_buffer(a), g);
    });
}

NodeId neg(Tape& t, NodeId a) { return scale(t, a, -1.0f); }

// --------------------------------------------------------------------- unary

NodeId vexp(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] = std::exp(out[i]);
    return t.emplace("exp", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        // out value is nodes_[this]'s; recompute from input to avoid self id capture
        const float* va = tp.value(a).data();
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < g.value_count(); ++i) ga[i] += g[i] * std::exp(va[i]);
    });
}

NodeId vtanh(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] = std::tanh(out[i]);
    return t.emplace("tanh", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        const float* va = tp.value(a).data();
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < g.value_count(); ++i) {
            float th = std::tanh(va[i]);
            ga[i] += g[i] * (1.0f - th * th);
        }
    });
}

NodeId relu(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) out[i] = out[i] > 0.0f ? out[i] : 0.0f;
    return t.emplace("relu", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        const float* va = tp.value(a).data();
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < g.value_count(); ++i)
            if (va[i] > 0.0f) ga[i] += g[i];
    });
}

NodeId log_abs(Tape& t, NodeId a) {
    Tensor out = t.value(a);
    for (std::int64_t i = 0; i < out.value_count(); ++i) {
        require(std::fabs(out[i]) > 1e-20f, "zero-scale", "log|x| of a ~zero value");
        out[i] = std::log(std::fabs(out[i]));
    }
    return t.emplace("log_abs", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        const float* va = tp.value(a).data();
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < g.value_count(); ++i) ga[i] += g[i] / va[i];
    });
}

// ---------------------------------------------------------------- reductions

NodeId sum(Tape& t, NodeId a) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < t.value(a).value_count(); ++i) acc += t.value(a)[i];
    Tensor out({1}, Dtype::Real32);
    out[0] = static_cast<float>(acc);
    return t.emplace("sum", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < tp.value(a).value_count(); ++i) ga[i] += g[0];
    });
}

NodeId sum_squares(Tape& t, NodeId a) {
    double acc = 0.0;
    const float* va = t.value(a).data();
    for (std::int64_t i = 0; i < t.value(a).value_count(); ++i) acc += static_cast<double>(va[i]) * va[i];
    Tensor out({1}, Dtype::Real32);
    out[0] = static_cast<float>(acc);
    return t.emplace("sum_squares", std::move(out), t.needs_grad(a), [a](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(a)) return;
        const float* va2 = tp.value(a).data();
        float* ga = tp.grad_buffer(a).data();
        for (std::int64_t i = 0; i < tp.value(a).value_count(); ++i) ga[i] += 2.0f * g[0] * va2[i];
    });
}

NodeId soft_clamp(Tape& t, NodeId x, float s_max) {
    require(s_max > 0.0f, "bad-config", "soft_clamp needs s_max > 0");
    return scale(t, vtanh(t, scale(t, x, 1.0f / s_max)), s_max);
}

// -------------------------------------------------------------------- conv2d

namespace {

struct ConvDims {
    int cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    require(x.rank() == 3 && w.rank() == 4 && b.rank() == 1, "bad-shape", "conv2d: x=(C,H,W) w=(O,C,kh,kw) b=(O)");
    ConvDims d{};
    d.cin = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.cout = w.dim(0);
    d.kh = w.dim(2);
    d.kw = w.dim(3);
    d.stride = stride;
    d.pad = pad;
    require(w.dim(1) == d.cin, "shape-mismatch", "conv2d: weight Cin mismatch");
    require(b.dim(0) == d.cout, "shape-mismatch", "conv2d: bias Cout mismatch");
    require(stride == 1 || stride == 2, "bad-config", "conv2d: stride must be 1 or 2");
    d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
    d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
    require(d.ho >= 1 && d.wo >= 1, "bad-shape", "conv2d: empty output");
    return d;
}

Tensor pad_chw(const Tensor& x, int pad) {
    if (pad == 0) return x;
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h + 2 * pad, w + 2 * pad}, Dtype::Real32);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < h; ++r)
            std::memcpy(out.data() + (static_cast<std::int64_t>(ci) * (h + 2 * pad) + r + pad) * (w + 2 * pad) + pad,
                        x.data() + (static_cast<std::int64_t>(ci) * h + r) * w, sizeof(float) * static_cast<size_t>(w));
    return out;
}

Tensor crop_chw(const Tensor& xp, int pad, int h, int w) {
    if (pad == 0) return xp;
    const int c = xp.dim(0), hp = xp.dim(1), wp = xp.dim(2);
    Tensor out({c, h, w}, Dtype::Real32);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < h; ++r)
            std::memcpy(out.data() + (static_cast<std::int64_t>(ci) * h + r) * w,
                        xp.data() + (static_cast<std::int64_t>(ci) * hp + r + pad) * wp + pad,
                        sizeof(float) * static_cast<size_t>(w));
    return out;
}

} // namespace

NodeId conv2d(Tape& t, NodeId x, NodeId w, NodeId b, int stride, int pad) {
    const ConvDims d = conv_dims(t.value(x), t.value(w), t.value(b), stride, pad);
    const Tensor xp = pad_chw(t.value(x), pad);
    const int hp = d.h + 2 * d.pad, wp = d.w + 2 * d.pad;

    Tensor out({d.cout, d.ho, d.wo}, Dtype::Real32);
    const float* wd = t.value(w).data();
    const float* bd = t.value(b).data();
    for (int co = 0; co < d.cout; ++co) {
        float* oc = out.data() + static_cast<std::int64_t>(co) * d.ho * d.wo;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.ho) * d.wo; ++i) oc[i] = bd[co];
        for (int ci = 0; ci < d.cin; ++ci) {
            const float* xc = xp.data() + static_cast<std::int64_t>(ci) * hp * wp;
            const float* wk = wd + ((static_cast<std::int64_t>(co) * d.cin + ci) * d.kh) * d.kw;
            for (int ky = 0; ky < d.kh; ++ky) {
                for (int kx = 0; kx < d.kw; ++kx) {
                    const float a = wk[ky * d.kw + kx];
                    if (a == 0.0f) continue;
                    for (int oh = 0; oh < d.ho; ++oh) {
                        const float* xrow = xc + static_cast<std::int64_t>(oh * d.stride + ky) * wp + kx;
                        float* orow = oc + static_cast<std::int64_t>(oh) * d.wo;
                        if (d.stride == 1) {
                            for (int ow = 0; ow < d.wo; ++ow) orow[ow] += a * xrow[ow];
                        } else {
                            for (int ow = 0; ow < d.wo; ++ow) orow[ow] += a * xrow[2 * ow];
                        }
                    }
                }
            }
        }
    }

    bool ng = t.needs_grad(x) || t.needs_grad(w) || t.needs_grad(b);
    return t.emplace("conv2d", std::move(out), ng, [x, w, b, d, hp, wp](Tape& tp, const Tensor& g) {
        const float* gd = g.data();
        if (tp.needs_grad(b)) {
            float* gb = tp.grad_buffer(b).data();
            for (int co = 0; co < d.cout; ++co) {
                double acc = 0.0;
                const float* gc = gd + static_cast<std::int64_t>(co) * d.ho * d.wo;
                for (std::int64_t i = 0; i < static_cast<std::int64_t>(d.ho) * d.wo; ++i) acc += gc[i];
                gb[co] += static_cast<float>(acc);
            }
        }
        const bool need_x = tp.needs_grad(x), need_w = tp.needs_grad(w);
        if (!need_x && !need_w) return;
        const Tensor xp2 = pad_chw(tp.value(x), d.pad);
        Tensor gxp = need_x ? Tensor::zeros({d.cin, hp, wp}) : Tensor{};
        float* gw = need_w ? tp.grad_buffer(w).data() : nullptr;
        const float* wd2 = tp.value(w).data();
        for (int co = 0; co < d.cout; ++co) {
            const float* gc = gd + static_cast<std::int64_t>(co) * d.ho * d.wo;
            for (int ci = 0; ci < d.cin; ++ci) {
                const float* xc = xp2.data() + static_cast<std::int64_t>(ci) * hp * wp;
                float* gxc = need_x ? gxp.data() + static_cast<std::int64_t>(ci) * hp * wp : nullptr;
                const std::int64_t wbase = ((static_cast<std::int64_t>(co) * d.cin + ci) * d.kh) * d.kw;
                for (int ky = 0; ky < d.kh; ++ky) {
                    for (int kx = 0; kx < d.kw; ++kx) {
                        const float a = wd2[wbase + ky * d.kw + kx];
                        double wacc = 0.0;
                        for (int oh = 0; oh < d.ho; ++oh) {
                            const float* grow = gc + static_cast<std::int64_t>(oh) * d.wo;
                            const std::int64_t xoff = static_cast<std::int64_t>(oh * d.stride + ky) * wp + kx;
                            if (d.stride == 1) {
                                if (need_w) {
                                    const float* xrow = xc + xoff;
                                    for (int ow = 0; ow < d.wo; ++ow) wacc += static_cast<double>(grow[ow]) * xrow[ow];
                                }
                                if (need_x) {
                                    float* gxrow = gxc + xoff;
                                    for (int ow = 0; ow < d.wo; ++ow) gxrow[ow] += a * grow[ow];
                                }
                            } else {
                                if (need_w) {
                                    const float* xrow = xc + xoff;
                                    for (int ow = 0; ow < d.wo; ++ow) wacc += static_cast<double>(grow[ow]) * xrow[2 * ow];
                                }
                                if (need_x) {
                                    float* gxrow = gxc + xoff;
                                    for (int ow = 0; ow < d.wo; ++ow) gxrow[2 * ow] += a * grow[ow];
                                }
                            }
                        }
                        if (need_w) gw[wbase + ky * d.kw + kx] += static_cast<float>(wacc);
                    }
                }
            }
        }
        if (need_x) axpy(tp.grad_buffer(x), crop_chw(gxp, d.pad, d.h, d.w));
    });
}

// ------------------------------------------------------------- channel ops

NodeId channel_affine(Tape& t, NodeId x, NodeId s, NodeId b) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3, "bad-shape", "channel_affine expects (C,H,W)");
    const int c = xv.dim(0);
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    require(t.value(s).numel() == c && t.value(b).numel() == c, "shape-mismatch", "channel_affine: s,b must be (C)");
    for (int ci = 0; ci < c; ++ci)
        require(std::fabs(t.value(s)[ci]) > 1e-20f, "zero-scale", "channel_affine: zero scale");
    Tensor out = xv;
    {
        const float* sv = t.value(s).data();
        const float* bv = t.value(b).data();
        for (int ci = 0; ci < c; ++ci) {
            float* p = out.data() + ci * plane;
            for (std::int64_t i = 0; i < plane; ++i) p[i] = sv[ci] * (p[i] + bv[ci]);
        }
    }
    bool ng = t.needs_grad(x) || t.needs_grad(s) || t.needs_grad(b);
    return t.emplace("channel_affine", std::move(out), ng, [x, s, b, c, plane](Tape& tp, const Tensor& g) {
        const float* sv = tp.value(s).data();
        const float* bv = tp.value(b).data();
        const float* xv2 = tp.value(x).data();
        if (tp.needs_grad(x)) {
            float* gx = tp.grad_buffer(x).data();
            for (int ci = 0; ci < c; ++ci) {
                const float* gp = g.data() + ci * plane;
                float* gxp = gx + ci * plane;
                for (std::int64_t i = 0; i < plane; ++i) gxp[i] += sv[ci] * gp[i];
            }
        }
        if (tp.needs_grad(s)) {
            float* gs = tp.grad_buffer(s).data();
            for (int ci = 0; ci < c; ++ci) {
                const float* gp = g.data() + ci * plane;
                const float* xp = xv2 + ci * plane;
                double acc = 0.0;
                for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(gp[i]) * (xp[i] + bv[ci]);
                gs[ci] += static_cast<float>(acc);
            }
        }
        if (tp.needs_grad(b)) {
            float* gb = tp.grad_buffer(b).data();
            for (int ci = 0; ci < c; ++ci) {
                const float* gp = g.data() + ci * plane;
                double acc = 0.0;
                for (std::int64_t i = 0; i < plane; ++i) acc += gp[i];
                gb[ci] += static_cast<float>(sv[ci] * acc);
            }
        }
    });
}

NodeId channel_matmul(Tape& t, NodeId x, const Tensor& q, bool transpose) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3, "bad-shape", "channel_matmul expects (C,H,W)");
    const int c = xv.dim(0);
    require(q.rank() == 2 && q.dim(0) == c && q.dim(1) == c, "shape-mismatch", "channel_matmul: Q must be (C,C)");
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    auto apply = [c, plane](const Tensor& in, const Tensor& m, bool tr) {
        Tensor out = Tensor::zeros(in.shape());
        for (int o = 0; o < c; ++o) {
            float* op = out.data() + o * plane;
            for (int i = 0; i < c; ++i) {
                const float a = tr ? m[static_cast<std::int64_t>(i) * c + o] : m[static_cast<std::int64_t>(o) * c + i];
                if (a == 0.0f) continue;
                const float* ip = in.data() + i * plane;
                for (std::int64_t k = 0; k < plane; ++k) op[k] += a * ip[k];
            }
        }
        return out;
    };
    Tensor out = apply(xv, q, transpose);
    // Capturing q by value keeps the fixed matrix alive for backward.
    return t.emplace("channel_matmul", std::move(out), t.needs_grad(x),
                     [x, q, transpose, apply](Tape& tp, const Tensor& g) {
                         if (!tp.needs_grad(x)) return;
                         axpy(tp.grad_buffer(x), apply(g, q, !transpose));
                     });
}

NodeId concat_ch(Tape& t, NodeId a, NodeId b) {
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    require(av.rank() == 3 && bv.rank() == 3 && av.dim(1) == bv.dim(1) && av.dim(2) == bv.dim(2), "shape-mismatch",
            "concat_ch: spatial dims differ");
    const int ca = av.dim(0), cb = bv.dim(0);
    Tensor out({ca + cb, av.dim(1), av.dim(2)}, Dtype::Real32);
    std::memcpy(out.data(), av.data(), sizeof(float) * static_cast<size_t>(av.value_count()));
    std::memcpy(out.data() + av.value_count(), bv.data(), sizeof(float) * static_cast<size_t>(bv.value_count()));
    bool ng = t.needs_grad(a) || t.needs_grad(b);
    return t.emplace("concat_ch", std::move(out), ng, [a, b](Tape& tp, const Tensor& g) {
        const std::int64_t na = tp.value(a).value_count();
        if (tp.needs_grad(a)) {
            float* ga = tp.grad_buffer(a).data();
            for (std::int64_t i = 0; i < na; ++i) ga[i] += g[i];
        }
        if (tp.needs_grad(b)) {
            float* gb = tp.grad_buffer(b).data();
            const std::int64_t nb = tp.value(b).value_count();
            for (std::int64_t i = 0; i < nb; ++i) gb[i] += g[na + i];
        }
    });
}

NodeId slice_ch(Tape& t, NodeId x, int from, int to) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3 && 0 <= from && from < to && to <= xv.dim(0), "bad-shape", "slice_ch: bad channel range");
    const std::int64_t plane = static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor out({to - from, xv.dim(1), xv.dim(2)}, Dtype::Real32);
    std::memcpy(out.data(), xv.data() + from * plane, sizeof(float) * static_cast<size_t>(out.value_count()));
    return t.emplace("slice_ch", std::move(out), t.needs_grad(x), [x, from, plane](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(x)) return;
        float* gx = tp.grad_buffer(x).data() + from * plane;
        for (std::int64_t i = 0; i < g.value_count(); ++i) gx[i] += g[i];
    });
}

// ------------------------------------------------------------ rearrangement

namespace {

Tensor squeeze_vals(const Tensor& x) {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c * 4, h / 2, w / 2}, Dtype::Real32);
    const int ho = h / 2, wo = w / 2;
    for (int ci = 0; ci < c; ++ci)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                float* op = out.data() + static_cast<std::int64_t>(ci * 4 + dy * 2 + dx) * ho * wo;
                for (int r = 0; r < ho; ++r) {
                    const float* ip = x.data() + (static_cast<std::int64_t>(ci) * h + 2 * r + dy) * w + dx;
                    for (int q = 0; q < wo; ++q) op[static_cast<std::int64_t>(r) * wo + q] = ip[2 * q];
                }
            }
    return out;
}

Tensor unsqueeze_vals(const Tensor& x) {
    const int c4 = x.dim(0), ho = x.dim(1), wo = x.dim(2);
    const int c = c4 / 4, h = ho * 2, w = wo * 2;
    Tensor out({c, h, w}, Dtype::Real32);
    for (int ci = 0; ci < c; ++ci)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const float* ip = x.data() + static_cast<std::int64_t>(ci * 4 + dy * 2 + dx) * ho * wo;
                for (int r = 0; r < ho; ++r) {
                    float* op = out.data() + (static_cast<std::int64_t>(ci) * h + 2 * r + dy) * w + dx;
                    for (int q = 0; q < wo; ++q) op[2 * q] = ip[static_cast<std::int64_t>(r) * wo + q];
                }
            }
    return out;
}

} // namespace

NodeId squeeze2(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3, "bad-shape", "squeeze2 expects (C,H,W)");
    require(xv.dim(1) % 2 == 0 && xv.dim(2) % 2 == 0, "odd-dims", "squeeze2 needs even H,W");
    return t.emplace("squeeze2", squeeze_vals(xv), t.needs_grad(x), [x](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(x)) axpy(tp.grad_buffer(x), unsqueeze_vals(g));
    });
}

NodeId unsqueeze2(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3, "bad-shape", "unsqueeze2 expects (C,H,W)");
    require(xv.dim(0) % 4 == 0, "bad-shape", "unsqueeze2 needs channels divisible by 4");
    return t.emplace("unsqueeze2", unsqueeze_vals(xv), t.needs_grad(x), [x](Tape& tp, const Tensor& g) {
        if (tp.needs_grad(x)) axpy(tp.grad_buffer(x), squeeze_vals(g));
    });
}

NodeId avgpool2(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3 && xv.dim(1) % 2 == 0 && xv.dim(2) % 2 == 0, "odd-dims", "avgpool2 needs even H,W");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2), ho = h / 2, wo = w / 2;
    Tensor out({c, ho, wo}, Dtype::Real32);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < ho; ++r)
            for (int q = 0; q < wo; ++q) {
                const float* p0 = xv.data() + (static_cast<std::int64_t>(ci) * h + 2 * r) * w + 2 * q;
                const float* p1 = p0 + w;
                out.data()[(static_cast<std::int64_t>(ci) * ho + r) * wo + q] =
                    0.25f * (p0[0] + p0[1] + p1[0] + p1[1]);
            }
    return t.emplace("avgpool2", std::move(out), t.needs_grad(x), [x, c, h, w, ho, wo](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(x)) return;
        float* gx = tp.grad_buffer(x).data();
        for (int ci = 0; ci < c; ++ci)
            for (int r = 0; r < ho; ++r)
                for (int q = 0; q < wo; ++q) {
                    const float gv = 0.25f * g[(static_cast<std::int64_t>(ci) * ho + r) * wo + q];
                    float* p0 = gx + (static_cast<std::int64_t>(ci) * h + 2 * r) * w + 2 * q;
                    float* p1 = p0 + w;
                    p0[0] += gv;
                    p0[1] += gv;
                    p1[0] += gv;
                    p1[1] += gv;
                }
    });
}

NodeId upsample_nearest2(Tape& t, NodeId x) {
    const Tensor& xv = t.value(x);
    require(xv.rank() == 3, "bad-shape", "upsample_nearest2 expects (C,H,W)");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    Tensor out({c, h * 2, w * 2}, Dtype::Real32);
    for (int ci = 0; ci < c; ++ci)
        for (int r = 0; r < h; ++r)
            for (int q = 0; q < w; ++q) {
                const float v = xv.data()[(static_cast<std::int64_t>(ci) * h + r) * w + q];
                float* p0 = out.data() + (static_cast<std::int64_t>(ci) * 2 * h + 2 * r) * 2 * w + 2 * q;
                float* p1 = p0 + 2 * w;
                p0[0] = v;
                p0[1] = v;
                p1[0] = v;
                p1[1] = v;
            }
    return t.emplace("upsample_nearest2", std::move(out), t.needs_grad(x), [x, c, h, w](Tape& tp, const Tensor& g) {
        if (!tp.needs_grad(x)) return;
        float* gx = tp.grad_buffer(x).data();
        for (int ci = 0; ci < c; ++ci)
            for (int r = 0; r < h; ++r)
                for (int q = 0; q < w; ++q) {
                    const float* p0 = g.data() + (static_cast<std::int64_t>(ci) * 2 * h + 2 * r) * 2 * w + 2 * q;
                    const float* p1 = p0 + 2 * w;
                    gx[(static_cast<std::int64_t>(ci) * h + r) * w + q] += p0[0] + p0[1] + p1[0] + p1[1];
                }
    });
}

} // namespace flownull::ad
