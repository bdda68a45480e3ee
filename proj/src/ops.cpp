#include "upseg/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "upseg/errors.hpp"

namespace upseg {
namespace {

using std::int64_t;

void require_rank4(const Tensor& t, const char* what) {
    if (!t.defined() || t.rank() != 4) {
        throw ShapeError(std::string(what) + " expects an N x C x H x W tensor");
    }
}

// Output positions o for which o * stride + k - pad falls inside [0, in).
struct Span {
    int64_t lo;
    int64_t hi;  // exclusive
};

Span valid_outputs(int64_t k, int64_t pad, int64_t stride, int64_t in, int64_t out) {
    int64_t lo = pad - k <= 0 ? 0 : (pad - k + stride - 1) / stride;
    int64_t num = in - 1 + pad - k;
    int64_t hi = num < 0 ? 0 : num / stride + 1;
    hi = std::min(hi, out);
    lo = std::min(lo, hi);
    return {lo, hi};
}

std::size_t idx(int64_t i) { return static_cast<std::size_t>(i); }

}  // namespace

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
    require_rank4(input, "conv2d input");
    require_rank4(weight, "conv2d weight");
    if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
    if (padding < 0) throw ShapeError("conv2d padding must be >= 0");
    const int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t cout = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(1) != cin) {
        throw ShapeError("conv2d weight expects " + std::to_string(weight.dim(1)) +
                         " input channels, got " + std::to_string(cin));
    }
    if (!bias.defined() || bias.numel() != cout) throw ShapeError("conv2d bias must have C_out entries");
    const int64_t ho_num = h + 2 * padding - kh;
    const int64_t wo_num = w + 2 * padding - kw;
    if (ho_num < 0 || wo_num < 0) {
        throw ShapeError("conv2d kernel larger than padded input " + shape_to_string(input.shape()));
    }
    const int64_t ho = ho_num / stride + 1, wo = wo_num / stride + 1;
    const int64_t s = stride, p = padding;

    std::vector<double> out(idx(n * cout * ho * wo));
    auto x = input.data();
    auto wt = weight.data();
    auto b = bias.data();
    for (int64_t in_ = 0; in_ < n; ++in_) {
        for (int64_t co = 0; co < cout; ++co) {
            double* o = out.data() + (in_ * cout + co) * ho * wo;
            std::fill(o, o + ho * wo, b[idx(co)]);
            for (int64_t ci = 0; ci < cin; ++ci) {
                const double* xin = x.data() + (in_ * cin + ci) * h * w;
                for (int64_t ky = 0; ky < kh; ++ky) {
                    Span rows = valid_outputs(ky, p, s, h, ho);
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        Span cols = valid_outputs(kx, p, s, w, wo);
                        const double wv = wt[idx(((co * cin + ci) * kh + ky) * kw + kx)];
                        for (int64_t oy = rows.lo; oy < rows.hi; ++oy) {
                            const double* xrow = xin + (oy * s + ky - p) * w + kx - p;
                            double* orow = o + oy * wo;
                            if (s == 1) {
                                for (int64_t ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += wv * xrow[ox];
                            } else {
                                for (int64_t ox = cols.lo; ox < cols.hi; ++ox) orow[ox] += wv * xrow[ox * s];
                            }
                        }
                    }
                }
            }
        }
    }

    return make_result(
        {n, cout, ho, wo}, std::move(out), {input, weight, bias},
        [=](detail::Node& self) {
            auto& xin_node = *self.parents[0];
            auto& w_node = *self.parents[1];
            auto& b_node = *self.parents[2];
            const auto& g = self.grad;
            const auto& xd = xin_node.data;
            const auto& wd = w_node.data;
            double* gx = xin_node.requires_grad ? xin_node.ensure_grad().data() : nullptr;
            double* gw = w_node.requires_grad ? w_node.ensure_grad().data() : nullptr;
            if (b_node.requires_grad) {
                auto& gb = b_node.ensure_grad();
                for (int64_t in_ = 0; in_ < n; ++in_)
                    for (int64_t co = 0; co < cout; ++co) {
                        const double* go = g.data() + (in_ * cout + co) * ho * wo;
                        double acc = 0.0;
                        for (int64_t i = 0; i < ho * wo; ++i) acc += go[i];
                        gb[idx(co)] += acc;
                    }
            }
            if (!gx && !gw) return;
            for (int64_t in_ = 0; in_ < n; ++in_) {
                for (int64_t co = 0; co < cout; ++co) {
                    const double* go = g.data() + (in_ * cout + co) * ho * wo;
                    for (int64_t ci = 0; ci < cin; ++ci) {
                        const int64_t plane = (in_ * cin + ci) * h * w;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            Span rows = valid_outputs(ky, p, s, h, ho);
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                Span cols = valid_outputs(kx, p, s, w, wo);
                                const std::size_t wi = idx(((co * cin + ci) * kh + ky) * kw + kx);
                                const double wv = wd[wi];
                                double wacc = 0.0;
                                for (int64_t oy = rows.lo; oy < rows.hi; ++oy) {
                                    const int64_t off = plane + (oy * s + ky - p) * w + kx - p;
                                    const double* grow = go + oy * wo;
                                    const double* xrow = xd.data() + off;
                                    if (gx) {
                                        double* gxrow = gx + off;
                                        for (int64_t ox = cols.lo; ox < cols.hi; ++ox)
                                            gxrow[ox * s] += wv * grow[ox];
                                    }
                                    if (gw) {
                                        for (int64_t ox = cols.lo; ox < cols.hi; ++ox)
                                            wacc += grow[ox] * xrow[ox * s];
                                    }
                                }
                                if (gw) gw[wi] += wacc;
                            }
                        }
                    }
                }
            }
        });
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride) {
    require_rank4(input, "conv_transpose2d input");
    require_rank4(weight, "conv_transpose2d weight");
    if (stride < 1) throw ShapeError("conv_transpose2d stride must be >= 1");
    const int64_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t cout = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    if (weight.dim(0) != cin) {
        throw ShapeError("conv_transpose2d weight expects " + std::to_string(weight.dim(0)) +
                         " input channels, got " + std::to_string(cin));
    }
    if (!bias.defined() || bias.numel() != cout) {
        throw ShapeError("conv_transpose2d bias must have C_out entries");
    }
    const int64_t s = stride;
    const int64_t ho = (h - 1) * s + kh, wo = (w - 1) * s + kw;

    std::vector<double> out(idx(n * cout * ho * wo));
    auto x = input.data();
    auto wt = weight.data();
    auto b = bias.data();
    for (int64_t in_ = 0; in_ < n; ++in_) {
        for (int64_t co = 0; co < cout; ++co) {
            double* o = out.data() + (in_ * cout + co) * ho * wo;
            std::fill(o, o + ho * wo, b[idx(co)]);
            for (int64_t ci = 0; ci < cin; ++ci) {
                const double* xin = x.data() + (in_ * cin + ci) * h * w;
                for (int64_t ky = 0; ky < kh; ++ky) {
                    for (int64_t kx = 0; kx < kw; ++kx) {
                        const double wv = wt[idx(((ci * cout + co) * kh + ky) * kw + kx)];
                        for (int64_t iy = 0; iy < h; ++iy) {
                            double* orow = o + (iy * s + ky) * wo + kx;
                            const double* xrow = xin + iy * w;
                            for (int64_t ix = 0; ix < w; ++ix) orow[ix * s] += wv * xrow[ix];
                        }
                    }
                }
            }
        }
    }

    return make_result(
        {n, cout, ho, wo}, std::move(out), {input, weight, bias},
        [=](detail::Node& self) {
            auto& xin_node = *self.parents[0];
            auto& w_node = *self.parents[1];
            auto& b_node = *self.parents[2];
            const auto& g = self.grad;
            const auto& xd = xin_node.data;
            const auto& wd = w_node.data;
            double* gx = xin_node.requires_grad ? xin_node.ensure_grad().data() : nullptr;
            double* gw = w_node.requires_grad ? w_node.ensure_grad().data() : nullptr;
            if (b_node.requires_grad) {
                auto& gb = b_node.ensure_grad();
                for (int64_t in_ = 0; in_ < n; ++in_)
                    for (int64_t co = 0; co < cout; ++co) {
                        const double* go = g.data() + (in_ * cout + co) * ho * wo;
                        double acc = 0.0;
                        for (int64_t i = 0; i < ho * wo; ++i) acc += go[i];
                        gb[idx(co)] += acc;
                    }
            }
            if (!gx && !gw) return;
            for (int64_t in_ = 0; in_ < n; ++in_) {
                for (int64_t co = 0; co < cout; ++co) {
                    const double* go = g.data() + (in_ * cout + co) * ho * wo;
                    for (int64_t ci = 0; ci < cin; ++ci) {
                        const int64_t plane = (in_ * cin + ci) * h * w;
                        for (int64_t ky = 0; ky < kh; ++ky) {
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const std::size_t wi = idx(((ci * cout + co) * kh + ky) * kw + kx);
                                const double wv = wd[wi];
                                double wacc = 0.0;
                                for (int64_t iy = 0; iy < h; ++iy) {
                                    const double* grow = go + (iy * s + ky) * wo + kx;
                                    if (gx) {
                                        double* gxrow = gx + plane + iy * w;
                                        for (int64_t ix = 0; ix < w; ++ix) gxrow[ix] += wv * grow[ix * s];
                                    }
                                    if (gw) {
                                        const double* xrow = xd.data() + plane + iy * w;
                                        for (int64_t ix = 0; ix < w; ++ix) wacc += xrow[ix] * grow[ix * s];
                                    }
                                }
                                if (gw) gw[wi] += wacc;
                            }
                        }
                    }
                }
            }
        });
}

Tensor maxpool2d(const Tensor& input, int window, int stride) {
    require_rank4(input, "maxpool2d input");
    if (window < 1 || stride < 1) throw ShapeError("maxpool2d window and stride must be >= 1");
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (window > h || window > w) {
        throw ShapeError("maxpool2d window " + std::to_string(window) + " exceeds input " +
                         shape_to_string(input.shape()));
    }
    const int64_t ho = (h - window) / stride + 1, wo = (w - window) / stride + 1;
    std::vector<double> out(idx(n * c * ho * wo));
    std::vector<std::int64_t> argmax(out.size());
    auto x = input.data();
    std::size_t o = 0;
    for (int64_t plane = 0; plane < n * c; ++plane) {
        const int64_t base = plane * h * w;
        for (int64_t oy = 0; oy < ho; ++oy) {
            for (int64_t ox = 0; ox < wo; ++ox, ++o) {
                int64_t best = base + (oy * stride) * w + ox * stride;
                for (int64_t ky = 0; ky < window; ++ky) {
                    for (int64_t kx = 0; kx < window; ++kx) {
                        int64_t at = base + (oy * stride + ky) * w + ox * stride + kx;
                        const double v = x[idx(at)], top = x[idx(best)];
                        if (v > top || (std::isnan(v) && !std::isnan(top))) best = at;
                    }
                }
                argmax[o] = best;
                out[o] = x[idx(best)];
            }
        }
    }
    return make_result({n, c, ho, wo}, std::move(out), {input},
                       [argmax = std::move(argmax)](detail::Node& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           for (std::size_t i = 0; i < argmax.size(); ++i) {
                               gx[idx(argmax[i])] += self.grad[i];
                           }
                       });
}

Tensor relu(const Tensor& input) {
    auto x = input.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] < 0.0 ? 0.0 : x[i];  // NaN passes through
    return make_result(input.shape(), std::move(out), {input}, [](detail::Node& self) {
        auto& parent = *self.parents[0];
        auto& gx = parent.ensure_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            if (parent.data[i] > 0.0) gx[i] += self.grad[i];
        }
    });
}

Tensor softmax_channel(const Tensor& input) {
    require_rank4(input, "softmax_channel input");
    const int64_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    auto x = input.data();
    std::vector<double> out(x.size());
    for (int64_t in_ = 0; in_ < n; ++in_) {
        const int64_t base = in_ * c * hw;
        for (int64_t p = 0; p < hw; ++p) {
            double m = x[idx(base + p)];
            for (int64_t ch = 1; ch < c; ++ch) m = std::max(m, x[idx(base + ch * hw + p)]);
            double z = 0.0;
            for (int64_t ch = 0; ch < c; ++ch) {
                double e = std::exp(x[idx(base + ch * hw + p)] - m);
                out[idx(base + ch * hw + p)] = e;
                z += e;
            }
            for (int64_t ch = 0; ch < c; ++ch) out[idx(base + ch * hw + p)] /= z;
        }
    }
    return make_result(input.shape(), std::move(out), {input}, [n, c, hw](detail::Node& self) {
        auto& gx = self.parents[0]->ensure_grad();
        const auto& s = self.data;
        const auto& g = self.grad;
        for (int64_t in_ = 0; in_ < n; ++in_) {
            const int64_t base = in_ * c * hw;
            for (int64_t p = 0; p < hw; ++p) {
                double dot = 0.0;
                for (int64_t ch = 0; ch < c; ++ch) dot += g[idx(base + ch * hw + p)] * s[idx(base + ch * hw + p)];
                for (int64_t ch = 0; ch < c; ++ch) {
                    auto i = idx(base + ch * hw + p);
                    gx[i] += s[i] * (g[i] - dot);
                }
            }
        }
    });
}

Tensor concat_channels(const std::vector<Tensor>& inputs) {
    if (inputs.empty()) throw ShapeError("concat_channels needs at least one input");
    for (const auto& t : inputs) require_rank4(t, "concat_channels input");
    const int64_t n = inputs[0].dim(0), h = inputs[0].dim(2), w = inputs[0].dim(3);
    int64_t c_total = 0;
    std::vector<int64_t> channels;
    for (const auto& t : inputs) {
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
            throw ShapeError("concat_channels extent mismatch: " + shape_to_string(inputs[0].shape()) +
                             " vs " + shape_to_string(t.shape()));
        }
        channels.push_back(t.dim(1));
        c_total += t.dim(1);
    }
    const int64_t hw = h * w;
    std::vector<double> out(idx(n * c_total * hw));
    for (int64_t in_ = 0; in_ < n; ++in_) {
        int64_t c_off = 0;
        for (std::size_t k = 0; k < inputs.size(); ++k) {
            auto x = inputs[k].data();
            const int64_t len = channels[k] * hw;
            std::copy_n(x.data() + in_ * len, len, out.data() + (in_ * c_total + c_off) * hw);
            c_off += channels[k];
        }
    }
    return make_result({n, c_total, h, w}, std::move(out), inputs,
                       [n, c_total, hw, channels](detail::Node& self) {
                           for (int64_t in_ = 0; in_ < n; ++in_) {
                               int64_t c_off = 0;
                               for (std::size_t k = 0; k < channels.size(); ++k) {
                                   auto& parent = *self.parents[k];
                                   const int64_t len = channels[k] * hw;
                                   if (parent.requires_grad) {
                                       auto& gx = parent.ensure_grad();
                                       const double* g = self.grad.data() + (in_ * c_total + c_off) * hw;
                                       double* dst = gx.data() + in_ * len;
                                       for (int64_t i = 0; i < len; ++i) dst[i] += g[i];
                                   }
                                   c_off += channels[k];
                               }
                           }
                       });
}

Tensor upsample_nearest(const Tensor& input, int factor) {
    require_rank4(input, "upsample_nearest input");
    if (factor < 1) throw ShapeError("upsample_nearest factor must be >= 1");
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t f = factor, ho = h * f, wo = w * f;
    auto x = input.data();
    std::vector<double> out(idx(n * c * ho * wo));
    for (int64_t plane = 0; plane < n * c; ++plane)
        for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox)
                out[idx((plane * ho + oy) * wo + ox)] = x[idx((plane * h + oy / f) * w + ox / f)];
    return make_result({n, c, ho, wo}, std::move(out), {input},
                       [n, c, h, w, f, ho, wo](detail::Node& self) {
                           auto& gx = self.parents[0]->ensure_grad();
                           for (int64_t plane = 0; plane < n * c; ++plane)
                               for (int64_t oy = 0; oy < ho; ++oy)
                                   for (int64_t ox = 0; ox < wo; ++ox)
                                       gx[idx((plane * h + oy / f) * w + ox / f)] +=
                                           self.grad[idx((plane * ho + oy) * wo + ox)];
                       });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        for (auto& parent : self.parents) {
            if (!parent->requires_grad) continue;
            auto& g = parent->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul shape mismatch: " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
    auto x = a.data();
    auto y = b.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
        auto& pa = *self.parents[0];
        auto& pb = *self.parents[1];
        if (pa.requires_grad) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    auto x = a.data();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
    return make_result(a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    return make_result({1}, {acc}, {a}, [](detail::Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor weighted_sum(const Tensor& a, const Tensor& weights) {
    if (a.numel() != weights.numel()) throw ShapeError("weighted_sum length mismatch");
    auto x = a.data();
    std::vector<double> wv(weights.data().begin(), weights.data().end());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * wv[i];
    return make_result({1}, {acc}, {a}, [wv = std::move(wv)](detail::Node& self) {
        auto& g = self.parents[0]->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * wv[i];
    });
}

Tensor cross_entropy(const Tensor& logits, const Mask& target) {
    require_rank4(logits, "cross_entropy logits");
    const int64_t n = logits.dim(0), c = logits.dim(1), h = logits.dim(2), w = logits.dim(3);
    if (target.batch != n || target.height != h || target.width != w) {
        throw ShapeError("cross_entropy target " + std::to_string(target.batch) + "x" +
                         std::to_string(target.height) + "x" + std::to_string(target.width) +
                         " does not match logits " + shape_to_string(logits.shape()));
    }
    const int64_t hw = h * w;
    const double count = static_cast<double>(n * hw);
    auto x = logits.data();
    const auto& labels = target.labels;
    const int64_t max_label = c == 1 ? 1 : c - 1;
    for (auto l : labels) {
        if (l > max_label) {
            throw DomainError("target label " + std::to_string(l) + " out of range for " +
                              std::to_string(c) + "-channel logits");
        }
    }

    double acc = 0.0;
    if (c == 1) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double v = x[i];
            const double y = labels[i];
            acc += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
        }
    } else {
        for (int64_t in_ = 0; in_ < n; ++in_) {
            const int64_t base = in_ * c * hw;
            for (int64_t p = 0; p < hw; ++p) {
                double m = x[idx(base + p)];
                for (int64_t ch = 1; ch < c; ++ch) m = std::max(m, x[idx(base + ch * hw + p)]);
                double z = 0.0;
                for (int64_t ch = 0; ch < c; ++ch) z += std::exp(x[idx(base + ch * hw + p)] - m);
                const int64_t t = labels[idx(in_ * hw + p)];
                acc += m + std::log(z) - x[idx(base + t * hw + p)];
            }
        }
    }
    const double loss = acc / count;

    return make_result({1}, {loss}, {logits}, [n, c, hw, count, labels](detail::Node& self) {
        auto& parent = *self.parents[0];
        auto& gx = parent.ensure_grad();
        const auto& xd = parent.data;
        const double g = self.grad[0] / count;
        if (c == 1) {
            for (std::size_t i = 0; i < xd.size(); ++i) gx[i] += g * (sigmoid(xd[i]) - labels[i]);
            return;
        }
        for (int64_t in_ = 0; in_ < n; ++in_) {
            const int64_t base = in_ * c * hw;
            for (int64_t p = 0; p < hw; ++p) {
                double m = xd[idx(base + p)];
                for (int64_t ch = 1; ch < c; ++ch) m = std::max(m, xd[idx(base + ch * hw + p)]);
                double z = 0.0;
                for (int64_t ch = 0; ch < c; ++ch) z += std::exp(xd[idx(base + ch * hw + p)] - m);
                const int64_t t = labels[idx(in_ * hw + p)];
                for (int64_t ch = 0; ch < c; ++ch) {
                    auto i = idx(base + ch * hw + p);
                    gx[i] += g * (std::exp(xd[i] - m) / z - (ch == t ? 1.0 : 0.0));
                }
            }
        }
    });
}

}  // namespace upseg
