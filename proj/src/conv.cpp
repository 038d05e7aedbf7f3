#include <algorithm>

#include "semvis/tensor.hpp"

namespace semvis {

namespace {

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t out_channels, kh, kw;
    std::size_t out_h, out_w;
    std::size_t stride, pad;
};

// Output positions [lo, hi) whose receptive tap `k` lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::size_t k, std::size_t extent,
                                                std::size_t out_extent, std::size_t stride,
                                                std::size_t pad) {
    const auto sk = static_cast<std::ptrdiff_t>(k);
    const auto sp = static_cast<std::ptrdiff_t>(pad);
    const auto ss = static_cast<std::ptrdiff_t>(stride);
    std::ptrdiff_t lo = 0;
    if (sp > sk) {
        lo = (sp - sk + ss - 1) / ss;
    }
    const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(extent) - 1 + sp - sk;
    std::ptrdiff_t hi = last < 0 ? 0 : last / ss + 1;
    hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_extent));
    lo = std::min(lo, hi);
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

ConvGeometry geometry(const Tensor& input, const Tensor& kernel, std::size_t stride,
                      std::size_t pad) {
    if (input.rank() != 3 || kernel.rank() != 4) {
        throw DimensionError("conv2d: expected C×H×W input and O×C×kh×kw kernel, got " +
                             shape_string(input.shape()) + " and " + shape_string(kernel.shape()));
    }
    if (stride == 0) {
        throw ContractError("conv2d: stride must be at least 1");
    }
    ConvGeometry g{};
    g.channels = input.dim(0);
    g.height = input.dim(1);
    g.width = input.dim(2);
    g.out_channels = kernel.dim(0);
    g.kh = kernel.dim(2);
    g.kw = kernel.dim(3);
    g.stride = stride;
    g.pad = pad;
    if (kernel.dim(1) != g.channels) {
        throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) +
                             " does not match input " + shape_string(input.shape()));
    }
    if (g.height + 2 * pad < g.kh || g.width + 2 * pad < g.kw) {
        throw DimensionError("conv2d: kernel " + shape_string(kernel.shape()) +
                             " larger than padded input " + shape_string(input.shape()));
    }
    g.out_h = (g.height + 2 * pad - g.kh) / stride + 1;
    g.out_w = (g.width + 2 * pad - g.kw) / stride + 1;
    return g;
}

// Visits every (output cell, input cell, weight) triple. Per output cell, the
// contributions arrive in ascending (c, ky, kx) order.
template <typename Visit>
void for_each_tap(const ConvGeometry& g, Visit visit) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
        for (std::size_t c = 0; c < g.channels; ++c) {
            for (std::size_t ky = 0; ky < g.kh; ++ky) {
                const auto [oy_lo, oy_hi] = valid_range(ky, g.height, g.out_h, g.stride, g.pad);
                for (std::size_t kx = 0; kx < g.kw; ++kx) {
                    const auto [ox_lo, ox_hi] = valid_range(kx, g.width, g.out_w, g.stride, g.pad);
                    const std::size_t widx = ((o * g.channels + c) * g.kh + ky) * g.kw + kx;
                    for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
                        const std::size_t iy = oy * g.stride + ky - g.pad;
                        const std::size_t out_row = (o * g.out_h + oy) * g.out_w;
                        const std::size_t in_row = (c * g.height + iy) * g.width;
                        visit(widx, out_row, in_row, ox_lo, ox_hi, kx);
                    }
                }
            }
        }
    }
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernel, const Tensor* bias,
                   std::size_t stride, std::size_t pad) {
    const ConvGeometry g = geometry(input, kernel, stride, pad);
    if (bias != nullptr && (bias->rank() != 1 || bias->dim(0) != g.out_channels)) {
        throw DimensionError("conv2d: bias " + shape_string(bias->shape()) + " does not match " +
                             std::to_string(g.out_channels) + " output channels");
    }
    const std::size_t plane = g.out_h * g.out_w;
    std::vector<double> out(g.out_channels * plane, 0.0);
    if (bias != nullptr) {
        auto b = bias->data();
        for (std::size_t o = 0; o < g.out_channels; ++o) {
            std::fill(out.begin() + o * plane, out.begin() + (o + 1) * plane, b[o]);
        }
    }
    const double* x = input.data().data();
    const double* w = kernel.data().data();
    double* y = out.data();
    const std::size_t s = g.stride;
    for_each_tap(g, [&](std::size_t widx, std::size_t out_row, std::size_t in_row, std::size_t lo,
                        std::size_t hi, std::size_t kx) {
        const double wv = w[widx];
        double* yr = y + out_row;
        const auto base = static_cast<std::ptrdiff_t>(in_row + kx) - static_cast<std::ptrdiff_t>(g.pad);
        for (std::size_t ox = lo; ox < hi; ++ox) {
            yr[ox] += wv * x[base + static_cast<std::ptrdiff_t>(ox * s)];
        }
    });

    std::vector<Tensor> inputs{input, kernel};
    Tensor bias_t = bias != nullptr ? *bias : Tensor();
    if (bias != nullptr) {
        inputs.push_back(*bias);
    }
    return record_op(
        Shape{g.out_channels, g.out_h, g.out_w}, std::move(out), inputs,
        [input, kernel, bias_t, g, plane](std::span<const double> grad_out) {
            const double* gy = grad_out.data();
            const std::size_t s = g.stride;
            if (auto gin = grad_sink(input); !gin.empty()) {
                const double* w = kernel.data().data();
                for_each_tap(g, [&](std::size_t widx, std::size_t out_row, std::size_t in_row,
                                    std::size_t lo, std::size_t hi, std::size_t kx) {
                    const double wv = w[widx];
                    const double* gr = gy + out_row;
                    const auto base = static_cast<std::ptrdiff_t>(in_row + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
                    for (std::size_t ox = lo; ox < hi; ++ox) {
                        gin[static_cast<std::size_t>(base + static_cast<std::ptrdiff_t>(ox * s))] += wv * gr[ox];
                    }
                });
            }
            if (auto gk = grad_sink(kernel); !gk.empty()) {
                const double* x = input.data().data();
                for_each_tap(g, [&](std::size_t widx, std::size_t out_row, std::size_t in_row,
                                    std::size_t lo, std::size_t hi, std::size_t kx) {
                    const double* gr = gy + out_row;
                    const auto base = static_cast<std::ptrdiff_t>(in_row + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
                    double acc = 0.0;
                    for (std::size_t ox = lo; ox < hi; ++ox) {
                        acc += gr[ox] * x[base + static_cast<std::ptrdiff_t>(ox * s)];
                    }
                    gk[widx] += acc;
                });
            }
            if (bias_t.defined()) {
                if (auto gb = grad_sink(bias_t); !gb.empty()) {
                    for (std::size_t o = 0; o < g.out_channels; ++o) {
                        double acc = 0.0;
                        for (std::size_t i = 0; i < plane; ++i) acc += gy[o * plane + i];
                        gb[o] += acc;
                    }
                }
            }
        });
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t pad) {
    return conv2d_impl(input, kernel, nullptr, stride, pad);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
    return conv2d_impl(input, kernel, &bias, stride, pad);
}

}  // namespace semvis
