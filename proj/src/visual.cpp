#include "semvis/visual.hpp"

#include <algorithm>
#include <cmath>

namespace semvis {

std::string to_string(Pooling pooling) { return pooling == Pooling::kSPool ? "spool" : "gap"; }

Pooling parse_pooling(const std::string& name) {
    if (name == "spool") return Pooling::kSPool;
    if (name == "gap") return Pooling::kGap;
    throw ContractError("unknown pooling mode '" + name + "' (expected spool or gap)");
}

void VisualConfig::validate() const {
    if (backbone_channels == 0 || adapt_channels == 0 || embed_dim == 0) {
        throw ContractError("visual dimensions must be at least 1");
    }
    for (std::size_t c : backbone_hidden) {
        if (c == 0) throw ContractError("backbone widths must be at least 1");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ContractError("image dropout must lie in [0, 1)");
    }
}

Tensor backbone_forward(const Tensor& image, const VisualParams& params, const VisualConfig& cfg) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw DimensionError("backbone expects a 3×H×W image, got " + shape_string(image.shape()));
    }
    const std::size_t factor = cfg.downsample();
    if (image.dim(1) % factor != 0 || image.dim(2) % factor != 0) {
        throw DimensionError("image size " + shape_string(image.shape()) +
                             ": height and width must be multiples of " + std::to_string(factor));
    }
    if (params.backbone.size() != cfg.block_count()) {
        throw ContractError("backbone has " + std::to_string(params.backbone.size()) +
                            " blocks, config expects " + std::to_string(cfg.block_count()));
    }
    Tensor x = image;
    for (const auto& block : params.backbone) {
        x = relu(conv2d(x, block.kernel, block.bias, 2, 1));
    }
    return x;
}

Tensor adapt(const Tensor& features, const VisualParams& params) {
    if (features.rank() != 3 || features.dim(0) != params.adapt_kernel.dim(1)) {
        throw DimensionError("adaptation layer " + shape_string(params.adapt_kernel.shape()) +
                             " cannot take features " + shape_string(features.shape()));
    }
    return conv2d(features, params.adapt_kernel, params.adapt_bias, 1, 0);
}

Tensor pool(const Tensor& stack, Pooling mode) {
    return mode == Pooling::kSPool ? spatial_max_min(stack) : spatial_mean(stack);
}

Tensor project(const Tensor& pooled, const VisualParams& params, double dropout_p, Mode mode,
               const DropoutKey& key) {
    Tensor h = dropout(pooled, dropout_p, key, mode == Mode::kTrain);
    return l2_normalize(add(matvec(params.proj_weight, h), params.proj_bias));
}

ImageEncoding encode_image(const Tensor& image, const VisualParams& params, const VisualConfig& cfg,
                           Mode mode, const DropoutKey& key) {
    Tensor features = adapt(backbone_forward(image, params, cfg), params);
    Tensor embedding = project(pool(features, cfg.pooling), params, cfg.dropout, mode, key);
    return {embedding, features};
}

Tensor random_crop_resize(const Tensor& image, Rng& rng, double min_fraction) {
    if (image.rank() != 3) {
        throw DimensionError("random_crop_resize expects C×H×W, got " + shape_string(image.shape()));
    }
    const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    const auto pick = [&](std::size_t extent) {
        const auto lo = static_cast<std::size_t>(std::ceil(min_fraction * static_cast<double>(extent)));
        const std::size_t size = lo + rng.below(extent - std::min(lo, extent) + 1);
        const std::size_t clamped = std::clamp<std::size_t>(size, 1, extent);
        const std::size_t offset = rng.below(extent - clamped + 1);
        return std::pair{offset, clamped};
    };
    const auto [y0, crop_h] = pick(height);
    const auto [x0, crop_w] = pick(width);

    auto src = image.data();
    std::vector<double> out(image.numel());
    const double sy = static_cast<double>(crop_h) / static_cast<double>(height);
    const double sx = static_cast<double>(crop_w) / static_cast<double>(width);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                     static_cast<double>(crop_h - 1));
        const auto iy = static_cast<std::size_t>(fy);
        const std::size_t iy1 = std::min(iy + 1, crop_h - 1);
        const double ty = fy - static_cast<double>(iy);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                         static_cast<double>(crop_w - 1));
            const auto ix = static_cast<std::size_t>(fx);
            const std::size_t ix1 = std::min(ix + 1, crop_w - 1);
            const double tx = fx - static_cast<double>(ix);
            for (std::size_t c = 0; c < channels; ++c) {
                const auto at = [&](std::size_t r, std::size_t q) {
                    return src[(c * height + y0 + r) * width + x0 + q];
                };
                const double top = at(iy, ix) * (1 - tx) + at(iy, ix1) * tx;
                const double bottom = at(iy1, ix) * (1 - tx) + at(iy1, ix1) * tx;
                out[(c * height + y) * width + x] = top * (1 - ty) + bottom * ty;
            }
        }
    }
    return Tensor(image.shape(), std::move(out));
}

}  // namespace semvis
