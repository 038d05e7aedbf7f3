#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semvis/random.hpp"
#include "semvis/tensor.hpp"

namespace semvis {

enum class Mode { kTrain, kEval };

enum class Pooling {
    kSPool,  // per-channel spatial max + min
    kGap,    // per-channel spatial mean
};

std::string to_string(Pooling pooling);
Pooling parse_pooling(const std::string& name);

struct VisualConfig {
    /// Hidden widths of the stride-2 convolution blocks; the final block emits
    /// `backbone_channels`. The downsample factor is 2^(hidden.size() + 1).
    std::vector<std::size_t> backbone_hidden{16, 32, 64};
    std::size_t backbone_channels = 64;  // D
    std::size_t adapt_channels = 64;     // D'
    std::size_t embed_dim = 64;          // d
    Pooling pooling = Pooling::kSPool;
    double dropout = 0.5;  // applied to the pooled vector before projection
    bool random_crop = false;

    std::size_t block_count() const { return backbone_hidden.size() + 1; }
    std::size_t downsample() const { return std::size_t{1} << block_count(); }
    void validate() const;
};

struct ConvBlock {
    Tensor kernel;  // Cout×Cin×3×3
    Tensor bias;    // Cout
};

struct VisualParams {
    std::vector<ConvBlock> backbone;  // theta0
    Tensor adapt_kernel;              // theta1: D'×D×1×1
    Tensor adapt_bias;                // theta1: D'
    Tensor proj_weight;               // theta2: A, d×D'
    Tensor proj_bias;                 // theta2: b, d
};

/// Stride-2, pad-1, 3×3 conv + ReLU blocks. H and W must be multiples of the
/// configured downsample factor.
Tensor backbone_forward(const Tensor& image, const VisualParams& params, const VisualConfig& cfg);

/// 1×1 linear adaptation layer: F (D×h×w) -> G (D'×h×w).
Tensor adapt(const Tensor& features, const VisualParams& params);

Tensor pool(const Tensor& stack, Pooling mode);

/// (A·drop(h) + b) / ||A·drop(h) + b||. Dropout is active in train mode only.
Tensor project(const Tensor& pooled, const VisualParams& params, double dropout_p, Mode mode,
               const DropoutKey& key);

struct ImageEncoding {
    Tensor embedding;  // x, unit norm, d
    Tensor features;   // G, D'×h×w
};

ImageEncoding encode_image(const Tensor& image, const VisualParams& params, const VisualConfig& cfg,
                           Mode mode, const DropoutKey& key = {});

/// Crops a random rectangle covering at least `min_fraction` of each side and
/// resizes it back to the input size with bilinear sampling.
Tensor random_crop_resize(const Tensor& image, Rng& rng, double min_fraction = 0.6);

}  // namespace semvis
