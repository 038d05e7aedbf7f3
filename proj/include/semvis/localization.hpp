#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "semvis/image_io.hpp"
#include "semvis/tensor.hpp"

namespace semvis {

enum class TopKSelection {
    kSigned,    // k largest entries of v
    kAbsolute,  // k largest |v[u]|
};

std::string to_string(TopKSelection selection);
TopKSelection parse_selection(const std::string& name);

struct LocalizationConfig {
    std::size_t k = 5;
    TopKSelection selection = TopKSelection::kSigned;

    /// max(1, round(0.075 d)): the 180-of-2400 ratio carried to other sizes.
    static LocalizationConfig for_embedding(std::size_t embed_dim);
    void validate(std::size_t embed_dim) const;
};

/// Text-conditioned map over the feature grid, tied to the source image size.
struct Heatmap {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // rows×cols, row-major
    std::size_t image_height = 0;
    std::size_t image_width = 0;

    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// G'[:, i, j] = A G[:, i, j] for every cell: a bias-free 1×1 convolution with
/// A (d×D') over G (D'×h×w).
Tensor activation_maps(const Tensor& features, const Tensor& projection);

/// Indices of the k largest entries (ties: lower index first), largest first.
std::vector<std::size_t> top_k_indices(std::span<const double> v, std::size_t k,
                                       TopKSelection selection = TopKSelection::kSigned);

/// H = sum over u in K(v) of |v[u]| G'[u].
Heatmap heatmap(const Tensor& maps, std::span<const double> v, const LocalizationConfig& cfg,
                std::size_t image_height, std::size_t image_width);

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
};

struct GridCell {
    std::size_t row = 0;
    std::size_t col = 0;
};

/// First maximal cell in row-major order.
GridCell argmax_cell(const Heatmap& hm);

/// Center of the argmax cell in source-image pixel coordinates.
PixelPoint point(const Heatmap& hm);

double heat_max(const Heatmap& hm);

/// Half-pixel-centered bilinear resize of the map to out_h×out_w, edges clamped.
std::vector<double> upsample_bilinear(const Heatmap& hm, std::size_t out_h, std::size_t out_w);

/// Min-max scaling onto 0..255 (rounded). A constant input maps to all zeros.
std::vector<std::uint8_t> normalize_to_bytes(std::span<const double> values);

struct RenderedHeatmap {
    GrayImage heat;
    RgbImage overlay;
};

/// Upsampled grayscale heatmap and a 50/50 blend of it with the image.
RenderedHeatmap render_heatmap(const Heatmap& hm, const RgbImage& image);

/// Writes <prefix>.pgm and <prefix>_overlay.ppm.
void write_heatmap(const Heatmap& hm, const RgbImage& image, const std::string& prefix);

}  // namespace semvis
