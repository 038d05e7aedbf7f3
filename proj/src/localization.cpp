#include "semvis/localization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace semvis {

std::string to_string(TopKSelection selection) {
    return selection == TopKSelection::kSigned ? "signed" : "absolute";
}

TopKSelection parse_selection(const std::string& name) {
    if (name == "signed") return TopKSelection::kSigned;
    if (name == "absolute") return TopKSelection::kAbsolute;
    throw ContractError("unknown top-k selection '" + name + "' (expected signed or absolute)");
}

LocalizationConfig LocalizationConfig::for_embedding(std::size_t embed_dim) {
    const auto k = static_cast<std::size_t>(std::llround(0.075 * static_cast<double>(embed_dim)));
    return {std::max<std::size_t>(1, k), TopKSelection::kSigned};
}

void LocalizationConfig::validate(std::size_t embed_dim) const {
    if (k < 1 || k > embed_dim) {
        throw ContractError("k = " + std::to_string(k) + " must lie in [1, " +
                            std::to_string(embed_dim) + "]");
    }
}

Tensor activation_maps(const Tensor& features, const Tensor& projection) {
    if (features.rank() != 3 || projection.rank() != 2 || projection.dim(1) != features.dim(0)) {
        throw DimensionError("activation_maps: projection " + shape_string(projection.shape()) +
                             " does not fit features " + shape_string(features.shape()));
    }
    const std::size_t in = features.dim(0);
    const std::size_t out_dim = projection.dim(0);
    const std::size_t cells = features.dim(1) * features.dim(2);
    auto g = features.data();
    auto a = projection.data();
    std::vector<double> out(out_dim * cells);
    for (std::size_t u = 0; u < out_dim; ++u) {
        for (std::size_t p = 0; p < cells; ++p) {
            double acc = 0.0;
            for (std::size_t c = 0; c < in; ++c) {
                acc += a[u * in + c] * g[c * cells + p];
            }
            out[u * cells + p] = acc;
        }
    }
    return Tensor(Shape{out_dim, features.dim(1), features.dim(2)}, std::move(out));
}

std::vector<std::size_t> top_k_indices(std::span<const double> v, std::size_t k,
                                       TopKSelection selection) {
    if (k > v.size()) {
        throw ContractError("top_k_indices: k = " + std::to_string(k) + " exceeds length " +
                            std::to_string(v.size()));
    }
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    const auto score = [&](std::size_t i) {
        return selection == TopKSelection::kSigned ? v[i] : std::abs(v[i]);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score(a) > score(b); });
    order.resize(k);
    return order;
}

Heatmap heatmap(const Tensor& maps, std::span<const double> v, const LocalizationConfig& cfg,
                std::size_t image_height, std::size_t image_width) {
    if (maps.rank() != 3 || maps.dim(0) != v.size()) {
        throw DimensionError("heatmap: maps " + shape_string(maps.shape()) + " vs embedding of size " +
                             std::to_string(v.size()));
    }
    cfg.validate(v.size());
    Heatmap hm;
    hm.rows = maps.dim(1);
    hm.cols = maps.dim(2);
    hm.image_height = image_height;
    hm.image_width = image_width;
    hm.values.assign(hm.rows * hm.cols, 0.0);
    const std::size_t cells = hm.rows * hm.cols;
    auto g = maps.data();
    for (std::size_t u : top_k_indices(v, cfg.k, cfg.selection)) {
        const double w = std::abs(v[u]);
        for (std::size_t p = 0; p < cells; ++p) {
            hm.values[p] += w * g[u * cells + p];
        }
    }
    return hm;
}

GridCell argmax_cell(const Heatmap& hm) {
    if (hm.values.empty()) {
        throw DegenerateInputError("argmax of an empty heatmap");
    }
    const auto best = static_cast<std::size_t>(
        std::max_element(hm.values.begin(), hm.values.end()) - hm.values.begin());
    return {best / hm.cols, best % hm.cols};
}

PixelPoint point(const Heatmap& hm) {
    const GridCell cell = argmax_cell(hm);
    const double cell_w = static_cast<double>(hm.image_width) / static_cast<double>(hm.cols);
    const double cell_h = static_cast<double>(hm.image_height) / static_cast<double>(hm.rows);
    return {(static_cast<double>(cell.col) + 0.5) * cell_w, (static_cast<double>(cell.row) + 0.5) * cell_h};
}

double heat_max(const Heatmap& hm) {
    const GridCell cell = argmax_cell(hm);
    return hm.at(cell.row, cell.col);
}

std::vector<double> upsample_bilinear(const Heatmap& hm, std::size_t out_h, std::size_t out_w) {
    if (hm.values.empty() || out_h == 0 || out_w == 0) {
        throw DimensionError("upsample_bilinear: empty map or target");
    }
    const auto source = [](std::size_t dst, std::size_t src_extent, std::size_t dst_extent) {
        const double f = (static_cast<double>(dst) + 0.5) * static_cast<double>(src_extent) /
                             static_cast<double>(dst_extent) -
                         0.5;
        const double clamped = std::clamp(f, 0.0, static_cast<double>(src_extent - 1));
        const auto lo = static_cast<std::size_t>(clamped);
        const std::size_t hi = std::min(lo + 1, src_extent - 1);
        return std::tuple{lo, hi, clamped - static_cast<double>(lo)};
    };
    std::vector<double> out(out_h * out_w);
    for (std::size_t y = 0; y < out_h; ++y) {
        const auto [r0, r1, ty] = source(y, hm.rows, out_h);
        for (std::size_t x = 0; x < out_w; ++x) {
            const auto [c0, c1, tx] = source(x, hm.cols, out_w);
            const double top = hm.at(r0, c0) * (1.0 - tx) + hm.at(r0, c1) * tx;
            const double bottom = hm.at(r1, c0) * (1.0 - tx) + hm.at(r1, c1) * tx;
            out[y * out_w + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    return out;
}

std::vector<std::uint8_t> normalize_to_bytes(std::span<const double> values) {
    std::vector<std::uint8_t> out(values.size(), 0);
    if (values.empty()) {
        return out;
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (!(range > 0.0)) {
        return out;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(255.0 * (values[i] - lo) / range));
    }
    return out;
}

RenderedHeatmap render_heatmap(const Heatmap& hm, const RgbImage& image) {
    if (image.width == 0 || image.height == 0) {
        throw DimensionError("render_heatmap: empty image");
    }
    RenderedHeatmap out;
    out.heat.width = image.width;
    out.heat.height = image.height;
    out.heat.pixels = normalize_to_bytes(upsample_bilinear(hm, image.height, image.width));
    out.overlay = image;
    for (std::size_t p = 0; p < image.width * image.height; ++p) {
        const unsigned heat = out.heat.pixels[p];
        for (std::size_t c = 0; c < 3; ++c) {
            const unsigned base = image.pixels[p * 3 + c];
            out.overlay.pixels[p * 3 + c] = static_cast<std::uint8_t>((base + heat + 1) / 2);
        }
    }
    return out;
}

void write_heatmap(const Heatmap& hm, const RgbImage& image, const std::string& prefix) {
    const RenderedHeatmap r = render_heatmap(hm, image);
    write_pgm(prefix + ".pgm", r.heat);
    write_ppm(prefix + "_overlay.ppm", r.overlay);
}

}  // namespace semvis
