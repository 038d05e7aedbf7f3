#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semvis/localization.hpp"
#include "semvis/tensor.hpp"

namespace semvis {

enum class Direction { kCaptionRetrieval, kImageRetrieval };

std::string to_string(Direction direction);

inline constexpr std::array<std::size_t, 3> kRecallCutoffs{1, 5, 10};

struct RetrievalReport {
    Direction direction = Direction::kCaptionRetrieval;
    std::array<double, 3> recall_at{};  // aligned with kRecallCutoffs
    double median_rank = 0.0;
    std::vector<std::size_t> ranks;     // 1-based best-correct rank per query

    double recall(std::size_t cutoff) const;
};

struct RetrievalReports {
    RetrievalReport caption;  // images query captions
    RetrievalReport image;    // captions query images
};

/// Ranks with ties broken toward the lower index. Caption retrieval scores an
/// image by its best-ranked owned caption.
RetrievalReports eval_retrieval(const Tensor& similarity, std::span<const std::size_t> caption_owner);

/// Splits images into `folds` contiguous groups (with their captions), evaluates
/// each separately and averages recalls and median ranks.
RetrievalReports eval_retrieval_folds(const Tensor& similarity,
                                      std::span<const std::size_t> caption_owner, std::size_t folds);

/// Axis-aligned box (x_min, y_min, width, height) in pixels.
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double width = 0.0;
    double height = 0.0;

    bool contains(double px, double py) const {
        return x <= px && px < x + width && y <= py && py < y + height;
    }
    bool operator==(const BoundingBox&) const = default;
};

struct RegionQuery {
    std::size_t image_index = 0;
    std::string phrase;
    BoundingBox box;
    std::size_t image_width = 0;
    std::size_t image_height = 0;
};

struct PointingReport {
    double accuracy = 0.0;
    std::vector<bool> hits;
    double baseline_accuracy = 0.0;
};

/// Produces the heatmap of a phrase over one image.
using HeatmapProvider = std::function<Heatmap(const RegionQuery&)>;

PointingReport eval_pointing(std::span<const RegionQuery> regions, const HeatmapProvider& provider);

/// Fraction of boxes containing the image center (W/2, H/2).
double center_baseline(std::span<const RegionQuery> regions);

nlohmann::json to_json(const RetrievalReport& report);
nlohmann::json to_json(const PointingReport& report);

}  // namespace semvis
