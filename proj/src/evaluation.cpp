#include "semvis/evaluation.hpp"

#include <algorithm>
#include <limits>

namespace semvis {

namespace {

double median(std::vector<std::size_t> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) {
        return static_cast<double>(values[n / 2]);
    }
    return 0.5 * static_cast<double>(values[n / 2 - 1] + values[n / 2]);
}

RetrievalReport summarize(Direction direction, std::vector<std::size_t> ranks) {
    RetrievalReport report;
    report.direction = direction;
    for (std::size_t i = 0; i < kRecallCutoffs.size(); ++i) {
        const auto hits = std::count_if(ranks.begin(), ranks.end(),
                                        [&](std::size_t r) { return r <= kRecallCutoffs[i]; });
        report.recall_at[i] = static_cast<double>(hits) / static_cast<double>(ranks.size());
    }
    report.median_rank = median(ranks);
    report.ranks = std::move(ranks);
    return report;
}

}  // namespace

std::string to_string(Direction direction) {
    return direction == Direction::kCaptionRetrieval ? "caption_retrieval" : "image_retrieval";
}

double RetrievalReport::recall(std::size_t cutoff) const {
    for (std::size_t i = 0; i < kRecallCutoffs.size(); ++i) {
        if (kRecallCutoffs[i] == cutoff) return recall_at[i];
    }
    throw ContractError("no recall recorded at cutoff " + std::to_string(cutoff));
}

RetrievalReports eval_retrieval(const Tensor& similarity, std::span<const std::size_t> caption_owner) {
    if (similarity.rank() != 2) {
        throw DimensionError("eval_retrieval: similarity must be 2-D, got " +
                             shape_string(similarity.shape()));
    }
    const std::size_t n_img = similarity.dim(0);
    const std::size_t n_cap = similarity.dim(1);
    if (caption_owner.size() != n_cap) {
        throw ContractError("eval_retrieval: " + std::to_string(caption_owner.size()) +
                            " owners for " + std::to_string(n_cap) + " captions");
    }
    std::vector<std::vector<std::size_t>> owned(n_img);
    for (std::size_t j = 0; j < n_cap; ++j) {
        if (caption_owner[j] >= n_img) {
            throw ContractError("eval_retrieval: caption " + std::to_string(j) + " has no owner image");
        }
        owned[caption_owner[j]].push_back(j);
    }
    for (std::size_t i = 0; i < n_img; ++i) {
        if (owned[i].empty()) {
            throw ContractError("eval_retrieval: image " + std::to_string(i) + " owns no caption");
        }
    }
    auto s = similarity.data();
    const auto at = [&](std::size_t i, std::size_t j) { return s[i * n_cap + j]; };

    // rank(j in row i) = 1 + #{j' : s[i][j'] > s[i][j] or (equal and j' < j)}
    std::vector<std::size_t> caption_ranks(n_img);
    for (std::size_t i = 0; i < n_img; ++i) {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        for (std::size_t j : owned[i]) {
            std::size_t rank = 1;
            for (std::size_t q = 0; q < n_cap; ++q) {
                if (at(i, q) > at(i, j) || (at(i, q) == at(i, j) && q < j)) ++rank;
            }
            best = std::min(best, rank);
        }
        caption_ranks[i] = best;
    }

    std::vector<std::size_t> image_ranks(n_cap);
    for (std::size_t j = 0; j < n_cap; ++j) {
        const std::size_t o = caption_owner[j];
        std::size_t rank = 1;
        for (std::size_t i = 0; i < n_img; ++i) {
            if (at(i, j) > at(o, j) || (at(i, j) == at(o, j) && i < o)) ++rank;
        }
        image_ranks[j] = rank;
    }

    return {summarize(Direction::kCaptionRetrieval, std::move(caption_ranks)),
            summarize(Direction::kImageRetrieval, std::move(image_ranks))};
}

RetrievalReports eval_retrieval_folds(const Tensor& similarity,
                                      std::span<const std::size_t> caption_owner, std::size_t folds) {
    if (similarity.rank() != 2) {
        throw DimensionError("eval_retrieval_folds: similarity must be 2-D");
    }
    const std::size_t n_img = similarity.dim(0);
    const std::size_t n_cap = similarity.dim(1);
    if (folds == 0 || folds > n_img) {
        throw ContractError("eval_retrieval_folds: fold count must lie in [1, images]");
    }
    if (caption_owner.size() != n_cap) {
        throw ContractError("eval_retrieval_folds: owner list does not match caption count");
    }
    auto s = similarity.data();
    RetrievalReports mean;
    mean.caption.direction = Direction::kCaptionRetrieval;
    mean.image.direction = Direction::kImageRetrieval;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t lo = f * n_img / folds;
        const std::size_t hi = (f + 1) * n_img / folds;
        std::vector<std::size_t> caps;
        for (std::size_t j = 0; j < n_cap; ++j) {
            if (caption_owner[j] >= lo && caption_owner[j] < hi) caps.push_back(j);
        }
        std::vector<double> sub;
        sub.reserve((hi - lo) * caps.size());
        std::vector<std::size_t> owners;
        for (std::size_t j : caps) owners.push_back(caption_owner[j] - lo);
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j : caps) sub.push_back(s[i * n_cap + j]);
        }
        const auto r = eval_retrieval(Tensor(Shape{hi - lo, caps.size()}, std::move(sub)), owners);
        for (std::size_t i = 0; i < kRecallCutoffs.size(); ++i) {
            mean.caption.recall_at[i] += r.caption.recall_at[i] / static_cast<double>(folds);
            mean.image.recall_at[i] += r.image.recall_at[i] / static_cast<double>(folds);
        }
        mean.caption.median_rank += r.caption.median_rank / static_cast<double>(folds);
        mean.image.median_rank += r.image.median_rank / static_cast<double>(folds);
        mean.caption.ranks.insert(mean.caption.ranks.end(), r.caption.ranks.begin(), r.caption.ranks.end());
        mean.image.ranks.insert(mean.image.ranks.end(), r.image.ranks.begin(), r.image.ranks.end());
    }
    return mean;
}

PointingReport eval_pointing(std::span<const RegionQuery> regions, const HeatmapProvider& provider) {
    if (regions.empty()) {
        throw ContractError("eval_pointing: no regions to evaluate");
    }
    PointingReport report;
    report.hits.reserve(regions.size());
    std::size_t hits = 0;
    for (const auto& region : regions) {
        const PixelPoint p = point(provider(region));
        const bool hit = region.box.contains(p.x, p.y);
        report.hits.push_back(hit);
        hits += hit ? 1 : 0;
    }
    report.accuracy = static_cast<double>(hits) / static_cast<double>(regions.size());
    report.baseline_accuracy = center_baseline(regions);
    return report;
}

double center_baseline(std::span<const RegionQuery> regions) {
    if (regions.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (const auto& r : regions) {
        const double cx = static_cast<double>(r.image_width) / 2.0;
        const double cy = static_cast<double>(r.image_height) / 2.0;
        hits += r.box.contains(cx, cy) ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(regions.size());
}

nlohmann::json to_json(const RetrievalReport& report) {
    nlohmann::json r_at = nlohmann::json::object();
    for (std::size_t i = 0; i < kRecallCutoffs.size(); ++i) {
        r_at[std::to_string(kRecallCutoffs[i])] = report.recall_at[i];
    }
    return {{"direction", to_string(report.direction)}, {"r_at", r_at}, {"median_rank", report.median_rank}};
}

nlohmann::json to_json(const PointingReport& report) {
    return {{"accuracy", report.accuracy},
            {"baseline", report.baseline_accuracy},
            {"n", report.hits.size()}};
}

}  // namespace semvis
