#include "semvis/objective.hpp"

#include <algorithm>
#include <set>

namespace semvis {

std::string to_string(Mining mining) { return mining == Mining::kHard ? "hard" : "random"; }

Mining parse_mining(const std::string& name) {
    if (name == "hard") return Mining::kHard;
    if (name == "random") return Mining::kRandom;
    throw ContractError("unknown mining strategy '" + name + "' (expected hard or random)");
}

void LossConfig::validate() const {
    if (!(margin > 0.0)) {
        throw ContractError("margin must be positive, got " + std::to_string(margin));
    }
}

double cosine_sim(std::span<const double> x, std::span<const double> v) {
    if (x.size() != v.size()) {
        throw DimensionError("cosine_sim: lengths " + std::to_string(x.size()) + " and " +
                             std::to_string(v.size()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        total += x[i] * v[i];
    }
    return total;
}

double triplet_loss(std::span<const double> y, std::span<const double> z,
                    std::span<const double> z_neg, double margin) {
    return std::max(0.0, margin - cosine_sim(y, z) + cosine_sim(y, z_neg));
}

Tensor similarity_matrix(const Tensor& images, const Tensor& captions) {
    if (images.rank() != 2 || captions.rank() != 2 || images.dim(1) != captions.dim(1)) {
        throw DimensionError("similarity_matrix: embeddings " + shape_string(images.shape()) +
                             " and " + shape_string(captions.shape()) + " are not comparable");
    }
    return matmul(images, transpose(captions));
}

Tensor similarity_matrix(const std::vector<Tensor>& images, const std::vector<Tensor>& captions) {
    return similarity_matrix(stack(images), stack(captions));
}

Tensor ranking_loss(const Tensor& similarity, std::span<const std::size_t> image_ids,
                    const LossConfig& cfg) {
    cfg.validate();
    if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
        throw DimensionError("ranking_loss: expected a square similarity matrix, got " +
                             shape_string(similarity.shape()));
    }
    const std::size_t n = similarity.dim(0);
    if (image_ids.size() != n) {
        throw DimensionError("ranking_loss: " + std::to_string(image_ids.size()) + " ids for " +
                             std::to_string(n) + " pairs");
    }
    if (std::set<std::size_t>(image_ids.begin(), image_ids.end()).size() < 2) {
        throw ContractError("ranking_loss: batch needs at least two distinct images");
    }

    auto s = similarity.data();
    const auto at = [&](std::size_t i, std::size_t j) { return s[i * n + j]; };
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> coef(n * n, 0.0);  // d loss / d S
    double total = 0.0;

    for (std::size_t q = 0; q < n; ++q) {
        const double positive = at(q, q);
        std::vector<std::size_t> negatives;
        for (std::size_t m = 0; m < n; ++m) {
            if (image_ids[m] != image_ids[q]) negatives.push_back(m);
        }
        // direction 0: image q queries captions (row q); direction 1: caption q queries images (column q)
        for (int direction = 0; direction < 2; ++direction) {
            const auto neg_sim = [&](std::size_t m) { return direction == 0 ? at(q, m) : at(m, q); };
            const auto neg_index = [&](std::size_t m) { return direction == 0 ? q * n + m : m * n + q; };
            if (cfg.mining == Mining::kHard) {
                std::size_t hardest = negatives.front();
                for (std::size_t m : negatives) {
                    if (neg_sim(m) > neg_sim(hardest)) hardest = m;
                }
                const double hinge = cfg.margin - positive + neg_sim(hardest);
                if (hinge > 0.0) {
                    total += hinge;
                    coef[q * n + q] -= inv_n;
                    coef[neg_index(hardest)] += inv_n;
                }
            } else {
                const double w = inv_n / static_cast<double>(negatives.size());
                double acc = 0.0;
                for (std::size_t m : negatives) {
                    const double hinge = cfg.margin - positive + neg_sim(m);
                    if (hinge > 0.0) {
                        acc += hinge;
                        coef[q * n + q] -= w;
                        coef[neg_index(m)] += w;
                    }
                }
                total += acc / static_cast<double>(negatives.size());
            }
        }
    }

    return record_op(Shape{}, {total * inv_n}, {similarity},
                     [similarity, coef = std::move(coef)](std::span<const double> g) {
                         auto gs = grad_sink(similarity);
                         for (std::size_t i = 0; i < coef.size(); ++i) gs[i] += g[0] * coef[i];
                     });
}

Tensor batch_loss(const Tensor& images, const Tensor& captions,
                  std::span<const std::size_t> image_ids, const LossConfig& cfg) {
    if (images.shape() != captions.shape()) {
        throw DimensionError("batch_loss: image batch " + shape_string(images.shape()) +
                             " and caption batch " + shape_string(captions.shape()) + " differ");
    }
    return ranking_loss(similarity_matrix(images, captions), image_ids, cfg);
}

}  // namespace semvis
