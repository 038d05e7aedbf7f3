#pragma once

#include <span>
#include <string>
#include <vector>

#include "semvis/tensor.hpp"

namespace semvis {

enum class Mining {
    kHard,    // hardest in-batch negative per query
    kRandom,  // mean over all in-batch negatives
};

std::string to_string(Mining mining);
Mining parse_mining(const std::string& name);

struct LossConfig {
    double margin = 0.2;  // alpha
    Mining mining = Mining::kHard;

    void validate() const;
};

double cosine_sim(std::span<const double> x, std::span<const double> v);

/// max{0, margin - <y,z> + <y,z'>}
double triplet_loss(std::span<const double> y, std::span<const double> z,
                    std::span<const double> z_neg, double margin);

/// S[i][j] = <images[i], captions[j]> for N_img×d and N_cap×d inputs.
Tensor similarity_matrix(const Tensor& images, const Tensor& captions);
Tensor similarity_matrix(const std::vector<Tensor>& images, const std::vector<Tensor>& captions);

/// Bidirectional ranking loss over a square similarity matrix whose diagonal
/// holds the positive pairs. Entries m with image_ids[m] == image_ids[n] are
/// never used as negatives for n. Averaged over the batch.
Tensor ranking_loss(const Tensor& similarity, std::span<const std::size_t> image_ids,
                    const LossConfig& cfg);

/// ranking_loss(similarity_matrix(images, captions), ...) where row n of both
/// N×d inputs forms the n-th positive pair.
Tensor batch_loss(const Tensor& images, const Tensor& captions,
                  std::span<const std::size_t> image_ids, const LossConfig& cfg);

}  // namespace semvis
