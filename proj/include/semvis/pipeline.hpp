#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "semvis/config.hpp"
#include "semvis/evaluation.hpp"
#include "semvis/localization.hpp"
#include "semvis/model.hpp"
#include "semvis/synth.hpp"

namespace semvis {

struct DatasetEmbeddings {
    Tensor images;    // N_img×d
    Tensor captions;  // N_cap×d, grouped by scene in caption order
    std::vector<std::size_t> caption_owner;
};

/// Eval-mode embeddings of every image and caption.
DatasetEmbeddings embed_dataset(const Model& model, const Dataset& dataset);

RetrievalReports evaluate_retrieval(const Model& model, const Dataset& dataset);

/// Pointing game over every region of `dataset`.
PointingReport evaluate_pointing(const Model& model, const Dataset& dataset, const LocalizationConfig& cfg);

struct Localization {
    Heatmap heatmap;
    PixelPoint point;
    double heat_max = 0.0;
    bool all_unknown = false;  // every word of the phrase mapped to "<unk>"
};

/// Heatmap of `phrase` over `image`. Throws DegenerateInputError for a phrase
/// with no words.
Localization localize(const Model& model, const TokenVocab& vocab, const RgbImage& image,
                      const std::string& phrase, const LocalizationConfig& cfg);

/// Shape report of a configuration: every parameter shape and the shapes a
/// forward pass would produce, derived without allocating the model.
nlohmann::json dry_run(const RunConfig& cfg, std::size_t vocab_size, std::size_t image_size);

/// The large configuration: 2048-channel features, 2400-d embeddings, 620-d words.
RunConfig large_scale_config();

}  // namespace semvis
