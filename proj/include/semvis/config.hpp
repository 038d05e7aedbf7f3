#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semvis/localization.hpp"
#include "semvis/objective.hpp"
#include "semvis/text.hpp"
#include "semvis/visual.hpp"

namespace semvis {

struct TrainSchedule {
    std::size_t epochs = 30;
    std::size_t freeze_epochs = 2;
    double lr0 = 0.001;
    std::size_t halving_until_epoch = 5;
    std::size_t batch_size = 32;

    void validate() const;
};

/// Every tunable of a run as one flat key set. JSON keys match the field names;
/// unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 1;

    std::vector<std::size_t> backbone_hidden{16, 32, 64};
    std::size_t backbone_channels = 64;
    std::size_t adapt_channels = 64;
    std::size_t embed_dim = 64;
    std::size_t word_dim = 32;
    std::size_t sru_layers = 2;
    std::string pooling = "spool";
    double image_dropout = 0.5;
    double text_dropout = 0.25;
    bool random_crop = false;

    double margin = 0.2;
    std::string mining = "random";  // hard mining collapses when trained from scratch at toy scale
    std::size_t warmup_epochs = 0;  // HARD mining uses all negatives before this epoch

    std::size_t k = 0;  // 0: derived from embed_dim
    std::string selection = "signed";

    double lr = 0.001;
    std::size_t epochs = 30;
    std::size_t freeze_epochs = 2;
    std::size_t halving_until_epoch = 5;
    std::size_t batch_size = 32;

    static const std::vector<std::string>& keys();
    /// One line per key with its default, for --help output.
    static std::string describe();

    nlohmann::json to_json() const;
    /// Starts from `base` and overrides the keys present in `j`.
    static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);
    static RunConfig from_json(const nlohmann::json& j) { return from_json(j, RunConfig{}); }
    static RunConfig load(const std::filesystem::path& path);

    VisualConfig visual() const;
    TextConfig text() const;
    LossConfig loss() const;
    /// Loss used during `epoch`, with the warm-up fallback applied.
    LossConfig loss_at(std::size_t epoch) const;
    TrainSchedule schedule() const;
    LocalizationConfig localization() const;

    void validate() const;
};

}  // namespace semvis
