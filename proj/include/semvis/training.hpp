#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "semvis/config.hpp"
#include "semvis/model.hpp"
#include "semvis/synth.hpp"

namespace semvis {

/// lr0 / 2^min(epoch, halving_until_epoch)
double effective_lr(std::size_t epoch, const TrainSchedule& sched);

/// Groups updated during `epoch`: phi, the word table and theta2 while
/// epoch < freeze_epochs, everything afterwards.
std::vector<ParamGroup> trainable_groups(std::size_t epoch, const TrainSchedule& sched);
std::vector<std::string> trainable_set(const Model& model, std::size_t epoch, const TrainSchedule& sched);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    bool operator==(const AdamMoments&) const = default;
};

/// Moments keyed by parameter name, created on a parameter's first update.
struct AdamState {
    AdamConfig config;
    std::map<std::string, AdamMoments> moments;

    bool operator==(const AdamState& other) const { return moments == other.moments; }
};

/// One bias-corrected Adam update of every listed parameter from its
/// accumulated gradient. Throws ContractError when a gradient is missing.
void adam_step(std::span<const NamedParam> params, AdamState& state, double lr);

struct TrainState {
    AdamState adam;
    Rng rng;
    std::size_t epoch = 0;     // epochs completed
    std::uint64_t step = 0;    // optimizer steps taken
};

struct EpochResult {
    std::size_t epoch = 0;
    double loss = 0.0;  // mean batch loss
    double lr = 0.0;
    std::vector<std::string> trainable;
    std::size_t batches = 0;

    nlohmann::json to_json() const;
};

/// Shuffles the scenes, cuts them into batches, samples one caption per image
/// occurrence, and takes one optimizer step per batch on the trainable groups.
EpochResult train_epoch(Model& model, const Dataset& dataset, const RunConfig& cfg, TrainState& state);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Everything needed to continue a run bit-exactly.
class TrainingSession {
public:
    TrainingSession(const RunConfig& cfg, const TokenVocab& vocab);

    const RunConfig& config() const { return cfg_; }
    const TokenVocab& vocab() const { return vocab_; }
    Model& model() { return model_; }
    const Model& model() const { return model_; }
    TrainState& state() { return state_; }
    const TrainState& state() const { return state_; }

    /// Extends or shortens the run; the epoch budget does not affect updates.
    void set_total_epochs(std::size_t epochs) { cfg_.epochs = epochs; }

    EpochResult run_epoch(const Dataset& dataset);

    void save(const std::filesystem::path& path) const;
    static TrainingSession load(const std::filesystem::path& path);

private:
    TrainingSession(const RunConfig& cfg, const TokenVocab& vocab, Model model)
        : cfg_(cfg), vocab_(vocab), model_(std::move(model)) {}

    RunConfig cfg_;
    TokenVocab vocab_;
    Model model_;
    TrainState state_;
};

}  // namespace semvis
