#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semvis/config.hpp"
#include "semvis/text.hpp"
#include "semvis/visual.hpp"

namespace semvis {

/// Training groups. theta0: backbone, theta1: adaptation layer, theta2: image
/// projection, phi: SRU stack.
enum class ParamGroup { kTheta0, kTheta1, kTheta2, kPhi, kWordTable };

std::string to_string(ParamGroup group);

struct ParamSpec {
    std::string name;
    ParamGroup group;
    Shape shape;
    double init_bound;  // U(-b, b); 0 means zero-initialized
};

struct ModelConfig {
    VisualConfig visual;
    TextConfig text;

    static ModelConfig from_run(const RunConfig& run) { return {run.visual(), run.text()}; }
    void validate() const;
};

/// Parameter names, groups and shapes in canonical order, computed without
/// allocating any storage.
std::vector<ParamSpec> parameter_specs(const ModelConfig& cfg, std::size_t vocab_size);

struct NamedParam {
    std::string name;
    ParamGroup group;
    Tensor tensor;
};

class Model {
public:
    /// Draws every parameter from one generator seeded with `seed`, in
    /// parameter_specs order.
    Model(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed);

    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    /// Deep copy with independent storage and no gradient state.
    Model clone() const;

    const ModelConfig& config() const { return cfg_; }
    std::size_t vocab_size() const { return vocab_size_; }
    const VisualParams& visual() const { return visual_; }
    const TextParams& text() const { return text_; }

    /// Canonical-order handles aliasing the live parameters.
    std::vector<NamedParam> parameters() const;

    ImageEncoding encode_image(const Tensor& image, Mode mode, const DropoutKey& key = {}) const;
    Tensor encode_text(std::span<const std::size_t> tokens, Mode mode, const DropoutKey& key = {}) const;

private:
    Model(const ModelConfig& cfg, std::size_t vocab_size) : cfg_(cfg), vocab_size_(vocab_size) {}
    void allocate(const std::vector<std::vector<double>>& values);

    ModelConfig cfg_;
    std::size_t vocab_size_ = 0;
    VisualParams visual_;
    TextParams text_;
};

}  // namespace semvis
