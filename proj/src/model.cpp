#include "semvis/model.hpp"

#include <cmath>

namespace semvis {

std::string to_string(ParamGroup group) {
    switch (group) {
        case ParamGroup::kTheta0: return "theta0";
        case ParamGroup::kTheta1: return "theta1";
        case ParamGroup::kTheta2: return "theta2";
        case ParamGroup::kPhi: return "phi";
        case ParamGroup::kWordTable: return "word_table";
    }
    return "?";
}

void ModelConfig::validate() const {
    visual.validate();
    text.validate();
    if (text.hidden != visual.embed_dim) {
        throw DimensionError("SRU width " + std::to_string(text.hidden) +
                             " must equal the joint embedding size " + std::to_string(visual.embed_dim));
    }
}

namespace {

constexpr double kWordInitBound = 0.1;

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

std::vector<ParamSpec> parameter_specs(const ModelConfig& cfg, std::size_t vocab_size) {
    cfg.validate();
    if (vocab_size == 0) {
        throw ContractError("vocabulary must hold at least the unknown token");
    }
    std::vector<ParamSpec> specs;
    const auto& v = cfg.visual;

    std::size_t in = 3;
    for (std::size_t b = 0; b < v.block_count(); ++b) {
        const std::size_t out = b < v.backbone_hidden.size() ? v.backbone_hidden[b] : v.backbone_channels;
        const std::string prefix = "visual.block" + std::to_string(b);
        specs.push_back({prefix + ".kernel", ParamGroup::kTheta0, {out, in, 3, 3}, fan_in_bound(in * 9)});
        specs.push_back({prefix + ".bias", ParamGroup::kTheta0, {out}, 0.0});
        in = out;
    }
    specs.push_back({"visual.adapt.kernel", ParamGroup::kTheta1,
                     {v.adapt_channels, v.backbone_channels, 1, 1}, fan_in_bound(v.backbone_channels)});
    specs.push_back({"visual.adapt.bias", ParamGroup::kTheta1, {v.adapt_channels}, 0.0});
    specs.push_back({"visual.proj.weight", ParamGroup::kTheta2, {v.embed_dim, v.adapt_channels},
                     fan_in_bound(v.adapt_channels)});
    specs.push_back({"visual.proj.bias", ParamGroup::kTheta2, {v.embed_dim}, 0.0});

    const auto& t = cfg.text;
    specs.push_back({"text.word_table", ParamGroup::kWordTable, {vocab_size, t.word_dim}, kWordInitBound});
    in = t.word_dim;
    for (std::size_t l = 0; l < t.layers; ++l) {
        const std::string prefix = "text.sru" + std::to_string(l);
        specs.push_back({prefix + ".weight", ParamGroup::kPhi, {3 * t.hidden, in}, fan_in_bound(in)});
        specs.push_back({prefix + ".forget_bias", ParamGroup::kPhi, {t.hidden}, 0.0});
        specs.push_back({prefix + ".reset_bias", ParamGroup::kPhi, {t.hidden}, 0.0});
        if (in != t.hidden) {
            specs.push_back({prefix + ".highway", ParamGroup::kPhi, {t.hidden, in}, fan_in_bound(in)});
        }
        in = t.hidden;
    }
    return specs;
}

Model::Model(const ModelConfig& cfg, std::size_t vocab_size, std::uint64_t seed)
    : cfg_(cfg), vocab_size_(vocab_size) {
    Rng rng(seed);
    std::vector<std::vector<double>> values;
    for (const auto& spec : parameter_specs(cfg, vocab_size)) {
        std::vector<double> data(shape_numel(spec.shape), 0.0);
        if (spec.init_bound > 0.0) {
            for (double& x : data) x = rng.uniform(-spec.init_bound, spec.init_bound);
        }
        values.push_back(std::move(data));
    }
    allocate(values);
}

void Model::allocate(const std::vector<std::vector<double>>& values) {
    const auto specs = parameter_specs(cfg_, vocab_size_);
    std::size_t i = 0;
    auto next = [&] {
        Tensor t(specs[i].shape, values[i]);
        ++i;
        return t;
    };
    visual_ = {};
    for (std::size_t b = 0; b < cfg_.visual.block_count(); ++b) {
        ConvBlock block;
        block.kernel = next();
        block.bias = next();
        visual_.backbone.push_back(block);
    }
    visual_.adapt_kernel = next();
    visual_.adapt_bias = next();
    visual_.proj_weight = next();
    visual_.proj_bias = next();

    text_ = {};
    text_.word_table = next();
    std::size_t in = cfg_.text.word_dim;
    for (std::size_t l = 0; l < cfg_.text.layers; ++l) {
        SruLayer layer;
        layer.weight = next();
        layer.forget_bias = next();
        layer.reset_bias = next();
        if (in != cfg_.text.hidden) layer.highway = next();
        text_.layers.push_back(layer);
        in = cfg_.text.hidden;
    }
}

Model Model::clone() const {
    Model copy(cfg_, vocab_size_);
    std::vector<std::vector<double>> values;
    for (const auto& p : parameters()) {
        values.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    }
    copy.allocate(values);
    return copy;
}

std::vector<NamedParam> Model::parameters() const {
    const auto specs = parameter_specs(cfg_, vocab_size_);
    std::vector<Tensor> handles;
    for (const auto& block : visual_.backbone) {
        handles.push_back(block.kernel);
        handles.push_back(block.bias);
    }
    handles.push_back(visual_.adapt_kernel);
    handles.push_back(visual_.adapt_bias);
    handles.push_back(visual_.proj_weight);
    handles.push_back(visual_.proj_bias);
    handles.push_back(text_.word_table);
    for (const auto& layer : text_.layers) {
        handles.push_back(layer.weight);
        handles.push_back(layer.forget_bias);
        handles.push_back(layer.reset_bias);
        if (layer.highway.defined()) handles.push_back(layer.highway);
    }
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        out.push_back({specs[i].name, specs[i].group, handles[i]});
    }
    return out;
}

ImageEncoding Model::encode_image(const Tensor& image, Mode mode, const DropoutKey& key) const {
    return semvis::encode_image(image, visual_, cfg_.visual, mode, key);
}

Tensor Model::encode_text(std::span<const std::size_t> tokens, Mode mode, const DropoutKey& key) const {
    return semvis::encode_text(tokens, text_, cfg_.text, mode, key);
}

}  // namespace semvis
