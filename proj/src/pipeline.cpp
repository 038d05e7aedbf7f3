#include "semvis/pipeline.hpp"

#include <algorithm>
#include <map>

#include "semvis/image_io.hpp"
#include "semvis/objective.hpp"
#include "semvis/training.hpp"

namespace semvis {

DatasetEmbeddings embed_dataset(const Model& model, const Dataset& dataset) {
    TapeScope no_tape(nullptr);
    std::vector<Tensor> images, captions;
    DatasetEmbeddings out;
    for (std::size_t i = 0; i < dataset.scenes.size(); ++i) {
        const Scene& scene = dataset.scenes[i];
        images.push_back(model.encode_image(image_to_tensor(scene.image), Mode::kEval).embedding);
        for (const auto& caption : scene.captions) {
            captions.push_back(model.encode_text(tokenize(caption, dataset.vocab), Mode::kEval));
            out.caption_owner.push_back(i);
        }
    }
    if (images.empty() || captions.empty()) {
        throw ContractError("dataset holds no image/caption pairs");
    }
    out.images = stack(images);
    out.captions = stack(captions);
    return out;
}

RetrievalReports evaluate_retrieval(const Model& model, const Dataset& dataset) {
    const auto emb = embed_dataset(model, dataset);
    TapeScope no_tape(nullptr);
    return eval_retrieval(similarity_matrix(emb.images, emb.captions), emb.caption_owner);
}

PointingReport evaluate_pointing(const Model& model, const Dataset& dataset, const LocalizationConfig& cfg) {
    cfg.validate(model.config().visual.embed_dim);
    TapeScope no_tape(nullptr);
    const auto queries = region_queries(dataset);
    std::map<std::size_t, Tensor> maps;  // activation maps per image
    const Tensor& projection = model.visual().proj_weight;
    return eval_pointing(queries, [&](const RegionQuery& q) {
        auto it = maps.find(q.image_index);
        if (it == maps.end()) {
            const auto enc = model.encode_image(image_to_tensor(dataset.scenes[q.image_index].image), Mode::kEval);
            it = maps.emplace(q.image_index, activation_maps(enc.features, projection)).first;
        }
        const Tensor v = model.encode_text(tokenize(q.phrase, dataset.vocab), Mode::kEval);
        return heatmap(it->second, v.data(), cfg, q.image_height, q.image_width);
    });
}

Localization localize(const Model& model, const TokenVocab& vocab, const RgbImage& image,
                      const std::string& phrase, const LocalizationConfig& cfg) {
    cfg.validate(model.config().visual.embed_dim);
    TapeScope no_tape(nullptr);
    const auto tokens = tokenize(phrase, vocab);
    Localization out;
    out.all_unknown = std::all_of(tokens.begin(), tokens.end(), [](std::size_t t) { return t == kUnknownIndex; });
    const auto enc = model.encode_image(image_to_tensor(image), Mode::kEval);
    const Tensor v = model.encode_text(tokens, Mode::kEval);
    out.heatmap = heatmap(activation_maps(enc.features, model.visual().proj_weight), v.data(), cfg,
                          image.height, image.width);
    out.point = point(out.heatmap);
    out.heat_max = heat_max(out.heatmap);
    return out;
}

namespace {

nlohmann::json shape_json(const Shape& s) { return nlohmann::json(s); }

}  // namespace

nlohmann::json dry_run(const RunConfig& cfg, std::size_t vocab_size, std::size_t image_size) {
    cfg.validate();
    const ModelConfig mc = ModelConfig::from_run(cfg);
    const auto& v = mc.visual;
    if (image_size == 0 || image_size % v.downsample() != 0) {
        throw DimensionError("image size " + std::to_string(image_size) + " is not a multiple of the downsample factor " +
                             std::to_string(v.downsample()));
    }
    const auto specs = parameter_specs(mc, vocab_size);

    nlohmann::json params = nlohmann::json::array();
    std::size_t total = 0;
    for (const auto& s : specs) {
        params.push_back({{"name", s.name}, {"group", to_string(s.group)}, {"shape", shape_json(s.shape)}});
        total += shape_numel(s.shape);
    }
    const std::size_t grid = image_size / v.downsample();
    const std::size_t pooled_width = v.adapt_channels;
    const TrainSchedule sched = cfg.schedule();
    const LocalizationConfig loc = cfg.localization();

    nlohmann::json lr = nlohmann::json::array();
    for (std::size_t e = 0; e <= sched.halving_until_epoch + 1; ++e) {
        lr.push_back(effective_lr(e, sched));
    }
    return {
        {"parameters", params},
        {"parameter_count", total},
        {"activations",
         {{"image", shape_json({3, image_size, image_size})},
          {"backbone_features", shape_json({v.backbone_channels, grid, grid})},
          {"adapted_features", shape_json({v.adapt_channels, grid, grid})},
          {"pooled", shape_json({pooled_width})},
          {"image_embedding", shape_json({v.embed_dim})},
          {"word_vectors", shape_json({cfg.word_dim})},
          {"sru_hidden", shape_json({mc.text.hidden})},
          {"text_embedding", shape_json({mc.text.hidden})},
          {"activation_maps", shape_json({v.embed_dim, grid, grid})},
          {"similarity", shape_json({sched.batch_size, sched.batch_size})}}},
        {"downsample", v.downsample()},
        {"k", loc.k},
        {"batch_size", sched.batch_size},
        {"freeze_epochs", sched.freeze_epochs},
        {"lr_by_epoch", lr},
    };
}

RunConfig large_scale_config() {
    RunConfig c;
    c.backbone_hidden = {64, 256, 512, 1024};  // five stride-2 blocks, downsample 32
    c.backbone_channels = 2048;
    c.adapt_channels = 2400;
    c.embed_dim = 2400;
    c.word_dim = 620;
    c.sru_layers = 4;
    c.batch_size = 160;
    c.lr = 0.001;
    c.halving_until_epoch = 7;
    c.freeze_epochs = 8;
    c.k = 180;
    c.mining = "hard";
    c.validate();
    return c;
}

}  // namespace semvis
