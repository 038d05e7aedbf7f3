#include "semvis/config.hpp"

#include <fstream>
#include <sstream>

namespace semvis {

using nlohmann::json;

void TrainSchedule::validate() const {
    if (batch_size < 2) {
        throw ContractError("batch_size must be at least 2");
    }
    if (!(lr0 >= 0.0)) {
        throw ContractError("learning rate must be nonnegative");
    }
}

const std::vector<std::string>& RunConfig::keys() {
    static const std::vector<std::string> k{
        "seed",          "backbone_hidden", "backbone_channels", "adapt_channels", "embed_dim",
        "word_dim",      "sru_layers",      "pooling",           "image_dropout",  "text_dropout",
        "random_crop",   "margin",          "mining",            "warmup_epochs",  "k",
        "selection",
        "lr",            "epochs",          "freeze_epochs",     "halving_until_epoch",
        "batch_size"};
    return k;
}

std::string RunConfig::describe() {
    const json defaults = RunConfig{}.to_json();
    std::ostringstream os;
    for (const auto& key : keys()) {
        os << "  " << key << " = " << defaults.at(key).dump() << '\n';
    }
    return os.str();
}

json RunConfig::to_json() const {
    return {{"seed", seed},
            {"backbone_hidden", backbone_hidden},
            {"backbone_channels", backbone_channels},
            {"adapt_channels", adapt_channels},
            {"embed_dim", embed_dim},
            {"word_dim", word_dim},
            {"sru_layers", sru_layers},
            {"pooling", pooling},
            {"image_dropout", image_dropout},
            {"text_dropout", text_dropout},
            {"random_crop", random_crop},
            {"margin", margin},
            {"mining", mining},
            {"warmup_epochs", warmup_epochs},
            {"k", k},
            {"selection", selection},
            {"lr", lr},
            {"epochs", epochs},
            {"freeze_epochs", freeze_epochs},
            {"halving_until_epoch", halving_until_epoch},
            {"batch_size", batch_size}};
}

RunConfig RunConfig::from_json(const json& j, const RunConfig& base) {
    if (!j.is_object()) {
        throw ContractError("run configuration must be a JSON object");
    }
    RunConfig c = base;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "backbone_hidden") c.backbone_hidden = value.get<std::vector<std::size_t>>();
            else if (key == "backbone_channels") c.backbone_channels = value.get<std::size_t>();
            else if (key == "adapt_channels") c.adapt_channels = value.get<std::size_t>();
            else if (key == "embed_dim") c.embed_dim = value.get<std::size_t>();
            else if (key == "word_dim") c.word_dim = value.get<std::size_t>();
            else if (key == "sru_layers") c.sru_layers = value.get<std::size_t>();
            else if (key == "pooling") c.pooling = value.get<std::string>();
            else if (key == "image_dropout") c.image_dropout = value.get<double>();
            else if (key == "text_dropout") c.text_dropout = value.get<double>();
            else if (key == "random_crop") c.random_crop = value.get<bool>();
            else if (key == "margin") c.margin = value.get<double>();
            else if (key == "mining") c.mining = value.get<std::string>();
            else if (key == "warmup_epochs") c.warmup_epochs = value.get<std::size_t>();
            else if (key == "k") c.k = value.get<std::size_t>();
            else if (key == "selection") c.selection = value.get<std::string>();
            else if (key == "lr") c.lr = value.get<double>();
            else if (key == "epochs") c.epochs = value.get<std::size_t>();
            else if (key == "freeze_epochs") c.freeze_epochs = value.get<std::size_t>();
            else if (key == "halving_until_epoch") c.halving_until_epoch = value.get<std::size_t>();
            else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
            else throw ContractError("unknown configuration key '" + key + "'");
        } catch (const json::exception& e) {
            throw ContractError("configuration key '" + key + "': " + e.what());
        }
    }
    c.validate();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open configuration " + path.string());
    }
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

VisualConfig RunConfig::visual() const {
    VisualConfig v;
    v.backbone_hidden = backbone_hidden;
    v.backbone_channels = backbone_channels;
    v.adapt_channels = adapt_channels;
    v.embed_dim = embed_dim;
    v.pooling = parse_pooling(pooling);
    v.dropout = image_dropout;
    v.random_crop = random_crop;
    return v;
}

TextConfig RunConfig::text() const {
    return {word_dim, sru_layers, embed_dim, text_dropout};
}

LossConfig RunConfig::loss() const { return {margin, parse_mining(mining)}; }

LossConfig RunConfig::loss_at(std::size_t epoch) const {
    LossConfig l = loss();
    if (epoch < warmup_epochs) l.mining = Mining::kRandom;
    return l;
}

TrainSchedule RunConfig::schedule() const {
    return {epochs, freeze_epochs, lr, halving_until_epoch, batch_size};
}

LocalizationConfig RunConfig::localization() const {
    LocalizationConfig l = k == 0 ? LocalizationConfig::for_embedding(embed_dim) : LocalizationConfig{k};
    l.selection = parse_selection(selection);
    return l;
}

void RunConfig::validate() const {
    visual().validate();
    text().validate();
    loss().validate();
    schedule().validate();
    localization().validate(embed_dim);
}

}  // namespace semvis
