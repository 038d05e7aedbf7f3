#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "semvis/config.hpp"

using namespace semvis;
using nlohmann::json;

TEST_SUITE("config") {

TEST_CASE("defaults") {
    const RunConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.visual().pooling == Pooling::kSPool);
    CHECK(c.visual().downsample() == 16);
    CHECK(c.text().hidden == c.embed_dim);
    CHECK(c.loss().margin == 0.2);
    CHECK(c.loss().mining == Mining::kRandom);
    CHECK(c.schedule().freeze_epochs == 2);
    CHECK(c.localization().k == 5);
    CHECK(c.localization().selection == TopKSelection::kSigned);
    CHECK(RunConfig::keys().size() == c.to_json().size());
    for (const auto& key : RunConfig::keys()) {
        CHECK(c.to_json().contains(key));
        CHECK(RunConfig::describe().find("  " + key + " = ") != std::string::npos);
    }
}

TEST_CASE("json round trip and overrides") {
    RunConfig c;
    c.seed = 9;
    c.backbone_hidden = {8, 8};
    c.pooling = "gap";
    c.mining = "random";
    c.k = 3;
    c.selection = "absolute";
    c.lr = 0.004;
    c.random_crop = true;
    CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());

    const RunConfig over = RunConfig::from_json(json{{"lr", 0.5}}, c);
    CHECK(over.lr == 0.5);
    CHECK(over.seed == 9);
    CHECK(over.localization().selection == TopKSelection::kAbsolute);
    CHECK(over.localization().k == 3);
    CHECK(over.visual().downsample() == 8);
}

TEST_CASE("rejections") {
    CHECK_THROWS_AS(RunConfig::from_json(json{{"learning_rate", 0.1}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"lr", "fast"}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json::array()), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"pooling", "avg"}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"mining", "semi"}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"margin", 0.0}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"batch_size", 1}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"k", 65}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"image_dropout", 1.0}}), ContractError);
    CHECK_THROWS_AS(RunConfig::from_json(json{{"embed_dim", 0}}), Error);
}

TEST_CASE("warm-up mining") {
    const RunConfig c = RunConfig::from_json(json{{"warmup_epochs", 3}, {"mining", "hard"}});
    CHECK(c.loss_at(0).mining == Mining::kRandom);
    CHECK(c.loss_at(2).mining == Mining::kRandom);
    CHECK(c.loss_at(3).mining == Mining::kHard);
    CHECK(RunConfig{}.loss_at(0).mining == Mining::kRandom);
    CHECK(RunConfig{}.loss_at(9).mining == Mining::kRandom);
}

TEST_CASE("files") {
    const auto dir = std::filesystem::path(SEMVIS_TEST_TMP) / "config";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << R"({"embed_dim": 32, "adapt_channels": 32})";
        std::ofstream(dir / "bad.json") << "{ not json";
    }
    CHECK(RunConfig::load(dir / "ok.json").embed_dim == 32);
    CHECK_THROWS_AS(RunConfig::load(dir / "bad.json"), FormatError);
    CHECK_THROWS_AS(RunConfig::load(dir / "absent.json"), IoError);
}

}  // TEST_SUITE
