#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "semvis/model.hpp"
#include "semvis/visual.hpp"

using namespace semvis;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

ModelConfig small_config(std::size_t d = 8) {
    RunConfig rc;
    rc.backbone_hidden = {4, 6, 8};
    rc.backbone_channels = 8;
    rc.adapt_channels = 8;
    rc.embed_dim = d;
    rc.word_dim = 4;
    return ModelConfig::from_run(rc);
}

void fill(Tensor t, std::mt19937_64& gen, double lo = -0.5, double hi = 0.5) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t.mutable_data()) v = dist(gen);
}

double norm(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data()) s += v * v;
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("visual") {

TEST_CASE("configuration") {
    VisualConfig cfg;
    CHECK(cfg.block_count() == 4);
    CHECK(cfg.downsample() == 16);
    CHECK(parse_pooling("spool") == Pooling::kSPool);
    CHECK(parse_pooling("gap") == Pooling::kGap);
    CHECK_THROWS_AS(parse_pooling("avg"), ContractError);
    cfg.embed_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ContractError);

    VisualConfig large;
    large.backbone_hidden = {64, 256, 512, 1024};
    large.backbone_channels = 2048;
    large.adapt_channels = 2400;
    large.embed_dim = 2400;
    CHECK_NOTHROW(large.validate());
    CHECK(large.downsample() == 32);
}

TEST_CASE("backbone shapes and zero input") {
    const Model model(small_config(), 3, 1);
    const auto& cfg = model.config().visual;
    CHECK(backbone_forward(Tensor(Shape{3, 16, 16}, 0.3), model.visual(), cfg).shape() == Shape{8, 1, 1});
    const Tensor zero_out = backbone_forward(Tensor(Shape{3, 64, 64}, 0.0), model.visual(), cfg);
    CHECK(zero_out.shape() == Shape{8, 4, 4});
    for (double v : zero_out.data()) CHECK(v == 0.0);
    CHECK_THROWS_AS(backbone_forward(Tensor(Shape{3, 40, 64}, 0.0), model.visual(), cfg), DimensionError);
    CHECK_THROWS_AS(backbone_forward(Tensor(Shape{1, 64, 64}, 0.0), model.visual(), cfg), DimensionError);
}

TEST_CASE("backbone agrees with chained direct convolution") {
    std::mt19937_64 gen(21);
    const Model model(small_config(), 3, 2);
    for (const auto& block : model.visual().backbone) fill(block.bias, gen, -0.1, 0.1);
    const Tensor image = oracle::random_tensor(gen, {3, 64, 64}, 0.0, 1.0);
    const auto got = values(backbone_forward(image, model.visual(), model.config().visual));

    Tensor x = image;
    for (const auto& block : model.visual().backbone) {
        auto out = oracle::conv2d(x, block.kernel, &block.bias, 2, 1);
        for (double& v : out) v = std::max(0.0, v);
        const std::size_t side = x.dim(1) / 2;
        x = Tensor(Shape{block.kernel.dim(0), side, side}, std::move(out));
    }
    const auto want = values(x);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("adaptation layer") {
    std::mt19937_64 gen(22);
    VisualParams p;
    p.adapt_kernel = Tensor(Shape{3, 3, 1, 1}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    p.adapt_bias = Tensor(Shape{3}, 0.0);
    const Tensor f = oracle::random_tensor(gen, {3, 2, 5});
    CHECK(values(adapt(f, p)) == values(f));

    p.adapt_kernel = Tensor(Shape{2, 3, 1, 1}, 0.0);
    p.adapt_bias = Tensor::vector({0.25, -1.5});
    const auto g = values(adapt(f, p));
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(g[i] == 0.25);
        CHECK(g[10 + i] == -1.5);
    }

    // Per-pixel linear map: kernel (D'×D) times the D×(hw) pixel matrix, plus bias.
    p.adapt_kernel = oracle::random_tensor(gen, {4, 3, 1, 1});
    p.adapt_bias = oracle::random_tensor(gen, {4});
    const auto got = values(adapt(f, p));
    auto want = oracle::matmul(values(p.adapt_kernel), values(f), 4, 3, 10);
    for (std::size_t o = 0; o < 4; ++o) {
        for (std::size_t i = 0; i < 10; ++i) {
            CHECK(got[o * 10 + i] == doctest::Approx(want[o * 10 + i] + p.adapt_bias[o]).epsilon(1e-13));
        }
    }
    CHECK_THROWS_AS(adapt(oracle::random_tensor(gen, {2, 2, 2}), p), DimensionError);
}

TEST_CASE("pooling modes") {
    const Tensor g(Shape{1, 2, 2}, std::vector<double>{1, -2, 3, 0});
    CHECK(pool(g, Pooling::kSPool).item() == 1.0);
    CHECK(pool(g, Pooling::kGap).item() == 0.5);
    const Tensor skew(Shape{1, 2, 2}, std::vector<double>{0, 0, 0, 8});
    CHECK(pool(skew, Pooling::kSPool).item() == 8.0);
    CHECK(pool(skew, Pooling::kGap).item() == 2.0);
}

TEST_CASE("projection") {
    VisualParams p;
    std::vector<double> eye(16, 0.0);
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    p.proj_weight = Tensor(Shape{4, 4}, eye);
    p.proj_bias = Tensor(Shape{4}, 0.0);
    const Tensor h = Tensor::vector({3, 4, 0, 0});
    CHECK(values(project(h, p, 0.5, Mode::kEval, {})) == std::vector<double>{0.6, 0.8, 0, 0});

    p.proj_weight = Tensor(Shape{4, 4}, 0.0);
    p.proj_bias = Tensor::vector({0, 2, 0, 0});
    CHECK(values(project(h, p, 0.5, Mode::kEval, {})) == std::vector<double>{0, 1, 0, 0});
    CHECK(values(project(Tensor::vector({-7, 1, 9, 2}), p, 0.5, Mode::kEval, {})) ==
          std::vector<double>{0, 1, 0, 0});

    p.proj_bias = Tensor(Shape{4}, 0.0);
    CHECK_THROWS_AS(project(h, p, 0.5, Mode::kEval, {}), DegenerateInputError);

    std::mt19937_64 gen(23);
    for (int trial = 0; trial < 50; ++trial) {
        p.proj_weight = oracle::random_tensor(gen, {6, 5});
        p.proj_bias = oracle::random_tensor(gen, {6});
        const Tensor x = project(oracle::random_tensor(gen, {5}), p, 0.5, Mode::kEval, {});
        CHECK(std::abs(norm(x) - 1.0) <= 1e-12);
    }

    // Dropout acts on h in train mode only.
    p.proj_weight = Tensor(Shape{4, 4}, eye);
    p.proj_bias = Tensor::vector({0.1, 0.1, 0.1, 0.1});
    const Tensor wide = Tensor::vector({1, 2, 3, 4});
    const auto eval = values(project(wide, p, 0.5, Mode::kEval, {1, 1, 1}));
    bool differs = false;
    for (std::uint64_t step = 0; step < 8 && !differs; ++step) {
        differs = values(project(wide, p, 0.5, Mode::kTrain, {1, 1, step})) != eval;
    }
    CHECK(differs);
}

TEST_CASE("encode_image composition and determinism") {
    std::mt19937_64 gen(24);
    const Model model(small_config(), 3, 3);
    const auto& cfg = model.config().visual;
    const Tensor image = oracle::random_tensor(gen, {3, 64, 64}, 0.0, 1.0);
    const ImageEncoding enc = model.encode_image(image, Mode::kEval);
    CHECK(enc.embedding.shape() == Shape{8});
    CHECK(enc.features.shape() == Shape{8, 4, 4});

    const Tensor manual =
        project(pool(adapt(backbone_forward(image, model.visual(), cfg), model.visual()), cfg.pooling),
                model.visual(), cfg.dropout, Mode::kEval, {});
    CHECK(values(manual) == values(enc.embedding));
    CHECK(values(model.encode_image(image, Mode::kEval).embedding) == values(enc.embedding));
    const Tensor other = oracle::random_tensor(gen, {3, 64, 64}, 0.0, 1.0);
    CHECK(values(model.encode_image(other, Mode::kEval).embedding) != values(enc.embedding));
    CHECK(std::abs(norm(enc.embedding) - 1.0) <= 1e-12);
}

TEST_CASE("variable input size and pooling swap") {
    std::mt19937_64 gen(25);
    ModelConfig mc = small_config();
    const Model spool(mc, 3, 4);
    mc.visual.pooling = Pooling::kGap;
    const Model gap(mc, 3, 4);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{16, 16}, {32, 48}, {80, 64}}) {
        const Tensor image = oracle::random_tensor(gen, {3, h, w}, 0.0, 1.0);
        const auto a = spool.encode_image(image, Mode::kEval);
        const auto b = gap.encode_image(image, Mode::kEval);
        CHECK(a.embedding.shape() == Shape{8});
        CHECK(a.embedding.shape() == b.embedding.shape());
        CHECK(a.features.shape() == Shape{8, h / 16, w / 16});
        CHECK(std::abs(norm(a.embedding) - 1.0) <= 1e-12);
    }
}

TEST_CASE("gradient reaches every visual parameter") {
    std::mt19937_64 gen(26);
    const Model model(small_config(), 3, 5);
    for (const auto& block : model.visual().backbone) fill(block.bias, gen, 0.05, 0.2);
    const Tensor image = oracle::random_tensor(gen, {3, 32, 32}, 0.0, 1.0);
    const Tensor probe = oracle::random_tensor(gen, {8});
    std::vector<Tensor> params;
    for (const auto& p : model.parameters()) {
        if (p.group != ParamGroup::kPhi && p.group != ParamGroup::kWordTable) params.push_back(p.tensor);
    }
    for (auto& p : params) p.set_requires_grad(true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = dot(model.encode_image(image, Mode::kEval).embedding, probe);
    }
    tape.backward(loss);
    for (auto& p : params) {
        REQUIRE(p.has_grad());
        double mag = 0.0;
        for (double g : p.grad()) mag += std::abs(g);
        CHECK(mag > 0.0);
        p.set_requires_grad(false);
        p.zero_grad();
    }
}

TEST_CASE("project gradient") {
    std::mt19937_64 gen(27);
    VisualParams p;
    p.proj_weight = oracle::random_tensor(gen, {5, 6});
    p.proj_bias = oracle::random_tensor(gen, {5});
    Tensor h = oracle::random_tensor(gen, {6});
    const Tensor probe = oracle::random_tensor(gen, {5});
    std::vector<Tensor> params{h, p.proj_weight, p.proj_bias};
    CHECK(grad_check([&] { return dot(project(h, p, 0.0, Mode::kEval, {}), probe); }, params) < 1e-6);
}

TEST_CASE("random crop keeps the input size") {
    Rng rng(3);
    std::mt19937_64 gen(28);
    const Tensor image = oracle::random_tensor(gen, {3, 32, 48}, 0.0, 1.0);
    const Tensor crop = random_crop_resize(image, rng);
    CHECK(crop.shape() == image.shape());
    for (double v : crop.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    Rng again(3);
    CHECK(values(random_crop_resize(image, again)) == values(crop));
}

}  // TEST_SUITE
