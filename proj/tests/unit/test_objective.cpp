#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "semvis/objective.hpp"

using namespace semvis;

namespace {

std::vector<std::vector<double>> rows_of(const Tensor& s) {
    std::vector<std::vector<double>> out(s.dim(0), std::vector<double>(s.dim(1)));
    for (std::size_t i = 0; i < s.dim(0); ++i) {
        for (std::size_t j = 0; j < s.dim(1); ++j) out[i][j] = s[i * s.dim(1) + j];
    }
    return out;
}

Tensor unit_rows(std::mt19937_64& gen, std::size_t n, std::size_t d) {
    std::vector<double> v;
    for (std::size_t i = 0; i < n; ++i) {
        const auto u = oracle::random_unit(gen, d);
        v.insert(v.end(), u.begin(), u.end());
    }
    return Tensor(Shape{n, d}, std::move(v));
}

std::vector<std::size_t> random_ids(std::mt19937_64& gen, std::size_t n) {
    std::uniform_int_distribution<std::size_t> pick(0, n / 2);
    std::vector<std::size_t> ids(n);
    do {
        for (auto& id : ids) id = pick(gen);
    } while (std::set<std::size_t>(ids.begin(), ids.end()).size() < 2);
    return ids;
}

const LossConfig kHard{0.2, Mining::kHard};
const LossConfig kRandom{0.2, Mining::kRandom};

}  // namespace

TEST_SUITE("objective") {

TEST_CASE("cosine and triplet hinge") {
    const std::vector<double> a{0.6, 0.8}, e0{1, 0}, e1{0, 1};
    CHECK(cosine_sim(a, a) == doctest::Approx(1.0));
    CHECK(cosine_sim(e0, e1) == 0.0);
    CHECK(cosine_sim(a, e0) == 0.6);
    CHECK_THROWS_AS(cosine_sim(a, std::vector<double>{1}), DimensionError);

    // Unit vectors realizing s(y,z) and s(y,z') in the plane.
    const auto at = [](double c) { return std::vector<double>{c, std::sqrt(1 - c * c)}; };
    CHECK(triplet_loss(e0, at(0.9), at(0.5), 0.2) == 0.0);
    CHECK(triplet_loss(e0, at(0.5), at(0.6), 0.2) == doctest::Approx(0.3));
    CHECK(triplet_loss(e0, at(0.3), at(0.3), 0.2) == doctest::Approx(0.2));
}

TEST_CASE("worked two-pair batch") {
    const Tensor s = Tensor::matrix(2, 2, {0.9, 0.8, 0.1, 0.7});
    const std::vector<std::size_t> ids{0, 1};
    CHECK(ranking_loss(s, ids, kHard).item() == doctest::Approx(0.2).epsilon(1e-15));
    // With one negative per query both strategies agree.
    CHECK(ranking_loss(s, ids, kRandom).item() == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("perfectly separated batch") {
    std::vector<double> eye(16, 0.0);
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
    const Tensor x(Shape{4, 4}, eye);
    const std::vector<std::size_t> ids{0, 1, 2, 3};
    CHECK(batch_loss(x, x, ids, kHard).item() == 0.0);
    CHECK(batch_loss(x, x, ids, kRandom).item() == 0.0);
    CHECK(rows_of(similarity_matrix(x, x)) == rows_of(x));
}

TEST_CASE("errors") {
    const Tensor s = Tensor::matrix(2, 2, {0.9, 0.8, 0.1, 0.7});
    CHECK_THROWS_AS(ranking_loss(s, std::vector<std::size_t>{3, 3}, kHard), ContractError);
    CHECK_THROWS_AS(ranking_loss(s, std::vector<std::size_t>{0}, kHard), DimensionError);
    CHECK_THROWS_AS(ranking_loss(Tensor::matrix(1, 2, {0, 0}), std::vector<std::size_t>{0}, kHard),
                    DimensionError);
    CHECK_THROWS_AS(ranking_loss(s, std::vector<std::size_t>{0, 1}, LossConfig{0.0, Mining::kHard}),
                    ContractError);
    CHECK(parse_mining("hard") == Mining::kHard);
    CHECK(parse_mining("random") == Mining::kRandom);
    CHECK_THROWS_AS(parse_mining("semi"), ContractError);
    CHECK_THROWS_AS(similarity_matrix(Tensor(Shape{2, 3}), Tensor(Shape{2, 4})), DimensionError);
}

TEST_CASE("similarity matrix matches per-entry cosine") {
    std::mt19937_64 gen(41);
    const Tensor x = unit_rows(gen, 3, 5), v = unit_rows(gen, 4, 5);
    const auto s = rows_of(similarity_matrix(x, v));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(s[i][j] == doctest::Approx(cosine_sim(row(x, i).data(), row(v, j).data())).epsilon(1e-15));
        }
    }
    CHECK(similarity_matrix(unit_rows(gen, 1, 5), v).shape() == Shape{1, 4});
}

TEST_CASE("loss matches triplet enumeration") {
    std::mt19937_64 gen(42);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 7;
        const Tensor s = similarity_matrix(unit_rows(gen, n, 4), unit_rows(gen, n, 4));
        const auto ids = random_ids(gen, n);
        const auto m = rows_of(s);
        for (bool hard : {true, false}) {
            const double want = oracle::ranking_loss(m, ids, 0.2, hard);
            const double got = ranking_loss(s, ids, hard ? kHard : kRandom).item();
            CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("properties on random batches") {
    std::mt19937_64 gen(43);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + trial % 6;
        const Tensor x = unit_rows(gen, n, 3), v = unit_rows(gen, n, 3);
        const auto ids = random_ids(gen, n);
        const double hard = batch_loss(x, v, ids, kHard).item();
        const double rnd = batch_loss(x, v, ids, kRandom).item();
        CHECK(hard >= 0.0);
        CHECK(rnd >= 0.0);
        CHECK(hard >= rnd - 1e-15);

        // The hard term of every query dominates each of its triplets.
        const auto s = rows_of(similarity_matrix(x, v));
        for (std::size_t q = 0; q < n; ++q) {
            double term = 0.0;
            for (std::size_t m = 0; m < n; ++m) {
                if (ids[m] != ids[q]) term = std::max(term, oracle::hinge(0.2, s[q][q], s[q][m]));
            }
            for (std::size_t m = 0; m < n; ++m) {
                if (ids[m] == ids[q]) continue;
                CHECK(term >= triplet_loss(row(x, q).data(), row(v, q).data(), row(v, m).data(), 0.2) - 1e-15);
            }
        }
    }
}

TEST_CASE("loss depends only on the similarity matrix") {
    std::mt19937_64 gen(44);
    const Tensor x = unit_rows(gen, 5, 4), v = unit_rows(gen, 5, 4);
    // A common rotation of both modalities leaves every inner product unchanged.
    const double c = std::cos(0.7), s = std::sin(0.7);
    const Tensor rot = Tensor::matrix(4, 4, {c, -s, 0, 0, s, c, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
    const std::vector<std::size_t> ids{0, 1, 2, 3, 4};
    for (const auto& cfg : {kHard, kRandom}) {
        const double base = batch_loss(x, v, ids, cfg).item();
        const double turned = batch_loss(matmul(x, rot), matmul(v, rot), ids, cfg).item();
        CHECK(turned == doctest::Approx(base).epsilon(1e-13));
    }
}

TEST_CASE("same-id captions are never negatives") {
    // Rows 0 and 1 share an image: their mutual high similarity must not count.
    const Tensor s = Tensor::matrix(3, 3, {0.9, 0.95, 0.0, 0.95, 0.9, 0.0, 0.0, 0.0, 0.9});
    CHECK(ranking_loss(s, std::vector<std::size_t>{7, 7, 8}, kHard).item() == 0.0);
    CHECK(ranking_loss(s, std::vector<std::size_t>{7, 6, 8}, kHard).item() > 0.0);
}

TEST_CASE("gradients") {
    std::mt19937_64 gen(45);
    for (const auto& cfg : {kHard, kRandom}) {
        Tensor x = unit_rows(gen, 4, 3), v = unit_rows(gen, 4, 3);
        const std::vector<std::size_t> ids{0, 1, 1, 2};
        std::vector<Tensor> params{x, v};
        CHECK(grad_check([&] { return batch_loss(x, v, ids, cfg); }, params) < 1e-6);
    }

    // An embedding outside every active hinge receives zero gradient.
    std::vector<double> eye(9, 0.0);
    for (std::size_t i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    Tensor x(Shape{3, 3}, eye);
    Tensor v = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0.9, 0, std::sqrt(1 - 0.81)});
    x.set_requires_grad(true);
    v.set_requires_grad(true);
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = batch_loss(x, v, std::vector<std::size_t>{0, 1, 2}, kHard);
    }
    tape.backward(loss);
    CHECK(loss.item() > 0.0);
    REQUIRE(v.has_grad());
    for (std::size_t c = 0; c < 3; ++c) CHECK(v.grad()[1 * 3 + c] == 0.0);
}

}  // TEST_SUITE
