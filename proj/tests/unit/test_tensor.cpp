#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "semvis/tensor.hpp"

using namespace semvis;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("shape and storage invariants") {
    Tensor t(Shape{2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.data().size() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    CHECK(Tensor::scalar(4.0).item() == 4.0);
    CHECK_THROWS_AS(t.item(), DimensionError);
}

TEST_CASE("matmul hand cases") {
    const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
    const Tensor col = Tensor::matrix(2, 1, {3, 4});
    CHECK(values(matmul(eye, col)) == std::vector<double>{3, 4});
    CHECK(values(matmul(Tensor::matrix(1, 2, {1, 2}), col)) == std::vector<double>{11});
    CHECK_THROWS_AS(matmul(Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(1, 2, {1, 2})), DimensionError);
}

TEST_CASE("matmul matches the triple-loop oracle") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + gen() % 5, k = 1 + gen() % 5, n = 1 + gen() % 5;
        const Tensor a = oracle::random_tensor(gen, {m, k});
        const Tensor b = oracle::random_tensor(gen, {k, n});
        const auto got = values(matmul(a, b));
        const auto want = oracle::matmul(values(a), values(b), m, k, n);
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
}

TEST_CASE("matmul gradient of sum") {
    std::mt19937_64 gen(4);
    Tensor a = oracle::random_tensor(gen, {3, 4});
    Tensor b = oracle::random_tensor(gen, {4, 2});
    std::vector<Tensor> params{a, b};
    CHECK(grad_check([&] { return sum(matmul(a, b)); }, params) < 1e-6);
}

TEST_CASE("conv2d hand cases") {
    const Tensor in(Shape{1, 2, 2}, std::vector<double>{1, 2, 3, 4});
    CHECK(values(conv2d(in, Tensor(Shape{1, 1, 2, 2}, 1.0), 1, 0)) == std::vector<double>{10});
    CHECK(values(conv2d(in, Tensor(Shape{1, 1, 1, 1}, 2.0), 1, 0)) == std::vector<double>{2, 4, 6, 8});
    CHECK_THROWS_AS(conv2d(in, Tensor(Shape{1, 1, 3, 3}, 1.0), 1, 0), DimensionError);
    CHECK_THROWS_AS(conv2d(in, Tensor(Shape{1, 2, 1, 1}, 1.0), 1, 0), DimensionError);
}

TEST_CASE("conv2d matches direct convolution") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t c = 1 + gen() % 3, o = 1 + gen() % 3, h = 3 + gen() % 6, w = 3 + gen() % 6;
        const std::size_t k = 1 + gen() % 3, stride = 1 + gen() % 2, pad = gen() % 2;
        const Tensor in = oracle::random_tensor(gen, {c, h, w});
        const Tensor kernel = oracle::random_tensor(gen, {o, c, k, k});
        const Tensor bias = oracle::random_tensor(gen, {o});
        const auto got = values(conv2d(in, kernel, bias, stride, pad));
        const auto want = oracle::conv2d(in, kernel, &bias, stride, pad);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
    }
}

TEST_CASE("conv2d output size formula") {
    const Tensor in(Shape{2, 7, 5}, 0.5);
    const Tensor out = conv2d(in, Tensor(Shape{3, 2, 3, 3}, 0.1), 2, 1);
    CHECK(out.shape() == Shape{3, 4, 3});
}

TEST_CASE("conv2d gradients") {
    std::mt19937_64 gen(6);
    Tensor in = oracle::random_tensor(gen, {2, 5, 5});
    Tensor kernel = oracle::random_tensor(gen, {3, 2, 3, 3});
    Tensor bias = oracle::random_tensor(gen, {3});
    Tensor probe = oracle::random_tensor(gen, {3, 3, 3});
    std::vector<Tensor> params{in, kernel, bias};
    CHECK(grad_check([&] { return dot(reshape(conv2d(in, kernel, bias, 2, 1), {27}), reshape(probe, {27})); },
                     params) < 1e-5);
}

TEST_CASE("spatial_max_min hand cases and tie rule") {
    const Tensor ch(Shape{1, 2, 2}, std::vector<double>{1, -2, 3, 0});
    CHECK(spatial_max_min(ch).item() == 1.0);
    CHECK(spatial_max_min(Tensor(Shape{1, 3, 3}, 2.5)).item() == 5.0);
    CHECK(spatial_max_min(Tensor(Shape{1, 1, 1}, -1.25)).item() == -2.5);

    // Constant map: both gradients go to cell 0.
    Tensor flat(Shape{1, 2, 2}, 1.0);
    flat.set_requires_grad(true);
    Tape tape;
    Tensor out;
    {
        TapeScope scope(tape);
        out = sum(spatial_max_min(flat));
    }
    tape.backward(out);
    CHECK(values(Tensor(Shape{4}, std::vector<double>(flat.grad().begin(), flat.grad().end()))) ==
          std::vector<double>{2, 0, 0, 0});
}

TEST_CASE("spatial_max_min equals exhaustive scan") {
    std::mt19937_64 gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        const Tensor t = oracle::random_tensor(gen, {1 + gen() % 4, 1 + gen() % 4, 1 + gen() % 5});
        CHECK(values(spatial_max_min(t)) == oracle::max_plus_min(t));
    }
}

TEST_CASE("spatial_mean") {
    CHECK(spatial_mean(Tensor(Shape{1, 2, 2}, std::vector<double>{1, -2, 3, 0})).item() == 0.5);
}

TEST_CASE("l2_normalize") {
    CHECK(values(l2_normalize(Tensor::vector({3, 4}))) == std::vector<double>{0.6, 0.8});
    const Tensor unit = Tensor::vector({0.0, 1.0, 0.0});
    CHECK(values(l2_normalize(unit)) == values(unit));
    CHECK_THROWS_AS(l2_normalize(Tensor::vector({0.0, 0.0})), DegenerateInputError);
    CHECK_THROWS_AS(l2_normalize(Tensor::vector({1e-13, 0.0})), DegenerateInputError);

    std::mt19937_64 gen(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto y = values(l2_normalize(oracle::random_tensor(gen, {1 + gen() % 20}, -5, 5)));
        double n2 = 0.0;
        for (double v : y) n2 += v * v;
        CHECK(std::abs(std::sqrt(n2) - 1.0) <= 1e-12);
    }
    Tensor x = oracle::random_tensor(gen, {7});
    const Tensor probe = oracle::random_tensor(gen, {7});
    std::vector<Tensor> params{x};
    CHECK(grad_check([&] { return dot(l2_normalize(x), probe); }, params) < 1e-6);
}

TEST_CASE("elementwise suite") {
    CHECK(values(relu(Tensor::vector({-1, 0, 2}))) == std::vector<double>{0, 0, 2});
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(tanh(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(values(add(Tensor::vector({1, 2}), Tensor::vector({3, 4}))) == std::vector<double>{4, 6});
    CHECK(values(sub(Tensor::vector({1, 2}), Tensor::vector({3, 5}))) == std::vector<double>{-2, -3});
    CHECK(values(mul(Tensor::vector({1, 2}), Tensor::vector({3, 4}))) == std::vector<double>{3, 8});
    CHECK(values(scale(Tensor::vector({1, -2}), 3.0)) == std::vector<double>{3, -6});
    CHECK(sum(Tensor::vector({1, 2, 3})).item() == 6.0);
    CHECK(max_reduce_scalar(Tensor::vector({1, 5, 5, 2})).item() == 5.0);
    CHECK_THROWS_AS(add(Tensor::vector({1}), Tensor::vector({1, 2})), DimensionError);

    std::mt19937_64 gen(9);
    for (int point = 0; point < 10; ++point) {
        Tensor a = oracle::random_tensor(gen, {6});
        Tensor b = oracle::random_tensor(gen, {6});
        // keep relu away from its kink
        for (double& v : a.mutable_data()) v = v < 0 ? v - 0.1 : v + 0.1;
        std::vector<Tensor> params{a, b};
        CHECK(grad_check([&] { return sum(mul(add(sigmoid(a), tanh(b)), sub(relu(a), scale(b, 0.5)))); },
                         params) < 1e-6);
    }
}

TEST_CASE("dropout") {
    const Tensor x = Tensor::vector(std::vector<double>(1000, 1.0));
    CHECK(values(dropout(x, 0.0, {1, 2, 3}, true)) == values(x));
    CHECK(values(dropout(x, 0.5, {1, 2, 3}, false)) == values(x));
    const auto a = values(dropout(x, 0.5, {1, 2, 3}, true));
    CHECK(a == values(dropout(x, 0.5, {1, 2, 3}, true)));
    CHECK(a != values(dropout(x, 0.5, {1, 2, 4}, true)));
    std::size_t kept = 0;
    for (double v : a) {
        CHECK((v == 0.0 || v == 2.0));
        kept += v != 0.0;
    }
    // 1000 Bernoulli(0.5) draws: 4 sigma is about 63.
    CHECK(kept > 437);
    CHECK(kept < 563);
    CHECK_THROWS_AS(dropout(x, 1.0, {}, true), ContractError);
    CHECK_THROWS_AS(dropout(x, -0.1, {}, true), ContractError);
}

TEST_CASE("backward contract") {
    Tensor x = Tensor::vector({1, -2, 3});
    x.set_requires_grad(true);
    {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = sum(x);
        }
        tape.backward(loss);
        CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 1, 1});
        CHECK_THROWS_AS(tape.backward(loss), ContractError);
    }
    x.zero_grad();
    {
        Tape tape;
        Tensor loss, vec;
        {
            TapeScope scope(tape);
            vec = mul(x, x);
            loss = sum(vec);
        }
        CHECK_THROWS_AS(tape.backward(vec), ContractError);
        tape.backward(loss);
        CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{2, -4, 6});
    }
    // Nothing recorded without an active tape.
    x.zero_grad();
    const Tensor untracked = sum(x);
    CHECK_FALSE(untracked.requires_grad());
    CHECK_THROWS_AS(backward(untracked), ContractError);
}

TEST_CASE("gather_rows scatters only into used rows") {
    Tensor table(Shape{4, 2}, std::vector<double>{0, 1, 2, 3, 4, 5, 6, 7});
    table.set_requires_grad(true);
    const std::vector<std::size_t> idx{2, 0, 2};
    Tape tape;
    Tensor loss;
    {
        TapeScope scope(tape);
        loss = sum(gather_rows(table, idx));
    }
    tape.backward(loss);
    CHECK(std::vector<double>(table.grad().begin(), table.grad().end()) ==
          std::vector<double>{1, 1, 0, 0, 2, 2, 0, 0});
}

TEST_CASE("grad_check on a quadratic") {
    std::mt19937_64 gen(10);
    Tensor p = oracle::random_tensor(gen, {5});
    std::vector<Tensor> params{p};
    CHECK(grad_check([&] { return dot(p, p); }, params) < 1e-9);
    CHECK_FALSE(p.requires_grad());
}

TEST_CASE("tape replay is bit-identical") {
    std::mt19937_64 gen(11);
    Tensor in = oracle::random_tensor(gen, {2, 6, 6});
    Tensor kernel = oracle::random_tensor(gen, {3, 2, 3, 3});
    kernel.set_requires_grad(true);
    std::vector<std::vector<double>> grads;
    std::vector<double> losses;
    for (int run = 0; run < 2; ++run) {
        kernel.zero_grad();
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(tape);
            loss = sum(l2_normalize(spatial_max_min(relu(conv2d(in, kernel, 2, 1)))));
        }
        tape.backward(loss);
        losses.push_back(loss.item());
        grads.emplace_back(kernel.grad().begin(), kernel.grad().end());
    }
    CHECK(losses[0] == losses[1]);
    CHECK(grads[0] == grads[1]);
}

}  // TEST_SUITE
