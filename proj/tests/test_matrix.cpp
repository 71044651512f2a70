#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pvtrain/matrix.hpp"

using pvtrain::Dense;

namespace {

// Independent naive triple-loop product used as the reference.
template <typename T>
Dense<T> matmul_oracle(const Dense<T>& a, const Dense<T>& b) {
    Dense<T> out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            T acc{0};
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

template <typename T>
Dense<T> random_dense(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    Dense<T> m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng));
    return m;
}

}  // namespace

TEST_CASE("matmul identity leaves operand unchanged") {
    std::mt19937_64 rng(1);
    const auto m = random_dense<double>(2, 2, rng);
    const auto id = Dense<double>::identity(2);
    REQUIRE(pvtrain::matmul(id, m) == m);
}

TEST_CASE("matmul hand-checked 2x2 by 2x1") {
    Dense<double> a(2, 2, {1, 2, 3, 4});
    Dense<double> b(2, 1, {1, 1});
    const auto c = pvtrain::matmul(a, b);
    REQUIRE(c(0, 0) == 3.0);
    REQUIRE(c(1, 0) == 7.0);
}

TEMPLATE_TEST_CASE("matmul matches the naive oracle bit-for-bit", "", float, double) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_dense<TestType>(5, 7, rng);
        const auto b = random_dense<TestType>(7, 3, rng);
        REQUIRE(pvtrain::matmul(a, b) == matmul_oracle(a, b));
    }
}

TEST_CASE("matmul rejects shape mismatch") {
    Dense<double> a(2, 3);
    Dense<double> b(2, 3);
    REQUIRE_THROWS_AS(pvtrain::matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul associativity holds to 1e-12 on random 4x4") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_dense<double>(4, 4, rng);
        const auto b = random_dense<double>(4, 4, rng);
        const auto c = random_dense<double>(4, 4, rng);
        const auto left = pvtrain::matmul(pvtrain::matmul(a, b), c);
        const auto right = pvtrain::matmul(a, pvtrain::matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i) {
            const double l = left.data()[i], r = right.data()[i];
            REQUIRE(std::abs(l - r) <= 1e-12 * std::max(1.0, std::max(std::abs(l), std::abs(r))));
        }
    }
}

TEST_CASE("elementwise binary ops and shape checks") {
    Dense<double> a(2, 2, {1, 2, 3, 4});
    Dense<double> b(2, 2, {10, 20, 30, 40});
    REQUIRE(pvtrain::add(a, b) == Dense<double>(2, 2, {11, 22, 33, 44}));
    REQUIRE(pvtrain::sub(b, a) == Dense<double>(2, 2, {9, 18, 27, 36}));
    REQUIRE(pvtrain::hadamard(a, b) == Dense<double>(2, 2, {10, 40, 90, 160}));
    Dense<double> bad(2, 1);
    REQUIRE_THROWS_AS(pvtrain::add(a, bad), std::invalid_argument);
}

TEST_CASE("sigmoid and tanh reference values") {
    Dense<double> zero(1, 1);
    REQUIRE(pvtrain::sigmoid(zero)(0, 0) == 0.5);
    REQUIRE(pvtrain::tanh(zero)(0, 0) == 0.0);
    Dense<double> one(1, 1, {1.0});
    // Scalar math-library oracle.
    REQUIRE(pvtrain::sigmoid(one)(0, 0) == 1.0 / (1.0 + std::exp(-1.0)));
    REQUIRE(pvtrain::sigmoid(one)(0, 0) == Catch::Approx(0.7310585786300049).epsilon(1e-12));
    REQUIRE(pvtrain::tanh(one)(0, 0) == std::tanh(1.0));
}

TEST_CASE("gate derivatives are expressed in the activated value") {
    Dense<double> y(1, 3, {0.25, 0.5, 0.9});
    const auto ds = pvtrain::dsigmoid(y);
    const auto dt = pvtrain::dtanh(y);
    for (std::size_t i = 0; i < y.size(); ++i) {
        REQUIRE(ds.data()[i] == y.data()[i] * (1.0 - y.data()[i]));
        REQUIRE(dt.data()[i] == 1.0 - y.data()[i] * y.data()[i]);
    }
}

TEST_CASE("transpose round trip") {
    std::mt19937_64 rng(3);
    const auto a = random_dense<double>(3, 5, rng);
    REQUIRE(pvtrain::transpose(pvtrain::transpose(a)) == a);
}

TEST_CASE("matmul_into accumulate adds onto existing contents") {
    Dense<double> a(1, 2, {1, 2});
    Dense<double> b(2, 1, {3, 4});
    Dense<double> out(1, 1, {100});
    pvtrain::matmul_into(out, a, b, /*accumulate=*/true);
    REQUIRE(out(0, 0) == 111.0);
}

TEST_CASE("dense constructor validates dimensions and buffer length") {
    REQUIRE_THROWS_AS(Dense<double>(0, 3), std::invalid_argument);
    REQUIRE_THROWS_AS(Dense<double>(2, 2, {1.0, 2.0}), std::invalid_argument);
}
