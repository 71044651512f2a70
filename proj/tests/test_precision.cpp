#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "pvtrain/precision.hpp"

using pvtrain::Matrix;
using pvtrain::PrecisionPolicy;
using pvtrain::PrecisionScheme;
using pvtrain::ScalarWidth;
using pvtrain::VariableGroup;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, ScalarWidth w, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    Matrix m = Matrix::zeros(rows, cols, w);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) m.set(r, c, dist(rng));
    return m;
}

constexpr VariableGroup kAllGroups[] = {VariableGroup::InputData, VariableGroup::Activations,
                                        VariableGroup::Parameters, VariableGroup::Gradients,
                                        VariableGroup::OptimizerState};

}  // namespace

TEST_CASE("scheme width maps") {
    const PrecisionPolicy dbl(PrecisionScheme::Double);
    const PrecisionPolicy flt(PrecisionScheme::Float);
    const PrecisionPolicy mix(PrecisionScheme::Mixed);
    for (VariableGroup g : kAllGroups) {
        REQUIRE(dbl.width_for(g) == ScalarWidth::Bits64);
        REQUIRE(flt.width_for(g) == ScalarWidth::Bits32);
    }
    REQUIRE(mix.width_for(VariableGroup::InputData) == ScalarWidth::Bits32);
    REQUIRE(mix.width_for(VariableGroup::Activations) == ScalarWidth::Bits32);
    REQUIRE(mix.width_for(VariableGroup::Parameters) == ScalarWidth::Bits64);
    REQUIRE(mix.width_for(VariableGroup::Gradients) == ScalarWidth::Bits64);
    REQUIRE(mix.width_for(VariableGroup::OptimizerState) == ScalarWidth::Bits64);
}

TEST_CASE("cast reference values") {
    Matrix m = Matrix::zeros(1, 1, ScalarWidth::Bits64);
    m.set(0, 0, 0.5);
    REQUIRE(pvtrain::cast(m, ScalarWidth::Bits32).at(0, 0) == 0.5);  // dyadic, exact

    m.set(0, 0, 0.1);
    const Matrix narrowed = pvtrain::cast(m, ScalarWidth::Bits32);
    const Matrix widened = pvtrain::cast(narrowed, ScalarWidth::Bits64);
    REQUIRE(widened.at(0, 0) == 0.10000000149011612);
}

TEST_CASE("cast is idempotent and shape preserving") {
    std::mt19937_64 rng(5);
    const Matrix m = random_matrix(3, 4, ScalarWidth::Bits64, rng);
    const Matrix once = pvtrain::cast(m, ScalarWidth::Bits32);
    const Matrix twice = pvtrain::cast(once, ScalarWidth::Bits32);
    REQUIRE(once == twice);
    REQUIRE(once.rows() == m.rows());
    REQUIRE(once.cols() == m.cols());
    REQUIRE(once.width() == ScalarWidth::Bits32);
}

TEST_CASE("apply_policy follows the group table") {
    std::mt19937_64 rng(6);
    const PrecisionPolicy mix(PrecisionScheme::Mixed);
    const PrecisionPolicy flt(PrecisionScheme::Float);
    const Matrix m64 = random_matrix(2, 2, ScalarWidth::Bits64, rng);

    const Matrix kept = pvtrain::apply_policy(VariableGroup::Parameters, mix, m64);
    REQUIRE(kept == m64);  // bit-exact identity at the kept width

    const Matrix dropped = pvtrain::apply_policy(VariableGroup::Activations, mix, m64);
    REQUIRE(dropped.width() == ScalarWidth::Bits32);

    for (VariableGroup g : kAllGroups)
        REQUIRE(pvtrain::apply_policy(g, flt, m64).width() == ScalarWidth::Bits32);
}

TEST_CASE("apply_policy is idempotent; Double is the bit-exact identity") {
    std::mt19937_64 rng(7);
    const PrecisionPolicy dbl(PrecisionScheme::Double);
    const PrecisionPolicy mix(PrecisionScheme::Mixed);
    for (ScalarWidth w : {ScalarWidth::Bits32, ScalarWidth::Bits64}) {
        const Matrix m = random_matrix(3, 3, w, rng);
        for (VariableGroup g : kAllGroups) {
            const Matrix once = pvtrain::apply_policy(g, mix, m);
            REQUIRE(pvtrain::apply_policy(g, mix, once) == once);
        }
    }
    const Matrix m64 = random_matrix(3, 3, ScalarWidth::Bits64, rng);
    for (VariableGroup g : kAllGroups) REQUIRE(pvtrain::apply_policy(g, dbl, m64) == m64);
}

TEST_CASE("operations preserve width and reject mixed widths") {
    std::mt19937_64 rng(8);
    const Matrix a32 = random_matrix(2, 2, ScalarWidth::Bits32, rng);
    const Matrix b32 = random_matrix(2, 2, ScalarWidth::Bits32, rng);
    const Matrix b64 = random_matrix(2, 2, ScalarWidth::Bits64, rng);

    REQUIRE(pvtrain::matmul(a32, b32).width() == ScalarWidth::Bits32);
    REQUIRE(pvtrain::add(a32, b32).width() == ScalarWidth::Bits32);
    REQUIRE(pvtrain::sigmoid(b64).width() == ScalarWidth::Bits64);
    REQUIRE_THROWS_AS(pvtrain::matmul(a32, b64), std::invalid_argument);
    REQUIRE_THROWS_AS(pvtrain::hadamard(a32, b64), std::invalid_argument);
}

TEST_CASE("runtime matrix matmul agrees with the typed kernel") {
    std::mt19937_64 rng(9);
    const Matrix a = random_matrix(3, 4, ScalarWidth::Bits64, rng);
    const Matrix b = random_matrix(4, 2, ScalarWidth::Bits64, rng);
    const Matrix c = pvtrain::matmul(a, b);
    const auto direct = pvtrain::matmul(a.as<double>(), b.as<double>());
    REQUIRE(c.as<double>() == direct);
}

TEST_CASE("scheme names round trip") {
    for (PrecisionScheme s :
         {PrecisionScheme::Double, PrecisionScheme::Float, PrecisionScheme::Mixed})
        REQUIRE(pvtrain::scheme_from_string(pvtrain::to_string(s)) == s);
    REQUIRE_THROWS_AS(pvtrain::scheme_from_string("half"), std::invalid_argument);
}
