#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>

#include "pvtrain/matrix.hpp"

namespace pvtrain {

enum class ScalarWidth { Bits32, Bits64 };

inline const char* to_string(ScalarWidth w) {
    return w == ScalarWidth::Bits32 ? "f32" : "f64";
}

// Variable groups a training-time matrix can belong to. Every matrix in the
// training loop belongs to exactly one group.
enum class VariableGroup : std::size_t {
    InputData = 0,
    Activations = 1,
    Parameters = 2,
    Gradients = 3,
    OptimizerState = 4,
};

inline constexpr std::size_t kVariableGroupCount = 5;

enum class PrecisionScheme { Double, Float, Mixed };

inline const char* to_string(PrecisionScheme s) {
    switch (s) {
        case PrecisionScheme::Double: return "double";
        case PrecisionScheme::Float: return "float";
        case PrecisionScheme::Mixed: return "mixed";
    }
    return "?";
}

inline PrecisionScheme scheme_from_string(const std::string& s) {
    if (s == "double") return PrecisionScheme::Double;
    if (s == "float") return PrecisionScheme::Float;
    if (s == "mixed") return PrecisionScheme::Mixed;
    throw std::invalid_argument("unknown precision scheme: " + s);
}

// Maps each variable group to a storage/compute width.
//   Double: every group 64-bit.
//   Float:  every group 32-bit.
//   Mixed:  InputData and Activations 32-bit; Parameters, Gradients and
//           OptimizerState stay 64-bit (master copies at high precision).
class PrecisionPolicy {
public:
    explicit PrecisionPolicy(PrecisionScheme scheme) : scheme_(scheme) {
        switch (scheme) {
            case PrecisionScheme::Double:
                widths_.fill(ScalarWidth::Bits64);
                break;
            case PrecisionScheme::Float:
                widths_.fill(ScalarWidth::Bits32);
                break;
            case PrecisionScheme::Mixed:
                widths_.fill(ScalarWidth::Bits64);
                widths_[static_cast<std::size_t>(VariableGroup::InputData)] = ScalarWidth::Bits32;
                widths_[static_cast<std::size_t>(VariableGroup::Activations)] = ScalarWidth::Bits32;
                break;
        }
    }

    PrecisionScheme scheme() const noexcept { return scheme_; }

    ScalarWidth width_for(VariableGroup g) const {
        return widths_[static_cast<std::size_t>(g)];
    }

private:
    PrecisionScheme scheme_;
    std::array<ScalarWidth, kVariableGroupCount> widths_{};
};

// Width-tagged dense matrix: all elements share one width; operations never
// promote silently. Mixed-width operands are an error, not a conversion.
class Matrix {
public:
    Matrix() : impl_(Dense<double>()) {}
    explicit Matrix(Dense<float> m) : impl_(std::move(m)) {}
    explicit Matrix(Dense<double> m) : impl_(std::move(m)) {}

    static Matrix zeros(std::size_t rows, std::size_t cols, ScalarWidth w) {
        if (w == ScalarWidth::Bits32) return Matrix(Dense<float>(rows, cols));
        return Matrix(Dense<double>(rows, cols));
    }

    static Matrix identity(std::size_t n, ScalarWidth w) {
        if (w == ScalarWidth::Bits32) return Matrix(Dense<float>::identity(n));
        return Matrix(Dense<double>::identity(n));
    }

    template <typename Fn>
    decltype(auto) visit(Fn&& fn) const {
        return std::visit(std::forward<Fn>(fn), impl_);
    }

    ScalarWidth width() const noexcept {
        return std::holds_alternative<Dense<float>>(impl_) ? ScalarWidth::Bits32
                                                           : ScalarWidth::Bits64;
    }

    std::size_t rows() const noexcept {
        return visit([](const auto& m) { return m.rows(); });
    }
    std::size_t cols() const noexcept {
        return visit([](const auto& m) { return m.cols(); });
    }
    std::size_t size() const noexcept {
        return visit([](const auto& m) { return m.size(); });
    }

    // Element access widened to double for inspection; the stored value is
    // exact at either width.
    double at(std::size_t r, std::size_t c) const {
        return visit([&](const auto& m) { return static_cast<double>(m(r, c)); });
    }
    void set(std::size_t r, std::size_t c, double v) {
        if (auto* m = std::get_if<Dense<float>>(&impl_))
            (*m)(r, c) = static_cast<float>(v);
        else
            std::get<Dense<double>>(impl_)(r, c) = v;
    }

    bool all_finite() const noexcept {
        return visit([](const auto& m) { return m.all_finite(); });
    }

    template <typename T>
    const Dense<T>& as() const {
        return std::get<Dense<T>>(impl_);
    }
    template <typename T>
    Dense<T>& as() {
        return std::get<Dense<T>>(impl_);
    }

    friend bool operator==(const Matrix& a, const Matrix& b) { return a.impl_ == b.impl_; }

private:
    std::variant<Dense<float>, Dense<double>> impl_;
};

namespace detail {

inline void require_same_width(const Matrix& a, const Matrix& b, const char* op) {
    if (a.width() != b.width())
        throw std::invalid_argument(std::string(op) + ": width mismatch (" +
                                    to_string(a.width()) + " vs " + to_string(b.width()) + ")");
}

template <typename Fn>
Matrix binary_op(const Matrix& a, const Matrix& b, const char* op, Fn&& fn) {
    require_same_width(a, b, op);
    if (a.width() == ScalarWidth::Bits32)
        return Matrix(fn(a.as<float>(), b.as<float>()));
    return Matrix(fn(a.as<double>(), b.as<double>()));
}

}  // namespace detail

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    return detail::binary_op(a, b, "matmul",
                             [](const auto& x, const auto& y) { return matmul(x, y); });
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    return detail::binary_op(a, b, "add",
                             [](const auto& x, const auto& y) { return add(x, y); });
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
    return detail::binary_op(a, b, "sub",
                             [](const auto& x, const auto& y) { return sub(x, y); });
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    return detail::binary_op(a, b, "hadamard",
                             [](const auto& x, const auto& y) { return hadamard(x, y); });
}

inline Matrix sigmoid(const Matrix& a) {
    return a.visit([](const auto& m) { return Matrix(sigmoid(m)); });
}

inline Matrix tanh(const Matrix& a) {
    return a.visit([](const auto& m) { return Matrix(tanh(m)); });
}

inline Matrix dsigmoid(const Matrix& a) {
    return a.visit([](const auto& m) { return Matrix(dsigmoid(m)); });
}

inline Matrix dtanh(const Matrix& a) {
    return a.visit([](const auto& m) { return Matrix(dtanh(m)); });
}

// Elementwise IEEE-754 conversion; shape preserved, no-op at equal width.
inline Matrix cast(const Matrix& m, ScalarWidth w) {
    if (m.width() == w) return m;
    if (w == ScalarWidth::Bits32) return Matrix(cast_to<float>(m.as<double>()));
    return Matrix(cast_to<double>(m.as<float>()));
}

// Casts m to the width the policy assigns to the group. Idempotent.
inline Matrix apply_policy(VariableGroup group, const PrecisionPolicy& policy, const Matrix& m) {
    return cast(m, policy.width_for(group));
}

}  // namespace pvtrain
