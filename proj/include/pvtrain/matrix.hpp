#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace pvtrain {

// Dense row-major matrix over one IEEE-754 scalar type. Shape is fixed at
// construction; element count is rows*cols.
template <typename T>
class Dense {
    static_assert(std::is_floating_point_v<T>, "Dense requires float or double");

public:
    using value_type = T;

    Dense() = default;

    Dense(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, T{0}) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("Dense: dimensions must be positive");
    }

    Dense(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0)
            throw std::invalid_argument("Dense: dimensions must be positive");
        if (data_.size() != rows * cols)
            throw std::invalid_argument("Dense: buffer length != rows*cols");
    }

    static Dense identity(std::size_t n) {
        Dense m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::span<const T> values() const noexcept { return data_; }
    std::span<T> values() noexcept { return data_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    T* row(std::size_t r) noexcept { return data_.data() + r * cols_; }
    const T* row(std::size_t r) const noexcept { return data_.data() + r * cols_; }

    void fill(T v) { data_.assign(data_.size(), v); }

    bool all_finite() const noexcept {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Dense& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    friend bool operator==(const Dense& a, const Dense& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

namespace detail {

inline void shape_error(const std::string& op) {
    throw std::invalid_argument(op + ": shape mismatch");
}

}  // namespace detail

// out = a*b (accumulate=false) or out += a*b (accumulate=true).
// i-k-j loop order: per output element the additions run over k ascending,
// the same order as the textbook i-j-k triple loop, so results are
// bit-identical to a naive oracle at equal width.
template <typename T>
void matmul_into(Dense<T>& out, const Dense<T>& a, const Dense<T>& b, bool accumulate) {
    if (a.cols() != b.rows()) detail::shape_error("matmul");
    if (out.rows() != a.rows() || out.cols() != b.cols()) detail::shape_error("matmul");
    if (!accumulate) out.fill(T{0});
    const std::size_t n = a.rows(), kk = a.cols(), m = b.cols();
    for (std::size_t i = 0; i < n; ++i) {
        T* outi = out.row(i);
        const T* ai = a.row(i);
        for (std::size_t k = 0; k < kk; ++k) {
            const T aik = ai[k];
            const T* bk = b.row(k);
            for (std::size_t j = 0; j < m; ++j) outi[j] += aik * bk[j];
        }
    }
}

template <typename T>
Dense<T> matmul(const Dense<T>& a, const Dense<T>& b) {
    if (a.cols() != b.rows()) detail::shape_error("matmul");
    Dense<T> out(a.rows(), b.cols());
    matmul_into(out, a, b, true);
    return out;
}

template <typename T>
Dense<T> transpose(const Dense<T>& a) {
    Dense<T> out(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

template <typename T>
void transpose_into(Dense<T>& out, const Dense<T>& a) {
    if (out.rows() != a.cols() || out.cols() != a.rows()) detail::shape_error("transpose");
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
}

template <typename T, typename Fn>
Dense<T> map(const Dense<T>& a, Fn&& fn) {
    Dense<T> out(a.rows(), a.cols());
    const T* src = a.data();
    T* dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) dst[i] = fn(src[i]);
    return out;
}

template <typename T, typename Fn>
Dense<T> zip(const Dense<T>& a, const Dense<T>& b, const char* op, Fn&& fn) {
    if (!a.same_shape(b)) detail::shape_error(op);
    Dense<T> out(a.rows(), a.cols());
    const T* pa = a.data();
    const T* pb = b.data();
    T* dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) dst[i] = fn(pa[i], pb[i]);
    return out;
}

template <typename T>
Dense<T> add(const Dense<T>& a, const Dense<T>& b) {
    return zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
Dense<T> sub(const Dense<T>& a, const Dense<T>& b) {
    return zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
Dense<T> hadamard(const Dense<T>& a, const Dense<T>& b) {
    return zip(a, b, "hadamard", [](T x, T y) { return x * y; });
}

template <typename T>
T sigmoid_scalar(T x) {
    return T{1} / (T{1} + std::exp(-x));
}

template <typename T>
Dense<T> sigmoid(const Dense<T>& a) {
    return map(a, [](T x) { return sigmoid_scalar(x); });
}

template <typename T>
Dense<T> tanh(const Dense<T>& a) {
    return map(a, [](T x) { return std::tanh(x); });
}

// Gate derivatives expressed in terms of the activated value y, not the
// pre-activation: dsigmoid(y) = y*(1-y), dtanh(y) = 1-y^2.
template <typename T>
Dense<T> dsigmoid(const Dense<T>& a) {
    return map(a, [](T y) { return y * (T{1} - y); });
}

template <typename T>
Dense<T> dtanh(const Dense<T>& a) {
    return map(a, [](T y) { return T{1} - y * y; });
}

// Elementwise IEEE-754 conversion (round-to-nearest-even on narrowing).
template <typename To, typename From>
Dense<To> cast_to(const Dense<From>& a) {
    Dense<To> out(a.rows(), a.cols());
    const From* src = a.data();
    To* dst = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) dst[i] = static_cast<To>(src[i]);
    return out;
}

// acc += x, converting each element to the accumulator's width.
template <typename P, typename A>
void add_cast_into(Dense<P>& acc, const Dense<A>& x) {
    if (acc.rows() != x.rows() || acc.cols() != x.cols()) detail::shape_error("add_cast_into");
    P* dst = acc.data();
    const A* src = x.data();
    for (std::size_t i = 0; i < acc.size(); ++i) dst[i] += static_cast<P>(src[i]);
}

}  // namespace pvtrain
