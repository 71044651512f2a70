#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pvtrain/series.hpp"

namespace pvtrain {

enum class Normalization { None, ByCapacity };

// Supervised (feature-vector, target) pairs. Pair i holds the k most recent
// samples newest-first, features = (P_t, P_{t-1}, ..., P_{t-k+1}) with
// t = i + k - 1, and target = P_{t+h}. Values are divided by capacity when
// normalization is ByCapacity.
struct WindowedDataset {
    std::size_t k = 0;
    std::size_t h = 0;
    std::vector<double> features;  // size() x k, row-major
    std::vector<double> targets;
    double cap_kw = 0.0;
    Normalization normalization = Normalization::None;
    bool input_too_short = false;  // set when the series had fewer than k+h samples

    std::size_t size() const noexcept { return targets.size(); }
    bool empty() const noexcept { return targets.empty(); }

    std::span<const double> feature_row(std::size_t i) const {
        return {features.data() + i * k, k};
    }
    double target(std::size_t i) const { return targets[i]; }

    // Targets rescaled back to kW regardless of normalization.
    std::vector<double> targets_kw() const {
        std::vector<double> out(targets);
        if (normalization == Normalization::ByCapacity)
            for (double& v : out) v *= cap_kw;
        return out;
    }
};

inline WindowedDataset make_windows(const PowerSeries& series, std::size_t k, std::size_t h,
                                    Normalization normalization) {
    if (k < 1 || h < 1) throw std::invalid_argument("make_windows: k and h must be >= 1");
    WindowedDataset ds;
    ds.k = k;
    ds.h = h;
    ds.cap_kw = series.cap_kw();
    ds.normalization = normalization;
    const std::size_t n = series.size();
    if (n < k + h) {
        ds.input_too_short = true;
        return ds;
    }
    const std::size_t pairs = n - k - h + 1;
    const double scale = normalization == Normalization::ByCapacity ? 1.0 / series.cap_kw() : 1.0;
    ds.features.resize(pairs * k);
    ds.targets.resize(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        const std::size_t t = i + k - 1;
        for (std::size_t j = 0; j < k; ++j)
            ds.features[i * k + j] = series.power(t - j) * scale;
        ds.targets[i] = series.power(t + h) * scale;
    }
    return ds;
}

// Chronological split: train gets the earliest floor(fraction * n) pairs.
struct SplitSpec {
    double train_fraction = 0.8;
};

inline std::pair<WindowedDataset, WindowedDataset> split(const WindowedDataset& ds,
                                                         const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("split: train fraction must be in (0,1)");
    const std::size_t n = ds.size();
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.train_fraction));
    if (n_train == 0 || n_train == n)
        throw std::runtime_error("split: a side would be empty (n=" + std::to_string(n) + ")");
    auto slice = [&](std::size_t begin, std::size_t end) {
        WindowedDataset out;
        out.k = ds.k;
        out.h = ds.h;
        out.cap_kw = ds.cap_kw;
        out.normalization = ds.normalization;
        out.features.assign(ds.features.begin() + begin * ds.k, ds.features.begin() + end * ds.k);
        out.targets.assign(ds.targets.begin() + begin, ds.targets.begin() + end);
        return out;
    };
    return {slice(0, n_train), slice(n_train, n)};
}

// FNV-1a over the dataset's shape and payload; lets callers assert that
// several runs consumed identical data.
inline std::uint64_t dataset_hash(const WindowedDataset& ds) {
    std::uint64_t hash = 1469598103934665603ull;
    auto mix_bytes = [&](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            hash ^= b[i];
            hash *= 1099511628211ull;
        }
    };
    const std::uint64_t kk = ds.k, hh = ds.h;
    mix_bytes(&kk, sizeof kk);
    mix_bytes(&hh, sizeof hh);
    mix_bytes(&ds.cap_kw, sizeof ds.cap_kw);
    mix_bytes(ds.features.data(), ds.features.size() * sizeof(double));
    mix_bytes(ds.targets.data(), ds.targets.size() * sizeof(double));
    return hash;
}

}  // namespace pvtrain
