#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace pvtrain {

// Capacity-normalized error scores. nrmse_pct is the headline accuracy
// figure: 100 * sqrt(mean(((y - yhat)/cap)^2)). eq2_literal_pct is the
// one's-complement form (1 - sqrt(mean(...))) * 100; the two always sum
// to 100.
struct EvalResult {
    std::size_t n = 0;
    double nrmse_pct = 0.0;
    double eq2_literal_pct = 0.0;
    double mse = 0.0;  // kW^2, unnormalized
};

inline EvalResult evaluate(std::span<const double> y, std::span<const double> yhat,
                           double cap_kw) {
    if (y.empty()) throw std::invalid_argument("evaluate: empty input");
    if (y.size() != yhat.size()) throw std::invalid_argument("evaluate: length mismatch");
    if (!(cap_kw > 0.0)) throw std::invalid_argument("evaluate: cap must be > 0");
    double norm_sq = 0.0;
    double raw_sq = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - yhat[i];
        raw_sq += r * r;
        const double rn = r / cap_kw;
        norm_sq += rn * rn;
    }
    const double n = static_cast<double>(y.size());
    const double rms = std::sqrt(norm_sq / n);
    EvalResult out;
    out.n = y.size();
    out.nrmse_pct = 100.0 * rms;
    out.eq2_literal_pct = (1.0 - rms) * 100.0;
    out.mse = raw_sq / n;
    return out;
}

}  // namespace pvtrain
