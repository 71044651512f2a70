#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pvtrain {

struct PowerSample {
    std::int64_t timestamp;  // seconds since Unix epoch, civil time
    double power_kw;
};

namespace detail {

// Civil <-> epoch-day conversions (Gregorian, proleptic).
inline std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline bool parse_fixed_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
    if (pos + len > s.size()) return false;
    unsigned v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
        char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<unsigned>(c - '0');
    }
    out = v;
    return true;
}

}  // namespace detail

// Parses "YYYY-MM-DD[T ]HH:MM[:SS]" into epoch seconds. Returns false on any
// malformed field.
inline bool parse_timestamp(std::string_view s, std::int64_t& out) {
    s = detail::trim(s);
    if (s.size() != 16 && s.size() != 19) return false;
    unsigned year, month, day, hour, minute, second = 0;
    if (!detail::parse_fixed_uint(s, 0, 4, year)) return false;
    if (s[4] != '-') return false;
    if (!detail::parse_fixed_uint(s, 5, 2, month)) return false;
    if (s[7] != '-') return false;
    if (!detail::parse_fixed_uint(s, 8, 2, day)) return false;
    if (s[10] != 'T' && s[10] != ' ') return false;
    if (!detail::parse_fixed_uint(s, 11, 2, hour)) return false;
    if (s[13] != ':') return false;
    if (!detail::parse_fixed_uint(s, 14, 2, minute)) return false;
    if (s.size() == 19) {
        if (s[16] != ':') return false;
        if (!detail::parse_fixed_uint(s, 17, 2, second)) return false;
    }
    if (month < 1 || month > 12 || day < 1 || day > 31) return false;
    if (hour > 23 || minute > 59 || second > 59) return false;
    out = detail::days_from_civil(static_cast<int>(year), month, day) * 86400 +
          static_cast<std::int64_t>(hour) * 3600 + minute * 60 + second;
    return true;
}

inline std::string format_timestamp(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y;
    unsigned m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02lld:%02lld:%02lld", y, m, d,
                  static_cast<long long>(rem / 3600), static_cast<long long>((rem % 3600) / 60),
                  static_cast<long long>(rem % 60));
    return buf;
}

// Timestamped PV power samples with nameplate capacity. Construction
// validates: strictly increasing timestamps at one constant interval
// (inferred from the first two samples), cap > 0, and 0 <= power <= cap.
class PowerSeries {
public:
    PowerSeries(std::vector<PowerSample> samples, double cap_kw)
        : samples_(std::move(samples)), cap_kw_(cap_kw) {
        if (!(cap_kw_ > 0.0)) throw std::invalid_argument("PowerSeries: capacity must be > 0");
        if (samples_.size() >= 2) {
            const std::int64_t step = samples_[1].timestamp - samples_[0].timestamp;
            if (step <= 0 || step % 60 != 0)
                throw std::invalid_argument("PowerSeries: timestamps must increase by whole minutes");
            interval_minutes_ = static_cast<int>(step / 60);
            for (std::size_t i = 1; i < samples_.size(); ++i) {
                if (samples_[i].timestamp - samples_[i - 1].timestamp != step)
                    throw std::invalid_argument("PowerSeries: non-monotonic or uneven timestamps at sample " +
                                                std::to_string(i + 1));
            }
        }
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            const double p = samples_[i].power_kw;
            if (!(p >= 0.0 && p <= cap_kw_))
                throw std::invalid_argument("PowerSeries: power outside [0, cap] at sample " +
                                            std::to_string(i + 1));
        }
    }

    std::size_t size() const noexcept { return samples_.size(); }
    double cap_kw() const noexcept { return cap_kw_; }
    int interval_minutes() const noexcept { return interval_minutes_; }
    double power(std::size_t i) const { return samples_[i].power_kw; }
    std::int64_t timestamp(std::size_t i) const { return samples_[i].timestamp; }
    const std::vector<PowerSample>& samples() const noexcept { return samples_; }

private:
    std::vector<PowerSample> samples_;
    double cap_kw_;
    int interval_minutes_ = 15;
};

inline constexpr const char* kCsvHeader = "timestamp,power_kw";

// Loads the two-column CSV (header "timestamp,power_kw"). Malformed rows are
// reported with their 1-based line number.
inline PowerSeries load_csv(const std::string& path, double cap_kw) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path + " is empty");
    ++lineno;
    if (detail::trim(line) != kCsvHeader)
        throw std::runtime_error("load_csv: " + path + " line 1: expected header '" +
                                 std::string(kCsvHeader) + "'");
    std::vector<PowerSample> samples;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = detail::trim(line);
        if (sv.empty()) continue;
        const std::size_t comma = sv.find(',');
        const std::string where = "load_csv: " + path + " line " + std::to_string(lineno);
        if (comma == std::string_view::npos) throw std::runtime_error(where + ": missing comma");
        std::int64_t ts;
        if (!parse_timestamp(sv.substr(0, comma), ts))
            throw std::runtime_error(where + ": malformed timestamp");
        std::string_view num = detail::trim(sv.substr(comma + 1));
        double power;
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), power);
        if (ec != std::errc{} || ptr != num.data() + num.size())
            throw std::runtime_error(where + ": malformed power value");
        samples.push_back({ts, power});
    }
    try {
        return PowerSeries(std::move(samples), cap_kw);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("load_csv: " + path + ": " + e.what());
    }
}

inline void save_csv(const PowerSeries& series, std::ostream& out) {
    out << kCsvHeader << "\n";
    char buf[64];
    for (const auto& s : series.samples()) {
        std::snprintf(buf, sizeof(buf), "%.17g", s.power_kw);
        out << format_timestamp(s.timestamp) << ',' << buf << "\n";
    }
}

inline void save_csv(const PowerSeries& series, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_csv: cannot write " + path);
    save_csv(series, out);
}

// Synthetic PV series: 96 samples/day at 15-minute spacing. Clear-sky arch
// max(0, cap*sin(pi*(tau-6)/12)) for local hour tau in [6,18], scaled by a
// per-sample cloud factor clamp(1 - |sigma*N(0,1)|, 0, 1). Deterministic for
// a fixed seed.
inline PowerSeries synthesize_pv(int days, double cap_kw, double cloud_noise, std::uint64_t seed) {
    if (days < 1) throw std::invalid_argument("synthesize_pv: days must be >= 1");
    if (!(cap_kw > 0.0)) throw std::invalid_argument("synthesize_pv: cap must be > 0");
    if (!(cloud_noise >= 0.0 && cloud_noise < 1.0))
        throw std::invalid_argument("synthesize_pv: cloud_noise must be in [0,1)");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    const std::int64_t start = detail::days_from_civil(2024, 1, 1) * 86400;
    const double pi = 3.14159265358979323846;
    std::vector<PowerSample> samples;
    samples.reserve(static_cast<std::size_t>(days) * 96);
    for (int d = 0; d < days; ++d) {
        for (int s = 0; s < 96; ++s) {
            const double tau = s * 0.25;  // local hour of day
            double clear = 0.0;
            if (tau >= 6.0 && tau <= 18.0)
                clear = std::max(0.0, cap_kw * std::sin(pi * (tau - 6.0) / 12.0));
            const double factor =
                std::clamp(1.0 - std::abs(cloud_noise * unit(rng)), 0.0, 1.0);
            samples.push_back({start + (static_cast<std::int64_t>(d) * 96 + s) * 900,
                               clear * factor});
        }
    }
    return PowerSeries(std::move(samples), cap_kw);
}

}  // namespace pvtrain
