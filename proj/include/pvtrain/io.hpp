#pragma once

#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvtrain/gbt.hpp"
#include "pvtrain/lstm.hpp"
#include "pvtrain/metrics.hpp"

namespace pvtrain {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

namespace detail {

template <typename T>
json dense_to_json(const Dense<T>& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(static_cast<double>(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Dense<double> dense_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::runtime_error("model file: tensor is not a nested array");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Dense<double> m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw std::runtime_error("model file: ragged tensor");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline void check_format_version(const json& j, const std::string& what) {
    if (!j.contains("format_version") || !j["format_version"].is_number_integer() ||
        j["format_version"].get<int>() != kModelFormatVersion)
        throw std::runtime_error(what + ": unknown format_version");
}

}  // namespace detail

// ---- LSTM model files -------------------------------------------------

// Width-independent snapshot of a trained model. Parameter values are stored
// widened to double, which is exact for both widths.
struct LstmModelFile {
    std::size_t hidden = 0;
    std::size_t unroll = 0;
    PrecisionScheme scheme = PrecisionScheme::Double;
    double cap_kw = 0.0;
    bool normalized_input = false;
    LstmParams<double> params;
};

template <typename ParamT, typename ActT>
LstmModelFile lstm_snapshot(const LstmModel<ParamT, ActT>& model, PrecisionScheme scheme) {
    LstmModelFile f;
    f.hidden = model.hidden();
    f.unroll = model.unroll();
    f.scheme = scheme;
    f.cap_kw = model.cap_kw;
    f.normalized_input = model.normalized_input;
    f.params = cast_params<double>(model.params());
    return f;
}

template <typename ParamT, typename ActT>
LstmModel<ParamT, ActT> lstm_from_snapshot(const LstmModelFile& f) {
    LstmModel<ParamT, ActT> model(cast_params<ParamT>(f.params), f.unroll);
    model.cap_kw = f.cap_kw;
    model.normalized_input = f.normalized_input;
    return model;
}

inline json lstm_to_json(const LstmModelFile& f) {
    json params;
    f.params.for_each_tensor([&](const char* name, const Dense<double>& t) {
        params[name] = detail::dense_to_json(t);
    });
    return json{{"format_version", kModelFormatVersion},
                {"kind", "lstm"},
                {"hidden", f.hidden},
                {"unroll", f.unroll},
                {"precision_scheme", to_string(f.scheme)},
                {"cap_kw", f.cap_kw},
                {"normalized_input", f.normalized_input},
                {"params", params}};
}

inline LstmModelFile lstm_from_json(const json& j) {
    detail::check_format_version(j, "lstm model");
    if (j.value("kind", "") != "lstm") throw std::runtime_error("model file: kind is not lstm");
    LstmModelFile f;
    f.hidden = j.at("hidden").get<std::size_t>();
    f.unroll = j.at("unroll").get<std::size_t>();
    f.scheme = scheme_from_string(j.at("precision_scheme").get<std::string>());
    f.cap_kw = j.at("cap_kw").get<double>();
    f.normalized_input = j.at("normalized_input").get<bool>();
    f.params = LstmParams<double>::zeros(f.hidden);
    const json& p = j.at("params");
    f.params.for_each_tensor([&](const char* name, Dense<double>& t) {
        Dense<double> loaded = detail::dense_from_json(p.at(name));
        if (loaded.rows() != t.rows() || loaded.cols() != t.cols())
            throw std::runtime_error(std::string("model file: tensor shape mismatch for ") + name);
        t = std::move(loaded);
    });
    return f;
}

// ---- GBT model files --------------------------------------------------

inline json gbt_to_json(const GbtModel& model) {
    json trees = json::array();
    for (const RegressionTree& t : model.trees) {
        json nodes = json::array();
        for (const TreeNode& n : t.nodes)
            nodes.push_back(json{{"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"left", n.left},
                                 {"right", n.right},
                                 {"weight", n.weight}});
        trees.push_back(json{{"nodes", std::move(nodes)}});
    }
    return json{{"format_version", kModelFormatVersion},
                {"kind", "gbt"},
                {"base", model.base},
                {"eta", model.eta},
                {"trees", std::move(trees)}};
}

inline GbtModel gbt_from_json(const json& j) {
    detail::check_format_version(j, "gbt model");
    if (j.value("kind", "") != "gbt") throw std::runtime_error("model file: kind is not gbt");
    GbtModel model;
    model.base = j.at("base").get<double>();
    model.eta = j.at("eta").get<double>();
    for (const json& jt : j.at("trees")) {
        RegressionTree tree;
        for (const json& jn : jt.at("nodes")) {
            TreeNode n;
            n.feature = jn.at("feature").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            n.weight = jn.at("weight").get<double>();
            tree.nodes.push_back(n);
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

// ---- Evaluation & training reports -------------------------------------

inline json eval_to_json(const EvalResult& e) {
    return json{{"n", e.n},
                {"nrmse_pct", e.nrmse_pct},
                {"eq2_literal_pct", e.eq2_literal_pct},
                {"mse", e.mse}};
}

inline EvalResult eval_from_json(const json& j) {
    EvalResult e;
    e.n = j.at("n").get<std::size_t>();
    e.nrmse_pct = j.at("nrmse_pct").get<double>();
    e.eq2_literal_pct = j.at("eq2_literal_pct").get<double>();
    e.mse = j.at("mse").get<double>();
    return e;
}

// Removes the wall-clock fields, leaving only the deterministic payload.
// Two same-seed 64-bit runs must agree byte-for-byte after this.
inline json strip_timing(json report) {
    report.erase("epoch_seconds");
    report.erase("total_seconds");
    return report;
}

// Long-format loss-curve CSV: header "scheme,epoch,loss", one row per
// (report, epoch). Reports must all carry a losses array and a label.
inline void export_losses_csv(const std::vector<json>& reports, std::ostream& out) {
    for (const json& r : reports) {
        if (!r.contains("losses") || !r["losses"].is_array())
            throw std::runtime_error("export-losses: report has no losses array");
        if (!r.contains("scheme") && !r.contains("kind"))
            throw std::runtime_error("export-losses: report has no scheme/kind label");
    }
    out << "scheme,epoch,loss\n";
    char buf[64];
    for (const json& r : reports) {
        const std::string label =
            r.contains("scheme") ? r["scheme"].get<std::string>() : r["kind"].get<std::string>();
        std::size_t epoch = 1;
        for (const json& loss : r["losses"]) {
            std::snprintf(buf, sizeof(buf), "%.17g", loss.get<double>());
            out << label << ',' << epoch << ',' << buf << "\n";
            ++epoch;
        }
    }
}

}  // namespace pvtrain
