// Command-line harness for the PV forecasting trainers: synthetic data
// generation, LSTM/GBT training with precision schemes, evaluation of saved
// models, and the three-scheme timing benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pvtrain/gbt.hpp"
#include "pvtrain/io.hpp"
#include "pvtrain/lstm.hpp"
#include "pvtrain/metrics.hpp"
#include "pvtrain/series.hpp"
#include "pvtrain/windowing.hpp"

namespace fs = std::filesystem;
using pvtrain::json;

namespace {

struct DataOpts {
    std::string csv_path;
    int synth_days = 0;
    double cap_kw = 10.0;
    double cloud_noise = 0.15;
};

struct TrainOpts {
    std::string model = "lstm";
    std::size_t k = 24;
    std::size_t h = 96;
    double split_fraction = 0.8;
    std::string precision = "double";
    std::uint64_t seed = 42;
    // LSTM
    int epochs = 50;
    int batch = 16;
    double lr = 0.001;
    int hidden = 32;
    double clip = 5.0;
    std::string optimizer = "adam";
    // GBT
    int rounds = 100;
    int depth = 6;
    double eta = 0.3;
    double lambda = 1.0;
    double gamma = 0.0;
    int min_child = 1;
};

void add_data_flags(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--data", d.csv_path, "CSV file with timestamp,power_kw rows");
    cmd->add_option("--synth-days", d.synth_days, "Generate a synthetic series of N days instead");
    cmd->add_option("--cap", d.cap_kw, "Nameplate capacity in kW")->capture_default_str();
    cmd->add_option("--noise", d.cloud_noise, "Cloud noise sigma for synthetic data")
        ->capture_default_str();
}

pvtrain::PowerSeries load_series(const DataOpts& d, std::uint64_t seed) {
    if (!d.csv_path.empty() && d.synth_days > 0)
        throw std::invalid_argument("--data and --synth-days are mutually exclusive");
    if (!d.csv_path.empty()) return pvtrain::load_csv(d.csv_path, d.cap_kw);
    if (d.synth_days > 0)
        return pvtrain::synthesize_pv(d.synth_days, d.cap_kw, d.cloud_noise, seed);
    throw std::invalid_argument("one of --data or --synth-days is required");
}

json data_config_json(const DataOpts& d) {
    json j{{"cap_kw", d.cap_kw}};
    if (!d.csv_path.empty()) {
        j["source"] = "csv";
        j["path"] = d.csv_path;
    } else {
        j["source"] = "synth";
        j["days"] = d.synth_days;
        j["noise"] = d.cloud_noise;
    }
    return j;
}

json config_echo(const DataOpts& d, const TrainOpts& t) {
    json j{{"model", t.model},
           {"data", data_config_json(d)},
           {"k", t.k},
           {"h", t.h},
           {"split_fraction", t.split_fraction},
           {"seed", t.seed}};
    if (t.model == "lstm") {
        j["precision"] = t.precision;
        j["epochs"] = t.epochs;
        j["batch"] = t.batch;
        j["lr"] = t.lr;
        j["hidden"] = t.hidden;
        j["clip"] = t.clip;
        j["optimizer"] = t.optimizer;
    } else {
        j["rounds"] = t.rounds;
        j["depth"] = t.depth;
        j["eta"] = t.eta;
        j["lambda"] = t.lambda;
        j["gamma"] = t.gamma;
        j["min_child"] = t.min_child;
    }
    return j;
}

pvtrain::TrainConfig lstm_train_config(const TrainOpts& t) {
    pvtrain::TrainConfig cfg;
    cfg.epochs = t.epochs;
    cfg.batch_size = t.batch;
    cfg.learning_rate = t.lr;
    cfg.scheme = pvtrain::scheme_from_string(t.precision);
    cfg.seed = t.seed;
    cfg.clip_norm = t.clip;
    if (t.optimizer == "adam")
        cfg.optimizer = pvtrain::OptimizerKind::Adam;
    else if (t.optimizer == "sgd")
        cfg.optimizer = pvtrain::OptimizerKind::Sgd;
    else
        throw std::invalid_argument("unknown optimizer: " + t.optimizer);
    return cfg;
}

pvtrain::GbtConfig gbt_config(const TrainOpts& t) {
    pvtrain::GbtConfig cfg;
    cfg.rounds = t.rounds;
    cfg.max_depth = t.depth;
    cfg.eta = t.eta;
    cfg.lambda = t.lambda;
    cfg.gamma = t.gamma;
    cfg.min_child = t.min_child;
    return cfg;
}

struct RunArtifacts {
    json report;
    json model;
};

// One LSTM training run at a given scheme; returns the report and model
// JSON documents.
template <typename ParamT, typename ActT>
RunArtifacts run_lstm(const pvtrain::WindowedDataset& train_set,
                      const pvtrain::WindowedDataset& test_set, const DataOpts& d,
                      const TrainOpts& t, pvtrain::PrecisionScheme scheme) {
    auto model = pvtrain::make_lstm<ParamT, ActT>(static_cast<std::size_t>(t.hidden), t.k, t.seed);
    pvtrain::TrainConfig cfg = lstm_train_config(t);
    cfg.scheme = scheme;
    pvtrain::TrainResult res = pvtrain::train_lstm(model, train_set, cfg);

    const std::vector<double> preds = pvtrain::predict(model, test_set);
    const std::vector<double> truth = test_set.targets_kw();
    const pvtrain::EvalResult eval = pvtrain::evaluate(truth, preds, test_set.cap_kw);

    TrainOpts echo = t;
    echo.precision = pvtrain::to_string(scheme);
    RunArtifacts out;
    out.report = json{{"format_version", pvtrain::kReportFormatVersion},
                      {"kind", "lstm"},
                      {"scheme", pvtrain::to_string(scheme)},
                      {"config", config_echo(d, echo)},
                      {"losses", res.epoch_losses},
                      {"epoch_seconds", res.epoch_seconds},
                      {"total_seconds", res.total_seconds},
                      {"peak_memory_bytes", res.peak_memory_bytes},
                      {"n_train", train_set.size()},
                      {"n_test", test_set.size()},
                      {"split_hash", pvtrain::dataset_hash(train_set)},
                      {"eval", pvtrain::eval_to_json(eval)}};
    out.model = pvtrain::lstm_to_json(pvtrain::lstm_snapshot(model, scheme));
    return out;
}

RunArtifacts run_lstm_scheme(const pvtrain::WindowedDataset& train_set,
                             const pvtrain::WindowedDataset& test_set, const DataOpts& d,
                             const TrainOpts& t, pvtrain::PrecisionScheme scheme) {
    switch (scheme) {
        case pvtrain::PrecisionScheme::Double:
            return run_lstm<double, double>(train_set, test_set, d, t, scheme);
        case pvtrain::PrecisionScheme::Float:
            return run_lstm<float, float>(train_set, test_set, d, t, scheme);
        case pvtrain::PrecisionScheme::Mixed:
            return run_lstm<double, float>(train_set, test_set, d, t, scheme);
    }
    throw std::logic_error("unreachable scheme");
}

RunArtifacts run_gbt(const pvtrain::WindowedDataset& train_set,
                     const pvtrain::WindowedDataset& test_set, const DataOpts& d,
                     const TrainOpts& t) {
    pvtrain::GbtTrainResult res;
    pvtrain::GbtModel model = pvtrain::fit(train_set, gbt_config(t), &res);
    const std::vector<double> preds = pvtrain::predict(model, test_set);
    const pvtrain::EvalResult eval = pvtrain::evaluate(test_set.targets, preds, test_set.cap_kw);

    RunArtifacts out;
    out.report = json{{"format_version", pvtrain::kReportFormatVersion},
                      {"kind", "gbt"},
                      {"config", config_echo(d, t)},
                      {"losses", res.round_losses},
                      {"epoch_seconds", res.round_seconds},
                      {"total_seconds", res.total_seconds},
                      {"peak_memory_bytes", res.peak_memory_bytes},
                      {"n_train", train_set.size()},
                      {"n_test", test_set.size()},
                      {"split_hash", pvtrain::dataset_hash(train_set)},
                      {"eval", pvtrain::eval_to_json(eval)}};
    out.model = pvtrain::gbt_to_json(model);
    return out;
}

void print_eval(const pvtrain::EvalResult& e) {
    std::printf("test samples: %zu\n", e.n);
    std::printf("nrmse: %.4f%%   eq2_literal: %.4f%%   mse: %.6f kW^2\n", e.nrmse_pct,
                e.eq2_literal_pct, e.mse);
}

// Builds windows + split the way the training commands do.
std::pair<pvtrain::WindowedDataset, pvtrain::WindowedDataset> prepare_split(
    const pvtrain::PowerSeries& series, const TrainOpts& t, pvtrain::Normalization norm) {
    pvtrain::WindowedDataset ds = pvtrain::make_windows(series, t.k, t.h, norm);
    if (ds.input_too_short)
        throw std::runtime_error("series too short for k=" + std::to_string(t.k) +
                                 ", h=" + std::to_string(t.h));
    return pvtrain::split(ds, pvtrain::SplitSpec{t.split_fraction});
}

int cmd_gen_data(const DataOpts& d, std::uint64_t seed, const std::string& out_file) {
    if (d.synth_days < 1) throw std::invalid_argument("gen-data requires --synth-days >= 1");
    pvtrain::PowerSeries series = pvtrain::synthesize_pv(d.synth_days, d.cap_kw, d.cloud_noise, seed);
    pvtrain::save_csv(series, out_file);
    std::printf("wrote %zu rows to %s\n", series.size(), out_file.c_str());
    return 0;
}

int cmd_train(const DataOpts& d, const TrainOpts& t, const std::string& out_dir, bool eval_only,
              std::string model_file) {
    fs::create_directories(out_dir);
    const pvtrain::PowerSeries series = load_series(d, t.seed);
    const pvtrain::Normalization norm = t.model == "lstm" ? pvtrain::Normalization::ByCapacity
                                                          : pvtrain::Normalization::None;

    if (eval_only) {
        if (model_file.empty()) model_file = (fs::path(out_dir) / "model.json").string();
        const json mj = pvtrain::read_json_file(model_file);
        const std::string kind = mj.value("kind", "");
        pvtrain::EvalResult eval;
        if (kind == "lstm") {
            const pvtrain::LstmModelFile f = pvtrain::lstm_from_json(mj);
            TrainOpts tt = t;
            tt.k = f.unroll;
            auto [train_set, test_set] = prepare_split(
                series, tt,
                f.normalized_input ? pvtrain::Normalization::ByCapacity : pvtrain::Normalization::None);
            std::vector<double> preds;
            switch (f.scheme) {
                case pvtrain::PrecisionScheme::Double:
                    preds = pvtrain::predict(pvtrain::lstm_from_snapshot<double, double>(f), test_set);
                    break;
                case pvtrain::PrecisionScheme::Float:
                    preds = pvtrain::predict(pvtrain::lstm_from_snapshot<float, float>(f), test_set);
                    break;
                case pvtrain::PrecisionScheme::Mixed:
                    preds = pvtrain::predict(pvtrain::lstm_from_snapshot<double, float>(f), test_set);
                    break;
            }
            eval = pvtrain::evaluate(test_set.targets_kw(), preds, test_set.cap_kw);
        } else if (kind == "gbt") {
            auto [train_set, test_set] = prepare_split(series, t, pvtrain::Normalization::None);
            const pvtrain::GbtModel model = pvtrain::gbt_from_json(mj);
            eval = pvtrain::evaluate(test_set.targets, pvtrain::predict(model, test_set),
                                     test_set.cap_kw);
        } else {
            throw std::runtime_error(model_file + ": unknown model kind");
        }
        pvtrain::write_json_file((fs::path(out_dir) / "eval.json").string(),
                                 pvtrain::eval_to_json(eval));
        print_eval(eval);
        return 0;
    }

    auto [train_set, test_set] = prepare_split(series, t, norm);
    RunArtifacts artifacts =
        t.model == "lstm"
            ? run_lstm_scheme(train_set, test_set, d, t, pvtrain::scheme_from_string(t.precision))
            : run_gbt(train_set, test_set, d, t);
    pvtrain::write_json_file((fs::path(out_dir) / "report.json").string(), artifacts.report);
    pvtrain::write_json_file((fs::path(out_dir) / "model.json").string(), artifacts.model);

    const auto& rep = artifacts.report;
    std::printf("%s trained: %zu train / %zu test pairs, %.2f s total\n", t.model.c_str(),
                rep["n_train"].get<std::size_t>(), rep["n_test"].get<std::size_t>(),
                rep["total_seconds"].get<double>());
    print_eval(pvtrain::eval_from_json(rep["eval"]));
    std::printf("report: %s\n", (fs::path(out_dir) / "report.json").c_str());
    return 0;
}

int cmd_eval(const DataOpts& d, const TrainOpts& t, const std::string& model_file,
             const std::string& out_dir) {
    return cmd_train(d, t, out_dir, /*eval_only=*/true, model_file);
}

int cmd_bench(const DataOpts& d, const TrainOpts& t, const std::string& out_dir, int repeat) {
    if (t.model != "lstm")
        throw std::invalid_argument("bench compares precision schemes and supports --model lstm only");
    if (repeat < 1) throw std::invalid_argument("--repeat must be >= 1");
    fs::create_directories(out_dir);
    const pvtrain::PowerSeries series = load_series(d, t.seed);
    auto [train_set, test_set] = prepare_split(series, t, pvtrain::Normalization::ByCapacity);
    const std::uint64_t split_hash = pvtrain::dataset_hash(train_set);

    const pvtrain::PrecisionScheme schemes[3] = {pvtrain::PrecisionScheme::Double,
                                                 pvtrain::PrecisionScheme::Mixed,
                                                 pvtrain::PrecisionScheme::Float};
    std::vector<json> first_reports;
    json rows = json::array();
    for (const auto scheme : schemes) {
        std::vector<double> totals;
        json report;
        for (int rep = 0; rep < repeat; ++rep) {
            if (pvtrain::dataset_hash(train_set) != split_hash)
                throw std::runtime_error("bench: split hash changed between runs");
            RunArtifacts artifacts = run_lstm_scheme(train_set, test_set, d, t, scheme);
            totals.push_back(artifacts.report["total_seconds"].get<double>());
            if (rep == 0) {
                report = artifacts.report;
                const std::string tag = pvtrain::to_string(scheme);
                pvtrain::write_json_file((fs::path(out_dir) / ("report_" + tag + ".json")).string(),
                                         artifacts.report);
                pvtrain::write_json_file((fs::path(out_dir) / ("model_" + tag + ".json")).string(),
                                         artifacts.model);
            }
        }
        std::sort(totals.begin(), totals.end());
        const double median = totals[totals.size() / 2];
        rows.push_back(json{{"scheme", pvtrain::to_string(scheme)},
                            {"total_seconds", median},
                            {"final_nrmse_pct", report["eval"]["nrmse_pct"].get<double>()},
                            {"all_total_seconds", totals}});
        first_reports.push_back(std::move(report));
    }

    json bench{{"format_version", pvtrain::kReportFormatVersion},
               {"kind", "bench"},
               {"repeat", repeat},
               {"split_hash", split_hash},
               {"rows", rows}};
    pvtrain::write_json_file((fs::path(out_dir) / "bench.json").string(), bench);
    {
        std::ofstream csv(fs::path(out_dir) / "losses.csv", std::ios::binary);
        pvtrain::export_losses_csv(first_reports, csv);
    }

    std::printf("%-8s %14s %16s\n", "scheme", "total_seconds", "final_nrmse_pct");
    for (const json& row : rows)
        std::printf("%-8s %14.3f %16.4f\n", row["scheme"].get<std::string>().c_str(),
                    row["total_seconds"].get<double>(), row["final_nrmse_pct"].get<double>());
    std::printf("curves: %s\n", (fs::path(out_dir) / "losses.csv").c_str());
    return 0;
}

int cmd_export_losses(const std::vector<std::string>& report_paths, const std::string& out_file) {
    std::vector<json> reports;
    for (const std::string& p : report_paths) reports.push_back(pvtrain::read_json_file(p));
    std::ofstream out(out_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + out_file);
    pvtrain::export_losses_csv(reports, out);
    std::size_t rows = 0;
    for (const json& r : reports) rows += r["losses"].size();
    std::printf("wrote %zu data rows to %s\n", rows, out_file.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PV power forecasting trainers (LSTM + gradient-boosted trees)"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; flags override");

    DataOpts data;
    TrainOpts topts;
    std::string out_dir = "out";
    std::string out_file;
    std::string model_file;
    bool eval_only = false;
    int repeat = 1;
    std::vector<std::string> report_paths;

    CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic PV series as CSV");
    gen->add_option("--synth-days", data.synth_days, "Number of days (96 samples each)")->required();
    gen->add_option("--cap", data.cap_kw, "Nameplate capacity in kW")->capture_default_str();
    gen->add_option("--noise", data.cloud_noise, "Cloud noise sigma")->capture_default_str();
    gen->add_option("--seed", topts.seed, "RNG seed")->capture_default_str();
    gen->add_option("--out-file", out_file, "Destination CSV path")->required();

    auto add_train_flags = [&](CLI::App* cmd, bool with_precision) {
        add_data_flags(cmd, data);
        cmd->add_option("--k", topts.k, "Feature length (lagged samples)")->capture_default_str();
        cmd->add_option("--h", topts.h, "Forecast horizon in steps")->capture_default_str();
        cmd->add_option("--split", topts.split_fraction, "Chronological train fraction")
            ->capture_default_str();
        cmd->add_option("--seed", topts.seed, "RNG seed")->capture_default_str();
        cmd->add_option("--epochs", topts.epochs, "LSTM training epochs")->capture_default_str();
        cmd->add_option("--batch", topts.batch, "LSTM minibatch size")->capture_default_str();
        cmd->add_option("--lr", topts.lr, "LSTM learning rate")->capture_default_str();
        cmd->add_option("--hidden", topts.hidden, "LSTM hidden units")->capture_default_str();
        cmd->add_option("--clip", topts.clip, "Gradient clip threshold (<=0 disables)")
            ->capture_default_str();
        cmd->add_option("--optimizer", topts.optimizer, "adam or sgd")->capture_default_str();
        cmd->add_option("--rounds", topts.rounds, "GBT boosting rounds")->capture_default_str();
        cmd->add_option("--depth", topts.depth, "GBT max tree depth")->capture_default_str();
        cmd->add_option("--eta", topts.eta, "GBT shrinkage")->capture_default_str();
        cmd->add_option("--lambda", topts.lambda, "GBT L2 regularization")->capture_default_str();
        cmd->add_option("--gamma", topts.gamma, "GBT min split gain")->capture_default_str();
        cmd->add_option("--min-child", topts.min_child, "GBT min samples per side")
            ->capture_default_str();
        cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
        if (with_precision)
            cmd->add_option("--precision", topts.precision, "double, mixed or float")
                ->capture_default_str();
    };

    CLI::App* train = app.add_subcommand("train", "Train a model and evaluate on the test split");
    train->add_option("--model", topts.model, "lstm or gbt")->capture_default_str();
    add_train_flags(train, true);
    train->add_flag("--eval-only", eval_only, "Skip training; evaluate a saved model");
    train->add_option("--model-file", model_file, "Model file for --eval-only");

    CLI::App* evalc = app.add_subcommand("eval", "Evaluate a saved model on the test split");
    evalc->add_option("--model-file", model_file, "Serialized model JSON")->required();
    add_train_flags(evalc, false);

    CLI::App* bench =
        app.add_subcommand("bench", "Train under double, mixed and float; compare time and error");
    add_train_flags(bench, false);
    bench->add_option("--repeat", repeat, "Repetitions for median timing")->capture_default_str();

    CLI::App* exp = app.add_subcommand("export-losses", "Merge report loss curves into one CSV");
    exp->add_option("reports", report_paths, "Report JSON paths")->required();
    exp->add_option("--out-file", out_file, "Destination CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(gen)) return cmd_gen_data(data, topts.seed, out_file);
        if (app.got_subcommand(train)) return cmd_train(data, topts, out_dir, eval_only, model_file);
        if (app.got_subcommand(evalc)) return cmd_eval(data, topts, model_file, out_dir);
        if (app.got_subcommand(bench)) return cmd_bench(data, topts, out_dir, repeat);
        if (app.got_subcommand(exp)) return cmd_export_losses(report_paths, out_file);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
