#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "pvtrain/windowing.hpp"

namespace pvtrain {

struct GbtConfig {
    int rounds = 100;
    int max_depth = 6;
    double eta = 0.3;      // shrinkage, applied at prediction time
    double lambda = 1.0;   // L2 regularization on leaf weights
    double gamma = 0.0;    // minimum split gain
    int min_child = 1;     // minimum sample count per side
    std::optional<double> base_score;  // defaults to the mean training target

    void validate() const {
        if (rounds < 0) throw std::invalid_argument("GbtConfig: rounds must be >= 0");
        if (max_depth < 1) throw std::invalid_argument("GbtConfig: max depth must be >= 1");
        if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("GbtConfig: eta must be in (0,1]");
        if (!(lambda >= 0.0)) throw std::invalid_argument("GbtConfig: lambda must be >= 0");
        if (min_child < 1) throw std::invalid_argument("GbtConfig: min child must be >= 1");
    }
};

// Either a split (feature >= 0) or a leaf (feature == -1, weight set).
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double weight = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // root at index 0

    // Routes left when feature value < threshold.
    double value_at(std::span<const double> features) const {
        int idx = 0;
        while (!nodes[idx].is_leaf())
            idx = features[nodes[idx].feature] < nodes[idx].threshold ? nodes[idx].left
                                                                      : nodes[idx].right;
        return nodes[idx].weight;
    }
};

// Additive ensemble: prediction = base + eta * sum of tree outputs.
struct GbtModel {
    double base = 0.0;
    double eta = 0.3;
    std::vector<RegressionTree> trees;

    double predict_one(std::span<const double> features) const {
        double acc = 0.0;
        for (const RegressionTree& t : trees) acc += t.value_at(features);
        return base + eta * acc;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

// Candidate thresholds are midpoints between adjacent distinct sorted values;
// left/right statistics accumulate over samples ordered by (value, original
// index), so the sums are reproducible by any scan using the same order.
struct TreeBuilder {
    const double* features;  // n x k row-major
    std::size_t k;
    std::span<const double> grad;
    std::span<const double> hess;
    const GbtConfig* cfg;
    std::vector<TreeNode>* nodes;

    int build(std::vector<std::size_t>& samples, int depth) {
        double g_total = 0.0, h_total = 0.0;
        for (std::size_t idx : samples) {
            g_total += grad[idx];
            h_total += hess[idx];
        }
        SplitChoice best;
        if (depth < cfg->max_depth && samples.size() >= 2 * static_cast<std::size_t>(cfg->min_child))
            best = find_split(samples, g_total, h_total);
        if (!best.found) {
            TreeNode leaf;
            leaf.weight = -g_total / (h_total + cfg->lambda);
            nodes->push_back(leaf);
            return static_cast<int>(nodes->size() - 1);
        }
        std::vector<std::size_t> left_samples, right_samples;
        for (std::size_t idx : samples) {
            if (features[idx * k + best.feature] < best.threshold)
                left_samples.push_back(idx);
            else
                right_samples.push_back(idx);
        }
        const int node_idx = static_cast<int>(nodes->size());
        nodes->push_back(TreeNode{});
        samples.clear();
        samples.shrink_to_fit();
        const int left = build(left_samples, depth + 1);
        left_samples.clear();
        left_samples.shrink_to_fit();
        const int right = build(right_samples, depth + 1);
        TreeNode& node = (*nodes)[node_idx];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        return node_idx;
    }

    SplitChoice find_split(const std::vector<std::size_t>& samples, double g_total,
                           double h_total) const {
        SplitChoice best;
        const double parent_obj = leaf_objective(g_total, h_total, cfg->lambda);
        std::vector<std::size_t> order(samples);
        for (std::size_t f = 0; f < k; ++f) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double va = features[a * k + f];
                const double vb = features[b * k + f];
                return va < vb || (va == vb && a < b);
            });
            double g_left = 0.0, h_left = 0.0;
            for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
                g_left += grad[order[pos]];
                h_left += hess[order[pos]];
                const double v = features[order[pos] * k + f];
                const double v_next = features[order[pos + 1] * k + f];
                if (!(v < v_next)) continue;  // threshold only between distinct values
                const std::size_t n_left = pos + 1;
                const std::size_t n_right = order.size() - n_left;
                if (n_left < static_cast<std::size_t>(cfg->min_child) ||
                    n_right < static_cast<std::size_t>(cfg->min_child))
                    continue;
                double threshold = (v + v_next) / 2.0;
                if (!(threshold > v)) threshold = v_next;  // adjacent representables
                const double g_right = g_total - g_left;
                const double h_right = h_total - h_left;
                const double gain = 0.5 * (leaf_objective(g_left, h_left, cfg->lambda) +
                                           leaf_objective(g_right, h_right, cfg->lambda) -
                                           parent_obj) -
                                    cfg->gamma;
                // Strict comparison keeps the lowest feature index, then the
                // lowest threshold, on ties.
                if (gain > 0.0 && gain > best.gain) {
                    best.found = true;
                    best.feature = static_cast<int>(f);
                    best.threshold = threshold;
                    best.gain = gain;
                }
            }
        }
        return best;
    }
};

}  // namespace detail

// Exact greedy tree construction on second-order statistics: every feature
// and every midpoint threshold is evaluated; a node splits only when the
// best gain is strictly positive.
inline RegressionTree build_tree(std::span<const double> gradients,
                                 std::span<const double> hessians, const double* features,
                                 std::size_t n, std::size_t k, const GbtConfig& cfg) {
    if (gradients.size() != n || hessians.size() != n)
        throw std::invalid_argument("build_tree: statistic/sample count mismatch");
    RegressionTree tree;
    detail::TreeBuilder builder{features, k, gradients, hessians, &cfg, &tree.nodes};
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    builder.build(all, 0);
    return tree;
}

struct GbtTrainResult {
    std::vector<double> round_losses;   // training MSE after each round
    std::vector<double> round_seconds;  // wall clock per round
    double total_seconds = 0.0;
    std::size_t peak_memory_bytes = 0;
};

// Squared-error gradient boosting: g = prediction - target, h = 1; each new
// tree fits the residual structure and prediction accumulates base +
// eta * tree outputs.
inline GbtModel fit(const WindowedDataset& train, const GbtConfig& cfg,
                    GbtTrainResult* result = nullptr) {
    cfg.validate();
    if (train.empty()) throw std::invalid_argument("gbt fit: empty training set");
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    const std::size_t n = train.size();

    GbtModel model;
    model.eta = cfg.eta;
    if (cfg.base_score) {
        model.base = *cfg.base_score;
    } else {
        double sum = 0.0;
        for (double t : train.targets) sum += t;
        model.base = sum / static_cast<double>(n);
    }

    std::vector<double> preds(n, model.base);
    std::vector<double> grad(n), hess(n, 1.0);
    for (int round = 0; round < cfg.rounds; ++round) {
        const auto round_start = clock::now();
        for (std::size_t i = 0; i < n; ++i) grad[i] = preds[i] - train.targets[i];
        RegressionTree tree = build_tree(grad, hess, train.features.data(), n, train.k, cfg);
        for (std::size_t i = 0; i < n; ++i)
            preds[i] += cfg.eta * tree.value_at(train.feature_row(i));
        model.trees.push_back(std::move(tree));
        if (result) {
            double sse = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = preds[i] - train.targets[i];
                sse += r * r;
            }
            result->round_losses.push_back(sse / static_cast<double>(n));
            result->round_seconds.push_back(
                std::chrono::duration<double>(clock::now() - round_start).count());
        }
    }
    if (result) {
        result->total_seconds = std::chrono::duration<double>(clock::now() - wall_start).count();
        std::size_t node_count = 0;
        for (const auto& t : model.trees) node_count += t.nodes.size();
        result->peak_memory_bytes = node_count * sizeof(TreeNode) +
                                    (preds.size() + grad.size() + hess.size()) * sizeof(double);
    }
    return model;
}

inline std::vector<double> predict(const GbtModel& model, const WindowedDataset& ds) {
    std::vector<double> out;
    out.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(model.predict_one(ds.feature_row(i)));
    return out;
}

}  // namespace pvtrain
