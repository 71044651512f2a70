#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pvtrain/matrix.hpp"
#include "pvtrain/precision.hpp"
#include "pvtrain/windowing.hpp"

namespace pvtrain {

// Weights for one gate: scalar-input weights (hidden x 1), recurrent weights
// (hidden x hidden) and bias (hidden x 1).
template <typename T>
struct GateParams {
    Dense<T> w_x;
    Dense<T> u_h;
    Dense<T> bias;
};

// Full parameter set: four gates sharing one hidden size, plus a dense head
// mapping the final hidden state to the scalar prediction. head_b is stored
// as a 1x1 matrix so every parameter lives in a Dense tensor.
template <typename T>
struct LstmParams {
    std::size_t hidden = 0;
    GateParams<T> input_gate, forget_gate, output_gate, candidate;
    Dense<T> head_w;  // 1 x hidden
    Dense<T> head_b;  // 1 x 1

    static LstmParams zeros(std::size_t hidden) {
        LstmParams p;
        p.hidden = hidden;
        for (GateParams<T>* g : {&p.input_gate, &p.forget_gate, &p.output_gate, &p.candidate}) {
            g->w_x = Dense<T>(hidden, 1);
            g->u_h = Dense<T>(hidden, hidden);
            g->bias = Dense<T>(hidden, 1);
        }
        p.head_w = Dense<T>(1, hidden);
        p.head_b = Dense<T>(1, 1);
        return p;
    }

    // Fixed traversal order; serialization, the optimizer and gradient
    // checking all index parameters through this.
    template <typename Fn>
    void for_each_tensor(Fn&& fn) {
        fn("w_i", input_gate.w_x);
        fn("u_i", input_gate.u_h);
        fn("b_i", input_gate.bias);
        fn("w_f", forget_gate.w_x);
        fn("u_f", forget_gate.u_h);
        fn("b_f", forget_gate.bias);
        fn("w_o", output_gate.w_x);
        fn("u_o", output_gate.u_h);
        fn("b_o", output_gate.bias);
        fn("w_c", candidate.w_x);
        fn("u_c", candidate.u_h);
        fn("b_c", candidate.bias);
        fn("head_w", head_w);
        fn("head_b", head_b);
    }
    template <typename Fn>
    void for_each_tensor(Fn&& fn) const {
        const_cast<LstmParams*>(this)->for_each_tensor(
            [&](const char* name, Dense<T>& t) { fn(name, static_cast<const Dense<T>&>(t)); });
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for_each_tensor([&](const char*, const Dense<T>& t) { n += t.size(); });
        return n;
    }

    bool all_finite() const {
        bool ok = true;
        for_each_tensor([&](const char*, const Dense<T>& t) { ok = ok && t.all_finite(); });
        return ok;
    }
};

template <typename To, typename From>
LstmParams<To> cast_params(const LstmParams<From>& in) {
    LstmParams<To> out;
    out.hidden = in.hidden;
    out.input_gate = {cast_to<To>(in.input_gate.w_x), cast_to<To>(in.input_gate.u_h),
                      cast_to<To>(in.input_gate.bias)};
    out.forget_gate = {cast_to<To>(in.forget_gate.w_x), cast_to<To>(in.forget_gate.u_h),
                       cast_to<To>(in.forget_gate.bias)};
    out.output_gate = {cast_to<To>(in.output_gate.w_x), cast_to<To>(in.output_gate.u_h),
                       cast_to<To>(in.output_gate.bias)};
    out.candidate = {cast_to<To>(in.candidate.w_x), cast_to<To>(in.candidate.u_h),
                     cast_to<To>(in.candidate.bias)};
    out.head_w = cast_to<To>(in.head_w);
    out.head_b = cast_to<To>(in.head_b);
    return out;
}

// Uniform(-1/sqrt(hidden), +1/sqrt(hidden)) weights, zero biases except the
// forget bias at +1. Always drawn at 64-bit so every precision scheme starts
// from the identical point.
inline LstmParams<double> init_lstm_params(std::size_t hidden, std::mt19937_64& rng) {
    LstmParams<double> p = LstmParams<double>::zeros(hidden);
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::uniform_real_distribution<double> dist(-bound, bound);
    auto fill = [&](Dense<double>& t) {
        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    };
    fill(p.input_gate.w_x);
    fill(p.input_gate.u_h);
    fill(p.forget_gate.w_x);
    fill(p.forget_gate.u_h);
    fill(p.output_gate.w_x);
    fill(p.output_gate.u_h);
    fill(p.candidate.w_x);
    fill(p.candidate.u_h);
    fill(p.head_w);
    p.forget_gate.bias.fill(1.0);
    return p;
}

// Recurrent state, hidden x 1 columns.
template <typename T>
struct LstmState {
    Dense<T> h;
    Dense<T> c;

    explicit LstmState(std::size_t hidden) : h(hidden, 1), c(hidden, 1) {}
};

namespace detail {

template <typename T>
void ensure_shape(Dense<T>& m, std::size_t rows, std::size_t cols) {
    if (m.rows() != rows || m.cols() != cols) m = Dense<T>(rows, cols);
}

// One cell step over a batch laid out as columns. Writes the gate
// activations, new cell state, tanh(cell state) and new hidden state.
template <typename T>
void lstm_step(const LstmParams<T>& p, const T* x_row, const Dense<T>& h_prev,
               const Dense<T>& c_prev, Dense<T>& gi, Dense<T>& gf, Dense<T>& go, Dense<T>& gg,
               Dense<T>& c_out, Dense<T>& tc_out, Dense<T>& h_out) {
    const std::size_t hidden = p.hidden;
    const std::size_t batch = h_prev.cols();
    struct GateSlot {
        const GateParams<T>* params;
        Dense<T>* out;
        bool is_candidate;
    };
    const GateSlot slots[4] = {{&p.input_gate, &gi, false},
                               {&p.forget_gate, &gf, false},
                               {&p.output_gate, &go, false},
                               {&p.candidate, &gg, true}};
    for (const GateSlot& slot : slots) {
        Dense<T>& pre = *slot.out;
        matmul_into(pre, slot.params->u_h, h_prev, /*accumulate=*/false);
        for (std::size_t r = 0; r < hidden; ++r) {
            const T w = slot.params->w_x(r, 0);
            const T b = slot.params->bias(r, 0);
            T* row = pre.row(r);
            if (slot.is_candidate) {
                for (std::size_t j = 0; j < batch; ++j) row[j] = std::tanh(row[j] + w * x_row[j] + b);
            } else {
                for (std::size_t j = 0; j < batch; ++j)
                    row[j] = sigmoid_scalar(row[j] + w * x_row[j] + b);
            }
        }
    }
    const T* pi = gi.data();
    const T* pf = gf.data();
    const T* po = go.data();
    const T* pg = gg.data();
    const T* pc = c_prev.data();
    T* out_c = c_out.data();
    T* out_tc = tc_out.data();
    T* out_h = h_out.data();
    for (std::size_t e = 0; e < gi.size(); ++e) {
        const T c_new = pf[e] * pc[e] + pi[e] * pg[e];
        out_c[e] = c_new;
        const T tc = std::tanh(c_new);
        out_tc[e] = tc;
        out_h[e] = po[e] * tc;
    }
}

}  // namespace detail

// Per-timestep values retained for the backward pass. h and c carry T+1
// entries (index 0 is the initial zero state); gates and tanh(c) carry T.
template <typename ActT>
struct ForwardCache {
    std::size_t unroll = 0, hidden = 0, batch = 0;
    Dense<ActT> x;  // unroll x batch, oldest-first rows
    std::vector<Dense<ActT>> gate_i, gate_f, gate_o, gate_g, tanh_c;
    std::vector<Dense<ActT>> h, c;

    void ensure(std::size_t T, std::size_t H, std::size_t B) {
        unroll = T;
        hidden = H;
        batch = B;
        detail::ensure_shape(x, T, B);
        auto fit = [&](std::vector<Dense<ActT>>& v, std::size_t n) {
            v.resize(n);
            for (auto& m : v) detail::ensure_shape(m, H, B);
        };
        fit(gate_i, T);
        fit(gate_f, T);
        fit(gate_o, T);
        fit(gate_g, T);
        fit(tanh_c, T);
        fit(h, T + 1);
        fit(c, T + 1);
    }

    std::size_t bytes() const {
        return (unroll * 5 + (unroll + 1) * 2) * hidden * batch * sizeof(ActT) +
               unroll * batch * sizeof(ActT);
    }
};

// Unrolled shared-parameter LSTM plus dense head. ParamT is the storage width
// of parameters, gradients and optimizer state; ActT the width of inputs and
// activations. The compute-side parameter copy is refreshed after every
// update so the forward/backward passes run entirely at ActT.
template <typename ParamT, typename ActT>
class LstmModel {
public:
    LstmModel(LstmParams<ParamT> params, std::size_t unroll)
        : master_(std::move(params)), unroll_(unroll) {
        if (unroll_ == 0) throw std::invalid_argument("LstmModel: unroll must be >= 1");
        sync_compute();
    }

    std::size_t hidden() const noexcept { return master_.hidden; }
    std::size_t unroll() const noexcept { return unroll_; }

    LstmParams<ParamT>& params() noexcept { return master_; }
    const LstmParams<ParamT>& params() const noexcept { return master_; }
    const LstmParams<ActT>& compute_params() const noexcept { return compute_; }

    void sync_compute() { compute_ = cast_params<ActT>(master_); }

    // Metadata recorded at training time for serialization and reporting.
    double cap_kw = 0.0;
    bool normalized_input = false;

private:
    LstmParams<ParamT> master_;
    LstmParams<ActT> compute_;
    std::size_t unroll_;
};

template <typename ParamT, typename ActT>
LstmModel<ParamT, ActT> make_lstm(std::size_t hidden, std::size_t unroll, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return LstmModel<ParamT, ActT>(cast_params<ParamT>(init_lstm_params(hidden, rng)), unroll);
}

// Single standard cell step; i = sigmoid(Wx + Uh + b) etc.,
// c' = f.c + i.g, h' = o.tanh(c'). Exposed for direct testing; the training
// path uses the batched equivalent.
template <typename T>
LstmState<T> cell_forward(const LstmParams<T>& params, T x, const LstmState<T>& state) {
    if (state.h.rows() != params.hidden || state.c.rows() != params.hidden)
        throw std::invalid_argument("cell_forward: state/hidden size mismatch");
    LstmState<T> next(params.hidden);
    Dense<T> gi(params.hidden, 1), gf(params.hidden, 1), go(params.hidden, 1),
        gg(params.hidden, 1), tc(params.hidden, 1);
    const T xs[1] = {x};
    detail::lstm_step(params, xs, state.h, state.c, gi, gf, go, gg, next.c, tc, next.h);
    if (!next.h.all_finite() || !next.c.all_finite())
        throw std::runtime_error("cell_forward: non-finite state");
    return next;
}

// Batched forward over windows laid out as columns of x (unroll x batch,
// oldest-first rows). Returns the 1 x batch prediction row.
template <typename ParamT, typename ActT>
Dense<ActT> forward_batch(const LstmModel<ParamT, ActT>& model, ForwardCache<ActT>& cache) {
    const LstmParams<ActT>& p = model.compute_params();
    const std::size_t T = model.unroll();
    const std::size_t B = cache.x.cols();
    if (cache.x.rows() != T) throw std::invalid_argument("forward_batch: input rows != unroll");
    cache.h[0].fill(ActT{0});
    cache.c[0].fill(ActT{0});
    for (std::size_t t = 1; t <= T; ++t) {
        detail::lstm_step(p, cache.x.row(t - 1), cache.h[t - 1], cache.c[t - 1], cache.gate_i[t - 1],
                          cache.gate_f[t - 1], cache.gate_o[t - 1], cache.gate_g[t - 1], cache.c[t],
                          cache.tanh_c[t - 1], cache.h[t]);
    }
    Dense<ActT> y(1, B);
    matmul_into(y, p.head_w, cache.h[T], /*accumulate=*/false);
    const ActT b0 = p.head_b(0, 0);
    for (std::size_t j = 0; j < B; ++j) y(0, j) += b0;
    return y;
}

// Forward pass for one window; features newest-first as stored in
// WindowedDataset. Returns the raw head output (normalized units when the
// dataset was capacity-normalized).
template <typename ParamT, typename ActT>
double model_forward(const LstmModel<ParamT, ActT>& model, std::span<const double> features,
                     ForwardCache<ActT>& cache) {
    const std::size_t T = model.unroll();
    if (features.size() != T)
        throw std::invalid_argument("model_forward: feature length " +
                                    std::to_string(features.size()) + " != unroll " +
                                    std::to_string(T));
    cache.ensure(T, model.hidden(), 1);
    for (std::size_t t = 0; t < T; ++t)
        cache.x(t, 0) = static_cast<ActT>(features[T - 1 - t]);  // oldest first
    const double y = static_cast<double>(forward_batch(model, cache)(0, 0));
    if (!std::isfinite(y)) throw std::runtime_error("model_forward: non-finite prediction");
    return y;
}

inline double mse_loss(std::span<const double> preds, std::span<const double> targets) {
    if (preds.empty()) throw std::invalid_argument("mse_loss: empty input");
    if (preds.size() != targets.size()) throw std::invalid_argument("mse_loss: length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double r = preds[i] - targets[i];
        sum += r * r;
    }
    return sum / static_cast<double>(preds.size());
}

namespace detail {

// Scratch buffers for the batched backward pass.
template <typename ActT>
struct BackwardWorkspace {
    Dense<ActT> dh, dh_next, dc, dpre;
    Dense<ActT> h_prev_t;  // batch x hidden, transposed per step
    Dense<ActT> u_t[4];    // transposed recurrent weights
    Dense<ActT> prod_hh, prod_1h;

    void ensure(std::size_t H, std::size_t B) {
        ensure_shape(dh, H, B);
        ensure_shape(dh_next, H, B);
        ensure_shape(dc, H, B);
        ensure_shape(dpre, H, B);
        ensure_shape(h_prev_t, B, H);
        for (auto& u : u_t) ensure_shape(u, H, H);
        ensure_shape(prod_hh, H, H);
        ensure_shape(prod_1h, 1, H);
    }

    std::size_t bytes() const {
        return (4 * dh.size() + h_prev_t.size() + 4 * u_t[0].size() + prod_hh.size() +
                prod_1h.size()) *
               sizeof(ActT);
    }
};

}  // namespace detail

// Backpropagation through time for one batch. dy is dLoss/dprediction
// (1 x batch); gradients are accumulated into grads at the parameter width,
// with the shared-parameter contributions summed over all timesteps.
template <typename ParamT, typename ActT>
void backward_batch(const LstmModel<ParamT, ActT>& model, const ForwardCache<ActT>& cache,
                    const Dense<ActT>& dy, LstmParams<ParamT>& grads,
                    detail::BackwardWorkspace<ActT>& ws) {
    const LstmParams<ActT>& p = model.compute_params();
    const std::size_t T = cache.unroll;
    const std::size_t H = cache.hidden;
    const std::size_t B = cache.batch;
    ws.ensure(H, B);

    // Dense head.
    transpose_into(ws.h_prev_t, cache.h[T]);  // B x H
    matmul_into(ws.prod_1h, dy, ws.h_prev_t, /*accumulate=*/false);
    add_cast_into(grads.head_w, ws.prod_1h);
    {
        ActT s{0};
        for (std::size_t j = 0; j < B; ++j) s += dy(0, j);
        grads.head_b(0, 0) += static_cast<ParamT>(s);
    }
    // dh = head_w^T * dy
    for (std::size_t r = 0; r < H; ++r) {
        const ActT w = p.head_w(0, r);
        ActT* row = ws.dh.row(r);
        const ActT* dyr = dy.row(0);
        for (std::size_t j = 0; j < B; ++j) row[j] = w * dyr[j];
    }
    ws.dc.fill(ActT{0});

    transpose_into(ws.u_t[0], p.input_gate.u_h);
    transpose_into(ws.u_t[1], p.forget_gate.u_h);
    transpose_into(ws.u_t[2], p.output_gate.u_h);
    transpose_into(ws.u_t[3], p.candidate.u_h);

    for (std::size_t t = T; t >= 1; --t) {
        const Dense<ActT>& gi = cache.gate_i[t - 1];
        const Dense<ActT>& gf = cache.gate_f[t - 1];
        const Dense<ActT>& go = cache.gate_o[t - 1];
        const Dense<ActT>& gg = cache.gate_g[t - 1];
        const Dense<ActT>& tc = cache.tanh_c[t - 1];
        const Dense<ActT>& c_prev = cache.c[t - 1];
        const std::size_t n = gi.size();

        // Cell-state delta: contributions from h_t through the output gate.
        {
            const ActT* pdh = ws.dh.data();
            const ActT* ptc = tc.data();
            const ActT* pgo = go.data();
            ActT* pdc = ws.dc.data();
            for (std::size_t e = 0; e < n; ++e)
                pdc[e] += pdh[e] * pgo[e] * (ActT{1} - ptc[e] * ptc[e]);
        }

        transpose_into(ws.h_prev_t, cache.h[t - 1]);
        ws.dh_next.fill(ActT{0});

        struct GateRef {
            const Dense<ActT>* act;
            GateParams<ParamT>* grad;
            const Dense<ActT>* u_t;
            int kind;  // 0: input, 1: forget, 2: output, 3: candidate
        };
        GateRef refs[4] = {{&gi, &grads.input_gate, &ws.u_t[0], 0},
                           {&gf, &grads.forget_gate, &ws.u_t[1], 1},
                           {&go, &grads.output_gate, &ws.u_t[2], 2},
                           {&gg, &grads.candidate, &ws.u_t[3], 3}};
        for (GateRef& ref : refs) {
            const ActT* act = ref.act->data();
            const ActT* pdc = ws.dc.data();
            const ActT* pdh = ws.dh.data();
            ActT* dpre = ws.dpre.data();
            switch (ref.kind) {
                case 0: {  // d(pre_i) = dc . g . i(1-i)
                    const ActT* pgg = gg.data();
                    for (std::size_t e = 0; e < n; ++e)
                        dpre[e] = pdc[e] * pgg[e] * act[e] * (ActT{1} - act[e]);
                    break;
                }
                case 1: {  // d(pre_f) = dc . c_{t-1} . f(1-f)
                    const ActT* pcp = c_prev.data();
                    for (std::size_t e = 0; e < n; ++e)
                        dpre[e] = pdc[e] * pcp[e] * act[e] * (ActT{1} - act[e]);
                    break;
                }
                case 2: {  // d(pre_o) = dh . tanh(c) . o(1-o)
                    const ActT* ptc = tc.data();
                    for (std::size_t e = 0; e < n; ++e)
                        dpre[e] = pdh[e] * ptc[e] * act[e] * (ActT{1} - act[e]);
                    break;
                }
                case 3: {  // d(pre_g) = dc . i . (1-g^2)
                    const ActT* pgi = gi.data();
                    for (std::size_t e = 0; e < n; ++e)
                        dpre[e] = pdc[e] * pgi[e] * (ActT{1} - act[e] * act[e]);
                    break;
                }
            }
            // Parameter gradients, accumulated at the parameter width.
            const ActT* xrow = cache.x.row(t - 1);
            for (std::size_t r = 0; r < H; ++r) {
                const ActT* drow = ws.dpre.row(r);
                ActT sw{0}, sb{0};
                for (std::size_t j = 0; j < B; ++j) {
                    sw += drow[j] * xrow[j];
                    sb += drow[j];
                }
                ref.grad->w_x(r, 0) += static_cast<ParamT>(sw);
                ref.grad->bias(r, 0) += static_cast<ParamT>(sb);
            }
            matmul_into(ws.prod_hh, ws.dpre, ws.h_prev_t, /*accumulate=*/false);
            add_cast_into(ref.grad->u_h, ws.prod_hh);
            matmul_into(ws.dh_next, *ref.u_t, ws.dpre, /*accumulate=*/true);
        }

        // Push deltas one step back.
        {
            ActT* pdc = ws.dc.data();
            const ActT* pgf = gf.data();
            for (std::size_t e = 0; e < n; ++e) pdc[e] *= pgf[e];
        }
        std::swap(ws.dh, ws.dh_next);
    }
}

enum class OptimizerKind { Adam, Sgd };

inline const char* to_string(OptimizerKind k) {
    return k == OptimizerKind::Adam ? "adam" : "sgd";
}

struct TrainConfig {
    int epochs = 50;
    int batch_size = 16;
    double learning_rate = 0.001;
    PrecisionScheme scheme = PrecisionScheme::Double;
    std::uint64_t seed = 42;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 5.0;  // global L2 threshold; <= 0 disables clipping

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0))
            throw std::invalid_argument("TrainConfig: epochs, batch size and lr must be positive");
    }
};

// First and second moment estimates, stored at the parameter width.
template <typename ParamT>
struct AdamState {
    LstmParams<ParamT> m, v;
    long step = 0;

    explicit AdamState(std::size_t hidden)
        : m(LstmParams<ParamT>::zeros(hidden)), v(LstmParams<ParamT>::zeros(hidden)) {}
};

// Adam with bias correction, or plain SGD. All arithmetic runs at ParamT.
template <typename ParamT>
void optimizer_step(LstmParams<ParamT>& params, const LstmParams<ParamT>& grads,
                    AdamState<ParamT>& state, const TrainConfig& cfg) {
    // Walk the parameter sets in lockstep; the traversal order is fixed.
    std::vector<Dense<ParamT>*> pt, mt, vt;
    std::vector<const Dense<ParamT>*> gt;
    params.for_each_tensor([&](const char*, Dense<ParamT>& t) { pt.push_back(&t); });
    grads.for_each_tensor([&](const char*, const Dense<ParamT>& t) { gt.push_back(&t); });

    const ParamT lr = static_cast<ParamT>(cfg.learning_rate);
    if (cfg.optimizer == OptimizerKind::Sgd) {
        for (std::size_t k = 0; k < pt.size(); ++k) {
            ParamT* theta = pt[k]->data();
            const ParamT* g = gt[k]->data();
            for (std::size_t i = 0; i < pt[k]->size(); ++i) theta[i] -= lr * g[i];
        }
        return;
    }
    ++state.step;
    state.m.for_each_tensor([&](const char*, Dense<ParamT>& t) { mt.push_back(&t); });
    state.v.for_each_tensor([&](const char*, Dense<ParamT>& t) { vt.push_back(&t); });
    const ParamT b1 = static_cast<ParamT>(cfg.adam_beta1);
    const ParamT b2 = static_cast<ParamT>(cfg.adam_beta2);
    const ParamT eps = static_cast<ParamT>(cfg.adam_eps);
    const ParamT bc1 = ParamT{1} - static_cast<ParamT>(std::pow(cfg.adam_beta1, state.step));
    const ParamT bc2 = ParamT{1} - static_cast<ParamT>(std::pow(cfg.adam_beta2, state.step));
    for (std::size_t k = 0; k < pt.size(); ++k) {
        ParamT* theta = pt[k]->data();
        const ParamT* g = gt[k]->data();
        ParamT* m = mt[k]->data();
        ParamT* v = vt[k]->data();
        for (std::size_t i = 0; i < pt[k]->size(); ++i) {
            m[i] = b1 * m[i] + (ParamT{1} - b1) * g[i];
            v[i] = b2 * v[i] + (ParamT{1} - b2) * g[i] * g[i];
            const ParamT mhat = m[i] / bc1;
            const ParamT vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

struct DivergenceError : std::runtime_error {
    int epoch;
    explicit DivergenceError(int epoch_)
        : std::runtime_error("training diverged (non-finite loss or gradient) at epoch " +
                             std::to_string(epoch_ + 1)),
          epoch(epoch_) {}
};

struct TrainResult {
    std::vector<double> epoch_losses;   // mean squared residual per epoch
    std::vector<double> epoch_seconds;  // wall clock per epoch
    double total_seconds = 0.0;
    std::size_t peak_memory_bytes = 0;  // live parameter + activation buffers
};

// Minibatch training loop: shuffle each epoch with the seeded RNG, forward /
// BPTT / clip / optimizer step per batch, loss and wall clock recorded per
// epoch. Throws DivergenceError when the loss or gradient norm goes
// non-finite.
template <typename ParamT, typename ActT>
TrainResult train_lstm(LstmModel<ParamT, ActT>& model, const WindowedDataset& train,
                       const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw std::invalid_argument("train_lstm: empty training set");
    if (train.k != model.unroll())
        throw std::invalid_argument("train_lstm: dataset k != model unroll");
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();

    const std::size_t n = train.size();
    const std::size_t T = model.unroll();
    const std::size_t H = model.hidden();
    const std::size_t B = static_cast<std::size_t>(cfg.batch_size);

    model.cap_kw = train.cap_kw;
    model.normalized_input = train.normalization == Normalization::ByCapacity;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    LstmParams<ParamT> grads = LstmParams<ParamT>::zeros(H);
    AdamState<ParamT> opt(H);
    ForwardCache<ActT> cache;
    detail::BackwardWorkspace<ActT> ws;
    Dense<ActT> dy(1, 1);

    TrainResult result;
    result.epoch_losses.reserve(cfg.epochs);
    result.epoch_seconds.reserve(cfg.epochs);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        double sse = 0.0;
        for (std::size_t start = 0; start < n; start += B) {
            const std::size_t bsz = std::min(B, n - start);
            cache.ensure(T, H, bsz);
            detail::ensure_shape(dy, 1, bsz);
            for (std::size_t b = 0; b < bsz; ++b) {
                const auto features = train.feature_row(order[start + b]);
                for (std::size_t t = 0; t < T; ++t)
                    cache.x(t, b) = static_cast<ActT>(features[T - 1 - t]);  // oldest first
            }
            Dense<ActT> y = forward_batch(model, cache);
            double batch_sse = 0.0;
            for (std::size_t b = 0; b < bsz; ++b) {
                const ActT target = static_cast<ActT>(train.targets[order[start + b]]);
                const ActT r = y(0, b) - target;
                batch_sse += static_cast<double>(r) * static_cast<double>(r);
                dy(0, b) = static_cast<ActT>(2) * r / static_cast<ActT>(bsz);
            }
            if (!std::isfinite(batch_sse)) throw DivergenceError(epoch);
            sse += batch_sse;

            grads.for_each_tensor([](const char*, Dense<ParamT>& t) { t.fill(ParamT{0}); });
            backward_batch(model, cache, dy, grads, ws);

            double norm_sq = 0.0;
            grads.for_each_tensor([&](const char*, const Dense<ParamT>& t) {
                for (std::size_t i = 0; i < t.size(); ++i) {
                    const double g = static_cast<double>(t.data()[i]);
                    norm_sq += g * g;
                }
            });
            if (!std::isfinite(norm_sq)) throw DivergenceError(epoch);
            if (cfg.clip_norm > 0.0) {
                const double norm = std::sqrt(norm_sq);
                if (norm > cfg.clip_norm) {
                    const ParamT scale = static_cast<ParamT>(cfg.clip_norm / norm);
                    grads.for_each_tensor([&](const char*, Dense<ParamT>& t) {
                        for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] *= scale;
                    });
                }
            }
            optimizer_step(model.params(), grads, opt, cfg);
            model.sync_compute();
        }
        const double epoch_loss = sse / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch);
        result.epoch_losses.push_back(epoch_loss);
        result.epoch_seconds.push_back(
            std::chrono::duration<double>(clock::now() - epoch_start).count());
    }
    result.total_seconds = std::chrono::duration<double>(clock::now() - wall_start).count();

    const std::size_t param_count = model.params().parameter_count();
    result.peak_memory_bytes = param_count * (2 * sizeof(ParamT))   // master + gradients
                               + param_count * (2 * sizeof(ParamT))  // Adam moments
                               + param_count * sizeof(ActT)          // compute copy
                               + cache.bytes() + ws.bytes();
    return result;
}

// Forward pass per pair; predictions rescaled to kW when the dataset is
// capacity-normalized.
template <typename ParamT, typename ActT>
std::vector<double> predict(const LstmModel<ParamT, ActT>& model, const WindowedDataset& ds) {
    std::vector<double> out;
    out.reserve(ds.size());
    const std::size_t T = model.unroll();
    const std::size_t chunk = 64;
    ForwardCache<ActT> cache;
    const double scale = ds.normalization == Normalization::ByCapacity ? ds.cap_kw : 1.0;
    for (std::size_t start = 0; start < ds.size(); start += chunk) {
        const std::size_t bsz = std::min(chunk, ds.size() - start);
        cache.ensure(T, model.hidden(), bsz);
        for (std::size_t b = 0; b < bsz; ++b) {
            const auto features = ds.feature_row(start + b);
            for (std::size_t t = 0; t < T; ++t)
                cache.x(t, b) = static_cast<ActT>(features[T - 1 - t]);
        }
        Dense<ActT> y = forward_batch(model, cache);
        for (std::size_t b = 0; b < bsz; ++b) out.push_back(static_cast<double>(y(0, b)) * scale);
    }
    return out;
}

// Mean batch loss used by training and by gradient checking:
// (1/B) sum of squared residuals over the given pairs.
template <typename ParamT, typename ActT>
double lstm_batch_loss(const LstmModel<ParamT, ActT>& model, const WindowedDataset& ds) {
    const std::size_t T = model.unroll();
    ForwardCache<ActT> cache;
    cache.ensure(T, model.hidden(), ds.size());
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const auto features = ds.feature_row(b);
        for (std::size_t t = 0; t < T; ++t) cache.x(t, b) = static_cast<ActT>(features[T - 1 - t]);
    }
    Dense<ActT> y = forward_batch(model, cache);
    double sse = 0.0;
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const double r = static_cast<double>(y(0, b)) - ds.targets[b];
        sse += r * r;
    }
    return sse / static_cast<double>(ds.size());
}

// Analytic batch gradients (mean over the given pairs), for verification.
template <typename ParamT, typename ActT>
LstmParams<ParamT> lstm_batch_gradients(const LstmModel<ParamT, ActT>& model,
                                        const WindowedDataset& ds) {
    const std::size_t T = model.unroll();
    ForwardCache<ActT> cache;
    cache.ensure(T, model.hidden(), ds.size());
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const auto features = ds.feature_row(b);
        for (std::size_t t = 0; t < T; ++t) cache.x(t, b) = static_cast<ActT>(features[T - 1 - t]);
    }
    Dense<ActT> y = forward_batch(model, cache);
    Dense<ActT> dy(1, ds.size());
    for (std::size_t b = 0; b < ds.size(); ++b) {
        const ActT r = y(0, b) - static_cast<ActT>(ds.targets[b]);
        dy(0, b) = static_cast<ActT>(2) * r / static_cast<ActT>(ds.size());
    }
    LstmParams<ParamT> grads = LstmParams<ParamT>::zeros(model.hidden());
    detail::BackwardWorkspace<ActT> ws;
    backward_batch(model, cache, dy, grads, ws);
    return grads;
}

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t parameters_checked = 0;
    std::string worst_parameter;
    double delta = 1e-6;
    double tolerance = 1e-6;
    bool pass = false;
};

// Compares BPTT gradients against central finite differences over every
// parameter. 64-bit models only; the truncation error of the stencil makes
// the comparison meaningless at 32-bit.
inline GradCheckReport gradient_check(LstmModel<double, double>& model, const WindowedDataset& batch,
                                      double delta = 1e-6, double tolerance = 1e-6) {
    GradCheckReport report;
    report.delta = delta;
    report.tolerance = tolerance;
    const LstmParams<double> analytic = lstm_batch_gradients(model, batch);
    std::vector<const Dense<double>*> an;
    analytic.for_each_tensor([&](const char*, const Dense<double>& t) { an.push_back(&t); });
    std::size_t tensor_idx = 0;
    model.params().for_each_tensor([&](const char* name, Dense<double>& t) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double saved = t.data()[i];
            t.data()[i] = saved + delta;
            model.sync_compute();
            const double up = lstm_batch_loss(model, batch);
            t.data()[i] = saved - delta;
            model.sync_compute();
            const double down = lstm_batch_loss(model, batch);
            t.data()[i] = saved;
            const double numeric = (up - down) / (2.0 * delta);
            const double a = an[tensor_idx]->data()[i];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = std::string(name) + "[" + std::to_string(i) + "]";
            }
            ++report.parameters_checked;
        }
        ++tensor_idx;
    });
    model.sync_compute();
    report.pass = report.max_rel_error < tolerance;
    return report;
}

}  // namespace pvtrain
