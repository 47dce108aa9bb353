#include "svlf/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "svlf/rng.hpp"

namespace svlf {

void MlpSpec::validate() const {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1)
        throw std::invalid_argument("mlp dims must be >= 1");
    if (head.size() != output_dim) throw std::invalid_argument("head size must match output_dim");
}

MlpSpec MlpSpec::thickness_decoder(uint32_t feat_dim, uint32_t hidden) {
    MlpSpec s;
    s.input_dim = 6 + 2 * feat_dim;
    s.hidden_dim = hidden;
    s.hidden_layers = 1;
    s.output_dim = 2;
    s.head = {Activation::Relu, Activation::Sigmoid};
    return s;
}

MlpSpec MlpSpec::color_decoder(uint32_t feat_dim, uint32_t hidden) {
    MlpSpec s;
    s.input_dim = 6 + feat_dim;
    s.hidden_dim = hidden;
    s.hidden_layers = 3;
    s.output_dim = 3;
    s.head = {Activation::Sigmoid, Activation::Sigmoid, Activation::Sigmoid};
    return s;
}

template <typename T>
size_t MlpParamsT<T>::param_count() const {
    size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
}

template <typename T>
MlpParamsT<T> MlpParamsT<T>::init(const MlpSpec& spec, uint64_t seed) {
    spec.validate();
    MlpParamsT<T> p;
    p.spec = spec;
    Rng rng(seed);
    for (uint32_t l = 0; l < spec.layer_count(); ++l) {
        const uint32_t in = spec.layer_in(l);
        const uint32_t out = spec.layer_out(l);
        const double bound = std::sqrt(6.0 / (in + out));
        std::vector<T> w(size_t(in) * out);
        for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(out, T(0));
    }
    return p;
}

template <typename T>
MlpGradsT<T> MlpGradsT<T>::like(const MlpParamsT<T>& p) {
    MlpGradsT<T> g;
    for (const auto& w : p.weights) g.weights.emplace_back(w.size(), T(0));
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), T(0));
    return g;
}

template <typename T>
void MlpGradsT<T>::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), T(0));
    for (auto& b : biases) std::fill(b.begin(), b.end(), T(0));
}

template <typename T>
void MlpGradsT<T>::add(const MlpGradsT<T>& o) {
    for (size_t l = 0; l < weights.size(); ++l) {
        T* dst = weights[l].data();
        const T* src = o.weights[l].data();
        const size_t n = weights[l].size();
#pragma omp simd
        for (size_t i = 0; i < n; ++i) dst[i] += src[i];
    }
    for (size_t l = 0; l < biases.size(); ++l)
        for (size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += o.biases[l][i];
}

namespace {

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// Y[o][j] = b[o] + sum_k W[o][k] X[k][j]; per-element accumulation runs in
// fixed k order regardless of batch width.
template <typename T>
void dense_forward(const std::vector<T>& W, const std::vector<T>& b, const BatchMat<T>& X,
                   BatchMat<T>& Y, uint32_t out_dim) {
    const uint32_t n = X.cols;
    const uint32_t in = X.rows;
    Y.resize(out_dim, n);
    for (uint32_t o = 0; o < out_dim; ++o) {
        T* yr = Y.row(o);
        const T bias = b[o];
        for (uint32_t j = 0; j < n; ++j) yr[j] = bias;
        const T* wr = W.data() + size_t(o) * in;
        for (uint32_t k = 0; k < in; ++k) {
            const T w = wr[k];
            const T* xr = X.row(k);
#pragma omp simd
            for (uint32_t j = 0; j < n; ++j) yr[j] += w * xr[j];
        }
    }
}

}  // namespace

template <typename T>
void mlp_forward(const MlpParamsT<T>& params, const BatchMat<T>& input, MlpCacheT<T>& cache) {
    const MlpSpec& spec = params.spec;
    if (input.rows != spec.input_dim) throw std::invalid_argument("mlp input dim mismatch");
    const uint32_t layers = spec.layer_count();
    cache.acts.resize(layers + 1);
    cache.acts[0] = input;

    for (uint32_t l = 0; l < layers; ++l) {
        dense_forward(params.weights[l], params.biases[l], cache.acts[l], cache.acts[l + 1],
                      spec.layer_out(l));
        BatchMat<T>& y = cache.acts[l + 1];
        if (l + 1 < layers) {  // hidden rectifier
            T* p = y.v.data();
            const size_t nn = y.v.size();
#pragma omp simd
            for (size_t i = 0; i < nn; ++i) p[i] = p[i] > T(0) ? p[i] : T(0);
        } else {  // per-unit head activations
            for (uint32_t o = 0; o < spec.output_dim; ++o) {
                T* r = y.row(o);
                if (spec.head[o] == Activation::Relu) {
                    for (uint32_t j = 0; j < y.cols; ++j) r[j] = r[j] > T(0) ? r[j] : T(0);
                } else {
                    for (uint32_t j = 0; j < y.cols; ++j) r[j] = sigmoid(r[j]);
                }
            }
        }
    }
    cache.valid = true;
}

template <typename T>
void mlp_backward(const MlpParamsT<T>& params, const MlpCacheT<T>& cache, const BatchMat<T>& d_out,
                  MlpGradsT<T>* param_grads, BatchMat<T>* d_input, MlpScratchT<T>& scratch) {
    if (!cache.valid) throw std::runtime_error("mlp backward without forward cache");
    const MlpSpec& spec = params.spec;
    const uint32_t layers = spec.layer_count();
    const uint32_t n = cache.acts[0].cols;
    if (d_out.rows != spec.output_dim || d_out.cols != n)
        throw std::invalid_argument("mlp upstream shape mismatch");

    // d_cur holds dL/d(pre-activation) of the layer being processed.
    BatchMat<T>& d_cur = scratch.d_cur;
    d_cur.resize(spec.output_dim, n);
    const BatchMat<T>& out_act = cache.acts[layers];
    for (uint32_t o = 0; o < spec.output_dim; ++o) {
        const T* up = d_out.row(o);
        const T* a = out_act.row(o);
        T* d = d_cur.row(o);
        if (spec.head[o] == Activation::Relu) {
            for (uint32_t j = 0; j < n; ++j) d[j] = a[j] > T(0) ? up[j] : T(0);
        } else {
            for (uint32_t j = 0; j < n; ++j) d[j] = up[j] * a[j] * (T(1) - a[j]);
        }
    }

    for (int l = static_cast<int>(layers) - 1; l >= 0; --l) {
        const uint32_t in = spec.layer_in(l);
        const uint32_t out = spec.layer_out(l);
        const BatchMat<T>& x = cache.acts[l];
        const std::vector<T>& W = params.weights[l];

        if (param_grads) {
            std::vector<T>& dW = param_grads->weights[l];
            std::vector<T>& db = param_grads->biases[l];
            for (uint32_t o = 0; o < out; ++o) {
                const T* d = d_cur.row(o);
                T* dwr = dW.data() + size_t(o) * in;
                for (uint32_t k = 0; k < in; ++k) {
                    const T* xr = x.row(k);
                    T acc = T(0);
#pragma omp simd reduction(+ : acc)
                    for (uint32_t j = 0; j < n; ++j) acc += d[j] * xr[j];
                    dwr[k] += acc;
                }
                T acc = T(0);
#pragma omp simd reduction(+ : acc)
                for (uint32_t j = 0; j < n; ++j) acc += d[j];
                db[o] += acc;
            }
        }

        const bool need_dx = l > 0 || d_input != nullptr;
        if (!need_dx) break;

        BatchMat<T>& d_prev = scratch.d_next;
        d_prev.resize(in, n);
        d_prev.fill(T(0));
        for (uint32_t o = 0; o < out; ++o) {
            const T* d = d_cur.row(o);
            const T* wr = W.data() + size_t(o) * in;
            for (uint32_t k = 0; k < in; ++k) {
                const T w = wr[k];
                T* dx = d_prev.row(k);
#pragma omp simd
                for (uint32_t j = 0; j < n; ++j) dx[j] += w * d[j];
            }
        }
        if (l > 0) {  // through the hidden rectifier
            const BatchMat<T>& a = cache.acts[l];
            T* p = d_prev.v.data();
            const T* av = a.v.data();
            const size_t nn = d_prev.v.size();
#pragma omp simd
            for (size_t i = 0; i < nn; ++i) p[i] = av[i] > T(0) ? p[i] : T(0);
        }
        std::swap(scratch.d_cur, scratch.d_next);
    }

    if (d_input) *d_input = scratch.d_cur;
}

namespace {

template <typename T>
void pack_input(std::span<const T> ray6, std::span<const T> z, BatchMat<T>& in) {
    in.resize(static_cast<uint32_t>(ray6.size() + z.size()), 1);
    for (size_t i = 0; i < ray6.size(); ++i) {
        if (!std::isfinite(static_cast<double>(ray6[i]))) throw std::runtime_error("non-finite decoder input");
        in.v[i] = ray6[i];
    }
    for (size_t i = 0; i < z.size(); ++i) {
        if (!std::isfinite(static_cast<double>(z[i]))) throw std::runtime_error("non-finite decoder input");
        in.v[ray6.size() + i] = z[i];
    }
}

}  // namespace

template <typename T>
void thickness_forward(const MlpParamsT<T>& params, std::span<const T> ray6, std::span<const T> zt,
                       T& tau, T& eta) {
    BatchMat<T> in;
    pack_input(ray6, zt, in);
    MlpCacheT<T> cache;
    mlp_forward(params, in, cache);
    tau = cache.acts.back().at(0, 0);
    eta = cache.acts.back().at(1, 0);
}

template <typename T>
void color_forward(const MlpParamsT<T>& params, std::span<const T> ray6, std::span<const T> zc,
                   T* rgb) {
    BatchMat<T> in;
    pack_input(ray6, zc, in);
    MlpCacheT<T> cache;
    mlp_forward(params, in, cache);
    for (int i = 0; i < 3; ++i) rgb[i] = cache.acts.back().at(i, 0);
}

AdamState AdamState::like(size_t n) {
    AdamState s;
    s.m.assign(n, 0.0f);
    s.v.assign(n, 0.0f);
    return s;
}

void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads, float lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw std::invalid_argument("adam shape mismatch");
    state.step += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double eps = state.eps;
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = b1 * state.m[i] + (1.0 - b1) * g;
        const double v = b2 * state.v[i] + (1.0 - b2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        const double mh = m / corr1;
        const double vh = v / corr2;
        params[i] = static_cast<float>(params[i] - lr * mh / (std::sqrt(vh) + eps));
    }
}

template struct MlpParamsT<float>;
template struct MlpParamsT<double>;
template struct MlpGradsT<float>;
template struct MlpGradsT<double>;
template void mlp_forward<float>(const MlpParamsT<float>&, const BatchMat<float>&,
                                 MlpCacheT<float>&);
template void mlp_forward<double>(const MlpParamsT<double>&, const BatchMat<double>&,
                                  MlpCacheT<double>&);
template void mlp_backward<float>(const MlpParamsT<float>&, const MlpCacheT<float>&,
                                  const BatchMat<float>&, MlpGradsT<float>*, BatchMat<float>*,
                                  MlpScratchT<float>&);
template void mlp_backward<double>(const MlpParamsT<double>&, const MlpCacheT<double>&,
                                   const BatchMat<double>&, MlpGradsT<double>*, BatchMat<double>*,
                                   MlpScratchT<double>&);
template void thickness_forward<float>(const MlpParamsT<float>&, std::span<const float>,
                                       std::span<const float>, float&, float&);
template void thickness_forward<double>(const MlpParamsT<double>&, std::span<const double>,
                                        std::span<const double>, double&, double&);
template void color_forward<float>(const MlpParamsT<float>&, std::span<const float>,
                                   std::span<const float>, float*);
template void color_forward<double>(const MlpParamsT<double>&, std::span<const double>,
                                    std::span<const double>, double*);

}  // namespace svlf
