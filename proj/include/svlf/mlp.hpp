#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace svlf {

// Feature-major matrix: rows = feature dim, cols = batch. Kernels vectorize
// across columns while accumulating each element in a fixed scalar order, so
// results are bit-identical for any batch composition or thread count.
template <typename T>
struct BatchMat {
    uint32_t rows = 0;
    uint32_t cols = 0;
    std::vector<T> v;

    void resize(uint32_t r, uint32_t c) {
        rows = r;
        cols = c;
        v.resize(size_t(r) * c);
    }
    T* row(uint32_t r) { return v.data() + size_t(r) * cols; }
    const T* row(uint32_t r) const { return v.data() + size_t(r) * cols; }
    T& at(uint32_t r, uint32_t c) { return v[size_t(r) * cols + c]; }
    T at(uint32_t r, uint32_t c) const { return v[size_t(r) * cols + c]; }
    void fill(T x) { std::fill(v.begin(), v.end(), x); }
};

enum class Activation : uint8_t { Relu = 0, Sigmoid = 1 };

struct MlpSpec {
    uint32_t input_dim = 0;
    uint32_t hidden_dim = 128;
    uint32_t hidden_layers = 1;
    uint32_t output_dim = 0;
    std::vector<Activation> head;  // one per output unit

    uint32_t layer_count() const { return hidden_layers + 1; }
    uint32_t layer_in(uint32_t l) const { return l == 0 ? input_dim : hidden_dim; }
    uint32_t layer_out(uint32_t l) const { return l == hidden_layers ? output_dim : hidden_dim; }
    void validate() const;

    // f_T: [ray param | psi(x1) | psi(x2)] -> (tau: relu, eta: sigmoid)
    static MlpSpec thickness_decoder(uint32_t feat_dim = 64, uint32_t hidden = 128);
    // f_C: [ray param | psi(x_s)] -> rgb (sigmoid)
    static MlpSpec color_decoder(uint32_t feat_dim = 32, uint32_t hidden = 128);
};

template <typename T>
struct MlpParamsT {
    MlpSpec spec;
    std::vector<std::vector<T>> weights;  // [layer], row-major [out][in]
    std::vector<std::vector<T>> biases;   // [layer][out]

    size_t param_count() const;
    // Fan-scaled uniform weights on +-sqrt(6/(fan_in+fan_out)), zero biases.
    static MlpParamsT init(const MlpSpec& spec, uint64_t seed);

    template <typename U>
    static MlpParamsT from(const MlpParamsT<U>& o) {
        MlpParamsT p;
        p.spec = o.spec;
        for (const auto& w : o.weights) p.weights.emplace_back(w.begin(), w.end());
        for (const auto& b : o.biases) p.biases.emplace_back(b.begin(), b.end());
        return p;
    }
};

template <typename T>
struct MlpGradsT {
    std::vector<std::vector<T>> weights;
    std::vector<std::vector<T>> biases;

    static MlpGradsT like(const MlpParamsT<T>& p);
    void clear();
    void add(const MlpGradsT& o);
};

// Forward activations kept for the backward pass: acts[0] is the input batch,
// acts[l+1] the post-activation output of layer l.
template <typename T>
struct MlpCacheT {
    std::vector<BatchMat<T>> acts;
    bool valid = false;
};

template <typename T>
struct MlpScratchT {
    BatchMat<T> d_cur, d_next;
};

// Batched forward; output lands in cache.acts.back().
template <typename T>
void mlp_forward(const MlpParamsT<T>& params, const BatchMat<T>& input, MlpCacheT<T>& cache);

// Exact reverse-mode pass. d_out is the gradient w.r.t. post-activation
// outputs. param_grads may be null (frozen parameters: input gradients still
// flow); d_input may be null. Throws when the cache is not populated.
template <typename T>
void mlp_backward(const MlpParamsT<T>& params, const MlpCacheT<T>& cache, const BatchMat<T>& d_out,
                  MlpGradsT<T>* param_grads, BatchMat<T>* d_input, MlpScratchT<T>& scratch);

// Single-sample decoder queries (n = 1 wrappers around the batch kernels).
// Inputs must be finite; throws otherwise.
template <typename T>
void thickness_forward(const MlpParamsT<T>& params, std::span<const T> ray6, std::span<const T> zt,
                       T& tau, T& eta);
template <typename T>
void color_forward(const MlpParamsT<T>& params, std::span<const T> ray6, std::span<const T> zc,
                   T* rgb);

using MlpParams = MlpParamsT<float>;
using MlpGrads = MlpGradsT<float>;

// Bias-corrected Adam over one flat tensor; grads are left untouched.
struct AdamState {
    std::vector<float> m;
    std::vector<float> v;
    uint64_t step = 0;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;

    static AdamState like(size_t n);
};

void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads, float lr);

}  // namespace svlf
