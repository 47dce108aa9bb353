#pragma once

#include <string>

#include "svlf/features.hpp"
#include "svlf/mlp.hpp"
#include "svlf/octree.hpp"

namespace svlf {

constexpr uint32_t kThicknessFeatDim = 64;
constexpr uint32_t kColorFeatDim = 32;

// The full scene model: octree scaffold (double geometry), per-vertex feature
// collections and the two decoders (T = float in production).
template <typename T>
struct SvlfModelT {
    SparseOctree octree;
    FeatureVolumeT<T> feat_thickness;  // dim 64
    FeatureVolumeT<T> feat_color;      // dim 32
    MlpParamsT<T> dec_thickness;       // f_T
    MlpParamsT<T> dec_color;           // f_C

    template <typename U>
    static SvlfModelT<T> from(const SvlfModelT<U>& o) {
        SvlfModelT<T> m;
        m.octree = o.octree;
        m.feat_thickness = FeatureVolumeT<T>::template from<U>(o.feat_thickness);
        m.feat_color = FeatureVolumeT<T>::template from<U>(o.feat_color);
        m.dec_thickness = MlpParamsT<T>::template from<U>(o.dec_thickness);
        m.dec_color = MlpParamsT<T>::template from<U>(o.dec_color);
        return m;
    }
};

using SvlfModel = SvlfModelT<float>;

// Gradient accumulator matching a model's learnable tensors. The trainer owns
// a fixed number of these (one per ray block) and reduces them in block order.
template <typename T>
struct ModelGradsT {
    std::vector<T> feat_thickness;  // V x 64
    std::vector<T> feat_color;      // V x 32
    MlpGradsT<T> dec_thickness;
    MlpGradsT<T> dec_color;

    static ModelGradsT like(const SvlfModelT<T>& m) {
        ModelGradsT g;
        g.feat_thickness.assign(m.feat_thickness.data.size(), T(0));
        g.feat_color.assign(m.feat_color.data.size(), T(0));
        g.dec_thickness = MlpGradsT<T>::like(m.dec_thickness);
        g.dec_color = MlpGradsT<T>::like(m.dec_color);
        return g;
    }
    void clear() {
        std::fill(feat_thickness.begin(), feat_thickness.end(), T(0));
        std::fill(feat_color.begin(), feat_color.end(), T(0));
        dec_thickness.clear();
        dec_color.clear();
    }
    void add(const ModelGradsT& o) {
        auto axpy = [](std::vector<T>& dst, const std::vector<T>& src) {
            T* d = dst.data();
            const T* s = src.data();
            const size_t n = dst.size();
#pragma omp simd
            for (size_t i = 0; i < n; ++i) d[i] += s[i];
        };
        axpy(feat_thickness, o.feat_thickness);
        axpy(feat_color, o.feat_color);
        dec_thickness.add(o.dec_thickness);
        dec_color.add(o.dec_color);
    }
};

using ModelGrads = ModelGradsT<float>;

// Fresh model over an octree: features uniform on +-1/sqrt(dim), decoders
// fan-scaled uniform, all from streams derived from `seed`.
SvlfModel init_model(SparseOctree octree, uint64_t seed);

// Optimizer state for every learnable tensor of the model.
struct ModelAdam {
    AdamState feat_thickness;
    AdamState feat_color;
    std::vector<AdamState> dec_thickness;  // weights+biases interleaved per layer
    std::vector<AdamState> dec_color;

    static ModelAdam like(const SvlfModel& m);
};

// Binary container: magic SVLF0001, little-endian fields; holds grid config,
// leaf occupancy, both feature volumes, both decoders, and Adam state.
void save_checkpoint(const std::string& path, const SvlfModel& model, const ModelAdam& adam);
void load_checkpoint(const std::string& path, SvlfModel& model, ModelAdam& adam);

}  // namespace svlf
