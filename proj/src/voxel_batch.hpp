#pragma once

// Internal: batched evaluation of ray-voxel hits. Hits are staged feature-major
// and pushed through the decoders in one batch per tile/block; every element
// accumulates in a fixed scalar order, so results do not depend on how rays
// are grouped or scheduled.

#include <array>
#include <vector>

#include "svlf/features.hpp"
#include "svlf/mlp.hpp"
#include "svlf/model.hpp"
#include "svlf/render.hpp"

namespace svlf::detail {

constexpr uint32_t kMaxFeatDim = 64;

// Accumulates one trilinearly interpolated feature vector into column `col`
// starting at `row0`. Same corner order and scalar types as interpolate().
template <typename T>
inline void interp_into_column(const FeatureVolumeT<T>& vol,
                               const std::array<uint32_t, 8>& corners,
                               const std::array<double, 8>& w, BatchMat<T>& m, uint32_t row0,
                               uint32_t col) {
    const uint32_t dim = vol.dim;
    T acc[kMaxFeatDim];
    for (uint32_t d = 0; d < dim; ++d) acc[d] = T(0);
    for (int b = 0; b < 8; ++b) {
        const T wb = static_cast<T>(w[b]);
        const T* row = vol.data.data() + size_t(corners[b]) * dim;
#pragma omp simd
        for (uint32_t d = 0; d < dim; ++d) acc[d] += wb * row[d];
    }
    for (uint32_t d = 0; d < dim; ++d) m.at(row0 + d, col) = acc[d];
}

template <typename T>
struct VoxelBatchT {
    std::vector<RayVoxelHit> hits;
    std::vector<uint32_t> hit_ray;  // owning ray index per hit

    // per hit (thickness stage)
    std::vector<std::array<uint32_t, 8>> corners;
    std::vector<std::array<double, 8>> w1, w2;  // trilinear weights at x1 / x2
    std::vector<double> tau, eta, t_s;
    std::vector<Vec3> x_s;

    // color stage; column k evaluates hit color_hits[k]
    std::vector<uint32_t> color_hits;
    std::vector<std::array<double, 8>> ws;  // weights at x_s (backward only)
    std::vector<Vec3> u_s;                  // local coords of x_s (backward only)

    BatchMat<T> in_t, in_c;
    MlpCacheT<T> cache_t, cache_c;

    void clear() {
        hits.clear();
        hit_ray.clear();
        color_hits.clear();
    }
    size_t size() const { return hits.size(); }
    uint32_t n() const { return static_cast<uint32_t>(hits.size()); }
};

// Stage the f_T inputs and run the thickness decoder over every gathered hit;
// derives tau, eta, x_s and t_s per hit.
template <typename T>
void batch_forward_thickness(const SvlfModelT<T>& model, std::span<const Ray> rays,
                             VoxelBatchT<T>& b, bool for_backward) {
    const uint32_t n = b.n();
    const uint32_t ft = model.feat_thickness.dim;
    b.corners.resize(n);
    b.tau.resize(n);
    b.eta.resize(n);
    b.t_s.resize(n);
    b.x_s.resize(n);
    if (for_backward) {
        b.w1.resize(n);
        b.w2.resize(n);
    }

    b.in_t.resize(6 + 2 * ft, n);
    for (uint32_t j = 0; j < n; ++j) {
        const RayVoxelHit& hit = b.hits[j];
        const Aabb box = model.octree.voxel_aabb(hit.voxel_id);
        const RayParam6 r6 = parameterize_ray(rays[b.hit_ray[j]], box);
        T r[6];
        r6.write(r);
        for (int k = 0; k < 6; ++k) b.in_t.at(k, j) = r[k];

        b.corners[j] = model.octree.corner_vertices(hit.voxel_id);
        const Vec3 u1 = local_coords(model.octree, hit.voxel_id, hit.x1);
        const Vec3 u2 = local_coords(model.octree, hit.voxel_id, hit.x2);
        const auto w1 = trilinear_weights(u1);
        const auto w2 = trilinear_weights(u2);
        if (for_backward) {
            b.w1[j] = w1;
            b.w2[j] = w2;
        }
        interp_into_column(model.feat_thickness, b.corners[j], w1, b.in_t, 6, j);
        interp_into_column(model.feat_thickness, b.corners[j], w2, b.in_t, 6 + ft, j);
    }
    mlp_forward(model.dec_thickness, b.in_t, b.cache_t);
    const BatchMat<T>& out_t = b.cache_t.acts.back();
    for (uint32_t j = 0; j < n; ++j) {
        const RayVoxelHit& hit = b.hits[j];
        b.tau[j] = static_cast<double>(out_t.at(0, j));
        const double eta = static_cast<double>(out_t.at(1, j));
        b.eta[j] = eta;
        b.x_s[j] = hit.x1 * eta + hit.x2 * (1.0 - eta);
        b.t_s[j] = hit.t_in * eta + hit.t_out * (1.0 - eta);
    }
}

// Run the color decoder at x_s for the hits listed in b.color_hits (the
// caller fills it; identity = all hits). Requires batch_forward_thickness.
template <typename T>
void batch_forward_color(const SvlfModelT<T>& model, VoxelBatchT<T>& b, bool for_backward) {
    const uint32_t nc = static_cast<uint32_t>(b.color_hits.size());
    const uint32_t fc = model.feat_color.dim;
    if (for_backward) {
        b.ws.resize(nc);
        b.u_s.resize(nc);
    }
    b.in_c.resize(6 + fc, nc);
    for (uint32_t k = 0; k < nc; ++k) {
        const uint32_t j = b.color_hits[k];
        const RayVoxelHit& hit = b.hits[j];
        for (int r = 0; r < 6; ++r) b.in_c.at(r, k) = b.in_t.at(r, j);
        const Vec3 us = local_coords(model.octree, hit.voxel_id, b.x_s[j]);
        const auto wsk = trilinear_weights(us);
        if (for_backward) {
            b.u_s[k] = us;
            b.ws[k] = wsk;
        }
        interp_into_column(model.feat_color, b.corners[j], wsk, b.in_c, 6, k);
    }
    mlp_forward(model.dec_color, b.in_c, b.cache_c);
}

// Full pipeline with color at every hit (rendering path).
template <typename T>
void batch_forward(const SvlfModelT<T>& model, std::span<const Ray> rays, VoxelBatchT<T>& b,
                   bool for_backward) {
    batch_forward_thickness(model, rays, b, for_backward);
    b.color_hits.resize(b.n());
    for (uint32_t j = 0; j < b.n(); ++j) b.color_hits[j] = j;
    batch_forward_color(model, b, for_backward);
}

}  // namespace svlf::detail
