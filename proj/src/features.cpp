#include "svlf/features.hpp"

#include <cmath>
#include <stdexcept>

#include "svlf/rng.hpp"

namespace svlf {

FeatureVolume init_features(uint32_t vertex_count, uint32_t dim, uint64_t seed) {
    if (vertex_count < 1 || dim < 1) throw std::invalid_argument("vertex_count and dim must be >= 1");
    FeatureVolume v;
    v.dim = dim;
    v.data.resize(size_t(vertex_count) * dim);
    v.grad.assign(v.data.size(), 0.0f);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    Rng rng(seed);
    for (float& x : v.data) x = static_cast<float>(rng.uniform(-bound, bound));
    return v;
}

Vec3 local_coords(const SparseOctree& octree, uint64_t voxel_id, const Vec3& point) {
    const Aabb box = octree.voxel_aabb(voxel_id);
    const double h = octree.cell_size();
    if (!box.contains(point, 1e-7)) throw std::runtime_error("point not in voxel");
    Vec3 u{(point.x - box.lo.x) / h, (point.y - box.lo.y) / h, (point.z - box.lo.z) / h};
    u.x = std::clamp(u.x, 0.0, 1.0);
    u.y = std::clamp(u.y, 0.0, 1.0);
    u.z = std::clamp(u.z, 0.0, 1.0);
    return u;
}

template <typename T>
void interpolate(const FeatureVolumeT<T>& volume, const SparseOctree& octree, uint64_t voxel_id,
                 const Vec3& point, T* out) {
    const Vec3 u = local_coords(octree, voxel_id, point);
    const auto w = trilinear_weights(u);
    const auto corners = octree.corner_vertices(voxel_id);
    const uint32_t dim = volume.dim;
    for (uint32_t d = 0; d < dim; ++d) out[d] = T(0);
    for (int b = 0; b < 8; ++b) {
        const T wb = static_cast<T>(w[b]);
        const T* row = volume.data.data() + size_t(corners[b]) * dim;
#pragma omp simd
        for (uint32_t d = 0; d < dim; ++d) out[d] += wb * row[d];
    }
}

template <typename T>
void interpolate_backward(const FeatureVolumeT<T>& volume, const SparseOctree& octree,
                          uint64_t voxel_id, const Vec3& point, const T* upstream, T* grad_buf,
                          double* pos_jac) {
    const Vec3 u = local_coords(octree, voxel_id, point);
    const auto w = trilinear_weights(u);
    const auto corners = octree.corner_vertices(voxel_id);
    const uint32_t dim = volume.dim;

    for (int b = 0; b < 8; ++b) {
        const T wb = static_cast<T>(w[b]);
        T* grow = grad_buf + size_t(corners[b]) * dim;
#pragma omp simd
        for (uint32_t d = 0; d < dim; ++d) grow[d] += wb * upstream[d];
    }

    if (pos_jac) {
        // d z_p / d point = sum_b (d w_b / d u) z_b / h, with u = (p - lo)/h.
        const double inv_h = 1.0 / octree.cell_size();
        const auto dw = trilinear_weight_grads(u);
        for (uint32_t d = 0; d < dim; ++d) {
            pos_jac[d * 3 + 0] = 0.0;
            pos_jac[d * 3 + 1] = 0.0;
            pos_jac[d * 3 + 2] = 0.0;
        }
        for (int b = 0; b < 8; ++b) {
            const T* row = volume.data.data() + size_t(corners[b]) * dim;
            for (uint32_t d = 0; d < dim; ++d) {
                const double z = static_cast<double>(row[d]);
                pos_jac[d * 3 + 0] += dw[b][0] * z * inv_h;
                pos_jac[d * 3 + 1] += dw[b][1] * z * inv_h;
                pos_jac[d * 3 + 2] += dw[b][2] * z * inv_h;
            }
        }
    }
}

template void interpolate<float>(const FeatureVolumeT<float>&, const SparseOctree&, uint64_t,
                                 const Vec3&, float*);
template void interpolate<double>(const FeatureVolumeT<double>&, const SparseOctree&, uint64_t,
                                  const Vec3&, double*);
template void interpolate_backward<float>(const FeatureVolumeT<float>&, const SparseOctree&,
                                          uint64_t, const Vec3&, const float*, float*, double*);
template void interpolate_backward<double>(const FeatureVolumeT<double>&, const SparseOctree&,
                                           uint64_t, const Vec3&, const double*, double*, double*);

}  // namespace svlf
