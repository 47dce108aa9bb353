#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "svlf/octree.hpp"

namespace svlf {

// Trilinear weights over the unit cube, corner order b = (bz<<2)|(by<<1)|bx.
inline std::array<double, 8> trilinear_weights(const Vec3& u) {
    const double wx[2] = {1.0 - u.x, u.x};
    const double wy[2] = {1.0 - u.y, u.y};
    const double wz[2] = {1.0 - u.z, u.z};
    std::array<double, 8> w;
    for (int b = 0; b < 8; ++b) w[b] = wx[b & 1] * wy[(b >> 1) & 1] * wz[(b >> 2) & 1];
    return w;
}

// d w_b / d u, one 3-vector per corner.
inline std::array<std::array<double, 3>, 8> trilinear_weight_grads(const Vec3& u) {
    const double wx[2] = {1.0 - u.x, u.x};
    const double wy[2] = {1.0 - u.y, u.y};
    const double wz[2] = {1.0 - u.z, u.z};
    const double dx[2] = {-1.0, 1.0};
    std::array<std::array<double, 3>, 8> g;
    for (int b = 0; b < 8; ++b) {
        const int bx = b & 1, by = (b >> 1) & 1, bz = (b >> 2) & 1;
        g[b][0] = dx[bx] * wy[by] * wz[bz];
        g[b][1] = wx[bx] * dx[by] * wz[bz];
        g[b][2] = wx[bx] * wy[by] * dx[bz];
    }
    return g;
}

// Per-vertex embedding collection. T is float in production; the double
// instantiation backs the high-precision gradient harness.
template <typename T>
struct FeatureVolumeT {
    uint32_t dim = 0;
    std::vector<T> data;  // rows() x dim, row-major by vertex id
    std::vector<T> grad;  // same shape, explicit accumulator

    size_t rows() const { return dim ? data.size() / dim : 0; }
    std::span<const T> row(uint32_t id) const { return {data.data() + size_t(id) * dim, dim}; }
    std::span<T> grad_row(uint32_t id) { return {grad.data() + size_t(id) * dim, dim}; }
    void clear_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    template <typename U>
    static FeatureVolumeT<T> from(const FeatureVolumeT<U>& o) {
        FeatureVolumeT<T> v;
        v.dim = o.dim;
        v.data.assign(o.data.begin(), o.data.end());
        v.grad.assign(o.data.size(), T(0));
        return v;
    }
};

using FeatureVolume = FeatureVolumeT<float>;

// Values i.i.d. uniform on [-1/sqrt(dim), 1/sqrt(dim)] from the deterministic
// generator; grad zeroed.
FeatureVolume init_features(uint32_t vertex_count, uint32_t dim, uint64_t seed);

// Local coordinates of a point within a voxel, validated against the voxel
// box (throws "point not in voxel" beyond 1e-7) and clamped to [0,1].
Vec3 local_coords(const SparseOctree& octree, uint64_t voxel_id, const Vec3& point);

// z_p = sum_j w_j(u) z_{v,j}; weights computed in double, accumulation in T.
template <typename T>
void interpolate(const FeatureVolumeT<T>& volume, const SparseOctree& octree, uint64_t voxel_id,
                 const Vec3& point, T* out);

// Scatters w_j * upstream into grad_buf rows (size rows() x dim; pass the
// volume's own grad or a per-worker buffer). When pos_jac is non-null it
// receives d z_p / d point as dim x 3 row-major (computed in double).
template <typename T>
void interpolate_backward(const FeatureVolumeT<T>& volume, const SparseOctree& octree,
                          uint64_t voxel_id, const Vec3& point, const T* upstream, T* grad_buf,
                          double* pos_jac = nullptr);

}  // namespace svlf
