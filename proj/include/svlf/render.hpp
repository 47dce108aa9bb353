#pragma once

#include <vector>

#include "svlf/camera.hpp"
#include "svlf/model.hpp"

namespace svlf {

// Normalized intersections of a ray with the voxel's minimum bounding sphere
// (radius sqrt(3)/2 * cell, centered at the voxel center), nearer point first.
struct RayParam6 {
    Vec3 p1;  // unit
    Vec3 p2;  // unit

    template <typename T>
    void write(T* out) const {
        out[0] = static_cast<T>(p1.x);
        out[1] = static_cast<T>(p1.y);
        out[2] = static_cast<T>(p1.z);
        out[3] = static_cast<T>(p2.x);
        out[4] = static_cast<T>(p2.y);
        out[5] = static_cast<T>(p2.z);
    }
};

// Throws "tangent ray" when the chord is degenerate (discriminant < 1e-14).
RayParam6 parameterize_ray(const Ray& ray, const Aabb& voxel_box);

struct VoxelSample {
    uint64_t voxel_id = 0;
    double t_in = 0, t_out = 0;
    double tau = 0;       // optical thickness, >= 0
    double eta = 0;       // within-voxel depth in (0,1); surface at eta=1 -> x1
    Vec3 x_s;             // eta*x1 + (1-eta)*x2
    double color[3] = {0, 0, 0};
};

// Decoder bookkeeping (query-count identity checks and `bench`).
struct QueryCounters {
    long long thickness_queries = 0;
    long long color_queries = 0;
    long long traversal_hits = 0;
};

// One full voxel evaluation: z_T at (x1,x2) -> f_T -> (tau,eta) -> x_s ->
// z_C -> f_C -> color. Exactly one f_T and one f_C query.
template <typename T>
VoxelSample evaluate_voxel(const SvlfModelT<T>& model, const RayVoxelHit& hit, const Ray& ray,
                           QueryCounters* counters = nullptr);

struct CompositeResult {
    double color[3] = {0, 0, 0};
    double alpha = 0;
};

// Front-to-back alpha compositing (double accumulation):
//   T_i = prod_{j<i} exp(-tau_j), w_i = T_i (1 - exp(-tau_i)).
// Samples must be ordered by t_in ascending; throws on negative tau.
CompositeResult composite(std::span<const double> taus,
                          std::span<const std::array<double, 3>> colors,
                          std::vector<double>* weights = nullptr);

struct RenderOutput {
    double color[3] = {0, 0, 0};
    double alpha = 0;
    double expected_depth = 0;  // 0 sentinel when alpha <= threshold
    std::vector<VoxelSample> samples;
};

constexpr double kAlphaDepthThreshold = 1e-4;

// Single-ray reference path (tests, debugging); the frame renderer below uses
// the batched kernels instead.
template <typename T>
RenderOutput render_ray(const SvlfModelT<T>& model, const Ray& ray,
                        QueryCounters* counters = nullptr);

struct FrameBuffers {
    uint32_t width = 0, height = 0;
    std::vector<float> rgb;    // W*H*3 interleaved
    std::vector<float> alpha;  // W*H
    std::vector<float> depth;  // W*H, 0 where alpha below threshold

    void resize(uint32_t w, uint32_t h) {
        width = w;
        height = h;
        rgb.assign(size_t(w) * h * 3, 0.f);
        alpha.assign(size_t(w) * h, 0.f);
        depth.assign(size_t(w) * h, 0.f);
    }
};

struct RenderStats {
    long long rays = 0;
    long long rays_with_hits = 0;
    long long traversal_hits = 0;
    long long thickness_queries = 0;
    long long color_queries = 0;
};

// OpenMP frame renderer: pixels are processed in fixed-size tiles through the
// batched decoder kernels; output is bit-identical for any thread count.
void render_frame(const SvlfModel& model, const Camera& camera, FrameBuffers& out,
                  RenderStats* stats = nullptr, const float* background = nullptr);

// Serial reference: same tile kernel, no OpenMP. Kept for testing and for the
// serial-vs-parallel benchmark.
void render_frame_ref(const SvlfModel& model, const Camera& camera, FrameBuffers& out,
                      RenderStats* stats = nullptr, const float* background = nullptr);

}  // namespace svlf
