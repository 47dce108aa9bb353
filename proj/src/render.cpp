#include "svlf/render.hpp"

#include <cmath>
#include <stdexcept>

#include "voxel_batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "svlf/threads.hpp"

namespace svlf {

RayParam6 parameterize_ray(const Ray& ray, const Aabb& voxel_box) {
    const Vec3 center = voxel_box.center();
    const double radius = 0.5 * std::sqrt(3.0) * voxel_box.extent().x;
    const Vec3 oc = ray.origin - center;
    const double b = dot(oc, ray.dir);
    const double c = dot(oc, oc) - radius * radius;
    const double disc = b * b - c;
    if (disc < 1e-14) throw std::runtime_error("tangent ray");
    const double s = std::sqrt(disc);
    const Vec3 p1 = ray.at(-b - s) - center;
    const Vec3 p2 = ray.at(-b + s) - center;
    return RayParam6{p1 / norm(p1), p2 / norm(p2)};
}

template <typename T>
VoxelSample evaluate_voxel(const SvlfModelT<T>& model, const RayVoxelHit& hit, const Ray& ray,
                           QueryCounters* counters) {
    const Aabb box = model.octree.voxel_aabb(hit.voxel_id);
    const RayParam6 r6 = parameterize_ray(ray, box);
    T r[6];
    r6.write(r);

    const uint32_t ft = model.feat_thickness.dim;
    std::vector<T> zt(2 * ft);
    interpolate(model.feat_thickness, model.octree, hit.voxel_id, hit.x1, zt.data());
    interpolate(model.feat_thickness, model.octree, hit.voxel_id, hit.x2, zt.data() + ft);

    T tau, eta;
    thickness_forward(model.dec_thickness, std::span<const T>(r, 6), std::span<const T>(zt), tau,
                      eta);
    if (counters) counters->thickness_queries++;

    VoxelSample s;
    s.voxel_id = hit.voxel_id;
    s.t_in = hit.t_in;
    s.t_out = hit.t_out;
    s.tau = static_cast<double>(tau);
    s.eta = static_cast<double>(eta);
    s.x_s = hit.x1 * s.eta + hit.x2 * (1.0 - s.eta);

    std::vector<T> zc(model.feat_color.dim);
    interpolate(model.feat_color, model.octree, hit.voxel_id, s.x_s, zc.data());
    T rgb[3];
    color_forward(model.dec_color, std::span<const T>(r, 6), std::span<const T>(zc), rgb);
    if (counters) counters->color_queries++;
    for (int i = 0; i < 3; ++i) s.color[i] = static_cast<double>(rgb[i]);
    return s;
}

CompositeResult composite(std::span<const double> taus,
                          std::span<const std::array<double, 3>> colors,
                          std::vector<double>* weights) {
    if (taus.size() != colors.size()) throw std::invalid_argument("composite size mismatch");
    if (weights) {
        weights->clear();
        weights->reserve(taus.size());
    }
    CompositeResult out;
    double transmittance = 1.0;
    for (size_t i = 0; i < taus.size(); ++i) {
        if (taus[i] < 0.0) throw std::invalid_argument("negative optical thickness");
        const double e = std::exp(-taus[i]);
        const double w = transmittance * (1.0 - e);
        out.color[0] += w * colors[i][0];
        out.color[1] += w * colors[i][1];
        out.color[2] += w * colors[i][2];
        out.alpha += w;
        transmittance *= e;
        if (weights) weights->push_back(w);
    }
    return out;
}

template <typename T>
RenderOutput render_ray(const SvlfModelT<T>& model, const Ray& ray, QueryCounters* counters) {
    const auto hits = model.octree.traverse(ray);
    if (counters) counters->traversal_hits += static_cast<long long>(hits.size());

    RenderOutput out;
    out.samples.reserve(hits.size());
    std::vector<double> taus;
    std::vector<std::array<double, 3>> colors;
    for (const RayVoxelHit& hit : hits) {
        VoxelSample s = evaluate_voxel(model, hit, ray, counters);
        taus.push_back(s.tau);
        colors.push_back({s.color[0], s.color[1], s.color[2]});
        out.samples.push_back(std::move(s));
    }
    std::vector<double> w;
    const CompositeResult comp = composite(taus, colors, &w);
    out.color[0] = comp.color[0];
    out.color[1] = comp.color[1];
    out.color[2] = comp.color[2];
    out.alpha = comp.alpha;
    if (comp.alpha > kAlphaDepthThreshold) {
        double acc = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            const VoxelSample& s = out.samples[i];
            acc += w[i] * (s.eta * s.t_in + (1.0 - s.eta) * s.t_out);
        }
        out.expected_depth = acc / comp.alpha;
    }
    return out;
}

namespace {

constexpr uint32_t kRenderTilePixels = 256;  // fixed; must not depend on thread count

struct TileScratch {
    std::vector<Ray> rays;
    std::vector<uint32_t> hit_begin;  // per ray, offsets into batch hits
    detail::VoxelBatchT<float> batch;
    std::vector<RayVoxelHit> ray_hits;
    TraversalScratch trav;
};

// Renders pixels [px_begin, px_end) of the frame. Out-of-line and shared by
// the OpenMP and serial drivers so both produce identical bits.
void render_tile(const SvlfModel& model, const Camera& camera, uint32_t px_begin, uint32_t px_end,
                 FrameBuffers& out, RenderStats* stats, const float* background,
                 TileScratch& scratch) {
    const uint32_t count = px_end - px_begin;
    scratch.rays.clear();
    scratch.hit_begin.assign(count + 1, 0);
    scratch.batch.clear();

    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t px = px_begin + i;
        const Ray ray = camera.pixel_ray(px % camera.width, px / camera.width);
        scratch.rays.push_back(ray);
        scratch.ray_hits.clear();
        model.octree.traverse(ray, scratch.ray_hits, scratch.trav);
        for (const RayVoxelHit& hit : scratch.ray_hits) {
            scratch.batch.hits.push_back(hit);
            scratch.batch.hit_ray.push_back(i);
        }
        scratch.hit_begin[i + 1] = scratch.batch.n();
    }

    const BatchMat<float>* rgb_out = nullptr;
    if (scratch.batch.n() > 0) {
        detail::batch_forward(model, scratch.rays, scratch.batch, /*for_backward=*/false);
        rgb_out = &scratch.batch.cache_c.acts.back();
    }
    const float bg[3] = {background ? background[0] : 0.f, background ? background[1] : 0.f,
                         background ? background[2] : 0.f};

    long long tile_hits = 0, tile_fg = 0;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t px = px_begin + i;
        const uint32_t h0 = scratch.hit_begin[i];
        const uint32_t h1 = scratch.hit_begin[i + 1];
        double color[3] = {0, 0, 0};
        double alpha = 0.0;
        double depth_acc = 0.0;
        double transmittance = 1.0;
        for (uint32_t j = h0; j < h1; ++j) {
            const double e = std::exp(-scratch.batch.tau[j]);
            const double w = transmittance * (1.0 - e);
            color[0] += w * static_cast<double>(rgb_out->at(0, j));
            color[1] += w * static_cast<double>(rgb_out->at(1, j));
            color[2] += w * static_cast<double>(rgb_out->at(2, j));
            depth_acc += w * scratch.batch.t_s[j];
            alpha += w;
            transmittance *= e;
        }
        if (h1 > h0) {
            tile_hits += h1 - h0;
            ++tile_fg;
        }
        const size_t o = size_t(px);
        out.rgb[o * 3 + 0] = static_cast<float>(color[0] + (1.0 - alpha) * bg[0]);
        out.rgb[o * 3 + 1] = static_cast<float>(color[1] + (1.0 - alpha) * bg[1]);
        out.rgb[o * 3 + 2] = static_cast<float>(color[2] + (1.0 - alpha) * bg[2]);
        out.alpha[o] = static_cast<float>(alpha);
        out.depth[o] = alpha > kAlphaDepthThreshold ? static_cast<float>(depth_acc / alpha) : 0.f;
    }

    if (stats) {
#pragma omp atomic
        stats->rays += count;
#pragma omp atomic
        stats->rays_with_hits += tile_fg;
#pragma omp atomic
        stats->traversal_hits += tile_hits;
#pragma omp atomic
        stats->thickness_queries += static_cast<long long>(scratch.batch.n());
#pragma omp atomic
        stats->color_queries += static_cast<long long>(scratch.batch.n());
    }
}

void render_frame_impl(const SvlfModel& model, const Camera& camera, FrameBuffers& out,
                       RenderStats* stats, const float* background, bool parallel) {
    if (camera.width == 0 || camera.height == 0) throw std::invalid_argument("zero-size image");
    out.resize(camera.width, camera.height);
    const uint32_t pixels = camera.width * camera.height;
    const uint32_t tiles = (pixels + kRenderTilePixels - 1) / kRenderTilePixels;

    if (parallel) {
#pragma omp parallel num_threads(thread_count())
        {
            TileScratch scratch;
#pragma omp for schedule(dynamic)
            for (int64_t t = 0; t < static_cast<int64_t>(tiles); ++t) {
                const uint32_t begin = static_cast<uint32_t>(t) * kRenderTilePixels;
                const uint32_t end = std::min(begin + kRenderTilePixels, pixels);
                render_tile(model, camera, begin, end, out, stats, background, scratch);
            }
        }
    } else {
        TileScratch scratch;
        for (uint32_t t = 0; t < tiles; ++t) {
            const uint32_t begin = t * kRenderTilePixels;
            const uint32_t end = std::min(begin + kRenderTilePixels, pixels);
            render_tile(model, camera, begin, end, out, stats, background, scratch);
        }
    }
}

}  // namespace

void render_frame(const SvlfModel& model, const Camera& camera, FrameBuffers& out,
                  RenderStats* stats, const float* background) {
    render_frame_impl(model, camera, out, stats, background, true);
}

void render_frame_ref(const SvlfModel& model, const Camera& camera, FrameBuffers& out,
                      RenderStats* stats, const float* background) {
    render_frame_impl(model, camera, out, stats, background, false);
}

template VoxelSample evaluate_voxel<float>(const SvlfModelT<float>&, const RayVoxelHit&, const Ray&,
                                           QueryCounters*);
template VoxelSample evaluate_voxel<double>(const SvlfModelT<double>&, const RayVoxelHit&,
                                            const Ray&, QueryCounters*);
template RenderOutput render_ray<float>(const SvlfModelT<float>&, const Ray&, QueryCounters*);
template RenderOutput render_ray<double>(const SvlfModelT<double>&, const Ray&, QueryCounters*);

}  // namespace svlf
