#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svlf/camera.hpp"
#include "svlf/geometry.hpp"

namespace svlf {

struct SpherePrim {
    Vec3 center;
    double radius = 0;
    Vec3 albedo;
};

struct BoxPrim {
    Vec3 lo, hi;
    Vec3 albedo;
};

// Procedural Lambertian scene inside the unit cube: directional light with
// hard shadows plus an ambient term, constant background.
struct AnalyticScene {
    std::vector<SpherePrim> spheres;
    std::vector<BoxPrim> boxes;
    Vec3 light_dir{0, 0, -1};  // propagation direction, unit
    Vec3 light_rgb{0.7, 0.7, 0.7};
    Vec3 ambient{0.3, 0.3, 0.3};
    Vec3 background{0, 0, 0};

    size_t primitive_count() const { return spheres.size() + boxes.size(); }
};

struct SurfaceHit {
    double t = 0;
    Vec3 point;
    Vec3 normal;  // outward unit
    Vec3 albedo;
};

// Nearest positive-t primitive hit (closed-form sphere quadratic, slab boxes).
std::optional<SurfaceHit> raycast(const AnalyticScene& scene, const Ray& ray);

// albedo * (ambient + light * max(0, n . -light_dir)), direct term dropped
// when the shadow ray toward the light is blocked. Clamped to [0,1].
Vec3 shade(const AnalyticScene& scene, const SurfaceHit& hit);

// Seeded scene family: n primitives (spheres and boxes mixed), all inside the
// unit cube, light from the upper hemisphere.
AnalyticScene make_random_scene(uint64_t seed, int n_primitives);

// Cameras look at the scene center from uniformly sampled upper-hemisphere
// directions at fixed radius.
std::vector<Camera> sample_hemisphere_cameras(int n, double radius, uint64_t seed, uint32_t width,
                                              uint32_t height, double focal_px);

// Positions uniform in the unit cube, rejected when inside any primitive
// inflated by 0.05; each camera looks at a random primitive center.
std::vector<Camera> sample_free_cameras(const AnalyticScene& scene, int n, uint64_t seed,
                                        uint32_t width, uint32_t height, double focal_px);

}  // namespace svlf
