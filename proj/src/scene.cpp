#include "svlf/scene.hpp"

#include <cmath>

#include "svlf/rng.hpp"

namespace svlf {

namespace {

std::optional<double> sphere_hit_t(const SpherePrim& s, const Ray& ray, double t_min) {
    const Vec3 oc = ray.origin - s.center;
    const double b = dot(oc, ray.dir);
    const double c = dot(oc, oc) - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double sq = std::sqrt(disc);
    const double t0 = -b - sq;
    if (t0 > t_min) return t0;
    const double t1 = -b + sq;
    if (t1 > t_min) return t1;
    return std::nullopt;
}

Vec3 box_normal(const BoxPrim& b, const Vec3& p) {
    // face with the smallest distance to the point
    const double d[6] = {p.x - b.lo.x, b.hi.x - p.x, p.y - b.lo.y,
                         b.hi.y - p.y, p.z - b.lo.z, b.hi.z - p.z};
    int best = 0;
    for (int i = 1; i < 6; ++i)
        if (d[i] < d[best]) best = i;
    switch (best) {
        case 0: return {-1, 0, 0};
        case 1: return {1, 0, 0};
        case 2: return {0, -1, 0};
        case 3: return {0, 1, 0};
        case 4: return {0, 0, -1};
        default: return {0, 0, 1};
    }
}

constexpr double kRayEps = 1e-9;

bool point_inside_inflated(const AnalyticScene& scene, const Vec3& p, double inflate) {
    for (const SpherePrim& s : scene.spheres)
        if (norm(p - s.center) < s.radius + inflate) return true;
    for (const BoxPrim& b : scene.boxes)
        if (p.x > b.lo.x - inflate && p.x < b.hi.x + inflate && p.y > b.lo.y - inflate &&
            p.y < b.hi.y + inflate && p.z > b.lo.z - inflate && p.z < b.hi.z + inflate)
            return true;
    return false;
}

}  // namespace

std::optional<SurfaceHit> raycast(const AnalyticScene& scene, const Ray& ray) {
    std::optional<SurfaceHit> best;
    for (const SpherePrim& s : scene.spheres) {
        const auto t = sphere_hit_t(s, ray, kRayEps);
        if (t && (!best || *t < best->t)) {
            const Vec3 p = ray.at(*t);
            best = SurfaceHit{*t, p, normalized(p - s.center), s.albedo};
        }
    }
    for (const BoxPrim& b : scene.boxes) {
        const auto span = ray_aabb(ray, Aabb{b.lo, b.hi});
        if (!span) continue;
        const double t = span->t0 > kRayEps ? span->t0 : (span->t1 > kRayEps ? span->t1 : -1);
        if (t > 0 && (!best || t < best->t)) {
            const Vec3 p = ray.at(t);
            best = SurfaceHit{t, p, box_normal(b, p), b.albedo};
        }
    }
    return best;
}

Vec3 shade(const AnalyticScene& scene, const SurfaceHit& hit) {
    double direct = std::max(0.0, dot(hit.normal, -scene.light_dir));
    if (direct > 0) {
        const Ray shadow{hit.point + hit.normal * 1e-6, -scene.light_dir};
        if (raycast(scene, shadow)) direct = 0;  // hard shadow
    }
    Vec3 c{hit.albedo.x * (scene.ambient.x + scene.light_rgb.x * direct),
           hit.albedo.y * (scene.ambient.y + scene.light_rgb.y * direct),
           hit.albedo.z * (scene.ambient.z + scene.light_rgb.z * direct)};
    c.x = std::clamp(c.x, 0.0, 1.0);
    c.y = std::clamp(c.y, 0.0, 1.0);
    c.z = std::clamp(c.z, 0.0, 1.0);
    return c;
}

AnalyticScene make_random_scene(uint64_t seed, int n_primitives) {
    Rng rng = Rng(seed).sub(kStreamScene);
    AnalyticScene scene;
    for (int i = 0; i < n_primitives; ++i) {
        const Vec3 albedo{rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0), rng.uniform(0.2, 1.0)};
        if (rng.uniform() < 0.5) {
            SpherePrim s;
            s.radius = rng.uniform(0.08, 0.16);
            s.center = {rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)};
            s.albedo = albedo;
            scene.spheres.push_back(s);
        } else {
            BoxPrim b;
            const Vec3 half{rng.uniform(0.05, 0.12), rng.uniform(0.05, 0.12),
                            rng.uniform(0.05, 0.12)};
            const Vec3 center{rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75),
                              rng.uniform(0.25, 0.75)};
            b.lo = center - half;
            b.hi = center + half;
            b.albedo = albedo;
            scene.boxes.push_back(b);
        }
    }
    // light from the upper hemisphere, pointing down into the scene
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double el = rng.uniform(0.35, 1.2);
    scene.light_dir = -normalized(Vec3{std::cos(az) * std::cos(el), std::sin(az) * std::cos(el),
                                       std::sin(el)});
    scene.light_rgb = {0.7, 0.7, 0.7};
    scene.ambient = {0.25, 0.25, 0.25};
    scene.background = {0, 0, 0};
    return scene;
}

std::vector<Camera> sample_hemisphere_cameras(int n, double radius, uint64_t seed, uint32_t width,
                                              uint32_t height, double focal_px) {
    Rng rng = Rng(seed).sub(kStreamCameras);
    const Vec3 center{0.5, 0.5, 0.5};
    std::vector<Camera> cams;
    cams.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double z = rng.uniform();  // uniform area on the upper hemisphere
        const double az = rng.uniform(0.0, 2.0 * M_PI);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const Vec3 dir{r * std::cos(az), r * std::sin(az), z};
        cams.push_back(make_lookat_camera(center + dir * radius, center, width, height, focal_px));
    }
    return cams;
}

std::vector<Camera> sample_free_cameras(const AnalyticScene& scene, int n, uint64_t seed,
                                        uint32_t width, uint32_t height, double focal_px) {
    Rng rng = Rng(seed).sub(kStreamCameras);
    std::vector<Vec3> targets;
    for (const SpherePrim& s : scene.spheres) targets.push_back(s.center);
    for (const BoxPrim& b : scene.boxes) targets.push_back((b.lo + b.hi) * 0.5);
    if (targets.empty()) targets.push_back({0.5, 0.5, 0.5});

    std::vector<Camera> cams;
    cams.reserve(n);
    while (static_cast<int>(cams.size()) < n) {
        const Vec3 pos{rng.uniform(), rng.uniform(), rng.uniform()};
        if (point_inside_inflated(scene, pos, 0.05)) continue;
        const Vec3 target = targets[rng.below(targets.size())];
        if (norm(target - pos) < 1e-6) continue;
        cams.push_back(make_lookat_camera(pos, target, width, height, focal_px));
    }
    return cams;
}

}  // namespace svlf
