#include "svlf/geometry.hpp"

namespace svlf {

std::optional<Interval> ray_aabb(const Ray& ray, const Aabb& box) {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int axis = 0; axis < 3; ++axis) {
        const double o = ray.origin[axis];
        const double d = ray.dir[axis];
        const double lo = box.lo[axis];
        const double hi = box.hi[axis];
        if (d == 0.0) {
            if (o < lo || o > hi) return std::nullopt;
            continue;  // parallel and inside the slab
        }
        const double inv = 1.0 / d;
        double ta = (lo - o) * inv;
        double tb = (hi - o) * inv;
        if (ta > tb) std::swap(ta, tb);
        if (ta > t0) t0 = ta;
        if (tb < t1) t1 = tb;
        if (t1 < t0) return std::nullopt;  // also rejects boxes fully behind the origin
    }
    return Interval{t0, t1};
}

}  // namespace svlf
