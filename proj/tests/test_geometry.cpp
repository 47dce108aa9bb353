#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "svlf/geometry.hpp"
#include "svlf/rng.hpp"

using namespace svlf;

TEST_CASE("ray_aabb axis-aligned hit") {
    const Ray ray{{-2, 0.5, 0.5}, {1, 0, 0}};
    const auto hit = ray_aabb(ray, Aabb{{0, 0, 0}, {1, 1, 1}});
    REQUIRE(hit.has_value());
    CHECK(hit->t0 == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(hit->t1 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("ray_aabb origin inside clips to zero") {
    const Ray ray{{0.5, 0.5, 0.5}, {0, 0, 1}};
    const auto hit = ray_aabb(ray, Aabb{{0, 0, 0}, {1, 1, 1}});
    REQUIRE(hit.has_value());
    CHECK(hit->t0 == 0.0);
    CHECK(hit->t1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ray_aabb miss with zero direction component") {
    const Ray ray{{-1, 2, 0.5}, {1, 0, 0}};
    CHECK_FALSE(ray_aabb(ray, Aabb{{0, 0, 0}, {1, 1, 1}}).has_value());
}

TEST_CASE("ray_aabb box behind origin") {
    const Ray ray{{5, 0.5, 0.5}, {1, 0, 0}};
    CHECK_FALSE(ray_aabb(ray, Aabb{{0, 0, 0}, {1, 1, 1}}).has_value());
}

TEST_CASE("ray_aabb interval endpoints lie on the box") {
    Rng rng(99);
    const Aabb box{{0.2, 0.3, 0.1}, {0.8, 0.9, 0.7}};
    int hits = 0;
    for (int i = 0; i < 2000; ++i) {
        const Vec3 origin{rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(-1, 2)};
        const Vec3 target{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
        if (norm(target - origin) < 1e-6) continue;
        const Ray ray{origin, normalized(target - origin)};
        const auto hit = ray_aabb(ray, box);
        if (!hit) continue;
        ++hits;
        CHECK(hit->t0 <= hit->t1);
        CHECK(hit->t0 >= 0.0);
        // both endpoints within the (slightly inflated) box
        CHECK(box.contains(ray.at(hit->t0), 1e-9));
        CHECK(box.contains(ray.at(hit->t1), 1e-9));
    }
    CHECK(hits > 200);
}
