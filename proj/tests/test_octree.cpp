#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "svlf/morton.hpp"
#include "svlf/octree.hpp"
#include "svlf/rng.hpp"

using namespace svlf;

namespace {

GridConfig grid(uint32_t res, uint32_t dilation = 0) {
    GridConfig g;
    g.resolution = res;
    g.dilation = dilation;
    return g;
}

// Brute force: test every occupied leaf with ray_aabb, apply the same keep
// rule, sort by (t_in, code).
std::vector<RayVoxelHit> traverse_oracle(const SparseOctree& tree, const Ray& ray) {
    std::vector<RayVoxelHit> hits;
    for (uint64_t code : tree.leaf_codes()) {
        const auto span = ray_aabb(ray, tree.voxel_aabb(code));
        if (!span || span->t1 - span->t0 <= 1e-12) continue;
        hits.push_back({code, span->t0, span->t1, ray.at(span->t0), ray.at(span->t1)});
    }
    std::sort(hits.begin(), hits.end(), [](const RayVoxelHit& a, const RayVoxelHit& b) {
        if (a.t_in != b.t_in) return a.t_in < b.t_in;
        return a.voxel_id < b.voxel_id;
    });
    return hits;
}

SparseOctree random_occupancy(uint32_t res, double density, uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec3> points;
    const double h = 1.0 / res;
    for (uint32_t z = 0; z < res; ++z)
        for (uint32_t y = 0; y < res; ++y)
            for (uint32_t x = 0; x < res; ++x)
                if (rng.uniform() < density)
                    points.push_back({(x + 0.5) * h, (y + 0.5) * h, (z + 0.5) * h});
    return SparseOctree::build(points, grid(res));
}

Ray random_ray(Rng& rng) {
    // half from outside looking at the cube, half crossing from inside
    Vec3 origin, target;
    if (rng.uniform() < 0.5) {
        const double az = rng.uniform(0, 2 * M_PI);
        const double el = rng.uniform(-M_PI / 2, M_PI / 2);
        origin = Vec3{0.5, 0.5, 0.5} +
                 Vec3{std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el)} * 2.0;
    } else {
        origin = {rng.uniform(), rng.uniform(), rng.uniform()};
    }
    target = {rng.uniform(), rng.uniform(), rng.uniform()};
    if (norm(target - origin) < 1e-9) target.x += 0.1;
    return {origin, normalized(target - origin)};
}

}  // namespace

TEST_CASE("single point occupancy, resolution 2, no dilation") {
    const std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
    const auto tree = SparseOctree::build(pts, grid(2));
    REQUIRE(tree.leaf_count() == 1);
    CHECK(tree.leaf_codes()[0] == morton_encode(1, 1, 1));
    CHECK(tree.vertex_count() == 8);
}

TEST_CASE("dilation by one produces the 3x3x3 block") {
    const std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
    const auto tree = SparseOctree::build(pts, grid(4, 1));
    // enumerate the expected dilated block by brute force
    std::set<uint64_t> expect;
    std::set<uint64_t> corner_lattice;
    for (int z = 1; z <= 3; ++z)
        for (int y = 1; y <= 3; ++y)
            for (int x = 1; x <= 3; ++x) {
                expect.insert(morton_encode(x, y, z));
                for (int b = 0; b < 8; ++b)
                    corner_lattice.insert(((uint64_t(z + ((b >> 2) & 1)) * 5 + y + ((b >> 1) & 1)) * 5) +
                                          x + (b & 1));
            }
    REQUIRE(tree.leaf_count() == 27);
    CHECK(tree.leaf_count() == expect.size());
    for (uint64_t code : tree.leaf_codes()) CHECK(expect.count(code) == 1);
    CHECK(tree.vertex_count() == 64);
    CHECK(corner_lattice.size() == 64);
}

TEST_CASE("occupancy is idempotent") {
    const std::vector<Vec3> one{{0.31, 0.44, 0.62}};
    const std::vector<Vec3> two{{0.31, 0.44, 0.62}, {0.312, 0.441, 0.621}};
    const auto a = SparseOctree::build(one, grid(8));
    const auto b = SparseOctree::build(two, grid(8));
    CHECK(a.leaf_codes() == b.leaf_codes());
    CHECK(a.vertex_count() == b.vertex_count());
}

TEST_CASE("empty occupancy is an error") {
    const std::vector<Vec3> none;
    CHECK_THROWS_WITH(SparseOctree::build(none, grid(4)), "empty occupancy");
    const std::vector<Vec3> outside{{2, 2, 2}};
    CHECK_THROWS_WITH(SparseOctree::build(outside, grid(4)), "empty occupancy");
}

TEST_CASE("points outside the box are dropped and counted") {
    const std::vector<Vec3> pts{{0.5, 0.5, 0.5}, {1.5, 0, 0}, {-0.1, 0.2, 0.2}};
    const auto tree = SparseOctree::build(pts, grid(4));
    CHECK(tree.dropped_points() == 2);
    CHECK(tree.leaf_count() == 1);
}

TEST_CASE("parent closure holds on every level") {
    const auto tree = random_occupancy(16, 0.05, 3);
    for (int level = tree.leaf_level(); level > 0; --level) {
        const auto& parents = tree.level_codes(level - 1);
        for (uint64_t code : tree.level_codes(level)) {
            CHECK(std::binary_search(parents.begin(), parents.end(), code >> 3));
        }
    }
}

TEST_CASE("single-leaf traversal crosses opposite faces") {
    const std::vector<Vec3> pts{{0.5, 0.5, 0.5}};
    const auto tree = SparseOctree::build(pts, grid(2));
    const Ray ray{{-1, 0.75, 0.75}, {1, 0, 0}};
    const auto hits = tree.traverse(ray);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].x1.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hits[0].x2.x == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("traversal equals the brute-force per-leaf oracle") {
    const auto tree = random_occupancy(16, 0.1, 7);
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Ray ray = random_ray(rng);
        const auto got = tree.traverse(ray);
        const auto want = traverse_oracle(tree, ray);
        REQUIRE(got.size() == want.size());
        for (size_t j = 0; j < got.size(); ++j) {
            CHECK(got[j].voxel_id == want[j].voxel_id);
            CHECK(std::abs(got[j].t_in - want[j].t_in) <= 1e-9);
            CHECK(std::abs(got[j].t_out - want[j].t_out) <= 1e-9);
        }
    }
}

TEST_CASE("face-grazing ray is deterministic under the tie rule") {
    // two leaves sharing the x = 0.5 face; ray runs exactly in that plane
    const std::vector<Vec3> pts{{0.25, 0.25, 0.25}, {0.75, 0.25, 0.25}};
    const auto tree = SparseOctree::build(pts, grid(2));
    REQUIRE(tree.leaf_count() == 2);
    const Ray ray{{0.5, -1.0, 0.25}, {0, 1, 0}};
    const auto a = tree.traverse(ray);
    const auto b = tree.traverse(ray);
    REQUIRE(a.size() == b.size());
    // both leaves are crossed with identical spans; order is by Morton code
    REQUIRE(a.size() == 2);
    CHECK(a[0].voxel_id < a[1].voxel_id);
    CHECK(a[0].t_in == a[1].t_in);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].voxel_id == b[i].voxel_id);
        CHECK(a[i].t_in == b[i].t_in);
    }
}

TEST_CASE("segment consistency across face-adjacent hits") {
    const auto tree = random_occupancy(16, 0.3, 5);
    Rng rng(13);
    for (int i = 0; i < 200; ++i) {
        const auto hits = tree.traverse(random_ray(rng));
        for (size_t j = 0; j + 1 < hits.size(); ++j) {
            uint32_t ax, ay, az, bx, by, bz;
            morton_decode(hits[j].voxel_id, ax, ay, az);
            morton_decode(hits[j + 1].voxel_id, bx, by, bz);
            const int manhattan = std::abs(int(ax) - int(bx)) + std::abs(int(ay) - int(by)) +
                                  std::abs(int(az) - int(bz));
            if (manhattan == 1) CHECK(std::abs(hits[j].t_out - hits[j + 1].t_in) <= 1e-9);
        }
    }
}

TEST_CASE("corner vertices: single leaf and shared faces") {
    const std::vector<Vec3> one{{0.5, 0.5, 0.5}};
    const auto single = SparseOctree::build(one, grid(2));
    const auto ids = single.corner_vertices(single.leaf_codes()[0]);
    std::set<uint32_t> distinct(ids.begin(), ids.end());
    CHECK(distinct.size() == 8);
    for (uint32_t id : ids) CHECK(id < 8);

    // two leaves sharing a face: 12 vertices, 4 shared
    const std::vector<Vec3> pair{{0.25, 0.25, 0.25}, {0.75, 0.25, 0.25}};
    const auto two = SparseOctree::build(pair, grid(2));
    CHECK(two.vertex_count() == 12);
    const auto a = two.corner_vertices(morton_encode(0, 0, 0));
    const auto b = two.corner_vertices(morton_encode(1, 0, 0));
    // a's +x corners coincide with b's -x corners (same lattice points)
    CHECK(a[1] == b[0]);
    CHECK(a[3] == b[2]);
    CHECK(a[5] == b[4]);
    CHECK(a[7] == b[6]);

    CHECK_THROWS_AS(two.corner_vertices(morton_encode(1, 1, 1)), std::out_of_range);
}

TEST_CASE("2x2x2 block has 27 vertices") {
    std::vector<Vec3> pts;
    for (int z = 0; z < 2; ++z)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) pts.push_back({0.25 + 0.5 * x, 0.25 + 0.5 * y, 0.25 + 0.5 * z});
    const auto tree = SparseOctree::build(pts, grid(2));
    REQUIRE(tree.leaf_count() == 8);
    // brute-force lattice enumeration
    std::set<uint64_t> lattice;
    for (uint64_t code : tree.leaf_codes()) {
        uint32_t x, y, z;
        morton_decode(code, x, y, z);
        for (int b = 0; b < 8; ++b)
            lattice.insert((uint64_t(z + ((b >> 2) & 1)) * 3 + y + ((b >> 1) & 1)) * 3 + x + (b & 1));
    }
    CHECK(lattice.size() == 27);
    CHECK(tree.vertex_count() == 27);
}

TEST_CASE("locate follows the half-open convention") {
    const std::vector<Vec3> pts{{0.25, 0.25, 0.25}, {0.75, 0.25, 0.25}};
    const auto tree = SparseOctree::build(pts, grid(2));

    CHECK(tree.locate({0.25, 0.25, 0.25}) == morton_encode(0, 0, 0));
    CHECK_FALSE(tree.locate({0.25, 0.75, 0.75}).has_value());  // unoccupied cell
    CHECK_FALSE(tree.locate({2.0, 0.0, 0.0}).has_value());     // outside the box
    // shared face maps to the max side
    CHECK(tree.locate({0.5, 0.25, 0.25}) == morton_encode(1, 0, 0));
    // scene max face maps into the last cell
    CHECK(tree.locate({1.0, 0.25, 0.25}) == morton_encode(1, 0, 0));
}

TEST_CASE("traversal output is identical across repeated runs") {
    const auto tree = random_occupancy(16, 0.08, 21);
    Rng rng(17);
    for (int i = 0; i < 50; ++i) {
        const Ray ray = random_ray(rng);
        const auto a = tree.traverse(ray);
        const auto b = tree.traverse(ray);
        REQUIRE(a.size() == b.size());
        for (size_t j = 0; j < a.size(); ++j) {
            CHECK(a[j].voxel_id == b[j].voxel_id);
            CHECK(a[j].t_in == b[j].t_in);
            CHECK(a[j].t_out == b[j].t_out);
        }
    }
}

TEST_CASE("grid config validation") {
    GridConfig g;
    g.resolution = 3;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.resolution = 4;
    g.scene_aabb = {{0, 0, 0}, {1, 1, 2}};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g.scene_aabb = {{0, 0, 0}, {0, 1, 1}};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}
