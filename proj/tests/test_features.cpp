#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "svlf/features.hpp"
#include "svlf/rng.hpp"

using namespace svlf;

namespace {

SparseOctree two_leaf_tree() {
    const std::vector<Vec3> pts{{0.25, 0.25, 0.25}, {0.75, 0.25, 0.25}};
    GridConfig g;
    g.resolution = 2;
    g.dilation = 0;
    return SparseOctree::build(pts, g);
}

template <typename T>
FeatureVolumeT<T> random_volume(uint32_t rows, uint32_t dim, uint64_t seed) {
    FeatureVolumeT<T> v;
    v.dim = dim;
    v.data.resize(size_t(rows) * dim);
    v.grad.assign(v.data.size(), T(0));
    Rng rng(seed);
    for (auto& x : v.data) x = static_cast<T>(rng.uniform(-1, 1));
    return v;
}

}  // namespace

TEST_CASE("init_features bound and determinism") {
    const auto a = init_features(8, 4, 1);
    REQUIRE(a.data.size() == 32);
    for (float v : a.data) CHECK(std::abs(v) <= 0.5f);

    const auto b = init_features(8, 4, 1);
    CHECK(a.data == b.data);
    for (float g : a.grad) CHECK(g == 0.0f);

    CHECK_THROWS_AS(init_features(0, 4, 1), std::invalid_argument);
}

TEST_CASE("init_features sample mean is unbiased") {
    const auto v = init_features(1000, 64, 3);
    double mean = 0;
    for (float x : v.data) mean += x;
    mean /= v.data.size();
    // var of U(-b, b) with b = 1/8 is b^2/3
    const double b = 1.0 / 8.0;
    const double sigma_mean = std::sqrt(b * b / 3.0 / v.data.size());
    CHECK(std::abs(mean) < 3.0 * sigma_mean);
}

TEST_CASE("interpolate at corners and center") {
    const auto tree = two_leaf_tree();
    const uint64_t vid = tree.leaf_codes()[0];
    const auto volume = random_volume<float>(tree.vertex_count(), 4, 5);
    const auto corners = tree.corner_vertices(vid);
    const Aabb box = tree.voxel_aabb(vid);

    // corner b recovers exactly that corner's row
    for (int b = 0; b < 8; ++b) {
        const Vec3 p{b & 1 ? box.hi.x : box.lo.x, (b >> 1) & 1 ? box.hi.y : box.lo.y,
                     (b >> 2) & 1 ? box.hi.z : box.lo.z};
        float out[4];
        interpolate(volume, tree, vid, p, out);
        for (uint32_t d = 0; d < 4; ++d) CHECK(out[d] == volume.row(corners[b])[d]);
    }

    float out[4];
    interpolate(volume, tree, vid, box.center(), out);
    for (uint32_t d = 0; d < 4; ++d) {
        float mean = 0;
        for (int b = 0; b < 8; ++b) mean += volume.row(corners[b])[d];
        mean /= 8;
        CHECK(out[d] == doctest::Approx(mean).epsilon(1e-6));
    }
}

TEST_CASE("interpolate matches a direct weight expansion") {
    const auto tree = two_leaf_tree();
    const uint64_t vid = tree.leaf_codes()[1];
    const auto volume = random_volume<float>(tree.vertex_count(), 3, 9);
    const Aabb box = tree.voxel_aabb(vid);
    Rng rng(4);
    for (int i = 0; i < 50; ++i) {
        const Vec3 u{rng.uniform(), rng.uniform(), rng.uniform()};
        const Vec3 p{box.lo.x + u.x * 0.5, box.lo.y + u.y * 0.5, box.lo.z + u.z * 0.5};
        float out[3];
        interpolate(volume, tree, vid, p, out);

        // independent expansion: product weights times corner rows
        const auto corners = tree.corner_vertices(vid);
        for (uint32_t d = 0; d < 3; ++d) {
            double want = 0;
            for (int b = 0; b < 8; ++b) {
                const double wx = (b & 1) ? u.x : 1 - u.x;
                const double wy = ((b >> 1) & 1) ? u.y : 1 - u.y;
                const double wz = ((b >> 2) & 1) ? u.z : 1 - u.z;
                want += wx * wy * wz * volume.row(corners[b])[d];
            }
            CHECK(out[d] == doctest::Approx(want).epsilon(2e-6));
        }
    }
}

TEST_CASE("interpolate rejects points outside the voxel") {
    const auto tree = two_leaf_tree();
    const auto volume = random_volume<float>(tree.vertex_count(), 2, 1);
    float out[2];
    CHECK_THROWS_WITH(interpolate(volume, tree, tree.leaf_codes()[0], Vec3{0.9, 0.1, 0.1}, out),
                      "point not in voxel");
}

TEST_CASE("partition of unity") {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const Vec3 u{rng.uniform(), rng.uniform(), rng.uniform()};
        const auto w = trilinear_weights(u);
        double sum = 0;
        for (double x : w) sum += x;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("continuity across a shared face") {
    const auto tree = two_leaf_tree();
    const auto volume = random_volume<float>(tree.vertex_count(), 6, 12);
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        const Vec3 p{0.5, rng.uniform(0, 0.5), rng.uniform(0, 0.5)};
        float a[6], b[6];
        interpolate(volume, tree, tree.leaf_codes()[0], p, a);
        interpolate(volume, tree, tree.leaf_codes()[1], p, b);
        for (int d = 0; d < 6; ++d) CHECK(std::abs(a[d] - b[d]) <= 1e-6f);
    }
}

TEST_CASE("backward scatters weighted upstream into corner rows") {
    const auto tree = two_leaf_tree();
    const uint64_t vid = tree.leaf_codes()[0];
    auto volume = random_volume<float>(tree.vertex_count(), 3, 7);
    const auto corners = tree.corner_vertices(vid);
    const Aabb box = tree.voxel_aabb(vid);
    const float up[3] = {1.f, -2.f, 0.5f};

    // at corner 3 only that row accumulates
    std::vector<float> grad(volume.data.size(), 0.f);
    const Vec3 p3{box.hi.x, box.hi.y, box.lo.z};
    interpolate_backward(volume, tree, vid, p3, up, grad.data());
    for (uint32_t r = 0; r < tree.vertex_count(); ++r)
        for (uint32_t d = 0; d < 3; ++d)
            CHECK(grad[r * 3 + d] == (r == corners[3] ? up[d] : 0.f));

    // at the center every corner accumulates up/8
    std::fill(grad.begin(), grad.end(), 0.f);
    interpolate_backward(volume, tree, vid, box.center(), up, grad.data());
    for (int b = 0; b < 8; ++b)
        for (uint32_t d = 0; d < 3; ++d)
            CHECK(grad[corners[b] * 3 + d] == doctest::Approx(up[d] / 8.f).epsilon(1e-6));
}

TEST_CASE("positional jacobian matches finite differences (64-bit shadow)") {
    const auto tree = two_leaf_tree();
    const uint64_t vid = tree.leaf_codes()[0];
    const auto volume = random_volume<double>(tree.vertex_count(), 5, 21);
    Rng rng(6);
    const double eps = 1e-4;
    for (int i = 0; i < 100; ++i) {
        const Vec3 p{rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4), rng.uniform(0.1, 0.4)};
        std::vector<double> grad(volume.data.size(), 0.0);
        std::vector<double> jac(5 * 3);
        const double up[5] = {1, 1, 1, 1, 1};
        interpolate_backward(volume, tree, vid, p, up, grad.data(), jac.data());

        for (int axis = 0; axis < 3; ++axis) {
            Vec3 lo = p, hi = p;
            (axis == 0 ? hi.x : axis == 1 ? hi.y : hi.z) += eps;
            (axis == 0 ? lo.x : axis == 1 ? lo.y : lo.z) -= eps;
            double zp[5], zm[5];
            interpolate(volume, tree, vid, hi, zp);
            interpolate(volume, tree, vid, lo, zm);
            for (int d = 0; d < 5; ++d) {
                const double fd = (zp[d] - zm[d]) / (2 * eps);
                const double an = jac[d * 3 + axis];
                CHECK(std::abs(fd - an) <= 1e-5 * std::max({std::abs(fd), std::abs(an), 1.0}));
            }
        }
    }
}

TEST_CASE("gradients match finite differences in 32-bit") {
    const auto tree = two_leaf_tree();
    const uint64_t vid = tree.leaf_codes()[0];
    auto volume = random_volume<float>(tree.vertex_count(), 4, 31);
    const auto corners = tree.corner_vertices(vid);
    Rng rng(8);
    int checked = 0;
    for (int i = 0; i < 100; ++i) {
        const Vec3 p{rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45), rng.uniform(0.05, 0.45)};
        std::vector<float> grad(volume.data.size(), 0.f);
        std::vector<double> jac(4 * 3);
        float up[4];
        for (auto& u : up) u = static_cast<float>(rng.uniform(-1, 1));
        interpolate_backward(volume, tree, vid, p, up, grad.data(), jac.data());

        // corner-feature gradient: exact linear dependence, large step is fine
        const int b = static_cast<int>(rng.below(8));
        const int d = static_cast<int>(rng.below(4));
        const size_t idx = size_t(corners[b]) * 4 + d;
        const float keep = volume.data[idx];
        const float h = 0.25f;
        float fp[4], fm[4];
        volume.data[idx] = keep + h;
        interpolate(volume, tree, vid, p, fp);
        volume.data[idx] = keep - h;
        interpolate(volume, tree, vid, p, fm);
        volume.data[idx] = keep;
        double fd = 0;
        for (int k = 0; k < 4; ++k) fd += double(up[k]) * (fp[k] - fm[k]) / (2 * h);
        CHECK(std::abs(fd - grad[idx]) <= 1e-4 * std::max({std::abs(fd), std::abs(double(grad[idx])), 1.0}));

        // positional jacobian against axis-aligned differences (linear per axis)
        const double eps = 0.02;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 hi = p, lo = p;
            (axis == 0 ? hi.x : axis == 1 ? hi.y : hi.z) += eps;
            (axis == 0 ? lo.x : axis == 1 ? lo.y : lo.z) -= eps;
            float zp[4], zm[4];
            interpolate(volume, tree, vid, hi, zp);
            interpolate(volume, tree, vid, lo, zm);
            for (int k = 0; k < 4; ++k) {
                const double fdj = (double(zp[k]) - double(zm[k])) / (2 * eps);
                CHECK(std::abs(fdj - jac[k * 3 + axis]) <=
                      1e-4 * std::max({std::abs(fdj), std::abs(jac[k * 3 + axis]), 1.0}));
            }
        }
        ++checked;
    }
    CHECK(checked == 100);
}
