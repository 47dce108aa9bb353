#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "svlf/geometry.hpp"

namespace svlf {

struct GridConfig {
    uint32_t resolution = 128;               // voxels per axis, power of two
    Aabb scene_aabb{{0, 0, 0}, {1, 1, 1}};   // must be a cube
    uint32_t dilation = 1;                   // Chebyshev radius for occupancy dilation

    void validate() const;  // throws std::invalid_argument on violation
};

// One ray-voxel intersection. t values are parametric distances in scene
// units (unit direction), already clipped to t >= 0.
struct RayVoxelHit {
    uint64_t voxel_id = 0;  // leaf Morton code
    double t_in = 0.0;
    double t_out = 0.0;
    Vec3 x1;  // origin + t_in * dir
    Vec3 x2;  // origin + t_out * dir
};

struct TraversalScratch {
    std::vector<std::pair<int, uint64_t>> stack;  // (level, code)
};

// Multi-level occupancy over a cubic grid. Level 0 is the root (one cell),
// level log2(resolution) holds the leaves. Each level keeps its occupied
// cells as sorted Morton codes; leaf corners are indexed by dense vertex ids
// shared between adjacent voxels. Immutable after build.
class SparseOctree {
  public:
    SparseOctree() = default;  // empty; populate via build() or from_leaves()

    // Occupancy = quantized cells of `points`, dilated by config.dilation in
    // the Chebyshev metric and clipped to the grid. Points outside the scene
    // box are dropped and counted. Throws "empty occupancy" when no point
    // lands inside the box.
    static SparseOctree build(std::span<const Vec3> points, const GridConfig& config);

    const GridConfig& config() const { return config_; }
    int leaf_level() const { return leaf_level_; }
    const std::vector<uint64_t>& level_codes(int level) const { return levels_[level]; }
    const std::vector<uint64_t>& leaf_codes() const { return levels_[leaf_level_]; }
    size_t leaf_count() const { return levels_[leaf_level_].size(); }
    uint32_t vertex_count() const { return vertex_count_; }
    size_t dropped_points() const { return dropped_points_; }

    double cell_size() const { return cell_size_; }
    Aabb voxel_aabb(uint64_t voxel_id) const;
    Vec3 voxel_center(uint64_t voxel_id) const;

    // Index of a leaf in leaf_codes(), if occupied.
    std::optional<uint32_t> leaf_index(uint64_t voxel_id) const;

    // Corner vertex ids ordered by corner code b = (bz<<2)|(by<<1)|bx.
    // Throws std::out_of_range for an unknown voxel id.
    std::array<uint32_t, 8> corner_vertices(uint64_t voxel_id) const;

    // Occupied leaf whose half-open cell [c, c+h) contains the point; points
    // on the scene box max face map to the last cell.
    std::optional<uint64_t> locate(const Vec3& point) const;

    // Occupied leaves crossed by the ray, sorted ascending by (t_in, code).
    // A hit is kept only if t_out - t_in > 1e-12. Children are only tested
    // when the parent cell is hit.
    std::vector<RayVoxelHit> traverse(const Ray& ray) const;

    // Allocation-free variant for hot loops; appends to `out`.
    void traverse(const Ray& ray, std::vector<RayVoxelHit>& out, TraversalScratch& scratch) const;

    // Rebuild from an explicit leaf set (checkpoint load). Codes must be the
    // output of a previous build.
    static SparseOctree from_leaves(std::vector<uint64_t> leaf_codes, const GridConfig& config);

  private:
    void finalize_from_leaves();

    GridConfig config_;
    int leaf_level_ = 0;
    double cell_size_ = 0.0;
    std::vector<std::vector<uint64_t>> levels_;   // [0..leaf_level]
    std::vector<uint32_t> leaf_corner_ids_;       // 8 ids per leaf, leaf-code order
    uint32_t vertex_count_ = 0;
    size_t dropped_points_ = 0;
};

// Convenience named like the operation it performs.
inline SparseOctree build_octree(std::span<const Vec3> points, const GridConfig& config) {
    return SparseOctree::build(points, config);
}

}  // namespace svlf
