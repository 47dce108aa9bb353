#include "svlf/octree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "svlf/morton.hpp"

namespace svlf {

namespace {

constexpr double kMinHitSpan = 1e-12;  // tie rule: keep a hit only if t_out - t_in exceeds this

bool is_pow2(uint32_t v) { return v >= 2 && (v & (v - 1)) == 0; }

}  // namespace

void GridConfig::validate() const {
    if (!is_pow2(resolution)) throw std::invalid_argument("resolution must be a power of two >= 2");
    const Vec3 ext = scene_aabb.extent();
    if (ext.x <= 0 || ext.y <= 0 || ext.z <= 0)
        throw std::invalid_argument("scene_aabb must have positive extent");
    const double tol = 1e-12 * std::max({ext.x, ext.y, ext.z});
    if (std::abs(ext.x - ext.y) > tol || std::abs(ext.x - ext.z) > tol)
        throw std::invalid_argument("scene_aabb must be a cube");
}

SparseOctree SparseOctree::build(std::span<const Vec3> points, const GridConfig& config) {
    config.validate();
    const uint32_t res = config.resolution;
    const Vec3 lo = config.scene_aabb.lo;
    const double extent = config.scene_aabb.extent().x;
    const double h = extent / res;

    size_t dropped = 0;
    std::vector<uint64_t> cells;
    cells.reserve(points.size());
    for (const Vec3& p : points) {
        if (!config.scene_aabb.contains(p)) {
            ++dropped;
            continue;
        }
        // Half-open cells; the max face maps to the last cell.
        uint32_t ix = std::min(static_cast<uint32_t>((p.x - lo.x) / h), res - 1);
        uint32_t iy = std::min(static_cast<uint32_t>((p.y - lo.y) / h), res - 1);
        uint32_t iz = std::min(static_cast<uint32_t>((p.z - lo.z) / h), res - 1);
        cells.push_back(morton_encode(ix, iy, iz));
    }
    if (cells.empty()) throw std::runtime_error("empty occupancy");

    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

    if (config.dilation > 0) {
        const int r = static_cast<int>(config.dilation);
        std::vector<uint64_t> dilated;
        dilated.reserve(cells.size() * (2 * r + 1) * (2 * r + 1) * (2 * r + 1));
        for (uint64_t code : cells) {
            uint32_t x, y, z;
            morton_decode(code, x, y, z);
            for (int dz = -r; dz <= r; ++dz)
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        const int nx = static_cast<int>(x) + dx;
                        const int ny = static_cast<int>(y) + dy;
                        const int nz = static_cast<int>(z) + dz;
                        if (nx < 0 || ny < 0 || nz < 0 || nx >= static_cast<int>(res) ||
                            ny >= static_cast<int>(res) || nz >= static_cast<int>(res))
                            continue;
                        dilated.push_back(morton_encode(nx, ny, nz));
                    }
        }
        std::sort(dilated.begin(), dilated.end());
        dilated.erase(std::unique(dilated.begin(), dilated.end()), dilated.end());
        cells = std::move(dilated);
    }

    SparseOctree tree;
    tree.config_ = config;
    tree.dropped_points_ = dropped;
    tree.leaf_level_ = std::countr_zero(res);
    tree.cell_size_ = h;
    tree.levels_.assign(tree.leaf_level_ + 1, {});
    tree.levels_[tree.leaf_level_] = std::move(cells);
    tree.finalize_from_leaves();
    return tree;
}

SparseOctree SparseOctree::from_leaves(std::vector<uint64_t> leaf_codes, const GridConfig& config) {
    config.validate();
    if (leaf_codes.empty()) throw std::runtime_error("empty occupancy");
    std::sort(leaf_codes.begin(), leaf_codes.end());
    leaf_codes.erase(std::unique(leaf_codes.begin(), leaf_codes.end()), leaf_codes.end());

    SparseOctree tree;
    tree.config_ = config;
    tree.leaf_level_ = std::countr_zero(config.resolution);
    tree.cell_size_ = config.scene_aabb.extent().x / config.resolution;
    tree.levels_.assign(tree.leaf_level_ + 1, {});
    tree.levels_[tree.leaf_level_] = std::move(leaf_codes);
    tree.finalize_from_leaves();
    return tree;
}

// Populates ancestor levels and the leaf-corner vertex index.
void SparseOctree::finalize_from_leaves() {
    for (int level = leaf_level_; level > 0; --level) {
        std::vector<uint64_t> parents;
        parents.reserve(levels_[level].size());
        for (uint64_t code : levels_[level]) parents.push_back(code >> 3);
        parents.erase(std::unique(parents.begin(), parents.end()), parents.end());
        levels_[level - 1] = std::move(parents);
    }

    // Dense vertex ids over the leaf corner lattice, sorted by packed
    // (z, y, x) lattice key so ids are stable for a fixed leaf set.
    const uint64_t lat = config_.resolution + 1;
    std::vector<uint64_t> corner_keys;
    corner_keys.reserve(leaf_codes().size() * 8);
    for (uint64_t code : leaf_codes()) {
        uint32_t x, y, z;
        morton_decode(code, x, y, z);
        for (uint32_t b = 0; b < 8; ++b) {
            const uint64_t cx = x + (b & 1);
            const uint64_t cy = y + ((b >> 1) & 1);
            const uint64_t cz = z + ((b >> 2) & 1);
            corner_keys.push_back((cz * lat + cy) * lat + cx);
        }
    }
    std::vector<uint64_t> unique_keys = corner_keys;
    std::sort(unique_keys.begin(), unique_keys.end());
    unique_keys.erase(std::unique(unique_keys.begin(), unique_keys.end()), unique_keys.end());
    vertex_count_ = static_cast<uint32_t>(unique_keys.size());

    leaf_corner_ids_.resize(corner_keys.size());
    for (size_t i = 0; i < corner_keys.size(); ++i) {
        const auto it = std::lower_bound(unique_keys.begin(), unique_keys.end(), corner_keys[i]);
        leaf_corner_ids_[i] = static_cast<uint32_t>(it - unique_keys.begin());
    }
}

Aabb SparseOctree::voxel_aabb(uint64_t voxel_id) const {
    uint32_t x, y, z;
    morton_decode(voxel_id, x, y, z);
    const Vec3 lo = config_.scene_aabb.lo;
    return Aabb{{lo.x + x * cell_size_, lo.y + y * cell_size_, lo.z + z * cell_size_},
                {lo.x + (x + 1) * cell_size_, lo.y + (y + 1) * cell_size_,
                 lo.z + (z + 1) * cell_size_}};
}

Vec3 SparseOctree::voxel_center(uint64_t voxel_id) const {
    const Aabb box = voxel_aabb(voxel_id);
    return box.center();
}

std::optional<uint32_t> SparseOctree::leaf_index(uint64_t voxel_id) const {
    const auto& leaves = leaf_codes();
    const auto it = std::lower_bound(leaves.begin(), leaves.end(), voxel_id);
    if (it == leaves.end() || *it != voxel_id) return std::nullopt;
    return static_cast<uint32_t>(it - leaves.begin());
}

std::array<uint32_t, 8> SparseOctree::corner_vertices(uint64_t voxel_id) const {
    const auto idx = leaf_index(voxel_id);
    if (!idx) throw std::out_of_range("unknown voxel id");
    std::array<uint32_t, 8> out;
    std::copy_n(leaf_corner_ids_.begin() + static_cast<size_t>(*idx) * 8, 8, out.begin());
    return out;
}

std::optional<uint64_t> SparseOctree::locate(const Vec3& point) const {
    if (!config_.scene_aabb.contains(point)) return std::nullopt;
    const uint32_t res = config_.resolution;
    const Vec3 lo = config_.scene_aabb.lo;
    const uint32_t ix = std::min(static_cast<uint32_t>((point.x - lo.x) / cell_size_), res - 1);
    const uint32_t iy = std::min(static_cast<uint32_t>((point.y - lo.y) / cell_size_), res - 1);
    const uint32_t iz = std::min(static_cast<uint32_t>((point.z - lo.z) / cell_size_), res - 1);
    const uint64_t code = morton_encode(ix, iy, iz);
    if (!leaf_index(code)) return std::nullopt;
    return code;
}

std::vector<RayVoxelHit> SparseOctree::traverse(const Ray& ray) const {
    std::vector<RayVoxelHit> hits;
    TraversalScratch scratch;
    traverse(ray, hits, scratch);
    return hits;
}

void SparseOctree::traverse(const Ray& ray, std::vector<RayVoxelHit>& out,
                            TraversalScratch& scratch) const {
    const size_t first_hit = out.size();

    // Depth-first descent; a child cell is tested only when its parent's box
    // is hit. Children of a parent are contiguous in the sorted code array.
    auto& stack = scratch.stack;
    stack.clear();
    stack.emplace_back(0, 0);
    while (!stack.empty()) {
        const auto [level, code] = stack.back();
        stack.pop_back();

        const double cell = config_.scene_aabb.extent().x / (1u << level);
        uint32_t x, y, z;
        morton_decode(code, x, y, z);
        const Vec3 lo = config_.scene_aabb.lo;
        const Aabb box{{lo.x + x * cell, lo.y + y * cell, lo.z + z * cell},
                       {lo.x + (x + 1) * cell, lo.y + (y + 1) * cell, lo.z + (z + 1) * cell}};
        const auto span = ray_aabb(ray, box);
        if (!span) continue;

        if (level == leaf_level_) {
            if (span->t1 - span->t0 > kMinHitSpan) {
                out.push_back(RayVoxelHit{code, span->t0, span->t1, ray.at(span->t0),
                                          ray.at(span->t1)});
            }
            continue;
        }

        const auto& next = levels_[level + 1];
        const uint64_t first = code << 3;
        auto it = std::lower_bound(next.begin(), next.end(), first);
        for (; it != next.end() && *it < first + 8; ++it) {
            stack.emplace_back(level + 1, *it);
        }
    }

    std::sort(out.begin() + first_hit, out.end(),
              [](const RayVoxelHit& a, const RayVoxelHit& b) {
                  if (a.t_in != b.t_in) return a.t_in < b.t_in;
                  return a.voxel_id < b.voxel_id;
              });
}

}  // namespace svlf
