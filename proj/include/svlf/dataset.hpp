#pragma once

#include <string>
#include <vector>

#include "svlf/image.hpp"
#include "svlf/scene.hpp"

namespace svlf {

struct DatasetFrame {
    std::string name;
    std::string split;  // train | val | test
    Camera camera;
    Image rgb;    // 3 channels
    Image depth;  // 1 channel, Euclidean ray distance, 0 = background
    Image mask;   // 1 channel, 0/1
};

struct SceneDataset {
    uint32_t width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::vector<DatasetFrame> frames;

    std::vector<size_t> split_indices(const std::string& split) const;
};

// Renders ground truth for every camera with the analytic ray-caster and
// writes the on-disk layout:
//   <out>/scene.json                  manifest
//   <out>/rgb_<name>.png              8-bit RGB
//   <out>/depth_<name>.f32            PFMX float32
//   <out>/mask_<name>.png             8-bit, 0/255
// `splits` must be one of train/val/test per camera.
void generate_dataset(const AnalyticScene& scene, const std::vector<Camera>& cameras,
                      const std::vector<std::string>& splits, const std::string& out_path);

SceneDataset load_dataset(const std::string& path);

// Default split sizes for n views, scaled from the 20/2/8 desk pattern;
// every split gets at least one view when n >= 3.
void default_split_counts(int views, int& train, int& val, int& test);

}  // namespace svlf
