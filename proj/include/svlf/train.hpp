#pragma once

#include <array>
#include <string>

#include "svlf/dataset.hpp"
#include "svlf/model.hpp"
#include "svlf/render.hpp"

namespace svlf {

struct TrainConfig {
    std::array<int, 3> epochs{100, 150, 50};
    double lr_main = 1e-3;      // stages 1-2
    double lr_finetune = 2e-4;  // stage 3
    double lambda_eta = 1.0;
    double lambda_tau = 0.01;
    double lambda_empty = 0.01;  // pre-surface opacity penalty, stage 1 only; 0 disables
    double lambda_alpha = 0.1;   // stages 2-3 background/alpha supervision
    uint64_t seed = 0;
    uint32_t grid_resolution = 128;
    uint32_t dilation = 1;
    uint32_t train_res = 0;  // 0 = native dataset resolution
    std::string out_dir;     // checkpoints + train.log; empty = no files

    void validate() const;
};

// One supervised pixel: ray, color, Euclidean depth along the ray (0 for
// background) and the binary foreground flag.
struct RaySupervision {
    Ray ray;
    float c_gt[3] = {0, 0, 0};
    double depth_gt = 0;
    bool alpha_gt = false;
};

// Within-voxel depth target: eta = (t_out - depth) / (t_out - t_in), clamped
// to [0,1] (eta = 1 at entry). Throws when the surface point lies outside the
// voxel chord beyond 1e-6.
double eta_gt(const RayVoxelHit& hit, double depth_gt);

struct LossWeights {
    double eta = 1.0;
    double tau = 0.01;
    double empty = 0.01;
    double alpha = 0.1;
};

struct LossStats {
    long long rays = 0;
    long long skipped_rays = 0;  // stage-1 rays with no surface voxel
    long long eta_skipped = 0;   // volumetric rays whose surface voxel is not among the hits
};

// Stage-1 loss on the voxel containing the depth hit:
//   |c_v - c_gt|^2 + l_eta (eta_v - eta_gt)^2 + l_tau e^{-2 tau_v}
//   + l_empty sum_{pre-surface} (1 - e^{-tau_k})^2.
// Gradients are accumulated into `grads` (pass null to skip).
template <typename T>
double surface_loss(const SvlfModelT<T>& model, const RaySupervision& sup, const LossWeights& lw,
                    ModelGradsT<T>* grads, LossStats* stats = nullptr);

// Stage-2/3 loss through the full composite:
//   |c(r) - c_gt|^2 + l_eta [fg] (eta_s - eta_gt)^2 + l_alpha (alpha - alpha_gt)^2.
// With color_frozen the color decoder and color features receive no parameter
// gradients; gradients still flow through them to eta.
template <typename T>
double volumetric_loss(const SvlfModelT<T>& model, const RaySupervision& sup,
                       const LossWeights& lw, bool color_frozen, ModelGradsT<T>* grads,
                       LossStats* stats = nullptr);

struct EpochLog {
    int stage = 0;       // 1-based
    int epoch = 0;       // 1-based within the stage
    double mean_loss = 0;
    double val_psnr = 0;
    double seconds = 0;
};

struct TrainResult {
    SvlfModel model;
    ModelAdam adam;
    std::vector<EpochLog> log;
    std::array<double, 3> stage_lrs{};
    long long skipped_rays = 0;
    long long dropped_points = 0;  // occupancy points outside the scene box
    bool diverged = false;
    std::array<std::string, 4> checkpoints;  // stage1..3 boundaries + final
};

// Three-stage depth-supervised optimization. Deterministic for a fixed
// (config, dataset) pair, independent of the worker count.
TrainResult train(const TrainConfig& config, const SceneDataset& dataset);

}  // namespace svlf
