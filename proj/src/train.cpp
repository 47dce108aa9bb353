#include "svlf/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "svlf/metrics.hpp"
#include "svlf/rng.hpp"
#include "svlf/threads.hpp"
#include "voxel_batch.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace svlf {

void TrainConfig::validate() const {
    if (epochs[0] < 0 || epochs[1] < 0 || epochs[2] < 0)
        throw std::invalid_argument("epochs must be >= 0");
    if (lr_main <= 0 || lr_finetune <= 0) throw std::invalid_argument("learning rates must be > 0");
    if (lambda_eta < 0 || lambda_tau < 0 || lambda_empty < 0 || lambda_alpha < 0)
        throw std::invalid_argument("loss weights must be >= 0");
}

double eta_gt(const RayVoxelHit& hit, double depth_gt) {
    if (depth_gt < hit.t_in - 1e-6 || depth_gt > hit.t_out + 1e-6)
        throw std::runtime_error("surface point outside voxel");
    const double span = hit.t_out - hit.t_in;
    return std::clamp((hit.t_out - depth_gt) / span, 0.0, 1.0);
}

namespace {

enum class LossMode { Surface, Volumetric };

// Fixed ray partition: gradients accumulate into one buffer per block and are
// reduced in block order, so training is bit-identical for any thread count.
constexpr int kGradBlocks = 8;
constexpr uint32_t kChunkRays = 512;  // staging chunk inside a block, also fixed

template <typename T>
struct ChunkScratch {
    detail::VoxelBatchT<T> batch;
    MlpScratchT<T> mlp;
    BatchMat<T> d_out_t, d_out_c, d_in_t, d_in_c;
    std::vector<RayVoxelHit> hitbuf;
    TraversalScratch trav;
    std::vector<Ray> rays;
    std::vector<const RaySupervision*> sups;  // gathered rays only
    std::vector<uint32_t> hit_begin;
    std::vector<int64_t> surf_hit;  // global hit index of the surface voxel, -1 if absent
    std::vector<double> etagt;
    std::vector<int32_t> col_of_hit;
    std::vector<double> dtau, deta, wgt, trans, ehit;
};

// Loss and gradients for a chunk of rays (both stages share this kernel; the
// public per-ray operations call it with a single ray).
template <typename T>
double loss_chunk(const SvlfModelT<T>& model, std::span<const RaySupervision> chunk, LossMode mode,
                  const LossWeights& lw, bool color_frozen, ModelGradsT<T>* grads,
                  LossStats* stats, ChunkScratch<T>& s) {
    s.batch.clear();
    s.rays.clear();
    s.sups.clear();
    s.hit_begin.assign(1, 0);
    s.surf_hit.clear();
    s.etagt.clear();

    // Gather: traverse each ray and resolve its surface voxel.
    for (const RaySupervision& sup : chunk) {
        if (stats) stats->rays++;
        int64_t surf = -1;
        double eg = 0.0;
        s.hitbuf.clear();
        model.octree.traverse(sup.ray, s.hitbuf, s.trav);

        size_t keep = s.hitbuf.size();
        if (sup.alpha_gt) {
            const Vec3 x_surf = sup.ray.at(sup.depth_gt);
            const auto vid = model.octree.locate(x_surf);
            if (vid) {
                for (size_t j = 0; j < s.hitbuf.size(); ++j) {
                    if (s.hitbuf[j].voxel_id == *vid) {
                        surf = static_cast<int64_t>(s.batch.hits.size() + j);
                        eg = eta_gt(s.hitbuf[j], sup.depth_gt);
                        if (mode == LossMode::Surface)
                            keep = j + 1;  // pre-surface voxels plus the surface voxel
                        break;
                    }
                }
            }
        }
        if (mode == LossMode::Surface) {
            // Stage 1 runs on foreground rays whose surface voxel is resolved.
            if (!sup.alpha_gt || surf < 0) {
                if (stats) stats->skipped_rays++;
                continue;
            }
            if (lw.empty == 0.0) {  // no pre-surface term: evaluate the surface voxel only
                s.hitbuf[0] = s.hitbuf[keep - 1];
                surf = static_cast<int64_t>(s.batch.hits.size());
                keep = 1;
            }
        } else if (sup.alpha_gt && surf < 0) {
            if (stats) stats->eta_skipped++;
        }

        const uint32_t ray_idx = static_cast<uint32_t>(s.rays.size());
        s.rays.push_back(sup.ray);
        s.sups.push_back(&sup);
        for (size_t j = 0; j < keep; ++j) {
            s.batch.hits.push_back(s.hitbuf[j]);
            s.batch.hit_ray.push_back(ray_idx);
        }
        s.hit_begin.push_back(s.batch.n());
        s.surf_hit.push_back(surf);
        s.etagt.push_back(eg);
    }

    const uint32_t n = s.batch.n();
    const uint32_t n_rays = static_cast<uint32_t>(s.rays.size());
    if (n > 0) {
        detail::batch_forward_thickness(model, s.rays, s.batch, grads != nullptr);
        s.batch.color_hits.clear();
        if (mode == LossMode::Volumetric) {
            for (uint32_t j = 0; j < n; ++j) s.batch.color_hits.push_back(j);
        } else {
            for (uint32_t r = 0; r < n_rays; ++r)
                s.batch.color_hits.push_back(static_cast<uint32_t>(s.surf_hit[r]));
        }
        detail::batch_forward_color(model, s.batch, grads != nullptr);

        s.col_of_hit.assign(n, -1);
        for (uint32_t k = 0; k < s.batch.color_hits.size(); ++k)
            s.col_of_hit[s.batch.color_hits[k]] = static_cast<int32_t>(k);
        s.dtau.assign(n, 0.0);
        s.deta.assign(n, 0.0);
        s.wgt.assign(n, 0.0);
        s.trans.assign(n, 0.0);
        s.ehit.assign(n, 0.0);
        s.d_out_c.resize(3, static_cast<uint32_t>(s.batch.color_hits.size()));
        s.d_out_c.fill(T(0));
    }

    const BatchMat<T>* c_out = n > 0 ? &s.batch.cache_c.acts.back() : nullptr;
    double loss = 0.0;

    for (uint32_t r = 0; r < n_rays; ++r) {
        const RaySupervision& sup = *s.sups[r];
        const uint32_t h0 = s.hit_begin[r];
        const uint32_t h1 = s.hit_begin[r + 1];
        const int64_t surf = s.surf_hit[r];

        if (mode == LossMode::Surface) {
            const uint32_t js = static_cast<uint32_t>(surf);
            const int32_t col = s.col_of_hit[js];
            double dc[3];
            for (int ch = 0; ch < 3; ++ch) {
                const double diff =
                    static_cast<double>(c_out->at(ch, col)) - static_cast<double>(sup.c_gt[ch]);
                loss += diff * diff;
                dc[ch] = 2.0 * diff;
            }
            const double ediff = s.batch.eta[js] - s.etagt[r];
            loss += lw.eta * ediff * ediff;
            s.deta[js] += 2.0 * lw.eta * ediff;

            const double e2 = std::exp(-2.0 * s.batch.tau[js]);
            loss += lw.tau * e2;
            s.dtau[js] += -2.0 * lw.tau * e2;

            for (uint32_t k = h0; k < js; ++k) {
                const double e = std::exp(-s.batch.tau[k]);
                const double olap = 1.0 - e;
                loss += lw.empty * olap * olap;
                s.dtau[k] += 2.0 * lw.empty * olap * e;
            }
            for (int ch = 0; ch < 3; ++ch) s.d_out_c.at(ch, col) = static_cast<T>(dc[ch]);
            continue;
        }

        // Volumetric: composite the ray, then push gradients through Eq. 3.
        double color[3] = {0, 0, 0};
        double alpha = 0.0;
        double transmittance = 1.0;
        for (uint32_t j = h0; j < h1; ++j) {
            const double e = std::exp(-s.batch.tau[j]);
            const double w = transmittance * (1.0 - e);
            s.ehit[j] = e;
            s.trans[j] = transmittance;
            s.wgt[j] = w;
            const int32_t col = s.col_of_hit[j];
            for (int ch = 0; ch < 3; ++ch) color[ch] += w * static_cast<double>(c_out->at(ch, col));
            alpha += w;
            transmittance *= e;
        }

        double d_color[3];
        for (int ch = 0; ch < 3; ++ch) {
            const double diff = color[ch] - static_cast<double>(sup.c_gt[ch]);
            loss += diff * diff;
            d_color[ch] = 2.0 * diff;
        }
        const double a_gt = sup.alpha_gt ? 1.0 : 0.0;
        loss += lw.alpha * (alpha - a_gt) * (alpha - a_gt);
        const double d_alpha = 2.0 * lw.alpha * (alpha - a_gt);

        if (sup.alpha_gt && surf >= 0) {
            const uint32_t js = static_cast<uint32_t>(surf);
            const double ediff = s.batch.eta[js] - s.etagt[r];
            loss += lw.eta * ediff * ediff;
            s.deta[js] += 2.0 * lw.eta * ediff;
        }

        // d w_i reaches tau_j for j < i through the transmittance product.
        double suffix = 0.0;
        for (int64_t j = static_cast<int64_t>(h1) - 1; j >= static_cast<int64_t>(h0); --j) {
            const int32_t col = s.col_of_hit[j];
            double dw = d_alpha;
            for (int ch = 0; ch < 3; ++ch)
                dw += d_color[ch] * static_cast<double>(c_out->at(ch, col));
            s.dtau[j] += dw * s.trans[j] * s.ehit[j] - suffix;
            suffix += dw * s.wgt[j];
            for (int ch = 0; ch < 3; ++ch)
                s.d_out_c.at(ch, col) = static_cast<T>(s.wgt[j] * d_color[ch]);
        }
    }

    if (!grads || n == 0) return loss;

    // Color decoder backward; input gradients feed eta even when frozen.
    const uint32_t fc = model.feat_color.dim;
    const uint32_t ft = model.feat_thickness.dim;
    mlp_backward(model.dec_color, s.batch.cache_c, s.d_out_c,
                 color_frozen ? nullptr : &grads->dec_color, &s.d_in_c, s.mlp);
    const double inv_h = 1.0 / model.octree.cell_size();
    for (uint32_t k = 0; k < s.batch.color_hits.size(); ++k) {
        const uint32_t j = s.batch.color_hits[k];
        const auto& corners = s.batch.corners[j];
        if (!color_frozen) {
            for (int b = 0; b < 8; ++b) {
                const T wb = static_cast<T>(s.batch.ws[k][b]);
                T* grow = grads->feat_color.data() + size_t(corners[b]) * fc;
#pragma omp simd
                for (uint32_t d = 0; d < fc; ++d) grow[d] += wb * s.d_in_c.at(6 + d, k);
            }
        }
        // d eta via the surface point: dx_s = sum_b dw_b/du . <z_b, dz_C> / h.
        const auto dw = trilinear_weight_grads(s.batch.u_s[k]);
        Vec3 dxs{0, 0, 0};
        for (int b = 0; b < 8; ++b) {
            const T* zb = model.feat_color.data.data() + size_t(corners[b]) * fc;
            double dotv = 0.0;
            for (uint32_t d = 0; d < fc; ++d)
                dotv += static_cast<double>(zb[d]) * static_cast<double>(s.d_in_c.at(6 + d, k));
            dxs += Vec3{dw[b][0], dw[b][1], dw[b][2]} * (dotv * inv_h);
        }
        const RayVoxelHit& hit = s.batch.hits[j];
        s.deta[j] += dot(dxs, hit.x1 - hit.x2);
    }

    s.d_out_t.resize(2, n);
    for (uint32_t j = 0; j < n; ++j) {
        s.d_out_t.at(0, j) = static_cast<T>(s.dtau[j]);
        s.d_out_t.at(1, j) = static_cast<T>(s.deta[j]);
    }
    mlp_backward(model.dec_thickness, s.batch.cache_t, s.d_out_t, &grads->dec_thickness, &s.d_in_t,
                 s.mlp);
    for (uint32_t j = 0; j < n; ++j) {
        const auto& corners = s.batch.corners[j];
        for (int b = 0; b < 8; ++b) {
            T* grow = grads->feat_thickness.data() + size_t(corners[b]) * ft;
            const T wb1 = static_cast<T>(s.batch.w1[j][b]);
            const T wb2 = static_cast<T>(s.batch.w2[j][b]);
#pragma omp simd
            for (uint32_t d = 0; d < ft; ++d)
                grow[d] += wb1 * s.d_in_t.at(6 + d, j) + wb2 * s.d_in_t.at(6 + ft + d, j);
        }
    }
    return loss;
}

}  // namespace

template <typename T>
double surface_loss(const SvlfModelT<T>& model, const RaySupervision& sup, const LossWeights& lw,
                    ModelGradsT<T>* grads, LossStats* stats) {
    ChunkScratch<T> scratch;
    LossStats local;
    const double loss = loss_chunk<T>(model, {&sup, 1}, LossMode::Surface, lw, false, grads,
                                      &local, scratch);
    if (stats) {
        stats->rays += local.rays;
        stats->skipped_rays += local.skipped_rays;
        stats->eta_skipped += local.eta_skipped;
    }
    return loss;
}

template <typename T>
double volumetric_loss(const SvlfModelT<T>& model, const RaySupervision& sup,
                       const LossWeights& lw, bool color_frozen, ModelGradsT<T>* grads,
                       LossStats* stats) {
    ChunkScratch<T> scratch;
    LossStats local;
    const double loss = loss_chunk<T>(model, {&sup, 1}, LossMode::Volumetric, lw, color_frozen,
                                      grads, &local, scratch);
    if (stats) {
        stats->rays += local.rays;
        stats->skipped_rays += local.skipped_rays;
        stats->eta_skipped += local.eta_skipped;
    }
    return loss;
}

template double surface_loss<float>(const SvlfModelT<float>&, const RaySupervision&,
                                    const LossWeights&, ModelGradsT<float>*, LossStats*);
template double surface_loss<double>(const SvlfModelT<double>&, const RaySupervision&,
                                     const LossWeights&, ModelGradsT<double>*, LossStats*);
template double volumetric_loss<float>(const SvlfModelT<float>&, const RaySupervision&,
                                       const LossWeights&, bool, ModelGradsT<float>*, LossStats*);
template double volumetric_loss<double>(const SvlfModelT<double>&, const RaySupervision&,
                                        const LossWeights&, bool, ModelGradsT<double>*,
                                        LossStats*);

namespace {

RaySupervision make_supervision(const DatasetFrame& frame, uint32_t x, uint32_t y) {
    RaySupervision sup;
    sup.ray = frame.camera.pixel_ray(x, y);
    sup.c_gt[0] = frame.rgb.at(x, y, 0);
    sup.c_gt[1] = frame.rgb.at(x, y, 1);
    sup.c_gt[2] = frame.rgb.at(x, y, 2);
    sup.depth_gt = frame.depth.at(x, y);
    sup.alpha_gt = frame.mask.at(x, y) > 0.5f;
    return sup;
}

void adam_model_step(SvlfModel& model, ModelAdam& adam, const ModelGrads& g, float lr,
                     bool color_frozen) {
    adam_step(adam.feat_thickness, model.feat_thickness.data, g.feat_thickness, lr);
    for (size_t l = 0; l < model.dec_thickness.weights.size(); ++l) {
        adam_step(adam.dec_thickness[2 * l], model.dec_thickness.weights[l],
                  g.dec_thickness.weights[l], lr);
        adam_step(adam.dec_thickness[2 * l + 1], model.dec_thickness.biases[l],
                  g.dec_thickness.biases[l], lr);
    }
    if (color_frozen) return;
    adam_step(adam.feat_color, model.feat_color.data, g.feat_color, lr);
    for (size_t l = 0; l < model.dec_color.weights.size(); ++l) {
        adam_step(adam.dec_color[2 * l], model.dec_color.weights[l], g.dec_color.weights[l], lr);
        adam_step(adam.dec_color[2 * l + 1], model.dec_color.biases[l], g.dec_color.biases[l], lr);
    }
}

}  // namespace

TrainResult train(const TrainConfig& config, const SceneDataset& dataset) {
    namespace fs = std::filesystem;
    config.validate();
    if (config.train_res != 0 &&
        (config.train_res != dataset.width || config.train_res != dataset.height))
        throw std::invalid_argument("train_res must match the dataset resolution (no resampling)");

    const auto train_idx = dataset.split_indices("train");
    const auto val_idx = dataset.split_indices("val");
    if (train_idx.empty()) throw std::invalid_argument("dataset has no training frames");

    // Occupancy from back-projected foreground depth of every training frame.
    std::vector<Vec3> points;
    for (size_t fi : train_idx) {
        const DatasetFrame& frame = dataset.frames[fi];
        for (uint32_t y = 0; y < frame.depth.height; ++y)
            for (uint32_t x = 0; x < frame.depth.width; ++x) {
                const float d = frame.depth.at(x, y);
                if (d <= 0.f) continue;
                const Ray ray = frame.camera.pixel_ray(x, y);
                points.push_back(ray.at(d));
            }
    }
    GridConfig grid;
    grid.resolution = config.grid_resolution;
    grid.dilation = config.dilation;
    SparseOctree octree = SparseOctree::build(points, grid);

    TrainResult result;
    result.dropped_points = static_cast<long long>(octree.dropped_points());
    result.model = init_model(std::move(octree), config.seed);
    result.adam = ModelAdam::like(result.model);
    result.stage_lrs = {config.lr_main, config.lr_main, config.lr_finetune};
    const LossWeights lw{config.lambda_eta, config.lambda_tau, config.lambda_empty,
                         config.lambda_alpha};

    std::ofstream log_file;
    if (!config.out_dir.empty()) {
        fs::create_directories(config.out_dir);
        log_file.open(fs::path(config.out_dir) / "train.log");
    }

    std::vector<ModelGrads> block_grads;
    for (int b = 0; b < kGradBlocks; ++b) block_grads.push_back(ModelGrads::like(result.model));
    ModelGrads total = ModelGrads::like(result.model);
    std::vector<ChunkScratch<float>> scratch(std::max(1, thread_count()));

    std::vector<RaySupervision> sups;
    sups.reserve(size_t(dataset.width) * dataset.height);

    const auto save_stage = [&](int stage_num, const std::string& name) {
        if (config.out_dir.empty()) return std::string();
        const std::string path = fs::path(config.out_dir) / name;
        save_checkpoint(path, result.model, result.adam);
        if (stage_num >= 0) result.checkpoints[stage_num] = path;
        return path;
    };

    LossStats stats_total;
    int global_epoch = 0;
    for (int stage = 0; stage < 3 && !result.diverged; ++stage) {
        const LossMode mode = stage == 0 ? LossMode::Surface : LossMode::Volumetric;
        const bool frozen = stage == 1;
        const float lr = static_cast<float>(result.stage_lrs[stage]);

        for (int epoch = 1; epoch <= config.epochs[stage]; ++epoch, ++global_epoch) {
            const auto t0 = std::chrono::steady_clock::now();

            std::vector<size_t> order(train_idx);
            Rng shuffle_rng = Rng(config.seed).sub(kStreamEpochShuffle).sub(global_epoch + 1);
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[shuffle_rng.below(i)]);

            double loss_sum = 0.0;
            long long ray_count = 0;
            std::array<LossStats, kGradBlocks> block_stats{};

            for (size_t fi : order) {
                const DatasetFrame& frame = dataset.frames[fi];
                sups.clear();
                for (uint32_t y = 0; y < frame.rgb.height; ++y)
                    for (uint32_t x = 0; x < frame.rgb.width; ++x) {
                        if (mode == LossMode::Surface && frame.mask.at(x, y) <= 0.5f) continue;
                        sups.push_back(make_supervision(frame, x, y));
                    }
                const size_t n = sups.size();
                const size_t per_block = (n + kGradBlocks - 1) / kGradBlocks;
                std::array<double, kGradBlocks> block_loss{};

#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
                for (int b = 0; b < kGradBlocks; ++b) {
                    block_grads[b].clear();
                    const size_t begin = std::min(n, b * per_block);
                    const size_t end = std::min(n, (b + 1) * per_block);
#ifdef _OPENMP
                    ChunkScratch<float>& sc = scratch[omp_get_thread_num()];
#else
                    ChunkScratch<float>& sc = scratch[0];
#endif
                    double acc = 0.0;
                    for (size_t c = begin; c < end; c += kChunkRays) {
                        const size_t ce = std::min(end, c + kChunkRays);
                        acc += loss_chunk<float>(
                            result.model, {sups.data() + c, ce - c}, mode, lw, frozen,
                            &block_grads[b], &block_stats[b], sc);
                    }
                    block_loss[b] = acc;
                }

                total.clear();
                for (int b = 0; b < kGradBlocks; ++b) {
                    total.add(block_grads[b]);
                    loss_sum += block_loss[b];
                }
                ray_count += static_cast<long long>(n);
                adam_model_step(result.model, result.adam, total, lr, frozen);
            }

            const double mean_loss = ray_count > 0 ? loss_sum / ray_count : 0.0;
            if (!std::isfinite(mean_loss)) {
                result.diverged = true;
                save_stage(-1, "checkpoint_diverged.svlf");
                break;
            }

            double val_psnr = 0.0;
            if (!val_idx.empty()) {
                FrameBuffers fb;
                for (size_t vi : val_idx) {
                    const DatasetFrame& frame = dataset.frames[vi];
                    render_frame(result.model, frame.camera, fb);
                    Image rendered;
                    rendered.width = fb.width;
                    rendered.height = fb.height;
                    rendered.channels = 3;
                    rendered.px = fb.rgb;
                    val_psnr += psnr(rendered, frame.rgb);
                }
                val_psnr /= val_idx.size();
            }

            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.log.push_back({stage + 1, epoch, mean_loss, val_psnr, secs});
            if (log_file) {
                char line[160];
                std::snprintf(line, sizeof(line), "%d\t%d\t%.8f\t%.4f\t%.3f\n", stage + 1, epoch,
                              mean_loss, val_psnr, secs);
                log_file << line;
                log_file.flush();
            }
            for (const LossStats& bs : block_stats) {
                stats_total.rays += bs.rays;
                stats_total.skipped_rays += bs.skipped_rays;
                stats_total.eta_skipped += bs.eta_skipped;
            }
        }
        save_stage(stage, "checkpoint_stage" + std::to_string(stage + 1) + ".svlf");
    }

    result.skipped_rays = stats_total.skipped_rays;
    if (!result.diverged) result.checkpoints[3] = save_stage(3, "checkpoint_final.svlf");
    return result;
}

}  // namespace svlf
