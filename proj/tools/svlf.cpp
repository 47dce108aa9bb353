// svlf: gen | train | render | eval | bench
//
// Config precedence: flags > --config JSON file > defaults. The resolved
// configuration is echoed to <out>/config.json so every run is reproducible
// from its output directory alone.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "svlf/dataset.hpp"
#include "svlf/metrics.hpp"
#include "svlf/model.hpp"
#include "svlf/render.hpp"
#include "svlf/threads.hpp"
#include "svlf/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace svlf;

namespace {

struct GenOptions {
    uint64_t seed = 7;
    int views = 30;
    uint32_t res = 128;
    int primitives = 4;
    std::string camera = "hemisphere";
    double radius = 1.8;
    double focal_scale = 1.5;
    std::vector<int> split;  // train,val,test; empty = scaled default
    std::string out;
};

struct TrainOptions {
    std::string data;
    std::string out;
    TrainConfig cfg;
};

struct RenderOptions {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string split = "test";
};

struct BenchOptions {
    std::string checkpoint;
    std::string data;
    std::string out;
    std::string split = "test";
    int frames = 0;  // 0 = all in split
};

json load_config_file(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            std::ifstream in(argv[i + 1]);
            if (!in) throw CLI::ValidationError("--config", "cannot open config file");
            return json::parse(in);
        }
    }
    return json::object();
}

template <typename T>
void from_cfg(const json& j, const char* key, T& value) {
    if (j.contains(key)) value = j.at(key).get<T>();
}

void echo_config(const std::string& out_dir, const json& resolved) {
    fs::create_directories(out_dir);
    std::ofstream out(fs::path(out_dir) / "config.json");
    out << resolved.dump(2) << "\n";
}

Image rgb_image(const FrameBuffers& fb) {
    Image img;
    img.width = fb.width;
    img.height = fb.height;
    img.channels = 3;
    img.px = fb.rgb;
    return img;
}

Image plane_image(const std::vector<float>& data, uint32_t w, uint32_t h) {
    Image img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.px = data;
    return img;
}

int cmd_gen(const GenOptions& opt) {
    if (opt.views < 1) throw CLI::ValidationError("--views", "views must be >= 1");
    if (opt.res < 1) throw CLI::ValidationError("--res", "res must be >= 1");
    if (opt.primitives < 1) throw CLI::ValidationError("--primitives", "primitives must be >= 1");

    int n_train, n_val, n_test;
    if (!opt.split.empty()) {
        if (opt.split.size() != 3) throw CLI::ValidationError("--split", "expected train,val,test");
        n_train = opt.split[0];
        n_val = opt.split[1];
        n_test = opt.split[2];
        if (n_train + n_val + n_test != opt.views)
            throw CLI::ValidationError("--split", "split must sum to --views");
    } else {
        default_split_counts(opt.views, n_train, n_val, n_test);
    }

    const AnalyticScene scene = make_random_scene(opt.seed, opt.primitives);
    const double focal = opt.focal_scale * opt.res;
    std::vector<Camera> cams;
    if (opt.camera == "hemisphere") {
        cams = sample_hemisphere_cameras(opt.views, opt.radius, opt.seed, opt.res, opt.res, focal);
    } else if (opt.camera == "free") {
        cams = sample_free_cameras(scene, opt.views, opt.seed, opt.res, opt.res, focal);
    } else {
        throw CLI::ValidationError("--camera", "must be hemisphere or free");
    }
    std::vector<std::string> splits;
    for (int i = 0; i < opt.views; ++i)
        splits.push_back(i < n_train ? "train" : (i < n_train + n_val ? "val" : "test"));

    generate_dataset(scene, cams, splits, opt.out);
    std::cout << "wrote " << opt.views << " frames (" << n_train << "/" << n_val << "/" << n_test
              << " train/val/test) to " << opt.out << "\n";
    return 0;
}

int cmd_train(const TrainOptions& opt) {
    const SceneDataset dataset = load_dataset(opt.data);
    TrainConfig cfg = opt.cfg;
    cfg.out_dir = opt.out;
    const TrainResult result = train(cfg, dataset);
    for (const EpochLog& row : result.log)
        std::cout << "stage " << row.stage << " epoch " << row.epoch << " loss " << row.mean_loss
                  << " val_psnr " << row.val_psnr << "\n";
    if (result.skipped_rays > 0)
        std::cout << "skipped rays (no surface voxel): " << result.skipped_rays << "\n";
    if (result.dropped_points > 0)
        std::cout << "occupancy points outside scene box: " << result.dropped_points << "\n";
    if (result.diverged) {
        std::cerr << "training diverged; diagnostic checkpoint written\n";
        return 1;
    }
    std::cout << "final checkpoint: " << result.checkpoints[3] << "\n";
    return 0;
}

std::vector<size_t> frames_of_split(const SceneDataset& ds, const std::string& split) {
    if (split == "all") {
        std::vector<size_t> idx(ds.frames.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        return idx;
    }
    return ds.split_indices(split);
}

int cmd_render(const RenderOptions& opt) {
    SvlfModel model;
    ModelAdam adam;
    load_checkpoint(opt.checkpoint, model, adam);
    const SceneDataset dataset = load_dataset(opt.data);
    const auto idx = frames_of_split(dataset, opt.split);
    if (idx.empty()) throw std::runtime_error("no frames in split " + opt.split);

    fs::create_directories(opt.out);
    FrameBuffers fb;
    for (size_t fi : idx) {
        const DatasetFrame& frame = dataset.frames[fi];
        render_frame(model, frame.camera, fb);
        write_png(fs::path(opt.out) / ("render_" + frame.name + "_rgb.png"), rgb_image(fb));
        write_png(fs::path(opt.out) / ("render_" + frame.name + "_alpha.png"),
                  plane_image(fb.alpha, fb.width, fb.height));
        write_pfmx(fs::path(opt.out) / ("render_" + frame.name + "_depth.f32"),
                   plane_image(fb.depth, fb.width, fb.height));
    }
    std::cout << "rendered " << idx.size() << " frames to " << opt.out << "\n";
    return 0;
}

int cmd_eval(const RenderOptions& opt) {
    SvlfModel model;
    ModelAdam adam;
    load_checkpoint(opt.checkpoint, model, adam);
    const SceneDataset dataset = load_dataset(opt.data);
    const auto idx = frames_of_split(dataset, opt.split);
    if (idx.empty()) throw std::runtime_error("no frames in split " + opt.split);

    fs::create_directories(opt.out);
    std::vector<MetricReport> reports;
    FrameBuffers fb;
    for (size_t fi : idx) {
        const DatasetFrame& frame = dataset.frames[fi];
        render_frame(model, frame.camera, fb);
        MetricReport r;
        const Image rendered = rgb_image(fb);
        r.psnr = psnr(rendered, frame.rgb);
        r.ssim = ssim(rendered, frame.rgb);
        depth_errors(plane_image(fb.depth, fb.width, fb.height), frame.depth, frame.mask,
                     r.depth_rmse, r.depth_mae, &r.empty_mask);
        r.color_pixels = rendered.px.size() / 3;
        size_t dp = 0;
        for (float m : frame.mask.px) dp += m > 0.5f ? 1 : 0;
        r.depth_pixels = dp;
        reports.push_back(r);
    }

    auto mean_std = [&](auto get) {
        double mean = 0, var = 0;
        for (const auto& r : reports) mean += get(r);
        mean /= reports.size();
        for (const auto& r : reports) var += (get(r) - mean) * (get(r) - mean);
        return std::pair<double, double>(mean, std::sqrt(var / reports.size()));
    };
    const auto [psnr_m, psnr_s] = mean_std([](const MetricReport& r) { return r.psnr; });
    const auto [ssim_m, ssim_s] = mean_std([](const MetricReport& r) { return r.ssim; });
    const auto [rmse_m, rmse_s] = mean_std([](const MetricReport& r) { return r.depth_rmse; });
    const auto [mae_m, mae_s] = mean_std([](const MetricReport& r) { return r.depth_mae; });

    std::ofstream tsv(fs::path(opt.out) / "eval.tsv");
    tsv << "frame\tpsnr\tssim\trmse_x1000\tmae_x1000\tcolor_px\tdepth_px\n";
    char line[256];
    for (size_t i = 0; i < reports.size(); ++i) {
        const MetricReport& r = reports[i];
        std::snprintf(line, sizeof(line), "%s\t%.4f\t%.6f\t%.4f\t%.4f\t%zu\t%zu\n",
                      dataset.frames[idx[i]].name.c_str(), r.psnr, r.ssim, r.depth_rmse * 1e3,
                      r.depth_mae * 1e3, r.color_pixels, r.depth_pixels);
        tsv << line;
    }
    std::snprintf(line, sizeof(line),
                  "mean±std\t%.4f±%.4f\t%.6f±%.6f\t%.4f±%.4f\t%.4f±%.4f\t-\t-\n", psnr_m, psnr_s,
                  ssim_m, ssim_s, rmse_m * 1e3, rmse_s * 1e3, mae_m * 1e3, mae_s * 1e3);
    tsv << line;
    std::cout << line;

    json out;
    out["frames"] = json::array();
    for (size_t i = 0; i < reports.size(); ++i) {
        const MetricReport& r = reports[i];
        out["frames"].push_back({{"name", dataset.frames[idx[i]].name},
                                 {"psnr", r.psnr},
                                 {"ssim", r.ssim},
                                 {"depth_rmse_x1000", r.depth_rmse * 1e3},
                                 {"depth_mae_x1000", r.depth_mae * 1e3}});
    }
    out["mean"] = {{"psnr", psnr_m}, {"ssim", ssim_m}, {"depth_rmse_x1000", rmse_m * 1e3},
                   {"depth_mae_x1000", mae_m * 1e3}};
    out["std"] = {{"psnr", psnr_s}, {"ssim", ssim_s}, {"depth_rmse_x1000", rmse_s * 1e3},
                  {"depth_mae_x1000", mae_s * 1e3}};
    std::ofstream(fs::path(opt.out) / "eval.json") << out.dump(2) << "\n";
    return 0;
}

int cmd_bench(const BenchOptions& opt) {
    SvlfModel model;
    ModelAdam adam;
    load_checkpoint(opt.checkpoint, model, adam);
    const SceneDataset dataset = load_dataset(opt.data);
    auto idx = frames_of_split(dataset, opt.split);
    if (idx.empty()) throw std::runtime_error("no frames in split " + opt.split);
    if (opt.frames > 0 && static_cast<size_t>(opt.frames) < idx.size()) idx.resize(opt.frames);

    FrameBuffers fb;
    RenderStats stats;
    double par_ms = 0, ser_ms = 0;
    using clock = std::chrono::steady_clock;
    for (size_t fi : idx) {
        const Camera& cam = dataset.frames[fi].camera;
        auto t0 = clock::now();
        render_frame(model, cam, fb, &stats);
        par_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
        t0 = clock::now();
        render_frame_ref(model, cam, fb);
        ser_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }
    par_ms /= idx.size();
    ser_ms /= idx.size();
    const double rays_per_s = stats.rays / (par_ms * 1e-3 * idx.size());
    const double queries_per_fg =
        stats.rays_with_hits > 0
            ? double(stats.thickness_queries + stats.color_queries) / 2.0 / stats.rays_with_hits
            : 0.0;

    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "frames\t%zu\n"
                  "threads\t%d\n"
                  "mean_frame_ms_parallel\t%.3f\n"
                  "mean_frame_ms_serial\t%.3f\n"
                  "speedup\t%.2f\n"
                  "rays_per_s\t%.0f\n"
                  "mean_queries_per_foreground_ray\t%.4f\n"
                  "thickness_queries\t%lld\n"
                  "color_queries\t%lld\n"
                  "traversal_hits\t%lld\n"
                  "query_count_equals_hit_count\t%s\n",
                  idx.size(), thread_count(), par_ms, ser_ms, ser_ms / par_ms, rays_per_s,
                  queries_per_fg, stats.thickness_queries, stats.color_queries,
                  stats.traversal_hits,
                  (stats.thickness_queries == stats.traversal_hits &&
                   stats.color_queries == stats.traversal_hits)
                      ? "yes"
                      : "NO");
    std::cout << buf;
    if (!opt.out.empty()) {
        fs::create_directories(opt.out);
        std::ofstream(fs::path(opt.out) / "bench.txt") << buf;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        const json cfg_file = load_config_file(argc, argv);

        CLI::App app{"sparse voxel light field pipeline"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "JSON config file (flags override it)");

        int threads = 0;
        from_cfg(cfg_file, "threads", threads);
        if (threads == 0) {
            if (const char* env = std::getenv("SVLF_THREADS")) threads = std::atoi(env);
        }
        app.add_option("--threads", threads, "worker cap (default: SVLF_THREADS or all cores)");

        GenOptions gen;
        from_cfg(cfg_file, "seed", gen.seed);
        from_cfg(cfg_file, "views", gen.views);
        from_cfg(cfg_file, "res", gen.res);
        from_cfg(cfg_file, "primitives", gen.primitives);
        from_cfg(cfg_file, "camera", gen.camera);
        from_cfg(cfg_file, "radius", gen.radius);
        from_cfg(cfg_file, "focal_scale", gen.focal_scale);
        from_cfg(cfg_file, "out", gen.out);
        CLI::App* c_gen = app.add_subcommand("gen", "generate a procedural dataset");
        c_gen->add_option("--seed", gen.seed);
        c_gen->add_option("--views", gen.views);
        c_gen->add_option("--res", gen.res);
        c_gen->add_option("--primitives", gen.primitives);
        c_gen->add_option("--camera", gen.camera, "hemisphere | free");
        c_gen->add_option("--radius", gen.radius, "hemisphere camera distance");
        c_gen->add_option("--focal-scale", gen.focal_scale, "focal length = scale * res");
        c_gen->add_option("--split", gen.split, "train,val,test counts")->delimiter(',');
        c_gen->add_option("--out", gen.out)->required();

        TrainOptions tr;
        from_cfg(cfg_file, "data", tr.data);
        from_cfg(cfg_file, "out", tr.out);
        from_cfg(cfg_file, "seed", tr.cfg.seed);
        from_cfg(cfg_file, "lr", tr.cfg.lr_main);
        from_cfg(cfg_file, "lr_ft", tr.cfg.lr_finetune);
        from_cfg(cfg_file, "grid_res", tr.cfg.grid_resolution);
        from_cfg(cfg_file, "dilation", tr.cfg.dilation);
        from_cfg(cfg_file, "lambda_eta", tr.cfg.lambda_eta);
        from_cfg(cfg_file, "lambda_tau", tr.cfg.lambda_tau);
        from_cfg(cfg_file, "lambda_empty", tr.cfg.lambda_empty);
        from_cfg(cfg_file, "lambda_alpha", tr.cfg.lambda_alpha);
        std::vector<int> epochs;
        from_cfg(cfg_file, "epochs", epochs);
        if (epochs.size() == 3) tr.cfg.epochs = {epochs[0], epochs[1], epochs[2]};
        CLI::App* c_train = app.add_subcommand("train", "three-stage training");
        c_train->add_option("--data", tr.data)->required();
        c_train->add_option("--out", tr.out)->required();
        std::vector<int> epochs_flag;
        c_train->add_option("--epochs", epochs_flag, "stage epochs, e.g. 100,150,50")
            ->delimiter(',');
        c_train->add_option("--lr", tr.cfg.lr_main, "stage 1-2 learning rate");
        c_train->add_option("--lr-ft", tr.cfg.lr_finetune, "stage 3 learning rate");
        c_train->add_option("--grid-res", tr.cfg.grid_resolution);
        c_train->add_option("--dilation", tr.cfg.dilation);
        c_train->add_option("--res", tr.cfg.train_res, "expected training resolution check");
        c_train->add_option("--seed", tr.cfg.seed);
        c_train->add_option("--lambda-eta", tr.cfg.lambda_eta);
        c_train->add_option("--lambda-tau", tr.cfg.lambda_tau);
        c_train->add_option("--lambda-empty", tr.cfg.lambda_empty);
        c_train->add_option("--lambda-alpha", tr.cfg.lambda_alpha);

        RenderOptions rd;
        from_cfg(cfg_file, "checkpoint", rd.checkpoint);
        from_cfg(cfg_file, "data", rd.data);
        from_cfg(cfg_file, "out", rd.out);
        from_cfg(cfg_file, "split", rd.split);
        CLI::App* c_render = app.add_subcommand("render", "render frames from a checkpoint");
        c_render->add_option("--checkpoint", rd.checkpoint)->required();
        c_render->add_option("--data", rd.data)->required();
        c_render->add_option("--out", rd.out)->required();
        c_render->add_option("--split", rd.split, "train | val | test | all");

        RenderOptions ev = rd;
        CLI::App* c_eval = app.add_subcommand("eval", "render the split and report metrics");
        c_eval->add_option("--checkpoint", ev.checkpoint)->required();
        c_eval->add_option("--data", ev.data)->required();
        c_eval->add_option("--out", ev.out)->required();
        c_eval->add_option("--split", ev.split);

        BenchOptions bn;
        from_cfg(cfg_file, "checkpoint", bn.checkpoint);
        from_cfg(cfg_file, "data", bn.data);
        from_cfg(cfg_file, "out", bn.out);
        CLI::App* c_bench = app.add_subcommand("bench", "timing and query statistics");
        c_bench->add_option("--checkpoint", bn.checkpoint)->required();
        c_bench->add_option("--data", bn.data)->required();
        c_bench->add_option("--out", bn.out);
        c_bench->add_option("--split", bn.split);
        c_bench->add_option("--frames", bn.frames, "limit frame count (0 = all)");

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }

        set_thread_count(threads);

        json resolved;
        resolved["threads"] = thread_count();
        if (c_gen->parsed()) {
            resolved.update({{"command", "gen"},
                             {"seed", gen.seed},
                             {"views", gen.views},
                             {"res", gen.res},
                             {"primitives", gen.primitives},
                             {"camera", gen.camera},
                             {"radius", gen.radius},
                             {"focal_scale", gen.focal_scale},
                             {"out", gen.out}});
            const int rc = cmd_gen(gen);
            echo_config(gen.out, resolved);
            return rc;
        }
        if (c_train->parsed()) {
            if (epochs_flag.size() == 3) tr.cfg.epochs = {epochs_flag[0], epochs_flag[1],
                                                          epochs_flag[2]};
            else if (!epochs_flag.empty())
                throw CLI::ValidationError("--epochs", "expected three comma-separated values");
            if (!fs::exists(tr.data)) throw CLI::ValidationError("--data", "path does not exist");
            resolved.update({{"command", "train"},
                             {"data", tr.data},
                             {"out", tr.out},
                             {"seed", tr.cfg.seed},
                             {"epochs", {tr.cfg.epochs[0], tr.cfg.epochs[1], tr.cfg.epochs[2]}},
                             {"lr", tr.cfg.lr_main},
                             {"lr_ft", tr.cfg.lr_finetune},
                             {"grid_res", tr.cfg.grid_resolution},
                             {"dilation", tr.cfg.dilation},
                             {"lambda_eta", tr.cfg.lambda_eta},
                             {"lambda_tau", tr.cfg.lambda_tau},
                             {"lambda_empty", tr.cfg.lambda_empty},
                             {"lambda_alpha", tr.cfg.lambda_alpha}});
            echo_config(tr.out, resolved);
            return cmd_train(tr);
        }
        if (c_render->parsed()) {
            if (!fs::exists(rd.checkpoint))
                throw CLI::ValidationError("--checkpoint", "path does not exist");
            resolved.update({{"command", "render"},
                             {"checkpoint", rd.checkpoint},
                             {"data", rd.data},
                             {"out", rd.out},
                             {"split", rd.split}});
            echo_config(rd.out, resolved);
            return cmd_render(rd);
        }
        if (c_eval->parsed()) {
            if (!fs::exists(ev.checkpoint))
                throw CLI::ValidationError("--checkpoint", "path does not exist");
            resolved.update({{"command", "eval"},
                             {"checkpoint", ev.checkpoint},
                             {"data", ev.data},
                             {"out", ev.out},
                             {"split", ev.split}});
            echo_config(ev.out, resolved);
            return cmd_eval(ev);
        }
        if (c_bench->parsed()) {
            resolved.update({{"command", "bench"},
                             {"checkpoint", bn.checkpoint},
                             {"data", bn.data},
                             {"out", bn.out},
                             {"split", bn.split},
                             {"frames", bn.frames}});
            if (!bn.out.empty()) echo_config(bn.out, resolved);
            return cmd_bench(bn);
        }
        return 2;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
