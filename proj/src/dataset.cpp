#include "svlf/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "svlf/threads.hpp"

namespace svlf {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<size_t> SceneDataset::split_indices(const std::string& split) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < frames.size(); ++i)
        if (frames[i].split == split) idx.push_back(i);
    return idx;
}

void default_split_counts(int views, int& train, int& val, int& test) {
    train = std::max(1, static_cast<int>(std::lround(views * 20.0 / 30.0)));
    val = std::max(1, static_cast<int>(std::lround(views * 2.0 / 30.0)));
    if (train + val >= views) {
        train = std::max(1, views - 2);
        val = views - train > 1 ? 1 : 0;
    }
    test = views - train - val;
}

void generate_dataset(const AnalyticScene& scene, const std::vector<Camera>& cameras,
                      const std::vector<std::string>& splits, const std::string& out_path) {
    if (cameras.size() != splits.size())
        throw std::invalid_argument("one split label per camera required");
    std::error_code ec;
    fs::create_directories(out_path, ec);
    if (!fs::is_directory(out_path)) throw std::runtime_error("unwritable path: " + out_path);

    json manifest;
    if (cameras.empty()) throw std::invalid_argument("at least one camera required");
    manifest["resolution"] = {cameras[0].width, cameras[0].height};
    manifest["intrinsics"] = {{"fx", cameras[0].fx},
                              {"fy", cameras[0].fy},
                              {"cx", cameras[0].cx},
                              {"cy", cameras[0].cy}};
    manifest["frames"] = json::array();

    for (size_t f = 0; f < cameras.size(); ++f) {
        const Camera& cam = cameras[f];
        cam.validate();
        char name[16];
        std::snprintf(name, sizeof(name), "%05zu", f);

        Image rgb = Image::make(cam.width, cam.height, 3);
        Image depth = Image::make(cam.width, cam.height, 1);
        Image mask = Image::make(cam.width, cam.height, 1);

        const int64_t pixels = int64_t(cam.width) * cam.height;
#pragma omp parallel for schedule(dynamic, 256) num_threads(thread_count())
        for (int64_t p = 0; p < pixels; ++p) {
            const uint32_t x = static_cast<uint32_t>(p % cam.width);
            const uint32_t y = static_cast<uint32_t>(p / cam.width);
            const Ray ray = cam.pixel_ray(x, y);
            const auto hit = raycast(scene, ray);
            if (hit) {
                const Vec3 c = shade(scene, *hit);
                rgb.at(x, y, 0) = static_cast<float>(c.x);
                rgb.at(x, y, 1) = static_cast<float>(c.y);
                rgb.at(x, y, 2) = static_cast<float>(c.z);
                depth.at(x, y) = static_cast<float>(hit->t);
                mask.at(x, y) = 1.0f;
            } else {
                rgb.at(x, y, 0) = static_cast<float>(scene.background.x);
                rgb.at(x, y, 1) = static_cast<float>(scene.background.y);
                rgb.at(x, y, 2) = static_cast<float>(scene.background.z);
            }
        }

        const std::string stem = std::string(name);
        write_png(fs::path(out_path) / ("rgb_" + stem + ".png"), rgb);
        write_pfmx(fs::path(out_path) / ("depth_" + stem + ".f32"), depth);
        write_png(fs::path(out_path) / ("mask_" + stem + ".png"), mask);

        json frame;
        frame["name"] = stem;
        frame["split"] = splits[f];
        frame["camera_to_world"] = cam.camera_to_world;
        manifest["frames"].push_back(frame);
    }

    std::ofstream out(fs::path(out_path) / "scene.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest in " + out_path);
}

SceneDataset load_dataset(const std::string& path) {
    std::ifstream in(fs::path(path) / "scene.json");
    if (!in) throw std::runtime_error("missing scene.json in " + path);
    json manifest = json::parse(in);

    SceneDataset ds;
    ds.width = manifest["resolution"][0].get<uint32_t>();
    ds.height = manifest["resolution"][1].get<uint32_t>();
    ds.fx = manifest["intrinsics"]["fx"].get<double>();
    ds.fy = manifest["intrinsics"]["fy"].get<double>();
    ds.cx = manifest["intrinsics"]["cx"].get<double>();
    ds.cy = manifest["intrinsics"]["cy"].get<double>();

    for (const json& f : manifest["frames"]) {
        DatasetFrame frame;
        frame.name = f["name"].get<std::string>();
        frame.split = f["split"].get<std::string>();
        frame.camera.fx = ds.fx;
        frame.camera.fy = ds.fy;
        frame.camera.cx = ds.cx;
        frame.camera.cy = ds.cy;
        frame.camera.width = ds.width;
        frame.camera.height = ds.height;
        const auto m = f["camera_to_world"].get<std::vector<double>>();
        if (m.size() != 16) throw std::runtime_error("camera_to_world must have 16 entries");
        std::copy(m.begin(), m.end(), frame.camera.camera_to_world.begin());
        frame.camera.validate();

        frame.rgb = read_png(fs::path(path) / ("rgb_" + frame.name + ".png"));
        frame.depth = read_pfmx(fs::path(path) / ("depth_" + frame.name + ".f32"));
        frame.mask = read_png(fs::path(path) / ("mask_" + frame.name + ".png"));
        if (frame.rgb.width != ds.width || frame.rgb.height != ds.height)
            throw std::runtime_error("frame size mismatch in " + frame.name);
        ds.frames.push_back(std::move(frame));
    }
    return ds;
}

}  // namespace svlf
