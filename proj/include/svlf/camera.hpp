#pragma once

#include <array>
#include <cstdint>

#include "svlf/geometry.hpp"

namespace svlf {

// Pinhole camera, OpenCV-style axes: x right, y down, z forward.
// camera_to_world is a row-major rigid transform.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::array<double, 16> camera_to_world{};
    uint32_t width = 0, height = 0;

    Vec3 position() const { return {camera_to_world[3], camera_to_world[7], camera_to_world[11]}; }

    Vec3 rotate(const Vec3& v) const {
        const auto& m = camera_to_world;
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[4] * v.x + m[5] * v.y + m[6] * v.z,
                m[8] * v.x + m[9] * v.y + m[10] * v.z};
    }

    // Primary ray through the center of pixel (ix, iy).
    Ray pixel_ray(uint32_t ix, uint32_t iy) const {
        const Vec3 d_cam{(ix + 0.5 - cx) / fx, (iy + 0.5 - cy) / fy, 1.0};
        return Ray{position(), normalized(rotate(d_cam))};
    }

    // Throws when the rotation block is not orthonormal within 1e-9.
    void validate() const;
};

// Rigid look-at pose with +z world up; y points down in the image.
Camera make_lookat_camera(const Vec3& eye, const Vec3& target, uint32_t width, uint32_t height,
                          double focal_px);

}  // namespace svlf
