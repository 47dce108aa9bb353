#include "svlf/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace svlf {

void Camera::validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera focal lengths must be positive");
    if (width == 0 || height == 0) throw std::invalid_argument("camera resolution must be positive");
    const auto& m = camera_to_world;
    const Vec3 cols[3] = {{m[0], m[4], m[8]}, {m[1], m[5], m[9]}, {m[2], m[6], m[10]}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double want = i == j ? 1.0 : 0.0;
            if (std::abs(dot(cols[i], cols[j]) - want) > 1e-9)
                throw std::invalid_argument("camera rotation is not orthonormal");
        }
}

Camera make_lookat_camera(const Vec3& eye, const Vec3& target, uint32_t width, uint32_t height,
                          double focal_px) {
    const Vec3 forward = normalized(target - eye);
    Vec3 up{0, 0, 1};
    if (std::abs(dot(forward, up)) > 0.999) up = {0, 1, 0};  // near-zenith fallback
    const Vec3 right = normalized(cross(forward, up));
    const Vec3 down = cross(forward, right);  // completes the right-handed (x,y,z) frame

    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal_px;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.camera_to_world = {right.x, down.x, forward.x, eye.x,  //
                           right.y, down.y, forward.y, eye.y,  //
                           right.z, down.z, forward.z, eye.z,  //
                           0,       0,      0,         1};
    return cam;
}

}  // namespace svlf
