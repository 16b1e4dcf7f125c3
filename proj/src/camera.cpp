#include "qgs/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace qgs {

Camera Camera::look_at(Vec3 eye, Vec3 target, Vec3 up, double fov_y_rad, int w, int h) {
    const Vec3 fwd = normalized(target - eye);
    Vec3 right = cross(fwd, up);
    const double rl = length(right);
    if (rl < 1e-12) throw std::invalid_argument("look_at: up parallel to view direction");
    right = right / rl;
    const Vec3 down = cross(fwd, right);  // +y grows downward in the image

    Camera cam;
    cam.position = eye;
    for (int c = 0; c < 3; ++c) {
        cam.world_to_cam(0, c) = (&right.x)[c];
        cam.world_to_cam(1, c) = (&down.x)[c];
        cam.world_to_cam(2, c) = (&fwd.x)[c];
    }
    cam.width = w;
    cam.height = h;
    cam.fy = 0.5 * h / std::tan(0.5 * fov_y_rad);
    cam.fx = cam.fy;
    cam.cx = 0.5 * w;
    cam.cy = 0.5 * h;
    return cam;
}

}  // namespace qgs
