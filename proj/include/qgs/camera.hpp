#pragma once

#include "qgs/vec.hpp"

namespace qgs {

// Pinhole camera. world_to_cam maps world into camera coordinates with +z
// forward; a point p projects to (fx * x/z + cx, fy * y/z + cy) in pixels.
struct Camera {
    Vec3 position{};
    Mat3 world_to_cam = Mat3::identity();
    double fx = 64.0, fy = 64.0;
    double cx = 32.0, cy = 32.0;
    int width = 64, height = 64;

    static Camera look_at(Vec3 eye, Vec3 target, Vec3 up, double fov_y_rad, int w, int h);
};

}  // namespace qgs
