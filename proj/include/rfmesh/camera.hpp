#pragma once

// Pinhole camera. Right-handed camera frame: +x right, +y up, looking down -z.
// Pixel (ix, iy) indexes from the top-left corner; its center is (ix+.5, iy+.5).

#include "rfmesh/math.hpp"

namespace rfmesh {

struct CameraModel {
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0;  // focal lengths in pixels
    double cx = 0.0, cy = 0.0;  // principal point in pixel coordinates
    Mat4 cam_to_world;

    static CameraModel look_at(const Vec3& position, const Vec3& target, const Vec3& up_hint,
                               int width, int height, double fov_x_radians);

    // Throws InputError if intrinsics are degenerate or the pose rotation is
    // not orthonormal.
    void validate() const;

    Mat4 world_to_cam() const { return cam_to_world.rigid_inverse(); }
    Vec3 position() const { return cam_to_world.translation(); }

    double fov_x() const { return 2.0 * std::atan2(0.5 * width, fx); }

    // Ray through pixel (ix, iy) offset by jitter in [0,1)^2; (0.5, 0.5) is the
    // pixel center. Direction is unit length.
    Ray pixel_ray(int ix, int iy, double jitter_x = 0.5, double jitter_y = 0.5) const;

    // Projects a world point. Returns false if the point is not strictly in
    // front of the camera; otherwise fills pixel coordinates and depth (a
    // positive distance along -z).
    bool project(const Vec3& world, double& u, double& v, double& depth) const;
};

}  // namespace rfmesh
