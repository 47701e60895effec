#include "rfmesh/camera.hpp"

#include "rfmesh/errors.hpp"

namespace rfmesh {

CameraModel CameraModel::look_at(const Vec3& position, const Vec3& target, const Vec3& up_hint,
                                 int width, int height, double fov_x_radians) {
    Vec3 forward = normalize(target - position);
    Vec3 z_axis = -forward;
    Vec3 x_axis = normalize(cross(up_hint, z_axis));
    if (norm(cross(up_hint, z_axis)) < 1e-9)
        x_axis = normalize(cross(Vec3{0.0, 1.0, 0.0}, z_axis));
    Vec3 y_axis = cross(z_axis, x_axis);

    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.fx = 0.5 * width / std::tan(0.5 * fov_x_radians);
    cam.fy = cam.fx;
    cam.cx = 0.5 * width;
    cam.cy = 0.5 * height;
    for (int i = 0; i < 3; ++i) {
        cam.cam_to_world.m[i][0] = x_axis[i];
        cam.cam_to_world.m[i][1] = y_axis[i];
        cam.cam_to_world.m[i][2] = z_axis[i];
        cam.cam_to_world.m[i][3] = position[i];
    }
    return cam;
}

void CameraModel::validate() const {
    if (width < 1 || height < 1) throw InputError("camera: non-positive image size");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera: focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy)) throw InputError("camera: principal point not finite");
    for (int j = 0; j < 3; ++j) {
        Vec3 cj = cam_to_world.rotation_col(j);
        if (std::abs(norm(cj) - 1.0) > 1e-6)
            throw InputError("camera: pose rotation columns must be unit length");
        for (int k = j + 1; k < 3; ++k)
            if (std::abs(dot(cj, cam_to_world.rotation_col(k))) > 1e-6)
                throw InputError("camera: pose rotation columns must be orthogonal");
    }
    if (!is_finite(cam_to_world.translation()))
        throw InputError("camera: pose translation not finite");
}

Ray CameraModel::pixel_ray(int ix, int iy, double jitter_x, double jitter_y) const {
    double u = double(ix) + jitter_x;
    double v = double(iy) + jitter_y;
    Vec3 dir_cam{(u - cx) / fx, -(v - cy) / fy, -1.0};
    Ray r;
    r.origin = position();
    r.dir = normalize(cam_to_world.transform_dir(dir_cam));
    return r;
}

bool CameraModel::project(const Vec3& world, double& u, double& v, double& depth) const {
    Vec3 p = world_to_cam().transform_point(world);
    if (p.z >= -1e-12) return false;
    double inv = 1.0 / (-p.z);
    u = cx + fx * p.x * inv;
    v = cy - fy * p.y * inv;
    depth = -p.z;
    return true;
}

}  // namespace rfmesh
