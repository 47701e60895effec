#include "rfmesh/sh.hpp"

namespace rfmesh {

namespace {
constexpr double k0 = 0.28209479177387814;
constexpr double k1 = 0.48860251190291987;
constexpr double k2xy = 1.0925484305920792;
constexpr double k2z2 = 0.94617469575755997;
constexpr double k2c = 0.31539156525251999;
constexpr double k2d = 0.54627421529603959;
constexpr double k3a = 0.59004358992664352;
constexpr double k3b = 2.8906114426405538;
constexpr double k3c = 0.45704579946446572;
constexpr double k3d = 0.37317633259011546;
constexpr double k3e = 1.4453057213202771;
}  // namespace

void sh_basis(const Vec3& d, double out[kShDim]) {
    double x = d.x, y = d.y, z = d.z;
    double xx = x * x, yy = y * y, zz = z * z;
    out[0] = k0;
    out[1] = -k1 * y;
    out[2] = k1 * z;
    out[3] = -k1 * x;
    out[4] = k2xy * x * y;
    out[5] = -k2xy * y * z;
    out[6] = k2z2 * zz - k2c;
    out[7] = -k2xy * x * z;
    out[8] = k2d * (xx - yy);
    out[9] = k3a * y * (-3.0 * xx + yy);
    out[10] = k3b * x * y * z;
    out[11] = k3c * y * (1.0 - 5.0 * zz);
    out[12] = k3d * z * (5.0 * zz - 3.0);
    out[13] = k3c * x * (1.0 - 5.0 * zz);
    out[14] = k3e * z * (xx - yy);
    out[15] = k3a * x * (-xx + 3.0 * yy);
}

void sh_basis_grad(const Vec3& d, double out[kShDim], Vec3 grad[kShDim]) {
    sh_basis(d, out);
    double x = d.x, y = d.y, z = d.z;
    double xx = x * x, yy = y * y, zz = z * z;
    grad[0] = {0, 0, 0};
    grad[1] = {0, -k1, 0};
    grad[2] = {0, 0, k1};
    grad[3] = {-k1, 0, 0};
    grad[4] = {k2xy * y, k2xy * x, 0};
    grad[5] = {0, -k2xy * z, -k2xy * y};
    grad[6] = {0, 0, 2.0 * k2z2 * z};
    grad[7] = {-k2xy * z, 0, -k2xy * x};
    grad[8] = {2.0 * k2d * x, -2.0 * k2d * y, 0};
    grad[9] = {-6.0 * k3a * x * y, k3a * (-3.0 * xx + 3.0 * yy), 0};
    grad[10] = {k3b * y * z, k3b * x * z, k3b * x * y};
    grad[11] = {0, k3c * (1.0 - 5.0 * zz), -10.0 * k3c * y * z};
    grad[12] = {0, 0, k3d * (15.0 * zz - 3.0)};
    grad[13] = {k3c * (1.0 - 5.0 * zz), 0, -10.0 * k3c * x * z};
    grad[14] = {2.0 * k3e * x * z, -2.0 * k3e * y * z, k3e * (xx - yy)};
    grad[15] = {k3a * (-3.0 * xx + 3.0 * yy), 6.0 * k3a * x * y, 0};
}

Vec3 sh_chain_unnormalized(const Vec3& v, const double dL_dsh[kShDim]) {
    double n = norm(v);
    if (n < 1e-300) return {0, 0, 0};
    Vec3 d = v / n;
    double sh[kShDim];
    Vec3 g[kShDim];
    sh_basis_grad(d, sh, g);
    Vec3 dd{0, 0, 0};
    for (int k = 0; k < kShDim; ++k) dd += g[k] * dL_dsh[k];
    // J = (I - d d^T) / n, symmetric.
    return (dd - d * dot(d, dd)) / n;
}

}  // namespace rfmesh
