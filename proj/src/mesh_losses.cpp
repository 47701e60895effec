#include "rfmesh/mesh_losses.hpp"

namespace rfmesh {

double laplacian_loss(const TriMesh& mesh, const std::vector<std::vector<int>>& neighbors,
                      std::vector<Vec3>* grad) {
    size_t n = mesh.vertices.size();
    if (grad) grad->assign(n, Vec3{});
    if (n == 0) return 0.0;

    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const auto& ring = neighbors[i];
        if (ring.empty()) continue;
        Vec3 pi = mesh.position(static_cast<int>(i));
        double inv = 1.0 / static_cast<double>(ring.size());
        for (int j : ring) {
            Vec3 d = pi - mesh.position(j);
            total += inv * dot(d, d);
            if (grad) {
                // Both the i-term (weight 1/|S_i|) and j's mirror term
                // (weight 1/|S_j|) differentiate to 2(p_i - p_j) each; the
                // mirror is accumulated when the loop reaches j.
                Vec3 g = d * (2.0 * inv);
                (*grad)[i] += g;
                (*grad)[j] -= g;
            }
        }
    }
    double scale = 1.0 / static_cast<double>(n);
    if (grad)
        for (Vec3& g : *grad) g *= scale;
    return total * scale;
}

double laplacian_loss(const TriMesh& mesh, std::vector<Vec3>* grad) {
    return laplacian_loss(mesh, vertex_neighbors(mesh), grad);
}

double offset_loss(const TriMesh& mesh, std::vector<Vec3>* grad) {
    size_t n = mesh.vertices.size();
    if (grad) grad->assign(n, Vec3{});
    if (n == 0 || !mesh.has_offsets()) return 0.0;
    double total = 0.0;
    double scale = 1.0 / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) {
        total += dot(mesh.offsets[i], mesh.offsets[i]);
        if (grad) (*grad)[i] = mesh.offsets[i] * (2.0 * scale);
    }
    return total * scale;
}

}  // namespace rfmesh
