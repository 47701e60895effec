#include "rfmesh/occupancy.hpp"

#include "rfmesh/errors.hpp"
#include "rfmesh/parallel.hpp"

namespace rfmesh {

OccupancyGrid OccupancyGrid::make(int res, const AABB& box, double decay) {
    if (res < 1) throw InputError("occupancy: resolution must be positive");
    OccupancyGrid g;
    g.res = res;
    g.box = box;
    g.decay = decay;
    g.running.assign(size_t(res) * res * res, 1.0);
    g.occupied.assign(g.running.size(), 1);
    return g;
}

void OccupancyGrid::update(const GeometryField& field, uint64_t seed) {
    ++epoch;
    int64_t n = int64_t(res) * res * res;
    Vec3 cell = box.extent() / double(res);

    parallel_chunks(n, 0, [&](int, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            int ix = int(i % res);
            int iy = int((i / res) % res);
            int iz = int(i / (int64_t(res) * res));
            // Per-cell, per-epoch hash stream keeps the update parallel and
            // deterministic at any worker count.
            uint64_t h = splitmix64(seed ^ splitmix64(uint64_t(i) * 0x9e3779b97f4a7c15ULL +
                                                      uint64_t(epoch)));
            double jx = double(splitmix64(h + 1) >> 11) * 0x1.0p-53;
            double jy = double(splitmix64(h + 2) >> 11) * 0x1.0p-53;
            double jz = double(splitmix64(h + 3) >> 11) * 0x1.0p-53;
            Vec3 p{box.lo.x + (ix + jx) * cell.x, box.lo.y + (iy + jy) * cell.y,
                   box.lo.z + (iz + jz) * cell.z};
            double sigma = field.density(p);
            running[i] = std::max(running[i] * decay, sigma);
        }
    });

    double sum = 0.0;
    int64_t nonzero = 0;
    for (int64_t i = 0; i < n; ++i)
        if (running[i] > 0.0) {
            sum += running[i];
            ++nonzero;
        }
    threshold = std::max(nonzero > 0 ? 0.01 * sum / double(nonzero) : 0.0, 1e-2);
    refresh_mask();
}

void OccupancyGrid::refresh_mask() {
    occupied.resize(running.size());
    for (size_t i = 0; i < running.size(); ++i) occupied[i] = running[i] > threshold ? 1 : 0;
}

bool OccupancyGrid::test(const Vec3& p) const {
    Vec3 rel = p - box.lo;
    Vec3 ext = box.extent();
    int ix = int(std::floor(rel.x / ext.x * res));
    int iy = int(std::floor(rel.y / ext.y * res));
    int iz = int(std::floor(rel.z / ext.z * res));
    if (ix < 0 || iy < 0 || iz < 0 || ix >= res || iy >= res || iz >= res) return false;
    return occupied[(size_t(iz) * res + iy) * res + ix] != 0;
}

double OccupancyGrid::occupied_fraction() const {
    int64_t c = 0;
    for (uint8_t o : occupied) c += o;
    return double(c) / double(occupied.size());
}

}  // namespace rfmesh
