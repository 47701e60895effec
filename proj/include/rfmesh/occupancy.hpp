#pragma once

// Coarse occupancy mask over the scene box. Each cell keeps a running maximum
// of sampled density that decays multiplicatively per update; cells above an
// adaptive threshold count as occupied and the rest are skipped during ray
// sampling. Before the first update everything is occupied.

#include <cstdint>
#include <vector>

#include "rfmesh/fields.hpp"
#include "rfmesh/math.hpp"

namespace rfmesh {

struct OccupancyGrid {
    int res = 128;
    AABB box;
    double decay = 0.95;
    double threshold = 1e-2;
    int64_t epoch = 0;
    std::vector<double> running;    // res^3 running max density
    std::vector<uint8_t> occupied;

    static OccupancyGrid make(int res, const AABB& box, double decay = 0.95);

    // Samples one jittered point per cell (deterministic in seed and epoch),
    // decays the running maxima, and recomputes the threshold:
    // max(0.01 * mean of nonzero running values, 1e-2).
    void update(const GeometryField& field, uint64_t seed);

    bool test(const Vec3& p) const;
    double occupied_fraction() const;

    // Rebuilds the occupied mask from running values and threshold.
    void refresh_mask();
};

}  // namespace rfmesh
