#pragma once

// Binary checkpoint for the trained fields plus the occupancy state: a JSON
// shape header followed by raw little-endian doubles. Loading validates every
// shape and the exact payload size.

#include <string>

#include "rfmesh/fields.hpp"
#include "rfmesh/occupancy.hpp"

namespace rfmesh {

void save_checkpoint(const std::string& path, const GeometryField& geo,
                     const AppearanceField& app, const OccupancyGrid& occ);

void load_checkpoint(const std::string& path, GeometryField& geo, AppearanceField& app,
                     OccupancyGrid& occ);

}  // namespace rfmesh
