#include "loopwbc/terrain.hpp"

#include <string>

#include "loopwbc/errors.hpp"

namespace loopwbc {

TerrainSample Terrain::query(double x, double y) const {
  for (size_t i = 0; i < patches.size(); ++i) {
    const TerrainPatch& p = patches[i];
    if (x >= p.x_min && x <= p.x_max && y >= p.y_min && y <= p.y_max) {
      TerrainSample s;
      s.height = p.height;
      s.normal = p.normal;
      s.patch = static_cast<int>(i);
      return s;
    }
  }
  throw OutOfTerrain("no terrain patch at (" + std::to_string(x) + ", " +
                     std::to_string(y) + ")");
}

}  // namespace loopwbc
