#pragma once

#include <vector>

#include "loopwbc/so3.hpp"

namespace loopwbc {

struct TerrainPatch {
  double x_min = -1e9, x_max = 1e9;
  double y_min = -1e9, y_max = 1e9;
  double height = 0.0;
  Vec3 normal = Vec3::UnitZ();
};

struct TerrainSample {
  double height = 0.0;
  Vec3 normal = Vec3::UnitZ();
  int patch = 0;
};

/// Piecewise-planar ground. Patches are static within an integration step;
/// time-varying heights are driven by the scenario between steps.
struct Terrain {
  std::vector<TerrainPatch> patches;

  static Terrain flat() {
    Terrain t;
    t.patches.push_back(TerrainPatch{});
    return t;
  }

  /// Lowest patch index wins at boundaries. Throws OutOfTerrain when no
  /// patch covers the point.
  TerrainSample query(double x, double y) const;
};

}  // namespace loopwbc
