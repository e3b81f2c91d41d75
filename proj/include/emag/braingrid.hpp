#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "emag/common.hpp"

namespace emag {

enum class GridVariant { Sphere, SurfaceShell, FreeInit };

/// Placement of the R lattice values on each axis of [-r, r].
enum class LatticeConvention {
  CellCentered,  // r * (2k + 1 - R) / R: centres of R equal cells
  Inclusive,     // r * (2k - (R - 1)) / (R - 1): both endpoints present
};

std::string to_string(GridVariant v);
GridVariant grid_variant_from_string(const std::string& s);
std::string to_string(LatticeConvention c);
LatticeConvention lattice_convention_from_string(const std::string& s);

struct GridSpec {
  int resolution = 12;
  double radius_mm = 90.0;
  GridVariant variant = GridVariant::Sphere;
  double shell_thickness_mm = 15.0;
  LatticeConvention lattice = LatticeConvention::CellCentered;

  nlohmann::json to_json() const;
  static GridSpec from_json(const nlohmann::json& j);
};

/// Sphere-clipped anchor lattice. Points are ordered x-major, then y, then z.
struct BrainGrid {
  GridSpec spec;
  Positions points;

  int size() const { return static_cast<int>(points.rows()); }
  /// FreeInit grids let component centres move during training.
  bool learnable_centers() const { return spec.variant == GridVariant::FreeInit; }

  nlohmann::json to_json() const;
};

BrainGrid generate_grid(const GridSpec& spec);
inline int grid_point_count(const BrainGrid& grid) { return grid.size(); }

}  // namespace emag
