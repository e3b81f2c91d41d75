#include "emag/braingrid.hpp"

namespace emag {

using nlohmann::json;

std::string to_string(GridVariant v) {
  switch (v) {
    case GridVariant::Sphere: return "sphere";
    case GridVariant::SurfaceShell: return "shell";
    case GridVariant::FreeInit: return "free";
  }
  return "?";
}

GridVariant grid_variant_from_string(const std::string& s) {
  const std::string k = to_lower_ascii(s);
  if (k == "sphere") return GridVariant::Sphere;
  if (k == "shell" || k == "surface" || k == "surface-shell") return GridVariant::SurfaceShell;
  if (k == "free" || k == "free-init" || k == "freeinit") return GridVariant::FreeInit;
  throw ParseError("unknown grid variant '" + s + "' (sphere|shell|free)");
}

std::string to_string(LatticeConvention c) {
  return c == LatticeConvention::CellCentered ? "cell-centered" : "inclusive";
}

LatticeConvention lattice_convention_from_string(const std::string& s) {
  const std::string k = to_lower_ascii(s);
  if (k == "cell-centered" || k == "centered") return LatticeConvention::CellCentered;
  if (k == "inclusive" || k == "endpoints") return LatticeConvention::Inclusive;
  throw ParseError("unknown lattice convention '" + s + "' (cell-centered|inclusive)");
}

json GridSpec::to_json() const {
  return {{"R", resolution},
          {"radius_mm", radius_mm},
          {"variant", to_string(variant)},
          {"shell_thickness_mm", shell_thickness_mm},
          {"lattice", to_string(lattice)}};
}

GridSpec GridSpec::from_json(const json& j) {
  if (!j.is_object()) throw ParseError("grid spec: expected an object");
  for (const auto& [k, v] : j.items())
    if (k != "R" && k != "radius_mm" && k != "variant" && k != "shell_thickness_mm" && k != "lattice")
      throw ParseError("grid spec: unknown key '" + k + "'");
  GridSpec g;
  g.resolution = j.value("R", g.resolution);
  g.radius_mm = j.value("radius_mm", g.radius_mm);
  if (j.contains("variant")) g.variant = grid_variant_from_string(j.at("variant").get<std::string>());
  g.shell_thickness_mm = j.value("shell_thickness_mm", g.shell_thickness_mm);
  if (j.contains("lattice")) g.lattice = lattice_convention_from_string(j.at("lattice").get<std::string>());
  return g;
}

json BrainGrid::to_json() const {
  json pts = json::array();
  for (int i = 0; i < size(); ++i) pts.push_back({points(i, 0), points(i, 1), points(i, 2)});
  return {{"R", spec.resolution},
          {"radius_mm", spec.radius_mm},
          {"variant", to_string(spec.variant)},
          {"lattice", to_string(spec.lattice)},
          {"points", pts}};
}

BrainGrid generate_grid(const GridSpec& spec) {
  require(spec.resolution >= 2, "grid resolution R must be >= 2");
  require(spec.radius_mm > 0, "brain radius must be positive");
  const int R = spec.resolution;
  const double r = spec.radius_mm;
  std::vector<double> axis(static_cast<std::size_t>(R));
  for (int k = 0; k < R; ++k) {
    // Integer numerators keep symmetric values exactly symmetric.
    axis[static_cast<std::size_t>(k)] =
        spec.lattice == LatticeConvention::Inclusive
            ? r * static_cast<double>(2 * k - (R - 1)) / static_cast<double>(R - 1)
            : r * static_cast<double>(2 * k + 1 - R) / static_cast<double>(R);
  }
  double inner = -1.0;
  if (spec.variant == GridVariant::SurfaceShell) {
    require(spec.shell_thickness_mm > 0 && spec.shell_thickness_mm <= r,
            "shell thickness must be in (0, radius]");
    inner = r - spec.shell_thickness_mm;
  }
  // Relative slack absorbs rounding for points lying exactly on the sphere.
  const double r2 = r * r * (1.0 + 1e-12);
  const double inner2 = inner * inner * (1.0 - 1e-12);
  std::vector<Vec3> kept;
  for (double x : axis)
    for (double y : axis)
      for (double z : axis) {
        const double n2 = x * x + y * y + z * z;
        if (n2 > r2) continue;
        if (inner >= 0 && n2 < inner2) continue;
        kept.emplace_back(x, y, z);
      }
  if (kept.empty())
    throw ValidationError("empty grid: no lattice point of R=" + std::to_string(R) +
                          " lies inside the " + to_string(spec.variant) + " region");
  BrainGrid g{spec, Positions(static_cast<Eigen::Index>(kept.size()), 3)};
  for (std::size_t i = 0; i < kept.size(); ++i) g.points.row(static_cast<Eigen::Index>(i)) = kept[i].transpose();
  return g;
}

}  // namespace emag
