#pragma once

#include <cmath>
#include <string>

#include "emag/diffengine.hpp"
#include "emag/gaussfield.hpp"
#include "emag/model.hpp"

namespace emag::testing {

/// Eight electrodes on the unit sphere, labels E0..E7.
inline Montage tiny_montage() {
  Rng er(11);
  std::vector<Electrode> els;
  for (int j = 0; j < 8; ++j) {
    Vec3 v(er.normal(), er.normal(), er.normal());
    els.push_back({"E" + std::to_string(j), v.normalized()});
  }
  return Montage("tiny", els);
}

/// R=3 inclusive lattice on a 0.9-radius sphere (7 points), G=1, M=8, m=4. Geometry is unit
/// scale so every gradient stays well above the finite-difference roundoff floor.
inline ModelConfig tiny_config(PrecisionVariant prec = PrecisionVariant::Full,
                               ConditioningVariant cond = ConditioningVariant::PerGridPoint,
                               ForwardVariant fwd = ForwardVariant::Gaussian, GridVariant grid = GridVariant::FreeInit) {
  ModelConfig c;
  c.grid.resolution = 3;
  c.grid.lattice = LatticeConvention::Inclusive;
  c.grid.radius_mm = 0.9;
  c.grid.variant = grid;
  c.grid.shell_thickness_mm = 0.5;
  c.per_point = 1;
  c.precision = prec;
  c.conditioning = cond;
  c.forward = fwd;
  c.init_spatial_std_mm = 0.6;
  c.init_temporal_std = 0.5;
  c.hd_montage = tiny_montage();
  c.ld_labels = {"E0", "E3", "E5", "E7"};
  return c;
}

/// Moves the parameters off the initial point so no gradient is structurally zero.
inline void perturb(Model& m, std::uint64_t seed = 5) {
  Rng r(seed);
  for (Eigen::Index i = 0; i < m.params().size(); ++i)
    if (m.mask()[i] != 0) m.params()[i] += 0.05 * r.normal();
  for (const char* b : {"enc_b", "mlp_b1", "dmlp_b1"})
    if (m.layout().find(b)) m.group(b).array() += 1.0;
  if (m.layout().find("w")) m.group("w").array() += 0.5;
  if (m.layout().find("log_sigma")) m.group("log_sigma").array() = std::log(0.7);
}

inline Sample tiny_sample(std::uint64_t seed = 5, int T = 16) {
  Rng r(mix_seed(seed, 99));
  Sample s;
  s.ld = Mat(4, T);
  s.hd = Mat(8, T);
  for (auto& v : s.ld.reshaped()) v = r.normal();
  for (auto& v : s.hd.reshaped()) v = r.normal();
  s.id = "tiny";
  return s;
}

inline CholeskyFactor random_chol(Rng& r, double scale = 1.0) {
  CholeskyFactor c;
  for (auto& v : c.log_diag) v = scale * r.normal();
  for (auto& v : c.offdiag) v = scale * r.normal();
  return c;
}

}  // namespace emag::testing
