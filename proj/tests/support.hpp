#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "p5/environment.hpp"
#include "p5/forcefield.hpp"
#include "p5/rng.hpp"
#include "p5/topology.hpp"

namespace p5::test {

inline ForceFieldParams default_ff() { return default_forcefield(energy_unit_kj_mol(TimescaleParams{})); }

// Canonical chain of n monomers, randomly rotated and jittered.
inline std::vector<Vec3> jittered_chain(const Topology& topo, const ForceFieldParams& ff, Rng& rng, double sigma) {
  std::vector<Vec3> x = canonical_conformation(topo, ff);
  const Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  const double angle = 2.0 * M_PI * rng.uniform();
  for (Vec3& r : x) {
    r = rotate_about_axis(r, axis * (1.0 / norm(axis)), angle);
    r += Vec3{rng.normal(), rng.normal(), rng.normal()} * sigma;
  }
  return x;
}

// Central differences of `energy` at x with step h.
inline std::vector<Vec3> numeric_forces(const std::function<double(const std::vector<Vec3>&)>& energy,
                                        std::vector<Vec3> x, double h) {
  std::vector<Vec3> f(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      double& q = c == 0 ? x[i].x : c == 1 ? x[i].y : x[i].z;
      const double q0 = q;
      q = q0 + h;
      const double ep = energy(x);
      q = q0 - h;
      const double em = energy(x);
      q = q0;
      (c == 0 ? f[i].x : c == 1 ? f[i].y : f[i].z) = -(ep - em) / (2.0 * h);
    }
  }
  return f;
}

// max |a-b| / max |b| over all components.
inline double max_rel_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3 d = a[i] - b[i];
    num = std::max({num, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    den = std::max({den, std::abs(b[i].x), std::abs(b[i].y), std::abs(b[i].z)});
  }
  return den > 0.0 ? num / den : num;
}

}  // namespace p5::test
