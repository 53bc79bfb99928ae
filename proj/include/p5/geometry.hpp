#pragma once

#include <cmath>

#include "p5/vec3.hpp"

namespace p5 {

// Angle a-b-c at vertex b, in [0, π]. Returns 0 if either arm has zero length.
inline double bond_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 u = a - b;
  const Vec3 v = c - b;
  return std::atan2(norm(cross(u, v)), dot(u, v));
}

// IUPAC torsion a-b-c-d in (-π, π]; 0 is cis.
inline double dihedral_angle(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  const Vec3 b1 = b - a;
  const Vec3 b2 = c - b;
  const Vec3 b3 = d - c;
  const Vec3 m = cross(b1, b2);
  const Vec3 n = cross(b2, b3);
  return std::atan2(norm(b2) * dot(b1, n), dot(m, n));
}

// Wraps an angle into (-π, π].
inline double wrap_angle(double a) {
  constexpr double two_pi = 6.283185307179586476925;
  a = std::remainder(a, two_pi);
  if (a <= -two_pi / 2) a += two_pi;
  return a;
}

}  // namespace p5
