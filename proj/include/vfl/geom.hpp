#pragma once
#include <array>
#include <cmath>

#include "vfl/support.hpp"

namespace vfl {

using Vec3 = std::array<double, 3>;
using CVec3 = std::array<Cplx, 3>;

inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline Vec3 operator*(double s, const Vec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return n > 0.0 ? (1.0 / n) * a : a;
}

inline Vec3 real_part(const CVec3& a) {
  return {a[0].real(), a[1].real(), a[2].real()};
}

inline Vec3 imag_part(const CVec3& a) {
  return {a[0].imag(), a[1].imag(), a[2].imag()};
}

inline CVec3 operator*(Cplx s, const CVec3& a) {
  return {s * a[0], s * a[1], s * a[2]};
}

inline CVec3 operator+(const CVec3& a, const CVec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

inline CVec3 operator-(const CVec3& a, const CVec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline double cnorm(const CVec3& a) {
  return std::sqrt(std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2]));
}

}  // namespace vfl
