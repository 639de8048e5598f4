#pragma once

#include <array>
#include <cmath>

#include "pnrf/util.hpp"

namespace pnrf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }
inline Vec3 cwise_mul(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

// Row-major 4x4, used for camera-to-world transforms.
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity() {
    Mat4 r;
    r.m = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    return r;
  }

  double& at(int r, int c) { return m[r * 4 + c]; }
  double at(int r, int c) const { return m[r * 4 + c]; }

  Vec3 rotate(const Vec3& v) const {
    return {at(0, 0) * v.x + at(0, 1) * v.y + at(0, 2) * v.z,
            at(1, 0) * v.x + at(1, 1) * v.y + at(1, 2) * v.z,
            at(2, 0) * v.x + at(2, 1) * v.y + at(2, 2) * v.z};
  }

  // Rotation block is orthonormal for valid cameras, so the inverse rotation
  // is the transpose.
  Vec3 rotate_transposed(const Vec3& v) const {
    return {at(0, 0) * v.x + at(1, 0) * v.y + at(2, 0) * v.z,
            at(0, 1) * v.x + at(1, 1) * v.y + at(2, 1) * v.z,
            at(0, 2) * v.x + at(1, 2) * v.y + at(2, 2) * v.z};
  }

  Vec3 transform_point(const Vec3& p) const {
    Vec3 r = rotate(p);
    return {r.x + at(0, 3), r.y + at(1, 3), r.z + at(2, 3)};
  }

  Vec3 translation() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

  double rotation_det() const {
    return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
           at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
           at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
  }

  // Max deviation of R^T R from identity over the rotation block.
  double orthonormality_error() const {
    double worst = 0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double d = 0;
        for (int k = 0; k < 3; ++k) d += at(k, i) * at(k, j);
        worst = std::max(worst, std::abs(d - (i == j ? 1.0 : 0.0)));
      }
    }
    return worst;
  }
};

// Camera-to-world transform for a camera at `eye` looking at `target`,
// camera space x right / y up / looking down -z.
inline Mat4 look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 zc = normalized(eye - target);
  Vec3 xc = normalized(cross(up, zc));
  Vec3 yc = cross(zc, xc);
  Mat4 m = Mat4::identity();
  m.at(0, 0) = xc.x; m.at(1, 0) = xc.y; m.at(2, 0) = xc.z;
  m.at(0, 1) = yc.x; m.at(1, 1) = yc.y; m.at(2, 1) = yc.z;
  m.at(0, 2) = zc.x; m.at(1, 2) = zc.y; m.at(2, 2) = zc.z;
  m.at(0, 3) = eye.x; m.at(1, 3) = eye.y; m.at(2, 3) = eye.z;
  return m;
}

struct Aabb {
  Vec3 lo, hi;

  double volume() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
};

}  // namespace pnrf
