#pragma once

#include <cmath>

#include "pnrf/geometry.hpp"
#include "pnrf/util.hpp"

namespace pnrf {

// Pinhole camera. Convention: right-handed, camera space x right / y up,
// looking down -z; `transform` is camera-to-world with an orthonormal
// rotation block. Pixel (ix, iy) covers [ix, ix+1) x [iy, iy+1) with the ray
// shot through its center.
struct Camera {
  Mat4 transform = Mat4::identity();
  double focal = 1.0;  // pixels
  int width = 0, height = 0;
  double near_t = 0.1, far_t = 10.0;

  void validate() const {
    check_arg(focal > 0, cat("camera: focal must be positive, got ", focal));
    check_arg(near_t < far_t, cat("camera: near ", near_t, " >= far ", far_t));
    check_arg(width > 0 && height > 0, "camera: empty image plane");
    check_arg(std::abs(transform.rotation_det()) > 1e-8,
              "camera: singular transform (zero determinant rotation block)");
    check_arg(transform.orthonormality_error() <= 1e-4,
              cat("camera: rotation block not orthonormal (error ",
                  transform.orthonormality_error(), ")"));
  }

  Vec3 origin() const { return transform.translation(); }
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  double t_near = 0, t_far = 0;
};

inline Ray generate_ray(const Camera& cam, double px, double py) {
  check_arg(px >= 0 && px < cam.width && py >= 0 && py < cam.height,
            cat("generate_ray: pixel (", px, ",", py, ") outside ", cam.width, "x", cam.height));
  const double u = px + 0.5, v = py + 0.5;
  const Vec3 dir_cam{(u - 0.5 * cam.width) / cam.focal, -(v - 0.5 * cam.height) / cam.focal, -1.0};
  Ray r;
  r.origin = cam.origin();
  r.direction = normalized(cam.transform.rotate(dir_cam));
  r.t_near = cam.near_t;
  r.t_far = cam.far_t;
  return r;
}

struct Projection {
  double px = 0, py = 0;  // continuous pixel coordinates (center of pixel i is i + 0.5)
  double t = 0;           // distance along the unit-direction ray from the camera origin
  bool in_front = false;
  bool in_bounds = false;
};

inline Projection project(const Camera& cam, const Vec3& point) {
  const Vec3 local = cam.transform.rotate_transposed(point - cam.origin());
  Projection p;
  p.in_front = local.z < 0;
  if (!p.in_front) return p;
  const double inv = 1.0 / -local.z;
  p.px = 0.5 * cam.width + cam.focal * local.x * inv;
  p.py = 0.5 * cam.height - cam.focal * local.y * inv;
  p.t = norm(point - cam.origin());
  p.in_bounds = p.px >= 0 && p.px < cam.width && p.py >= 0 && p.py < cam.height;
  return p;
}

// Focal length from the horizontal field of view, as in the transforms files.
inline double focal_from_fov_x(double camera_angle_x, int width) {
  return 0.5 * width / std::tan(0.5 * camera_angle_x);
}

}  // namespace pnrf
