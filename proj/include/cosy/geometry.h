#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cmath>

namespace cosy {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Ordered 3D points stored column-wise (meters).
using PointSet = Eigen::Matrix3Xd;
// Ordered 2D pixel coordinates stored column-wise.
using PixelSet = Eigen::Matrix2Xd;

// Rigid transform in SE(3). Applied to a point as rotation * x + translation.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose Identity() { return {}; }
  static Pose FromTranslation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Pose FromRotation(const Mat3& r) { return {r, Vec3::Zero()}; }

  Mat4 Matrix() const;
  static Pose FromMatrix(const Mat4& m);

  Vec3 operator*(const Vec3& x) const { return rotation * x + translation; }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  friend bool operator==(const CameraIntrinsics&,
                         const CameraIntrinsics&) = default;
};

inline constexpr double kDefaultZMin = 1e-3;

Pose Compose(const Pose& a, const Pose& b);
Pose Inverse(const Pose& t);
PointSet TransformPoints(const Pose& t, const PointSet& pts);

// Pinhole projection; throws BehindCamera if any point has z <= z_min.
PixelSet Project(const CameraIntrinsics& k, const PointSet& pts_camera_frame,
                 double z_min = kDefaultZMin);
// Non-throwing single-point variant. Returns false when z <= z_min.
inline bool ProjectPoint(const CameraIntrinsics& k, const Vec3& p, Vec2* uv,
                         double z_min = kDefaultZMin) {
  if (!(p.z() > z_min)) return false;
  (*uv)(0) = k.fx * p.x() / p.z() + k.cx;
  (*uv)(1) = k.fy * p.y() / p.z() + k.cy;
  return true;
}
// True when p lies in front of the camera and projects inside the image.
inline bool InImage(const CameraIntrinsics& k, const Vec3& p) {
  Vec2 uv;
  return ProjectPoint(k, p, &uv) && uv(0) >= 0.0 && uv(1) >= 0.0 &&
         uv(0) < k.width && uv(1) < k.height;
}
// Inverse of ProjectPoint for a known depth.
Vec3 Unproject(const CameraIntrinsics& k, const Vec2& uv, double depth);

// Gram-Schmidt on two 3-vectors; columns of the result are (e1', e2', e3').
// Throws DegenerateBasis when e1 vanishes or e1, e2 are parallel.
Mat3 RotationFrom6d(const Vec3& e1, const Vec3& e2, double eps = 1e-9);

Mat3 Skew(const Vec3& w);
// Rodrigues formula.
Mat3 ExpSO3(const Vec3& w);
Mat3 AxisAngle(const Vec3& axis, double angle);
Mat3 RotX(double angle);
Mat3 RotY(double angle);
Mat3 RotZ(double angle);
// Rotation angle of r, in [0, pi].
double RotationAngle(const Mat3& r);

// Left-multiplicative local parametrization: delta = (w, v) maps t to
// (ExpSO3(w), v) * t.
Pose Retract(const Pose& t, const Vec6& delta);

bool IsRotation(const Mat3& r, double tol = 1e-9);
// Projects onto SO(3) via SVD; used to clean up long compose chains.
Mat3 Orthonormalize(const Mat3& r);

}  // namespace cosy
