#include "cosy/geometry.h"

#include <Eigen/SVD>
#include <algorithm>
#include <sstream>

#include "cosy/errors.h"

namespace cosy {

Mat4 Pose::Matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose Pose::FromMatrix(const Mat4& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Pose Compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose Inverse(const Pose& t) {
  const Mat3 rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

PointSet TransformPoints(const Pose& t, const PointSet& pts) {
  PointSet out = t.rotation * pts;
  out.colwise() += t.translation;
  return out;
}

PixelSet Project(const CameraIntrinsics& k, const PointSet& pts,
                 double z_min) {
  PixelSet out(2, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    Vec2 uv;
    if (!ProjectPoint(k, pts.col(i), &uv, z_min)) {
      std::ostringstream os;
      os << "point " << i << " has z = " << pts(2, i) << " <= " << z_min;
      throw BehindCamera(os.str());
    }
    out.col(i) = uv;
  }
  return out;
}

Vec3 Unproject(const CameraIntrinsics& k, const Vec2& uv, double depth) {
  return {(uv(0) - k.cx) / k.fx * depth, (uv(1) - k.cy) / k.fy * depth, depth};
}

Mat3 RotationFrom6d(const Vec3& e1, const Vec3& e2, double eps) {
  const double n1 = e1.norm();
  const double n2 = e2.norm();
  if (!(n1 > eps) || !(n2 > eps)) {
    throw DegenerateBasis("basis vector has (near) zero norm");
  }
  const Vec3 a = e1 / n1;
  Vec3 c = a.cross(e2) / n2;
  const double nc = c.norm();
  if (!(nc > eps)) throw DegenerateBasis("basis vectors are parallel");
  c /= nc;
  const Vec3 b = c.cross(a);
  Mat3 r;
  r.col(0) = a;
  r.col(1) = b;
  r.col(2) = c;
  return r;
}

Mat3 Skew(const Vec3& w) {
  Mat3 s;
  s << 0.0, -w.z(), w.y(),  //
      w.z(), 0.0, -w.x(),   //
      -w.y(), w.x(), 0.0;
  return s;
}

Mat3 ExpSO3(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = Skew(w);
  if (theta2 < 1e-16) {
    // Second-order Taylor expansion; exact to double precision here.
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * k * k;
}

Mat3 AxisAngle(const Vec3& axis, double angle) {
  return ExpSO3(axis.normalized() * angle);
}

Mat3 RotX(double a) { return AxisAngle(Vec3::UnitX(), a); }
Mat3 RotY(double a) { return AxisAngle(Vec3::UnitY(), a); }
Mat3 RotZ(double a) { return AxisAngle(Vec3::UnitZ(), a); }

double RotationAngle(const Mat3& r) {
  // atan2 form stays accurate near 0 and pi, unlike acos of the trace.
  const Vec3 axis_part(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * axis_part.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Pose Retract(const Pose& t, const Vec6& delta) {
  const Pose step{ExpSO3(delta.head<3>()), delta.tail<3>()};
  return Compose(step, t);
}

bool IsRotation(const Mat3& r, double tol) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

Mat3 Orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

}  // namespace cosy
