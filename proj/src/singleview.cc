#include "cosy/singleview.h"

#include <algorithm>
#include <limits>
#include <vector>

#include "cosy/errors.h"
#include "cosy/kernels.h"

namespace cosy {

CameraIntrinsics CropCamera::Intrinsics() const {
  return {fx_c, fy_c, cx_c, cy_c, width, height};
}

Vec2 CropCamera::ToCrop(const Vec2& uv) const {
  const double sx = width / (box.x1 - box.x0);
  const double sy = height / (box.y1 - box.y0);
  return {(uv.x() - box.x0) * sx, (uv.y() - box.y0) * sy};
}

CropCamera CropFromPose(const Pose& t, const PointSet& points,
                        const CameraIntrinsics& k, double padding, int width,
                        int height) {
  const PixelSet uv = Project(k, TransformPoints(t, points));
  const Vec2 lo = uv.rowwise().minCoeff();
  const Vec2 hi = uv.rowwise().maxCoeff();
  const Vec2 center = 0.5 * (lo + hi);
  double w = padding * (hi.x() - lo.x());
  double h = padding * (hi.y() - lo.y());
  const double aspect = static_cast<double>(width) / height;
  if (w > aspect * h) {
    h = w / aspect;
  } else {
    w = aspect * h;
  }
  if (!(w > 0.0)) {
    // Single projected point: fall back to a one-pixel-high crop.
    h = 1.0;
    w = aspect;
  }
  CropCamera crop;
  crop.width = width;
  crop.height = height;
  crop.box = {center.x() - 0.5 * w, center.y() - 0.5 * h, center.x() + 0.5 * w,
              center.y() + 0.5 * h};
  const double sx = width / w;
  const double sy = height / h;
  crop.fx_c = k.fx * sx;
  crop.fy_c = k.fy * sy;
  crop.cx_c = (k.cx - crop.box.x0) * sx;
  crop.cy_c = (k.cy - crop.box.y0) * sy;
  return crop;
}

Pose ApplyUpdate(const Pose& t_k, const UpdateParams& p, const CropCamera& crop) {
  const Vec3& t = t_k.translation;
  Pose out;
  const double z = p.v_z * t.z();
  out.translation = {(p.v_x / crop.fx_c + t.x() / t.z()) * z,
                     (p.v_y / crop.fy_c + t.y() / t.z()) * z, z};
  out.rotation = RotationFrom6d(p.e1, p.e2) * t_k.rotation;
  return out;
}

UpdateParams TargetUpdate(const Pose& t_k, const Pose& t_gt,
                          const CropCamera& crop) {
  const Vec3& a = t_k.translation;
  const Vec3& b = t_gt.translation;
  UpdateParams p;
  p.v_z = b.z() / a.z();
  p.v_x = crop.fx_c * (b.x() / b.z() - a.x() / a.z());
  p.v_y = crop.fy_c * (b.y() / b.z() - a.y() / a.z());
  const Mat3 r = t_gt.rotation * t_k.rotation.transpose();
  p.e1 = r.col(0);
  p.e2 = r.col(1);
  return p;
}

namespace {

double L1SymmetricDistance(const PointSet& points, const SymmetryGroup& group,
                           const Pose& t1, const Pose& t2) {
  std::vector<double> d(group.size());
  kernels::SymmetricDistancesSerial(points, group.elements, t1, t2, d,
                                    PointNorm::kL1);
  return *std::min_element(d.begin(), d.end());
}

}  // namespace

DisentangledLoss ComputeDisentangledLoss(const Pose& t_k, const UpdateParams& p,
                                         const Pose& t_gt,
                                         const PointSet& points,
                                         const SymmetryGroup& group,
                                         const CropCamera& crop) {
  const UpdateParams target = TargetUpdate(t_k, t_gt, crop);
  UpdateParams xy = target;
  xy.v_x = p.v_x;
  xy.v_y = p.v_y;
  UpdateParams depth = target;
  depth.v_z = p.v_z;
  UpdateParams rot = target;
  rot.e1 = p.e1;
  rot.e2 = p.e2;
  DisentangledLoss loss;
  loss.xy = L1SymmetricDistance(points, group, ApplyUpdate(t_k, xy, crop), t_gt);
  loss.depth =
      L1SymmetricDistance(points, group, ApplyUpdate(t_k, depth, crop), t_gt);
  loss.rotation =
      L1SymmetricDistance(points, group, ApplyUpdate(t_k, rot, crop), t_gt);
  return loss;
}

Pose CanonicalInit(const CropBox& bbox, const CameraIntrinsics& k) {
  const Vec2 center(0.5 * (bbox.x0 + bbox.x1), 0.5 * (bbox.y0 + bbox.y1));
  return Pose::FromTranslation(Unproject(k, center, 1.0));
}

}  // namespace cosy
