#include "cosy/kernels.h"

#include <cmath>
#include <limits>
#include <vector>

namespace cosy::kernels {

double MeanPointDistance(const PointSet& pts, const Pose& a, const Pose& b,
                         PointNorm norm) {
  const Mat3& ra = a.rotation;
  const Mat3& rb = b.rotation;
  const Vec3& ta = a.translation;
  const Vec3& tb = b.translation;
  const Eigen::Index n = pts.cols();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = pts(0, i), y = pts(1, i), z = pts(2, i);
    const double ax = ra(0, 0) * x + ra(0, 1) * y + ra(0, 2) * z + ta(0);
    const double ay = ra(1, 0) * x + ra(1, 1) * y + ra(1, 2) * z + ta(1);
    const double az = ra(2, 0) * x + ra(2, 1) * y + ra(2, 2) * z + ta(2);
    const double bx = rb(0, 0) * x + rb(0, 1) * y + rb(0, 2) * z + tb(0);
    const double by = rb(1, 0) * x + rb(1, 1) * y + rb(1, 2) * z + tb(1);
    const double bz = rb(2, 0) * x + rb(2, 1) * y + rb(2, 2) * z + tb(2);
    const double dx = ax - bx, dy = ay - by, dz = az - bz;
    if (norm == PointNorm::kL2) {
      sum += std::sqrt(dx * dx + dy * dy + dz * dz);
    } else {
      sum += std::abs(dx) + std::abs(dy) + std::abs(dz);
    }
  }
  return sum / static_cast<double>(n);
}

void SymmetricDistancesSerial(const PointSet& pts, std::span<const Pose> group,
                              const Pose& t1, const Pose& t2,
                              std::span<double> out, PointNorm norm) {
  for (std::size_t i = 0; i < group.size(); ++i) {
    out[i] = MeanPointDistance(pts, Compose(t1, group[i]), t2, norm);
  }
}

void SymmetricDistancesParallel(const PointSet& pts,
                                std::span<const Pose> group, const Pose& t1,
                                const Pose& t2, std::span<double> out,
                                PointNorm norm) {
  const auto n = static_cast<std::ptrdiff_t>(group.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = MeanPointDistance(pts, Compose(t1, group[i]), t2, norm);
  }
}

void SymmetricDistances(Exec exec, const PointSet& pts,
                        std::span<const Pose> group, const Pose& t1,
                        const Pose& t2, std::span<double> out,
                        PointNorm norm) {
  if (exec == Exec::kParallel) {
    SymmetricDistancesParallel(pts, group, t1, t2, out, norm);
  } else {
    SymmetricDistancesSerial(pts, group, t1, t2, out, norm);
  }
}

namespace {

// Same expression order as MeanPointDistance.
PointSet Transform(const Pose& t, const PointSet& pts) {
  const Mat3& r = t.rotation;
  PointSet out(3, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    const double x = pts(0, i), y = pts(1, i), z = pts(2, i);
    out(0, i) = r(0, 0) * x + r(0, 1) * y + r(0, 2) * z + t.translation(0);
    out(1, i) = r(1, 0) * x + r(1, 1) * y + r(1, 2) * z + t.translation(1);
    out(2, i) = r(2, 0) * x + r(2, 1) * y + r(2, 2) * z + t.translation(2);
  }
  return out;
}

double NearestDistance(const PointSet& cloud, const Vec3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cloud.cols(); ++j) {
    const double dx = cloud(0, j) - q(0);
    const double dy = cloud(1, j) - q(1);
    const double dz = cloud(2, j) - q(2);
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < best) best = d2;
  }
  return std::sqrt(best);
}

}  // namespace

double ClosestPointDistanceSerial(const PointSet& pts, const Pose& pred,
                                  const Pose& gt) {
  const PointSet p = Transform(pred, pts);
  const PointSet g = Transform(gt, pts);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < g.cols(); ++i) sum += NearestDistance(p, g.col(i));
  return sum / static_cast<double>(pts.cols());
}

double ClosestPointDistanceParallel(const PointSet& pts, const Pose& pred,
                                    const Pose& gt) {
  const PointSet p = Transform(pred, pts);
  const PointSet g = Transform(gt, pts);
  std::vector<double> nearest(static_cast<std::size_t>(g.cols()));
  const auto n = static_cast<std::ptrdiff_t>(g.cols());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) nearest[i] = NearestDistance(p, g.col(i));
  double sum = 0.0;
  for (double d : nearest) sum += d;
  return sum / static_cast<double>(pts.cols());
}

}  // namespace cosy::kernels
