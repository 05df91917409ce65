#include "cosy/symmetry.h"

#include <omp.h>

#include <algorithm>
#include <numbers>
#include <sstream>

#include "cosy/errors.h"
#include "cosy/kernels.h"

namespace cosy {

namespace {

constexpr double kDedupTolerance = 1e-9;

bool SameMotion(const Pose& a, const Pose& b, double radius) {
  // Upper bound on the displacement of any point within `radius`.
  return (a.rotation - b.rotation).norm() * radius +
             (a.translation - b.translation).norm() <=
         kDedupTolerance;
}

bool IsIdentity(const Pose& p) {
  return SameMotion(p, Pose::Identity(), 1.0);
}

// Small groups are not worth a parallel region; nested calls from inside a
// parallel loop always take the serial path.
Exec PickExec(std::size_t work) {
  return (work > 20000 && !omp_in_parallel()) ? Exec::kParallel : Exec::kSerial;
}

}  // namespace

void SymmetrySpec::Validate() const {
  for (std::size_t i = 0; i < continuous_axes.size(); ++i) {
    const double n = continuous_axes[i].axis.norm();
    if (std::abs(n - 1.0) > 1e-9) {
      std::ostringstream os;
      os << "symmetry axis " << i << " has norm " << n << ", expected 1";
      throw InvariantError(os.str());
    }
  }
  bool has_identity = discrete.empty();
  for (std::size_t i = 0; i < discrete.size(); ++i) {
    if (!IsRotation(discrete[i].rotation)) {
      std::ostringstream os;
      os << "discrete symmetry " << i << " is not a rigid motion";
      throw InvariantError(os.str());
    }
    has_identity = has_identity || IsIdentity(discrete[i]);
  }
  if (!has_identity) {
    throw InvariantError("discrete symmetries must include the identity");
  }
}

Pose AxisRotation(const SymmetryAxis& axis, double angle) {
  const Mat3 r = AxisAngle(axis.axis, angle);
  return {r, axis.offset - r * axis.offset};
}

SymmetryGroup Discretize(const SymmetrySpec& spec, int angles_per_axis,
                         double bounding_radius, std::size_t max_size) {
  if (angles_per_axis < 1) {
    throw InvariantError("angles_per_axis must be >= 1");
  }
  spec.Validate();

  std::vector<Pose> discrete = spec.discrete;
  if (discrete.empty()) discrete.push_back(Pose::Identity());

  std::size_t product = discrete.size();
  for (std::size_t a = 0; a < spec.continuous_axes.size(); ++a) {
    product *= static_cast<std::size_t>(angles_per_axis);
    if (product > max_size) break;
  }
  if (product > max_size) {
    std::ostringstream os;
    os << "symmetry product exceeds cap of " << max_size << " elements";
    throw GroupTooLarge(os.str());
  }

  std::vector<Pose> raw = discrete;
  for (const SymmetryAxis& axis : spec.continuous_axes) {
    std::vector<Pose> steps;
    steps.reserve(static_cast<std::size_t>(angles_per_axis));
    for (int k = 0; k < angles_per_axis; ++k) {
      steps.push_back(AxisRotation(
          axis, 2.0 * std::numbers::pi * k / static_cast<double>(angles_per_axis)));
    }
    std::vector<Pose> next;
    next.reserve(raw.size() * steps.size());
    for (const Pose& d : raw) {
      for (const Pose& s : steps) next.push_back(Compose(d, s));
    }
    raw = std::move(next);
  }

  SymmetryGroup group;
  group.elements.push_back(Pose::Identity());
  for (const Pose& candidate : raw) {
    bool duplicate = false;
    for (const Pose& kept : group.elements) {
      if (SameMotion(candidate, kept, bounding_radius)) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) group.elements.push_back(candidate);
  }
  return group;
}

SymmetryMatch BestSymmetryMatch(const PointSet& points,
                                const SymmetryGroup& group, const Pose& t1,
                                const Pose& t2) {
  std::vector<double> d(group.size());
  kernels::SymmetricDistances(
      PickExec(group.size() * static_cast<std::size_t>(points.cols())), points,
      group.elements, t1, t2, d);
  SymmetryMatch best{0, d[0]};
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] < best.distance) best = {i, d[i]};
  }
  return best;
}

double SymmetricDistance(const PointSet& points, const SymmetryGroup& group,
                         const Pose& t1, const Pose& t2) {
  return BestSymmetryMatch(points, group, t1, t2).distance;
}

Pose BestSymmetry(const PointSet& points, const SymmetryGroup& group,
                  const Pose& t1, const Pose& t2) {
  return group.elements[BestSymmetryMatch(points, group, t1, t2).index];
}

std::optional<SymmetryMatch> BestSymmetryMatchBelow(
    const PointSet& points, const Vec3& centroid, const SymmetryGroup& group,
    const Pose& t1, const Pose& t2, double cutoff) {
  const std::size_t n = group.size();
  const Vec3 target = t2 * centroid;
  std::vector<std::pair<double, std::size_t>> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Pose a = Compose(t1, group.elements[i]);
    order[i] = {(a * centroid - target).norm(), i};
  }
  std::sort(order.begin(), order.end());

  std::optional<SymmetryMatch> best;
  for (const auto& [bound, i] : order) {
    const double limit = best ? best->distance : cutoff;
    // Slack keeps rounding in the bound from skipping an exact tie.
    if (bound > limit * (1.0 + 1e-12) + 1e-15) break;
    const double d = kernels::MeanPointDistance(
        points, Compose(t1, group.elements[i]), t2);
    if (best) {
      if (d < best->distance || (d == best->distance && i < best->index)) {
        best = SymmetryMatch{i, d};
      }
    } else if (d < cutoff) {
      best = SymmetryMatch{i, d};
    }
  }
  return best;
}

}  // namespace cosy
