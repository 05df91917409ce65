#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cosy/geometry.h"

namespace cosy {

// Rotation axis of a continuous symmetry, passing through `offset`.
struct SymmetryAxis {
  Vec3 axis = Vec3::UnitZ();
  Vec3 offset = Vec3::Zero();

  friend bool operator==(const SymmetryAxis&, const SymmetryAxis&) = default;
};

// Rigid motions that leave an object's appearance unchanged. An empty
// discrete list stands for {identity}; otherwise identity must be listed.
struct SymmetrySpec {
  std::vector<Pose> discrete;
  std::vector<SymmetryAxis> continuous_axes;

  bool operator==(const SymmetrySpec&) const = default;

  // Throws InvariantError on a non-unit axis, a non-rigid discrete element
  // or a missing identity.
  void Validate() const;
};

// Finite set of symmetries; elements[0] is always the identity.
struct SymmetryGroup {
  std::vector<Pose> elements;

  std::size_t size() const { return elements.size(); }
  bool IsTrivial() const { return elements.size() <= 1; }
};

inline constexpr int kDefaultSymmetryAngles = 64;
inline constexpr std::size_t kMaxGroupSize = 4096;

// Pose rotating by `angle` about `axis` through its offset point.
Pose AxisRotation(const SymmetryAxis& axis, double angle);

// Enumerates d * r_1(k_1) * ... * r_m(k_m) for every discrete element d and
// every angle index k_j of every continuous axis, then removes duplicates.
// Two elements are duplicates when they move no point of a ball of
// `bounding_radius` by more than 1e-9. Throws GroupTooLarge when the raw
// product exceeds `max_size`.
SymmetryGroup Discretize(const SymmetrySpec& spec,
                         int angles_per_axis = kDefaultSymmetryAngles,
                         double bounding_radius = 1.0,
                         std::size_t max_size = kMaxGroupSize);

// min over S in group of mean_x |t1 * S * x - t2 * x|_2.
double SymmetricDistance(const PointSet& points, const SymmetryGroup& group,
                         const Pose& t1, const Pose& t2);

struct SymmetryMatch {
  std::size_t index = 0;
  double distance = 0.0;
};

// Arg-min of SymmetricDistance. Ties go to the lowest element index.
SymmetryMatch BestSymmetryMatch(const PointSet& points,
                                const SymmetryGroup& group, const Pose& t1,
                                const Pose& t2);
Pose BestSymmetry(const PointSet& points, const SymmetryGroup& group,
                  const Pose& t1, const Pose& t2);

// Same arg-min as BestSymmetryMatch restricted to distances < cutoff, found
// by branch and bound: |t1 S c - t2 c| with c the centroid of `points`
// lower-bounds the mean distance, so elements whose bound exceeds the best
// value so far are never evaluated. Returns nullopt when nothing is below
// the cutoff. Always serial; intended for use inside parallel loops.
std::optional<SymmetryMatch> BestSymmetryMatchBelow(
    const PointSet& points, const Vec3& centroid, const SymmetryGroup& group,
    const Pose& t1, const Pose& t2, double cutoff);

}  // namespace cosy
