#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP variant; both produce bit-identical results because each output
// element is computed by exactly one thread in a fixed order and all
// reductions across elements happen serially afterwards.

#include <span>

#include "cosy/geometry.h"

namespace cosy {

enum class Exec { kSerial, kParallel };

enum class PointNorm { kL2, kL1 };

namespace kernels {

// mean_x |a * x - b * x| under the chosen norm.
double MeanPointDistance(const PointSet& pts, const Pose& a, const Pose& b,
                         PointNorm norm = PointNorm::kL2);

// out[i] = MeanPointDistance(pts, t1 * group[i], t2).
void SymmetricDistancesSerial(const PointSet& pts, std::span<const Pose> group,
                              const Pose& t1, const Pose& t2,
                              std::span<double> out,
                              PointNorm norm = PointNorm::kL2);
void SymmetricDistancesParallel(const PointSet& pts,
                                std::span<const Pose> group, const Pose& t1,
                                const Pose& t2, std::span<double> out,
                                PointNorm norm = PointNorm::kL2);
void SymmetricDistances(Exec exec, const PointSet& pts,
                        std::span<const Pose> group, const Pose& t1,
                        const Pose& t2, std::span<double> out,
                        PointNorm norm = PointNorm::kL2);

// Mean over x of min over y of |gt * x - pred * y|.
double ClosestPointDistanceSerial(const PointSet& pts, const Pose& pred,
                                  const Pose& gt);
double ClosestPointDistanceParallel(const PointSet& pts, const Pose& pred,
                                    const Pose& gt);

// Runs body(i) for i in [0, n). The parallel variant uses a static schedule;
// body must only write to slot i of its outputs.
template <typename Body>
void ForEachIndex(Exec exec, std::ptrdiff_t n, Body&& body) {
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
  }
}

}  // namespace kernels
}  // namespace cosy
