#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cosy/evaluation.h"
#include "cosy/matching.h"
#include "cosy/refinement.h"

namespace cosy {

struct SolveConfig {
  double min_score = kDefaultMinScore;
  int symmetry_angles = kDefaultSymmetryAngles;
  double nms_radius = kDefaultNmsRadius;
  MatchParams match;     // its seed is derived from `seed`
  RefineConfig refine;   // likewise
  std::uint64_t seed = 0;

  void Validate() const;
  Json ToJson() const;
};

struct SolveOutput {
  EstimateFile estimate;
  bool solved = false;
  // Wall-clock seconds per stage; kept out of the estimate so that it stays
  // reproducible byte for byte.
  std::vector<std::pair<std::string, double>> timings;
};

// filter by score -> match graph -> physical objects -> initialization ->
// refinement -> 3D NMS -> per-camera predictions. Candidate indices in the
// result refer to `obs` before filtering. An empty object set yields
// solved = false and a diagnostic estimate with status "unsolvable".
SolveOutput Solve(const ModelDb& db, const SceneObservations& obs,
                  const SolveConfig& cfg, Exec exec = Exec::kParallel);

}  // namespace cosy
