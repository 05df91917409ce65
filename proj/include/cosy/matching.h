#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cosy/kernels.h"
#include "cosy/scene_io.h"

namespace cosy {

// Candidate indices (into SceneObservations::candidates), one per view.
struct CandidatePair {
  std::size_t a = 0;
  std::size_t b = 0;

  friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
};

struct MatchParams {
  double inlier_threshold = 0.02;  // meters
  std::size_t max_iterations = 2000;
  std::size_t min_inliers = 3;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct InlierSet {
  std::vector<CandidatePair> pairs;  // sorted by (a, b)
  std::vector<double> distances;     // aligned with pairs
  double total_distance = 0.0;
};

// Relative camera pose T_{C_a C_b} hypothesised from two candidate pairs,
// with the inliers it explains.
struct TwoViewHypothesis {
  std::string view_a;
  std::string view_b;
  Pose relative_pose;
  InlierSet inliers;
  std::pair<CandidatePair, CandidatePair> generating_pairs;
  std::size_t hypotheses_evaluated = 0;
};

struct MatchVertex {
  std::string view_id;
  std::string label;
  double score = 0.0;
};

struct MatchEdge {
  CandidatePair pair;
  double distance = 0.0;
  std::string view_a;  // source view pair
  std::string view_b;
};

struct MatchGraph {
  std::vector<MatchVertex> vertices;  // one per candidate, same indexing
  std::vector<MatchEdge> edges;
  std::vector<TwoViewHypothesis> hypotheses;  // accepted, sorted view pairs
};

struct PhysicalObject {
  int id = 0;
  std::string label;
  // (view_id, candidate index), sorted; at most one member per view.
  std::vector<std::pair<std::string, std::size_t>> members;
};

// Candidate indices of one view, ascending.
std::vector<std::size_t> CandidatesInView(const SceneObservations& obs,
                                          const std::string& view_id);

// T_{C_aC_b} = T_{C_aO_alpha} S* T_{C_bO_beta}^-1 where S* (in the group of
// pair1's label) best aligns pair2 under the resulting relative pose.
// Throws DegeneratePairs if the pairs share a candidate.
Pose RelativePoseFromPairs(const CandidatePair& pair1,
                           const CandidatePair& pair2,
                           const SceneObservations& obs,
                           const PreparedModels& models);

// One-to-one inlier pairs under t_ab: all same-label pairs with symmetric
// distance below the threshold, accepted greedily by ascending distance.
InlierSet CountInliers(const Pose& t_ab, std::span<const std::size_t> cands_a,
                       std::span<const std::size_t> cands_b,
                       const SceneObservations& obs,
                       const PreparedModels& models, double threshold);

// All unordered pairs of label-consistent candidate pairs that do not share
// a candidate, in lexicographic order.
std::vector<std::pair<CandidatePair, CandidatePair>> EnumerateHypotheses(
    std::span<const std::size_t> cands_a, std::span<const std::size_t> cands_b,
    const SceneObservations& obs);

// Exhaustive when the hypothesis count fits max_iterations, otherwise a
// seeded uniform sample without replacement. Best = most inliers, then
// smallest total inlier distance, then lexicographically first generating
// pairs. Returns nullopt below min_inliers.
std::optional<TwoViewHypothesis> TwoViewRansac(
    const std::string& view_a, const std::string& view_b,
    const SceneObservations& obs, const PreparedModels& models,
    const MatchParams& params, Exec exec = Exec::kParallel);

// Runs TwoViewRansac on every unordered view pair (view ids sorted) and
// unions the accepted inliers as edges.
MatchGraph BuildMatchGraph(const SceneObservations& obs,
                           const PreparedModels& models,
                           const MatchParams& params,
                           Exec exec = Exec::kParallel);

// Connected components with >= 2 members after dropping isolated vertices
// and keeping only the highest-scoring member per view.
std::vector<PhysicalObject> ExtractPhysicalObjects(const MatchGraph& graph);

}  // namespace cosy
