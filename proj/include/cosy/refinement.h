#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cosy/kernels.h"
#include "cosy/matching.h"
#include "cosy/rng.h"
#include "cosy/scene_io.h"

namespace cosy {

// World-frame poses of cameras (camera-to-world) and physical objects.
struct SceneState {
  std::string root_view;  // defines the world frame; its pose is fixed
  std::map<std::string, Pose> camera_poses;
  std::map<int, Pose> object_poses;

  bool operator==(const SceneState&) const = default;
};

struct RefineConfig {
  int max_iterations = 100;
  double truncation = 25.0;  // pixels
  double damping_init = 1e-4;
  double damping_factor = 10.0;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct InitResult {
  SceneState state;
  // Objects restricted to initialised views; objects left without members
  // are removed.
  std::vector<PhysicalObject> objects;
  // Views hosting object members that no hypothesis chain reaches from the
  // root. Their candidates take no part in refinement.
  std::vector<std::string> disconnected_views;
};

// Places a random root camera at the origin, chains the remaining cameras
// through stored two-view relative poses, then places each object from a
// randomly chosen member candidate. The root is drawn from the view
// component holding the most object members.
InitResult InitializeScene(const std::vector<PhysicalObject>& objects,
                           const std::vector<TwoViewHypothesis>& hypotheses,
                           const SceneObservations& obs, Rng& rng);

// Stacked pixel residuals of one candidate for a fixed symmetry:
// e_x = pi(T_{C_aO} S x) - pi(T_{C_a}^-1 T_{P_n} x). Rows of points that are
// truncated or behind a camera are zero and flagged inactive.
struct ResidualBlock {
  Eigen::VectorXd residual;                          // 2N
  Eigen::Matrix<double, Eigen::Dynamic, 6> d_camera;  // 2N x 6
  Eigen::Matrix<double, Eigen::Dynamic, 6> d_object;  // 2N x 6
  std::vector<std::uint8_t> active;                  // N
  double loss = 0.0;
};

// Derivatives are with respect to left increments (Retract) of the camera
// and the object pose.
ResidualBlock EvaluateResidualBlock(const SceneState& state,
                                    std::size_t candidate_index,
                                    int object_id,
                                    const SceneObservations& obs,
                                    const PreparedModels& models,
                                    double truncation,
                                    std::size_t symmetry_index);

// Truncated reprojection loss of one member candidate, minimised over the
// object's symmetries (pixels).
double CandidateLoss(const SceneState& state, std::size_t candidate_index,
                     const PhysicalObject& object,
                     const SceneObservations& obs,
                     const PreparedModels& models, double truncation);

double TotalLoss(const SceneState& state,
                 const std::vector<PhysicalObject>& objects,
                 const SceneObservations& obs, const PreparedModels& models,
                 const RefineConfig& cfg, Exec exec = Exec::kParallel);

struct RefineResult {
  SceneState state;
  // Total loss of every accepted state, starting with the input.
  std::vector<double> loss_trace;
  int iterations = 0;
  std::string stop_reason;
};

RefineResult Refine(const SceneState& state,
                    const std::vector<PhysicalObject>& objects,
                    const SceneObservations& obs, const PreparedModels& models,
                    const RefineConfig& cfg, Exec exec = Exec::kParallel);

// For every camera and every object: T_{C_a}^-1 T_{P_n}, scored by the sum of
// the object's member detection scores.
std::vector<PosePrediction> ExpressInCameraFrames(
    const SceneState& state, const std::vector<PhysicalObject>& objects,
    const SceneObservations& obs);

}  // namespace cosy
