#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cosy/rng.h"
#include "cosy/scene_io.h"

namespace cosy {

// Eight procedurally built models. Symmetric models carry point sets that
// are invariant under their discretized groups up to rounding.
ModelDb BuiltinModels();

struct ScenarioConfig {
  int n_objects = 6;
  int n_views = 4;
  double box_size = 0.5;  // meters, cube centered at the world origin
  double camera_distance_min = 0.8;
  double camera_distance_max = 1.4;
  // Camera elevation above the box center, degrees.
  double elevation_min_deg = 10.0;
  double elevation_max_deg = 80.0;
  double roll_max_deg = 10.0;
  double min_separation = 0.05;  // between object centers
  CameraIntrinsics intrinsics{600.0, 600.0, 320.0, 240.0, 640, 480};
  // Empty means all models. Labels are drawn without replacement while
  // n_objects does not exceed the label count.
  std::vector<std::string> model_labels;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct NoiseModel {
  double rot_sigma_deg = 0.0;
  double trans_sigma = 0.0;        // meters, per axis
  double depth_sigma_extra = 0.0;  // meters, along the line of sight
  double miss_prob = 0.0;
  double outlier_prob = 0.0;  // expected outliers per visible object
  double label_confusion_prob = 0.0;
  // Candidates report a pose composed with a random element of the label's
  // symmetry group, as an ambiguity-blind estimator would.
  bool random_symmetry = false;
  double score_min = 0.5;
  double score_max = 1.0;
  double outlier_score_min = 0.35;
  double outlier_score_max = 1.0;

  void Validate() const;
};

// Uniform on SO(3) via a normalized Gaussian quaternion.
Mat3 RandomRotation(Rng& rng);

// Camera at `position` with its optical axis through `target`, rolled about
// that axis. Image y points away from world +z.
Pose LookAt(const Vec3& position, const Vec3& target, double roll);

// Views, cameras and world object poses; provenance is left empty.
GroundTruthFile GenerateScene(const ScenarioConfig& cfg, const ModelDb& db,
                              Rng& rng);

struct SimulatedObservations {
  SceneObservations obs;
  // Ground-truth object id per candidate, -1 for injected outliers.
  std::vector<int> provenance;
};

// Objects count as visible when their center projects inside the image.
SimulatedObservations GenerateObservations(const GroundTruthFile& scene,
                                           const ModelDb& db,
                                           const NoiseModel& noise, Rng& rng,
                                           int symmetry_angles = kDefaultSymmetryAngles);

}  // namespace cosy
