#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cosy/geometry.h"
#include "cosy/symmetry.h"

namespace cosy {

using Json = nlohmann::json;

struct ObjectModel {
  std::string label;
  PointSet points;  // model frame, meters
  double diameter = 0.0;
  SymmetrySpec symmetries;

  bool operator==(const ObjectModel&) const = default;
};

using ModelDb = std::map<std::string, ObjectModel>;

struct View {
  std::string view_id;
  CameraIntrinsics intrinsics;

  bool operator==(const View&) const = default;
};

// One per-view object hypothesis; pose maps model frame to camera frame.
struct Candidate {
  std::string view_id;
  std::string label;
  double score = 0.0;
  Pose pose;

  bool operator==(const Candidate&) const = default;
};

struct SceneObservations {
  std::vector<View> views;
  std::vector<Candidate> candidates;

  const View& FindView(const std::string& view_id) const;
  bool operator==(const SceneObservations&) const = default;
};

// Per-label data shared by matching, refinement and evaluation.
struct PreparedModel {
  const ObjectModel* model = nullptr;
  SymmetryGroup group;
  PointSet sample;  // at most kMaxResidualPoints model points
  Vec3 centroid = Vec3::Zero();  // of `sample`
  bool symmetric() const { return !group.IsTrivial(); }
};

using PreparedModels = std::map<std::string, PreparedModel>;

inline constexpr std::size_t kMaxResidualPoints = 500;
inline constexpr double kMinDiameter = 0.01;
inline constexpr double kMaxDiameter = 2.0;
inline constexpr double kDefaultMinScore = 0.3;

// The deterministic subsample is seeded by the label so every stage sees
// the same points. Models must outlive the returned map.
PreparedModels PrepareModels(const ModelDb& db,
                             int angles_per_axis = kDefaultSymmetryAngles,
                             std::size_t max_points = kMaxResidualPoints);
const PreparedModel& Lookup(const PreparedModels& models,
                            const std::string& label);

// Throws InvariantError naming the model.
void ValidateModel(const ObjectModel& model);
// Points span 3D: at least 4 points and a full-rank covariance.
bool IsFullRank(const PointSet& points);
double MaxPairwiseDistance(const PointSet& points);

// Keeps candidates with score strictly greater than min_score.
SceneObservations FilterByScore(const SceneObservations& obs,
                                double min_score = kDefaultMinScore);

// ---- records for ground truth and estimates ----

struct GroundTruthObject {
  int id = 0;
  std::string label;
  Pose pose;  // world frame

  bool operator==(const GroundTruthObject&) const = default;
};

struct GroundTruthFile {
  std::vector<View> views;
  std::map<std::string, Pose> cameras;  // camera-to-world
  std::vector<GroundTruthObject> objects;
  // Per observation candidate: ground-truth object id or -1 for outliers.
  std::vector<int> provenance;

  bool operator==(const GroundTruthFile&) const = default;
};

// A pose estimate expressed in one camera frame.
struct PosePrediction {
  std::string view_id;
  std::string label;
  double score = 0.0;
  Pose pose;
  int object_id = -1;

  bool operator==(const PosePrediction&) const = default;
};

struct EstimatedObject {
  int id = 0;
  std::string label;
  Pose pose;  // world frame
  double score = 0.0;
  std::vector<std::pair<std::string, std::size_t>> members;

  bool operator==(const EstimatedObject&) const = default;
};

// Single-view candidate pose and the refined pose of its physical object in
// the same camera frame.
struct InlierRecord {
  std::string view_id;
  std::string label;
  std::size_t candidate_index = 0;
  int object_id = 0;
  Pose before;
  Pose after;

  bool operator==(const InlierRecord&) const = default;
};

struct EstimateFile {
  std::string status = "ok";
  Json config = Json::object();
  Json stats = Json::object();
  std::string root_view;
  std::map<std::string, Pose> cameras;
  std::vector<EstimatedObject> objects;
  std::vector<PosePrediction> predictions;
  std::vector<InlierRecord> inlier_candidates;
  std::vector<double> loss_trace;

  bool operator==(const EstimateFile&) const = default;
};

// ---- JSON (de)serialization ----

Json PoseToJson(const Pose& pose);
// Validates the homogeneous bottom row and the rotation block.
Pose PoseFromJson(const Json& j, const std::string& where);

Json ModelsToJson(const ModelDb& db);
ModelDb ModelsFromJson(const Json& j);
Json ObservationsToJson(const SceneObservations& obs);
SceneObservations ObservationsFromJson(const Json& j, const ModelDb& db);
Json GroundTruthToJson(const GroundTruthFile& gt);
GroundTruthFile GroundTruthFromJson(const Json& j);
Json EstimateToJson(const EstimateFile& est);
EstimateFile EstimateFromJson(const Json& j);

// Reading throws ParseError for malformed JSON, SchemaError for missing or
// mistyped fields and InvariantError for values outside their domain.
Json ReadJsonFile(const std::filesystem::path& path);
void WriteJsonFile(const std::filesystem::path& path, const Json& j);

ModelDb LoadModels(const std::filesystem::path& path);
void SaveModels(const std::filesystem::path& path, const ModelDb& db);
SceneObservations LoadObservations(const std::filesystem::path& path,
                                   const ModelDb& db);
void SaveObservations(const std::filesystem::path& path,
                      const SceneObservations& obs);
GroundTruthFile LoadGroundTruth(const std::filesystem::path& path);
void SaveGroundTruth(const std::filesystem::path& path,
                     const GroundTruthFile& gt);
EstimateFile LoadEstimate(const std::filesystem::path& path);
void SaveEstimate(const std::filesystem::path& path, const EstimateFile& est);

}  // namespace cosy
