#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cosy/kernels.h"
#include "cosy/scene_io.h"

namespace cosy {

inline constexpr double kAucMaxThreshold = 0.10;  // meters
inline constexpr double kDiameterFraction = 0.1;
inline constexpr double kDefaultNmsRadius = 0.02;  // meters

// True when the model lists a continuous axis or a non-identity element.
bool IsSymmetric(const ObjectModel& model);

// Mean over model points of |pred x - gt x|.
double AddError(const PointSet& points, const Pose& pred, const Pose& gt);
// Mean over model points of the distance from gt x to the closest pred y.
double AddsError(const PointSet& points, const Pose& pred, const Pose& gt,
                 Exec exec = Exec::kParallel);

// Normalized area under fraction(errors < t) for t in [0, max_threshold],
// in closed form. Empty input gives 0.
double AddSAuc(std::vector<double> errors,
               double max_threshold = kAucMaxThreshold);

// Fraction of errors strictly below fraction * diameter.
double RecallAtFractionOfDiameter(const std::vector<double>& errors,
                                  const std::vector<double>& diameters,
                                  double fraction = kDiameterFraction);

// A ground-truth object seen from one camera.
struct GroundTruthInstance {
  std::string view_id;
  std::string label;
  Pose pose;  // camera frame
  int object_id = 0;
};

// Objects whose center projects inside a view, per view in file order.
std::vector<GroundTruthInstance> VisibleInstances(const GroundTruthFile& gt);

// Candidates of an observation file as predictions.
std::vector<PosePrediction> CandidatesAsPredictions(const SceneObservations& obs);

struct AveragePrecision {
  double ap = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_true_positive = 0;
};

// Detection-style AP per label with ADD-S < fraction * diameter as the true
// positive test. Predictions are visited by descending score (ties by input
// order) and claim the unmatched same-view, same-label ground truth with the
// smallest ADD-S. Precision is made monotone before integrating over recall.
std::map<std::string, AveragePrecision> AveragePrecisionAdds(
    const std::vector<PosePrediction>& preds,
    const std::vector<GroundTruthInstance>& gts, const ModelDb& db,
    double fraction = kDiameterFraction);
// Mean AP over labels present in the ground truth; 0 when there is none.
double MapAdds(const std::vector<PosePrediction>& preds,
               const std::vector<GroundTruthInstance>& gts, const ModelDb& db,
               double fraction = kDiameterFraction);

struct NmsEntry {
  Vec3 center;
  double score = 0.0;
};

// Greedy suppression by descending score (ties by index). Returns kept
// indices in visiting order; no two kept centers are closer than radius.
std::vector<std::size_t> Nms3d(const std::vector<NmsEntry>& entries,
                               double radius = kDefaultNmsRadius);

struct LabelMetrics {
  std::string label;
  std::size_t n_gt = 0;
  std::size_t n_matched = 0;
  double mean_add = 0.0;   // ADD(-S), over matched instances
  double mean_adds = 0.0;  // over matched instances
  double auc_adds = 0.0;
  double recall_0p1d = 0.0;
  double ap_adds = 0.0;
};

struct MetricReport {
  std::vector<LabelMetrics> labels;  // sorted by label
  std::size_t n_gt = 0;
  std::size_t n_matched = 0;
  std::size_t n_predictions = 0;
  double mean_add = 0.0;
  double mean_adds = 0.0;
  double auc_adds = 0.0;     // pooled over instances
  double recall_0p1d = 0.0;  // mean over labels
  double map_adds = 0.0;
};

// Per (view, label) the top-#GT predictions by score are paired one-to-one
// with ground truth by ascending ADD-S. Unmatched ground truth counts with
// infinite error.
MetricReport Evaluate(const std::vector<PosePrediction>& preds,
                      const GroundTruthFile& gt, const ModelDb& db);
Json MetricReportToJson(const MetricReport& report);
std::string FormatMetricReport(const MetricReport& report);

// Single-view versus refined ADD-S of every inlier candidate with a
// ground-truth source.
struct RefinementErrors {
  std::size_t n_inliers = 0;
  std::size_t n_scored = 0;  // with a same-label ground-truth source
  double mean_before = 0.0;
  double mean_after = 0.0;
  // Means restricted to errors below half the diameter, gated separately.
  std::size_t n_before_gated = 0;
  std::size_t n_after_gated = 0;
  double mean_before_gated = 0.0;
  double mean_after_gated = 0.0;
  std::vector<double> before;  // per scored inlier, meters
  std::vector<double> after;
};

RefinementErrors CompareRefinement(const EstimateFile& est,
                                   const GroundTruthFile& gt,
                                   const ModelDb& db);
Json RefinementErrorsToJson(const RefinementErrors& r);
std::string FormatRefinementErrors(const RefinementErrors& r);

}  // namespace cosy
