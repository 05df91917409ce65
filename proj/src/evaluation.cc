#include "cosy/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cosy/errors.h"

namespace cosy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

const ObjectModel& FindModel(const ModelDb& db, const std::string& label) {
  const auto it = db.find(label);
  if (it == db.end()) throw UnknownLabel("no model for label '" + label + "'");
  return it->second;
}

// Indices sorted by descending score, ties by index.
template <typename T>
std::vector<std::size_t> ByScore(const std::vector<T>& items,
                                 const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> order = subset;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].score > items[b].score;
  });
  return order;
}

double MeanOf(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

bool IsSymmetric(const ObjectModel& model) {
  if (!model.symmetries.continuous_axes.empty()) return true;
  for (const Pose& d : model.symmetries.discrete) {
    if (!(d == Pose::Identity())) return true;
  }
  return false;
}

double AddError(const PointSet& points, const Pose& pred, const Pose& gt) {
  return kernels::MeanPointDistance(points, pred, gt);
}

double AddsError(const PointSet& points, const Pose& pred, const Pose& gt,
                 Exec exec) {
  if (exec == Exec::kParallel && points.cols() > 256) {
    return kernels::ClosestPointDistanceParallel(points, pred, gt);
  }
  return kernels::ClosestPointDistanceSerial(points, pred, gt);
}

double AddSAuc(std::vector<double> errors, double max_threshold) {
  if (errors.empty()) return 0.0;
  // Each error is counted for thresholds in (e, max].
  double sum = 0.0;
  for (double e : errors) {
    if (e < max_threshold) sum += (max_threshold - e) / max_threshold;
  }
  return sum / static_cast<double>(errors.size());
}

double RecallAtFractionOfDiameter(const std::vector<double>& errors,
                                  const std::vector<double>& diameters,
                                  double fraction) {
  if (errors.size() != diameters.size()) {
    throw InvariantError("errors and diameters differ in length");
  }
  if (errors.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i] < fraction * diameters[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(errors.size());
}

std::vector<GroundTruthInstance> VisibleInstances(const GroundTruthFile& gt) {
  std::vector<GroundTruthInstance> out;
  for (const View& v : gt.views) {
    const auto cam = gt.cameras.find(v.view_id);
    if (cam == gt.cameras.end()) {
      throw SchemaError("ground truth lacks camera '" + v.view_id + "'");
    }
    const Pose inv = Inverse(cam->second);
    for (const GroundTruthObject& o : gt.objects) {
      const Pose in_cam = Compose(inv, o.pose);
      if (InImage(v.intrinsics, in_cam.translation)) {
        out.push_back({v.view_id, o.label, in_cam, o.id});
      }
    }
  }
  return out;
}

std::vector<PosePrediction> CandidatesAsPredictions(const SceneObservations& obs) {
  std::vector<PosePrediction> out;
  for (const Candidate& c : obs.candidates) {
    out.push_back({c.view_id, c.label, c.score, c.pose, -1});
  }
  return out;
}

std::map<std::string, AveragePrecision> AveragePrecisionAdds(
    const std::vector<PosePrediction>& preds,
    const std::vector<GroundTruthInstance>& gts, const ModelDb& db,
    double fraction) {
  std::map<std::string, std::vector<std::size_t>> gt_by_label, pred_by_label;
  for (std::size_t i = 0; i < gts.size(); ++i) gt_by_label[gts[i].label].push_back(i);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_by_label[preds[i].label].push_back(i);
  }

  std::map<std::string, AveragePrecision> out;
  for (const auto& [label, gt_idx] : gt_by_label) {
    const ObjectModel& model = FindModel(db, label);
    const double gate = fraction * model.diameter;
    AveragePrecision& result = out[label];
    result.n_gt = gt_idx.size();
    const auto it = pred_by_label.find(label);
    if (it == pred_by_label.end()) continue;

    std::vector<char> taken(gts.size(), 0);
    std::vector<char> tp;
    for (std::size_t p : ByScore(preds, it->second)) {
      double best = kInf;
      std::size_t best_gt = 0;
      for (std::size_t g : gt_idx) {
        if (taken[g] || gts[g].view_id != preds[p].view_id) continue;
        const double e = AddsError(model.points, preds[p].pose, gts[g].pose);
        if (e < best) {
          best = e;
          best_gt = g;
        }
      }
      const bool hit = best < gate;
      if (hit) taken[best_gt] = 1;
      tp.push_back(hit ? 1 : 0);
    }

    // All-points interpolation: recall only moves at true positives, by
    // 1 / n_gt each.
    std::vector<double> precision;
    std::size_t n_tp = 0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      n_tp += tp[i];
      precision.push_back(static_cast<double>(n_tp) / static_cast<double>(i + 1));
    }
    for (std::size_t i = precision.size(); i-- > 1;) {
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      if (tp[i]) ap += precision[i] / static_cast<double>(result.n_gt);
    }
    result.ap = ap;
    result.n_true_positive = n_tp;
  }
  return out;
}

double MapAdds(const std::vector<PosePrediction>& preds,
               const std::vector<GroundTruthInstance>& gts, const ModelDb& db,
               double fraction) {
  const auto per_label = AveragePrecisionAdds(preds, gts, db, fraction);
  if (per_label.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [label, ap] : per_label) sum += ap.ap;
  return sum / static_cast<double>(per_label.size());
}

std::vector<std::size_t> Nms3d(const std::vector<NmsEntry>& entries,
                               double radius) {
  if (!(radius > 0.0)) throw InvariantError("NMS radius must be positive");
  std::vector<std::size_t> all(entries.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> kept;
  for (std::size_t i : ByScore(entries, all)) {
    bool suppressed = false;
    for (std::size_t k : kept) {
      if ((entries[i].center - entries[k].center).norm() < radius) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(i);
  }
  return kept;
}

MetricReport Evaluate(const std::vector<PosePrediction>& preds,
                      const GroundTruthFile& gt, const ModelDb& db) {
  const std::vector<GroundTruthInstance> gts = VisibleInstances(gt);
  MetricReport report;
  report.n_predictions = preds.size();
  report.n_gt = gts.size();

  using Key = std::pair<std::string, std::string>;  // (view, label)
  std::map<Key, std::vector<std::size_t>> gt_groups, pred_groups;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gt_groups[{gts[i].view_id, gts[i].label}].push_back(i);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_groups[{preds[i].view_id, preds[i].label}].push_back(i);
  }

  std::vector<double> adds(gts.size(), kInf), add(gts.size(), kInf);
  for (const auto& [key, gt_idx] : gt_groups) {
    const auto it = pred_groups.find(key);
    if (it == pred_groups.end()) continue;
    const ObjectModel& model = FindModel(db, key.second);
    std::vector<std::size_t> top = ByScore(preds, it->second);
    if (top.size() > gt_idx.size()) top.resize(gt_idx.size());
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t p : top) {
      for (std::size_t g : gt_idx) {
        pairs.emplace_back(AddsError(model.points, preds[p].pose, gts[g].pose), p, g);
      }
    }
    std::sort(pairs.begin(), pairs.end());
    std::vector<char> used_pred(preds.size(), 0), used_gt(gts.size(), 0);
    const bool symmetric = IsSymmetric(model);
    for (const auto& [e, p, g] : pairs) {
      if (used_pred[p] || used_gt[g]) continue;
      used_pred[p] = used_gt[g] = 1;
      adds[g] = e;
      add[g] = symmetric ? e : AddError(model.points, preds[p].pose, gts[g].pose);
    }
  }

  const auto aps = AveragePrecisionAdds(preds, gts, db);
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < gts.size(); ++i) by_label[gts[i].label].push_back(i);
  std::vector<double> all_add, all_adds, pooled;
  double recall_sum = 0.0;
  for (const auto& [label, idx] : by_label) {
    const double diameter = FindModel(db, label).diameter;
    LabelMetrics m;
    m.label = label;
    m.n_gt = idx.size();
    std::vector<double> l_add, l_adds, l_all, diam;
    for (std::size_t g : idx) {
      l_all.push_back(adds[g]);
      diam.push_back(diameter);
      pooled.push_back(adds[g]);
      if (std::isfinite(adds[g])) {
        l_add.push_back(add[g]);
        l_adds.push_back(adds[g]);
        all_add.push_back(add[g]);
        all_adds.push_back(adds[g]);
      }
    }
    m.n_matched = l_adds.size();
    m.mean_add = MeanOf(l_add);
    m.mean_adds = MeanOf(l_adds);
    m.auc_adds = AddSAuc(l_all);
    m.recall_0p1d = RecallAtFractionOfDiameter(l_all, diam);
    m.ap_adds = aps.at(label).ap;
    recall_sum += m.recall_0p1d;
    report.n_matched += m.n_matched;
    report.labels.push_back(m);
  }
  report.mean_add = MeanOf(all_add);
  report.mean_adds = MeanOf(all_adds);
  report.auc_adds = AddSAuc(pooled);
  report.recall_0p1d =
      by_label.empty() ? 0.0 : recall_sum / static_cast<double>(by_label.size());
  report.map_adds = MapAdds(preds, gts, db);
  return report;
}

Json MetricReportToJson(const MetricReport& r) {
  Json labels = Json::array();
  for (const LabelMetrics& m : r.labels) {
    labels.push_back({{"label", m.label},
                      {"n_gt", m.n_gt},
                      {"n_matched", m.n_matched},
                      {"add", m.mean_add},
                      {"adds", m.mean_adds},
                      {"auc_adds", m.auc_adds},
                      {"recall_0p1d", m.recall_0p1d},
                      {"ap_adds", m.ap_adds}});
  }
  return {{"format", "cosy-metrics"},
          {"version", 1},
          {"n_gt", r.n_gt},
          {"n_matched", r.n_matched},
          {"n_predictions", r.n_predictions},
          {"add", r.mean_add},
          {"adds", r.mean_adds},
          {"auc_adds", r.auc_adds},
          {"recall_0p1d", r.recall_0p1d},
          {"map_adds", r.map_adds},
          {"labels", labels}};
}

std::string FormatMetricReport(const MetricReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %5s %5s %10s %10s %8s %8s %8s\n",
                "label", "gt", "match", "ADD(-S)mm", "ADD-S mm", "AUC", "<0.1d",
                "AP");
  os << line;
  auto row = [&](const std::string& name, std::size_t n_gt, std::size_t n_m,
                 double add, double adds, double auc, double rec, double ap) {
    std::snprintf(line, sizeof line,
                  "%-16s %5zu %5zu %10.2f %10.2f %8.4f %8.4f %8.4f\n",
                  name.c_str(), n_gt, n_m, add * 1e3, adds * 1e3, auc, rec, ap);
    os << line;
  };
  for (const LabelMetrics& m : r.labels) {
    row(m.label, m.n_gt, m.n_matched, m.mean_add, m.mean_adds, m.auc_adds,
        m.recall_0p1d, m.ap_adds);
  }
  row("all", r.n_gt, r.n_matched, r.mean_add, r.mean_adds, r.auc_adds,
      r.recall_0p1d, r.map_adds);
  return os.str();
}

RefinementErrors CompareRefinement(const EstimateFile& est,
                                   const GroundTruthFile& gt,
                                   const ModelDb& db) {
  std::map<int, const GroundTruthObject*> objects;
  for (const GroundTruthObject& o : gt.objects) objects[o.id] = &o;
  RefinementErrors r;
  std::vector<double> before_gated, after_gated;
  for (const InlierRecord& rec : est.inlier_candidates) {
    ++r.n_inliers;
    if (rec.candidate_index >= gt.provenance.size()) {
      throw SchemaError("inlier candidate index outside the provenance list");
    }
    const int source = gt.provenance[rec.candidate_index];
    const auto obj = objects.find(source);
    if (obj == objects.end() || obj->second->label != rec.label) continue;
    const auto cam = gt.cameras.find(rec.view_id);
    if (cam == gt.cameras.end()) {
      throw SchemaError("ground truth lacks camera '" + rec.view_id + "'");
    }
    const ObjectModel& model = FindModel(db, rec.label);
    const Pose truth = Compose(Inverse(cam->second), obj->second->pose);
    const double before = AddsError(model.points, rec.before, truth);
    const double after = AddsError(model.points, rec.after, truth);
    r.before.push_back(before);
    r.after.push_back(after);
    if (before < 0.5 * model.diameter) before_gated.push_back(before);
    if (after < 0.5 * model.diameter) after_gated.push_back(after);
  }
  r.n_scored = r.before.size();
  r.mean_before = MeanOf(r.before);
  r.mean_after = MeanOf(r.after);
  r.n_before_gated = before_gated.size();
  r.n_after_gated = after_gated.size();
  r.mean_before_gated = MeanOf(before_gated);
  r.mean_after_gated = MeanOf(after_gated);
  return r;
}

Json RefinementErrorsToJson(const RefinementErrors& r) {
  return {{"format", "cosy-refinement-errors"},
          {"version", 1},
          {"n_inliers", r.n_inliers},
          {"n_scored", r.n_scored},
          {"mean_before", r.mean_before},
          {"mean_after", r.mean_after},
          {"n_before_gated", r.n_before_gated},
          {"n_after_gated", r.n_after_gated},
          {"mean_before_gated", r.mean_before_gated},
          {"mean_after_gated", r.mean_after_gated}};
}

std::string FormatRefinementErrors(const RefinementErrors& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "ADD-S errors (mm) of %zu scored inliers (of %zu)\n"
                "%-28s %10s %10s\n"
                "%-28s %10.2f %10.2f\n"
                "%-28s %10.2f %10.2f   (n = %zu / %zu)\n",
                r.n_scored, r.n_inliers, "", "single-view", "refined",
                "all", r.mean_before * 1e3, r.mean_after * 1e3,
                "below half diameter", r.mean_before_gated * 1e3,
                r.mean_after_gated * 1e3, r.n_before_gated, r.n_after_gated);
  return buf;
}

}  // namespace cosy
