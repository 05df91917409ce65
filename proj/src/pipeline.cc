#include "cosy/pipeline.h"

#include <algorithm>
#include <chrono>

#include "cosy/errors.h"

namespace cosy {

void SolveConfig::Validate() const {
  if (!(min_score >= 0.0 && min_score <= 1.0)) {
    throw InvariantError("min score must lie in [0, 1]");
  }
  if (symmetry_angles < 1) throw InvariantError("symmetry angles must be >= 1");
  if (!(nms_radius > 0.0)) throw InvariantError("NMS radius must be > 0");
  match.Validate();
  refine.Validate();
}

Json SolveConfig::ToJson() const {
  return {{"min_score", min_score},
          {"symmetry_angles", symmetry_angles},
          {"nms_radius", nms_radius},
          {"inlier_threshold", match.inlier_threshold},
          {"ransac_max_iters", match.max_iterations},
          {"min_inliers", match.min_inliers},
          {"lm_iters", refine.max_iterations},
          {"truncation", refine.truncation},
          {"damping_init", refine.damping_init},
          {"damping_factor", refine.damping_factor},
          {"rel_tol", refine.rel_tol},
          {"seed", seed}};
}

namespace {

class StageTimer {
 public:
  explicit StageTimer(std::vector<std::pair<std::string, double>>* out)
      : out_(out), start_(Clock::now()) {}
  void Lap(const std::string& stage) {
    const auto now = Clock::now();
    out_->emplace_back(stage, std::chrono::duration<double>(now - start_).count());
    start_ = now;
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::vector<std::pair<std::string, double>>* out_;
  Clock::time_point start_;
};

}  // namespace

SolveOutput Solve(const ModelDb& db, const SceneObservations& obs,
                  const SolveConfig& cfg, Exec exec) {
  cfg.Validate();
  SolveOutput out;
  EstimateFile& est = out.estimate;
  est.config = cfg.ToJson();
  StageTimer timer(&out.timings);

  const PreparedModels models = PrepareModels(db, cfg.symmetry_angles);
  SceneObservations filtered;
  filtered.views = obs.views;
  std::vector<std::size_t> original;
  for (std::size_t i = 0; i < obs.candidates.size(); ++i) {
    if (obs.candidates[i].score > cfg.min_score) {
      filtered.candidates.push_back(obs.candidates[i]);
      original.push_back(i);
    }
  }
  timer.Lap("prepare");

  MatchParams match = cfg.match;
  match.seed = DeriveSeed(cfg.seed, "matching");
  const MatchGraph graph = BuildMatchGraph(filtered, models, match, exec);
  const std::vector<PhysicalObject> objects = ExtractPhysicalObjects(graph);
  timer.Lap("matching");

  est.stats = {{"n_candidates", obs.candidates.size()},
               {"n_filtered", filtered.candidates.size()},
               {"n_view_pairs_accepted", graph.hypotheses.size()},
               {"n_edges", graph.edges.size()},
               {"n_components", objects.size()}};
  if (objects.empty()) {
    est.status = "unsolvable";
    return out;
  }

  Rng rng(DeriveSeed(cfg.seed, "initialization"));
  const InitResult init = InitializeScene(objects, graph.hypotheses, filtered, rng);
  timer.Lap("initialization");

  RefineConfig refine_cfg = cfg.refine;
  refine_cfg.seed = DeriveSeed(cfg.seed, "refinement");
  const RefineResult refined =
      Refine(init.state, init.objects, filtered, models, refine_cfg, exec);
  const SceneState& state = refined.state;
  timer.Lap("refinement");

  std::vector<NmsEntry> entries;
  for (const PhysicalObject& o : init.objects) {
    double score = 0.0;
    for (const auto& m : o.members) score += filtered.candidates[m.second].score;
    entries.push_back({state.object_poses.at(o.id).translation, score});
  }
  std::vector<std::size_t> kept = Nms3d(entries, cfg.nms_radius);
  std::sort(kept.begin(), kept.end());
  std::vector<PhysicalObject> survivors;
  for (std::size_t i : kept) survivors.push_back(init.objects[i]);

  est.root_view = state.root_view;
  est.cameras = state.camera_poses;
  est.loss_trace = refined.loss_trace;
  std::size_t n_inliers = 0;
  for (std::size_t n = 0; n < survivors.size(); ++n) {
    const PhysicalObject& o = survivors[n];
    EstimatedObject e;
    e.id = o.id;
    e.label = o.label;
    e.pose = state.object_poses.at(o.id);
    e.score = entries[kept[n]].score;
    for (const auto& [view, idx] : o.members) {
      e.members.emplace_back(view, original[idx]);
      const Pose after = Compose(Inverse(state.camera_poses.at(view)), e.pose);
      est.inlier_candidates.push_back(
          {view, o.label, original[idx], o.id, filtered.candidates[idx].pose, after});
      ++n_inliers;
    }
    est.objects.push_back(std::move(e));
  }
  for (PosePrediction& p : ExpressInCameraFrames(state, survivors, filtered)) {
    if (InImage(filtered.FindView(p.view_id).intrinsics, p.pose.translation)) {
      est.predictions.push_back(std::move(p));
    }
  }
  timer.Lap("output");

  est.stats["n_objects"] = init.objects.size();
  est.stats["n_objects_after_nms"] = survivors.size();
  est.stats["n_inliers"] = n_inliers;
  est.stats["disconnected_views"] = init.disconnected_views;
  est.stats["initial_loss"] = refined.loss_trace.front();
  est.stats["final_loss"] = refined.loss_trace.back();
  est.stats["lm_iterations"] = refined.iterations;
  est.stats["lm_stop_reason"] = refined.stop_reason;
  out.solved = true;
  return out;
}

}  // namespace cosy
