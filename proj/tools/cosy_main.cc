// cosy: multi-view multi-object pose scene solver.
//
//   cosy simulate --seed 1 --out-dir scene/
//   cosy solve --seed 1 --models scene/models.json
//       --observations scene/observations.json --out scene/estimate.json
//   cosy eval --models scene/models.json --predictions scene/estimate.json
//       --ground-truth scene/ground_truth.json
//   cosy report --estimate scene/estimate.json

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "cosy/errors.h"
#include "cosy/evaluation.h"
#include "cosy/pipeline.h"
#include "cosy/simulation.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitUnsolved = 3;

struct SimulateArgs {
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  cosy::ScenarioConfig scenario;
  cosy::NoiseModel noise;
  int symmetry_angles = cosy::kDefaultSymmetryAngles;
};

struct SolveArgs {
  std::string models, observations, out;
  int threads = 0;
  cosy::SolveConfig cfg;
};

struct EvalArgs {
  std::string models, predictions, ground_truth, out;
};

struct ReportArgs {
  std::string estimate, models, ground_truth;
};

int RunSimulate(const SimulateArgs& a) {
  cosy::ScenarioConfig scenario = a.scenario;
  scenario.seed = a.seed;
  scenario.Validate();
  a.noise.Validate();
  const cosy::ModelDb db = cosy::BuiltinModels();
  cosy::Rng scene_rng(cosy::DeriveSeed(a.seed, "scene"));
  cosy::GroundTruthFile gt = cosy::GenerateScene(scenario, db, scene_rng);
  cosy::Rng obs_rng(cosy::DeriveSeed(a.seed, "observations"));
  cosy::SimulatedObservations sim =
      cosy::GenerateObservations(gt, db, a.noise, obs_rng, a.symmetry_angles);
  gt.provenance = sim.provenance;

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  cosy::SaveModels(dir / "models.json", db);
  cosy::SaveObservations(dir / "observations.json", sim.obs);
  cosy::SaveGroundTruth(dir / "ground_truth.json", gt);

  std::size_t outliers = 0;
  for (int p : sim.provenance) outliers += p < 0;
  std::printf("views %zu  objects %zu  candidates %zu  outliers %zu\n",
              gt.views.size(), gt.objects.size(), sim.obs.candidates.size(),
              outliers);
  std::printf("wrote %s\n", dir.string().c_str());
  return kExitOk;
}

int RunSolve(const SolveArgs& a) {
  if (a.threads > 0) omp_set_num_threads(a.threads);
  const cosy::ModelDb db = cosy::LoadModels(a.models);
  const cosy::SceneObservations obs = cosy::LoadObservations(a.observations, db);
  const cosy::SolveOutput out = cosy::Solve(db, obs, a.cfg);
  cosy::SaveEstimate(a.out, out.estimate);

  for (const auto& [stage, seconds] : out.timings) {
    std::fprintf(stderr, "%-16s %9.3f s\n", stage.c_str(), seconds);
  }
  std::cout << out.estimate.stats.dump() << '\n';
  if (!out.solved) {
    std::fprintf(stderr, "no physical object found; wrote diagnostic %s\n",
                 a.out.c_str());
    return kExitUnsolved;
  }
  return kExitOk;
}

int RunEval(const EvalArgs& a) {
  const cosy::ModelDb db = cosy::LoadModels(a.models);
  const cosy::GroundTruthFile gt = cosy::LoadGroundTruth(a.ground_truth);
  const cosy::Json j = cosy::ReadJsonFile(a.predictions);
  const std::string format = j.value("format", "");

  cosy::Json report;
  std::vector<cosy::PosePrediction> preds;
  std::optional<cosy::EstimateFile> est;
  if (format == "cosy-estimate") {
    est = cosy::EstimateFromJson(j);
    preds = est->predictions;
  } else if (format == "cosy-observations") {
    preds = cosy::CandidatesAsPredictions(cosy::ObservationsFromJson(j, db));
  } else {
    throw cosy::SchemaError("predictions must be an estimate or observation file");
  }
  const cosy::MetricReport metrics = cosy::Evaluate(preds, gt, db);
  std::cout << cosy::FormatMetricReport(metrics);
  report = cosy::MetricReportToJson(metrics);
  if (est && !est->inlier_candidates.empty()) {
    const cosy::RefinementErrors r = cosy::CompareRefinement(*est, gt, db);
    std::cout << '\n' << cosy::FormatRefinementErrors(r);
    report["refinement"] = cosy::RefinementErrorsToJson(r);
  }
  if (!a.out.empty()) cosy::WriteJsonFile(a.out, report);
  return kExitOk;
}

int RunReport(const ReportArgs& a) {
  const cosy::EstimateFile est = cosy::LoadEstimate(a.estimate);
  std::printf("status      %s\n", est.status.c_str());
  std::printf("root view   %s\n", est.root_view.c_str());
  std::printf("cameras     %zu\n", est.cameras.size());
  std::printf("objects     %zu\n", est.objects.size());
  std::printf("predictions %zu\n", est.predictions.size());
  std::printf("inliers     %zu\n", est.inlier_candidates.size());
  if (!est.loss_trace.empty()) {
    std::printf("loss        %.6g -> %.6g px over %zu accepted steps\n",
                est.loss_trace.front(), est.loss_trace.back(),
                est.loss_trace.size() - 1);
  }
  for (const cosy::EstimatedObject& o : est.objects) {
    std::printf("  #%-3d %-12s score %6.3f  members %zu  t = (%.4f, %.4f, %.4f)\n",
                o.id, o.label.c_str(), o.score, o.members.size(),
                o.pose.translation.x(), o.pose.translation.y(),
                o.pose.translation.z());
  }
  if (!a.ground_truth.empty()) {
    if (a.models.empty()) throw cosy::SchemaError("--ground-truth needs --models");
    const cosy::ModelDb db = cosy::LoadModels(a.models);
    const cosy::GroundTruthFile gt = cosy::LoadGroundTruth(a.ground_truth);
    std::cout << '\n'
              << cosy::FormatRefinementErrors(cosy::CompareRefinement(est, gt, db));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view multi-object 6D pose scene solver"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene");
  simulate->add_option("--seed", sim.seed, "Random seed")->required();
  simulate->add_option("--out-dir", sim.out_dir, "Output directory")
      ->capture_default_str();
  simulate->add_option("--objects", sim.scenario.n_objects)->capture_default_str();
  simulate->add_option("--views", sim.scenario.n_views)->capture_default_str();
  simulate->add_option("--box-size", sim.scenario.box_size, "Meters")
      ->capture_default_str();
  simulate->add_option("--distance-min", sim.scenario.camera_distance_min)
      ->capture_default_str();
  simulate->add_option("--distance-max", sim.scenario.camera_distance_max)
      ->capture_default_str();
  simulate->add_option("--labels", sim.scenario.model_labels,
                       "Restrict to these model labels");
  simulate->add_option("--rot-sigma", sim.noise.rot_sigma_deg, "Degrees")
      ->capture_default_str();
  simulate->add_option("--trans-sigma", sim.noise.trans_sigma, "Meters")
      ->capture_default_str();
  simulate->add_option("--depth-sigma", sim.noise.depth_sigma_extra,
                       "Extra noise along the line of sight, meters")
      ->capture_default_str();
  simulate->add_option("--miss-prob", sim.noise.miss_prob)->capture_default_str();
  simulate->add_option("--outlier-prob", sim.noise.outlier_prob)
      ->capture_default_str();
  simulate->add_option("--label-confusion", sim.noise.label_confusion_prob)
      ->capture_default_str();
  simulate->add_flag("--random-symmetry", sim.noise.random_symmetry,
                     "Report candidates under a random object symmetry");
  simulate->add_option("--symmetry-angles", sim.symmetry_angles)
      ->capture_default_str();

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Match candidates and refine the scene");
  solve_cmd->add_option("--models", solve.models)->required()->check(CLI::ExistingFile);
  solve_cmd->add_option("--observations", solve.observations)
      ->required()
      ->check(CLI::ExistingFile);
  solve_cmd->add_option("--out", solve.out, "Estimate file")->required();
  solve_cmd->add_option("--seed", solve.cfg.seed, "Random seed")->required();
  solve_cmd->add_option("--threads", solve.threads, "Thread cap (0: OpenMP default)");
  solve_cmd->add_option("--min-score", solve.cfg.min_score)->capture_default_str();
  solve_cmd->add_option("--inlier-threshold", solve.cfg.match.inlier_threshold,
                        "Meters")
      ->capture_default_str();
  solve_cmd->add_option("--ransac-max-iters", solve.cfg.match.max_iterations)
      ->capture_default_str();
  solve_cmd->add_option("--min-inliers", solve.cfg.match.min_inliers)
      ->capture_default_str();
  solve_cmd->add_option("--lm-iters", solve.cfg.refine.max_iterations)
      ->capture_default_str();
  solve_cmd->add_option("--truncation", solve.cfg.refine.truncation, "Pixels")
      ->capture_default_str();
  solve_cmd->add_option("--damping-init", solve.cfg.refine.damping_init)
      ->capture_default_str();
  solve_cmd->add_option("--damping-factor", solve.cfg.refine.damping_factor)
      ->capture_default_str();
  solve_cmd->add_option("--rel-tol", solve.cfg.refine.rel_tol)->capture_default_str();
  solve_cmd->add_option("--symmetry-angles", solve.cfg.symmetry_angles)
      ->capture_default_str();
  solve_cmd->add_option("--nms-radius", solve.cfg.nms_radius, "Meters")
      ->capture_default_str();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--models", ev.models)->required()->check(CLI::ExistingFile);
  eval->add_option("--predictions", ev.predictions,
                   "Estimate or observation file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--ground-truth", ev.ground_truth)
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", ev.out, "Metric report file");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Summarize an estimate file");
  report->add_option("--estimate", rep.estimate)->required()->check(CLI::ExistingFile);
  report->add_option("--models", rep.models)->check(CLI::ExistingFile);
  report->add_option("--ground-truth", rep.ground_truth)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return RunSimulate(sim);
    if (*solve_cmd) return RunSolve(solve);
    if (*eval) return RunEval(ev);
    return RunReport(rep);
  } catch (const cosy::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
}
