#include "cosy/refinement.h"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cosy/errors.h"

namespace cosy {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// IRLS weights use 1 / max(|e|, kMinResidualNorm).
constexpr double kMinResidualNorm = 1e-6;
constexpr int kMaxRejectedSteps = 12;

// Projections with NaN columns for points behind the camera.
PixelSet ProjectOrNaN(const CameraIntrinsics& k, const Pose& pose,
                      const PointSet& pts) {
  PixelSet out(2, pts.cols());
  for (Eigen::Index i = 0; i < pts.cols(); ++i) {
    Vec2 uv;
    if (ProjectPoint(k, pose * Vec3(pts.col(i)), &uv)) {
      out.col(i) = uv;
    } else {
      out.col(i).setConstant(kNaN);
    }
  }
  return out;
}

double TruncatedMean(const PixelSet& measured, const PixelSet& predicted,
                     double truncation) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < measured.cols(); ++i) {
    const double dx = measured(0, i) - predicted(0, i);
    const double dy = measured(1, i) - predicted(1, i);
    const double n = std::sqrt(dx * dx + dy * dy);
    // NaN (behind a camera) fails the comparison and saturates.
    sum += (n < truncation) ? n : truncation;
  }
  return sum / static_cast<double>(measured.cols());
}

Pose RelativeObjectPose(const SceneState& state, const std::string& view,
                        int object_id) {
  const auto cam = state.camera_poses.find(view);
  const auto obj = state.object_poses.find(object_id);
  if (cam == state.camera_poses.end() || obj == state.object_poses.end()) {
    throw InvariantError("scene state lacks the camera or object of a member");
  }
  return Compose(Inverse(cam->second), obj->second);
}

// One (candidate, physical object) summand of the objective.
struct Term {
  std::size_t candidate = 0;
  int object_id = 0;
  std::string view;
  const PreparedModel* model = nullptr;
  const CameraIntrinsics* intrinsics = nullptr;
  std::vector<PixelSet> measured;  // one per symmetry element
};

std::vector<Term> MakeTerms(const std::vector<PhysicalObject>& objects,
                            const SceneObservations& obs,
                            const PreparedModels& models) {
  std::vector<Term> terms;
  for (const PhysicalObject& o : objects) {
    for (const auto& [view, idx] : o.members) {
      Term t;
      t.candidate = idx;
      t.object_id = o.id;
      t.view = view;
      t.model = &Lookup(models, o.label);
      t.intrinsics = &obs.FindView(view).intrinsics;
      terms.push_back(std::move(t));
    }
  }
  return terms;
}

void FillMeasurements(std::vector<Term>& terms, const SceneObservations& obs,
                      Exec exec) {
  kernels::ForEachIndex(exec, static_cast<std::ptrdiff_t>(terms.size()),
                        [&](std::ptrdiff_t i) {
                          Term& t = terms[i];
                          const Pose& pose = obs.candidates[t.candidate].pose;
                          t.measured.resize(t.model->group.size());
                          for (std::size_t s = 0; s < t.model->group.size(); ++s) {
                            t.measured[s] = ProjectOrNaN(
                                *t.intrinsics, Compose(pose, t.model->group.elements[s]),
                                t.model->sample);
                          }
                        });
}

struct Selection {
  double loss = 0.0;
  std::size_t symmetry = 0;
};

Selection SelectSymmetry(const Term& t, const SceneState& state,
                         double truncation) {
  const PixelSet predicted =
      ProjectOrNaN(*t.intrinsics, RelativeObjectPose(state, t.view, t.object_id),
                   t.model->sample);
  Selection best{TruncatedMean(t.measured[0], predicted, truncation), 0};
  for (std::size_t s = 1; s < t.measured.size(); ++s) {
    const double l = TruncatedMean(t.measured[s], predicted, truncation);
    if (l < best.loss) best = {l, s};
  }
  return best;
}

double FrozenLoss(const Term& t, const SceneState& state, std::size_t symmetry,
                  double truncation) {
  const PixelSet predicted =
      ProjectOrNaN(*t.intrinsics, RelativeObjectPose(state, t.view, t.object_id),
                   t.model->sample);
  return TruncatedMean(t.measured[symmetry], predicted, truncation);
}

}  // namespace

void RefineConfig::Validate() const {
  if (max_iterations < 1 || !(truncation > 0.0) || !(damping_init > 0.0) ||
      !(damping_factor > 1.0) || !(rel_tol > 0.0)) {
    throw InvariantError(
        "refine config needs positive iterations, truncation, damping, "
        "tolerance and a damping factor > 1");
  }
}

InitResult InitializeScene(const std::vector<PhysicalObject>& objects,
                           const std::vector<TwoViewHypothesis>& hypotheses,
                           const SceneObservations& obs, Rng& rng) {
  std::vector<std::string> views;
  for (const View& v : obs.views) views.push_back(v.view_id);
  std::sort(views.begin(), views.end());

  // View components under the hypothesis graph.
  std::map<std::string, std::string> comp;
  for (const auto& v : views) comp[v] = v;
  auto find = [&](std::string v) {
    while (comp[v] != v) v = comp[v];
    return v;
  };
  for (const TwoViewHypothesis& h : hypotheses) {
    const std::string ra = find(h.view_a), rb = find(h.view_b);
    if (ra != rb) comp[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::map<std::string, std::size_t> members_per_comp;
  std::map<std::string, std::size_t> members_per_view;
  for (const PhysicalObject& o : objects) {
    for (const auto& [view, idx] : o.members) {
      ++members_per_comp[find(view)];
      ++members_per_view[view];
    }
  }

  InitResult result;
  if (members_per_comp.empty()) {
    if (!views.empty()) {
      result.state.root_view = views.front();
      result.state.camera_poses[views.front()] = Pose::Identity();
    }
    return result;
  }
  // Largest component; std::map iteration makes the smallest root win ties.
  std::string best_comp;
  std::size_t best_count = 0;
  for (const auto& [c, count] : members_per_comp) {
    if (count > best_count) {
      best_comp = c;
      best_count = count;
    }
  }
  std::vector<std::string> root_choices;
  for (const auto& [view, count] : members_per_view) {
    if (find(view) == best_comp) root_choices.push_back(view);
  }
  SceneState& state = result.state;
  state.root_view = root_choices[rng.UniformIndex(root_choices.size())];
  state.camera_poses[state.root_view] = Pose::Identity();

  bool progress = true;
  while (progress) {
    progress = false;
    for (const std::string& v : views) {
      if (state.camera_poses.count(v) != 0) continue;
      // (placed neighbour pose, T_{C_neighbour C_v})
      std::vector<std::pair<std::string, Pose>> links;
      for (const TwoViewHypothesis& h : hypotheses) {
        if (h.view_b == v && state.camera_poses.count(h.view_a) != 0) {
          links.emplace_back(h.view_a, h.relative_pose);
        } else if (h.view_a == v && state.camera_poses.count(h.view_b) != 0) {
          links.emplace_back(h.view_b, Inverse(h.relative_pose));
        }
      }
      if (links.empty()) continue;
      const auto& [from, rel] = links[rng.UniformIndex(links.size())];
      Pose placed = Compose(state.camera_poses.at(from), rel);
      if (!IsRotation(placed.rotation)) placed.rotation = Orthonormalize(placed.rotation);
      state.camera_poses[v] = placed;
      progress = true;
    }
  }

  std::set<std::string> disconnected;
  for (const PhysicalObject& o : objects) {
    PhysicalObject kept = o;
    kept.members.clear();
    for (const auto& m : o.members) {
      if (state.camera_poses.count(m.first) != 0) {
        kept.members.push_back(m);
      } else {
        disconnected.insert(m.first);
      }
    }
    if (kept.members.empty()) continue;
    const auto& [view, idx] = kept.members[rng.UniformIndex(kept.members.size())];
    state.object_poses[kept.id] =
        Compose(state.camera_poses.at(view), obs.candidates[idx].pose);
    result.objects.push_back(std::move(kept));
  }
  result.disconnected_views.assign(disconnected.begin(), disconnected.end());
  return result;
}

ResidualBlock EvaluateResidualBlock(const SceneState& state,
                                    std::size_t candidate_index, int object_id,
                                    const SceneObservations& obs,
                                    const PreparedModels& models,
                                    double truncation,
                                    std::size_t symmetry_index) {
  const Candidate& cand = obs.candidates[candidate_index];
  const PreparedModel& model = Lookup(models, cand.label);
  const CameraIntrinsics& k = obs.FindView(cand.view_id).intrinsics;
  const Pose& camera = state.camera_poses.at(cand.view_id);
  const Pose& object = state.object_poses.at(object_id);
  const Pose measured_pose =
      Compose(cand.pose, model.group.elements.at(symmetry_index));
  const Mat3 rct = camera.rotation.transpose();

  const Eigen::Index n = model.sample.cols();
  ResidualBlock b;
  b.residual = Eigen::VectorXd::Zero(2 * n);
  b.d_camera = Eigen::Matrix<double, Eigen::Dynamic, 6>::Zero(2 * n, 6);
  b.d_object = Eigen::Matrix<double, Eigen::Dynamic, 6>::Zero(2 * n, 6);
  b.active.assign(static_cast<std::size_t>(n), 0);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 x = model.sample.col(i);
    const Vec3 world = object * x;
    const Vec3 q = rct * (world - camera.translation);
    Vec2 um, up;
    if (!ProjectPoint(k, measured_pose * x, &um) || !ProjectPoint(k, q, &up)) {
      sum += truncation;
      continue;
    }
    const Vec2 e = um - up;
    const double norm = e.norm();
    if (!(norm < truncation)) {
      sum += truncation;
      continue;
    }
    sum += norm;
    b.active[static_cast<std::size_t>(i)] = 1;
    b.residual.segment<2>(2 * i) = e;

    const double iz = 1.0 / q.z();
    Eigen::Matrix<double, 2, 3> dpi;
    dpi << k.fx * iz, 0.0, -k.fx * q.x() * iz * iz,  //
        0.0, k.fy * iz, -k.fy * q.y() * iz * iz;
    // dq/d(w_c, v_c) = [R_c^T [y]x, -R_c^T]; the object derivative is its
    // negation since only T_c^-1 T_p enters the residual.
    Eigen::Matrix<double, 3, 6> dq;
    dq.leftCols<3>() = rct * Skew(world);
    dq.rightCols<3>() = -rct;
    const Eigen::Matrix<double, 2, 6> jc = -dpi * dq;
    b.d_camera.middleRows<2>(2 * i) = jc;
    b.d_object.middleRows<2>(2 * i) = -jc;
  }
  b.loss = sum / static_cast<double>(n);
  return b;
}

double CandidateLoss(const SceneState& state, std::size_t candidate_index,
                     const PhysicalObject& object, const SceneObservations& obs,
                     const PreparedModels& models, double truncation) {
  const Candidate& cand = obs.candidates[candidate_index];
  Term t;
  t.candidate = candidate_index;
  t.object_id = object.id;
  t.view = cand.view_id;
  t.model = &Lookup(models, object.label);
  t.intrinsics = &obs.FindView(cand.view_id).intrinsics;
  std::vector<Term> one{std::move(t)};
  FillMeasurements(one, obs, Exec::kSerial);
  return SelectSymmetry(one.front(), state, truncation).loss;
}

double TotalLoss(const SceneState& state,
                 const std::vector<PhysicalObject>& objects,
                 const SceneObservations& obs, const PreparedModels& models,
                 const RefineConfig& cfg, Exec exec) {
  std::vector<Term> terms = MakeTerms(objects, obs, models);
  FillMeasurements(terms, obs, exec);
  std::vector<double> losses(terms.size());
  kernels::ForEachIndex(exec, static_cast<std::ptrdiff_t>(terms.size()),
                        [&](std::ptrdiff_t i) {
                          losses[i] = SelectSymmetry(terms[i], state, cfg.truncation).loss;
                        });
  double total = 0.0;
  for (double l : losses) total += l;
  return total;
}

RefineResult Refine(const SceneState& input,
                    const std::vector<PhysicalObject>& objects,
                    const SceneObservations& obs, const PreparedModels& models,
                    const RefineConfig& cfg, Exec exec) {
  cfg.Validate();
  RefineResult result;
  result.state = input;
  SceneState& state = result.state;

  std::vector<Term> terms = MakeTerms(objects, obs, models);
  FillMeasurements(terms, obs, exec);

  // Parameter layout: free cameras (sorted ids), then objects (sorted ids).
  std::map<std::string, Eigen::Index> cam_offset;
  std::map<int, Eigen::Index> obj_offset;
  Eigen::Index dim = 0;
  for (const auto& [view, pose] : state.camera_poses) {
    if (view != state.root_view) {
      cam_offset[view] = dim;
      dim += 6;
    }
  }
  for (const auto& [id, pose] : state.object_poses) {
    obj_offset[id] = dim;
    dim += 6;
  }

  const auto n_terms = static_cast<std::ptrdiff_t>(terms.size());
  std::vector<Selection> selection(terms.size());
  auto select_all = [&]() {
    kernels::ForEachIndex(exec, n_terms, [&](std::ptrdiff_t i) {
      selection[i] = SelectSymmetry(terms[i], state, cfg.truncation);
    });
    double total = 0.0;
    for (const Selection& s : selection) total += s.loss;
    return total;
  };

  double loss = select_all();
  result.loss_trace.push_back(loss);
  if (terms.empty() || dim == 0) {
    result.stop_reason = "no free parameters";
    return result;
  }

  double lambda = cfg.damping_init;
  std::vector<Eigen::Matrix<double, 6, 6>> block_h(terms.size());
  std::vector<Vec6> block_g(terms.size());
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (loss == 0.0) {
      result.stop_reason = "zero loss";
      break;
    }
    result.iterations = iter + 1;

    // Per-term normal-equation blocks with IRLS weights for the
    // sum-of-norms objective. d_object = -d_camera, so one 6x6 block and
    // one gradient suffice per term.
    kernels::ForEachIndex(exec, n_terms, [&](std::ptrdiff_t i) {
      const Term& t = terms[i];
      const ResidualBlock b = EvaluateResidualBlock(
          state, t.candidate, t.object_id, obs, models, cfg.truncation,
          selection[i].symmetry);
      const double scale = 1.0 / static_cast<double>(b.active.size());
      Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
      Vec6 g = Vec6::Zero();
      for (std::size_t p = 0; p < b.active.size(); ++p) {
        if (!b.active[p]) continue;
        const auto row = static_cast<Eigen::Index>(2 * p);
        const Vec2 e = b.residual.segment<2>(row);
        const double w = scale / std::max(e.norm(), kMinResidualNorm);
        const auto j = b.d_camera.middleRows<2>(row);
        h.noalias() += w * j.transpose() * j;
        g.noalias() += w * j.transpose() * e;
      }
      block_h[i] = h;
      block_g[i] = g;
    });

    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim);
    for (std::ptrdiff_t i = 0; i < n_terms; ++i) {
      const Term& t = terms[i];
      const Eigen::Index o = obj_offset.at(t.object_id);
      hess.block<6, 6>(o, o) += block_h[i];
      grad.segment<6>(o) -= block_g[i];
      const auto c = cam_offset.find(t.view);
      if (c != cam_offset.end()) {
        hess.block<6, 6>(c->second, c->second) += block_h[i];
        hess.block<6, 6>(c->second, o) -= block_h[i];
        hess.block<6, 6>(o, c->second) -= block_h[i];
        grad.segment<6>(c->second) += block_g[i];
      }
    }
    Eigen::VectorXd diag = hess.diagonal();
    const double diag_floor = std::max(1e-12 * diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(diag_floor);

    bool accepted = false;
    double new_loss = loss;
    for (int attempt = 0; attempt < kMaxRejectedSteps; ++attempt) {
      Eigen::MatrixXd damped = hess;
      damped.diagonal() += lambda * diag;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(damped);
      const Eigen::VectorXd step = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !step.allFinite()) {
        lambda *= cfg.damping_factor;
        continue;
      }
      SceneState trial = state;
      for (const auto& [view, off] : cam_offset) {
        Pose& p = trial.camera_poses.at(view);
        p = Retract(p, step.segment<6>(off));
        if (!IsRotation(p.rotation)) p.rotation = Orthonormalize(p.rotation);
      }
      for (const auto& [id, off] : obj_offset) {
        Pose& p = trial.object_poses.at(id);
        p = Retract(p, step.segment<6>(off));
        if (!IsRotation(p.rotation)) p.rotation = Orthonormalize(p.rotation);
      }
      // Symmetries stay frozen for the acceptance test; re-selecting at the
      // new state can only lower the loss further.
      std::vector<double> frozen(terms.size());
      kernels::ForEachIndex(exec, n_terms, [&](std::ptrdiff_t i) {
        frozen[i] = FrozenLoss(terms[i], trial, selection[i].symmetry, cfg.truncation);
      });
      double trial_loss = 0.0;
      for (double l : frozen) trial_loss += l;
      if (trial_loss < loss) {
        state = std::move(trial);
        lambda = std::max(lambda / cfg.damping_factor, 1e-15);
        accepted = true;
        break;
      }
      lambda *= cfg.damping_factor;
    }
    if (!accepted) {
      result.stop_reason = "no decreasing step";
      break;
    }
    new_loss = select_all();
    result.loss_trace.push_back(new_loss);
    const double rel = (loss - new_loss) / loss;
    loss = new_loss;
    if (rel < cfg.rel_tol) {
      result.stop_reason = "relative decrease below tolerance";
      break;
    }
  }
  if (result.stop_reason.empty()) result.stop_reason = "max iterations";
  return result;
}

std::vector<PosePrediction> ExpressInCameraFrames(
    const SceneState& state, const std::vector<PhysicalObject>& objects,
    const SceneObservations& obs) {
  std::vector<PosePrediction> out;
  for (const auto& [view, camera] : state.camera_poses) {
    const Pose inv = Inverse(camera);
    for (const PhysicalObject& o : objects) {
      const auto it = state.object_poses.find(o.id);
      if (it == state.object_poses.end()) continue;
      double score = 0.0;
      for (const auto& m : o.members) score += obs.candidates[m.second].score;
      out.push_back({view, o.label, score, Compose(inv, it->second), o.id});
    }
  }
  return out;
}

}  // namespace cosy
