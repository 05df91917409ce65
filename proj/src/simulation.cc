#include "cosy/simulation.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cosy/errors.h"

namespace cosy {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kRingAngles = 64;

double Deg(double d) { return d * kPi / 180.0; }

std::vector<double> Linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

class PointBuilder {
 public:
  void Add(const Vec3& p) { pts_.push_back(p); }

  // Grid points on the six faces of a centered box.
  void BoxSurface(const Vec3& size, const Vec3& center, int steps) {
    const Vec3 h = 0.5 * size;
    const auto xs = Linspace(-h.x(), h.x(), steps);
    const auto ys = Linspace(-h.y(), h.y(), steps);
    const auto zs = Linspace(-h.z(), h.z(), steps);
    for (double a : xs) {
      for (double b : ys) {
        Add(center + Vec3(a, b, -h.z()));
        Add(center + Vec3(a, b, h.z()));
      }
    }
    for (double a : xs) {
      for (double c : zs) {
        Add(center + Vec3(a, -h.y(), c));
        Add(center + Vec3(a, h.y(), c));
      }
    }
    for (double b : ys) {
      for (double c : zs) {
        Add(center + Vec3(-h.x(), b, c));
        Add(center + Vec3(h.x(), b, c));
      }
    }
  }

  // Circle about the z-axis through `center`, at angles 2 pi k / count.
  void Ring(const Vec3& center, double radius, int count = kRingAngles) {
    for (int k = 0; k < count; ++k) {
      const double a = 2.0 * kPi * k / count;
      Add(center + Vec3(radius * std::cos(a), radius * std::sin(a), 0.0));
    }
  }

  PointSet Build() const {
    PointSet out(3, static_cast<Eigen::Index>(pts_.size()));
    for (std::size_t i = 0; i < pts_.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts_[i];
    return out;
  }

 private:
  std::vector<Vec3> pts_;
};

ObjectModel MakeModel(const std::string& label, const PointBuilder& b,
                      SymmetrySpec sym = {}) {
  ObjectModel m;
  m.label = label;
  m.points = b.Build();
  m.diameter = MaxPairwiseDistance(m.points);
  m.symmetries = std::move(sym);
  ValidateModel(m);
  return m;
}

}  // namespace

ModelDb BuiltinModels() {
  ModelDb db;
  auto add = [&](ObjectModel m) { db.emplace(m.label, std::move(m)); };
  const Pose identity = Pose::Identity();

  {  // flat box with a knob on one corner
    PointBuilder b;
    b.BoxSurface({0.10, 0.16, 0.05}, Vec3::Zero(), 6);
    b.BoxSurface({0.02, 0.02, 0.02}, {0.035, 0.06, 0.035}, 3);
    add(MakeModel("box", b));
  }
  {  // barrel plus offset handle
    PointBuilder b;
    b.BoxSurface({0.05, 0.05, 0.18}, Vec3::Zero(), 5);
    b.BoxSurface({0.04, 0.12, 0.04}, {0.0, -0.06, -0.07}, 4);
    add(MakeModel("drill", b));
  }
  {  // cylinder with a handle arc
    PointBuilder b;
    for (double z : Linspace(-0.045, 0.045, 5)) b.Ring({0.0, 0.0, z}, 0.04, 24);
    for (double a : Linspace(-0.5 * kPi, 0.5 * kPi, 9)) {
      b.Add({0.06 + 0.02 * std::cos(a), 0.0, 0.03 * std::sin(a)});
    }
    add(MakeModel("mug", b));
  }
  {  // revolution about z and a half-turn flip about x
    PointBuilder b;
    for (double z : {-0.05, -0.0167, 0.0167, 0.05}) b.Ring({0.0, 0.0, z}, 0.033);
    b.Ring({0.0, 0.0, -0.05}, 0.015);
    b.Ring({0.0, 0.0, 0.05}, 0.015);
    SymmetrySpec s;
    s.discrete = {identity, Pose::FromRotation(RotX(kPi))};
    s.continuous_axes = {SymmetryAxis{Vec3::UnitZ(), Vec3::Zero()}};
    add(MakeModel("can", b, s));
  }
  {  // open bowl, revolution about z only
    PointBuilder b;
    b.Ring({0.0, 0.0, -0.03}, 0.025);
    b.Ring({0.0, 0.0, -0.01}, 0.045);
    b.Ring({0.0, 0.0, 0.01}, 0.06);
    b.Ring({0.0, 0.0, 0.03}, 0.07);
    b.Ring({0.0, 0.0, -0.03}, 0.01);
    SymmetrySpec s;
    s.continuous_axes = {SymmetryAxis{Vec3::UnitZ(), Vec3::Zero()}};
    add(MakeModel("bowl", b, s));
  }
  {  // square prism: quarter turns about z, half turns about x
    PointBuilder b;
    b.BoxSurface({0.06, 0.06, 0.12}, Vec3::Zero(), 6);
    SymmetrySpec s;
    for (int flip = 0; flip < 2; ++flip) {
      for (int k = 0; k < 4; ++k) {
        s.discrete.push_back(Pose::FromRotation(RotZ(k * 0.5 * kPi) * RotX(flip * kPi)));
      }
    }
    s.discrete.front() = identity;
    add(MakeModel("prism", b, s));
  }
  {  // flat bottle with a round cap: half turn about z
    PointBuilder b;
    b.BoxSurface({0.08, 0.05, 0.14}, Vec3::Zero(), 6);
    b.Ring({0.0, 0.0, 0.08}, 0.012);
    b.Ring({0.0, 0.0, 0.09}, 0.012);
    SymmetrySpec s;
    s.discrete = {identity, Pose::FromRotation(RotZ(kPi))};
    add(MakeModel("bottle", b, s));
  }
  {  // tapered pen, revolution about an axis off the model origin
    PointBuilder b;
    const Vec3 axis_point(0.01, 0.0, 0.0);
    const auto zs = Linspace(-0.06, 0.06, 7);
    for (std::size_t i = 0; i < zs.size(); ++i) {
      b.Ring(axis_point + Vec3(0.0, 0.0, zs[i]), 0.006 + 0.001 * i);
    }
    b.Add(axis_point + Vec3(0.0, 0.0, -0.07));
    SymmetrySpec s;
    s.continuous_axes = {SymmetryAxis{Vec3::UnitZ(), axis_point}};
    add(MakeModel("marker", b, s));
  }
  return db;
}

void ScenarioConfig::Validate() const {
  if (n_objects < 1 || n_views < 1) {
    throw InvariantError("scenario needs at least one object and one view");
  }
  if (!(box_size > 0.0) || !(camera_distance_min > 0.0) ||
      camera_distance_max < camera_distance_min) {
    throw InvariantError("scenario needs a positive box and distance range");
  }
  if (elevation_min_deg < 0.0 || elevation_max_deg > 90.0 ||
      elevation_max_deg < elevation_min_deg || roll_max_deg < 0.0 ||
      min_separation < 0.0) {
    throw InvariantError("scenario angles or separation out of range");
  }
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0) || intrinsics.width < 1 ||
      intrinsics.height < 1) {
    throw InvariantError("scenario intrinsics invalid");
  }
}

void NoiseModel::Validate() const {
  auto rate = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (rot_sigma_deg < 0.0 || trans_sigma < 0.0 || depth_sigma_extra < 0.0) {
    throw InvariantError("noise sigmas must be non-negative");
  }
  if (!rate(miss_prob) || !rate(outlier_prob) || !rate(label_confusion_prob)) {
    throw InvariantError("noise rates must lie in [0, 1]");
  }
  if (!rate(score_min) || !rate(score_max) || score_max < score_min ||
      !rate(outlier_score_min) || !rate(outlier_score_max) ||
      outlier_score_max < outlier_score_min) {
    throw InvariantError("score ranges must be ordered within [0, 1]");
  }
}

Mat3 RandomRotation(Rng& rng) {
  Eigen::Vector4d q;
  do {
    for (int i = 0; i < 4; ++i) q(i) = rng.Normal();
  } while (q.norm() < 1e-12);
  q.normalize();
  return Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
}

Pose LookAt(const Vec3& position, const Vec3& target, double roll) {
  const Vec3 z = (target - position).normalized();
  Vec3 x = z.cross(Vec3::UnitZ());
  if (x.norm() < 1e-9) x = Vec3::UnitX();  // looking straight down or up
  x.normalize();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r << x, y, z;
  return {r * RotZ(roll), position};
}

GroundTruthFile GenerateScene(const ScenarioConfig& cfg, const ModelDb& db,
                              Rng& rng) {
  cfg.Validate();
  std::vector<std::string> labels = cfg.model_labels;
  if (labels.empty()) {
    for (const auto& [label, model] : db) labels.push_back(label);
  }
  for (const auto& l : labels) {
    if (db.count(l) == 0) throw UnknownLabel("no model for label '" + l + "'");
  }
  if (labels.empty()) throw InvariantError("scenario has no labels to draw");

  GroundTruthFile gt;
  for (int v = 0; v < cfg.n_views; ++v) {
    char id[32];
    std::snprintf(id, sizeof id, "view_%02d", v);
    const double dist = rng.Uniform(cfg.camera_distance_min, cfg.camera_distance_max);
    const double elev = Deg(rng.Uniform(cfg.elevation_min_deg, cfg.elevation_max_deg));
    const double azim = rng.Uniform(0.0, 2.0 * kPi);
    const double roll = Deg(rng.Uniform(-cfg.roll_max_deg, cfg.roll_max_deg));
    const Vec3 pos = dist * Vec3(std::cos(elev) * std::cos(azim),
                                 std::cos(elev) * std::sin(azim), std::sin(elev));
    gt.views.push_back({id, cfg.intrinsics});
    gt.cameras[id] = LookAt(pos, Vec3::Zero(), roll);
  }

  std::vector<std::string> chosen;
  if (static_cast<std::size_t>(cfg.n_objects) <= labels.size()) {
    for (auto i : rng.SampleWithoutReplacement(labels.size(), cfg.n_objects)) {
      chosen.push_back(labels[i]);
    }
  } else {
    for (int i = 0; i < cfg.n_objects; ++i) {
      chosen.push_back(labels[rng.UniformIndex(labels.size())]);
    }
  }
  const double h = 0.5 * cfg.box_size;
  for (int i = 0; i < cfg.n_objects; ++i) {
    Vec3 c;
    for (int attempt = 0;; ++attempt) {
      c = Vec3(rng.Uniform(-h, h), rng.Uniform(-h, h), rng.Uniform(-h, h));
      bool clear = true;
      for (const auto& o : gt.objects) {
        if ((o.pose.translation - c).norm() < cfg.min_separation) clear = false;
      }
      if (clear) break;
      if (attempt > 10000) throw InvariantError("cannot separate objects in the box");
    }
    gt.objects.push_back({i, chosen[i], {RandomRotation(rng), c}});
  }
  return gt;
}

SimulatedObservations GenerateObservations(const GroundTruthFile& scene,
                                           const ModelDb& db,
                                           const NoiseModel& noise, Rng& rng,
                                           int symmetry_angles) {
  noise.Validate();
  std::vector<std::string> labels;
  std::map<std::string, SymmetryGroup> groups;
  for (const auto& [label, model] : db) {
    labels.push_back(label);
    if (noise.random_symmetry) {
      groups[label] = Discretize(model.symmetries, symmetry_angles,
                                 model.points.colwise().norm().maxCoeff());
    }
  }

  SimulatedObservations out;
  out.obs.views = scene.views;
  for (const View& view : scene.views) {
    const CameraIntrinsics& k = view.intrinsics;
    const Pose inv = Inverse(scene.cameras.at(view.view_id));
    std::vector<std::pair<Candidate, int>> cands;
    std::size_t visible = 0;
    for (const GroundTruthObject& o : scene.objects) {
      Pose pose = Compose(inv, o.pose);
      if (!InImage(k, pose.translation)) continue;
      ++visible;
      if (rng.Bernoulli(noise.miss_prob)) continue;
      if (noise.rot_sigma_deg > 0.0) {
        Vec3 axis;
        do {
          axis = Vec3(rng.Normal(), rng.Normal(), rng.Normal());
        } while (axis.norm() < 1e-12);
        const double angle = std::abs(rng.Normal(0.0, Deg(noise.rot_sigma_deg)));
        pose.rotation = AxisAngle(axis.normalized(), angle) * pose.rotation;
      }
      if (noise.trans_sigma > 0.0) {
        pose.translation += Vec3(rng.Normal(0.0, noise.trans_sigma),
                                 rng.Normal(0.0, noise.trans_sigma),
                                 rng.Normal(0.0, noise.trans_sigma));
      }
      if (noise.depth_sigma_extra > 0.0) {
        pose.translation += pose.translation.normalized() *
                            rng.Normal(0.0, noise.depth_sigma_extra);
      }
      std::string label = o.label;
      if (labels.size() > 1 && rng.Bernoulli(noise.label_confusion_prob)) {
        std::string other;
        do {
          other = labels[rng.UniformIndex(labels.size())];
        } while (other == label);
        label = other;
      }
      if (noise.random_symmetry) {
        const SymmetryGroup& g = groups.at(label);
        pose = Compose(pose, g.elements[rng.UniformIndex(g.size())]);
      }
      const double score = rng.Uniform(noise.score_min, noise.score_max);
      cands.push_back({{view.view_id, label, score, pose}, o.id});
    }
    for (std::size_t i = 0; i < visible; ++i) {
      if (!rng.Bernoulli(noise.outlier_prob)) continue;
      const Vec2 uv(rng.Uniform(0.0, k.width), rng.Uniform(0.0, k.height));
      const double depth = rng.Uniform(0.5, 1.5);
      const Pose pose{RandomRotation(rng), Unproject(k, uv, depth)};
      const std::string& label = labels[rng.UniformIndex(labels.size())];
      const double score = rng.Uniform(noise.outlier_score_min, noise.outlier_score_max);
      cands.push_back({{view.view_id, label, score, pose}, -1});
    }
    // Fisher-Yates so outliers are not grouped at the end.
    for (std::size_t i = cands.size(); i > 1; --i) {
      std::swap(cands[i - 1], cands[rng.UniformIndex(i)]);
    }
    for (auto& [c, source] : cands) {
      out.obs.candidates.push_back(std::move(c));
      out.provenance.push_back(source);
    }
  }
  return out;
}

}  // namespace cosy
