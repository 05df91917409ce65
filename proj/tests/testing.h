#pragma once

// Helpers shared by the unit tests.

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "cosy/geometry.h"
#include "cosy/matching.h"
#include "cosy/refinement.h"
#include "cosy/scene_io.h"
#include "cosy/rng.h"
#include "cosy/simulation.h"

namespace cosy::testing {

inline Pose RandomPose(Rng& rng, double spread = 0.3, Vec3 center = Vec3::Zero()) {
  return {RandomRotation(rng),
          center + Vec3(rng.Uniform(-spread, spread), rng.Uniform(-spread, spread),
                        rng.Uniform(-spread, spread))};
}

inline PointSet RandomPoints(Rng& rng, int n, double extent = 0.05) {
  PointSet p(3, n);
  for (int i = 0; i < n; ++i) {
    p.col(i) = Vec3(rng.Uniform(-extent, extent), rng.Uniform(-extent, extent),
                    rng.Uniform(-extent, extent));
  }
  return p;
}

// Straightforward min over S of the mean point distance, written without
// any of the library's kernels.
inline double NaiveSymmetricDistance(const PointSet& pts,
                                     const std::vector<Pose>& group,
                                     const Pose& t1, const Pose& t2) {
  double best = std::numeric_limits<double>::infinity();
  for (const Pose& s : group) {
    const Pose a = Compose(t1, s);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const double x = pts(0, i), y = pts(1, i), z = pts(2, i);
      double d[3];
      for (int r = 0; r < 3; ++r) {
        const double pa = a.rotation(r, 0) * x + a.rotation(r, 1) * y +
                          a.rotation(r, 2) * z + a.translation(r);
        const double pb = t2.rotation(r, 0) * x + t2.rotation(r, 1) * y +
                          t2.rotation(r, 2) * z + t2.translation(r);
        d[r] = pa - pb;
      }
      sum += std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
    }
    const double mean = sum / static_cast<double>(pts.cols());
    if (mean < best) best = mean;
  }
  return best;
}

inline double FrobeniusDistance(const Mat3& a, const Mat3& b) { return (a - b).norm(); }

}  // namespace cosy::testing

namespace cosy::testing {

// Two cameras looking at the origin with every object visible in both.
struct TwoViewScene {
  ModelDb db = BuiltinModels();
  PreparedModels models;
  std::map<std::string, Pose> cameras;
  std::vector<Pose> objects;  // world frame
  SceneObservations obs;

  explicit TwoViewScene(const std::vector<std::string>& labels, Rng& rng,
                        double spread = 0.15) {
    models = PrepareModels(db);
    const CameraIntrinsics k{600, 600, 320, 240, 640, 480};
    cameras["a"] = LookAt({0.0, -1.0, 0.5}, Vec3::Zero(), 0.05);
    cameras["b"] = LookAt({0.7, -0.7, 0.6}, Vec3::Zero(), -0.1);
    obs.views = {{"a", k}, {"b", k}};
    for (std::size_t i = 0; i < labels.size(); ++i) objects.push_back(RandomPose(rng, spread));
    for (const std::string v : {"a", "b"}) {
      for (std::size_t i = 0; i < labels.size(); ++i) {
        obs.candidates.push_back(
            {v, labels[i], 0.9, Compose(Inverse(cameras.at(v)), objects[i])});
      }
    }
  }

  Pose TrueRelative() const { return Compose(Inverse(cameras.at("a")), cameras.at("b")); }
};

}  // namespace cosy::testing

namespace cosy::testing {

struct SimScene {
  ModelDb db = BuiltinModels();
  PreparedModels models;
  GroundTruthFile gt;
  SimulatedObservations sim;

  SimScene(std::uint64_t seed, const NoiseModel& noise, int n_objects = 6,
           int n_views = 4) {
    models = PrepareModels(db);
    Rng rng(seed);
    ScenarioConfig sc;
    sc.n_objects = n_objects;
    sc.n_views = n_views;
    gt = GenerateScene(sc, db, rng);
    sim = GenerateObservations(gt, db, noise, rng);
    gt.provenance = sim.provenance;
  }

  // Physical objects straight from provenance (members with >= 1 candidate).
  std::vector<PhysicalObject> TrueObjects() const {
    std::vector<PhysicalObject> out;
    for (const GroundTruthObject& o : gt.objects) {
      PhysicalObject p{o.id, o.label, {}};
      for (std::size_t i = 0; i < sim.obs.candidates.size(); ++i) {
        if (sim.provenance[i] == o.id) p.members.emplace_back(sim.obs.candidates[i].view_id, i);
      }
      if (!p.members.empty()) out.push_back(std::move(p));
    }
    return out;
  }

  // Ground truth expressed with view_00 as the world frame.
  SceneState TrueState() const {
    SceneState s;
    s.root_view = gt.views.front().view_id;
    const Pose inv = Inverse(gt.cameras.at(s.root_view));
    for (const auto& [v, c] : gt.cameras) s.camera_poses[v] = Compose(inv, c);
    for (const GroundTruthObject& o : gt.objects) s.object_poses[o.id] = Compose(inv, o.pose);
    return s;
  }
};

}  // namespace cosy::testing
