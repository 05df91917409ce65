#include <doctest.h>

#include <cmath>
#include <set>

#include "cosy/errors.h"
#include "cosy/evaluation.h"
#include "testing.h"

using namespace cosy;

TEST_CASE("builtin models") {
  const ModelDb db = BuiltinModels();
  CHECK(db.size() == 8);
  std::size_t symmetric = 0;
  for (const auto& [label, m] : db) {
    CAPTURE(label);
    CHECK(m.label == label);
    CHECK_NOTHROW(ValidateModel(m));
    CHECK(IsFullRank(m.points));
    CHECK(m.diameter == MaxPairwiseDistance(m.points));
    symmetric += IsSymmetric(m);
    // Each model is mapped onto itself by its own symmetries.
    const SymmetryGroup g = Discretize(m.symmetries, kDefaultSymmetryAngles,
                                       m.points.colwise().norm().maxCoeff());
    for (std::size_t s = 0; s < g.size(); s += 1 + g.size() / 16) {
      CHECK(AddsError(m.points, g.elements[s], Pose::Identity()) < 1e-9);
    }
  }
  CHECK(symmetric >= 4);
  CHECK_FALSE(IsSymmetric(db.at("box")));
  CHECK(IsSymmetric(db.at("can")));
}

TEST_CASE("LookAt points the optical axis at the target") {
  Rng rng(51);
  for (int i = 0; i < 50; ++i) {
    const Vec3 pos(rng.Uniform(-2, 2), rng.Uniform(-2, 2), rng.Uniform(0.2, 2));
    const Vec3 target(rng.Uniform(-0.2, 0.2), rng.Uniform(-0.2, 0.2), rng.Uniform(-0.2, 0.2));
    const Pose c = LookAt(pos, target, rng.Uniform(-0.2, 0.2));
    CHECK(IsRotation(c.rotation));
    const Vec3 in_cam = Inverse(c) * target;
    CHECK(std::abs(in_cam.x()) < 1e-9);
    CHECK(std::abs(in_cam.y()) < 1e-9);
    CHECK(in_cam.z() > 0.0);
  }
}

TEST_CASE("RandomRotation is uniform at a coarse level") {
  Rng rng(52);
  // The image of a fixed axis is uniform on the sphere: each coordinate of
  // R e_z is uniform on [-1, 1].
  const int n = 20000;
  int bins[4] = {0, 0, 0, 0};
  double mean = 0.0;
  for (int i = 0; i < n; ++i) {
    const Mat3 r = RandomRotation(rng);
    CHECK(IsRotation(r));
    const double z = r(2, 2);
    mean += z;
    ++bins[std::min(3, static_cast<int>((z + 1.0) * 2.0))];
  }
  CHECK(std::abs(mean / n) < 0.03);
  for (int b : bins) CHECK(std::abs(b - n / 4) < n / 40);
}

TEST_CASE("scene generation") {
  const ModelDb db = BuiltinModels();
  ScenarioConfig cfg;
  cfg.n_objects = 7;
  cfg.n_views = 5;
  Rng a(53), b(53);
  const GroundTruthFile s1 = GenerateScene(cfg, db, a);
  const GroundTruthFile s2 = GenerateScene(cfg, db, b);
  CHECK(s1 == s2);
  CHECK(s1.views.size() == 5);
  CHECK(s1.cameras.size() == 5);
  CHECK(s1.objects.size() == 7);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < s1.objects.size(); ++i) {
    const GroundTruthObject& o = s1.objects[i];
    CHECK(o.id == static_cast<int>(i));
    CHECK(IsRotation(o.pose.rotation));
    CHECK(o.pose.translation.cwiseAbs().maxCoeff() <= 0.5 * cfg.box_size);
    labels.insert(o.label);
    for (std::size_t j = 0; j < i; ++j) {
      CHECK((o.pose.translation - s1.objects[j].pose.translation).norm() >= cfg.min_separation);
    }
  }
  CHECK(labels.size() == 7);
  for (const auto& [v, c] : s1.cameras) {
    const double d = c.translation.norm();
    CHECK(d >= cfg.camera_distance_min - 1e-12);
    CHECK(d <= cfg.camera_distance_max + 1e-12);
    CHECK(c.translation.z() > 0.0);
  }

  ScenarioConfig bad = cfg;
  bad.n_views = 0;
  Rng r(1);
  CHECK_THROWS_AS(GenerateScene(bad, db, r), InvariantError);
}

TEST_CASE("noise-free observations reproduce the ground truth") {
  const cosy::testing::SimScene s(54, NoiseModel{}, 6, 4);
  REQUIRE(!s.sim.obs.candidates.empty());
  CHECK(s.sim.provenance.size() == s.sim.obs.candidates.size());
  for (std::size_t i = 0; i < s.sim.obs.candidates.size(); ++i) {
    const Candidate& c = s.sim.obs.candidates[i];
    const int id = s.sim.provenance[i];
    REQUIRE(id >= 0);
    const GroundTruthObject& o = s.gt.objects[static_cast<std::size_t>(id)];
    CHECK(c.label == o.label);
    const Pose truth = Compose(Inverse(s.gt.cameras.at(c.view_id)), o.pose);
    CHECK((c.pose.translation - truth.translation).norm() == 0.0);
    CHECK((c.pose.rotation - truth.rotation).norm() == 0.0);
    CHECK(InImage(s.sim.obs.FindView(c.view_id).intrinsics, c.pose.translation));
  }
  // Visible instances are exactly the candidates.
  CHECK(VisibleInstances(s.gt).size() == s.sim.obs.candidates.size());
}

TEST_CASE("miss, outlier and confusion rates") {
  NoiseModel all_missed;
  all_missed.miss_prob = 1.0;
  const cosy::testing::SimScene none(55, all_missed);
  CHECK(none.sim.obs.candidates.empty());

  NoiseModel noisy;
  noisy.miss_prob = 0.2;
  noisy.outlier_prob = 0.35;
  noisy.label_confusion_prob = 0.1;
  std::size_t visible = 0, detected = 0, outliers = 0, confused = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const cosy::testing::SimScene s(1000 + seed, noisy);
    visible += VisibleInstances(s.gt).size();
    for (std::size_t i = 0; i < s.sim.provenance.size(); ++i) {
      const int id = s.sim.provenance[i];
      if (id < 0) {
        ++outliers;
        CHECK(s.sim.obs.candidates[i].score >= noisy.outlier_score_min);
        continue;
      }
      ++detected;
      confused += s.sim.obs.candidates[i].label != s.gt.objects[static_cast<std::size_t>(id)].label;
    }
  }
  const double v = static_cast<double>(visible);
  CHECK(std::abs(detected / v - 0.8) < 0.05);
  CHECK(std::abs(outliers / v - 0.35) < 0.06);
  CHECK(std::abs(static_cast<double>(confused) / detected - 0.1) < 0.04);
}

TEST_CASE("pose noise magnitudes") {
  NoiseModel n;
  n.trans_sigma = 0.005;
  n.rot_sigma_deg = 5.0;
  double sq = 0.0, ang = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const cosy::testing::SimScene s(2000 + seed, n);
    for (std::size_t i = 0; i < s.sim.provenance.size(); ++i) {
      const Candidate& c = s.sim.obs.candidates[i];
      const Pose truth = Compose(Inverse(s.gt.cameras.at(c.view_id)),
                                 s.gt.objects[static_cast<std::size_t>(s.sim.provenance[i])].pose);
      sq += (c.pose.translation - truth.translation).squaredNorm();
      ang += RotationAngle(c.pose.rotation * truth.rotation.transpose());
      ++count;
    }
  }
  // Three axes of sigma 5 mm; angle is |N(0, 5 deg)| with mean sigma sqrt(2/pi).
  CHECK(std::sqrt(sq / count) == doctest::Approx(std::sqrt(3.0) * 0.005).epsilon(0.1));
  CHECK(ang / count == doctest::Approx(5.0 * M_PI / 180.0 * std::sqrt(2.0 / M_PI)).epsilon(0.1));
}

TEST_CASE("random symmetry leaves ADD-S unchanged") {
  NoiseModel n;
  n.random_symmetry = true;
  const cosy::testing::SimScene s(56, n);
  for (std::size_t i = 0; i < s.sim.provenance.size(); ++i) {
    const Candidate& c = s.sim.obs.candidates[i];
    const GroundTruthObject& o = s.gt.objects[static_cast<std::size_t>(s.sim.provenance[i])];
    const Pose truth = Compose(Inverse(s.gt.cameras.at(c.view_id)), o.pose);
    CHECK(AddsError(s.db.at(c.label).points, c.pose, truth) < 1e-9);
  }
}
