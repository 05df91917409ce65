#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cosy/errors.h"
#include "cosy/scene_io.h"
#include "cosy/simulation.h"

using namespace cosy;
namespace fs = std::filesystem;

namespace {

struct Scene {
  ModelDb db = BuiltinModels();
  GroundTruthFile gt;
  SceneObservations obs;

  Scene() {
    Rng rng(11);
    ScenarioConfig sc;
    gt = GenerateScene(sc, db, rng);
    NoiseModel noise;
    noise.rot_sigma_deg = 3;
    noise.trans_sigma = 0.004;
    noise.outlier_prob = 0.3;
    auto sim = GenerateObservations(gt, db, noise, rng);
    obs = sim.obs;
    gt.provenance = sim.provenance;
  }
};

fs::path TempFile(const std::string& name) {
  return fs::temp_directory_path() / ("cosy_io_" + name);
}

}  // namespace

TEST_CASE("json round trips are exact") {
  const Scene s;
  CHECK(ModelsFromJson(ModelsToJson(s.db)) == s.db);
  CHECK(ObservationsFromJson(ObservationsToJson(s.obs), s.db) == s.obs);
  CHECK(GroundTruthFromJson(GroundTruthToJson(s.gt)) == s.gt);

  EstimateFile est;
  est.config = {{"seed", 3}};
  est.root_view = "view_00";
  est.cameras = s.gt.cameras;
  est.objects.push_back({4, "can", s.gt.objects[0].pose, 1.7, {{"view_00", 2}}});
  est.predictions.push_back({"view_01", "can", 1.7, s.gt.objects[0].pose, 4});
  est.inlier_candidates.push_back(
      {"view_00", "can", 2, 4, s.obs.candidates[0].pose, s.gt.objects[0].pose});
  est.loss_trace = {3.5, 1.25};
  CHECK(EstimateFromJson(EstimateToJson(est)) == est);

  const fs::path p = TempFile("obs.json");
  SaveObservations(p, s.obs);
  CHECK(LoadObservations(p, s.db) == s.obs);
  fs::remove(p);
}

TEST_CASE("pose json validation") {
  const Pose p{RotX(0.3), {1, 2, 3}};
  Json j = PoseToJson(p);
  CHECK(j.size() == 16);
  CHECK(PoseFromJson(j, "x") == p);
  j[15] = 2.0;
  CHECK_THROWS_AS(PoseFromJson(j, "x"), InvariantError);
  j = PoseToJson(p);
  j[0] = 2.0;
  CHECK_THROWS_AS(PoseFromJson(j, "x"), InvariantError);
  CHECK_THROWS_AS(PoseFromJson(Json::array({1, 2, 3}), "x"), SchemaError);
}

TEST_CASE("reader errors") {
  const Scene s;
  const fs::path bad = TempFile("bad.json");
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(ReadJsonFile(bad), ParseError);
  fs::remove(bad);
  CHECK_THROWS_AS(ReadJsonFile(TempFile("missing.json")), Error);

  Json j = ObservationsToJson(s.obs);
  j["format"] = "cosy-models";
  CHECK_THROWS_AS(ObservationsFromJson(j, s.db), SchemaError);

  j = ObservationsToJson(s.obs);
  j["candidates"][0]["label"] = "teapot";
  CHECK_THROWS_AS(ObservationsFromJson(j, s.db), UnknownLabel);

  j = ObservationsToJson(s.obs);
  j["candidates"][0]["view_id"] = "nowhere";
  CHECK_THROWS_AS(ObservationsFromJson(j, s.db), UnknownView);

  j = ObservationsToJson(s.obs);
  j["candidates"][0]["score"] = 1.5;
  CHECK_THROWS_AS(ObservationsFromJson(j, s.db), InvariantError);

  j = ObservationsToJson(s.obs);
  j["candidates"][0].erase("pose");
  CHECK_THROWS_AS(ObservationsFromJson(j, s.db), SchemaError);

  Json m = ModelsToJson(s.db);
  m["models"].push_back(m["models"][0]);
  CHECK_THROWS_AS(ModelsFromJson(m), SchemaError);
}

TEST_CASE("model validation") {
  ObjectModel m = BuiltinModels().at("box");
  CHECK_NOTHROW(ValidateModel(m));
  ObjectModel small = m;
  small.diameter = 0.5 * m.diameter;  // smaller than the point spread
  CHECK_THROWS_AS(ValidateModel(small), InvariantError);
  ObjectModel huge = m;
  huge.diameter = 3.0;
  CHECK_THROWS_AS(ValidateModel(huge), InvariantError);
  ObjectModel empty = m;
  empty.points.resize(3, 0);
  CHECK_THROWS_AS(ValidateModel(empty), InvariantError);

  PointSet flat(3, 4);
  flat << 0, 1, 0, 1, 0, 0, 1, 1, 0, 0, 0, 0;
  CHECK_FALSE(IsFullRank(flat));
  CHECK(IsFullRank(m.points));
}

TEST_CASE("score filter is strict and order preserving") {
  SceneObservations obs;
  obs.views = {{"a", {}}};
  for (double s : {0.2, 0.3, 0.31, 0.9}) obs.candidates.push_back({"a", "box", s, {}});
  const SceneObservations f = FilterByScore(obs, 0.3);
  REQUIRE(f.candidates.size() == 2);
  CHECK(f.candidates[0].score == 0.31);
  CHECK(f.candidates[1].score == 0.9);
}

TEST_CASE("prepared models subsample deterministically") {
  const ModelDb db = BuiltinModels();
  const PreparedModels a = PrepareModels(db, 64, 100);
  const PreparedModels b = PrepareModels(db, 64, 100);
  for (const auto& [label, m] : a) {
    CHECK(m.sample.cols() == std::min<Eigen::Index>(100, db.at(label).points.cols()));
    CHECK(m.sample == b.at(label).sample);
  }
  CHECK_THROWS_AS(Lookup(a, "teapot"), UnknownLabel);
}
