#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cosy/errors.h"
#include "cosy/pipeline.h"
#include "testing.h"

using namespace cosy;
namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cosy_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int Run(const std::string& args) {
  const std::string cmd = std::string(COSY_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("noise-free scenes are recovered exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const cosy::testing::SimScene s(300 + seed, NoiseModel{}, 6, 4);
    const SolveOutput out = Solve(s.db, s.sim.obs, SolveConfig{});
    REQUIRE(out.solved);
    CHECK(out.estimate.status == "ok");
    const MetricReport r = Evaluate(out.estimate.predictions, s.gt, s.db);
    CHECK(r.mean_adds < 1e-6);
    CHECK(r.n_matched == r.n_gt);
    CHECK(r.recall_0p1d == 1.0);
    CHECK(out.estimate.stats["final_loss"].get<double>() < 1e-6);
    for (const InlierRecord& rec : out.estimate.inlier_candidates) {
      CHECK(rec.candidate_index < s.sim.obs.candidates.size());
      CHECK(s.sim.provenance[rec.candidate_index] >= 0);
    }
  }
}

TEST_CASE("parallel and serial solves agree exactly") {
  NoiseModel n;
  n.trans_sigma = 0.005;
  n.rot_sigma_deg = 3.0;
  n.outlier_prob = 0.3;
  const cosy::testing::SimScene s(310, n, 6, 4);
  const SolveOutput a = Solve(s.db, s.sim.obs, SolveConfig{}, Exec::kSerial);
  const SolveOutput b = Solve(s.db, s.sim.obs, SolveConfig{}, Exec::kParallel);
  CHECK(EstimateToJson(a.estimate).dump() == EstimateToJson(b.estimate).dump());
}

TEST_CASE("too few shared objects is unsolvable") {
  Rng rng(311);
  const cosy::testing::TwoViewScene two({"box", "mug"}, rng);
  const SolveOutput out = Solve(two.db, two.obs, SolveConfig{});
  CHECK_FALSE(out.solved);
  CHECK(out.estimate.status == "unsolvable");
  CHECK(out.estimate.objects.empty());

  const fs::path dir = TempDir("unsolvable");
  SaveModels(dir / "models.json", two.db);
  SaveObservations(dir / "obs.json", two.obs);
  CHECK(Run("solve --models " + (dir / "models.json").string() + " --observations " +
            (dir / "obs.json").string() + " --out " + (dir / "est.json").string() +
            " --seed 1") == 3);
  CHECK(LoadEstimate(dir / "est.json").status == "unsolvable");
}

TEST_CASE("invalid configurations") {
  SolveConfig cfg;
  cfg.nms_radius = 0.0;
  CHECK_THROWS_AS(cfg.Validate(), InvariantError);
  cfg = SolveConfig{};
  cfg.match.min_inliers = 2;
  CHECK_THROWS_AS(cfg.Validate(), InvariantError);
  cfg = SolveConfig{};
  cfg.refine.truncation = -1.0;
  CHECK_THROWS_AS(cfg.Validate(), InvariantError);
}

TEST_CASE("command line") {
  const fs::path dir = TempDir("cli");
  const std::string d = dir.string();
  CHECK(Run("simulate --seed 3 --views 0 --out-dir " + d) == 2);
  CHECK(Run("simulate --seed 3 --objects 6 --views 4 --trans-sigma 0.005 --rot-sigma 3 "
            "--outlier-prob 0.3 --out-dir " + d) == 0);
  REQUIRE(fs::exists(dir / "models.json"));
  REQUIRE(fs::exists(dir / "observations.json"));
  REQUIRE(fs::exists(dir / "ground_truth.json"));

  const std::string solve = "solve --models " + d + "/models.json --observations " + d +
                            "/observations.json --seed 9";
  CHECK(Run(solve + " --out " + d + "/e1.json --threads 1") == 0);
  CHECK(Run(solve + " --out " + d + "/e2.json --threads 4") == 0);
  CHECK(Run(solve + " --out " + d + "/e3.json") == 0);
  const std::string e1 = Slurp(dir / "e1.json");
  CHECK(!e1.empty());
  CHECK(e1 == Slurp(dir / "e2.json"));
  CHECK(e1 == Slurp(dir / "e3.json"));

  CHECK(Run("eval --models " + d + "/models.json --predictions " + d + "/e1.json --ground-truth " +
            d + "/ground_truth.json --out " + d + "/metrics.json") == 0);
  CHECK(ReadJsonFile(dir / "metrics.json").contains("map_adds"));
  CHECK(Run("report --estimate " + d + "/e1.json --models " + d + "/models.json --ground-truth " +
            d + "/ground_truth.json") == 0);

  // Malformed and schema-violating inputs.
  { std::ofstream(dir / "broken.json") << "{ not json"; }
  CHECK(Run("solve --models " + d + "/models.json --observations " + d +
            "/broken.json --out " + d + "/x.json --seed 1") == 2);
  { std::ofstream(dir / "schema.json") << R"({"views": [], "candidates": 3})"; }
  CHECK(Run("solve --models " + d + "/models.json --observations " + d +
            "/schema.json --out " + d + "/x.json --seed 1") == 2);
  CHECK(Run("solve --models " + d + "/models.json") == 2);
  CHECK(Run("frobnicate") == 2);
}
