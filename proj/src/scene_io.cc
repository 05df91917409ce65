#include "cosy/scene_io.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cosy/errors.h"
#include "cosy/rng.h"

namespace cosy {

namespace {

constexpr char kModelsFormat[] = "cosy-models";
constexpr char kObservationsFormat[] = "cosy-observations";
constexpr char kGroundTruthFormat[] = "cosy-ground-truth";
constexpr char kEstimateFormat[] = "cosy-estimate";
constexpr int kFormatVersion = 1;

const Json& Field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " is not an object");
  const auto it = j.find(key);
  if (it == j.end()) {
    throw SchemaError(where + " is missing field '" + key + "'");
  }
  return *it;
}

double Number(const Json& j, const char* key, const std::string& where) {
  const Json& v = Field(j, key, where);
  if (!v.is_number()) {
    throw SchemaError(where + "." + key + " must be a number");
  }
  const double d = v.get<double>();
  if (!std::isfinite(d)) {
    throw InvariantError(where + "." + key + " is not finite");
  }
  return d;
}

int Integer(const Json& j, const char* key, const std::string& where) {
  const Json& v = Field(j, key, where);
  if (!v.is_number_integer()) {
    throw SchemaError(where + "." + key + " must be an integer");
  }
  return v.get<int>();
}

std::string String(const Json& j, const char* key, const std::string& where) {
  const Json& v = Field(j, key, where);
  if (!v.is_string()) {
    throw SchemaError(where + "." + key + " must be a string");
  }
  return v.get<std::string>();
}

const Json& Array(const Json& j, const char* key, const std::string& where) {
  const Json& v = Field(j, key, where);
  if (!v.is_array()) throw SchemaError(where + "." + key + " must be an array");
  return v;
}

Vec3 Vec3FromJson(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) {
    throw SchemaError(where + " must be an array of 3 numbers");
  }
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw SchemaError(where + " must hold numbers");
    v(i) = j[i].get<double>();
  }
  if (!v.allFinite()) throw InvariantError(where + " is not finite");
  return v;
}

Json Vec3ToJson(const Vec3& v) { return Json::array({v(0), v(1), v(2)}); }

void CheckFormat(const Json& j, const char* expected) {
  if (!j.is_object()) throw SchemaError("document root must be an object");
  const auto it = j.find("format");
  if (it != j.end() && (!it->is_string() || it->get<std::string>() != expected)) {
    throw SchemaError(std::string("expected format '") + expected + "'");
  }
}

Json Header(const char* format) {
  return Json{{"format", format}, {"version", kFormatVersion}};
}

Json IntrinsicsToJson(const CameraIntrinsics& k) {
  return Json{{"fx", k.fx},       {"fy", k.fy},         {"cx", k.cx},
              {"cy", k.cy},       {"width", k.width},   {"height", k.height}};
}

CameraIntrinsics IntrinsicsFromJson(const Json& j, const std::string& where) {
  CameraIntrinsics k;
  k.fx = Number(j, "fx", where);
  k.fy = Number(j, "fy", where);
  k.cx = Number(j, "cx", where);
  k.cy = Number(j, "cy", where);
  k.width = Integer(j, "width", where);
  k.height = Integer(j, "height", where);
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
    throw InvariantError(where + ": focal lengths must be positive");
  }
  if (k.width <= 0 || k.height <= 0) {
    throw InvariantError(where + ": image size must be positive");
  }
  return k;
}

std::vector<View> ViewsFromJson(const Json& j, const std::string& where) {
  std::vector<View> views;
  std::set<std::string> seen;
  const Json& arr = Array(j, "views", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string w = where + ".views[" + std::to_string(i) + "]";
    View v;
    v.view_id = String(arr[i], "view_id", w);
    v.intrinsics = IntrinsicsFromJson(Field(arr[i], "intrinsics", w), w);
    if (!seen.insert(v.view_id).second) {
      throw SchemaError("duplicate view_id '" + v.view_id + "'");
    }
    views.push_back(std::move(v));
  }
  return views;
}

Json ViewsToJson(const std::vector<View>& views) {
  Json arr = Json::array();
  for (const View& v : views) {
    arr.push_back({{"view_id", v.view_id},
                   {"intrinsics", IntrinsicsToJson(v.intrinsics)}});
  }
  return arr;
}

Json PoseMapToJson(const std::map<std::string, Pose>& poses) {
  Json arr = Json::array();
  for (const auto& [id, pose] : poses) {
    arr.push_back({{"view_id", id}, {"pose", PoseToJson(pose)}});
  }
  return arr;
}

std::map<std::string, Pose> PoseMapFromJson(const Json& arr,
                                            const std::string& where) {
  std::map<std::string, Pose> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    out[String(arr[i], "view_id", w)] = PoseFromJson(Field(arr[i], "pose", w), w);
  }
  return out;
}

}  // namespace

const View& SceneObservations::FindView(const std::string& view_id) const {
  for (const View& v : views) {
    if (v.view_id == view_id) return v;
  }
  throw UnknownView("'" + view_id + "'");
}

double MaxPairwiseDistance(const PointSet& points) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    for (Eigen::Index j = i + 1; j < points.cols(); ++j) {
      best = std::max(best, (points.col(i) - points.col(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

bool IsFullRank(const PointSet& points) {
  if (points.cols() < 4) return false;
  const Vec3 mean = points.rowwise().mean();
  const PointSet centered = points.colwise() - mean;
  const Mat3 cov = centered * centered.transpose() /
                   static_cast<double>(points.cols());
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();
  return ev(0) > 1e-12 * std::max(ev(2), 1e-300);
}

void ValidateModel(const ObjectModel& m) {
  const std::string where = "model '" + m.label + "'";
  if (m.label.empty()) throw InvariantError("model with empty label");
  if (m.points.cols() == 0) throw InvariantError(where + " has no points");
  if (!m.points.allFinite()) {
    throw InvariantError(where + " has non-finite points");
  }
  if (!(m.diameter > 0.0)) {
    throw InvariantError(where + " diameter must be > 0");
  }
  if (m.diameter < kMinDiameter || m.diameter > kMaxDiameter) {
    std::ostringstream os;
    os << where << " diameter " << m.diameter
       << " m outside [0.01, 2] m; inputs must be in meters";
    throw InvariantError(os.str());
  }
  const double spread = MaxPairwiseDistance(m.points);
  if (m.diameter < spread * (1.0 - 1e-6)) {
    std::ostringstream os;
    os << where << " diameter " << m.diameter
       << " is smaller than the point spread " << spread;
    throw InvariantError(os.str());
  }
  try {
    m.symmetries.Validate();
  } catch (const InvariantError& e) {
    throw InvariantError(where + ": " + e.what());
  }
}

PreparedModels PrepareModels(const ModelDb& db, int angles_per_axis,
                             std::size_t max_points) {
  PreparedModels out;
  for (const auto& [label, model] : db) {
    PreparedModel p;
    p.model = &model;
    const double radius = model.points.colwise().norm().maxCoeff();
    p.group = Discretize(model.symmetries, angles_per_axis, radius);
    const auto n = static_cast<std::size_t>(model.points.cols());
    if (n > max_points) {
      Rng rng(HashString(label));
      const auto idx = rng.SampleWithoutReplacement(n, max_points);
      p.sample.resize(3, static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        p.sample.col(static_cast<Eigen::Index>(i)) =
            model.points.col(static_cast<Eigen::Index>(idx[i]));
      }
    } else {
      p.sample = model.points;
    }
    p.centroid = p.sample.rowwise().mean();
    out.emplace(label, std::move(p));
  }
  return out;
}

const PreparedModel& Lookup(const PreparedModels& models,
                            const std::string& label) {
  const auto it = models.find(label);
  if (it == models.end()) throw UnknownLabel("'" + label + "'");
  return it->second;
}

SceneObservations FilterByScore(const SceneObservations& obs,
                                double min_score) {
  SceneObservations out;
  out.views = obs.views;
  for (const Candidate& c : obs.candidates) {
    if (c.score > min_score) out.candidates.push_back(c);
  }
  return out;
}

// ---- poses ----

Json PoseToJson(const Pose& pose) {
  const Mat4 m = pose.Matrix();
  Json arr = Json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) arr.push_back(m(r, c));
  }
  return arr;
}

Pose PoseFromJson(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 16) {
    throw SchemaError(where + ": pose must be 16 numbers (4x4 row-major)");
  }
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const Json& v = j[static_cast<std::size_t>(4 * r + c)];
      if (!v.is_number()) throw SchemaError(where + ": pose entries must be numbers");
      m(r, c) = v.get<double>();
    }
  }
  if (!m.allFinite()) throw InvariantError(where + ": pose is not finite");
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-9) {
    throw InvariantError(where + ": pose bottom row must be (0, 0, 0, 1)");
  }
  Pose p = Pose::FromMatrix(m);
  if (!IsRotation(p.rotation, 1e-6)) {
    throw InvariantError(where + ": rotation block is not a proper rotation");
  }
  return p;
}

// ---- models ----

Json ModelsToJson(const ModelDb& db) {
  Json j = Header(kModelsFormat);
  Json arr = Json::array();
  for (const auto& [label, m] : db) {
    Json pts = Json::array();
    for (Eigen::Index i = 0; i < m.points.cols(); ++i) {
      for (int r = 0; r < 3; ++r) pts.push_back(m.points(r, i));
    }
    Json discrete = Json::array();
    for (const Pose& p : m.symmetries.discrete) discrete.push_back(PoseToJson(p));
    Json axes = Json::array();
    for (const SymmetryAxis& a : m.symmetries.continuous_axes) {
      axes.push_back({{"axis", Vec3ToJson(a.axis)}, {"offset", Vec3ToJson(a.offset)}});
    }
    arr.push_back({{"label", label},
                   {"diameter", m.diameter},
                   {"points", std::move(pts)},
                   {"symmetries", {{"discrete", std::move(discrete)},
                                   {"axes", std::move(axes)}}}});
  }
  j["models"] = std::move(arr);
  return j;
}

ModelDb ModelsFromJson(const Json& j) {
  CheckFormat(j, kModelsFormat);
  ModelDb db;
  const Json& arr = Array(j, "models", "models.json");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "models[" + std::to_string(i) + "]";
    ObjectModel m;
    m.label = String(arr[i], "label", where);
    const std::string w = "model '" + m.label + "'";
    m.diameter = Number(arr[i], "diameter", w);
    const Json& pts = Array(arr[i], "points", w);
    if (pts.size() % 3 != 0) {
      throw SchemaError(w + ": points length must be a multiple of 3");
    }
    m.points.resize(3, static_cast<Eigen::Index>(pts.size() / 3));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (!pts[k].is_number()) throw SchemaError(w + ": points must be numbers");
      m.points(static_cast<Eigen::Index>(k % 3), static_cast<Eigen::Index>(k / 3)) =
          pts[k].get<double>();
    }
    if (arr[i].contains("symmetries")) {
      const Json& sym = arr[i]["symmetries"];
      if (!sym.is_object()) throw SchemaError(w + ": symmetries must be an object");
      if (sym.contains("discrete")) {
        const Json& d = Array(sym, "discrete", w + ".symmetries");
        for (std::size_t k = 0; k < d.size(); ++k) {
          m.symmetries.discrete.push_back(
              PoseFromJson(d[k], w + ".symmetries.discrete[" + std::to_string(k) + "]"));
        }
      }
      if (sym.contains("axes")) {
        const Json& a = Array(sym, "axes", w + ".symmetries");
        for (std::size_t k = 0; k < a.size(); ++k) {
          const std::string wa = w + ".symmetries.axes[" + std::to_string(k) + "]";
          m.symmetries.continuous_axes.push_back(
              {Vec3FromJson(Field(a[k], "axis", wa), wa + ".axis"),
               Vec3FromJson(Field(a[k], "offset", wa), wa + ".offset")});
        }
      }
    }
    ValidateModel(m);
    if (db.count(m.label) != 0) {
      throw SchemaError("duplicate model label '" + m.label + "'");
    }
    db.emplace(m.label, std::move(m));
  }
  return db;
}

// ---- observations ----

Json ObservationsToJson(const SceneObservations& obs) {
  Json j = Header(kObservationsFormat);
  j["views"] = ViewsToJson(obs.views);
  Json arr = Json::array();
  for (const Candidate& c : obs.candidates) {
    arr.push_back({{"view_id", c.view_id},
                   {"label", c.label},
                   {"score", c.score},
                   {"pose", PoseToJson(c.pose)}});
  }
  j["candidates"] = std::move(arr);
  return j;
}

SceneObservations ObservationsFromJson(const Json& j, const ModelDb& db) {
  CheckFormat(j, kObservationsFormat);
  SceneObservations obs;
  obs.views = ViewsFromJson(j, "observations");
  std::set<std::string> view_ids;
  for (const View& v : obs.views) view_ids.insert(v.view_id);
  const Json& arr = Array(j, "candidates", "observations");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = "candidates[" + std::to_string(i) + "]";
    Candidate c;
    c.view_id = String(arr[i], "view_id", where);
    c.label = String(arr[i], "label", where);
    c.score = Number(arr[i], "score", where);
    c.pose = PoseFromJson(Field(arr[i], "pose", where), where + ".pose");
    if (db.count(c.label) == 0) {
      throw UnknownLabel(where + " references label '" + c.label + "'");
    }
    if (view_ids.count(c.view_id) == 0) {
      throw UnknownView(where + " references view '" + c.view_id + "'");
    }
    if (c.score < 0.0 || c.score > 1.0) {
      throw InvariantError(where + ": score must lie in [0, 1]");
    }
    if (!(c.pose.translation.z() > 0.0)) {
      throw InvariantError(where + ": candidate must lie in front of the camera (z > 0)");
    }
    obs.candidates.push_back(std::move(c));
  }
  return obs;
}

// ---- ground truth ----

Json GroundTruthToJson(const GroundTruthFile& gt) {
  Json j = Header(kGroundTruthFormat);
  j["views"] = ViewsToJson(gt.views);
  j["cameras"] = PoseMapToJson(gt.cameras);
  Json objs = Json::array();
  for (const GroundTruthObject& o : gt.objects) {
    objs.push_back({{"id", o.id}, {"label", o.label}, {"pose", PoseToJson(o.pose)}});
  }
  j["objects"] = std::move(objs);
  j["provenance"] = gt.provenance;
  return j;
}

GroundTruthFile GroundTruthFromJson(const Json& j) {
  CheckFormat(j, kGroundTruthFormat);
  GroundTruthFile gt;
  gt.views = ViewsFromJson(j, "ground_truth");
  gt.cameras = PoseMapFromJson(Array(j, "cameras", "ground_truth"), "cameras");
  const Json& objs = Array(j, "objects", "ground_truth");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string where = "objects[" + std::to_string(i) + "]";
    gt.objects.push_back({Integer(objs[i], "id", where), String(objs[i], "label", where),
                          PoseFromJson(Field(objs[i], "pose", where), where)});
  }
  if (j.contains("provenance")) {
    const Json& prov = Array(j, "provenance", "ground_truth");
    for (const Json& p : prov) {
      if (!p.is_number_integer()) throw SchemaError("provenance entries must be integers");
      gt.provenance.push_back(p.get<int>());
    }
  }
  for (const View& v : gt.views) {
    if (gt.cameras.count(v.view_id) == 0) {
      throw SchemaError("ground truth lacks camera pose for view '" + v.view_id + "'");
    }
  }
  return gt;
}

// ---- estimates ----

Json EstimateToJson(const EstimateFile& est) {
  Json j = Header(kEstimateFormat);
  j["status"] = est.status;
  j["config"] = est.config;
  j["stats"] = est.stats;
  j["root_view"] = est.root_view;
  j["cameras"] = PoseMapToJson(est.cameras);
  Json objs = Json::array();
  for (const EstimatedObject& o : est.objects) {
    Json members = Json::array();
    for (const auto& [view, idx] : o.members) {
      members.push_back({{"view_id", view}, {"candidate_index", idx}});
    }
    objs.push_back({{"id", o.id},
                    {"label", o.label},
                    {"score", o.score},
                    {"pose", PoseToJson(o.pose)},
                    {"members", std::move(members)}});
  }
  j["objects"] = std::move(objs);
  Json preds = Json::array();
  for (const PosePrediction& p : est.predictions) {
    preds.push_back({{"view_id", p.view_id},
                     {"label", p.label},
                     {"score", p.score},
                     {"object_id", p.object_id},
                     {"pose", PoseToJson(p.pose)}});
  }
  j["predictions"] = std::move(preds);
  Json inl = Json::array();
  for (const InlierRecord& r : est.inlier_candidates) {
    inl.push_back({{"view_id", r.view_id},
                   {"label", r.label},
                   {"candidate_index", r.candidate_index},
                   {"object_id", r.object_id},
                   {"before", PoseToJson(r.before)},
                   {"after", PoseToJson(r.after)}});
  }
  j["inlier_candidates"] = std::move(inl);
  j["loss_trace"] = est.loss_trace;
  return j;
}

EstimateFile EstimateFromJson(const Json& j) {
  CheckFormat(j, kEstimateFormat);
  EstimateFile est;
  est.status = String(j, "status", "estimate");
  if (j.contains("config")) est.config = j["config"];
  if (j.contains("stats")) est.stats = j["stats"];
  if (j.contains("root_view")) est.root_view = String(j, "root_view", "estimate");
  est.cameras = PoseMapFromJson(Array(j, "cameras", "estimate"), "cameras");
  const Json& objs = Array(j, "objects", "estimate");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string where = "objects[" + std::to_string(i) + "]";
    EstimatedObject o;
    o.id = Integer(objs[i], "id", where);
    o.label = String(objs[i], "label", where);
    o.score = Number(objs[i], "score", where);
    o.pose = PoseFromJson(Field(objs[i], "pose", where), where);
    const Json& members = Array(objs[i], "members", where);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::string wm = where + ".members[" + std::to_string(k) + "]";
      o.members.emplace_back(String(members[k], "view_id", wm),
                             static_cast<std::size_t>(Integer(members[k], "candidate_index", wm)));
    }
    est.objects.push_back(std::move(o));
  }
  const Json& preds = Array(j, "predictions", "estimate");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::string where = "predictions[" + std::to_string(i) + "]";
    est.predictions.push_back({String(preds[i], "view_id", where),
                               String(preds[i], "label", where),
                               Number(preds[i], "score", where),
                               PoseFromJson(Field(preds[i], "pose", where), where),
                               Integer(preds[i], "object_id", where)});
  }
  if (j.contains("inlier_candidates")) {
    const Json& inl = Array(j, "inlier_candidates", "estimate");
    for (std::size_t i = 0; i < inl.size(); ++i) {
      const std::string where = "inlier_candidates[" + std::to_string(i) + "]";
      est.inlier_candidates.push_back(
          {String(inl[i], "view_id", where), String(inl[i], "label", where),
           static_cast<std::size_t>(Integer(inl[i], "candidate_index", where)),
           Integer(inl[i], "object_id", where),
           PoseFromJson(Field(inl[i], "before", where), where + ".before"),
           PoseFromJson(Field(inl[i], "after", where), where + ".after")});
    }
  }
  if (j.contains("loss_trace")) {
    for (const Json& v : Array(j, "loss_trace", "estimate")) {
      if (!v.is_number()) throw SchemaError("loss_trace entries must be numbers");
      est.loss_trace.push_back(v.get<double>());
    }
  }
  return est;
}

// ---- files ----

Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

void WriteJsonFile(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

ModelDb LoadModels(const std::filesystem::path& path) {
  return ModelsFromJson(ReadJsonFile(path));
}
void SaveModels(const std::filesystem::path& path, const ModelDb& db) {
  WriteJsonFile(path, ModelsToJson(db));
}
SceneObservations LoadObservations(const std::filesystem::path& path,
                                   const ModelDb& db) {
  return ObservationsFromJson(ReadJsonFile(path), db);
}
void SaveObservations(const std::filesystem::path& path,
                      const SceneObservations& obs) {
  WriteJsonFile(path, ObservationsToJson(obs));
}
GroundTruthFile LoadGroundTruth(const std::filesystem::path& path) {
  return GroundTruthFromJson(ReadJsonFile(path));
}
void SaveGroundTruth(const std::filesystem::path& path,
                     const GroundTruthFile& gt) {
  WriteJsonFile(path, GroundTruthToJson(gt));
}
EstimateFile LoadEstimate(const std::filesystem::path& path) {
  return EstimateFromJson(ReadJsonFile(path));
}
void SaveEstimate(const std::filesystem::path& path, const EstimateFile& est) {
  WriteJsonFile(path, EstimateToJson(est));
}

}  // namespace cosy
