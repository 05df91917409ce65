#include "cosy/matching.h"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cosy/errors.h"
#include "cosy/rng.h"

namespace cosy {

void MatchParams::Validate() const {
  if (!(inlier_threshold > 0.0)) {
    throw InvariantError("inlier threshold must be > 0");
  }
  if (min_inliers < 3) throw InvariantError("min_inliers must be >= 3");
  if (max_iterations < 1) throw InvariantError("max_iterations must be >= 1");
}

std::vector<std::size_t> CandidatesInView(const SceneObservations& obs,
                                          const std::string& view_id) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < obs.candidates.size(); ++i) {
    if (obs.candidates[i].view_id == view_id) out.push_back(i);
  }
  return out;
}

Pose RelativePoseFromPairs(const CandidatePair& pair1,
                           const CandidatePair& pair2,
                           const SceneObservations& obs,
                           const PreparedModels& models) {
  if (pair1.a == pair2.a || pair1.b == pair2.b) {
    throw DegeneratePairs("the two pairs share a candidate");
  }
  const Candidate& ca1 = obs.candidates[pair1.a];
  const Candidate& cb1 = obs.candidates[pair1.b];
  const Candidate& ca2 = obs.candidates[pair2.a];
  const Candidate& cb2 = obs.candidates[pair2.b];
  if (ca1.label != cb1.label || ca2.label != cb2.label) {
    throw InvariantError("candidate pair with inconsistent labels");
  }
  const PreparedModel& m1 = Lookup(models, ca1.label);
  const PreparedModel& m2 = Lookup(models, ca2.label);
  const Pose inv_b1 = Inverse(cb1.pose);

  // Candidate relative poses, one per symmetry of the first object.
  const std::size_t g1 = m1.group.size();
  const std::size_t g2 = m2.group.size();
  std::vector<Pose> base(g1);
  std::vector<Pose> moved(g1);  // base * T_{C_bO_delta}
  for (std::size_t i = 0; i < g1; ++i) {
    base[i] = Compose(Compose(ca1.pose, m1.group.elements[i]), inv_b1);
    moved[i] = Compose(base[i], cb2.pose);
  }
  std::vector<Pose> anchor(g2);  // T_{C_aO_gamma} * S2
  for (std::size_t j = 0; j < g2; ++j) {
    anchor[j] = Compose(ca2.pose, m2.group.elements[j]);
  }

  // Branch and bound over (S, S2) with the centroid lower bound.
  const Vec3& c = m2.centroid;
  std::vector<std::tuple<double, std::size_t, std::size_t>> order;
  order.reserve(g1 * g2);
  for (std::size_t i = 0; i < g1; ++i) {
    const Vec3 target = moved[i] * c;
    for (std::size_t j = 0; j < g2; ++j) {
      order.emplace_back((anchor[j] * c - target).norm(), i, j);
    }
  }
  std::sort(order.begin(), order.end());

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_i = 0, best_j = 0;
  for (const auto& [bound, i, j] : order) {
    if (bound > best * (1.0 + 1e-12) + 1e-15) break;
    const double d = kernels::MeanPointDistance(m2.sample, anchor[j], moved[i]);
    if (d < best || (d == best && std::tie(i, j) < std::tie(best_i, best_j))) {
      best = d;
      best_i = i;
      best_j = j;
    }
  }
  return base[best_i];
}

InlierSet CountInliers(const Pose& t_ab, std::span<const std::size_t> cands_a,
                       std::span<const std::size_t> cands_b,
                       const SceneObservations& obs,
                       const PreparedModels& models, double threshold) {
  struct Scored {
    double distance;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Scored> scored;
  for (std::size_t ia : cands_a) {
    const Candidate& ca = obs.candidates[ia];
    const PreparedModel& m = Lookup(models, ca.label);
    for (std::size_t ib : cands_b) {
      const Candidate& cb = obs.candidates[ib];
      if (cb.label != ca.label) continue;
      const auto match = BestSymmetryMatchBelow(
          m.sample, m.centroid, m.group, ca.pose, Compose(t_ab, cb.pose),
          threshold);
      if (match) scored.push_back({match->distance, ia, ib});
    }
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    return std::tie(x.distance, x.a, x.b) < std::tie(y.distance, y.a, y.b);
  });

  std::vector<std::pair<CandidatePair, double>> accepted;
  std::vector<std::size_t> used_a, used_b;
  for (const Scored& s : scored) {
    if (std::find(used_a.begin(), used_a.end(), s.a) != used_a.end() ||
        std::find(used_b.begin(), used_b.end(), s.b) != used_b.end()) {
      continue;
    }
    used_a.push_back(s.a);
    used_b.push_back(s.b);
    accepted.push_back({{s.a, s.b}, s.distance});
  }
  std::sort(accepted.begin(), accepted.end());

  InlierSet out;
  for (const auto& [pair, d] : accepted) {
    out.pairs.push_back(pair);
    out.distances.push_back(d);
    out.total_distance += d;
  }
  return out;
}

std::vector<std::pair<CandidatePair, CandidatePair>> EnumerateHypotheses(
    std::span<const std::size_t> cands_a, std::span<const std::size_t> cands_b,
    const SceneObservations& obs) {
  std::vector<CandidatePair> pairs;
  for (std::size_t ia : cands_a) {
    for (std::size_t ib : cands_b) {
      if (obs.candidates[ia].label == obs.candidates[ib].label) {
        pairs.push_back({ia, ib});
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::pair<CandidatePair, CandidatePair>> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      if (pairs[i].a != pairs[j].a && pairs[i].b != pairs[j].b) {
        out.emplace_back(pairs[i], pairs[j]);
      }
    }
  }
  return out;
}

std::optional<TwoViewHypothesis> TwoViewRansac(const std::string& view_a,
                                               const std::string& view_b,
                                               const SceneObservations& obs,
                                               const PreparedModels& models,
                                               const MatchParams& params,
                                               Exec exec) {
  params.Validate();
  const auto cands_a = CandidatesInView(obs, view_a);
  const auto cands_b = CandidatesInView(obs, view_b);
  auto hyps = EnumerateHypotheses(cands_a, cands_b, obs);
  if (hyps.size() > params.max_iterations) {
    Rng rng(DeriveSeed(params.seed, view_a, view_b));
    const auto picked = rng.SampleWithoutReplacement(hyps.size(), params.max_iterations);
    std::vector<std::pair<CandidatePair, CandidatePair>> sampled;
    sampled.reserve(picked.size());
    for (std::uint64_t i : picked) sampled.push_back(hyps[i]);
    hyps = std::move(sampled);
  }
  if (hyps.empty()) return std::nullopt;

  std::vector<Pose> poses(hyps.size());
  std::vector<InlierSet> inliers(hyps.size());
  kernels::ForEachIndex(exec, static_cast<std::ptrdiff_t>(hyps.size()),
                        [&](std::ptrdiff_t i) {
                          const auto& [p1, p2] = hyps[i];
                          poses[i] = RelativePoseFromPairs(p1, p2, obs, models);
                          inliers[i] = CountInliers(poses[i], cands_a, cands_b, obs,
                                                    models, params.inlier_threshold);
                        });

  // hyps is in lexicographic order, so the first best index wins ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < hyps.size(); ++i) {
    const std::size_t n = inliers[i].pairs.size();
    const std::size_t nb = inliers[best].pairs.size();
    if (n > nb || (n == nb && inliers[i].total_distance < inliers[best].total_distance)) {
      best = i;
    }
  }
  if (inliers[best].pairs.size() < params.min_inliers) return std::nullopt;

  TwoViewHypothesis h;
  h.view_a = view_a;
  h.view_b = view_b;
  h.relative_pose = poses[best];
  h.inliers = std::move(inliers[best]);
  h.generating_pairs = hyps[best];
  h.hypotheses_evaluated = hyps.size();
  return h;
}

MatchGraph BuildMatchGraph(const SceneObservations& obs,
                           const PreparedModels& models,
                           const MatchParams& params, Exec exec) {
  params.Validate();
  MatchGraph graph;
  for (const Candidate& c : obs.candidates) {
    graph.vertices.push_back({c.view_id, c.label, c.score});
    const PreparedModel& m = Lookup(models, c.label);
    if (!IsFullRank(m.sample)) {
      throw InvariantError("model '" + c.label +
                           "' needs >= 4 non-coplanar points for matching");
    }
  }

  std::vector<std::string> view_ids;
  for (const View& v : obs.views) view_ids.push_back(v.view_id);
  std::sort(view_ids.begin(), view_ids.end());
  std::vector<std::pair<std::string, std::string>> view_pairs;
  for (std::size_t i = 0; i < view_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < view_ids.size(); ++j) {
      view_pairs.emplace_back(view_ids[i], view_ids[j]);
    }
  }

  // View pairs are independent; each run is serial inside so results do not
  // depend on the thread count.
  std::vector<std::optional<TwoViewHypothesis>> results(view_pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(view_pairs.size());
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      results[i] = TwoViewRansac(view_pairs[i].first, view_pairs[i].second, obs,
                                 models, params, Exec::kSerial);
    }
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      results[i] = TwoViewRansac(view_pairs[i].first, view_pairs[i].second, obs,
                                 models, params, Exec::kSerial);
    }
  }

  for (auto& r : results) {
    if (!r) continue;
    for (std::size_t k = 0; k < r->inliers.pairs.size(); ++k) {
      graph.edges.push_back(
          {r->inliers.pairs[k], r->inliers.distances[k], r->view_a, r->view_b});
    }
    graph.hypotheses.push_back(std::move(*r));
  }
  return graph;
}

std::vector<PhysicalObject> ExtractPhysicalObjects(const MatchGraph& graph) {
  const std::size_t n = graph.vertices.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<bool> has_edge(n, false);
  for (const MatchEdge& e : graph.edges) {
    has_edge[e.pair.a] = has_edge[e.pair.b] = true;
    const std::size_t ra = find(e.pair.a), rb = find(e.pair.b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }

  std::map<std::size_t, std::vector<std::size_t>> components;
  for (std::size_t v = 0; v < n; ++v) {
    if (has_edge[v]) components[find(v)].push_back(v);
  }

  std::vector<PhysicalObject> objects;
  for (const auto& [root, vertices] : components) {
    // Highest score per view; lower index wins ties.
    std::map<std::string, std::size_t> per_view;
    for (std::size_t v : vertices) {
      const auto it = per_view.find(graph.vertices[v].view_id);
      if (it == per_view.end() ||
          graph.vertices[v].score > graph.vertices[it->second].score) {
        per_view[graph.vertices[v].view_id] = v;
      }
    }
    if (per_view.size() < 2) continue;
    PhysicalObject obj;
    obj.label = graph.vertices[root].label;
    for (const auto& [view, v] : per_view) obj.members.emplace_back(view, v);
    objects.push_back(std::move(obj));
  }
  std::sort(objects.begin(), objects.end(),
            [](const PhysicalObject& x, const PhysicalObject& y) {
              return std::tie(x.label, x.members.front()) <
                     std::tie(y.label, y.members.front());
            });
  for (std::size_t i = 0; i < objects.size(); ++i) {
    objects[i].id = static_cast<int>(i);
  }
  return objects;
}

}  // namespace cosy
