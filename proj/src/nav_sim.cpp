#include "fstta/nav_sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>

#include "fstta/rng.hpp"
#include "json.hpp"

namespace fstta::sim {

namespace {

using model::kFeatureDim;

// Fixed global position->feature projection shared by every scene. The
// weights come from a dedicated constant seed so features are comparable
// across scenes and runs.
struct FeatureProjection {
  // 8x2 and 8x8 weights
  double a[kFeatureDim][2];
  double b[kFeatureDim][kFeatureDim];

  FeatureProjection() {
    Rng rng(0x5eedf00dULL);
    for (auto& row : a)
      for (double& w : row) w = rng.normal(0.0, 2.0);
    for (auto& row : b)
      for (double& w : row)
        w = rng.normal(0.0, 0.55 / std::sqrt(double(kFeatureDim)));
  }

  Vec project(double x, double y) const {
    const double px = 2.0 * (x / kAreaSide) - 1.0;
    const double py = 2.0 * (y / kAreaSide) - 1.0;
    double hidden[kFeatureDim];
    for (std::size_t i = 0; i < kFeatureDim; ++i)
      hidden[i] = std::tanh(a[i][0] * px + a[i][1] * py);
    Vec f(kFeatureDim, 0.0);
    for (std::size_t i = 0; i < kFeatureDim; ++i)
      for (std::size_t j = 0; j < kFeatureDim; ++j)
        f[i] += b[i][j] * hidden[j];
    return f;
  }
};

const FeatureProjection& projection() {
  static const FeatureProjection proj;
  return proj;
}

// Low-frequency positional encoding mixed into instructions so distinct
// goals with similar features stay distinguishable.
Vec positional_encoding(double x, double y) {
  constexpr double amp = 0.25;
  const double px = std::numbers::pi * x / kAreaSide;
  const double py = std::numbers::pi * y / kAreaSide;
  return {amp * std::sin(px),       amp * std::cos(px),
          amp * std::sin(py),       amp * std::cos(py),
          amp * std::sin(3.0 * px), amp * std::cos(3.0 * px),
          amp * std::sin(3.0 * py), amp * std::cos(3.0 * py)};
}

struct LayoutFamily {
  std::size_t min_nodes, max_nodes;
  double edge_radius;
  double style_scale;
};

LayoutFamily layout_params(int family) {
  switch (family) {
    case 0:
      return {12, 20, 3.5, 0.2};  // seen: moderate density
    default:
      return {14, 22, 3.0, 0.2};  // alternate: crowded, longer routes
  }
}

struct DisjointSet {
  std::vector<std::size_t> parent;
  explicit DisjointSet(std::size_t n) : parent(n) {
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

Scene generate_scene(Rng& rng, int family) {
  const LayoutFamily fam = layout_params(family);
  Scene scene;
  scene.layout_family = family;
  const std::size_t n = rng.uniform_int(fam.min_nodes, fam.max_nodes);

  scene.nodes.resize(n);
  for (auto& node : scene.nodes) {
    node.x = rng.uniform(0.0, kAreaSide);
    node.y = rng.uniform(0.0, kAreaSide);
  }

  Vec style(kFeatureDim);
  for (double& s : style) s = rng.normal(0.0, fam.style_scale);
  for (auto& node : scene.nodes) {
    node.feature = projection().project(node.x, node.y);
    for (std::size_t i = 0; i < kFeatureDim; ++i) node.feature[i] += style[i];
  }

  DisjointSet dsu(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (scene.distance(i, j) <= fam.edge_radius) {
        scene.edges.emplace_back(i, j);
        dsu.unite(i, j);
      }

  // Stitch disconnected components together through their closest node
  // pair; added edges keep the Euclidean-length invariant.
  for (;;) {
    bool connected = true;
    for (std::size_t i = 1; i < n; ++i)
      if (dsu.find(i) != dsu.find(0)) connected = false;
    if (connected) break;
    double best = std::numeric_limits<double>::max();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (dsu.find(i) != dsu.find(j) && scene.distance(i, j) < best) {
          best = scene.distance(i, j);
          bi = i;
          bj = j;
        }
    scene.edges.emplace_back(bi, bj);
    dsu.unite(bi, bj);
  }

  scene.adjacency.assign(n, {});
  for (auto [i, j] : scene.edges) {
    scene.adjacency[i].push_back(j);
    scene.adjacency[j].push_back(i);
  }
  for (auto& nbrs : scene.adjacency) std::sort(nbrs.begin(), nbrs.end());
  return scene;
}

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
}

std::size_t argmax_index(std::span<const double> values) {
  return static_cast<std::size_t>(std::distance(
      values.begin(), std::max_element(values.begin(), values.end())));
}

}  // namespace

double Scene::distance(std::size_t a, std::size_t b) const {
  const double dx = nodes[a].x - nodes[b].x;
  const double dy = nodes[a].y - nodes[b].y;
  return std::sqrt(dx * dx + dy * dy);
}

std::vector<double> Scene::geodesics(std::size_t source) const {
  std::vector<double> dist(nodes.size(),
                           std::numeric_limits<double>::infinity());
  dist[source] = 0.0;
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (std::size_t v : adjacency[u]) {
      const double nd = d + distance(u, v);
      if (nd < dist[v]) {
        dist[v] = nd;
        queue.emplace(nd, v);
      }
    }
  }
  return dist;
}

std::uint64_t Scene::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_mix(h, nodes.size());
  for (const auto& node : nodes) {
    fnv_mix(h, std::bit_cast<std::uint64_t>(node.x));
    fnv_mix(h, std::bit_cast<std::uint64_t>(node.y));
    for (double f : node.feature) fnv_mix(h, std::bit_cast<std::uint64_t>(f));
  }
  fnv_mix(h, edges.size());
  for (auto [i, j] : edges) {
    fnv_mix(h, i);
    fnv_mix(h, j);
  }
  return h;
}

ShiftSpec ShiftSpec::seen() { return {}; }

ShiftSpec ShiftSpec::unseen_default(std::uint64_t stream_seed) {
  ShiftSpec spec;
  Rng rng(derive_seed(stream_seed, 0x5417ULL));
  double norm = 0.0;
  for (double& b : spec.feature_bias) {
    b = rng.normal();
    norm += b * b;
  }
  norm = std::sqrt(norm);
  for (double& b : spec.feature_bias) b *= 0.5 / norm;
  spec.feature_noise_sigma = 0.1;
  spec.layout_family = 1;
  return spec;
}

Episode make_episode(std::uint64_t episode_seed, const ShiftSpec& shift) {
  Rng rng(episode_seed);
  Episode ep;
  ep.episode_seed = episode_seed;
  ep.scene = generate_scene(rng, shift.layout_family);
  const std::size_t n = ep.scene.nodes.size();
  ep.start = rng.uniform_int(0, n - 1);
  ep.goal = rng.uniform_int(0, n - 1);

  ep.delivered.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    Vec f = ep.scene.nodes[v].feature;
    for (std::size_t i = 0; i < kFeatureDim; ++i) {
      f[i] += shift.feature_bias[i];
      if (shift.feature_noise_sigma > 0.0)
        f[i] += rng.normal(0.0, shift.feature_noise_sigma);
    }
    ep.delivered[v] = std::move(f);
  }

  ep.instruction = ep.scene.nodes[ep.goal].feature;
  const Vec pe =
      positional_encoding(ep.scene.nodes[ep.goal].x, ep.scene.nodes[ep.goal].y);
  for (std::size_t i = 0; i < kFeatureDim; ++i) ep.instruction[i] += pe[i];
  return ep;
}

std::vector<Episode> generate_stream(std::uint64_t seed,
                                     const ShiftSpec& shift,
                                     std::size_t count) {
  if (count < 1) throw ValidityError("generate_stream: count must be >= 1");
  std::vector<Episode> episodes;
  episodes.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    episodes.push_back(make_episode(derive_seed(seed, i), shift));
  return episodes;
}

model::StepInput build_step_input(const Episode& ep, std::size_t node,
                                  const Vec& history_mean) {
  model::StepInput in;
  in.instruction = ep.instruction;
  in.history = history_mean;
  in.candidates.push_back(ep.delivered[node]);  // stop = stay here
  for (std::size_t nbr : ep.scene.adjacency[node])
    in.candidates.push_back(ep.delivered[nbr]);
  return in;
}

namespace {

struct HistoryMean {
  Vec sum = Vec(kFeatureDim, 0.0);
  std::size_t count = 0;

  void add(const Vec& f) {
    for (std::size_t i = 0; i < kFeatureDim; ++i) sum[i] += f[i];
    ++count;
  }
  Vec mean() const {
    Vec m = sum;
    for (double& v : m) v /= double(count);
    return m;
  }
};

void finalize_record(EpisodeRecord& rec, const Episode& ep,
                     std::size_t final_node, double min_goal_dist) {
  const double dx = ep.scene.nodes[final_node].x - ep.scene.nodes[ep.goal].x;
  const double dy = ep.scene.nodes[final_node].y - ep.scene.nodes[ep.goal].y;
  rec.ne = std::sqrt(dx * dx + dy * dy);
  rec.success = rec.stopped && rec.ne < kSuccessRadius;
  rec.oracle_success = min_goal_dist < kSuccessRadius;
  rec.shortest_len = ep.scene.geodesics(ep.start)[ep.goal];
  if (rec.success)
    rec.spl_term = (rec.shortest_len == 0.0)
                       ? 1.0  // degenerate start == goal task
                       : rec.shortest_len / std::max(rec.tl, rec.shortest_len);
}

template <typename ActionFn>
EpisodeRecord drive_episode(const Episode& ep, ActionFn&& pick_action) {
  EpisodeRecord rec;
  rec.start = ep.start;
  rec.goal = ep.goal;
  rec.path.push_back(ep.start);

  HistoryMean history;
  history.add(ep.delivered[ep.start]);
  std::size_t current = ep.start;
  double min_goal_dist = ep.scene.distance(ep.start, ep.goal);

  for (std::size_t step = 0; step < ep.step_budget; ++step) {
    const model::StepInput in = build_step_input(ep, current, history.mean());
    const std::size_t action = pick_action(in, rec, current);
    ++rec.steps;
    if (action == 0) {
      rec.stopped = true;
      break;
    }
    const std::size_t next = ep.scene.adjacency[current][action - 1];
    rec.tl += ep.scene.distance(current, next);
    current = next;
    rec.path.push_back(next);
    history.add(ep.delivered[next]);
    min_goal_dist = std::min(min_goal_dist, ep.scene.distance(next, ep.goal));
  }
  finalize_record(rec, ep, current, min_goal_dist);
  return rec;
}

}  // namespace

EpisodeRecord run_episode(engine::AdaptSession& session, const Episode& ep) {
  session.on_sample_start();
  EpisodeRecord rec =
      drive_episode(ep, [&](const model::StepInput& in, EpisodeRecord& r,
                            std::size_t) {
        const model::ForwardResult fr =
            model::score_actions(session.params(), in);
        r.step_scores.push_back(fr.probs);
        if (session.strategy().adapts())
          session.on_action_step(
              engine::entropy_gradient(session.params(), in, fr));
        return argmax_index(fr.probs);
      });
  session.on_sample_end();
  return rec;
}

EpisodeRecord run_teacher_episode(const Episode& ep) {
  const std::vector<double> to_goal = ep.scene.geodesics(ep.goal);
  return drive_episode(
      ep, [&](const model::StepInput&, EpisodeRecord&, std::size_t current) {
        if (current == ep.goal) return std::size_t{0};
        const auto& nbrs = ep.scene.adjacency[current];
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::max();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
          const double cost =
              ep.scene.distance(current, nbrs[k]) + to_goal[nbrs[k]];
          if (cost < best_cost) {
            best_cost = cost;
            best = k + 1;
          }
        }
        return best;
      });
}

MetricsRow evaluate(std::span<const EpisodeRecord> records) {
  if (records.empty()) throw ValidityError("evaluate: no records");
  MetricsRow row;
  for (const EpisodeRecord& r : records) {
    row.sr += r.success ? 1.0 : 0.0;
    row.osr += r.oracle_success ? 1.0 : 0.0;
    row.spl += r.spl_term;
    row.tl += r.tl;
    row.ne += r.ne;
  }
  const double n = static_cast<double>(records.size());
  row.sr *= 100.0 / n;
  row.osr *= 100.0 / n;
  row.spl *= 100.0 / n;
  row.tl /= n;
  row.ne /= n;
  return row;
}

std::vector<model::LabeledStep> make_teacher_dataset(std::uint64_t seed,
                                                     std::size_t episodes) {
  std::vector<model::LabeledStep> data;
  const auto stream = generate_stream(seed, ShiftSpec::seen(), episodes);
  for (const Episode& ep : stream) {
    const std::vector<double> to_goal = ep.scene.geodesics(ep.goal);
    HistoryMean history;
    history.add(ep.delivered[ep.start]);
    std::size_t current = ep.start;
    for (std::size_t step = 0; step < ep.step_budget; ++step) {
      model::LabeledStep ex;
      ex.input = build_step_input(ep, current, history.mean());
      if (current == ep.goal) {
        ex.action = 0;
      } else {
        const auto& nbrs = ep.scene.adjacency[current];
        double best_cost = std::numeric_limits<double>::max();
        std::size_t best = 0;
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
          const double cost =
              ep.scene.distance(current, nbrs[k]) + to_goal[nbrs[k]];
          if (cost < best_cost) {
            best_cost = cost;
            best = k + 1;
          }
        }
        ex.action = best;
      }
      data.push_back(ex);
      if (ex.action == 0) break;
      current = ep.scene.adjacency[current][ex.action - 1];
      history.add(ep.delivered[current]);
    }
  }
  return data;
}

// ---------------------------------------------------------------------------
// stream container

void export_stream(const std::vector<Episode>& episodes,
                   const ShiftSpec& shift, std::uint64_t stream_seed,
                   const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::trunc);
  if (!os) throw ValidityError("export_stream: cannot open " + file.string());

  nlohmann::json header;
  header["schema"] = "fstta.stream.v1";
  header["stream_seed"] = stream_seed;
  header["count"] = episodes.size();
  header["shift"] = {{"feature_bias", shift.feature_bias},
                     {"feature_noise_sigma", shift.feature_noise_sigma},
                     {"layout_family", shift.layout_family}};
  os << header.dump() << '\n';

  for (const Episode& ep : episodes) {
    nlohmann::json line;
    line["episode_seed"] = ep.episode_seed;
    line["scene_hash"] = ep.scene.hash();
    line["start"] = ep.start;
    line["goal"] = ep.goal;
    line["budget"] = ep.step_budget;
    os << line.dump() << '\n';
  }
  if (!os) throw ValidityError("export_stream: write failed");
}

std::vector<Episode> import_stream(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw ValidityError("import_stream: cannot open " + file.string());
  std::string line;
  if (!std::getline(is, line))
    throw ValidityError("import_stream: empty file");

  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("schema", "") != "fstta.stream.v1")
    throw ValidityError("import_stream: bad header schema");

  ShiftSpec shift;
  const auto& js = header.at("shift");
  shift.feature_bias = js.at("feature_bias").get<Vec>();
  shift.feature_noise_sigma = js.at("feature_noise_sigma").get<double>();
  shift.layout_family = js.at("layout_family").get<int>();
  if (shift.feature_bias.size() != kFeatureDim)
    throw ValidityError("import_stream: bad bias dimension");

  std::vector<Episode> episodes;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw ValidityError("import_stream: malformed episode line");
    Episode ep = make_episode(rec.at("episode_seed").get<std::uint64_t>(),
                              shift);
    ep.step_budget = rec.at("budget").get<std::size_t>();
    if (ep.scene.hash() != rec.at("scene_hash").get<std::uint64_t>() ||
        ep.start != rec.at("start").get<std::size_t>() ||
        ep.goal != rec.at("goal").get<std::size_t>())
      throw ValidityError("import_stream: episode mismatch for seed " +
                          std::to_string(ep.episode_seed));
    episodes.push_back(std::move(ep));
  }
  if (episodes.size() != header.at("count").get<std::size_t>())
    throw ValidityError("import_stream: episode count mismatch");
  return episodes;
}

}  // namespace fstta::sim
