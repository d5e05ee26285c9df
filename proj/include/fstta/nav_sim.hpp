#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fstta/adapt_engine.hpp"
#include "fstta/toy_model.hpp"

namespace fstta::sim {

using linalg::Vec;

inline constexpr double kAreaSide = 10.0;     // square world side length
inline constexpr double kSuccessRadius = 3.0;  // success distance rule
inline constexpr std::size_t kDefaultStepBudget = 20;

// Seeded undirected scene graph. Node features are a fixed nonlinear
// projection of position plus a per-scene style vector, so geometry is
// recoverable from features and scenes differ by a controlled offset.
struct Scene {
  struct Node {
    double x = 0.0, y = 0.0;
    Vec feature;  // clean feature, kFeatureDim
  };
  std::vector<Node> nodes;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::vector<std::size_t>> adjacency;  // sorted neighbor lists
  int layout_family = 0;

  double distance(std::size_t a, std::size_t b) const;
  // Geodesic distances from `source` over edge lengths.
  std::vector<double> geodesics(std::size_t source) const;
  std::uint64_t hash() const;
};

// Distribution shift applied to delivered observations relative to the
// clean scene features, plus the graph statistics family.
struct ShiftSpec {
  Vec feature_bias = Vec(model::kFeatureDim, 0.0);
  double feature_noise_sigma = 0.0;
  int layout_family = 0;

  static ShiftSpec seen();
  // Bias direction drawn from the stream seed with a fixed norm of 0.5,
  // observation noise 0.1, alternate layout family.
  static ShiftSpec unseen_default(std::uint64_t stream_seed);
};

// One instruction-execution task. Everything is derived deterministically
// from (episode_seed, shift); delivered features are corrupted once per
// node at generation time.
struct Episode {
  Scene scene;
  std::vector<Vec> delivered;  // per-node observed features
  std::size_t start = 0;
  std::size_t goal = 0;
  Vec instruction;             // clean goal feature + positional encoding
  std::size_t step_budget = kDefaultStepBudget;
  std::uint64_t episode_seed = 0;
};

// Execution trace and outcome metrics of one episode.
struct EpisodeRecord {
  std::size_t start = 0, goal = 0;
  std::vector<std::size_t> path;   // visited nodes, path[0] == start
  std::vector<Vec> step_scores;    // per-step candidate probabilities
  std::size_t steps = 0;
  bool stopped = false;
  bool success = false;
  bool oracle_success = false;
  double tl = 0.0;            // traversed length
  double ne = 0.0;            // final distance to goal
  double shortest_len = 0.0;  // geodesic start->goal
  double spl_term = 0.0;      // success weighted by path length, one task
};

// Aggregate metrics over a record set. Rates are percentages.
struct MetricsRow {
  double sr = 0.0;
  double osr = 0.0;
  double spl = 0.0;
  double tl = 0.0;
  double ne = 0.0;
};

Episode make_episode(std::uint64_t episode_seed, const ShiftSpec& shift);

// Deterministic ordered episode list; scenes drawn fresh per episode.
std::vector<Episode> generate_stream(std::uint64_t seed,
                                     const ShiftSpec& shift,
                                     std::size_t count);

// Builds the decision input at `node`: candidate 0 is stop (the current
// node's delivered feature), then neighbors in ascending id order.
model::StepInput build_step_input(const Episode& ep, std::size_t node,
                                  const Vec& history_mean);

// Runs one episode with the session's current parameters, feeding per-step
// entropy gradients into the session when its strategy adapts, and closes
// the sample. Greedy action selection; ties break to the lowest index.
EpisodeRecord run_episode(engine::AdaptSession& session, const Episode& ep);

// Shortest-path oracle; stops exactly at the goal. No adaptation.
EpisodeRecord run_teacher_episode(const Episode& ep);

MetricsRow evaluate(std::span<const EpisodeRecord> records);

// Teacher-labeled decision steps harvested from seen-family episodes, for
// supervised pretraining.
std::vector<model::LabeledStep> make_teacher_dataset(std::uint64_t seed,
                                                     std::size_t episodes);

// Line-delimited stream container: a header line followed by one record
// per episode (seed, scene hash, start, goal, budget). Import regenerates
// episodes from their seeds and verifies the scene hashes.
void export_stream(const std::vector<Episode>& episodes,
                   const ShiftSpec& shift, std::uint64_t stream_seed,
                   const std::filesystem::path& file);
std::vector<Episode> import_stream(const std::filesystem::path& file);

}  // namespace fstta::sim
