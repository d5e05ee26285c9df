#pragma once

#include <cstddef>
#include <string>

#include "fstta/fast_update.hpp"
#include "fstta/slow_update.hpp"
#include "fstta/toy_model.hpp"

namespace fstta::engine {

using linalg::Vec;

// Online update policy for a test stream.
//   NoAdapt      - frozen parameters, gradients discarded.
//   TentInterval - plain averaged-gradient step every `interval` steps at
//                  a fixed learning rate.
//   TentStable   - per-step plain updates, parameters reset to pristine at
//                  each sample start.
//   FastOnly     - eigen-analyzed fast updates, slow phase disabled.
//   FastSlow     - the full fast/slow scheme.
struct Strategy {
  enum class Kind { NoAdapt, TentInterval, TentStable, FastOnly, FastSlow };

  Kind kind = Kind::NoAdapt;
  std::size_t interval = 1;  // window for the Tent variants
  bool dlr = true;           // dynamic lr scaling (Fast* only)

  bool adapts() const { return kind != Kind::NoAdapt; }
  bool uses_eigen() const {
    return kind == Kind::FastOnly || kind == Kind::FastSlow;
  }
  bool slow_phase() const { return kind == Kind::FastSlow; }

  std::string name() const;
  // Parses names like "noadapt", "tent-int-3", "tent-stable", "fast",
  // "fast-nodlr", "fastslow", "fastslow-nodlr".
  static Strategy parse(const std::string& text);

  static Strategy no_adapt() { return {Kind::NoAdapt, 1, false}; }
  static Strategy tent(std::size_t k) { return {Kind::TentInterval, k, false}; }
  static Strategy tent_stable() { return {Kind::TentStable, 1, false}; }
  static Strategy fast_only(bool use_dlr = true) {
    return {Kind::FastOnly, 1, use_dlr};
  }
  static Strategy fast_slow(bool use_dlr = true) {
    return {Kind::FastSlow, 1, use_dlr};
  }
};

// One online adaptation stream: owns the working parameter copy, the
// gradient window, the fast-phase running statistic, and the slow-phase
// trajectory buffer with its anchor. Strictly sequential per session;
// independent sessions may run concurrently.
class AdaptSession {
public:
  AdaptSession(const Strategy& strategy, const model::PolicyParams& pristine,
               fast::FastConfig fast_cfg = {}, slow::SlowConfig slow_cfg = {});

  const model::PolicyParams& params() const { return params_; }
  const Strategy& strategy() const { return strategy_; }
  const Vec& theta() const { return theta_; }
  const Vec& pristine_theta() const { return pristine_; }
  const Vec& anchor() const { return anchor_; }

  std::size_t fast_updates_in_sample() const { return updates_in_sample_; }
  std::size_t samples_seen() const { return samples_seen_; }
  std::size_t slow_updates() const { return slow_updates_; }
  std::size_t total_fast_updates() const { return total_fast_updates_; }
  std::size_t nonfinite_dropped() const { return nonfinite_dropped_; }
  std::size_t trajectory_fill() const { return traj_buffer_.size(); }

  const fast::FastConfig& fast_config() const { return fast_cfg_; }
  const slow::SlowConfig& slow_config() const { return slow_cfg_; }

  // Call at the start of each sample (TentStable resets to pristine here).
  void on_sample_start();

  // Feeds one step gradient. Non-finite gradients are dropped and counted
  // instead of poisoning the parameters. Fires an update when the window
  // fills.
  void on_action_step(const Vec& grad);

  // Closes the sample: flushes a partial window when it still holds at
  // least two gradients (a lone gradient is discarded), records the model
  // state, and runs the slow phase once enough samples accumulated.
  void on_sample_end();

private:
  void apply_window_update();
  void set_theta(Vec theta);

  Strategy strategy_;
  fast::FastConfig fast_cfg_;
  slow::SlowConfig slow_cfg_;

  model::PolicyParams params_;
  Vec theta_;
  Vec pristine_;
  Vec anchor_;

  fast::GradientWindow window_;
  fast::FastPhaseState fast_state_;
  std::vector<Vec> traj_buffer_;  // recorded states since the last anchor

  std::size_t updates_in_sample_ = 0;
  std::size_t samples_seen_ = 0;
  std::size_t slow_updates_ = 0;
  std::size_t total_fast_updates_ = 0;
  std::size_t nonfinite_dropped_ = 0;
};

// Entropy-minimization gradient over the adaptable coordinates for the
// already-scored step. Pure; does not touch the model.
Vec entropy_gradient(const model::PolicyParams& params,
                     const model::StepInput& input,
                     const model::ForwardResult& forward);

}  // namespace fstta::engine
