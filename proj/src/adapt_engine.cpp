#include "fstta/adapt_engine.hpp"

#include <algorithm>
#include <cctype>

namespace fstta::engine {

std::string Strategy::name() const {
  switch (kind) {
    case Kind::NoAdapt:
      return "NoAdapt";
    case Kind::TentInterval:
      return "Tent-INT-" + std::to_string(interval);
    case Kind::TentStable:
      return "Tent-Stable";
    case Kind::FastOnly:
      return dlr ? "FastOnly" : "FastOnly-NoDLR";
    case Kind::FastSlow:
      return dlr ? "FastSlow" : "FastSlow-NoDLR";
  }
  return "?";
}

Strategy Strategy::parse(const std::string& text) {
  std::string t;
  for (char c : text) t.push_back(static_cast<char>(std::tolower(c)));
  if (t == "noadapt" || t == "none") return no_adapt();
  if (t == "tent-stable" || t == "tentstable") return tent_stable();
  if (t.rfind("tent-int-", 0) == 0) {
    const std::string num = t.substr(9);
    std::size_t k = 0;
    try {
      k = std::stoul(num);
    } catch (const std::exception&) {
      throw ConfigError("bad tent interval in strategy '" + text + "'");
    }
    if (k < 1) throw ConfigError("tent interval must be >= 1");
    return tent(k);
  }
  if (t == "tent") return tent(1);
  if (t == "fast") return fast_only(true);
  if (t == "fast-nodlr") return fast_only(false);
  if (t == "fastslow" || t == "fast-slow") return fast_slow(true);
  if (t == "fastslow-nodlr" || t == "fast-slow-nodlr")
    return fast_slow(false);
  throw ConfigError("unknown strategy '" + text + "'");
}

namespace {

std::size_t window_capacity(const Strategy& s, const fast::FastConfig& cfg) {
  switch (s.kind) {
    case Strategy::Kind::NoAdapt:
      return 1;  // never filled
    case Strategy::Kind::TentInterval:
      return s.interval;
    case Strategy::Kind::TentStable:
      return 1;
    case Strategy::Kind::FastOnly:
    case Strategy::Kind::FastSlow:
      return cfg.window;
  }
  return 1;
}

}  // namespace

AdaptSession::AdaptSession(const Strategy& strategy,
                           const model::PolicyParams& pristine,
                           fast::FastConfig fast_cfg,
                           slow::SlowConfig slow_cfg)
    : strategy_(strategy),
      fast_cfg_(fast_cfg),
      slow_cfg_(slow_cfg),
      params_(pristine),
      theta_(pristine.adaptable()),
      pristine_(theta_),
      anchor_(theta_),
      window_(window_capacity(strategy, fast_cfg)) {}

void AdaptSession::set_theta(Vec theta) {
  theta_ = std::move(theta);
  params_.set_adaptable(theta_);
}

void AdaptSession::on_sample_start() {
  if (strategy_.kind == Strategy::Kind::TentStable) set_theta(pristine_);
}

void AdaptSession::on_action_step(const Vec& grad) {
  if (!strategy_.adapts()) return;
  if (grad.size() != theta_.size())
    throw ValidityError("on_action_step: gradient dimension mismatch");
  if (!linalg::all_finite(grad)) {
    ++nonfinite_dropped_;
    return;
  }
  window_.push(grad);
  if (window_.full()) apply_window_update();
}

void AdaptSession::apply_window_update() {
  switch (strategy_.kind) {
    case Strategy::Kind::NoAdapt:
      window_.clear();
      return;
    case Strategy::Kind::TentInterval:
    case Strategy::Kind::TentStable: {
      // plain averaged-gradient descent at the fixed base rate
      Vec mean(theta_.size(), 0.0);
      for (const Vec& g : window_.grads())
        linalg::axpy(1.0 / double(window_.count()), g, mean);
      Vec next = theta_;
      linalg::axpy(-fast_cfg_.base_lr, mean, next);
      set_theta(std::move(next));
      break;
    }
    case Strategy::Kind::FastOnly:
    case Strategy::Kind::FastSlow: {
      if (strategy_.dlr) {
        set_theta(fast::fast_step(theta_, window_, fast_state_, fast_cfg_));
      } else {
        const auto cg = fast::concordant_gradient(window_, fast_cfg_.phi_eps,
                                                  fast_cfg_.eig_tol);
        Vec next = theta_;
        linalg::axpy(-fast_cfg_.base_lr, cg.grad, next);
        set_theta(std::move(next));
      }
      break;
    }
  }
  window_.clear();
  ++updates_in_sample_;
  ++total_fast_updates_;
}

void AdaptSession::on_sample_end() {
  if (strategy_.adapts() && window_.count() >= 2) apply_window_update();
  window_.clear();

  if (strategy_.slow_phase()) {
    traj_buffer_.push_back(theta_);
    if (traj_buffer_.size() == slow_cfg_.samples) {
      slow::Trajectory traj;
      traj.states.reserve(slow_cfg_.samples + 1);
      traj.states.push_back(anchor_);
      for (Vec& s : traj_buffer_) traj.states.push_back(std::move(s));
      traj_buffer_.clear();

      const Vec h = slow::reference_direction(traj, slow_cfg_.decay);
      const Vec grad =
          slow::slow_gradient(traj, h, slow_cfg_.eig_tol, slow_cfg_.sign_tol);
      set_theta(slow::slow_step(anchor_, grad, slow_cfg_.lr));
      anchor_ = theta_;
      ++slow_updates_;
    }
  }

  ++samples_seen_;
  updates_in_sample_ = 0;
}

Vec entropy_gradient(const model::PolicyParams& params,
                     const model::StepInput& input,
                     const model::ForwardResult& forward) {
  return model::backward_adaptable(params, input, forward);
}

}  // namespace fstta::engine
