#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fstta/linalg.hpp"

namespace fstta::model {

using linalg::Vec;

inline constexpr std::size_t kFeatureDim = 8;
inline constexpr std::size_t kInputDim = 3 * kFeatureDim;  // instr|hist|cand
inline constexpr std::size_t kHidden1 = 32;
inline constexpr std::size_t kHidden2 = 32;
// Both layer norms (scale + shift) form the adaptable parameter set.
inline constexpr std::size_t kAdaptableDim = 2 * (kHidden1 + kHidden2);
inline constexpr double kLayerNormEps = 1e-5;

struct Dense {
  linalg::RowMatrix weight;  // out x in
  Vec bias;
};

struct LayerNorm {
  Vec scale;
  Vec shift;
};

// Feed-forward candidate scorer. The dense layers stay frozen at test
// time; the layer-norm affine parameters are the adaptable set, flattened
// as [norm1.scale, norm1.shift, norm2.scale, norm2.shift].
struct PolicyParams {
  Dense input_layer;   // kInputDim -> kHidden1
  LayerNorm norm1;
  Dense hidden_layer;  // kHidden1 -> kHidden2
  LayerNorm norm2;
  Dense output_layer;  // kHidden2 -> 1

  static PolicyParams random_init(std::uint64_t seed);

  Vec adaptable() const;
  void set_adaptable(std::span<const double> values);

  // Every parameter in the documented flat order (dense layers included).
  Vec flatten_all() const;
  void unflatten_all(std::span<const double> values);
  static std::size_t total_param_count();
};

// One decision point: goal descriptor, running summary of visited node
// features, and one feature per navigable candidate (stop included).
struct StepInput {
  Vec instruction;              // kFeatureDim
  Vec history;                  // kFeatureDim
  std::vector<Vec> candidates;  // each kFeatureDim, size >= 1
};

struct ForwardResult {
  Vec logits;
  Vec probs;

  // per-candidate activations retained for backprop
  struct Cache {
    Vec input;        // kInputDim
    Vec zhat1, act1;  // kHidden1
    Vec zhat2, act2;  // kHidden2
    double rstd1 = 0.0, rstd2 = 0.0;
  };
  std::vector<Cache> caches;
};

// Scores every candidate through the shared trunk and softmax-normalizes.
ForwardResult score_actions(const PolicyParams& params, const StepInput& in);

// Shannon entropy in nats; 0 log 0 := 0.
double entropy_loss(std::span<const double> probs);

// Gradient of entropy_loss(score_actions(...)) restricted to the
// adaptable layer-norm coordinates, in flat adaptable order.
Vec backward_adaptable(const PolicyParams& params, const StepInput& in,
                       const ForwardResult& fwd);

// Gradient with respect to every parameter given upstream dL/dlogits,
// accumulated into `grads` (flat order of flatten_all). Used by training.
void backward_all(const PolicyParams& params, const StepInput& in,
                  const ForwardResult& fwd, std::span<const double> dlogits,
                  std::span<double> grads);

struct LabeledStep {
  StepInput input;
  std::size_t action = 0;  // index into input.candidates
};

struct TrainConfig {
  std::uint64_t seed = 0;
  std::size_t epochs = 80;
  std::size_t batch_size = 32;
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double input_noise = 0.03;      // feature jitter during training only
  double early_stop_accuracy = 0.92;
  double accuracy_floor = 0.85;   // enforced unless epochs == 0
};

struct PretrainReport {
  double holdout_accuracy = 0.0;
  std::size_t epochs_run = 0;
  double final_train_loss = 0.0;
};

// Cross-entropy training on teacher-labeled steps. Deterministic given
// config. Throws TrainingError if the holdout accuracy floor is not
// reached within the epoch budget (skipped when epochs == 0).
PolicyParams pretrain(const std::vector<LabeledStep>& train,
                      const std::vector<LabeledStep>& holdout,
                      const TrainConfig& cfg, PretrainReport* report = nullptr);

double step_accuracy(const PolicyParams& params,
                     const std::vector<LabeledStep>& data);

// Versioned binary container of named arrays; round-trips bit-exactly.
// Layout documented in docs/formats.md.
void save_params(const PolicyParams& params, const std::filesystem::path& f);
PolicyParams load_params(const std::filesystem::path& f);

}  // namespace fstta::model
