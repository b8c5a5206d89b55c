#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "editfit/model.hpp"
#include "editfit/sampler.hpp"
#include "editfit/tape.hpp"

namespace editfit {

struct TrainConfig {
  int iterations = 1000;
  int batch = 484;
  int window = 13;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double wd_rgb_branch = 3.0;
  double wd_coord_branch = 10.0;
  double wd_other = 3.0;
  std::uint64_t seed = 0;
  // Execution only; results do not depend on `threads`.
  int threads = 0;       // 0 = hardware concurrency
  int chunk_windows = 11;

  void validate() const;
};

std::string describe(const TrainConfig& config);

/// Cosine annealing from lr_start (step 0) to lr_end (step == iterations).
double lr_at(int step, const TrainConfig& config);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::int64_t t = 0;
};

template <typename T>
AdamState<T> make_adam_state(const BasicModelParams<T>& params);

/// Weight-decay coefficient for a parameter, chosen by name prefix ("rgb.", "coord.", other).
double weight_decay_for(const std::string& name, const TrainConfig& config);

/// One Adam update with bias correction, preceded by decoupled weight decay
/// p <- p - lr * wd * p. Throws StateError when a parameter has no gradient.
template <typename T>
void adam_step(AdamState<T>& state, BasicModelParams<T>& params, const Gradients<T>& grads,
               double lr, const TrainConfig& config);

struct TrainResult {
  ModelParams params;
  std::vector<float> loss_trace;  // one value per iteration
};

using ProgressFn = std::function<void(int iteration, float loss)>;

/// Fits a freshly initialised model (seeded by config.seed).
TrainResult train(std::span<const ReferencePair> pairs, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ProgressFn& progress = {});

/// Continues from the given parameters.
TrainResult train(std::span<const ReferencePair> pairs, ModelParams initial,
                  const TrainConfig& train_config, const ProgressFn& progress = {});

extern template AdamState<float> make_adam_state(const BasicModelParams<float>&);
extern template AdamState<double> make_adam_state(const BasicModelParams<double>&);
extern template void adam_step(AdamState<float>&, BasicModelParams<float>&, const Gradients<float>&,
                               double, const TrainConfig&);
extern template void adam_step(AdamState<double>&, BasicModelParams<double>&,
                               const Gradients<double>&, double, const TrainConfig&);

}  // namespace editfit
