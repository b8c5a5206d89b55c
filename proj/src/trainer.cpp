#include "editfit/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include "editfit/errors.hpp"
#include "heap.hpp"

#if defined(__GLIBC__)
#endif

namespace editfit {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid train config: " + what); };
  if (iterations < 1) fail("iterations must be >= 1");
  if (batch < 1) fail("batch must be >= 1");
  if (window < 1 || window % 2 == 0) fail("window must be odd and >= 1");
  if (!(lr_end >= 0.0) || !(lr_start >= lr_end)) fail("need lr_start >= lr_end >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) fail("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) fail("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) fail("eps must be > 0");
  if (!(wd_rgb_branch >= 0.0) || !(wd_coord_branch >= 0.0) || !(wd_other >= 0.0)) {
    fail("weight decays must be >= 0");
  }
  if (threads < 0) fail("threads must be >= 0");
  if (chunk_windows < 1) fail("chunk_windows must be >= 1");
}

std::string describe(const TrainConfig& c) {
  std::ostringstream os;
  os << "iterations=" << c.iterations << " batch=" << c.batch << " window=" << c.window
     << " lr_start=" << c.lr_start << " lr_end=" << c.lr_end << " beta1=" << c.beta1
     << " beta2=" << c.beta2 << " eps=" << c.eps << " wd_rgb_branch=" << c.wd_rgb_branch
     << " wd_coord_branch=" << c.wd_coord_branch << " wd_other=" << c.wd_other
     << " seed=" << c.seed << " chunk_windows=" << c.chunk_windows;
  return os.str();
}

double lr_at(int step, const TrainConfig& c) {
  const double progress = static_cast<double>(step) / c.iterations;
  return c.lr_end + 0.5 * (c.lr_start - c.lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
AdamState<T> make_adam_state(const BasicModelParams<T>& params) {
  AdamState<T> s;
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t.values.size(), T(0));
    s.v.emplace_back(t.values.size(), T(0));
  }
  return s;
}

double weight_decay_for(const std::string& name, const TrainConfig& c) {
  if (name.starts_with("rgb.")) return c.wd_rgb_branch;
  if (name.starts_with("coord.")) return c.wd_coord_branch;
  return c.wd_other;
}

template <typename T>
void adam_step(AdamState<T>& state, BasicModelParams<T>& params, const Gradients<T>& grads,
               double lr, const TrainConfig& config) {
  if (state.m.size() != params.tensors.size()) {
    throw StateError("optimizer state does not match the model");
  }
  state.t += 1;
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config.beta1, static_cast<double>(state.t)));
  const T correction2 = static_cast<T>(1.0 - std::pow(config.beta2, static_cast<double>(state.t)));
  const T step = static_cast<T>(lr);
  const T eps = static_cast<T>(config.eps);

  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    auto& tensor = params.tensors[k];
    auto it = grads.find(tensor.name);
    if (it == grads.end()) throw StateError("no gradient for parameter '" + tensor.name + "'");
    const auto& g = it->second;
    if (g.size() != tensor.values.size()) {
      throw StateError("gradient for '" + tensor.name + "' has the wrong size");
    }
    const T decay = static_cast<T>(lr * weight_decay_for(tensor.name, config));
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      T p = tensor.values[i];
      p -= decay * p;
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      p -= step * m_hat / (std::sqrt(v_hat) + eps);
      tensor.values[i] = p;
    }
  }
}

template AdamState<float> make_adam_state(const BasicModelParams<float>&);
template AdamState<double> make_adam_state(const BasicModelParams<double>&);
template void adam_step(AdamState<float>&, BasicModelParams<float>&, const Gradients<float>&, double,
                        const TrainConfig&);
template void adam_step(AdamState<double>&, BasicModelParams<double>&, const Gradients<double>&,
                        double, const TrainConfig&);

namespace {

struct ChunkResult {
  double loss = 0.0;
  Gradients<float> grads;
};

ChunkResult run_chunk(const ModelParams& params, const WindowBatch& batch, int first, int last) {
  Tape<float> tape;
  const Var rgb = tape.input(batch.rgb.slice_batch(first, last));
  const Var coords = tape.input(batch.coords.slice_batch(first, last));
  const Var out = forward_model(tape, params, rgb, coords);
  const Var loss = tape.l1_loss(out, batch.target.slice_batch(first, last));
  const double weight = static_cast<double>(last - first) / batch.count;
  ChunkResult r;
  r.loss = weight * tape.scalar(loss);
  r.grads = tape.backprop(loss, static_cast<float>(weight));
  return r;
}

void accumulate(Gradients<float>& total, const Gradients<float>& part) {
  for (const auto& [name, g] : part) {
    auto [it, inserted] = total.try_emplace(name, g);
    if (!inserted) {
      auto& acc = it->second;
      for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
    }
  }
}

}  // namespace

TrainResult train(std::span<const ReferencePair> pairs, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ProgressFn& progress) {
  return train(pairs, init_model(model_config, train_config.seed), train_config, progress);
}

TrainResult train(std::span<const ReferencePair> pairs, ModelParams initial,
                  const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  initial.config.validate();
  if (pairs.empty()) throw ArgumentError("training needs at least one reference pair");
  if (cfg.window != initial.config.window_n) {
    throw ConfigError("train window (" + std::to_string(cfg.window) +
                      ") differs from model window_n (" + std::to_string(initial.config.window_n) + ")");
  }

  detail::keep_heap_resident();
  Rng rng(cfg.seed);
  TrainResult result{std::move(initial), {}};
  result.loss_trace.reserve(cfg.iterations);
  AdamState<float> adam = make_adam_state(result.params);

  const int chunks = (cfg.batch + cfg.chunk_windows - 1) / cfg.chunk_windows;
  int workers = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, chunks);
  std::vector<std::optional<ChunkResult>> slots(chunks);

  for (int it = 0; it < cfg.iterations; ++it) {
    const WindowBatch batch = sample_windows(pairs, cfg.batch, cfg.window, rng);
    auto bounds = [&](int c) {
      return std::pair{c * cfg.chunk_windows, std::min(cfg.batch, (c + 1) * cfg.chunk_windows)};
    };

    // Chunk results are reduced in chunk order, so the sum is independent of `workers`.
    Gradients<float> grads;
    double loss = 0.0;
    if (workers == 1) {
      for (int c = 0; c < chunks; ++c) {
        auto [lo, hi] = bounds(c);
        ChunkResult r = run_chunk(result.params, batch, lo, hi);
        loss += r.loss;
        accumulate(grads, r.grads);
      }
    } else {
      std::atomic<int> next{0};
      std::vector<std::exception_ptr> errors(workers);
      {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) {
          pool.emplace_back([&, w] {
            try {
              for (int c = next++; c < chunks; c = next++) {
                auto [lo, hi] = bounds(c);
                slots[c] = run_chunk(result.params, batch, lo, hi);
              }
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
      }
      for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      for (int c = 0; c < chunks; ++c) {
        loss += slots[c]->loss;
        accumulate(grads, slots[c]->grads);
        slots[c].reset();
      }
    }

    adam_step(adam, result.params, grads, lr_at(it, cfg), cfg);
    result.loss_trace.push_back(static_cast<float>(loss));
    if (progress) progress(it, static_cast<float>(loss));
  }
  return result;
}

}  // namespace editfit
