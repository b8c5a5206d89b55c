#pragma once

// Central finite-difference checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "editfit/feature_map.hpp"
#include "editfit/model.hpp"
#include "editfit/tape.hpp"

namespace gradcheck {

using editfit::FeatureMap;
using editfit::Gradients;
using editfit::ParamRef;
using editfit::Tape;
using editfit::Var;

inline constexpr double kStep = 1e-6;
inline constexpr double kMaxRelative = 1e-4;
inline constexpr double kAbsoluteFloor = 1e-8;

/// |a - n| scaled so that the result is < kMaxRelative exactly when the pair passes
/// either the relative test or the absolute floor.
inline double scaled_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kAbsoluteFloor / kMaxRelative});
  return std::abs(analytic - numeric) / scale;
}

struct Result {
  double max_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

/// Evaluates the loss; when `grads` is non-null it also back-propagates and stores the
/// gradient of every array listed for checking under the same name.
using Runner = std::function<double(Gradients<double>* grads)>;
using Arrays = std::vector<std::pair<std::string, std::vector<double>*>>;

inline Result check(const Runner& run, const Arrays& arrays, std::uint64_t seed,
                    std::size_t max_per_array = 48) {
  Gradients<double> grads;
  run(&grads);
  std::mt19937_64 rng(seed);
  Result result;
  for (const auto& [name, values] : arrays) {
    const auto& g = grads.at(name);
    std::vector<std::size_t> idx(values->size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > max_per_array) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_per_array);
    }
    for (std::size_t i : idx) {
      const double keep = (*values)[i];
      auto central = [&](double h) {
        (*values)[i] = keep + h;
        const double up = run(nullptr);
        (*values)[i] = keep - h;
        const double down = run(nullptr);
        (*values)[i] = keep;
        return (up - down) / (2 * h);
      };
      // Richardson step halving; sine stacks with large weights have enough curvature
      // that a plain h^2 estimate is off in the fourth digit.
      const double numeric = (4 * central(kStep / 2) - central(kStep)) / 3;
      const double err = scaled_error(g[i], numeric);
      ++result.checked;
      if (result.worst.empty() || err > result.max_error) {
        result.max_error = err;
        result.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(g[i]) +
                       " numeric " + std::to_string(numeric);
      }
    }
  }
  return result;
}

inline FeatureMap<double> random_map(int c, int b, int h, int w, std::mt19937_64& rng,
                                     double lo = -1.0, double hi = 1.0) {
  FeatureMap<double> m(c, b, h, w);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : m.values) v = u(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

/// Loss head used by the checks: an L1 loss against a target placed 5 units above or
/// below the unperturbed output, so no element crosses the kink under the finite-difference step and
/// the loss is a fixed +-1/N weighting of the outputs.
class OffsetTarget {
 public:
  explicit OffsetTarget(std::uint64_t seed) : rng_(seed) {}

  const FeatureMap<double>& for_output(const FeatureMap<double>& out) {
    if (!target_) {
      target_ = out;
      std::bernoulli_distribution coin(0.5);
      for (auto& v : target_->values) v += coin(rng_) ? 5.0 : -5.0;
    }
    return *target_;
  }

 private:
  std::mt19937_64 rng_;
  std::optional<FeatureMap<double>> target_;
};

/// Gradient check of an arbitrary graph over named input maps and parameter tensors.
/// `build` records the graph from the registered inputs and parameters.
using Builder = std::function<Var(Tape<double>&, const std::vector<Var>&, const std::vector<ParamRef>&)>;

inline Result check_graph(std::vector<FeatureMap<double>> inputs,
                          std::vector<editfit::NamedTensor<double>> params, const Builder& build,
                          std::uint64_t seed) {
  OffsetTarget target(seed ^ 0x5eedULL);
  Runner run = [&](Gradients<double>* grads) {
    Tape<double> tape;
    std::vector<Var> in;
    for (const auto& m : inputs) in.push_back(tape.input(m));
    std::vector<ParamRef> refs;
    for (const auto& p : params) refs.push_back(tape.parameter(p));
    const Var out = build(tape, in, refs);
    const Var loss = tape.l1_loss(out, target.for_output(tape.value(out)));
    const double value = tape.scalar(loss);
    if (grads) {
      *grads = tape.backprop(loss);
      for (std::size_t i = 0; i < in.size(); ++i) {
        (*grads)["input" + std::to_string(i)] = tape.grad(in[i]).values;
      }
    }
    return value;
  };
  Arrays arrays;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    arrays.emplace_back("input" + std::to_string(i), &inputs[i].values);
  }
  for (auto& p : params) arrays.emplace_back(p.name, &p.values);
  return check(run, arrays, seed);
}

/// Gradient check of the full network with respect to every parameter and both inputs.
inline Result check_model(editfit::BasicModelParams<double> params, FeatureMap<double> rgb,
                          FeatureMap<double> coords, std::uint64_t seed,
                          std::size_t max_per_array = 24) {
  OffsetTarget target(seed ^ 0x5eedULL);
  Runner run = [&](Gradients<double>* grads) {
    Tape<double> tape;
    const Var r = tape.input(rgb);
    const Var c = tape.input(coords);
    const Var out = editfit::forward_model(tape, params, r, c);
    const Var loss = tape.l1_loss(out, target.for_output(tape.value(out)));
    const double value = tape.scalar(loss);
    if (grads) {
      *grads = tape.backprop(loss);
      (*grads)["input.rgb"] = tape.grad(r).values;
      (*grads)["input.coords"] = tape.grad(c).values;
    }
    return value;
  };
  Arrays arrays{{"input.rgb", &rgb.values}, {"input.coords", &coords.values}};
  for (auto& t : params.tensors) arrays.emplace_back(t.name, &t.values);
  return check(run, arrays, seed, max_per_array);
}

/// Default initialisation leaves the head at zero, which hides most of the network from
/// the output. Fill every tensor with random values so every path carries gradient.
inline editfit::BasicModelParams<double> randomized(const editfit::ModelConfig& config,
                                                    std::uint64_t seed) {
  auto params = editfit::init_model(config, seed).cast<double>();
  std::mt19937_64 rng(seed * 7919 + 1);
  const bool sine = config.activation == editfit::Activation::Sine;
  for (auto& t : params.tensors) {
    double scale = 0.3;
    if (t.shape.size() == 2) {
      // twice the initialisation bound, with zero-initialised layers filled in too
      const double fan_in = t.shape[1];
      if (!sine) {
        scale = std::sqrt(6.0 / fan_in);
      } else if (t.name.ends_with(".0.weight") && !t.name.starts_with("context") && !t.name.starts_with("trunk")) {
        scale = 2.0 / fan_in;
      } else {
        scale = 2.0 * std::sqrt(6.0 / fan_in) / config.omega_hidden;
      }
    }
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : t.values) v = u(rng);
  }
  return params;
}

}  // namespace gradcheck
