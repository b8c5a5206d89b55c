#include "editfit/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "editfit/errors.hpp"
#include "editfit/inference.hpp"
#include "editfit/metrics.hpp"

namespace editfit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct TrainedModel {
  ModelParams params;
  double seconds = 0.0;
};

std::string format_number(double v, int decimals) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::vector<EvalRow> evaluate_spec(const FixtureSpecDir& fixture, const EvalOptions& options,
                                   std::size_t spec_index) {
  const int n = static_cast<int>(fixture.pairs.size());
  if (options.references < 1) throw ArgumentError("need at least one reference");
  TrainConfig train_cfg = options.train;
  train_cfg.seed = options.train.seed + spec_index;

  auto fit = [&](std::vector<ReferencePair> refs) {
    const auto start = Clock::now();
    TrainResult r = train(refs, options.model, train_cfg);
    return TrainedModel{std::move(r.params), options.record_timings ? seconds_since(start) : 0.0};
  };

  auto score = [&](const TrainedModel& model, int index) {
    const ReferencePair& pair = fixture.pairs[index];
    const auto start = Clock::now();
    const Image out = apply_model(model.params, pair.before, {.tile = options.infer_tile});
    const double infer = options.record_timings ? seconds_since(start) : 0.0;
    return EvalRow{fixture.spec_id, fixture.image_ids[index], psnr(out, pair.after),
                   ssim(out, pair.after), model.seconds, infer};
  };

  std::vector<EvalRow> rows;
  if (!options.auto_ref) {
    const int first = options.first_eval_image < 0 ? options.references : options.first_eval_image;
    if (options.references > n || first >= n || first < options.references) {
      throw ArgumentError("fixture '" + fixture.spec_id + "' has " + std::to_string(n) +
                          " images; need references plus at least one held-out image");
    }
    std::vector<ReferencePair> refs(fixture.pairs.begin(), fixture.pairs.begin() + options.references);
    const TrainedModel model = fit(std::move(refs));
    for (int i = first; i < n; ++i) rows.push_back(score(model, i));
    return rows;
  }

  std::map<std::size_t, TrainedModel> cache;
  for (int i = 1; i < n; ++i) {
    std::vector<Image> candidates;
    std::vector<int> candidate_index;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      candidates.push_back(fixture.pairs[j].before);
      candidate_index.push_back(j);
    }
    const std::size_t ref = candidate_index[choose_reference(fixture.pairs[i].before, candidates).index];
    auto it = cache.find(ref);
    if (it == cache.end()) it = cache.emplace(ref, fit({fixture.pairs[ref]})).first;
    rows.push_back(score(it->second, i));
  }
  return rows;
}

std::vector<EvalRow> evaluate_fixtures(const std::vector<FixtureSpecDir>& fixtures,
                                       const EvalOptions& options) {
  std::vector<EvalRow> rows;
  for (std::size_t s = 0; s < fixtures.size(); ++s) {
    auto part = evaluate_spec(fixtures[s], options, s);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

double mean_psnr(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += std::min(r.psnr, kPsnrAverageCap);
  return sum / static_cast<double>(rows.size());
}

double mean_ssim(const std::vector<EvalRow>& rows) {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.ssim;
  return sum / static_cast<double>(rows.size());
}

void write_csv(const std::vector<EvalRow>& rows, std::ostream& out) {
  out << "spec_id,image_id,psnr,ssim,train_seconds,infer_seconds\n";
  double train_sum = 0.0;
  double infer_sum = 0.0;
  for (const auto& r : rows) {
    out << r.spec_id << ',' << r.image_id << ',' << format_number(r.psnr, 6) << ','
        << format_number(r.ssim, 6) << ',' << format_number(r.train_seconds, 3) << ','
        << format_number(r.infer_seconds, 3) << '\n';
    train_sum += r.train_seconds;
    infer_sum += r.infer_seconds;
  }
  const double count = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  out << "mean,," << format_number(mean_psnr(rows), 6) << ',' << format_number(mean_ssim(rows), 6)
      << ',' << format_number(train_sum / count, 3) << ',' << format_number(infer_sum / count, 3)
      << '\n';
}

}  // namespace editfit
