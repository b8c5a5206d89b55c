#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "editfit/model.hpp"
#include "editfit/presets.hpp"
#include "editfit/trainer.hpp"

namespace editfit {

struct EvalOptions {
  ModelConfig model;
  TrainConfig train;
  bool auto_ref = false;   // pick each held-out image's reference by colour histogram
  int references = 1;      // designated mode: train on images [0, references)
  int first_eval_image = -1;  // designated mode: evaluate images from here on (-1 = references)
  bool record_timings = true;
  int infer_tile = 256;
};

struct EvalRow {
  std::string spec_id;
  std::string image_id;
  double psnr = 0.0;
  double ssim = 0.0;
  double train_seconds = 0.0;
  double infer_seconds = 0.0;
};

/// PSNR values above this are clipped when averaging (exact reproductions give +inf).
inline constexpr double kPsnrAverageCap = 100.0;

/// Trains on the spec's reference pair(s) and scores every held-out image.
/// The training seed is `options.train.seed + spec_index`.
std::vector<EvalRow> evaluate_spec(const FixtureSpecDir& fixture, const EvalOptions& options,
                                   std::size_t spec_index);

std::vector<EvalRow> evaluate_fixtures(const std::vector<FixtureSpecDir>& fixtures,
                                       const EvalOptions& options);

double mean_psnr(const std::vector<EvalRow>& rows);
double mean_ssim(const std::vector<EvalRow>& rows);

/// spec_id,image_id,psnr,ssim,train_seconds,infer_seconds; last row holds the means.
void write_csv(const std::vector<EvalRow>& rows, std::ostream& out);

}  // namespace editfit
