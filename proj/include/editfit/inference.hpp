#pragma once

#include "editfit/image.hpp"
#include "editfit/model.hpp"

namespace editfit {

struct InferenceOptions {
  int tile = 256;
  int threads = 0;  // 0 = hardware concurrency
};

/// Applies the learned edit to a full image. Tiles are evaluated with a halo of
/// `config.halo()` pixels (edge-clamped at the true image border) using coordinates
/// of the full image, then cropped, stitched and clamped to [0,1].
Image apply_model(const ModelParams& params, const Image& image, const InferenceOptions& options = {});

/// Single-pass evaluation of the whole image; reference path for the tiled version.
Image apply_model_whole(const ModelParams& params, const Image& image);

}  // namespace editfit
