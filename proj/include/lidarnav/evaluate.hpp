#pragma once

#include "lidarnav/metrics.hpp"
#include "lidarnav/vae.hpp"

namespace lidarnav {

// Held-out reconstruction metrics for the image pipeline: encodes with the
// posterior mean, MSE against the probability map, FP/FN against one
// Bernoulli sample of the generative model per scan.
ReconReport eval_image_recon(ImageVae& vae, const ImageBatchSource& heldout,
                             Rng& rng, int batch = 64);

// Raw-pipeline metrics in image space: the reconstruction image is
// rasterized from the decoded per-beam mean ranges (MSE) or from per-beam
// Gaussian samples (FP/FN), then compared against the same local-image
// targets the image pipeline uses.
ReconReport eval_raw_recon(RawVae& vae, const RawBatchSource& heldout,
                           const ImageBatchSource& targets, double max_range,
                           Rng& rng, int batch = 64);

}  // namespace lidarnav
