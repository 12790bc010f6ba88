#include "lidarnav/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "lidarnav/errors.hpp"
#include "lidarnav/preprocess.hpp"

namespace lidarnav {

namespace {

std::vector<int> batch_range(int begin, int count) {
  std::vector<int> idx(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = begin + i;
  return idx;
}

// binary image from normalized per-beam values clamped into [0,1]
std::vector<std::uint8_t> rasterize_values(const double* values, int beam_count,
                                           int resolution, double max_range) {
  NormalizedScan ns;
  ns.values.assign(values, values + beam_count);
  for (double& v : ns.values) v = std::clamp(v, 0.0, 1.0);
  LocalOccupancyImage img =
      scan_to_local_image(ns, resolution, 2.0 * max_range, max_range);
  return std::move(img.pixels);
}

}  // namespace

ReconReport eval_image_recon(ImageVae& vae, const ImageBatchSource& heldout,
                             Rng& rng, int batch) {
  const int res = heldout.resolution;
  if (res != vae.config().resolution)
    throw DataError("eval_image_recon: resolution mismatch");
  const std::size_t px = static_cast<std::size_t>(res) * res;
  ReconReport rep;
  Tensor x;
  for (int at = 0; at < heldout.count(); at += batch) {
    const int b = std::min(batch, heldout.count() - at);
    heldout.gather(batch_range(at, b), x);
    Tensor probs = vae.decode_probs(vae.encode_mean(x));
    for (int i = 0; i < b; ++i) {
      const std::uint8_t* target = heldout.pixels.data() +
                                   static_cast<std::size_t>(at + i) * px;
      const double* p = probs.data() + static_cast<std::size_t>(i) * px;
      std::vector<std::uint8_t> tgt(target, target + px);
      std::vector<double> pm(p, p + px);
      std::vector<std::uint8_t> sample(px);
      for (std::size_t j = 0; j < px; ++j) sample[j] = rng.bernoulli(pm[j]);
      rep.add_scan(static_cast<double>(false_positives(sample, tgt)),
                   static_cast<double>(false_negatives(sample, tgt)),
                   mse_expectation(pm, tgt));
    }
  }
  rep.finalize();
  return rep;
}

ReconReport eval_raw_recon(RawVae& vae, const RawBatchSource& heldout,
                           const ImageBatchSource& targets, double max_range,
                           Rng& rng, int batch) {
  if (heldout.count() != targets.count())
    throw DataError("eval_raw_recon: scan/target counts differ");
  const int res = targets.resolution;
  const int l = heldout.beam_count;
  const std::size_t px = static_cast<std::size_t>(res) * res;
  ReconReport rep;
  Tensor x;
  for (int at = 0; at < heldout.count(); at += batch) {
    const int b = std::min(batch, heldout.count() - at);
    heldout.gather(batch_range(at, b), x);
    Tensor mean, stddev;
    vae.decode(vae.encode_mean(x), mean, stddev);
    for (int i = 0; i < b; ++i) {
      const std::uint8_t* target =
          targets.pixels.data() + static_cast<std::size_t>(at + i) * px;
      std::vector<std::uint8_t> tgt(target, target + px);

      const double* mu = mean.data() + static_cast<std::size_t>(i) * l;
      const double* sd = stddev.data() + static_cast<std::size_t>(i) * l;
      std::vector<std::uint8_t> recon_mean_img =
          rasterize_values(mu, l, res, max_range);
      std::vector<double> pm(px);
      for (std::size_t j = 0; j < px; ++j) pm[j] = recon_mean_img[j];

      std::vector<double> sampled(static_cast<std::size_t>(l));
      for (int j = 0; j < l; ++j)
        sampled[static_cast<std::size_t>(j)] = rng.normal(mu[j], sd[j]);
      std::vector<std::uint8_t> sample_img =
          rasterize_values(sampled.data(), l, res, max_range);

      rep.add_scan(static_cast<double>(false_positives(sample_img, tgt)),
                   static_cast<double>(false_negatives(sample_img, tgt)),
                   mse_expectation(pm, tgt));
    }
  }
  rep.finalize();
  return rep;
}

}  // namespace lidarnav
