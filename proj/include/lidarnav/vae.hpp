#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lidarnav/dataset.hpp"
#include "lidarnav/nn.hpp"
#include "lidarnav/optim.hpp"
#include "lidarnav/rng.hpp"

namespace lidarnav {

// z = mean + std ⊙ ε, ε ~ N(0, I); elementwise over matching shapes
Tensor reparameterized_sample(const Tensor& mean, const Tensor& stddev, Rng& rng);

// KL(N(mean, diag(std²)) ‖ N(0, I)) = Σ_i 0.5(μ_i² + σ_i² − 1 − 2 ln σ_i)
double kl_diag_gaussian_to_std_normal(const Tensor& mean, const Tensor& stddev);

struct VaeLoss {
  double total = 0.0;
  double recon = 0.0;  // mean over batch of the summed reconstruction NLL
  double kl = 0.0;     // mean over batch of the KL term (unscaled by β)
};

// ------------------------------------------------------------- image β-VAE

struct ImageVaeConfig {
  int resolution = 128;  // 128 (desk) or 320 (paper)
  int latent_dim = 16;
  double beta = 1.0;
};

class ImageVae {
 public:
  ImageVae(const ImageVaeConfig& cfg, std::uint64_t seed);

  // x: (N,1,R,R) binary images. One reparameterized sample per element;
  // loss = mean over batch of [Σ_pixels BCE(logits, x) + β·KL]. When
  // with_grad, accumulates parameter gradients. train selects batch-norm
  // mode. Throws NumericError if the loss is non-finite.
  VaeLoss elbo_loss(const Tensor& x, Rng& rng, bool train, bool with_grad);

  // eval-mode recognition model q(z|x): mean, std each (N,k)
  void encode(const Tensor& x, Tensor& mean, Tensor& stddev);
  Tensor encode_mean(const Tensor& x);
  // eval-mode generative model: logits / probabilities, (N,1,R,R)
  Tensor decode_logits(const Tensor& z);
  Tensor decode_probs(const Tensor& z);

  std::vector<Param*> params();
  std::string graph_spec() const;
  const ImageVaeConfig& config() const { return cfg_; }

 private:
  ImageVaeConfig cfg_;
  Stack enc_, dec_;
};

// --------------------------------------------------- raw-range baseline VAE

struct RawVaeConfig {
  int beam_count = 720;
  int latent_dim = 16;
  double beta = 1.0;
};

class RawVae {
 public:
  RawVae(const RawVaeConfig& cfg, std::uint64_t seed);

  // x: (N,1,L) normalized ranges with invalid beams already repaired.
  // Reconstruction term: Σ_beams −log N(x_i | μ_i, σ_i).
  VaeLoss elbo_loss(const Tensor& x, Rng& rng, bool train, bool with_grad);

  void encode(const Tensor& x, Tensor& mean, Tensor& stddev);
  Tensor encode_mean(const Tensor& x);
  // per-beam Gaussian over normalized ranges: mean, std each (N,L)
  void decode(const Tensor& z, Tensor& mean, Tensor& stddev);

  // encoder features right before the dense stage, for the circular-shift
  // equivariance property
  Tensor encode_conv_features(const Tensor& x);

  std::vector<Param*> params();
  std::string graph_spec() const;
  const RawVaeConfig& config() const { return cfg_; }

 private:
  RawVaeConfig cfg_;
  std::vector<int> lengths_;  // conv-stack lengths, lengths_[0] = beam_count
  Stack enc_, dec_;
  int conv_layers_ = 0;  // enc_ layers forming the conv stack (pre-flatten)
};

// ------------------------------------------------------------ batch sources

// Binary images packed one byte per pixel.
struct ImageBatchSource {
  int resolution = 0;
  std::vector<std::uint8_t> pixels;  // count × resolution²

  int count() const {
    return resolution == 0 ? 0
                           : static_cast<int>(pixels.size() /
                                              (static_cast<std::size_t>(resolution) * resolution));
  }
  void gather(const std::vector<int>& idx, Tensor& out) const;  // (B,1,R,R)
};

struct RawBatchSource {
  int beam_count = 0;
  std::vector<double> values;  // count × beam_count, normalized, repaired

  int count() const {
    return beam_count == 0 ? 0 : static_cast<int>(values.size() / beam_count);
  }
  void gather(const std::vector<int>& idx, Tensor& out) const;  // (B,1,L)
};

// Preprocess archive scans [begin, end) into training-ready form.
ImageBatchSource make_image_source(const DatasetArchive& d, int resolution,
                                   int begin, int end);
RawBatchSource make_raw_source(const DatasetArchive& d, int begin, int end);

// ---------------------------------------------------------------- training

struct VaeTrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double lr = 1e-4;
  std::uint64_t seed = 0;
};

struct EpochLog {
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

// Adam over shuffled minibatches; writes an NNCK checkpoint (with optimizer
// state and `meta`) after every epoch. A non-finite loss aborts with
// NumericError, leaving the last epoch's checkpoint on disk.
std::vector<EpochLog> train_image_vae(
    ImageVae& vae, const ImageBatchSource& data, const VaeTrainConfig& tc,
    const std::string& checkpoint_path, const nlohmann::json& meta,
    const std::function<void(int, const EpochLog&)>& on_epoch = nullptr);
std::vector<EpochLog> train_raw_vae(
    RawVae& vae, const RawBatchSource& data, const VaeTrainConfig& tc,
    const std::string& checkpoint_path, const nlohmann::json& meta,
    const std::function<void(int, const EpochLog&)>& on_epoch = nullptr);

}  // namespace lidarnav
