#include "lidarnav/vae.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lidarnav/checkpoint.hpp"
#include "lidarnav/errors.hpp"
#include "lidarnav/preprocess.hpp"

namespace lidarnav {

namespace {

constexpr double kRawStdClamp = 10.0;  // std = exp(0.5·raw), raw in [−10, 10]
constexpr double kLn2Pi = 1.8378770664093453;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// stable −log p for a Bernoulli given logits: max(l,0) − l·t + log(1+e^−|l|)
double bce_with_logits(double logit, double target) {
  return std::max(logit, 0.0) - logit * target + std::log1p(std::exp(-std::abs(logit)));
}

// Gaussian head over a (N, 2k) tensor laid out [mean | raw std]; the same
// split works for (N, 2, L) decoder outputs since they are contiguous per
// sample. std = exp(0.5·clamp(raw)); clamped entries get zero gradient.
struct GaussianHead {
  Tensor mean;  // (N, k)
  Tensor std;   // (N, k)
  std::vector<std::uint8_t> clamped;
};

GaussianHead split_gaussian_head(const Tensor& raw, int k) {
  const int n = raw.dim(0);
  GaussianHead h{Tensor({n, k}), Tensor({n, k}), {}};
  h.clamped.assign(static_cast<std::size_t>(n) * k, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      h.mean[i * k + j] = raw[i * 2 * k + j];
      double r = raw[i * 2 * k + k + j];
      if (r < -kRawStdClamp || r > kRawStdClamp) {
        h.clamped[static_cast<std::size_t>(i) * k + j] = 1;
        r = std::clamp(r, -kRawStdClamp, kRawStdClamp);
      }
      h.std[i * k + j] = std::exp(0.5 * r);
    }
  return h;
}

Tensor gaussian_head_backward(const GaussianHead& h, const Tensor& dmean,
                              const Tensor& dstd) {
  const int n = h.mean.dim(0), k = h.mean.dim(1);
  Tensor draw({n, 2 * k});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) {
      draw[i * 2 * k + j] = dmean[i * k + j];
      draw[i * 2 * k + k + j] =
          h.clamped[static_cast<std::size_t>(i) * k + j]
              ? 0.0
              : dstd[i * k + j] * 0.5 * h.std[i * k + j];
    }
  return draw;
}

double kl_row(const GaussianHead& h, int i) {
  const int k = h.mean.dim(1);
  double kl = 0.0;
  for (int j = 0; j < k; ++j) {
    const double mu = h.mean[i * k + j], sd = h.std[i * k + j];
    kl += 0.5 * (mu * mu + sd * sd - 1.0 - 2.0 * std::log(sd));
  }
  return kl;
}

// Fisher-Yates
void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(rng.uniform_int(0, i))]);
}

}  // namespace

Tensor reparameterized_sample(const Tensor& mean, const Tensor& stddev, Rng& rng) {
  if (!mean.same_shape(stddev))
    throw DataError("reparameterized_sample: mean/std shape mismatch");
  Tensor z(mean.shape());
  for (std::int64_t i = 0; i < z.size(); ++i)
    z[i] = mean[i] + stddev[i] * rng.normal();
  return z;
}

double kl_diag_gaussian_to_std_normal(const Tensor& mean, const Tensor& stddev) {
  if (!mean.same_shape(stddev))
    throw DataError("kl: mean/std shape mismatch");
  double kl = 0.0;
  for (std::int64_t i = 0; i < mean.size(); ++i) {
    const double mu = mean[i], sd = stddev[i];
    kl += 0.5 * (mu * mu + sd * sd - 1.0 - 2.0 * std::log(sd));
  }
  return kl;
}

// ----------------------------------------------------------------- ImageVae

ImageVae::ImageVae(const ImageVaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.latent_dim < 1) throw ConfigError("image vae: latent_dim must be >= 1");
  if (cfg.beta < 0.0) throw ConfigError("image vae: beta must be >= 0");
  if (cfg.resolution < 32 || cfg.resolution % 32 != 0)
    throw ConfigError("image vae: resolution must be a positive multiple of 32");
  const bool deep = cfg.resolution >= 256;  // paper-faithful 320 px graph
  const int k = cfg.latent_dim;
  Rng rng = Rng(seed).split(0x1a6e);

  // encoder: Table-1 conv stack, BN preceding each conv
  int r = cfg.resolution;
  enc_.add<BatchNorm>("enc.bn1", 1);
  enc_.add<Conv2d>("enc.conv1", 1, 32, 3, 2, rng);
  enc_.add<Relu>("enc.relu1");
  r = (r + 1) / 2;
  enc_.add<MaxPool2d>("enc.maxpool", 2);
  r /= 2;
  enc_.add<BatchNorm>("enc.bn2", 32);
  enc_.add<Conv2d>("enc.conv2", 32, 32, 3, 2, rng);
  enc_.add<Relu>("enc.relu2");
  r = (r + 1) / 2;
  enc_.add<BatchNorm>("enc.bn3", 32);
  enc_.add<Conv2d>("enc.conv3", 32, 64, 3, 1, rng);
  enc_.add<Relu>("enc.relu3");
  enc_.add<AvgPool2d>("enc.avgpool", 2);
  r /= 2;
  enc_.add<BatchNorm>("enc.bn4", 64);
  enc_.add<Conv2d>("enc.conv4", 64, 128, 3, 2, rng);
  enc_.add<Relu>("enc.relu4");
  r = (r + 1) / 2;
  if (deep) {
    enc_.add<BatchNorm>("enc.bn5", 128);
    enc_.add<Conv2d>("enc.conv5", 128, 128, 3, 2, rng);
    enc_.add<Relu>("enc.relu5");
    r = (r + 1) / 2;
  }
  enc_.add<Flatten>("enc.flatten");
  enc_.add<Dense>("enc.dense1", 128 * r * r, 256, rng);
  enc_.add<Relu>("enc.relu_d1");
  enc_.add<Dense>("enc.head", 256, 2 * k, rng);

  // decoder: dense stages, transposed-conv chain, Bernoulli-logit head
  const int base = r;
  dec_.add<Dense>("dec.dense1", k, 256, rng);
  dec_.add<Relu>("dec.relu_d1");
  dec_.add<Dense>("dec.dense2", 256, 128 * base * base, rng);
  dec_.add<Relu>("dec.relu_d2");
  dec_.add<Reshape>("dec.reshape", std::vector<int>{128, base, base});
  std::vector<int> tc_out = deep ? std::vector<int>{128, 64, 64, 32, 32, 32}
                                 : std::vector<int>{128, 64, 64, 32, 32};
  int in_c = 128, size = base;
  for (std::size_t i = 0; i < tc_out.size(); ++i) {
    size *= 2;
    const std::string tag = std::to_string(i + 1);
    dec_.add<ConvTranspose2d>("dec.tconv" + tag, in_c, tc_out[i], 3, 2, size,
                              size, rng);
    dec_.add<Relu>("dec.relu" + tag);
    in_c = tc_out[i];
  }
  if (size != cfg.resolution)
    throw ConfigError("image vae: decoder does not reach input resolution");
  dec_.add<Conv2d>("dec.head", in_c, 1, 3, 1, rng);
}

VaeLoss ImageVae::elbo_loss(const Tensor& x, Rng& rng, bool train, bool with_grad) {
  const int r = cfg_.resolution, k = cfg_.latent_dim;
  if (x.ndim() != 4 || x.dim(1) != 1 || x.dim(2) != r || x.dim(3) != r)
    throw DataError("image vae: batch shape must be (N,1," + std::to_string(r) +
                    "," + std::to_string(r) + ")");
  const int n = x.dim(0);

  Tensor raw = enc_.forward(x, train);
  GaussianHead head = split_gaussian_head(raw, k);
  Tensor eps({n, k});
  for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  Tensor z({n, k});
  for (std::int64_t i = 0; i < z.size(); ++i)
    z[i] = head.mean[i] + head.std[i] * eps[i];
  Tensor logits = dec_.forward(z, train);

  const std::int64_t pixels = static_cast<std::int64_t>(r) * r;
  VaeLoss out;
  for (int i = 0; i < n; ++i) {
    double bce = 0.0;
    for (std::int64_t p = 0; p < pixels; ++p)
      bce += bce_with_logits(logits[i * pixels + p], x[i * pixels + p]);
    out.recon += bce;
    out.kl += kl_row(head, i);
  }
  out.recon /= n;
  out.kl /= n;
  out.total = out.recon + cfg_.beta * out.kl;
  if (!std::isfinite(out.total))
    throw NumericError("image vae: non-finite loss");
  if (!with_grad) return out;

  Tensor dlogits(logits.shape());
  for (int i = 0; i < n; ++i)
    for (std::int64_t p = 0; p < pixels; ++p)
      dlogits[i * pixels + p] =
          (sigmoid(logits[i * pixels + p]) - x[i * pixels + p]) / n;
  Tensor dz = dec_.backward(dlogits);

  const double bscale = cfg_.beta / n;
  Tensor dmean({n, k}), dstd({n, k});
  for (std::int64_t i = 0; i < dz.size(); ++i) {
    dmean[i] = dz[i] + bscale * head.mean[i];
    dstd[i] = dz[i] * eps[i] + bscale * (head.std[i] - 1.0 / head.std[i]);
  }
  enc_.backward(gaussian_head_backward(head, dmean, dstd));
  return out;
}

void ImageVae::encode(const Tensor& x, Tensor& mean, Tensor& stddev) {
  Tensor raw = enc_.forward(x, false);
  GaussianHead head = split_gaussian_head(raw, cfg_.latent_dim);
  mean = std::move(head.mean);
  stddev = std::move(head.std);
}

Tensor ImageVae::encode_mean(const Tensor& x) {
  Tensor mean, stddev;
  encode(x, mean, stddev);
  return mean;
}

Tensor ImageVae::decode_logits(const Tensor& z) { return dec_.forward(z, false); }

Tensor ImageVae::decode_probs(const Tensor& z) {
  Tensor logits = decode_logits(z);
  for (std::int64_t i = 0; i < logits.size(); ++i) logits[i] = sigmoid(logits[i]);
  return logits;
}

std::vector<Param*> ImageVae::params() {
  std::vector<Param*> out = enc_.params();
  for (Param* p : dec_.params()) out.push_back(p);
  return out;
}

std::string ImageVae::graph_spec() const {
  return enc_.spec() + "|" + dec_.spec();
}

// ------------------------------------------------------------------- RawVae

RawVae::RawVae(const RawVaeConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.latent_dim < 1) throw ConfigError("raw vae: latent_dim must be >= 1");
  if (cfg.beta < 0.0) throw ConfigError("raw vae: beta must be >= 0");
  if (cfg.beam_count < 32) throw ConfigError("raw vae: beam_count too small");
  const int k = cfg.latent_dim;
  Rng rng = Rng(seed).split(0x4a3d);

  lengths_ = {cfg.beam_count};
  for (int i = 0; i < 5; ++i) lengths_.push_back((lengths_.back() + 1) / 2);

  const int enc_ch[6] = {1, 32, 32, 64, 128, 128};
  for (int i = 0; i < 5; ++i) {
    const std::string tag = std::to_string(i + 1);
    enc_.add<BatchNorm>("enc.bn" + tag, enc_ch[i]);
    enc_.add<Conv1dCircular>("enc.conv" + tag, enc_ch[i], enc_ch[i + 1], 5, 2, rng);
    enc_.add<Relu>("enc.relu" + tag);
  }
  conv_layers_ = 15;
  enc_.add<Flatten>("enc.flatten");
  enc_.add<Dense>("enc.dense1", 128 * lengths_[5], 256, rng);
  enc_.add<Relu>("enc.relu_d1");
  enc_.add<Dense>("enc.head", 256, 2 * k, rng);

  dec_.add<Dense>("dec.dense1", k, 256, rng);
  dec_.add<Relu>("dec.relu_d1");
  dec_.add<Dense>("dec.dense2", 256, 128 * lengths_[5], rng);
  dec_.add<Relu>("dec.relu_d2");
  dec_.add<Reshape>("dec.reshape", std::vector<int>{128, lengths_[5]});
  const int tc_out[5] = {128, 64, 32, 32, 32};
  int in_c = 128;
  for (int i = 0; i < 5; ++i) {
    const std::string tag = std::to_string(i + 1);
    dec_.add<ConvTranspose1dCircular>("dec.tconv" + tag, in_c, tc_out[i], 5, 2,
                                      lengths_[static_cast<std::size_t>(4 - i)], rng);
    dec_.add<Relu>("dec.relu" + tag);
    in_c = tc_out[i];
  }
  dec_.add<Conv1dCircular>("dec.head", in_c, 2, 5, 1, rng);
}

VaeLoss RawVae::elbo_loss(const Tensor& x, Rng& rng, bool train, bool with_grad) {
  const int l = cfg_.beam_count, k = cfg_.latent_dim;
  if (x.ndim() != 3 || x.dim(1) != 1 || x.dim(2) != l)
    throw DataError("raw vae: batch shape must be (N,1," + std::to_string(l) + ")");
  const int n = x.dim(0);

  Tensor raw = enc_.forward(x, train);
  GaussianHead head = split_gaussian_head(raw, k);
  Tensor eps({n, k});
  for (std::int64_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  Tensor z({n, k});
  for (std::int64_t i = 0; i < z.size(); ++i)
    z[i] = head.mean[i] + head.std[i] * eps[i];
  Tensor out2 = dec_.forward(z, train);  // (N, 2, L)
  GaussianHead dechead = split_gaussian_head(out2.reshaped({n, 2 * l}), l);

  VaeLoss out;
  for (int i = 0; i < n; ++i) {
    double nll = 0.0;
    for (int j = 0; j < l; ++j) {
      const double mu = dechead.mean[i * l + j], sd = dechead.std[i * l + j];
      const double e = (x[i * l + j] - mu) / sd;
      nll += std::log(sd) + 0.5 * kLn2Pi + 0.5 * e * e;
    }
    out.recon += nll;
    out.kl += kl_row(head, i);
  }
  out.recon /= n;
  out.kl /= n;
  out.total = out.recon + cfg_.beta * out.kl;
  if (!std::isfinite(out.total)) throw NumericError("raw vae: non-finite loss");
  if (!with_grad) return out;

  Tensor dmu({n, l}), dsd({n, l});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < l; ++j) {
      const double mu = dechead.mean[i * l + j], sd = dechead.std[i * l + j];
      const double diff = x[i * l + j] - mu;
      dmu[i * l + j] = -diff / (sd * sd) / n;
      dsd[i * l + j] = (1.0 / sd - diff * diff / (sd * sd * sd)) / n;
    }
  Tensor dout = gaussian_head_backward(dechead, dmu, dsd).reshaped({n, 2, l});
  Tensor dz = dec_.backward(dout);

  const double bscale = cfg_.beta / n;
  Tensor dmean({n, k}), dstd({n, k});
  for (std::int64_t i = 0; i < dz.size(); ++i) {
    dmean[i] = dz[i] + bscale * head.mean[i];
    dstd[i] = dz[i] * eps[i] + bscale * (head.std[i] - 1.0 / head.std[i]);
  }
  enc_.backward(gaussian_head_backward(head, dmean, dstd));
  return out;
}

void RawVae::encode(const Tensor& x, Tensor& mean, Tensor& stddev) {
  Tensor raw = enc_.forward(x, false);
  GaussianHead head = split_gaussian_head(raw, cfg_.latent_dim);
  mean = std::move(head.mean);
  stddev = std::move(head.std);
}

Tensor RawVae::encode_mean(const Tensor& x) {
  Tensor mean, stddev;
  encode(x, mean, stddev);
  return mean;
}

void RawVae::decode(const Tensor& z, Tensor& mean, Tensor& stddev) {
  Tensor out = dec_.forward(z, false);
  GaussianHead head =
      split_gaussian_head(out.reshaped({out.dim(0), 2 * cfg_.beam_count}),
                          cfg_.beam_count);
  mean = std::move(head.mean);
  stddev = std::move(head.std);
}

Tensor RawVae::encode_conv_features(const Tensor& x) {
  return enc_.forward_prefix(x, static_cast<std::size_t>(conv_layers_), false);
}

std::vector<Param*> RawVae::params() {
  std::vector<Param*> out = enc_.params();
  for (Param* p : dec_.params()) out.push_back(p);
  return out;
}

std::string RawVae::graph_spec() const { return enc_.spec() + "|" + dec_.spec(); }

// ------------------------------------------------------------ batch sources

void ImageBatchSource::gather(const std::vector<int>& idx, Tensor& out) const {
  const int b = static_cast<int>(idx.size());
  const std::size_t px = static_cast<std::size_t>(resolution) * resolution;
  out = Tensor({b, 1, resolution, resolution});
  for (int i = 0; i < b; ++i) {
    const std::uint8_t* src = pixels.data() + static_cast<std::size_t>(idx[i]) * px;
    double* dst = out.data() + static_cast<std::size_t>(i) * px;
    for (std::size_t p = 0; p < px; ++p) dst[p] = src[p];
  }
}

void RawBatchSource::gather(const std::vector<int>& idx, Tensor& out) const {
  const int b = static_cast<int>(idx.size());
  out = Tensor({b, 1, beam_count});
  for (int i = 0; i < b; ++i)
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(idx[i]) * beam_count,
              values.begin() + static_cast<std::ptrdiff_t>(idx[i] + 1) * beam_count,
              out.data() + static_cast<std::size_t>(i) * beam_count);
}

namespace {

LidarScan archive_scan(const DatasetArchive& d, int i) {
  LidarScan s;
  s.sensor = d.sensor;
  const float* r = d.scan(i);
  s.ranges.resize(static_cast<std::size_t>(d.sensor.beam_count));
  s.valid.resize(static_cast<std::size_t>(d.sensor.beam_count));
  for (int b = 0; b < d.sensor.beam_count; ++b) {
    const bool ok = !std::isnan(r[b]) && r[b] <= d.sensor.max_range;
    s.valid[static_cast<std::size_t>(b)] = ok;
    s.ranges[static_cast<std::size_t>(b)] =
        ok ? static_cast<double>(r[b])
           : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

}  // namespace

ImageBatchSource make_image_source(const DatasetArchive& d, int resolution,
                                   int begin, int end) {
  if (begin < 0 || end > d.scan_count || begin >= end)
    throw DataError("image source: bad scan range");
  ImageBatchSource src;
  src.resolution = resolution;
  const std::size_t px = static_cast<std::size_t>(resolution) * resolution;
  src.pixels.reserve(static_cast<std::size_t>(end - begin) * px);
  for (int i = begin; i < end; ++i) {
    LidarScan scan = archive_scan(d, i);
    NormalizedScan ns = normalize_ranges(scan, d.sensor.max_range);
    LocalOccupancyImage img = scan_to_local_image(
        ns, resolution, 2.0 * d.sensor.max_range, d.sensor.max_range);
    src.pixels.insert(src.pixels.end(), img.pixels.begin(), img.pixels.end());
  }
  return src;
}

RawBatchSource make_raw_source(const DatasetArchive& d, int begin, int end) {
  if (begin < 0 || end > d.scan_count || begin >= end)
    throw DataError("raw source: bad scan range");
  RawBatchSource src;
  src.beam_count = d.sensor.beam_count;
  src.values.reserve(static_cast<std::size_t>(end - begin) * d.sensor.beam_count);
  for (int i = begin; i < end; ++i) {
    LidarScan repaired = replace_invalid_with_neighbor_average(archive_scan(d, i));
    NormalizedScan ns = normalize_ranges(repaired, d.sensor.max_range);
    src.values.insert(src.values.end(), ns.values.begin(), ns.values.end());
  }
  return src;
}

// ---------------------------------------------------------------- training

namespace {

template <typename Vae, typename Source>
std::vector<EpochLog> train_loop(
    Vae& vae, const Source& data, const VaeTrainConfig& tc,
    const std::string& checkpoint_path, const nlohmann::json& meta,
    const std::function<void(int, const EpochLog&)>& on_epoch) {
  if (data.count() < 1) throw DataError("vae training: empty dataset");
  if (tc.epochs < 1 || tc.batch_size < 1)
    throw ConfigError("vae training: epochs and batch_size must be >= 1");
  Rng rng(tc.seed);
  AdamConfig ac;
  ac.lr = tc.lr;
  Adam opt(vae.params(), ac);

  std::vector<int> order(static_cast<std::size_t>(data.count()));
  for (int i = 0; i < data.count(); ++i) order[static_cast<std::size_t>(i)] = i;

  std::vector<EpochLog> log;
  Tensor batch;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_indices(order, rng);
    EpochLog el;
    int seen = 0;
    for (int at = 0; at < data.count(); at += tc.batch_size) {
      const int b = std::min(tc.batch_size, data.count() - at);
      std::vector<int> idx(order.begin() + at, order.begin() + at + b);
      data.gather(idx, batch);
      VaeLoss loss;
      try {
        loss = vae.elbo_loss(batch, rng, true, true);
        opt.step();
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " +
                           std::to_string(epoch + 1) +
                           "; last good checkpoint: " + checkpoint_path + ")");
      }
      el.loss += loss.total * b;
      el.recon += loss.recon * b;
      el.kl += loss.kl * b;
      seen += b;
    }
    el.loss /= seen;
    el.recon /= seen;
    el.kl /= seen;
    log.push_back(el);

    nlohmann::json m = meta;
    m["epochs_completed"] = epoch + 1;
    save_checkpoint(checkpoint_path, vae.graph_spec(), vae.params(), m, true,
                    opt.t());
    if (on_epoch) on_epoch(epoch, el);
  }
  return log;
}

}  // namespace

std::vector<EpochLog> train_image_vae(
    ImageVae& vae, const ImageBatchSource& data, const VaeTrainConfig& tc,
    const std::string& checkpoint_path, const nlohmann::json& meta,
    const std::function<void(int, const EpochLog&)>& on_epoch) {
  if (data.resolution != vae.config().resolution)
    throw DataError("vae training: image resolution does not match model");
  return train_loop(vae, data, tc, checkpoint_path, meta, on_epoch);
}

std::vector<EpochLog> train_raw_vae(
    RawVae& vae, const RawBatchSource& data, const VaeTrainConfig& tc,
    const std::string& checkpoint_path, const nlohmann::json& meta,
    const std::function<void(int, const EpochLog&)>& on_epoch) {
  if (data.beam_count != vae.config().beam_count)
    throw DataError("vae training: beam count does not match model");
  return train_loop(vae, data, tc, checkpoint_path, meta, on_epoch);
}

}  // namespace lidarnav
