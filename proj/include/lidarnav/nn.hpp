#pragma once

#include <memory>
#include <string>
#include <vector>

#include "lidarnav/rng.hpp"
#include "lidarnav/tensor.hpp"

namespace lidarnav {

// A named parameter with its gradient and Adam moment buffers. Batch-norm
// running statistics reuse the same struct with trainable = false.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  bool trainable = true;

  Param(std::string n, Tensor val, bool train = true)
      : name(std::move(n)),
        value(std::move(val)),
        grad(value.shape()),
        m(value.shape()),
        v(value.shape()),
        trainable(train) {}
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  // one-line structural description, persisted in checkpoints
  virtual std::string spec() const = 0;

  const std::string& name() const { return name_; }

 protected:
  void require_cache() const;
  [[noreturn]] void shape_error(const Tensor& got, const std::string& expect) const;

  std::string name_;
  bool has_cache_ = false;
};

enum class Init { kHeUniform, kSmallUniform, kZero };

class Dense : public Layer {
 public:
  Dense(std::string name, int in, int out, Rng& rng, Init init = Init::kHeUniform);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param weight;  // (out, in)
  Param bias;    // (out)

 private:
  int in_, out_;
  Tensor x_;
};

class Relu : public Layer {
 public:
  explicit Relu(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override { return "relu"; }

 private:
  std::vector<std::uint8_t> mask_;
  std::vector<int> shape_;
};

// y = scale * tanh(x)
class ScaledTanh : public Layer {
 public:
  ScaledTanh(std::string name, double scale) : Layer(std::move(name)), scale_(scale) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override;

 private:
  double scale_;
  Tensor t_;
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override { return "flatten"; }

 private:
  std::vector<int> in_shape_;
};

// (N, F) -> (N, dims...)
class Reshape : public Layer {
 public:
  Reshape(std::string name, std::vector<int> dims)
      : Layer(std::move(name)), dims_(std::move(dims)) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override;

 private:
  std::vector<int> dims_;
  std::vector<int> in_shape_;
};

// 2D convolution over (N, C, H, W), TF-style "same" zero padding:
// out = ceil(in / stride), padding split with the extra cell at the end.
class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int k, int stride, Rng& rng,
         Init init = Init::kHeUniform);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param weight;  // (out_c, in_c, k, k)
  Param bias;    // (out_c)

 private:
  int in_c_, out_c_, k_, stride_;
  Tensor x_;
};

// Transposed 2D convolution, the adjoint of Conv2d with the same stride and
// padding rule. The output spatial size is explicit; ceil(out/stride) must
// reproduce the input size.
class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, int in_c, int out_c, int k, int stride,
                  int out_h, int out_w, Rng& rng, Init init = Init::kHeUniform);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param weight;  // (in_c, out_c, k, k), virtual-conv orientation
  Param bias;    // (out_c)

 private:
  int in_c_, out_c_, k_, stride_, out_h_, out_w_;
  Tensor x_;
};

// 1D convolution over (N, C, L) with circular padding; window centered on
// each tap, out = ceil(in / stride).
class Conv1dCircular : public Layer {
 public:
  Conv1dCircular(std::string name, int in_c, int out_c, int k, int stride,
                 Rng& rng, Init init = Init::kHeUniform);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param weight;  // (out_c, in_c, k)
  Param bias;    // (out_c)

 private:
  int in_c_, out_c_, k_, stride_;
  Tensor x_;
};

class ConvTranspose1dCircular : public Layer {
 public:
  ConvTranspose1dCircular(std::string name, int in_c, int out_c, int k,
                          int stride, int out_l, Rng& rng,
                          Init init = Init::kHeUniform);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param weight;  // (in_c, out_c, k)
  Param bias;    // (out_c)

 private:
  int in_c_, out_c_, k_, stride_, out_l_;
  Tensor x_;
};

// Channel batch normalization for (N, C), (N, C, L) or (N, C, H, W).
// Train mode normalizes with batch statistics and updates the running
// buffers; eval mode is the affine map through the running statistics.
class BatchNorm : public Layer {
 public:
  BatchNorm(std::string name, int channels, double momentum = 0.99,
            double eps = 1e-3);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  std::string spec() const override;

  Param gamma, beta;
  Param running_mean, running_var;  // trainable = false

 private:
  int channels_;
  double momentum_, eps_;
  bool train_mode_ = true;
  Tensor xhat_;
  std::vector<double> invstd_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::string name, int size) : Layer(std::move(name)), size_(size) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override;

 private:
  int size_;
  std::vector<int> in_shape_;
  std::vector<std::int64_t> argmax_;
};

class AvgPool2d : public Layer {
 public:
  AvgPool2d(std::string name, int size) : Layer(std::move(name)), size_(size) {}
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  std::string spec() const override;

 private:
  int size_;
  std::vector<int> in_shape_;
};

// Sequential container; this is the whole graph structure the project needs.
class Stack {
 public:
  Stack() = default;
  Stack(Stack&&) = default;
  Stack& operator=(Stack&&) = default;

  template <typename L, typename... Args>
  L& add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor forward(Tensor x, bool train);
  // run only the first n_layers layers (inspection hook)
  Tensor forward_prefix(Tensor x, std::size_t n_layers, bool train);
  Tensor backward(Tensor dy);
  std::vector<Param*> params();
  void zero_grad();
  std::string spec() const;
  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace lidarnav
