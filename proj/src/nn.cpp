#include "lidarnav/nn.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include "lidarnav/errors.hpp"

namespace lidarnav {

namespace {

// C = alpha * op(A) * op(B) + beta * C, row-major
void gemm(bool ta, bool tb, int m, int n, int k, double alpha, const double* a,
          int lda, const double* b, int ldb, double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb,
              beta, c, ldc);
}

int conv_out_len(int in, int stride) { return (in + stride - 1) / stride; }

int pad_begin_for(int in, int out, int k, int stride) {
  int total = std::max((out - 1) * stride + k - in, 0);
  return total / 2;
}

std::string join_dims(const std::vector<int>& dims) {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << "x";
    os << dims[i];
  }
  return os.str();
}

void im2col_2d(const double* x, int c, int h, int w, int k, int stride,
               int out_h, int out_w, int pb_h, int pb_w, double* cols) {
  const int p = out_h * out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = cols + ((ch * k + ki) * k + kj) * p;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pb_h + ki;
          if (iy < 0 || iy >= h) {
            std::fill(row + oy * out_w, row + (oy + 1) * out_w, 0.0);
            continue;
          }
          const double* src = x + (ch * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pb_w + kj;
            row[oy * out_w + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// adjoint of im2col_2d: scatter-add columns back into x (caller zeroes x)
void col2im_2d(const double* cols, int c, int h, int w, int k, int stride,
               int out_h, int out_w, int pb_h, int pb_w, double* x) {
  const int p = out_h * out_w;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = cols + ((ch * k + ki) * k + kj) * p;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * stride - pb_h + ki;
          if (iy < 0 || iy >= h) continue;
          double* dst = x + (ch * h + iy) * w;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * stride - pb_w + kj;
            if (ix >= 0 && ix < w) dst[ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

void im2col_1d_circ(const double* x, int c, int l, int k, int stride,
                    int out_l, int pb, double* cols) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      double* row = cols + (ch * k + ki) * out_l;
      const double* src = x + ch * l;
      for (int ot = 0; ot < out_l; ++ot) {
        int idx = (ot * stride - pb + ki) % l;
        if (idx < 0) idx += l;
        row[ot] = src[idx];
      }
    }
  }
}

void col2im_1d_circ(const double* cols, int c, int l, int k, int stride,
                    int out_l, int pb, double* x) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      const double* row = cols + (ch * k + ki) * out_l;
      double* dst = x + ch * l;
      for (int ot = 0; ot < out_l; ++ot) {
        int idx = (ot * stride - pb + ki) % l;
        if (idx < 0) idx += l;
        dst[idx] += row[ot];
      }
    }
  }
}

Tensor init_weight(const std::vector<int>& shape, int fan_in, Init init,
                   Rng& rng) {
  Tensor w(shape);
  double limit;
  switch (init) {
    case Init::kHeUniform:
      limit = std::sqrt(6.0 / fan_in);
      break;
    case Init::kSmallUniform:
      limit = 3e-3;
      break;
    case Init::kZero:
      return w;
  }
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-limit, limit);
  return w;
}

Tensor init_bias(int n, Init init, Rng& rng) {
  Tensor b({n});
  if (init == Init::kSmallUniform)
    for (int i = 0; i < n; ++i) b[i] = rng.uniform(-3e-3, 3e-3);
  return b;
}

}  // namespace

void Layer::require_cache() const {
  if (!has_cache_)
    throw DataError("layer " + name_ + ": backward called before forward");
}

void Layer::shape_error(const Tensor& got, const std::string& expect) const {
  std::ostringstream os;
  os << "layer " << name_ << ": expected input " << expect << ", got "
     << join_dims(got.shape());
  throw DataError(os.str());
}

// ---------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in, int out, Rng& rng, Init init)
    : Layer(std::move(name)),
      weight(name_ + ".w", init_weight({out, in}, in, init, rng)),
      bias(name_ + ".b", init_bias(out, init, rng)),
      in_(in),
      out_(out) {}

Tensor Dense::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2 || x.dim(1) != in_)
    shape_error(x, "(N," + std::to_string(in_) + ")");
  const int n = x.dim(0);
  x_ = x;
  Tensor y({n, out_});
  for (int i = 0; i < n; ++i)
    std::copy(bias.value.data(), bias.value.data() + out_, y.data() + i * out_);
  gemm(false, true, n, out_, in_, 1.0, x.data(), in_, weight.value.data(), in_,
       1.0, y.data(), out_);
  has_cache_ = true;
  return y;
}

Tensor Dense::backward(const Tensor& dy) {
  require_cache();
  const int n = x_.dim(0);
  if (dy.ndim() != 2 || dy.dim(0) != n || dy.dim(1) != out_)
    shape_error(dy, "(N," + std::to_string(out_) + ")");
  gemm(true, false, out_, in_, n, 1.0, dy.data(), out_, x_.data(), in_, 1.0,
       weight.grad.data(), in_);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < out_; ++j) bias.grad[j] += dy[i * out_ + j];
  Tensor dx({n, in_});
  gemm(false, false, n, in_, out_, 1.0, dy.data(), out_, weight.value.data(),
       in_, 0.0, dx.data(), in_);
  return dx;
}

void Dense::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::string Dense::spec() const {
  std::ostringstream os;
  os << "dense(in=" << in_ << ",out=" << out_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- Relu

Tensor Relu::forward(const Tensor& x, bool train) {
  shape_ = x.shape();
  mask_.resize(x.size());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = x[i] > 0.0;
    y[i] = mask_[i] ? x[i] : 0.0;
  }
  has_cache_ = true;
  return y;
}

Tensor Relu::backward(const Tensor& dy) {
  require_cache();
  if (dy.shape() != shape_) shape_error(dy, join_dims(shape_));
  Tensor dx(shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = mask_[i] ? dy[i] : 0.0;
  return dx;
}

// ---------------------------------------------------------------- ScaledTanh

Tensor ScaledTanh::forward(const Tensor& x, bool train) {
  t_ = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) t_[i] = std::tanh(x[i]);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = scale_ * t_[i];
  has_cache_ = true;
  return y;
}

Tensor ScaledTanh::backward(const Tensor& dy) {
  require_cache();
  if (dy.shape() != t_.shape()) shape_error(dy, join_dims(t_.shape()));
  Tensor dx(dy.shape());
  for (std::size_t i = 0; i < dy.size(); ++i)
    dx[i] = dy[i] * scale_ * (1.0 - t_[i] * t_[i]);
  return dx;
}

std::string ScaledTanh::spec() const {
  std::ostringstream os;
  os << "tanh(scale=" << scale_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- Flatten

Tensor Flatten::forward(const Tensor& x, bool train) {
  if (x.ndim() < 2) shape_error(x, "(N,...)");
  in_shape_ = x.shape();
  int n = x.dim(0);
  int f = static_cast<int>(x.size()) / n;
  Tensor y = x;
  y.reshape({n, f});
  has_cache_ = true;
  return y;
}

Tensor Flatten::backward(const Tensor& dy) {
  require_cache();
  Tensor dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

// ---------------------------------------------------------------- Reshape

Tensor Reshape::forward(const Tensor& x, bool train) {
  if (x.ndim() != 2) shape_error(x, "(N,F)");
  in_shape_ = x.shape();
  std::vector<int> shape = {x.dim(0)};
  shape.insert(shape.end(), dims_.begin(), dims_.end());
  Tensor y = x;
  y.reshape(shape);
  has_cache_ = true;
  return y;
}

Tensor Reshape::backward(const Tensor& dy) {
  require_cache();
  Tensor dx = dy;
  dx.reshape(in_shape_);
  return dx;
}

std::string Reshape::spec() const { return "reshape(" + join_dims(dims_) + ")"; }

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int k, int stride,
               Rng& rng, Init init)
    : Layer(std::move(name)),
      weight(name_ + ".w", init_weight({out_c, in_c, k, k}, in_c * k * k, init, rng)),
      bias(name_ + ".b", init_bias(out_c, init, rng)),
      in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride) {}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4 || x.dim(1) != in_c_)
    shape_error(x, "(N," + std::to_string(in_c_) + ",H,W)");
  const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = conv_out_len(h, stride_), ow = conv_out_len(w, stride_);
  const int pbh = pad_begin_for(h, oh, k_, stride_);
  const int pbw = pad_begin_for(w, ow, k_, stride_);
  const int rows = in_c_ * k_ * k_, p = oh * ow;
  x_ = x;
  Tensor y({n, out_c_, oh, ow});
  std::vector<double> cols(static_cast<std::size_t>(rows) * p);
  for (int i = 0; i < n; ++i) {
    im2col_2d(x.data() + static_cast<std::size_t>(i) * in_c_ * h * w, in_c_, h,
              w, k_, stride_, oh, ow, pbh, pbw, cols.data());
    double* yi = y.data() + static_cast<std::size_t>(i) * out_c_ * p;
    for (int oc = 0; oc < out_c_; ++oc)
      std::fill(yi + oc * p, yi + (oc + 1) * p, bias.value[oc]);
    gemm(false, false, out_c_, p, rows, 1.0, weight.value.data(), rows,
         cols.data(), p, 1.0, yi, p);
  }
  has_cache_ = true;
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  require_cache();
  const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
  const int oh = conv_out_len(h, stride_), ow = conv_out_len(w, stride_);
  if (dy.ndim() != 4 || dy.dim(0) != n || dy.dim(1) != out_c_ ||
      dy.dim(2) != oh || dy.dim(3) != ow)
    shape_error(dy, "(N," + std::to_string(out_c_) + "," + std::to_string(oh) +
                        "," + std::to_string(ow) + ")");
  const int pbh = pad_begin_for(h, oh, k_, stride_);
  const int pbw = pad_begin_for(w, ow, k_, stride_);
  const int rows = in_c_ * k_ * k_, p = oh * ow;
  Tensor dx({n, in_c_, h, w});
  std::vector<double> cols(static_cast<std::size_t>(rows) * p);
  std::vector<double> dcols(static_cast<std::size_t>(rows) * p);
  for (int i = 0; i < n; ++i) {
    const double* dyi = dy.data() + static_cast<std::size_t>(i) * out_c_ * p;
    im2col_2d(x_.data() + static_cast<std::size_t>(i) * in_c_ * h * w, in_c_,
              h, w, k_, stride_, oh, ow, pbh, pbw, cols.data());
    gemm(false, true, out_c_, rows, p, 1.0, dyi, p, cols.data(), p, 1.0,
         weight.grad.data(), rows);
    for (int oc = 0; oc < out_c_; ++oc) {
      double s = 0.0;
      for (int j = 0; j < p; ++j) s += dyi[oc * p + j];
      bias.grad[oc] += s;
    }
    gemm(true, false, rows, p, out_c_, 1.0, weight.value.data(), rows, dyi, p,
         0.0, dcols.data(), p);
    col2im_2d(dcols.data(), in_c_, h, w, k_, stride_, oh, ow, pbh, pbw,
              dx.data() + static_cast<std::size_t>(i) * in_c_ * h * w);
  }
  return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::string Conv2d::spec() const {
  std::ostringstream os;
  os << "conv2d(in=" << in_c_ << ",out=" << out_c_ << ",k=" << k_
     << ",s=" << stride_ << ")";
  return os.str();
}

// ------------------------------------------------------- ConvTranspose2d
//
// Defined as the adjoint of a "virtual" Conv2d (weight (in_c,out_c,k,k),
// stride s, same padding) that would map the (out_c,out_h,out_w) output
// back to the (in_c,in_h,in_w) input.

ConvTranspose2d::ConvTranspose2d(std::string name, int in_c, int out_c, int k,
                                 int stride, int out_h, int out_w, Rng& rng,
                                 Init init)
    : Layer(std::move(name)),
      weight(name_ + ".w", init_weight({in_c, out_c, k, k}, in_c * k * k, init, rng)),
      bias(name_ + ".b", init_bias(out_c, init, rng)),
      in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride),
      out_h_(out_h),
      out_w_(out_w) {
  if (conv_out_len(out_h, stride) <= 0)
    throw ConfigError("layer " + name_ + ": bad output size");
}

Tensor ConvTranspose2d::forward(const Tensor& x, bool train) {
  const int eh = conv_out_len(out_h_, stride_), ew = conv_out_len(out_w_, stride_);
  if (x.ndim() != 4 || x.dim(1) != in_c_ || x.dim(2) != eh || x.dim(3) != ew)
    shape_error(x, "(N," + std::to_string(in_c_) + "," + std::to_string(eh) +
                       "," + std::to_string(ew) + ")");
  const int n = x.dim(0);
  const int pbh = pad_begin_for(out_h_, eh, k_, stride_);
  const int pbw = pad_begin_for(out_w_, ew, k_, stride_);
  const int rows = out_c_ * k_ * k_, p = eh * ew;
  x_ = x;
  Tensor y({n, out_c_, out_h_, out_w_});
  std::vector<double> cols(static_cast<std::size_t>(rows) * p);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.data() + static_cast<std::size_t>(i) * in_c_ * p;
    gemm(true, false, rows, p, in_c_, 1.0, weight.value.data(), rows, xi, p,
         0.0, cols.data(), p);
    double* yi = y.data() + static_cast<std::size_t>(i) * out_c_ * out_h_ * out_w_;
    col2im_2d(cols.data(), out_c_, out_h_, out_w_, k_, stride_, eh, ew, pbh,
              pbw, yi);
    for (int oc = 0; oc < out_c_; ++oc) {
      double* ch = yi + static_cast<std::size_t>(oc) * out_h_ * out_w_;
      for (int j = 0; j < out_h_ * out_w_; ++j) ch[j] += bias.value[oc];
    }
  }
  has_cache_ = true;
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  require_cache();
  const int n = x_.dim(0);
  if (dy.ndim() != 4 || dy.dim(0) != n || dy.dim(1) != out_c_ ||
      dy.dim(2) != out_h_ || dy.dim(3) != out_w_)
    shape_error(dy, "(N," + std::to_string(out_c_) + "," +
                        std::to_string(out_h_) + "," + std::to_string(out_w_) +
                        ")");
  const int eh = conv_out_len(out_h_, stride_), ew = conv_out_len(out_w_, stride_);
  const int pbh = pad_begin_for(out_h_, eh, k_, stride_);
  const int pbw = pad_begin_for(out_w_, ew, k_, stride_);
  const int rows = out_c_ * k_ * k_, p = eh * ew;
  Tensor dx({n, in_c_, eh, ew});
  std::vector<double> dcols(static_cast<std::size_t>(rows) * p);
  for (int i = 0; i < n; ++i) {
    const double* dyi =
        dy.data() + static_cast<std::size_t>(i) * out_c_ * out_h_ * out_w_;
    im2col_2d(dyi, out_c_, out_h_, out_w_, k_, stride_, eh, ew, pbh, pbw,
              dcols.data());
    const double* xi = x_.data() + static_cast<std::size_t>(i) * in_c_ * p;
    gemm(false, true, in_c_, rows, p, 1.0, xi, p, dcols.data(), p, 1.0,
         weight.grad.data(), rows);
    gemm(false, false, in_c_, p, rows, 1.0, weight.value.data(), rows,
         dcols.data(), p, 0.0, dx.data() + static_cast<std::size_t>(i) * in_c_ * p, p);
    for (int oc = 0; oc < out_c_; ++oc) {
      const double* ch = dyi + static_cast<std::size_t>(oc) * out_h_ * out_w_;
      double s = 0.0;
      for (int j = 0; j < out_h_ * out_w_; ++j) s += ch[j];
      bias.grad[oc] += s;
    }
  }
  return dx;
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::string ConvTranspose2d::spec() const {
  std::ostringstream os;
  os << "tconv2d(in=" << in_c_ << ",out=" << out_c_ << ",k=" << k_
     << ",s=" << stride_ << ",oh=" << out_h_ << ",ow=" << out_w_ << ")";
  return os.str();
}

// ---------------------------------------------------------- Conv1dCircular

Conv1dCircular::Conv1dCircular(std::string name, int in_c, int out_c, int k,
                               int stride, Rng& rng, Init init)
    : Layer(std::move(name)),
      weight(name_ + ".w", init_weight({out_c, in_c, k}, in_c * k, init, rng)),
      bias(name_ + ".b", init_bias(out_c, init, rng)),
      in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride) {}

Tensor Conv1dCircular::forward(const Tensor& x, bool train) {
  if (x.ndim() != 3 || x.dim(1) != in_c_)
    shape_error(x, "(N," + std::to_string(in_c_) + ",L)");
  const int n = x.dim(0), l = x.dim(2);
  const int ol = conv_out_len(l, stride_);
  const int pb = pad_begin_for(l, ol, k_, stride_);
  const int rows = in_c_ * k_;
  x_ = x;
  Tensor y({n, out_c_, ol});
  std::vector<double> cols(static_cast<std::size_t>(rows) * ol);
  for (int i = 0; i < n; ++i) {
    im2col_1d_circ(x.data() + static_cast<std::size_t>(i) * in_c_ * l, in_c_,
                   l, k_, stride_, ol, pb, cols.data());
    double* yi = y.data() + static_cast<std::size_t>(i) * out_c_ * ol;
    for (int oc = 0; oc < out_c_; ++oc)
      std::fill(yi + oc * ol, yi + (oc + 1) * ol, bias.value[oc]);
    gemm(false, false, out_c_, ol, rows, 1.0, weight.value.data(), rows,
         cols.data(), ol, 1.0, yi, ol);
  }
  has_cache_ = true;
  return y;
}

Tensor Conv1dCircular::backward(const Tensor& dy) {
  require_cache();
  const int n = x_.dim(0), l = x_.dim(2);
  const int ol = conv_out_len(l, stride_);
  if (dy.ndim() != 3 || dy.dim(0) != n || dy.dim(1) != out_c_ || dy.dim(2) != ol)
    shape_error(dy, "(N," + std::to_string(out_c_) + "," + std::to_string(ol) + ")");
  const int pb = pad_begin_for(l, ol, k_, stride_);
  const int rows = in_c_ * k_;
  Tensor dx({n, in_c_, l});
  std::vector<double> cols(static_cast<std::size_t>(rows) * ol);
  std::vector<double> dcols(static_cast<std::size_t>(rows) * ol);
  for (int i = 0; i < n; ++i) {
    const double* dyi = dy.data() + static_cast<std::size_t>(i) * out_c_ * ol;
    im2col_1d_circ(x_.data() + static_cast<std::size_t>(i) * in_c_ * l, in_c_,
                   l, k_, stride_, ol, pb, cols.data());
    gemm(false, true, out_c_, rows, ol, 1.0, dyi, ol, cols.data(), ol, 1.0,
         weight.grad.data(), rows);
    for (int oc = 0; oc < out_c_; ++oc) {
      double s = 0.0;
      for (int j = 0; j < ol; ++j) s += dyi[oc * ol + j];
      bias.grad[oc] += s;
    }
    gemm(true, false, rows, ol, out_c_, 1.0, weight.value.data(), rows, dyi,
         ol, 0.0, dcols.data(), ol);
    col2im_1d_circ(dcols.data(), in_c_, l, k_, stride_, ol, pb,
                   dx.data() + static_cast<std::size_t>(i) * in_c_ * l);
  }
  return dx;
}

void Conv1dCircular::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::string Conv1dCircular::spec() const {
  std::ostringstream os;
  os << "conv1dcirc(in=" << in_c_ << ",out=" << out_c_ << ",k=" << k_
     << ",s=" << stride_ << ")";
  return os.str();
}

// ------------------------------------------------- ConvTranspose1dCircular

ConvTranspose1dCircular::ConvTranspose1dCircular(std::string name, int in_c,
                                                 int out_c, int k, int stride,
                                                 int out_l, Rng& rng, Init init)
    : Layer(std::move(name)),
      weight(name_ + ".w", init_weight({in_c, out_c, k}, in_c * k, init, rng)),
      bias(name_ + ".b", init_bias(out_c, init, rng)),
      in_c_(in_c),
      out_c_(out_c),
      k_(k),
      stride_(stride),
      out_l_(out_l) {}

Tensor ConvTranspose1dCircular::forward(const Tensor& x, bool train) {
  const int el = conv_out_len(out_l_, stride_);
  if (x.ndim() != 3 || x.dim(1) != in_c_ || x.dim(2) != el)
    shape_error(x, "(N," + std::to_string(in_c_) + "," + std::to_string(el) + ")");
  const int n = x.dim(0);
  const int pb = pad_begin_for(out_l_, el, k_, stride_);
  const int rows = out_c_ * k_;
  x_ = x;
  Tensor y({n, out_c_, out_l_});
  std::vector<double> cols(static_cast<std::size_t>(rows) * el);
  for (int i = 0; i < n; ++i) {
    const double* xi = x.data() + static_cast<std::size_t>(i) * in_c_ * el;
    gemm(true, false, rows, el, in_c_, 1.0, weight.value.data(), rows, xi, el,
         0.0, cols.data(), el);
    double* yi = y.data() + static_cast<std::size_t>(i) * out_c_ * out_l_;
    col2im_1d_circ(cols.data(), out_c_, out_l_, k_, stride_, el, pb, yi);
    for (int oc = 0; oc < out_c_; ++oc)
      for (int j = 0; j < out_l_; ++j) yi[oc * out_l_ + j] += bias.value[oc];
  }
  has_cache_ = true;
  return y;
}

Tensor ConvTranspose1dCircular::backward(const Tensor& dy) {
  require_cache();
  const int n = x_.dim(0);
  if (dy.ndim() != 3 || dy.dim(0) != n || dy.dim(1) != out_c_ ||
      dy.dim(2) != out_l_)
    shape_error(dy, "(N," + std::to_string(out_c_) + "," +
                        std::to_string(out_l_) + ")");
  const int el = conv_out_len(out_l_, stride_);
  const int pb = pad_begin_for(out_l_, el, k_, stride_);
  const int rows = out_c_ * k_;
  Tensor dx({n, in_c_, el});
  std::vector<double> dcols(static_cast<std::size_t>(rows) * el);
  for (int i = 0; i < n; ++i) {
    const double* dyi = dy.data() + static_cast<std::size_t>(i) * out_c_ * out_l_;
    im2col_1d_circ(dyi, out_c_, out_l_, k_, stride_, el, pb, dcols.data());
    const double* xi = x_.data() + static_cast<std::size_t>(i) * in_c_ * el;
    gemm(false, true, in_c_, rows, el, 1.0, xi, el, dcols.data(), el, 1.0,
         weight.grad.data(), rows);
    gemm(false, false, in_c_, el, rows, 1.0, weight.value.data(), rows,
         dcols.data(), el, 0.0,
         dx.data() + static_cast<std::size_t>(i) * in_c_ * el, el);
    for (int oc = 0; oc < out_c_; ++oc) {
      double s = 0.0;
      for (int j = 0; j < out_l_; ++j) s += dyi[oc * out_l_ + j];
      bias.grad[oc] += s;
    }
  }
  return dx;
}

void ConvTranspose1dCircular::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

std::string ConvTranspose1dCircular::spec() const {
  std::ostringstream os;
  os << "tconv1dcirc(in=" << in_c_ << ",out=" << out_c_ << ",k=" << k_
     << ",s=" << stride_ << ",ol=" << out_l_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::string name, int channels, double momentum, double eps)
    : Layer(std::move(name)),
      gamma(name_ + ".gamma", Tensor::full({channels}, 1.0)),
      beta(name_ + ".beta", Tensor({channels})),
      running_mean(name_ + ".running_mean", Tensor({channels}), false),
      running_var(name_ + ".running_var", Tensor::full({channels}, 1.0), false),
      channels_(channels),
      momentum_(momentum),
      eps_(eps) {}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
  if (x.ndim() < 2 || x.dim(1) != channels_)
    shape_error(x, "(N," + std::to_string(channels_) + ",...)");
  const int n = x.dim(0);
  int spatial = 1;
  for (int d = 2; d < x.ndim(); ++d) spatial *= x.dim(d);
  const int count = n * spatial;
  Tensor y(x.shape());
  invstd_.assign(channels_, 0.0);
  if (train) {
    xhat_ = Tensor(x.shape());
    for (int c = 0; c < channels_; ++c) {
      double mean = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* src = x.data() + (static_cast<std::size_t>(i) * channels_ + c) * spatial;
        for (int j = 0; j < spatial; ++j) mean += src[j];
      }
      mean /= count;
      double var = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* src = x.data() + (static_cast<std::size_t>(i) * channels_ + c) * spatial;
        for (int j = 0; j < spatial; ++j) {
          double d = src[j] - mean;
          var += d * d;
        }
      }
      var /= count;
      double invstd = 1.0 / std::sqrt(var + eps_);
      invstd_[c] = invstd;
      for (int i = 0; i < n; ++i) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * spatial;
        for (int j = 0; j < spatial; ++j) {
          double xh = (x[off + j] - mean) * invstd;
          xhat_[off + j] = xh;
          y[off + j] = gamma.value[c] * xh + beta.value[c];
        }
      }
      running_mean.value[c] = momentum_ * running_mean.value[c] + (1.0 - momentum_) * mean;
      running_var.value[c] = momentum_ * running_var.value[c] + (1.0 - momentum_) * var;
    }
  } else {
    xhat_ = Tensor();
    for (int c = 0; c < channels_; ++c) {
      double invstd = 1.0 / std::sqrt(running_var.value[c] + eps_);
      invstd_[c] = invstd;
      double shift = beta.value[c] - gamma.value[c] * running_mean.value[c] * invstd;
      double scale = gamma.value[c] * invstd;
      for (int i = 0; i < n; ++i) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * spatial;
        for (int j = 0; j < spatial; ++j) y[off + j] = scale * x[off + j] + shift;
      }
    }
  }
  train_mode_ = train;
  has_cache_ = true;
  return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
  require_cache();
  const int n = dy.dim(0);
  if (dy.ndim() < 2 || dy.dim(1) != channels_)
    shape_error(dy, "(N," + std::to_string(channels_) + ",...)");
  int spatial = 1;
  for (int d = 2; d < dy.ndim(); ++d) spatial *= dy.dim(d);
  Tensor dx(dy.shape());
  if (!train_mode_) {
    for (int c = 0; c < channels_; ++c) {
      double scale = gamma.value[c] * invstd_[c];
      for (int i = 0; i < n; ++i) {
        const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * spatial;
        for (int j = 0; j < spatial; ++j) dx[off + j] = dy[off + j] * scale;
      }
    }
    return dx;
  }
  const double count = static_cast<double>(n) * spatial;
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * spatial;
      for (int j = 0; j < spatial; ++j) {
        sum_dy += dy[off + j];
        sum_dy_xhat += dy[off + j] * xhat_[off + j];
      }
    }
    gamma.grad[c] += sum_dy_xhat;
    beta.grad[c] += sum_dy;
    const double g = gamma.value[c] * invstd_[c] / count;
    for (int i = 0; i < n; ++i) {
      const std::size_t off = (static_cast<std::size_t>(i) * channels_ + c) * spatial;
      for (int j = 0; j < spatial; ++j)
        dx[off + j] = g * (count * dy[off + j] - sum_dy - xhat_[off + j] * sum_dy_xhat);
    }
  }
  return dx;
}

void BatchNorm::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

std::string BatchNorm::spec() const {
  std::ostringstream os;
  os << "batchnorm(c=" << channels_ << ",momentum=" << momentum_
     << ",eps=" << eps_ << ")";
  return os.str();
}

// ---------------------------------------------------------------- MaxPool2d

Tensor MaxPool2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4) shape_error(x, "(N,C,H,W)");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / size_, ow = w / size_;
  if (oh < 1 || ow < 1) shape_error(x, "spatial >= pool size");
  in_shape_ = x.shape();
  Tensor y({n, c, oh, ow});
  argmax_.assign(y.size(), 0);
  std::size_t oi = 0;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = x.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = 0;
          for (int ky = 0; ky < size_; ++ky)
            for (int kx = 0; kx < size_; ++kx) {
              int iy = oy * size_ + ky, ix = ox * size_ + kx;
              double v = plane[iy * w + ix];
              if (v > best) {
                best = v;
                best_idx = (static_cast<std::int64_t>(i) * c + ch) * h * w + iy * w + ix;
              }
            }
          y[oi] = best;
          argmax_[oi] = best_idx;
        }
    }
  has_cache_ = true;
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
  require_cache();
  if (dy.size() != argmax_.size()) shape_error(dy, "pooled shape");
  Tensor dx(in_shape_);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[argmax_[i]] += dy[i];
  return dx;
}

std::string MaxPool2d::spec() const {
  return "maxpool2d(" + std::to_string(size_) + ")";
}

// ---------------------------------------------------------------- AvgPool2d

Tensor AvgPool2d::forward(const Tensor& x, bool train) {
  if (x.ndim() != 4) shape_error(x, "(N,C,H,W)");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = h / size_, ow = w / size_;
  if (oh < 1 || ow < 1) shape_error(x, "spatial >= pool size");
  in_shape_ = x.shape();
  Tensor y({n, c, oh, ow});
  const double inv = 1.0 / (size_ * size_);
  std::size_t oi = 0;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double* plane = x.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double s = 0.0;
          for (int ky = 0; ky < size_; ++ky)
            for (int kx = 0; kx < size_; ++kx)
              s += plane[(oy * size_ + ky) * w + ox * size_ + kx];
          y[oi] = s * inv;
        }
    }
  has_cache_ = true;
  return y;
}

Tensor AvgPool2d::backward(const Tensor& dy) {
  require_cache();
  const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
  const int oh = h / size_, ow = w / size_;
  if (dy.size() != static_cast<std::size_t>(n) * c * oh * ow)
    shape_error(dy, "pooled shape");
  Tensor dx(in_shape_);
  const double inv = 1.0 / (size_ * size_);
  std::size_t oi = 0;
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      double* plane = dx.data() + (static_cast<std::size_t>(i) * c + ch) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox, ++oi) {
          double g = dy[oi] * inv;
          for (int ky = 0; ky < size_; ++ky)
            for (int kx = 0; kx < size_; ++kx)
              plane[(oy * size_ + ky) * w + ox * size_ + kx] += g;
        }
    }
  return dx;
}

std::string AvgPool2d::spec() const {
  return "avgpool2d(" + std::to_string(size_) + ")";
}

// ---------------------------------------------------------------- Stack

Tensor Stack::forward(Tensor x, bool train) {
  for (auto& l : layers_) x = l->forward(x, train);
  return x;
}

Tensor Stack::forward_prefix(Tensor x, std::size_t n_layers, bool train) {
  for (std::size_t i = 0; i < n_layers && i < layers_.size(); ++i)
    x = layers_[i]->forward(x, train);
  return x;
}

Tensor Stack::backward(Tensor dy) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
    dy = (*it)->backward(dy);
  return dy;
}

std::vector<Param*> Stack::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

void Stack::zero_grad() {
  for (Param* p : params()) p->grad.fill(0.0);
}

std::string Stack::spec() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (i) os << ";";
    os << layers_[i]->spec();
  }
  return os.str();
}

}  // namespace lidarnav
