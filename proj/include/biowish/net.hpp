#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "biowish/rng.hpp"
#include "biowish/signals.hpp"
#include "biowish/tensor.hpp"

namespace biowish {

// Activation tensors are channel-last (n, h, w, c). Conv stride is fixed at
// 1; MaxPool stride equals its pool size with floor division.

template <typename S>
struct ParamRef {
  S* value;
  S* grad;
  std::size_t size;
};

template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  // Computes output shape; throws on mismatch.
  virtual void infer_shape(std::int64_t& h, std::int64_t& w, std::int64_t& c) const = 0;
  virtual void forward(const Tensor<S>& x, Tensor<S>& y, bool train, Rng& rng) = 0;
  virtual void backward(const Tensor<S>& dy, Tensor<S>& dx) = 0;
  virtual void params(std::vector<ParamRef<S>>& out) {}
  virtual void init(Rng& rng) {}
};

// ---------------------------------------------------------------------------

template <typename S>
class Conv2D final : public Layer<S> {
 public:
  Conv2D(int kh, int kw, int cin, int cout, int ph, int pw, int index)
      : kh_(kh), kw_(kw), cin_(cin), cout_(cout), ph_(ph), pw_(pw), index_(index) {
    W_.assign(static_cast<std::size_t>(kh) * kw * cin * cout, S(0));
    b_.assign(static_cast<std::size_t>(cout), S(0));
    dW_.assign(W_.size(), S(0));
    db_.assign(b_.size(), S(0));
  }

  const char* kind() const override { return "Conv2D"; }

  void infer_shape(std::int64_t& h, std::int64_t& w, std::int64_t& c) const override {
    if (c != cin_)
      throw Error("layer " + std::to_string(index_) + " (Conv2D): expected " +
                  std::to_string(cin_) + " channels, got " + std::to_string(c));
    const std::int64_t oh = h + 2 * ph_ - kh_ + 1;
    const std::int64_t ow = w + 2 * pw_ - kw_ + 1;
    if (oh < 1 || ow < 1)
      throw Error("layer " + std::to_string(index_) + " (Conv2D): kernel exceeds padded input");
    h = oh;
    w = ow;
    c = cout_;
  }

  void init(Rng& rng) override {
    const double fan_in = static_cast<double>(kh_) * kw_ * cin_;
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& v : W_) v = static_cast<S>(rng.uniform(-bound, bound));
    for (auto& v : b_) v = S(0);
  }

  void params(std::vector<ParamRef<S>>& out) override {
    out.push_back({W_.data(), dW_.data(), W_.size()});
    out.push_back({b_.data(), db_.data(), b_.size()});
  }

  void forward(const Tensor<S>& x, Tensor<S>& y, bool, Rng&) override {
    const std::int64_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
    if (c != cin_) throw Error("layer " + std::to_string(index_) + " (Conv2D): channel mismatch");
    oh_ = h + 2 * ph_ - kh_ + 1;
    ow_ = w + 2 * pw_ - kw_ + 1;
    x_ = x;
    y.shape = {n, oh_, ow_, cout_};
    y.v.assign(static_cast<std::size_t>(n * oh_ * ow_ * cout_), S(0));
    const std::int64_t P = oh_ * ow_;
    const std::int64_t K = static_cast<std::int64_t>(kh_) * kw_ * cin_;
    col_.assign(static_cast<std::size_t>(P * K), S(0));
    for (std::int64_t s = 0; s < n; ++s) {
      im2col(x.data() + s * h * w * c, h, w);
      S* out = y.data() + s * P * cout_;
      for (std::int64_t p = 0; p < P; ++p)
        for (std::int64_t oc = 0; oc < cout_; ++oc) out[p * cout_ + oc] = b_[static_cast<std::size_t>(oc)];
      gemm_nn(P, K, cout_, col_.data(), W_.data(), out);
    }
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    const std::int64_t n = x_.shape[0], h = x_.shape[1], w = x_.shape[2], c = x_.shape[3];
    const std::int64_t P = oh_ * ow_;
    const std::int64_t K = static_cast<std::int64_t>(kh_) * kw_ * cin_;
    dx.shape = x_.shape;
    dx.v.assign(x_.v.size(), S(0));
    std::vector<S> dcol(static_cast<std::size_t>(P * K));
    for (std::int64_t s = 0; s < n; ++s) {
      const S* dyp = dy.data() + s * P * cout_;
      im2col(x_.data() + s * h * w * c, h, w);
      gemm_tn(P, K, cout_, col_.data(), dyp, dW_.data());
      for (std::int64_t p = 0; p < P; ++p)
        for (std::int64_t oc = 0; oc < cout_; ++oc) db_[static_cast<std::size_t>(oc)] += dyp[p * cout_ + oc];
      std::fill(dcol.begin(), dcol.end(), S(0));
      gemm_nt(P, cout_, K, dyp, W_.data(), dcol.data());
      col2im(dcol.data(), dx.data() + s * h * w * c, h, w);
    }
  }

 private:
  void im2col(const S* x, std::int64_t h, std::int64_t w) {
    const std::int64_t K = static_cast<std::int64_t>(kh_) * kw_ * cin_;
    S* col = col_.data();
    for (std::int64_t oy = 0; oy < oh_; ++oy)
      for (std::int64_t ox = 0; ox < ow_; ++ox) {
        S* row = col + (oy * ow_ + ox) * K;
        std::int64_t idx = 0;
        for (int iy = 0; iy < kh_; ++iy) {
          const std::int64_t sy = oy + iy - ph_;
          for (int ix = 0; ix < kw_; ++ix) {
            const std::int64_t sx = ox + ix - pw_;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              for (int ic = 0; ic < cin_; ++ic) row[idx++] = S(0);
            } else {
              const S* src = x + (sy * w + sx) * cin_;
              for (int ic = 0; ic < cin_; ++ic) row[idx++] = src[ic];
            }
          }
        }
      }
  }

  void col2im(const S* dcol, S* dx, std::int64_t h, std::int64_t w) const {
    const std::int64_t K = static_cast<std::int64_t>(kh_) * kw_ * cin_;
    for (std::int64_t oy = 0; oy < oh_; ++oy)
      for (std::int64_t ox = 0; ox < ow_; ++ox) {
        const S* row = dcol + (oy * ow_ + ox) * K;
        std::int64_t idx = 0;
        for (int iy = 0; iy < kh_; ++iy) {
          const std::int64_t sy = oy + iy - ph_;
          for (int ix = 0; ix < kw_; ++ix) {
            const std::int64_t sx = ox + ix - pw_;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
              idx += cin_;
            } else {
              S* dst = dx + (sy * w + sx) * cin_;
              for (int ic = 0; ic < cin_; ++ic) dst[ic] += row[idx++];
            }
          }
        }
      }
  }

  int kh_, kw_, cin_, cout_, ph_, pw_, index_;
  std::int64_t oh_ = 0, ow_ = 0;
  std::vector<S> W_, b_, dW_, db_;
  std::vector<S> col_;
  Tensor<S> x_;
};

// ---------------------------------------------------------------------------

template <typename S>
class ReLU final : public Layer<S> {
 public:
  explicit ReLU(int index) : index_(index) {}
  const char* kind() const override { return "ReLU"; }
  void infer_shape(std::int64_t&, std::int64_t&, std::int64_t&) const override {}

  void forward(const Tensor<S>& x, Tensor<S>& y, bool, Rng&) override {
    y.shape = x.shape;
    y.v.resize(x.v.size());
    mask_.resize(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const bool pos = x.v[i] > S(0);
      mask_[i] = pos;
      y.v[i] = pos ? x.v[i] : S(0);
    }
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    dx.shape = dy.shape;
    dx.v.resize(dy.v.size());
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = mask_[i] ? dy.v[i] : S(0);
  }

 private:
  int index_;
  std::vector<char> mask_;
};

// ---------------------------------------------------------------------------

template <typename S>
class MaxPool2D final : public Layer<S> {
 public:
  MaxPool2D(int ph, int pw, int index) : ph_(ph), pw_(pw), index_(index) {}
  const char* kind() const override { return "MaxPool2D"; }

  void infer_shape(std::int64_t& h, std::int64_t& w, std::int64_t& c) const override {
    if (h < ph_ || w < pw_)
      throw Error("layer " + std::to_string(index_) + " (MaxPool2D): pool larger than input");
    h /= ph_;
    w /= pw_;
    (void)c;
  }

  void forward(const Tensor<S>& x, Tensor<S>& y, bool, Rng&) override {
    const std::int64_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
    if (h < ph_ || w < pw_)
      throw Error("layer " + std::to_string(index_) + " (MaxPool2D): pool larger than input");
    const std::int64_t oh = h / ph_, ow = w / pw_;
    in_shape_ = x.shape;
    y.shape = {n, oh, ow, c};
    y.v.resize(static_cast<std::size_t>(n * oh * ow * c));
    arg_.resize(y.v.size());
    for (std::int64_t s = 0; s < n; ++s)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox)
          for (std::int64_t ch = 0; ch < c; ++ch) {
            S best{};
            std::int64_t besti = -1;
            for (int iy = 0; iy < ph_; ++iy)
              for (int ix = 0; ix < pw_; ++ix) {
                const std::int64_t sy = oy * ph_ + iy, sx = ox * pw_ + ix;
                const std::int64_t idx = ((s * h + sy) * w + sx) * c + ch;
                // ties break toward the first (lowest-index) maximum
                if (besti < 0 || x.v[static_cast<std::size_t>(idx)] > best) {
                  best = x.v[static_cast<std::size_t>(idx)];
                  besti = idx;
                }
              }
            const std::int64_t oidx = ((s * oh + oy) * ow + ox) * c + ch;
            y.v[static_cast<std::size_t>(oidx)] = best;
            arg_[static_cast<std::size_t>(oidx)] = besti;
          }
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    dx.shape = in_shape_;
    dx.v.assign(static_cast<std::size_t>(Tensor<S>::numel(in_shape_)), S(0));
    for (std::size_t i = 0; i < dy.v.size(); ++i)
      dx.v[static_cast<std::size_t>(arg_[i])] += dy.v[i];
  }

 private:
  int ph_, pw_, index_;
  std::vector<std::int64_t> in_shape_;
  std::vector<std::int64_t> arg_;
};

// ---------------------------------------------------------------------------

// Inverted dropout: surviving activations are scaled by 1/(1-p) in train
// mode so eval mode is the identity.
template <typename S>
class Dropout final : public Layer<S> {
 public:
  Dropout(double p, int index) : p_(p), index_(index) {
    if (!(p >= 0.0 && p < 1.0))
      throw Error("layer " + std::to_string(index) + " (Dropout): p must lie in [0,1)");
  }
  const char* kind() const override { return "Dropout"; }
  void infer_shape(std::int64_t&, std::int64_t&, std::int64_t&) const override {}

  void forward(const Tensor<S>& x, Tensor<S>& y, bool train, Rng& rng) override {
    y.shape = x.shape;
    y.v.resize(x.v.size());
    if (!train || p_ == 0.0) {
      train_ = false;
      y.v = x.v;
      return;
    }
    train_ = true;
    const S scale = S(1.0 / (1.0 - p_));
    mask_.resize(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const bool keep = rng.uniform() >= p_;
      mask_[i] = keep;
      y.v[i] = keep ? x.v[i] * scale : S(0);
    }
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    dx.shape = dy.shape;
    dx.v.resize(dy.v.size());
    if (!train_) {
      dx.v = dy.v;
      return;
    }
    const S scale = S(1.0 / (1.0 - p_));
    for (std::size_t i = 0; i < dy.v.size(); ++i) dx.v[i] = mask_[i] ? dy.v[i] * scale : S(0);
  }

 private:
  double p_;
  int index_;
  bool train_ = false;
  std::vector<char> mask_;
};

// ---------------------------------------------------------------------------

// Per-channel batch normalization over (n, h, w); biased variance,
// eps 1e-5, running statistics with momentum 0.1 for eval mode.
template <typename S>
class BatchNorm final : public Layer<S> {
 public:
  BatchNorm(int channels, int index) : c_(channels), index_(index) {
    gamma_.assign(static_cast<std::size_t>(channels), S(1));
    beta_.assign(static_cast<std::size_t>(channels), S(0));
    dgamma_.assign(gamma_.size(), S(0));
    dbeta_.assign(beta_.size(), S(0));
    run_mean_.assign(gamma_.size(), S(0));
    run_var_.assign(gamma_.size(), S(1));
  }

  const char* kind() const override { return "BatchNorm"; }

  void infer_shape(std::int64_t&, std::int64_t&, std::int64_t& c) const override {
    if (c != c_) throw Error("layer " + std::to_string(index_) + " (BatchNorm): channel mismatch");
  }

  void params(std::vector<ParamRef<S>>& out) override {
    out.push_back({gamma_.data(), dgamma_.data(), gamma_.size()});
    out.push_back({beta_.data(), dbeta_.data(), beta_.size()});
  }

  void forward(const Tensor<S>& x, Tensor<S>& y, bool train, Rng&) override {
    const std::int64_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3];
    if (c != c_) throw Error("layer " + std::to_string(index_) + " (BatchNorm): channel mismatch");
    if (train && n < 2)
      throw Error("layer " + std::to_string(index_) + " (BatchNorm): batch of 1 in train mode");
    train_ = train;
    const std::int64_t m = n * h * w;
    y.shape = x.shape;
    y.v.resize(x.v.size());
    if (train) {
      mean_.assign(static_cast<std::size_t>(c), S(0));
      var_.assign(static_cast<std::size_t>(c), S(0));
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) mean_[static_cast<std::size_t>(ch)] += x.v[static_cast<std::size_t>(i * c + ch)];
      for (auto& v : mean_) v /= static_cast<S>(m);
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const S d = x.v[static_cast<std::size_t>(i * c + ch)] - mean_[static_cast<std::size_t>(ch)];
          var_[static_cast<std::size_t>(ch)] += d * d;
        }
      for (auto& v : var_) v /= static_cast<S>(m);  // biased
      for (std::size_t ch = 0; ch < static_cast<std::size_t>(c); ++ch) {
        run_mean_[ch] = S(0.9) * run_mean_[ch] + S(0.1) * mean_[ch];
        run_var_[ch] = S(0.9) * run_var_[ch] + S(0.1) * var_[ch];
      }
      invstd_.resize(static_cast<std::size_t>(c));
      for (std::size_t ch = 0; ch < static_cast<std::size_t>(c); ++ch)
        invstd_[ch] = S(1) / std::sqrt(var_[ch] + S(1e-5));
      xhat_.resize(x.v.size());
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const std::size_t idx = static_cast<std::size_t>(i * c + ch);
          xhat_[idx] = (x.v[idx] - mean_[static_cast<std::size_t>(ch)]) * invstd_[static_cast<std::size_t>(ch)];
          y.v[idx] = gamma_[static_cast<std::size_t>(ch)] * xhat_[idx] + beta_[static_cast<std::size_t>(ch)];
        }
      m_ = m;
    } else {
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const std::size_t idx = static_cast<std::size_t>(i * c + ch);
          const S inv = S(1) / std::sqrt(run_var_[static_cast<std::size_t>(ch)] + S(1e-5));
          y.v[idx] = gamma_[static_cast<std::size_t>(ch)] * (x.v[idx] - run_mean_[static_cast<std::size_t>(ch)]) * inv +
                     beta_[static_cast<std::size_t>(ch)];
        }
    }
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    if (!train_) throw Error("BatchNorm backward called in eval mode");
    const std::int64_t c = c_;
    const std::int64_t m = m_;
    dx.shape = dy.shape;
    dx.v.resize(dy.v.size());
    std::vector<S> sum_dy(static_cast<std::size_t>(c), S(0)), sum_dy_xhat(static_cast<std::size_t>(c), S(0));
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const std::size_t idx = static_cast<std::size_t>(i * c + ch);
        sum_dy[static_cast<std::size_t>(ch)] += dy.v[idx];
        sum_dy_xhat[static_cast<std::size_t>(ch)] += dy.v[idx] * xhat_[idx];
      }
    for (std::int64_t ch = 0; ch < c; ++ch) {
      dbeta_[static_cast<std::size_t>(ch)] += sum_dy[static_cast<std::size_t>(ch)];
      dgamma_[static_cast<std::size_t>(ch)] += sum_dy_xhat[static_cast<std::size_t>(ch)];
    }
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t ch = 0; ch < c; ++ch) {
        const std::size_t idx = static_cast<std::size_t>(i * c + ch);
        const std::size_t chs = static_cast<std::size_t>(ch);
        dx.v[idx] = gamma_[chs] * invstd_[chs] / static_cast<S>(m) *
                    (static_cast<S>(m) * dy.v[idx] - sum_dy[chs] - xhat_[idx] * sum_dy_xhat[chs]);
      }
  }

  std::vector<S>& running_mean() { return run_mean_; }
  std::vector<S>& running_var() { return run_var_; }

 private:
  int c_, index_;
  bool train_ = false;
  std::int64_t m_ = 0;
  std::vector<S> gamma_, beta_, dgamma_, dbeta_;
  std::vector<S> run_mean_, run_var_;
  std::vector<S> mean_, var_, invstd_, xhat_;
};

// ---------------------------------------------------------------------------

// Fully connected layer; input is flattened (n, h*w*c).
template <typename S>
class Linear final : public Layer<S> {
 public:
  Linear(int in, int out, int index) : in_(in), out_(out), index_(index) {
    W_.assign(static_cast<std::size_t>(in) * out, S(0));
    b_.assign(static_cast<std::size_t>(out), S(0));
    dW_.assign(W_.size(), S(0));
    db_.assign(b_.size(), S(0));
  }

  const char* kind() const override { return "Linear"; }

  void infer_shape(std::int64_t& h, std::int64_t& w, std::int64_t& c) const override {
    if (h * w * c != in_)
      throw Error("layer " + std::to_string(index_) + " (Linear): expected " +
                  std::to_string(in_) + " inputs, got " + std::to_string(h * w * c));
    h = 1;
    w = 1;
    c = out_;
  }

  void init(Rng& rng) override {
    const double bound = std::sqrt(6.0 / static_cast<double>(in_));
    for (auto& v : W_) v = static_cast<S>(rng.uniform(-bound, bound));
    for (auto& v : b_) v = S(0);
  }

  void params(std::vector<ParamRef<S>>& out) override {
    out.push_back({W_.data(), dW_.data(), W_.size()});
    out.push_back({b_.data(), db_.data(), b_.size()});
  }

  void forward(const Tensor<S>& x, Tensor<S>& y, bool, Rng&) override {
    const std::int64_t n = x.shape[0];
    const std::int64_t d = static_cast<std::int64_t>(x.v.size()) / n;
    if (d != in_) throw Error("layer " + std::to_string(index_) + " (Linear): input size mismatch");
    x_ = x;
    y.shape = {n, 1, 1, out_};
    y.v.assign(static_cast<std::size_t>(n * out_), S(0));
    for (std::int64_t s = 0; s < n; ++s)
      for (std::int64_t o = 0; o < out_; ++o) y.v[static_cast<std::size_t>(s * out_ + o)] = b_[static_cast<std::size_t>(o)];
    gemm_nn(n, in_, out_, x.data(), W_.data(), y.data());
  }

  void backward(const Tensor<S>& dy, Tensor<S>& dx) override {
    const std::int64_t n = x_.shape[0];
    gemm_tn(n, in_, out_, x_.data(), dy.data(), dW_.data());
    for (std::int64_t s = 0; s < n; ++s)
      for (std::int64_t o = 0; o < out_; ++o) db_[static_cast<std::size_t>(o)] += dy.v[static_cast<std::size_t>(s * out_ + o)];
    dx.shape = x_.shape;
    dx.v.assign(x_.v.size(), S(0));
    gemm_nt(n, out_, in_, dy.data(), W_.data(), dx.data());
  }

 private:
  int in_, out_, index_;
  std::vector<S> W_, b_, dW_, db_;
  Tensor<S> x_;
};

// ---------------------------------------------------------------------------

template <typename S>
class Network {
 public:
  Network() : rng_(0) {}

  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  template <typename L, typename... Args>
  L* add(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)..., static_cast<int>(layers_.size()));
    L* raw = layer.get();
    layers_.push_back(std::move(layer));
    return raw;
  }

  std::size_t size() const { return layers_.size(); }
  Layer<S>& layer(std::size_t i) { return *layers_[i]; }

  // Validates the whole shape chain from the given input shape and returns
  // the per-layer output shapes (h, w, c triples), input first.
  std::vector<std::array<std::int64_t, 3>> shape_chain(std::int64_t h, std::int64_t w,
                                                       std::int64_t c) const {
    std::vector<std::array<std::int64_t, 3>> shapes;
    shapes.push_back({h, w, c});
    for (const auto& l : layers_) {
      l->infer_shape(h, w, c);
      shapes.push_back({h, w, c});
    }
    return shapes;
  }

  void init(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& l : layers_) l->init(rng);
    seed_rng(derive_seed(seed, "dropout"));
  }

  void seed_rng(std::uint64_t seed) { rng_ = Rng(seed); }

  Tensor<S> forward(const Tensor<S>& x, bool train) {
    Tensor<S> cur = x;
    Tensor<S> next;
    for (auto& l : layers_) {
      l->forward(cur, next, train, rng_);
      std::swap(cur, next);
    }
    return cur;
  }

  Tensor<S> backward(const Tensor<S>& dy) {
    Tensor<S> cur = dy;
    Tensor<S> next;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      (*it)->backward(cur, next);
      std::swap(cur, next);
    }
    return cur;
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (auto& l : layers_) l->params(out);
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad, p.grad + p.size, S(0));
  }

  std::size_t param_count() {
    std::size_t n = 0;
    for (auto& p : params()) n += p.size;
    return n;
  }

 private:
  std::vector<std::unique_ptr<Layer<S>>> layers_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Architecture builders

inline constexpr int kEmbedDimTF = 1024;
inline constexpr int kEmbedDimT = 128;

// Spectral-domain embedding network: 25x41x3 log-PSD tensor -> 1024.
template <typename S>
Network<S> build_wishnet_tf() {
  Network<S> net;
  net.template add<Conv2D<S>>(3, 5, 3, 128, 1, 2);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(2, 2);
  net.template add<Dropout<S>>(0.5);
  net.template add<Conv2D<S>>(3, 5, 128, 256, 1, 2);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(2, 2);
  net.template add<Conv2D<S>>(3, 5, 256, 512, 1, 2);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(2, 2);
  net.template add<Dropout<S>>(0.5);
  net.template add<Conv2D<S>>(3, 5, 512, 1024, 0, 0);
  net.template add<ReLU<S>>();
  const auto chain = net.shape_chain(25, 41, 3);
  const auto& out = chain.back();
  if (out[0] != 1 || out[1] != 1 || out[2] != kEmbedDimTF)
    throw Error("wishnet_tf: unexpected output shape");
  return net;
}

// Time-domain embedding network: 3x300x1 matrix -> 128.
template <typename S>
Network<S> build_wishnet_t() {
  Network<S> net;
  net.template add<Conv2D<S>>(3, 5, 1, 32, 0, 0);
  net.template add<BatchNorm<S>>(32);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(1, 2);
  net.template add<Dropout<S>>(0.5);
  net.template add<Conv2D<S>>(1, 5, 32, 32, 0, 0);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(1, 2);
  net.template add<Dropout<S>>(0.5);
  net.template add<Conv2D<S>>(1, 5, 32, 64, 0, 0);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(1, 2);
  net.template add<Conv2D<S>>(1, 5, 64, 64, 0, 0);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(1, 2);
  net.template add<Conv2D<S>>(1, 5, 64, 64, 0, 0);
  net.template add<ReLU<S>>();
  net.template add<MaxPool2D<S>>(1, 2);
  net.template add<Conv2D<S>>(1, 5, 64, 128, 0, 0);
  net.template add<ReLU<S>>();
  const auto chain = net.shape_chain(3, 300, 1);
  const auto& out = chain.back();
  if (out[0] != 1 || out[1] != 1 || out[2] != kEmbedDimT)
    throw Error("wishnet_t: unexpected output shape");
  return net;
}

enum class ArchId { WishnetTF = 0, WishnetT = 1 };

inline const char* to_string(ArchId a) { return a == ArchId::WishnetTF ? "wishnet_tf" : "wishnet_t"; }

template <typename S>
Network<S> build_arch(ArchId id) {
  return id == ArchId::WishnetTF ? build_wishnet_tf<S>() : build_wishnet_t<S>();
}

inline int embed_dim(ArchId id) { return id == ArchId::WishnetTF ? kEmbedDimTF : kEmbedDimT; }

inline std::array<std::int64_t, 3> input_shape(ArchId id) {
  return id == ArchId::WishnetTF ? std::array<std::int64_t, 3>{25, 41, 3}
                                 : std::array<std::int64_t, 3>{3, 300, 1};
}

// Classification head: Dropout(0.5) + Linear(dim -> classes). The softmax
// itself lives in the loss.
template <typename S>
Network<S> build_head(int embed, int classes) {
  Network<S> net;
  net.template add<Dropout<S>>(0.5);
  net.template add<Linear<S>>(embed, classes);
  return net;
}

// Eval-mode embedding of a batch of inputs (row-major n x (h*w*c)).
template <typename S>
std::vector<S> embed_batch(Network<S>& net, ArchId id, const std::vector<S>& flat, std::int64_t n) {
  const auto is = input_shape(id);
  Tensor<S> x({n, is[0], is[1], is[2]});
  x.v = flat;
  Tensor<S> y = net.forward(x, false);
  if (y.v.size() != static_cast<std::size_t>(n * embed_dim(id)))
    throw Error("embed: unexpected output size");
  return y.v;
}

template <typename S>
std::vector<S> embed_one(Network<S>& net, ArchId id, const std::vector<S>& input) {
  return embed_batch(net, id, input, 1);
}

}  // namespace biowish
