#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "biowish/net.hpp"

namespace biowish {

// ---------------------------------------------------------------------------
// Losses

// Mean softmax cross-entropy over the batch with log-sum-exp stabilization.
// logits: (n, 1, 1, classes). Gradient is (softmax - onehot) / n.
template <typename S>
double loss_cross_entropy(const Tensor<S>& logits, const std::vector<int>& labels,
                          Tensor<S>& dlogits) {
  const std::int64_t n = logits.shape[0];
  const std::int64_t c = logits.shape[3];
  dlogits.shape = logits.shape;
  dlogits.v.assign(logits.v.size(), S(0));
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const S* z = logits.data() + i * c;
    S* dz = dlogits.data() + i * c;
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= c) throw Error("cross-entropy: label out of range");
    double zmax = static_cast<double>(z[0]);
    for (std::int64_t k = 1; k < c; ++k) zmax = std::max(zmax, static_cast<double>(z[k]));
    double sum = 0.0;
    for (std::int64_t k = 0; k < c; ++k) sum += std::exp(static_cast<double>(z[k]) - zmax);
    const double lse = zmax + std::log(sum);
    total += lse - static_cast<double>(z[label]);
    for (std::int64_t k = 0; k < c; ++k) {
      const double p = std::exp(static_cast<double>(z[k]) - lse);
      dz[k] = static_cast<S>((p - (k == label ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  return total / static_cast<double>(n);
}

// Contrastive loss over a batch of embedding pairs (n, d) each:
// d2 = ||e1-e2||; same -> d2^2, different -> max(0, margin - d2)^2.
// Returns the batch mean; gradients are w.r.t. both embedding blocks.
template <typename S>
double loss_contrastive(const Tensor<S>& e1, const Tensor<S>& e2, const std::vector<char>& same,
                        double margin, Tensor<S>& de1, Tensor<S>& de2) {
  const std::int64_t n = e1.shape[0];
  const std::int64_t d = static_cast<std::int64_t>(e1.v.size()) / n;
  if (e1.v.size() != e2.v.size()) throw Error("contrastive: embedding size mismatch");
  de1.shape = e1.shape;
  de2.shape = e2.shape;
  de1.v.assign(e1.v.size(), S(0));
  de2.v.assign(e2.v.size(), S(0));
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const S* a = e1.data() + i * d;
    const S* b = e2.data() + i * d;
    double dist2 = 0.0;
    for (std::int64_t k = 0; k < d; ++k) {
      const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
      dist2 += diff * diff;
    }
    const double dist = std::sqrt(dist2);
    S* da = de1.data() + i * d;
    S* db = de2.data() + i * d;
    if (same[static_cast<std::size_t>(i)]) {
      total += dist2;
      const double g = 2.0 / static_cast<double>(n);
      for (std::int64_t k = 0; k < d; ++k) {
        const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        da[k] = static_cast<S>(g * diff);
        db[k] = static_cast<S>(-g * diff);
      }
    } else if (dist < margin) {
      const double gap = margin - dist;
      total += gap * gap;
      if (dist > 1e-12) {
        const double g = -2.0 * gap / dist / static_cast<double>(n);
        for (std::int64_t k = 0; k < d; ++k) {
          const double diff = static_cast<double>(a[k]) - static_cast<double>(b[k]);
          da[k] = static_cast<S>(g * diff);
          db[k] = static_cast<S>(-g * diff);
        }
      }
    }
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// SGDM: v <- mu v - lr g, p <- p + v.

template <typename S>
class Sgdm {
 public:
  Sgdm(double lr, double momentum = 0.9) : lr_(lr), mu_(momentum) {}

  void step(const std::vector<ParamRef<S>>& params) {
    if (velocity_.empty()) {
      for (const auto& p : params) velocity_.emplace_back(p.size, S(0));
    }
    if (velocity_.size() != params.size()) throw Error("sgdm: parameter set changed shape");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (velocity_[i].size() != params[i].size) throw Error("sgdm: velocity shape mismatch");
      S* v = velocity_[i].data();
      S* p = params[i].value;
      const S* g = params[i].grad;
      for (std::size_t k = 0; k < params[i].size; ++k) {
        v[k] = static_cast<S>(mu_) * v[k] - static_cast<S>(lr_) * g[k];
        p[k] += v[k];
      }
    }
  }

  double learning_rate() const { return lr_; }
  double momentum() const { return mu_; }

 private:
  double lr_, mu_;
  std::vector<std::vector<S>> velocity_;
};

// ---------------------------------------------------------------------------
// Training loops

template <typename S>
struct LabeledSet {
  std::vector<std::vector<S>> x;
  std::vector<int> y;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int batch = 16;
  int epochs = 1;
  std::uint64_t seed = 1;
};

namespace detail {

template <typename S>
Tensor<S> stack_rows(ArchId arch, const std::vector<std::vector<S>>& x,
                     const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
  const auto is = input_shape(arch);
  const auto n = static_cast<std::int64_t>(hi - lo);
  Tensor<S> t({n, is[0], is[1], is[2]});
  const std::size_t d = x[idx[lo]].size();
  for (std::size_t i = lo; i < hi; ++i)
    std::copy(x[idx[i]].begin(), x[idx[i]].end(), t.v.begin() + static_cast<std::ptrdiff_t>((i - lo) * d));
  return t;
}

}  // namespace detail

// Mini-batch CE training of an embedding network plus classifier head.
// Shuffled batches, SGDM over all parameters, train-mode dropout/BN.
// Returns the mean loss of each epoch.
template <typename S>
std::vector<double> train_classifier(Network<S>& net, Network<S>& head, ArchId arch,
                                     const LabeledSet<S>& set, const TrainConfig& cfg) {
  if (set.x.empty()) throw Error("train_classifier: empty dataset");
  {
    const int first = set.y.front();
    bool multi = false;
    for (int v : set.y)
      if (v != first) multi = true;
    if (!multi) throw Error("train_classifier: dataset holds a single class");
  }
  std::vector<double> epoch_losses;
  if (cfg.epochs == 0) return epoch_losses;

  Rng shuffle_rng(derive_seed(cfg.seed, "classifier/shuffle"));
  net.seed_rng(derive_seed(cfg.seed, "classifier/dropout/net"));
  head.seed_rng(derive_seed(cfg.seed, "classifier/dropout/head"));
  Sgdm<S> opt(cfg.learning_rate);

  std::vector<std::size_t> order(set.x.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto all_params = net.params();
  {
    auto hp = head.params();
    all_params.insert(all_params.end(), hp.begin(), hp.end());
  }

  for (int e = 0; e < cfg.epochs; ++e) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch));
      if (hi - lo < 2) break;  // batch-norm needs at least two samples
      Tensor<S> x = detail::stack_rows(arch, set.x, order, lo, hi);
      std::vector<int> labels;
      labels.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) labels.push_back(set.y[order[i]]);

      net.zero_grad();
      head.zero_grad();
      Tensor<S> emb = net.forward(x, true);
      Tensor<S> logits = head.forward(emb, true);
      Tensor<S> dlogits;
      loss_sum += loss_cross_entropy(logits, labels, dlogits);
      ++steps;
      Tensor<S> demb = head.backward(dlogits);
      net.backward(demb);
      opt.step(all_params);
    }
    epoch_losses.push_back(steps ? loss_sum / static_cast<double>(steps) : 0.0);
  }
  return epoch_losses;
}

// ---------------------------------------------------------------------------

struct PairKey {
  int subject;
  int session;
};

// Balanced pair sampling for siamese training: positives are frames of the
// same subject from different sessions, negatives are frames of different
// subjects.
class PairSampler {
 public:
  explicit PairSampler(std::vector<PairKey> keys) : keys_(std::move(keys)) {
    bool pos = false, neg = false;
    for (std::size_t i = 0; i < keys_.size() && !(pos && neg); ++i)
      for (std::size_t j = i + 1; j < keys_.size(); ++j) {
        if (keys_[i].subject == keys_[j].subject && keys_[i].session != keys_[j].session) pos = true;
        else if (keys_[i].subject != keys_[j].subject) neg = true;
        if (pos && neg) break;
      }
    if (!pos) throw Error("pair sampler: no positive pairs (need same subject across sessions)");
    if (!neg) throw Error("pair sampler: no negative pairs (need at least two subjects)");
  }

  std::size_t size() const { return keys_.size(); }

  std::tuple<std::size_t, std::size_t, bool> draw(Rng& rng, bool want_same) const {
    for (int guard = 0; guard < 100000; ++guard) {
      const std::size_t i = static_cast<std::size_t>(rng.uniform_int(keys_.size()));
      const std::size_t j = static_cast<std::size_t>(rng.uniform_int(keys_.size()));
      if (want_same) {
        if (keys_[i].subject == keys_[j].subject && keys_[i].session != keys_[j].session)
          return {i, j, true};
      } else {
        if (keys_[i].subject != keys_[j].subject) return {i, j, false};
      }
    }
    throw Error("pair sampler: exhausted drawing a pair");
  }

 private:
  std::vector<PairKey> keys_;
};

struct SiameseConfig {
  double learning_rate = 0.0001;
  int batch_pairs = 64;
  int epochs = 1;
  int steps_per_epoch = 0;  // 0: derive from dataset size
  double margin = 1.0;
  std::uint64_t seed = 1;
};

// Contrastive training with weight tying: one parameter set, twins realized
// by stacking both pair sides into a single forward pass (so BatchNorm sees
// the union batch). Returns the mean loss of each epoch.
template <typename S>
std::vector<double> train_siamese(Network<S>& net, ArchId arch,
                                  const std::vector<std::vector<S>>& x, const PairSampler& sampler,
                                  const SiameseConfig& cfg) {
  if (x.size() != sampler.size()) throw Error("train_siamese: keys/data size mismatch");
  std::vector<double> epoch_losses;
  if (cfg.epochs == 0) return epoch_losses;

  Rng pair_rng(derive_seed(cfg.seed, "siamese/pairs"));
  net.seed_rng(derive_seed(cfg.seed, "siamese/dropout"));
  Sgdm<S> opt(cfg.learning_rate);
  auto params = net.params();

  const int steps = cfg.steps_per_epoch > 0
                        ? cfg.steps_per_epoch
                        : std::max(1, static_cast<int>(x.size() / (2 * static_cast<std::size_t>(cfg.batch_pairs))));
  const int B = cfg.batch_pairs;
  const auto is = input_shape(arch);
  const std::size_t dim = static_cast<std::size_t>(is[0] * is[1] * is[2]);

  for (int e = 0; e < cfg.epochs; ++e) {
    double loss_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      std::vector<std::size_t> left(static_cast<std::size_t>(B)), right(static_cast<std::size_t>(B));
      std::vector<char> same(static_cast<std::size_t>(B));
      for (int p = 0; p < B; ++p) {
        const bool want_same = p < (B + 1) / 2;  // 50/50 balance
        auto [i, j, is_same] = sampler.draw(pair_rng, want_same);
        left[static_cast<std::size_t>(p)] = i;
        right[static_cast<std::size_t>(p)] = j;
        same[static_cast<std::size_t>(p)] = is_same;
      }
      Tensor<S> input({2 * B, is[0], is[1], is[2]});
      for (int p = 0; p < B; ++p) {
        std::copy(x[left[static_cast<std::size_t>(p)]].begin(), x[left[static_cast<std::size_t>(p)]].end(),
                  input.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(p) * dim));
        std::copy(x[right[static_cast<std::size_t>(p)]].begin(), x[right[static_cast<std::size_t>(p)]].end(),
                  input.v.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(B + p) * dim));
      }
      net.zero_grad();
      Tensor<S> emb = net.forward(input, true);
      const std::int64_t d = static_cast<std::int64_t>(emb.v.size()) / (2 * B);
      Tensor<S> e1({B, 1, 1, d}), e2({B, 1, 1, d});
      std::copy(emb.v.begin(), emb.v.begin() + static_cast<std::ptrdiff_t>(B * d), e1.v.begin());
      std::copy(emb.v.begin() + static_cast<std::ptrdiff_t>(B * d), emb.v.end(), e2.v.begin());
      Tensor<S> de1, de2;
      loss_sum += loss_contrastive(e1, e2, same, cfg.margin, de1, de2);
      Tensor<S> demb;
      demb.shape = emb.shape;
      demb.v.resize(emb.v.size());
      std::copy(de1.v.begin(), de1.v.end(), demb.v.begin());
      std::copy(de2.v.begin(), de2.v.end(), demb.v.begin() + static_cast<std::ptrdiff_t>(B * d));
      net.backward(demb);
      opt.step(params);
    }
    epoch_losses.push_back(loss_sum / static_cast<double>(steps));
  }
  return epoch_losses;
}

}  // namespace biowish
