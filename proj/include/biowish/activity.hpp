// Four-class activity recognition from single frames, score fusion across
// signals, confusion-matrix reporting, and two-stage activity-then-verify.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biowish/verification.hpp"

namespace biowish {

// fixed class order shared by heads, score vectors, and confusion matrices
inline constexpr std::array<Activity, 4> kActivityClasses = {
    Activity::Lying, Activity::Sitting, Activity::Standing, Activity::Walking};

// Frame-level activity classifier: embedding network plus a 4-class softmax
// head, one model per (representation, signal kind, position).
template <typename S>
struct ActivityModel {
  RepKind rep = RepKind::WtfCe;
  SignalKind signal = SignalKind::SCG;
  Position position = Position::Pulmonary;
  ArchId arch = ArchId::WishnetTF;
  FeatureScaler scaler;
  Network<S> net;
  Network<S> head;

  // class probabilities for a batch of frames; each row sums to 1
  std::vector<std::array<double, 4>> probs_rows(const std::vector<Frame>& frames) {
    if (frames.empty()) throw Error("activity: no frames");
    const auto is = input_shape(arch);
    const auto d = static_cast<std::size_t>(is[0] * is[1] * is[2]);
    Tensor<S> x({static_cast<std::int64_t>(frames.size()), is[0], is[1], is[2]});
    for (std::size_t i = 0; i < frames.size(); ++i) {
      auto f = arch_features(arch, frames[i]);
      scaler.apply(f);
      for (std::size_t j = 0; j < d; ++j) x.v[i * d + j] = static_cast<S>(f[j]);
    }
    Tensor<S> emb = net.forward(x, false);
    Tensor<S> logits = head.forward(emb, false);
    if (logits.v.size() != frames.size() * 4) throw Error("activity: unexpected head output");
    std::vector<std::array<double, 4>> out(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
      double mx = logits.v[i * 4];
      for (int c = 1; c < 4; ++c)
        mx = std::max(mx, static_cast<double>(logits.v[i * 4 + static_cast<std::size_t>(c)]));
      double sum = 0.0;
      for (int c = 0; c < 4; ++c) {
        const auto z = static_cast<double>(logits.v[i * 4 + static_cast<std::size_t>(c)]);
        out[i][static_cast<std::size_t>(c)] = std::exp(z - mx);
        sum += out[i][static_cast<std::size_t>(c)];
      }
      for (int c = 0; c < 4; ++c) out[i][static_cast<std::size_t>(c)] /= sum;
    }
    return out;
  }

  std::array<double, 4> probs(const Frame& f) { return probs_rows({f}).front(); }
};

// CE training of a 4-class activity model; every activity must appear.
template <typename S>
ActivityModel<S> train_activity_classifier(const std::vector<Frame>& frames,
                                           const std::vector<Activity>& labels, RepKind rep,
                                           SignalKind signal, Position position,
                                           const TrainConfig& cfg) {
  if (frames.size() != labels.size()) throw Error("activity: frame/label count mismatch");
  if (frames.empty()) throw Error("activity: no frames");
  std::array<bool, 4> seen{};
  for (Activity a : labels) seen[static_cast<std::size_t>(activity_index(a))] = true;
  for (int c = 0; c < 4; ++c)
    if (!seen[static_cast<std::size_t>(c)])
      throw Error(std::string("activity: missing class ") +
                  to_string(kActivityClasses[static_cast<std::size_t>(c)]));

  ActivityModel<S> m;
  m.rep = rep;
  m.signal = signal;
  m.position = position;
  m.arch = rep_arch(rep);

  std::vector<std::vector<double>> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back(arch_features(m.arch, f));
  m.scaler = fit_scaler(rows);

  LabeledSet<S> set;
  set.x.reserve(rows.size());
  for (auto& r : rows) {
    m.scaler.apply(r);
    set.x.emplace_back(r.begin(), r.end());
  }
  for (Activity a : labels) set.y.push_back(activity_index(a));

  m.net = build_arch<S>(m.arch);
  m.net.init(derive_seed(cfg.seed, "activity/net"));
  m.head = build_head<S>(embed_dim(m.arch), 4);
  m.head.init(derive_seed(cfg.seed, "activity/head"));
  train_classifier(m.net, m.head, m.arch, set, cfg);
  return m;
}

struct ActivityDecision {
  Activity label = Activity::Lying;
  std::array<double, 4> scores{};
};

// Fuse per-model score vectors: each contribution is normalized to unit sum
// (so fusion is invariant to uniform positive scaling of any model's softmax)
// and summed; argmax with first-index tie-break.
inline ActivityDecision fuse_activity_scores(const std::vector<std::array<double, 4>>& per_model) {
  if (per_model.empty()) throw Error("classify_activity: no model supplied");
  ActivityDecision d;
  for (const auto& v : per_model) {
    double s = 0.0;
    for (double x : v) s += x;
    if (!(s > 0.0)) throw Error("classify_activity: non-positive score vector");
    for (int c = 0; c < 4; ++c)
      d.scores[static_cast<std::size_t>(c)] += v[static_cast<std::size_t>(c)] / s;
  }
  int best = 0;
  for (int c = 1; c < 4; ++c)
    if (d.scores[static_cast<std::size_t>(c)] > d.scores[static_cast<std::size_t>(best)]) best = c;
  d.label = kActivityClasses[static_cast<std::size_t>(best)];
  return d;
}

// Per-frame softmax vectors averaged over frames per model, then fused across
// models; frames are looked up by each model's signal kind.
template <typename S>
ActivityDecision classify_activity(const std::map<SignalKind, std::vector<Frame>>& frames,
                                   const std::vector<ActivityModel<S>*>& models) {
  if (models.empty()) throw Error("classify_activity: no model supplied");
  std::vector<std::array<double, 4>> per_model;
  per_model.reserve(models.size());
  for (ActivityModel<S>* m : models) {
    const auto it = frames.find(m->signal);
    if (it == frames.end() || it->second.empty())
      throw Error(std::string("classify_activity: no frames for signal ") + to_string(m->signal));
    const auto rows = m->probs_rows(it->second);
    std::array<double, 4> mean{};
    for (const auto& r : rows)
      for (int c = 0; c < 4; ++c) mean[static_cast<std::size_t>(c)] += r[static_cast<std::size_t>(c)];
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (int c = 0; c < 4; ++c) mean[static_cast<std::size_t>(c)] *= inv;
    per_model.push_back(mean);
  }
  return fuse_activity_scores(per_model);
}

// 4x4 counts, predicted activity on rows, target activity on columns.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, 4>, 4> counts{};

  void add(Activity predicted, Activity target) {
    ++counts[static_cast<std::size_t>(activity_index(predicted))]
            [static_cast<std::size_t>(activity_index(target))];
  }
  std::int64_t total() const {
    std::int64_t n = 0;
    for (const auto& row : counts)
      for (std::int64_t v : row) n += v;
    return n;
  }
  std::int64_t row_sum(int predicted) const {
    std::int64_t n = 0;
    for (std::int64_t v : counts[static_cast<std::size_t>(predicted)]) n += v;
    return n;
  }
  std::int64_t column_sum(int target) const {
    std::int64_t n = 0;
    for (const auto& row : counts) n += row[static_cast<std::size_t>(target)];
    return n;
  }
  double accuracy() const {
    const auto n = total();
    if (n == 0) throw Error("confusion: no samples");
    std::int64_t tr = 0;
    for (int c = 0; c < 4; ++c)
      tr += counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
    return static_cast<double>(tr) / static_cast<double>(n);
  }
  double recall(int cls) const {
    const auto n = column_sum(cls);
    if (n == 0) return 0.0;
    const auto i = static_cast<std::size_t>(cls);
    return static_cast<double>(counts[i][i]) / static_cast<double>(n);
  }
  double precision(int cls) const {
    const auto n = row_sum(cls);
    if (n == 0) return 0.0;
    const auto i = static_cast<std::size_t>(cls);
    return static_cast<double>(counts[i][i]) / static_cast<double>(n);
  }
};

inline ConfusionMatrix confusion(const std::vector<std::pair<Activity, Activity>>& pairs) {
  if (pairs.empty()) throw Error("confusion: no samples");
  ConfusionMatrix cm;
  for (const auto& [pred, target] : pairs) cm.add(pred, target);
  return cm;
}

// Stage-2 routing target for one activity: per-signal trained condition
// models plus the claimed user's galleries and calibrations.
template <typename S>
struct ActivityVerifier {
  std::map<SignalKind, CondModels<S>*> models;
  std::map<SignalKind, const UserEnrollment*> user;
  std::vector<RepKind> fusion;
};

// fused verification score of a probe against one activity's galleries:
// z-normalized sum over representations, summed across signals, averaged
// over frames
template <typename S>
double verify_score(const std::map<SignalKind, std::vector<Frame>>& probe,
                    const ActivityVerifier<S>& v) {
  if (v.models.empty()) throw Error("verify: no signal models");
  std::vector<double> combined;
  for (const auto& [sig, cm] : v.models) {
    const auto fit = probe.find(sig);
    if (fit == probe.end() || fit->second.empty())
      throw Error(std::string("verify: no frames for signal ") + to_string(sig));
    const auto uit = v.user.find(sig);
    if (uit == v.user.end())
      throw Error(std::string("verify: no enrollment for signal ") + to_string(sig));
    auto pv = probe_vectors(fit->second, *cm, v.fusion);
    const auto f = fused_from_vectors(pv, *uit->second, v.fusion);
    if (combined.empty()) combined.assign(f.size(), 0.0);
    if (combined.size() != f.size()) throw Error("verify: per-signal frame counts differ");
    for (std::size_t j = 0; j < f.size(); ++j) combined[j] += f[j];
  }
  return multi_frame_score(combined);
}

struct TwoStageResult {
  Activity activity = Activity::Lying;
  double score = 0.0;
};

// Stage 1 classifies the probe's activity; stage 2 routes to that activity's
// galleries and returns the fused verification score.
template <typename S>
TwoStageResult two_stage_verify(const std::map<SignalKind, std::vector<Frame>>& probe,
                                const std::map<Activity, ActivityVerifier<S>>& verifiers,
                                const std::vector<ActivityModel<S>*>& activity_models) {
  const auto decision = classify_activity(probe, activity_models);
  const auto it = verifiers.find(decision.label);
  if (it == verifiers.end())
    throw Error(std::string("two_stage_verify: missing gallery for the predicted activity ") +
                to_string(decision.label));
  return {decision.label, verify_score(probe, it->second)};
}

}  // namespace biowish
