#pragma once

// Open-set verification: representation pathways, enrollment galleries,
// min-distance scoring, z-normalized sum fusion, multi-frame probe
// averaging, ROC/EER computation, and the cross-validated protocol.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "biowish/features.hpp"
#include "biowish/net.hpp"
#include "biowish/rng.hpp"
#include "biowish/signals.hpp"
#include "biowish/svm.hpp"
#include "biowish/threading.hpp"
#include "biowish/train.hpp"

namespace biowish {

// ---------------------------------------------------------------------------
// Representation pathways

enum class RepKind { L2 = 0, Svm, WtCe, WtC, WtfCe, WtfC };

inline const char* to_string(RepKind k) {
  switch (k) {
    case RepKind::L2: return "L2";
    case RepKind::Svm: return "SVM";
    case RepKind::WtCe: return "WT_CE";
    case RepKind::WtC: return "WT_C";
    case RepKind::WtfCe: return "WTF_CE";
    case RepKind::WtfC: return "WTF_C";
  }
  return "?";
}

inline RepKind rep_from_string(const std::string& s) {
  for (RepKind k : {RepKind::L2, RepKind::Svm, RepKind::WtCe, RepKind::WtC, RepKind::WtfCe,
                    RepKind::WtfC})
    if (s == to_string(k)) return k;
  throw Error("unknown representation: " + s);
}

// representations realized by a trained embedding network
inline bool rep_uses_net(RepKind k) {
  return k == RepKind::WtCe || k == RepKind::WtC || k == RepKind::WtfCe || k == RepKind::WtfC;
}

// the four representations entering sum fusion
inline bool rep_in_fusion(RepKind k) { return rep_uses_net(k); }

inline bool rep_is_siamese(RepKind k) { return k == RepKind::WtC || k == RepKind::WtfC; }

inline ArchId rep_arch(RepKind k) {
  if (k == RepKind::WtCe || k == RepKind::WtC) return ArchId::WishnetT;
  if (k == RepKind::WtfCe || k == RepKind::WtfC) return ArchId::WishnetTF;
  throw Error("representation has no network architecture");
}

// raw (pre-scaling) feature rows per pathway
inline std::vector<double> arch_features(ArchId arch, const Frame& f) {
  return arch == ArchId::WishnetT ? time_matrix(f) : stft_tensor(f);
}

inline std::vector<double> rep_features(RepKind k, const Frame& f) {
  if (k == RepKind::L2 || k == RepKind::Svm) return stft_tensor(f);
  return arch_features(rep_arch(k), f);
}

struct RepresentationTag {
  RepKind kind = RepKind::L2;
  SignalKind signal = SignalKind::SCG;
  Position position = Position::Pulmonary;
  Activity activity = Activity::Lying;

  friend auto operator<=>(const RepresentationTag&, const RepresentationTag&) = default;
};

inline std::string to_string(const RepresentationTag& t) {
  return std::string(to_string(t.kind)) + "/" + to_string(t.signal) + "/" +
         to_string(t.position) + "/" + to_string(t.activity);
}

// ---------------------------------------------------------------------------
// Per-dimension standardization of network inputs, fit on training features

struct FeatureScaler {
  std::vector<double> mean, sigma;

  void apply(std::vector<double>& v) const {
    if (mean.empty()) return;
    if (v.size() != mean.size()) throw Error("feature scaler: dimension mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i]) / sigma[i];
  }
};

inline FeatureScaler fit_scaler(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw Error("fit_scaler: no rows");
  const std::size_t d = rows[0].size();
  FeatureScaler sc;
  sc.mean.assign(d, 0.0);
  sc.sigma.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw Error("fit_scaler: inconsistent row dimensions");
    for (std::size_t i = 0; i < d; ++i) sc.mean[i] += r[i];
  }
  for (auto& m : sc.mean) m /= static_cast<double>(rows.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) {
      const double dv = r[i] - sc.mean[i];
      sc.sigma[i] += dv * dv;
    }
  for (auto& s : sc.sigma) {
    s = std::sqrt(s / static_cast<double>(rows.size()));
    if (s <= 1e-12) s = 1.0;
  }
  return sc;
}

// ---------------------------------------------------------------------------
// Embedding pathway: standardize features, run the frozen network

template <typename S>
struct Embedder {
  ArchId arch = ArchId::WishnetT;
  FeatureScaler scaler;
  Network<S> net;

  std::vector<double> features(const Frame& f) const { return arch_features(arch, f); }

  std::vector<std::vector<double>> embed_rows(const std::vector<std::vector<double>>& feats) {
    if (feats.empty()) return {};
    const auto is = input_shape(arch);
    const auto dim = static_cast<std::size_t>(is[0] * is[1] * is[2]);
    std::vector<S> flat(feats.size() * dim);
    for (std::size_t r = 0; r < feats.size(); ++r) {
      auto v = feats[r];
      scaler.apply(v);
      if (v.size() != dim) throw Error("embedder: feature dimension mismatch");
      for (std::size_t i = 0; i < dim; ++i) flat[r * dim + i] = static_cast<S>(v[i]);
    }
    const auto out = embed_batch(net, arch, flat, static_cast<std::int64_t>(feats.size()));
    const auto ed = static_cast<std::size_t>(embed_dim(arch));
    std::vector<std::vector<double>> rows(feats.size(), std::vector<double>(ed));
    for (std::size_t r = 0; r < feats.size(); ++r)
      for (std::size_t i = 0; i < ed; ++i) rows[r][i] = static_cast<double>(out[r * ed + i]);
    return rows;
  }

  std::vector<double> embed(const Frame& f) { return embed_rows({features(f)})[0]; }
};

// pathway context: trained embedders plus the SVM cohort negatives
template <typename S>
struct RepModels {
  std::map<RepKind, Embedder<S>> embedders;
  std::vector<std::vector<double>> svm_negatives;
  double svm_c = 1.0;
};

// ---------------------------------------------------------------------------
// Enrollment and probe scoring

struct EnrollmentGallery {
  std::string user_id;
  RepresentationTag tag;
  std::vector<std::vector<double>> references;  // embedding pathways
  SvmModel svm;                                 // SVM pathway only
  std::int64_t k = 0;                           // enrollment frame count
};

template <typename S>
EnrollmentGallery enroll(const std::vector<Frame>& frames, const RepresentationTag& tag,
                         RepModels<S>& models, const std::string& user_id) {
  if (frames.empty()) throw Error("enroll: no frames");
  EnrollmentGallery g;
  g.user_id = user_id;
  g.tag = tag;
  g.k = static_cast<std::int64_t>(frames.size());
  if (tag.kind == RepKind::L2) {
    for (const auto& f : frames) g.references.push_back(stft_tensor(f));
  } else if (tag.kind == RepKind::Svm) {
    if (models.svm_negatives.empty())
      throw Error("enroll: SVM representation needs cohort negatives");
    std::vector<std::vector<double>> positives;
    for (const auto& f : frames) positives.push_back(stft_tensor(f));
    g.svm = train_rbf_svm(positives, models.svm_negatives, models.svm_c);
  } else {
    auto it = models.embedders.find(tag.kind);
    if (it == models.embedders.end())
      throw Error(std::string("enroll: no trained model for representation ") +
                  to_string(tag.kind));
    std::vector<std::vector<double>> feats;
    for (const auto& f : frames) feats.push_back(it->second.features(f));
    g.references = it->second.embed_rows(feats);
  }
  return g;
}

// probe frame mapped through a tag's pathway into the space score_probe expects
template <typename S>
std::vector<double> probe_vector(const Frame& f, RepKind kind, RepModels<S>& models) {
  if (!rep_uses_net(kind)) return stft_tensor(f);
  auto it = models.embedders.find(kind);
  if (it == models.embedders.end())
    throw Error(std::string("probe_vector: no trained model for representation ") +
                to_string(kind));
  return it->second.embed(f);
}

inline double score_probe(const std::vector<double>& probe, const EnrollmentGallery& g) {
  if (g.tag.kind == RepKind::Svm) return svm_dissimilarity(g.svm, probe);
  if (g.references.empty()) throw Error("score_probe: empty gallery");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ref : g.references) {
    if (ref.size() != probe.size()) throw Error("score_probe: dimension mismatch");
    double d2 = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double d = probe[i] - ref[i];
      d2 += d * d;
    }
    best = std::min(best, std::sqrt(d2));
  }
  return best;
}

template <typename S>
double score_probe(const Frame& f, const EnrollmentGallery& g, RepModels<S>& models) {
  return score_probe(probe_vector(f, g.tag.kind, models), g);
}

// ---------------------------------------------------------------------------
// Score calibration and sum fusion

struct Calibration {
  double mean = 0.0;
  double sigma = 1.0;
};

inline Calibration fit_calibration(const std::vector<double>& scores) {
  if (scores.empty()) throw Error("fit_calibration: no scores");
  Calibration c;
  for (double s : scores) c.mean += s;
  c.mean /= static_cast<double>(scores.size());
  double var = 0.0;
  for (double s : scores) var += (s - c.mean) * (s - c.mean);
  c.sigma = std::sqrt(var / static_cast<double>(scores.size()));
  if (c.sigma <= 1e-12) c.sigma = 1.0;
  return c;
}

inline double fuse_scores(const std::map<RepresentationTag, double>& scores,
                          const std::map<RepresentationTag, Calibration>& calibration) {
  if (scores.empty()) throw Error("fuse_scores: no scores");
  double fused = 0.0;
  for (const auto& [tag, s] : scores) {
    auto it = calibration.find(tag);
    if (it == calibration.end())
      throw Error("fuse_scores: missing calibration for " + to_string(tag));
    fused += (s - it->second.mean) / it->second.sigma;
  }
  return fused;
}

// ---------------------------------------------------------------------------
// Multi-frame probes

inline double multi_frame_score(const std::vector<double>& frame_scores) {
  if (frame_scores.empty()) throw Error("multi_frame_score: no frames");
  double s = 0.0;
  for (double v : frame_scores) s += v;
  return s / static_cast<double>(frame_scores.size());
}

// stride-1 means over length-w windows; empty when fewer than w scores exist
inline std::vector<double> window_scores(const std::vector<double>& frame_scores,
                                         std::int64_t w) {
  if (w < 1) throw Error("window_scores: window must hold at least one frame");
  const auto n = static_cast<std::int64_t>(frame_scores.size());
  std::vector<double> out;
  if (n < w) return out;
  double run = 0.0;
  for (std::int64_t i = 0; i < w; ++i) run += frame_scores[static_cast<std::size_t>(i)];
  out.push_back(run / static_cast<double>(w));
  for (std::int64_t i = w; i < n; ++i) {
    run += frame_scores[static_cast<std::size_t>(i)] -
           frame_scores[static_cast<std::size_t>(i - w)];
    out.push_back(run / static_cast<double>(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ROC and equal error rate

struct TrialSet {
  std::vector<double> genuine;   // dissimilarities, lower = more genuine
  std::vector<double> impostor;
};

struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct RocCurve {
  double eer = 0.0;  // fraction in [0, 1]
  double threshold = 0.0;
  std::vector<RocPoint> points;
};

// Accept iff score <= threshold. Thresholds sweep a below-minimum sentinel
// plus every distinct observed score; the EER interpolates linearly between
// the adjacent sweep points where FAR - FRR changes sign.
inline RocCurve compute_roc_eer(const TrialSet& trials) {
  if (trials.genuine.empty()) throw Error("compute_roc_eer: empty genuine score list");
  if (trials.impostor.empty()) throw Error("compute_roc_eer: empty impostor score list");
  for (double s : trials.genuine)
    if (!std::isfinite(s)) throw Error("compute_roc_eer: non-finite genuine score");
  for (double s : trials.impostor)
    if (!std::isfinite(s)) throw Error("compute_roc_eer: non-finite impostor score");

  auto gen = trials.genuine;
  auto imp = trials.impostor;
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> taus;
  taus.reserve(gen.size() + imp.size() + 1);
  taus.insert(taus.end(), gen.begin(), gen.end());
  taus.insert(taus.end(), imp.begin(), imp.end());
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  RocCurve out;
  out.points.push_back({taus.front() - 1.0, 0.0, 1.0});
  for (double t : taus) {
    const double far =
        static_cast<double>(std::upper_bound(imp.begin(), imp.end(), t) - imp.begin()) / ni;
    const double frr =
        static_cast<double>(gen.end() - std::upper_bound(gen.begin(), gen.end(), t)) / ng;
    out.points.push_back({t, far, frr});
  }

  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const auto& a = out.points[i - 1];
    const auto& b = out.points[i];
    const double da = a.far - a.frr;
    const double db = b.far - b.frr;
    if (db < 0.0) continue;
    const double t = db == da ? 1.0 : -da / (db - da);
    out.eer = 0.5 * (a.far + t * (b.far - a.far) + a.frr + t * (b.frr - a.frr));
    out.threshold = a.threshold + t * (b.threshold - a.threshold);
    return out;
  }
  // FAR ends at 1 and FRR at 0, so a sign change always exists
  throw Error("compute_roc_eer: no FAR/FRR crossing found");
}

// ---------------------------------------------------------------------------
// Cross-validated evaluation protocol

struct RecordingKey {
  std::string subject;
  int session = 1;
  Activity activity = Activity::Lying;
  Position position = Position::Pulmonary;
  SignalKind signal = SignalKind::SCG;

  friend auto operator<=>(const RecordingKey&, const RecordingKey&) = default;
};

using ProtocolDataset = std::map<RecordingKey, PreprocessedSignal>;

struct Condition {
  Position position = Position::Pulmonary;
  Activity activity = Activity::Lying;

  friend auto operator<=>(const Condition&, const Condition&) = default;
};

inline std::string to_string(const Condition& c) {
  return std::string(to_string(c.position)) + "/" + to_string(c.activity);
}

struct ProtocolConfig {
  int iterations = 5;
  int train_subjects = 10;
  int impostors = 5;
  double enroll_seconds = 90.0;
  std::vector<double> probe_durations = {5.0, 10.0, 15.0, 20.0};
  std::vector<RepKind> reps = {RepKind::L2,   RepKind::Svm,   RepKind::WtCe,
                               RepKind::WtC,  RepKind::WtfCe, RepKind::WtfC};
  int cohort_frames = 3;          // calibration/negative frames per training subject
  int ce_frames_per_subject = 0;  // 0: all frames enter CE training
  double svm_c = 1.0;
  TrainConfig ce;
  SiameseConfig siamese;
  std::uint64_t seed = 1;
};

// Result tables hold EER values in percent.
struct EerRow {
  std::string signal;  // "scg", "gcg", or "scg+gcg"
  Position position = Position::Pulmonary;
  Activity activity = Activity::Lying;
  std::string rep;     // representation name or "FUSED"
  double eer_mean = 0.0;
  double eer_std = 0.0;
  std::int64_t n_trials = 0;
  TrialSet pooled;
};

struct DurationRow {
  double duration_s = 0.0;
  Activity activity = Activity::Lying;
  double eer = 0.0;
};

struct ProtocolResult {
  std::vector<EerRow> table;
  std::vector<DurationRow> durations;
};

inline std::vector<std::string> dataset_subjects(const ProtocolDataset& ds) {
  std::vector<std::string> out;
  for (const auto& [k, v] : ds)
    if (out.empty() || out.back() != k.subject) out.push_back(k.subject);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<Condition> dataset_conditions(const ProtocolDataset& ds) {
  std::vector<Condition> out;
  for (const auto& [k, v] : ds) out.push_back({k.position, k.activity});
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<SignalKind> dataset_signals(const ProtocolDataset& ds) {
  bool scg = false, gcg = false;
  for (const auto& [k, v] : ds) {
    scg = scg || k.signal == SignalKind::SCG;
    gcg = gcg || k.signal == SignalKind::GCG;
  }
  std::vector<SignalKind> out;
  if (scg) out.push_back(SignalKind::SCG);
  if (gcg) out.push_back(SignalKind::GCG);
  return out;
}

inline const PreprocessedSignal& dataset_at(const ProtocolDataset& ds, const std::string& subject,
                                            int session, const Condition& cond, SignalKind sig) {
  auto it = ds.find({subject, session, cond.activity, cond.position, sig});
  if (it == ds.end())
    throw Error("protocol: missing recording for " + subject + " session " +
                std::to_string(session) + " " + to_string(cond) + " " + to_string(sig));
  return it->second;
}

inline PreprocessedSignal slice_signal(const PreprocessedSignal& s, std::int64_t start,
                                       std::int64_t len) {
  const auto n = static_cast<std::int64_t>(s.samples());
  if (start < 0 || len < 1 || start + len > n) throw Error("slice_signal: range out of bounds");
  PreprocessedSignal out;
  out.sample_rate_hz = s.sample_rate_hz;
  out.meta = s.meta;
  for (int a = 0; a < 3; ++a)
    out.channels[a].assign(s.channels[a].begin() + start, s.channels[a].begin() + start + len);
  return out;
}

// frames of one subject/condition gathered over both sessions, labeled for
// CE (subject index) and paired for siamese sampling (subject, session)
struct TrainPool {
  std::vector<Frame> frames;
  std::vector<int> subject;  // index into the training-subject list
  std::vector<int> session;
};

inline TrainPool gather_training_frames(const ProtocolDataset& ds,
                                        const std::vector<std::string>& subjects,
                                        const Condition& cond, SignalKind sig) {
  TrainPool pool;
  for (std::size_t si = 0; si < subjects.size(); ++si)
    for (int sess = 1; sess <= 2; ++sess) {
      auto frames = frame_signal(dataset_at(ds, subjects[si], sess, cond, sig));
      for (auto& f : frames) {
        pool.frames.push_back(std::move(f));
        pool.subject.push_back(static_cast<int>(si));
        pool.session.push_back(sess);
      }
    }
  return pool;
}

// evenly spaced subsample indices per subject, capped at n_want per subject
inline std::vector<std::size_t> subsample_per_subject(const std::vector<int>& subject,
                                                      int n_want) {
  std::vector<std::size_t> out;
  if (n_want <= 0) {
    out.resize(subject.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  std::map<int, std::vector<std::size_t>> by_subject;
  for (std::size_t i = 0; i < subject.size(); ++i) by_subject[subject[i]].push_back(i);
  for (const auto& [s, idx] : by_subject) {
    const auto have = idx.size();
    const auto want = std::min<std::size_t>(static_cast<std::size_t>(n_want), have);
    for (std::size_t j = 0; j < want; ++j) out.push_back(idx[j * have / want]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// embedders and cohort material trained for one (condition, signal)
template <typename S>
struct CondModels {
  RepModels<S> models;
  std::map<RepKind, std::vector<std::vector<double>>> cohort_vecs;  // fusion reps
};

template <typename S>
CondModels<S> train_cond_models(const ProtocolDataset& ds,
                                const std::vector<std::string>& train_subjects,
                                const Condition& cond, SignalKind sig,
                                const ProtocolConfig& cfg, int iteration) {
  CondModels<S> cm;
  cm.models.svm_c = cfg.svm_c;
  const auto pool = gather_training_frames(ds, train_subjects, cond, sig);
  const std::string base = "protocol/" + std::to_string(iteration) + "/" + to_string(cond) +
                           "/" + to_string(sig) + "/";

  std::vector<RepKind> net_reps;
  for (RepKind k : cfg.reps)
    if (rep_uses_net(k)) net_reps.push_back(k);

  // per-architecture feature rows and scalers, shared by both training styles
  std::map<ArchId, std::vector<std::vector<S>>> scaled;
  std::map<ArchId, FeatureScaler> scalers;
  for (RepKind k : net_reps) {
    const ArchId arch = rep_arch(k);
    if (scaled.count(arch)) continue;
    std::vector<std::vector<double>> rows;
    rows.reserve(pool.frames.size());
    for (const auto& f : pool.frames) rows.push_back(arch_features(arch, f));
    scalers[arch] = fit_scaler(rows);
    auto& dst = scaled[arch];
    dst.reserve(rows.size());
    for (auto& r : rows) {
      scalers[arch].apply(r);
      dst.emplace_back(r.begin(), r.end());
    }
  }

  std::vector<Embedder<S>> trained(net_reps.size());
  parallel_tasks(net_reps.size(), [&](std::size_t t) {
    const RepKind kind = net_reps[t];
    const ArchId arch = rep_arch(kind);
    const std::string label = base + to_string(kind);
    Embedder<S> emb;
    emb.arch = arch;
    emb.scaler = scalers.at(arch);
    emb.net = build_arch<S>(arch);
    emb.net.init(derive_seed(cfg.seed, label + "/init"));
    const auto& x = scaled.at(arch);
    if (rep_is_siamese(kind)) {
      std::vector<PairKey> keys(pool.frames.size());
      for (std::size_t i = 0; i < keys.size(); ++i)
        keys[i] = {pool.subject[i], pool.session[i]};
      SiameseConfig sc = cfg.siamese;
      sc.seed = derive_seed(cfg.seed, label + "/train");
      train_siamese(emb.net, arch, x, PairSampler(keys), sc);
    } else {
      const auto idx = subsample_per_subject(pool.subject, cfg.ce_frames_per_subject);
      LabeledSet<S> set;
      set.x.reserve(idx.size());
      for (std::size_t i : idx) {
        set.x.push_back(x[i]);
        set.y.push_back(pool.subject[i]);
      }
      auto head = build_head<S>(embed_dim(arch), static_cast<int>(train_subjects.size()));
      head.init(derive_seed(cfg.seed, label + "/head"));
      TrainConfig tc = cfg.ce;
      tc.seed = derive_seed(cfg.seed, label + "/train");
      train_classifier(emb.net, head, arch, set, tc);
    }
    trained[t] = std::move(emb);
  });
  for (std::size_t t = 0; t < net_reps.size(); ++t)
    cm.models.embedders.emplace(net_reps[t], std::move(trained[t]));

  // cohort: leading session-2 frames of each training subject
  std::vector<Frame> cohort;
  for (const auto& subj : train_subjects) {
    auto frames = frame_signal(dataset_at(ds, subj, 2, cond, sig));
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(cfg.cohort_frames),
                                            frames.size());
    for (std::size_t i = 0; i < take; ++i) cohort.push_back(std::move(frames[i]));
  }
  for (const auto& f : cohort) cm.models.svm_negatives.push_back(stft_tensor(f));
  for (RepKind k : net_reps) {
    if (!rep_in_fusion(k)) continue;
    auto& emb = cm.models.embedders.at(k);
    std::vector<std::vector<double>> feats;
    for (const auto& f : cohort) feats.push_back(emb.features(f));
    cm.cohort_vecs[k] = emb.embed_rows(feats);
  }
  return cm;
}

// galleries for every requested representation plus fusion calibrations,
// built from a seeded random contiguous enrollment span of session 1
struct UserEnrollment {
  std::map<RepKind, EnrollmentGallery> galleries;
  std::map<RepKind, Calibration> calib;
};

template <typename S>
UserEnrollment enroll_user(const ProtocolDataset& ds, const std::string& user,
                           const Condition& cond, SignalKind sig, CondModels<S>& cm,
                           const ProtocolConfig& cfg, int iteration) {
  const auto& s1 = dataset_at(ds, user, 1, cond, sig);
  Rng rng(derive_seed(cfg.seed, "protocol/enroll/" + std::to_string(iteration) + "/" +
                                    to_string(cond) + "/" + to_string(sig) + "/" + user));
  const auto span = static_cast<std::int64_t>(std::llround(cfg.enroll_seconds * kResampleRateHz));
  const auto n = static_cast<std::int64_t>(s1.samples());
  std::vector<Frame> frames;
  if (n <= span) {
    frames = frame_signal(s1);
  } else {
    const auto start = rng.uniform_int(n - span + 1);
    frames = frame_signal(slice_signal(s1, start, span));
  }

  UserEnrollment ue;
  for (RepKind k : cfg.reps) {
    const RepresentationTag tag{k, sig, cond.position, cond.activity};
    ue.galleries.emplace(k, enroll(frames, tag, cm.models, user));
    if (rep_in_fusion(k)) {
      const auto& g = ue.galleries.at(k);
      std::vector<double> cohort_scores;
      for (const auto& v : cm.cohort_vecs.at(k)) cohort_scores.push_back(score_probe(v, g));
      ue.calib[k] = fit_calibration(cohort_scores);
    }
  }
  return ue;
}

// probe vectors for every requested representation, embeddings batched
template <typename S>
std::map<RepKind, std::vector<std::vector<double>>> probe_vectors(
    const std::vector<Frame>& frames, CondModels<S>& cm, const std::vector<RepKind>& reps) {
  std::map<RepKind, std::vector<std::vector<double>>> out;
  for (RepKind k : reps) {
    if (!rep_uses_net(k)) {
      auto& dst = out[k];
      for (const auto& f : frames) dst.push_back(stft_tensor(f));
    } else {
      auto& emb = cm.models.embedders.at(k);
      std::vector<std::vector<double>> feats;
      for (const auto& f : frames) feats.push_back(emb.features(f));
      out[k] = emb.embed_rows(feats);
    }
  }
  return out;
}

inline std::vector<double> raw_scores(const std::vector<std::vector<double>>& probe_vecs,
                                      const EnrollmentGallery& g) {
  std::vector<double> out;
  out.reserve(probe_vecs.size());
  for (const auto& v : probe_vecs) out.push_back(score_probe(v, g));
  return out;
}

// per-frame z-normalized sum over the fusion representations
inline std::vector<double> fused_from_vectors(
    const std::map<RepKind, std::vector<std::vector<double>>>& probe_vecs,
    const UserEnrollment& ue, const std::vector<RepKind>& fusion) {
  if (fusion.empty()) throw Error("fused_from_vectors: no fusion representations");
  std::vector<double> fused;
  for (RepKind k : fusion) {
    const auto& vecs = probe_vecs.at(k);
    const auto& g = ue.galleries.at(k);
    const auto& c = ue.calib.at(k);
    if (fused.empty()) fused.assign(vecs.size(), 0.0);
    if (fused.size() != vecs.size()) throw Error("fused_from_vectors: frame count mismatch");
    for (std::size_t f = 0; f < vecs.size(); ++f)
      fused[f] += (score_probe(vecs[f], g) - c.mean) / c.sigma;
  }
  return fused;
}

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  if (v.size() < 2) return {m, 0.0};
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  return {m, std::sqrt(var / static_cast<double>(v.size() - 1))};
}

// everything one condition needs for scoring: trained pathway models,
// per-user galleries and calibrations, and embedded probe vectors
template <typename S>
struct CondArtifacts {
  Condition cond;
  std::vector<SignalKind> sigs;
  std::vector<CondModels<S>> cms;                            // per signal
  std::vector<std::map<std::string, UserEnrollment>> enr;    // per signal: user
  std::vector<std::map<std::string, std::map<RepKind, std::vector<std::vector<double>>>>> pv;
};

template <typename S>
CondArtifacts<S> build_cond_artifacts(const ProtocolDataset& ds,
                                      const std::vector<std::string>& train,
                                      const std::vector<std::string>& held,
                                      const Condition& cond,
                                      const std::vector<SignalKind>& sigs,
                                      const ProtocolConfig& cfg, int iteration) {
  CondArtifacts<S> art;
  art.cond = cond;
  art.sigs = sigs;
  art.cms.resize(sigs.size());
  parallel_tasks(sigs.size(), [&](std::size_t i) {
    art.cms[i] = train_cond_models<S>(ds, train, cond, sigs[i], cfg, iteration);
  });
  art.enr.resize(sigs.size());
  art.pv.resize(sigs.size());
  parallel_tasks(sigs.size(), [&](std::size_t i) {
    for (const auto& u : held)
      art.enr[i][u] = enroll_user(ds, u, cond, sigs[i], art.cms[i], cfg, iteration);
    for (const auto& v : held) {
      const auto frames = frame_signal(dataset_at(ds, v, 2, cond, sigs[i]));
      art.pv[i][v] = probe_vectors(frames, art.cms[i], cfg.reps);
    }
  });
  return art;
}

// per-frame fused scores of probe subject v against user u, summed over signals
template <typename S>
std::vector<double> combined_fused(CondArtifacts<S>& art, const std::string& u,
                                   const std::string& v, const std::vector<RepKind>& fusion) {
  std::vector<double> combined;
  for (std::size_t i = 0; i < art.sigs.size(); ++i) {
    const auto f = fused_from_vectors(art.pv[i].at(v), art.enr[i].at(u), fusion);
    if (combined.empty()) combined.assign(f.size(), 0.0);
    if (combined.size() != f.size()) throw Error("protocol: per-signal frame counts differ");
    for (std::size_t j = 0; j < f.size(); ++j) combined[j] += f[j];
  }
  return combined;
}

namespace detail {

struct RowKey {
  std::string signal;
  Condition cond;
  std::string rep;

  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

struct RowAcc {
  std::vector<double> user_eers;  // percent
  TrialSet pooled;
};

inline void accumulate_row(std::map<RowKey, RowAcc>& acc, const RowKey& key,
                           const std::vector<double>& genuine,
                           const std::vector<double>& impostor) {
  auto& a = acc[key];
  a.pooled.genuine.insert(a.pooled.genuine.end(), genuine.begin(), genuine.end());
  a.pooled.impostor.insert(a.pooled.impostor.end(), impostor.begin(), impostor.end());
  if (!genuine.empty() && !impostor.empty())
    a.user_eers.push_back(100.0 * compute_roc_eer({genuine, impostor}).eer);
}

// accumulate one condition's per-user EERs; optionally hand the per-pair
// combined fused score vectors back to the caller
template <typename S>
void score_condition(CondArtifacts<S>& art, const std::vector<std::string>& held,
                     const ProtocolConfig& cfg, const std::vector<RepKind>& fusion,
                     std::map<RowKey, RowAcc>& acc,
                     std::map<std::pair<std::int64_t, Activity>, std::vector<double>>& dur_acc,
                     std::map<std::pair<std::string, std::string>, std::vector<double>>*
                         combined_out) {
  const auto& cond = art.cond;
  const auto& sigs = art.sigs;
  for (const auto& u : held) {
    std::vector<std::string> imps;
    for (const auto& v : held)
      if (v != u && imps.size() < static_cast<std::size_t>(cfg.impostors)) imps.push_back(v);

    // single-representation rows
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      for (RepKind k : cfg.reps) {
        const auto genuine = raw_scores(art.pv[i].at(u).at(k), art.enr[i].at(u).galleries.at(k));
        std::vector<double> impostor;
        for (const auto& v : imps) {
          const auto s = raw_scores(art.pv[i].at(v).at(k), art.enr[i].at(u).galleries.at(k));
          impostor.insert(impostor.end(), s.begin(), s.end());
        }
        accumulate_row(acc, {to_string(sigs[i]), cond, to_string(k)}, genuine, impostor);
      }
    }

    if (fusion.empty()) continue;

    // fused per signal and combined across signals
    for (std::size_t i = 0; i < sigs.size(); ++i) {
      const auto genuine = fused_from_vectors(art.pv[i].at(u), art.enr[i].at(u), fusion);
      std::vector<double> impostor;
      for (const auto& v : imps) {
        const auto s = fused_from_vectors(art.pv[i].at(v), art.enr[i].at(u), fusion);
        impostor.insert(impostor.end(), s.begin(), s.end());
      }
      accumulate_row(acc, {to_string(sigs[i]), cond, "FUSED"}, genuine, impostor);
    }

    std::string joint_name;
    for (SignalKind sig : sigs)
      joint_name += (joint_name.empty() ? "" : "+") + std::string(to_string(sig));
    const auto genuine_combined = combined_fused(art, u, u, fusion);
    std::vector<std::vector<double>> impostor_combined;
    for (const auto& v : imps) impostor_combined.push_back(combined_fused(art, u, v, fusion));
    if (combined_out) {
      (*combined_out)[{u, u}] = genuine_combined;
      for (std::size_t vi = 0; vi < imps.size(); ++vi)
        (*combined_out)[{u, imps[vi]}] = impostor_combined[vi];
    }

    std::vector<double> imp_flat;
    for (const auto& s : impostor_combined) imp_flat.insert(imp_flat.end(), s.begin(), s.end());
    accumulate_row(acc, {joint_name, cond, "FUSED"}, genuine_combined, imp_flat);

    // duration sweep over the combined fused scores
    for (double d : cfg.probe_durations) {
      const auto w = frame_count(d);
      const auto gen_w = window_scores(genuine_combined, w);
      std::vector<double> imp_w;
      for (const auto& s : impostor_combined) {
        const auto ws = window_scores(s, w);
        imp_w.insert(imp_w.end(), ws.begin(), ws.end());
      }
      if (gen_w.empty() || imp_w.empty()) continue;
      dur_acc[{static_cast<std::int64_t>(std::llround(d * 10.0)), cond.activity}].push_back(
          100.0 * compute_roc_eer({gen_w, imp_w}).eer);
    }
  }
}

// row and duration-curve assembly shared by the protocol entry points
inline ProtocolResult assemble_protocol(
    std::map<RowKey, RowAcc>& acc,
    const std::map<std::pair<std::int64_t, Activity>, std::vector<double>>& dur_acc) {
  ProtocolResult res;
  for (auto& [key, a] : acc) {
    const auto [m, sd] = mean_std(a.user_eers);
    EerRow row;
    row.signal = key.signal;
    row.position = key.cond.position;
    row.activity = key.cond.activity;
    row.rep = key.rep;
    row.eer_mean = m;
    row.eer_std = sd;
    row.n_trials = static_cast<std::int64_t>(a.pooled.genuine.size() + a.pooled.impostor.size());
    row.pooled = std::move(a.pooled);
    res.table.push_back(std::move(row));
  }
  for (const auto& [key, eers] : dur_acc) {
    DurationRow row;
    row.duration_s = static_cast<double>(key.first) / 10.0;
    row.activity = key.second;
    row.eer = mean_std(eers).first;
    res.durations.push_back(row);
  }
  return res;
}

}  // namespace detail

// shared protocol input validation
inline void validate_protocol(const ProtocolDataset& ds, const ProtocolConfig& cfg) {
  if (cfg.iterations < 1) throw Error("protocol: iterations must be positive");
  if (cfg.train_subjects < 2) throw Error("protocol: need at least two training subjects");
  if (cfg.impostors < 1) throw Error("protocol: need at least one impostor");
  const auto subjects = dataset_subjects(ds);
  const auto need = static_cast<std::size_t>(cfg.train_subjects + cfg.impostors + 1);
  if (subjects.size() < need)
    throw Error("protocol: insufficient subjects (" + std::to_string(subjects.size()) +
                " available, " + std::to_string(need) + " required)");
  for (const auto& subj : subjects)
    for (const auto& cond : dataset_conditions(ds))
      for (SignalKind sig : dataset_signals(ds))
        for (int sess = 1; sess <= 2; ++sess) dataset_at(ds, subj, sess, cond, sig);
}

template <typename S = float>
ProtocolResult run_protocol(const ProtocolDataset& ds, const ProtocolConfig& cfg) {
  validate_protocol(ds, cfg);
  const auto subjects = dataset_subjects(ds);
  const auto conds = dataset_conditions(ds);
  const auto sigs = dataset_signals(ds);

  std::vector<RepKind> fusion;
  for (RepKind k : cfg.reps)
    if (rep_in_fusion(k)) fusion.push_back(k);

  std::map<detail::RowKey, detail::RowAcc> acc;
  std::map<std::pair<std::int64_t, Activity>, std::vector<double>> dur_acc;

  for (int it = 0; it < cfg.iterations; ++it) {
    auto order = subjects;
    Rng split_rng(derive_seed(cfg.seed, "protocol/split/" + std::to_string(it)));
    split_rng.shuffle(order);
    const std::vector<std::string> train(order.begin(), order.begin() + cfg.train_subjects);
    const std::vector<std::string> held(order.begin() + cfg.train_subjects, order.end());

    for (const auto& cond : conds) {
      auto art = build_cond_artifacts<S>(ds, train, held, cond, sigs, cfg, it);
      detail::score_condition(art, held, cfg, fusion, acc, dur_acc, nullptr);
    }
  }

  return detail::assemble_protocol(acc, dur_acc);
}

}  // namespace biowish
