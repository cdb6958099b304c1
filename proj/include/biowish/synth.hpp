// Deterministic synthetic SCG/GCG corpus generator: damped-oscillation pulse
// trains with subject-, session-, and activity-dependent structure and a
// controllable separability knob.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "biowish/rng.hpp"
#include "biowish/signals.hpp"
#include "biowish/verification.hpp"

namespace biowish {

inline constexpr double kSynthRateHz = 120.0;

// one damped-oscillation component of a pulse template
struct PulseComponent {
  double amplitude = 1.0;
  double resonance_hz = 10.0;  // kept well inside the retained subband
  double decay_s = 0.12;       // 1/e time constant
};

// per-axis sum of damped sinusoids, one set per signal kind
struct PulseTemplate {
  std::array<std::vector<PulseComponent>, 3> scg;
  std::array<std::vector<PulseComponent>, 3> gcg;
};

// cross-session variability, applied to session 2
struct SessionDrift {
  double amplitude_jitter = 1.0;
  double resonance_shift_hz = 0.0;
};

struct ActivityModifier {
  double gain = 1.0;
  double noise = 0.0;       // band-limited additive noise level
  double rate_scale = 1.0;  // heart-rate multiplier
  double gait_hz = 0.0;     // Walking only: periodic burst fundamental
  double gait_gain = 0.0;
};

struct SubjectProfile {
  std::string subject_id;
  double heart_rate_hz = 1.15;
  PulseTemplate pulse;
  SessionDrift drift;
  std::array<ActivityModifier, 4> activities;  // indexed by activity_index
};

namespace detail {

// separability 1 keeps the sampled value, 0 collapses onto the anchor
inline double spread(double anchor, double sampled, double separability) {
  return anchor + separability * (sampled - anchor);
}

}  // namespace detail

// Deterministic per (seed, subject_id); the separability knob scales how far
// each subject's parameters spread from a shared population anchor.
inline SubjectProfile generate_profile(std::uint64_t seed, const std::string& subject_id,
                                       double separability = 1.0) {
  if (separability < 0.0 || separability > 1.0)
    throw Error("synth: separability must be in [0, 1]");
  Rng rng(derive_seed(seed, "profile/" + subject_id));
  SubjectProfile p;
  p.subject_id = subject_id;
  p.heart_rate_hz = detail::spread(1.15, rng.uniform(0.9, 1.5), separability);
  for (int sig = 0; sig < 2; ++sig)
    for (int axis = 0; axis < 3; ++axis) {
      auto& comps = sig == 0 ? p.pulse.scg[static_cast<std::size_t>(axis)]
                             : p.pulse.gcg[static_cast<std::size_t>(axis)];
      for (int c = 0; c < 2; ++c) {
        const double anchor_res = 8.0 + 2.0 * axis + 5.0 * c + 1.5 * sig;
        const double anchor_amp = (c == 0 ? 0.9 : 0.45) * (1.0 - 0.08 * axis);
        PulseComponent pc;
        pc.amplitude = detail::spread(anchor_amp, anchor_amp * rng.uniform(0.7, 1.3), separability);
        pc.resonance_hz = detail::spread(anchor_res, rng.uniform(6.0, 20.0), separability);
        pc.decay_s = detail::spread(0.12, rng.uniform(0.08, 0.2), separability);
        comps.push_back(pc);
      }
    }
  p.drift.amplitude_jitter = detail::spread(1.05, rng.uniform(0.9, 1.1), separability);
  p.drift.resonance_shift_hz = detail::spread(0.5, rng.uniform(-1.0, 1.0), separability);

  p.activities[0] = {1.00, 0.02, 0.95, 0.0, 0.0};  // Lying
  p.activities[1] = {0.85, 0.05, 1.05, 0.0, 0.0};  // Sitting
  p.activities[2] = {1.00, 0.06, 1.12, 0.0, 0.0};  // Standing
  p.activities[3] = {1.10, 0.08, 1.25,             // Walking
                     detail::spread(2.0, rng.uniform(1.6, 2.4), separability), 0.5};
  return p;
}

// Synthesizes one session recording: a heartbeat pulse train with per-beat
// timing jitter, per-axis damped-oscillation templates, session-2 drift,
// activity gain/noise/gait, white measurement noise, and a mild position
// gain. SCG and GCG share the beat times.
inline LoadedPair synthesize_recording(const SubjectProfile& profile, int session,
                                       Activity activity, Position position, double duration_s,
                                       std::uint64_t seed, double measurement_noise = 0.02) {
  const int ai = activity_index(activity);
  if (ai < 0 || ai > 3) throw Error("synth: unknown activity");
  if (session != 1 && session != 2) throw Error("synth: session must be 1 or 2");
  if (duration_s < 5.0) throw Error("synth: duration below one frame");
  if (measurement_noise < 0.0) throw Error("synth: negative noise level");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * kSynthRateHz));
  const ActivityModifier& mod = profile.activities[static_cast<std::size_t>(ai)];
  const double drift_gain = session == 2 ? profile.drift.amplitude_jitter : 1.0;
  const double drift_shift = session == 2 ? profile.drift.resonance_shift_hz : 0.0;
  const double pos_gain = 1.0 - 0.04 * static_cast<double>(static_cast<int>(position));
  constexpr double pi = 3.141592653589793;

  Rng rng(derive_seed(seed, "synth/" + profile.subject_id + "/" + std::to_string(session) + "/" +
                                to_string(activity)));

  // beat onsets with +-3% per-beat interval jitter
  const double base = 1.0 / (profile.heart_rate_hz * mod.rate_scale);
  std::vector<double> onsets;
  double t = rng.uniform(0.0, base);
  while (t < duration_s) {
    onsets.push_back(t);
    t += base * (1.0 + 0.03 * rng.uniform(-1.0, 1.0));
  }

  LoadedPair out;
  for (Recording* rec : {&out.scg, &out.gcg}) {
    rec->sample_rate_hz = kSynthRateHz;
    rec->meta.subject_id = profile.subject_id;
    rec->meta.session = session;
    rec->meta.activity = activity;
    rec->meta.position = position;
    for (auto& ch : rec->channels) ch.assign(n, 0.0);
  }
  out.scg.meta.signal_kind = SignalKind::SCG;
  out.gcg.meta.signal_kind = SignalKind::GCG;

  // pulse train convolved with the damped-oscillation templates
  for (int sig = 0; sig < 2; ++sig) {
    Recording& rec = sig == 0 ? out.scg : out.gcg;
    for (int axis = 0; axis < 3; ++axis) {
      const auto& comps = sig == 0 ? profile.pulse.scg[static_cast<std::size_t>(axis)]
                                   : profile.pulse.gcg[static_cast<std::size_t>(axis)];
      auto& ch = rec.channels[static_cast<std::size_t>(axis)];
      for (const PulseComponent& pc : comps) {
        const double f = pc.resonance_hz + drift_shift;
        const double support = 7.0 * pc.decay_s;
        const double amp = pc.amplitude * mod.gain * drift_gain;
        for (double onset : onsets) {
          auto i = static_cast<std::size_t>(std::max(0.0, std::ceil(onset * kSynthRateHz)));
          for (; i < n; ++i) {
            const double dt = static_cast<double>(i) / kSynthRateHz - onset;
            if (dt > support) break;
            const double attack = std::min(1.0, dt / 0.02);
            ch[i] += amp * attack * std::exp(-dt / pc.decay_s) * std::sin(2.0 * pi * f * dt);
          }
        }
      }
    }
  }

  // Walking gait: periodic in-band bursts shared by all channels
  if (mod.gait_gain > 0.0) {
    const double ph1 = rng.uniform(0.0, 2.0 * pi);
    const double ph2 = rng.uniform(0.0, 2.0 * pi);
    for (Recording* rec : {&out.scg, &out.gcg})
      for (int axis = 0; axis < 3; ++axis) {
        auto& ch = rec->channels[static_cast<std::size_t>(axis)];
        const double pa = 0.4 * pi * axis;
        for (std::size_t i = 0; i < n; ++i) {
          const double ts = static_cast<double>(i) / kSynthRateHz;
          ch[i] += mod.gait_gain * (std::sin(2.0 * pi * mod.gait_hz * ts + ph1 + pa) +
                                    0.4 * std::sin(4.0 * pi * mod.gait_hz * ts + ph2 + pa));
        }
      }
  }

  // activity noise as a sum of random in-band sinusoids (band-limited by
  // construction), then white measurement noise; position gain last
  for (Recording* rec : {&out.scg, &out.gcg})
    for (auto& ch : rec->channels) {
      if (mod.noise > 0.0) {
        constexpr int kTones = 32;
        const double a = mod.noise * std::sqrt(2.0 / kTones);
        std::array<double, kTones> fs{}, phs{};
        for (int k = 0; k < kTones; ++k) {
          fs[static_cast<std::size_t>(k)] = rng.uniform(0.5, 22.0);
          phs[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * pi);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double ts = static_cast<double>(i) / kSynthRateHz;
          double v = 0.0;
          for (int k = 0; k < kTones; ++k)
            v += std::sin(2.0 * pi * fs[static_cast<std::size_t>(k)] * ts +
                          phs[static_cast<std::size_t>(k)]);
          ch[i] += a * v;
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        ch[i] += measurement_noise * rng.normal(0.0, 1.0);
        ch[i] *= pos_gain;
      }
    }

  return out;
}

// ---------------------------------------------------------------------------
// Corpus materialization: the CSV/dataset layout the signals module reads.

struct CorpusConfig {
  int subjects = 16;
  std::vector<Position> positions{Position::Pulmonary, Position::Aortic, Position::Xiphoid,
                                  Position::Mitral, Position::Tricuspid};
  std::vector<Activity> activities{Activity::Lying, Activity::Sitting, Activity::Standing,
                                   Activity::Walking};
  std::array<double, 2> session_seconds{120.0, 120.0};
  double separability = 1.0;
  double measurement_noise = 0.02;
  std::uint64_t seed = 1;
};

inline std::string corpus_subject_id(int index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "s%02d", index);
  return buf;
}

inline std::string corpus_path(const std::string& root, const std::string& subject, int session,
                               Activity act, Position pos) {
  return root + "/data/" + subject + "/" + std::to_string(session) + "/" + to_string(act) + "/" +
         std::string(to_string(pos)) + ".csv";
}

inline void write_corpus(const std::string& root, const CorpusConfig& cfg) {
  if (cfg.subjects < 1) throw Error("synth: corpus needs at least one subject");
  if (cfg.positions.empty() || cfg.activities.empty())
    throw Error("synth: corpus needs positions and activities");
  namespace fs = std::filesystem;
  fs::create_directories(root);

  std::ostringstream man;
  man << "sample_rate_hz=120\n";
  man << "subjects=";
  for (int s = 0; s < cfg.subjects; ++s) man << (s ? "," : "") << corpus_subject_id(s);
  man << "\nsessions=2\nactivities=";
  for (std::size_t i = 0; i < cfg.activities.size(); ++i)
    man << (i ? "," : "") << to_string(cfg.activities[i]);
  man << "\npositions=";
  for (std::size_t i = 0; i < cfg.positions.size(); ++i)
    man << (i ? "," : "") << to_string(cfg.positions[i]);
  man << "\nsession1_seconds=" << cfg.session_seconds[0];
  man << "\nsession2_seconds=" << cfg.session_seconds[1];
  man << "\nseparability=" << cfg.separability;
  man << "\nmeasurement_noise=" << cfg.measurement_noise;
  man << "\nseed=" << cfg.seed << "\n";
  {
    std::ofstream mf(root + "/manifest.txt", std::ios::binary);
    if (!mf) throw Error("synth: cannot write manifest under " + root);
    mf << man.str();
  }

  for (int s = 0; s < cfg.subjects; ++s) {
    const auto id = corpus_subject_id(s);
    const auto profile = generate_profile(cfg.seed, id, cfg.separability);
    for (int session = 1; session <= 2; ++session)
      for (Activity act : cfg.activities)
        for (Position pos : cfg.positions) {
          const auto rec_seed =
              derive_seed(cfg.seed, "corpus/" + id + "/" + std::to_string(session) + "/" +
                                        to_string(act) + "/" + to_string(pos));
          const auto pair =
              synthesize_recording(profile, session, act, pos,
                                   cfg.session_seconds[static_cast<std::size_t>(session - 1)],
                                   rec_seed, cfg.measurement_noise);
          const auto path = corpus_path(root, id, session, act, pos);
          fs::create_directories(fs::path(path).parent_path());
          std::ofstream out(path, std::ios::binary);
          if (!out) throw Error("synth: cannot write " + path);
          out << "t,ax,ay,az,gx,gy,gz\n";
          const auto& a = pair.scg.channels;
          const auto& g = pair.gcg.channels;
          char line[160];
          for (std::size_t i = 0; i < a[0].size(); ++i) {
            std::snprintf(line, sizeof(line), "%.6f,%.5f,%.5f,%.5f,%.5f,%.5f,%.5f\n",
                          static_cast<double>(i) / kSynthRateHz, a[0][i], a[1][i], a[2][i],
                          g[0][i], g[1][i], g[2][i]);
            out << line;
          }
        }
  }
}

namespace detail {

inline std::map<std::string, std::string> read_manifest(const std::string& root) {
  std::ifstream in(root + "/manifest.txt");
  if (!in) throw Error("synth: cannot open manifest under " + root);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("synth: bad manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

// Loads a materialized corpus back as a preprocessed protocol dataset.
inline ProtocolDataset load_corpus(const std::string& root) {
  const auto kv = detail::read_manifest(root);
  for (const char* key : {"sample_rate_hz", "subjects", "activities", "positions"})
    if (!kv.count(key)) throw Error(std::string("synth: manifest missing ") + key);
  const double rate = std::stod(kv.at("sample_rate_hz"));
  const auto subjects = detail::split_list(kv.at("subjects"));
  const auto acts = detail::split_list(kv.at("activities"));
  const auto poss = detail::split_list(kv.at("positions"));

  ProtocolDataset ds;
  for (const auto& id : subjects)
    for (int session = 1; session <= 2; ++session)
      for (const auto& act_name : acts)
        for (const auto& pos_name : poss) {
          const Activity act = activity_from_string(act_name);
          const Position pos = position_from_string(pos_name);
          RecordingMeta meta;
          meta.subject_id = id;
          meta.session = session;
          meta.activity = act;
          meta.position = pos;
          const auto pair = load_recording(corpus_path(root, id, session, act, pos), meta, rate);
          ds[{id, session, act, pos, SignalKind::SCG}] = preprocess(pair.scg);
          ds[{id, session, act, pos, SignalKind::GCG}] = preprocess(pair.gcg);
        }
  return ds;
}

}  // namespace biowish
