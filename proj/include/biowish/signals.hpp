#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace biowish {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

enum class Activity { Lying = 0, Sitting = 1, Standing = 2, Walking = 3 };
enum class Position { Pulmonary = 0, Aortic = 1, Xiphoid = 2, Mitral = 3, Tricuspid = 4 };
enum class SignalKind { SCG = 0, GCG = 1 };

inline const char* to_string(Activity a) {
  switch (a) {
    case Activity::Lying: return "Lying";
    case Activity::Sitting: return "Sitting";
    case Activity::Standing: return "Standing";
    default: return "Walking";
  }
}
inline const char* to_string(Position p) {
  switch (p) {
    case Position::Pulmonary: return "Pulmonary";
    case Position::Aortic: return "Aortic";
    case Position::Xiphoid: return "Xiphoid";
    case Position::Mitral: return "Mitral";
    default: return "Tricuspid";
  }
}
inline const char* to_string(SignalKind k) { return k == SignalKind::SCG ? "scg" : "gcg"; }

inline int activity_index(Activity a) { return static_cast<int>(a); }

inline Activity activity_from_string(const std::string& s) {
  for (int i = 0; i < 4; ++i)
    if (s == to_string(static_cast<Activity>(i))) return static_cast<Activity>(i);
  throw Error("unknown activity: " + s);
}
inline Position position_from_string(const std::string& s) {
  for (int i = 0; i < 5; ++i)
    if (s == to_string(static_cast<Position>(i))) return static_cast<Position>(i);
  throw Error("unknown position: " + s);
}

struct RecordingMeta {
  std::string subject_id;
  int session = 1;  // 1 or 2
  Activity activity = Activity::Lying;
  Position position = Position::Pulmonary;
  SignalKind signal_kind = SignalKind::SCG;
};

// Raw 3-axis chest recording: rows are axes x, y, z.
struct Recording {
  std::array<std::vector<double>, 3> channels;
  double sample_rate_hz = 0.0;
  RecordingMeta meta;

  std::size_t samples() const { return channels[0].size(); }
  double duration_s() const { return static_cast<double>(samples()) / sample_rate_hz; }
};

struct PreprocessedSignal {
  std::array<std::vector<double>, 3> channels;
  double sample_rate_hz = 60.0;
  RecordingMeta meta;

  std::size_t samples() const { return channels[0].size(); }
  double duration_s() const { return static_cast<double>(samples()) / sample_rate_hz; }
};

struct FrameSource {
  RecordingMeta meta;
  std::size_t start_sample = 0;  // at 60 Hz
};

// One 5 s window: 3 x 300 time matrix phi, row-major.
struct Frame {
  std::vector<double> phi;  // 3*300
  FrameSource source;

  double& at(int axis, int n) { return phi[static_cast<std::size_t>(axis) * 300 + n]; }
  double at(int axis, int n) const { return phi[static_cast<std::size_t>(axis) * 300 + n]; }
};

struct FramingConfig {
  double frame_len_s = 5.0;       // L
  double overlap_fraction = 0.8;  // O
};

inline constexpr double kResampleRateHz = 60.0;  // R
inline constexpr int kFrameSamples = 300;        // L * R

// ---------------------------------------------------------------------------
// CSV loading

struct LoadedPair {
  Recording scg;
  Recording gcg;
};

namespace detail {

inline bool parse_double(const std::string& tok, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(tok, &pos);
    while (pos < tok.size() && std::isspace(static_cast<unsigned char>(tok[pos]))) ++pos;
    return pos == tok.size();
  } catch (...) {
    return false;
  }
}

}  // namespace detail

// Parses the 7-column recording CSV (t,ax,ay,az,gx,gy,gz) into an SCG and a
// GCG recording. Sample rate comes from the median timestamp delta;
// declared_rate_hz (from the dataset manifest) overrides it after a 1%
// consistency check, or pass <= 0 to accept the inferred rate.
inline LoadedPair load_recording(const std::string& path, const RecordingMeta& meta,
                                 double declared_rate_hz = 0.0) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recording: " + path);

  std::string line;
  if (!std::getline(in, line)) throw Error(path + ": no samples");
  {
    std::string hdr = line;
    hdr.erase(std::remove_if(hdr.begin(), hdr.end(),
                             [](unsigned char c) { return std::isspace(c); }),
              hdr.end());
    if (hdr != "t,ax,ay,az,gx,gy,gz")
      throw Error(path + ": bad header, expected t,ax,ay,az,gx,gy,gz");
  }

  std::vector<double> t;
  std::array<std::vector<double>, 3> acc, gyr;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    double vals[7];
    int n = 0;
    while (std::getline(ss, tok, ',')) {
      if (n >= 7) {
        ++n;
        break;
      }
      if (!detail::parse_double(tok, vals[n]))
        throw Error(path + ": line " + std::to_string(line_no) + ": bad value '" + tok + "'");
      ++n;
    }
    if (n != 7)
      throw Error(path + ": line " + std::to_string(line_no) + ": expected 7 columns, got " +
                  std::to_string(n));
    for (int i = 0; i < 7; ++i)
      if (!std::isfinite(vals[i]))
        throw Error(path + ": line " + std::to_string(line_no) + ": non-finite value");
    if (!t.empty() && vals[0] <= t.back())
      throw Error(path + ": line " + std::to_string(line_no) + ": timestamps not increasing");
    t.push_back(vals[0]);
    for (int a = 0; a < 3; ++a) {
      acc[a].push_back(vals[1 + a]);
      gyr[a].push_back(vals[4 + a]);
    }
  }
  if (t.empty()) throw Error(path + ": no samples");

  double rate;
  if (t.size() < 2) {
    if (declared_rate_hz <= 0) throw Error(path + ": cannot infer sample rate from one sample");
    rate = declared_rate_hz;
  } else {
    std::vector<double> dt(t.size() - 1);
    for (std::size_t i = 1; i < t.size(); ++i) dt[i - 1] = t[i] - t[i - 1];
    std::nth_element(dt.begin(), dt.begin() + dt.size() / 2, dt.end());
    const double med = dt[dt.size() / 2];
    rate = 1.0 / med;
    if (declared_rate_hz > 0) {
      if (std::abs(rate - declared_rate_hz) > 0.01 * declared_rate_hz)
        throw Error(path + ": manifest rate " + std::to_string(declared_rate_hz) +
                    " Hz disagrees with timestamps (" + std::to_string(rate) + " Hz)");
      rate = declared_rate_hz;
    }
  }

  LoadedPair out;
  out.scg.channels = std::move(acc);
  out.scg.sample_rate_hz = rate;
  out.scg.meta = meta;
  out.scg.meta.signal_kind = SignalKind::SCG;
  out.gcg.channels = std::move(gyr);
  out.gcg.sample_rate_hz = rate;
  out.gcg.meta = meta;
  out.gcg.meta.signal_kind = SignalKind::GCG;
  return out;
}

// ---------------------------------------------------------------------------
// Low-pass FIR and zero-phase filtering

// 101-tap Hamming-windowed sinc, normalized to unity DC gain.
inline std::vector<double> design_lowpass(double cutoff_hz, double sample_rate_hz,
                                          int taps = 101) {
  if (!(cutoff_hz > 0) || cutoff_hz >= sample_rate_hz / 2.0)
    throw Error("cutoff must lie in (0, Nyquist)");
  const double pi = 3.14159265358979323846;
  const double fc = cutoff_hz / sample_rate_hz;  // cycles per sample
  const int M = taps - 1;
  std::vector<double> h(taps);
  for (int n = 0; n < taps; ++n) {
    const double m = n - M / 2.0;
    const double sinc = (m == 0.0) ? 2.0 * fc : std::sin(2.0 * pi * fc * m) / (pi * m);
    const double w = 0.54 - 0.46 * std::cos(2.0 * pi * n / M);
    h[n] = sinc * w;
  }
  double sum = 0.0;
  for (double x : h) sum += x;
  for (double& x : h) x /= sum;
  return h;
}

// Kernel magnitude response at a given frequency (test/analysis helper).
inline double kernel_response(const std::vector<double>& h, double freq_hz,
                              double sample_rate_hz) {
  const double pi = 3.14159265358979323846;
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) {
    const double a = 2.0 * pi * freq_hz * static_cast<double>(n) / sample_rate_hz;
    re += h[n] * std::cos(a);
    im -= h[n] * std::sin(a);
  }
  return std::sqrt(re * re + im * im);
}

namespace detail {

inline std::vector<double> conv_full(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += xi * h[j];
  }
  return y;
}

}  // namespace detail

// Forward-backward FIR application: zero phase, squared magnitude response.
// Edges are mirror-padded (without repeating the edge sample) by taps-1
// samples before filtering so transients fall outside the kept region.
inline std::vector<double> filtfilt(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t T = h.size();
  const std::size_t N = x.size();
  if (N == 0) return {};
  const std::size_t P = T - 1;

  std::vector<double> padded;
  padded.reserve(N + 2 * P);
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t k = P - i;
    padded.push_back(x[k < N ? k : N - 1]);
  }
  padded.insert(padded.end(), x.begin(), x.end());
  for (std::size_t i = 0; i < P; ++i) {
    const std::size_t k = N >= 2 + i ? N - 2 - i : 0;
    padded.push_back(x[k]);
  }

  std::vector<double> f = detail::conv_full(padded, h);
  std::reverse(f.begin(), f.end());
  std::vector<double> b = detail::conv_full(f, h);
  std::reverse(b.begin(), b.end());
  // b has length N + 2P + 2(T-1); the zero-phase segment aligned with x
  // starts at P + (T-1).
  std::vector<double> y(b.begin() + static_cast<std::ptrdiff_t>(P + T - 1),
                        b.begin() + static_cast<std::ptrdiff_t>(P + T - 1 + N));
  return y;
}

// Low-pass at 25 Hz then resample to R = 60 Hz. Integer decimation when
// F is an exact multiple of R, linear interpolation otherwise.
inline PreprocessedSignal preprocess(const Recording& rec, double cutoff_hz = 25.0) {
  if (rec.sample_rate_hz < kResampleRateHz)
    throw Error("unsupported rate: input below 60 Hz, upsampling not implemented");
  const auto h = design_lowpass(cutoff_hz, rec.sample_rate_hz);
  const double F = rec.sample_rate_hz;
  const auto N = static_cast<std::int64_t>(rec.samples());
  const auto M = static_cast<std::int64_t>(std::llround(static_cast<double>(N) * kResampleRateHz / F));

  PreprocessedSignal out;
  out.meta = rec.meta;
  out.sample_rate_hz = kResampleRateHz;
  const double ratio = F / kResampleRateHz;
  const bool integer_step = std::abs(ratio - std::round(ratio)) < 1e-9;
  const auto step = static_cast<std::int64_t>(std::llround(ratio));
  for (int a = 0; a < 3; ++a) {
    std::vector<double> filt = filtfilt(rec.channels[a], h);
    std::vector<double>& ch = out.channels[a];
    ch.resize(static_cast<std::size_t>(M));
    for (std::int64_t m = 0; m < M; ++m) {
      if (integer_step) {
        const std::int64_t src = m * step;
        ch[static_cast<std::size_t>(m)] = filt[static_cast<std::size_t>(std::min(src, N - 1))];
      } else {
        const double p = static_cast<double>(m) * ratio;
        const auto i0 = static_cast<std::int64_t>(std::min(static_cast<double>(N - 1), std::floor(p)));
        const std::int64_t i1 = std::min(i0 + 1, N - 1);
        const double fr = p - static_cast<double>(i0);
        ch[static_cast<std::size_t>(m)] =
            filt[static_cast<std::size_t>(i0)] * (1.0 - fr) + filt[static_cast<std::size_t>(i1)] * fr;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Framing

inline std::int64_t frame_len_samples(const FramingConfig& cfg) {
  const double ls = cfg.frame_len_s * kResampleRateHz;
  const auto l = static_cast<std::int64_t>(std::llround(ls));
  if (std::abs(ls - static_cast<double>(l)) > 1e-9) throw Error("frame length must be an integer sample count");
  return l;
}

inline std::int64_t hop_samples(const FramingConfig& cfg) {
  const double hs = cfg.frame_len_s * (1.0 - cfg.overlap_fraction) * kResampleRateHz;
  auto h = static_cast<std::int64_t>(std::llround(hs));
  if (h < 1) h = 1;
  return h;
}

// K = floor(1 + (1/(1-O)) (T/L - 1)), computed in the sample domain so that
// boundary durations do not fall prey to floating-point representation.
inline std::int64_t frame_count(double duration_s, const FramingConfig& cfg = {}) {
  if (duration_s < cfg.frame_len_s) throw Error("zero frames: duration shorter than one frame");
  const auto M = static_cast<std::int64_t>(std::llround(duration_s * kResampleRateHz));
  const std::int64_t L = frame_len_samples(cfg);
  const std::int64_t H = hop_samples(cfg);
  if (M < L) throw Error("zero frames: duration shorter than one frame");
  return (M - L) / H + 1;
}

inline std::vector<Frame> frame_signal(const PreprocessedSignal& sig,
                                       const FramingConfig& cfg = {}) {
  const auto M = static_cast<std::int64_t>(sig.samples());
  const std::int64_t L = frame_len_samples(cfg);
  const std::int64_t H = hop_samples(cfg);
  if (M < L) throw Error("zero frames: duration shorter than one frame");
  const std::int64_t K = (M - L) / H + 1;
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(K));
  for (std::int64_t k = 0; k < K; ++k) {
    Frame f;
    f.phi.resize(static_cast<std::size_t>(3 * L));
    f.source.meta = sig.meta;
    f.source.start_sample = static_cast<std::size_t>(k * H);
    for (int a = 0; a < 3; ++a)
      for (std::int64_t n = 0; n < L; ++n)
        f.phi[static_cast<std::size_t>(a * L + n)] =
            sig.channels[a][static_cast<std::size_t>(k * H + n)];
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace biowish
