#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <vector>

#include "biowish/signals.hpp"

namespace biowish {

// STFT configuration over one 300-sample frame: 60-sample (1 s) Hamming
// windows at a 6-sample hop give exactly (300-60)/6+1 = 41 windows and a
// 1 Hz bin spacing; bins 0..24 cover the retained subband.
inline constexpr int kStftWindow = 60;
inline constexpr int kStftHop = 6;
inline constexpr int kStftColumns = 41;
inline constexpr int kPsdBins = 25;
inline constexpr int kRawBins = kStftWindow / 2 + 1;  // 31 one-sided bins
inline constexpr double kLogFloor = 1e-12;

static_assert((kFrameSamples - kStftWindow) / kStftHop + 1 == kStftColumns);

namespace detail {

struct StftTables {
  std::vector<double> window;       // 60 Hamming coefficients
  double window_energy = 0.0;       // sum w^2
  std::vector<double> cos_t, sin_t; // kRawBins x kStftWindow twiddles

  StftTables() {
    const double pi = 3.14159265358979323846;
    window.resize(kStftWindow);
    for (int n = 0; n < kStftWindow; ++n) {
      window[n] = 0.54 - 0.46 * std::cos(2.0 * pi * n / (kStftWindow - 1));
      window_energy += window[n] * window[n];
    }
    cos_t.resize(static_cast<std::size_t>(kRawBins) * kStftWindow);
    sin_t.resize(static_cast<std::size_t>(kRawBins) * kStftWindow);
    for (int k = 0; k < kRawBins; ++k)
      for (int n = 0; n < kStftWindow; ++n) {
        const double a = 2.0 * pi * k * n / kStftWindow;
        cos_t[static_cast<std::size_t>(k) * kStftWindow + n] = std::cos(a);
        sin_t[static_cast<std::size_t>(k) * kStftWindow + n] = std::sin(a);
      }
  }
};

inline const StftTables& stft_tables() {
  static const StftTables t;
  return t;
}

}  // namespace detail

// Linear-power one-sided PSD of one axis: kRawBins x kStftColumns,
// PSD = |X(k)|^2 / (R * sum w^2). Row-major bins x windows.
inline std::vector<double> stft_psd_raw(const double* axis /* 300 samples */) {
  const auto& tb = detail::stft_tables();
  std::vector<double> psd(static_cast<std::size_t>(kRawBins) * kStftColumns);
  const double norm = kResampleRateHz * tb.window_energy;
  std::vector<double> buf(kStftWindow);
  for (int j = 0; j < kStftColumns; ++j) {
    const double* seg = axis + static_cast<std::ptrdiff_t>(j) * kStftHop;
    for (int n = 0; n < kStftWindow; ++n) buf[n] = seg[n] * tb.window[n];
    for (int k = 0; k < kRawBins; ++k) {
      const double* ct = tb.cos_t.data() + static_cast<std::size_t>(k) * kStftWindow;
      const double* st = tb.sin_t.data() + static_cast<std::size_t>(k) * kStftWindow;
      double re = 0.0, im = 0.0;
      for (int n = 0; n < kStftWindow; ++n) {
        re += buf[n] * ct[n];
        im -= buf[n] * st[n];
      }
      psd[static_cast<std::size_t>(k) * kStftColumns + j] = (re * re + im * im) / norm;
    }
  }
  return psd;
}

// 25 x 41 x 3 log-PSD tensor, flat layout ((k * 41) + j) * 3 + axis: the
// axis index is innermost, matching the channel-last network input.
inline std::vector<double> stft_tensor(const Frame& frame) {
  std::vector<double> out(static_cast<std::size_t>(kPsdBins) * kStftColumns * 3);
  for (int a = 0; a < 3; ++a) {
    const std::vector<double> psd = stft_psd_raw(frame.phi.data() + static_cast<std::ptrdiff_t>(a) * kFrameSamples);
    for (int k = 0; k < kPsdBins; ++k)
      for (int j = 0; j < kStftColumns; ++j)
        out[(static_cast<std::size_t>(k) * kStftColumns + j) * 3 + a] =
            std::log(psd[static_cast<std::size_t>(k) * kStftColumns + j] + kLogFloor);
  }
  return out;
}

// 75-vector: mean linear power over the 41 windows, then log, axis-major
// (axis x bins 0..24, then y, then z).
inline std::vector<double> avg_psd(const Frame& frame) {
  std::vector<double> out(static_cast<std::size_t>(3) * kPsdBins);
  for (int a = 0; a < 3; ++a) {
    const std::vector<double> psd = stft_psd_raw(frame.phi.data() + static_cast<std::ptrdiff_t>(a) * kFrameSamples);
    for (int k = 0; k < kPsdBins; ++k) {
      double s = 0.0;
      for (int j = 0; j < kStftColumns; ++j) s += psd[static_cast<std::size_t>(k) * kStftColumns + j];
      out[static_cast<std::size_t>(a) * kPsdBins + k] = std::log(s / kStftColumns + kLogFloor);
    }
  }
  return out;
}

// Identity view of phi (3 x 300, row-major); no per-frame normalization.
inline std::vector<double> time_matrix(const Frame& frame) { return frame.phi; }

// ---------------------------------------------------------------------------
// Feature dump: 3 little-endian int64 shape entries then row-major
// little-endian float64 payload.

inline void write_feature_dump(const std::string& path, const std::int64_t shape[3],
                               const std::vector<double>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature dump: " + path);
  out.write(reinterpret_cast<const char*>(shape), 3 * sizeof(std::int64_t));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw Error("short write: " + path);
}

inline std::vector<double> read_feature_dump(const std::string& path, std::int64_t shape[3]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read feature dump: " + path);
  in.read(reinterpret_cast<char*>(shape), 3 * sizeof(std::int64_t));
  if (!in) throw Error("truncated feature dump header: " + path);
  const std::int64_t n = shape[0] * shape[1] * shape[2];
  if (n < 0) throw Error("bad feature dump shape: " + path);
  std::vector<double> data(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw Error("truncated feature dump payload: " + path);
  return data;
}

}  // namespace biowish
