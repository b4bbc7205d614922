#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "anaforge/sim.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

// FFTW's planner is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Spectrum compute_spectrum(const WaveformSeries& series, std::string_view signal, std::size_t samples) {
  const std::vector<double>& values = series.at(signal);
  const std::vector<double>& t = series.axis;
  if (t.size() < 16 || values.size() != t.size()) {
    throw TooFewSamples("spectrum needs at least 16 samples, got " + std::to_string(t.size()));
  }
  const std::size_t n = samples ? samples : t.size();
  if (n < 16) throw TooFewSamples("spectrum needs at least 16 samples");
  const double t0 = t.front(), t1 = t.back();
  if (!(t1 > t0)) throw PreconditionError("spectrum: time axis must be increasing");

  // Uniform resampling: the engine's transient steps are adaptive.
  const double dt = (t1 - t0) / static_cast<double>(n - 1);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = interpolate(t, values, t0 + dt * static_cast<double>(i));

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);

  const std::size_t padded = next_pow2(n);
  std::unique_ptr<double, decltype(&fftw_free)> in(fftw_alloc_real(padded), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(fftw_alloc_complex(padded / 2 + 1), &fftw_free);
  double window_sum = 0.0, windowed_energy = 0.0;
  for (std::size_t i = 0; i < padded; ++i) {
    double v = 0.0;
    if (i < n) {
      double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1));
      window_sum += w;
      v = (x[i] - mean) * w;
      windowed_energy += v * v;
    }
    in.get()[i] = v;
  }
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), in.get(), out.get(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  Spectrum s;
  s.samples = n;
  const double fs = 1.0 / dt;
  s.bin_width = fs / static_cast<double>(padded);
  const double mean_energy = static_cast<double>(n) * mean * mean;
  s.time_energy = mean_energy + windowed_energy;

  s.series.axis_kind = AxisKind::frequency;
  s.series.axis_name = "frequency";
  const std::string key = fold_case(std::string(signal));
  auto& mag = s.series.signals[key.starts_with("v(") && key.ends_with(")") ? key.substr(2, key.size() - 3) : key];
  const std::size_t bins = padded / 2 + 1;
  for (std::size_t k = 0; k < bins; ++k) {
    const double re = out.get()[k][0], im = out.get()[k][1];
    const double power = re * re + im * im;
    const bool edge = k == 0 || k == padded / 2;
    double energy = (edge ? 1.0 : 2.0) * power / static_cast<double>(padded);
    double amplitude = (edge ? 1.0 : 2.0) * std::sqrt(power) / window_sum;
    if (k == 0) {
      energy += mean_energy;
      amplitude += std::abs(mean);
    }
    s.series.axis.push_back(static_cast<double>(k) * s.bin_width);
    mag.push_back(amplitude);
    s.bin_energy.push_back(energy);
  }
  return s;
}

WaveformSeries compute_fft(const WaveformSeries& series, std::string_view signal, std::size_t samples) {
  return compute_spectrum(series, signal, samples).series;
}

}  // namespace anaforge
