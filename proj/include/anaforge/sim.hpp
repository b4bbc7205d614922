#pragma once

#include <chrono>
#include <complex>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/analysis.hpp"
#include "anaforge/circuit.hpp"

namespace anaforge {

enum class AxisKind { none, time, frequency, voltage };
std::string_view to_string(AxisKind kind);

/// One analysis' worth of named signals sampled on a common axis.
/// Node voltages are keyed by folded net name ("vout"); branch currents by
/// "i(<source>)". AC signals hold magnitudes; their phases (degrees) live in
/// `phase_deg` under the same key.
struct WaveformSeries {
  AxisKind axis_kind = AxisKind::none;
  std::string axis_name;
  std::vector<double> axis;
  std::map<std::string, std::vector<double>> signals;
  std::map<std::string, std::vector<double>> phase_deg;
  /// True when the engine swept the axis downward (the samples are stored
  /// in increasing axis order regardless).
  bool descending = false;

  /// Signal for a net or vector name, case-insensitive; nullptr when absent.
  const std::vector<double>* find(std::string_view name) const;
  /// Like find() but throws Error naming the missing signal.
  const std::vector<double>& at(std::string_view name) const;
};

enum class Region { unknown, cutoff, triode, saturation };
std::string_view to_string(Region region);

/// MOSFET operating point. Voltages are as seen at the device terminals
/// (vgs = V(gate) - V(source)); for PMOS both vgs and vth are negative when on.
struct DeviceOp {
  DeviceKind kind = DeviceKind::other;
  double id = 0.0;   // A
  double vgs = 0.0;  // V
  double vds = 0.0;  // V
  double vth = 0.0;  // V
  double gm = 0.0;   // S
  Region region = Region::unknown;
};

struct SimulationResult {
  std::map<std::string, double> op_point;   // folded net -> V
  std::map<std::string, DeviceOp> devices;  // folded refdes -> telemetry
  /// Analyses by id: "op", "dc", "ac", "tran"; a repeated analysis of the
  /// same kind gets a numeric suffix ("dc2").
  std::map<std::string, WaveformSeries> series;
  std::string engine_log;
  bool converged = true;

  const WaveformSeries* find_series(std::string_view id) const;
};

// ---------------------------------------------------------------------------
// ASCII raw file

struct RawVariable {
  std::string name;  // as written by the engine, e.g. "v(vout)"
  std::string type;  // "voltage", "current", "frequency", ...
};

struct RawPlot {
  std::string title;
  std::string plotname;
  bool complex = false;
  std::vector<RawVariable> variables;
  /// values[var][point]; real plots leave the imaginary part at zero.
  std::vector<std::vector<std::complex<double>>> values;
};

/// Parses every plot of an ASCII raw file. Throws Error on malformed input.
std::vector<RawPlot> parse_raw(std::string_view text);

/// Converts engine plots into a SimulationResult (series ids, op table,
/// device telemetry from `@m..[...]` vectors).
SimulationResult result_from_plots(const std::vector<RawPlot>& plots);

// ---------------------------------------------------------------------------
// Engines

class EngineNotFound : public Error {
 public:
  using Error::Error;
};
class SimulationTimeout : public Error {
 public:
  using Error::Error;
};
class NonConvergence : public Error {
 public:
  using Error::Error;
};

enum class EngineMode { batch, server };

struct EngineConfig {
  /// Engine executable. A `.mjs`/`.js` path is run through `node`.
  std::string executable;
  EngineMode mode = EngineMode::batch;
  std::chrono::milliseconds timeout{60'000};
  /// Maximum concurrently running engine processes (server mode keeps this
  /// many warm instances).
  int workers = 2;
};

/// Engine settings from the environment: ANAFORGE_SPICE (path),
/// ANAFORGE_SPICE_MODE (batch|server), ANAFORGE_SPICE_TIMEOUT (seconds).
/// Falls back to `ngspice` on PATH, then to the bundled WebAssembly wrapper.
EngineConfig engine_config_from_env(const std::optional<std::filesystem::path>& search_root = std::nullopt);

struct EngineRun {
  int status = 0;  // engine exit status
  std::string log;
};

/// One way of executing a deck file and producing an ASCII raw file.
class SpiceEngine {
 public:
  virtual ~SpiceEngine() = default;
  virtual EngineRun execute(const std::filesystem::path& deck, const std::filesystem::path& raw,
                            const std::filesystem::path& log) = 0;
  virtual std::string describe() const = 0;
};

/// `<engine> -b <deck> -r <raw>` as a child process per run.
std::shared_ptr<SpiceEngine> make_batch_engine(const EngineConfig& config);
/// Long-lived engine processes speaking the one-JSON-line-per-run protocol
/// (`--server`), avoiding engine start-up per run.
std::shared_ptr<SpiceEngine> make_server_engine(const EngineConfig& config);
std::shared_ptr<SpiceEngine> make_engine(const EngineConfig& config);

/// Runs decks on an engine inside per-call scratch directories.
class Simulator {
 public:
  explicit Simulator(std::shared_ptr<SpiceEngine> engine, std::filesystem::path scratch_root = {});

  /// Runs a complete deck in `workdir` (created if needed; a fresh
  /// subdirectory of the scratch root when empty). Throws EngineNotFound,
  /// SimulationTimeout, or NonConvergence when the engine produced nothing.
  SimulationResult run(std::string_view deck, const std::filesystem::path& workdir = {}) const;

  /// Emits `circuit` with the given analyses plus MOSFET telemetry saves,
  /// runs it and annotates device polarity/region from the circuit.
  SimulationResult simulate(const CircuitIR& circuit, std::span<const AnalysisRequest> analyses,
                            const std::filesystem::path& workdir = {}) const;

  /// DC sweep of `source` from start to stop with `steps` points (>= 2).
  WaveformSeries dc_sweep(const CircuitIR& circuit, const std::string& source, double start, double stop,
                          int steps, const std::filesystem::path& workdir = {}) const;

  const SpiceEngine& engine() const { return *engine_; }

 private:
  std::filesystem::path fresh_workdir() const;

  std::shared_ptr<SpiceEngine> engine_;
  std::filesystem::path scratch_root_;
};

/// `.save` lines requesting vgs/vds/von/id/gm for every MOSFET of the
/// flattened circuit.
std::vector<std::string> telemetry_saves(const CircuitIR& circuit);

/// Fills DeviceOp::kind/vgs/vds/region using the circuit's models and the
/// op-point node voltages.
void annotate_devices(const CircuitIR& circuit, SimulationResult& result);

// ---------------------------------------------------------------------------
// Spectrum

class TooFewSamples : public Error {
 public:
  using Error::Error;
};

/// Single-sided spectrum of a transient signal.
///
/// The signal is resampled onto a uniform grid, its mean is reported in the
/// DC bin, and the remainder is Hann-windowed and zero-padded to the next
/// power of two. `series.signals[signal]` holds amplitudes calibrated so a
/// sine of amplitude A peaks near A. `bin_energy` satisfies Parseval exactly:
/// its sum equals `time_energy`, the energy of the (mean + windowed) samples.
struct Spectrum {
  WaveformSeries series;
  std::vector<double> bin_energy;
  double time_energy = 0.0;
  double bin_width = 0.0;  // Hz
  std::size_t samples = 0;
};

Spectrum compute_spectrum(const WaveformSeries& series, std::string_view signal, std::size_t samples = 0);
WaveformSeries compute_fft(const WaveformSeries& series, std::string_view signal, std::size_t samples = 0);

/// Linear interpolation of `values` sampled on increasing `axis` at `x`
/// (clamped at both ends).
double interpolate(const std::vector<double>& axis, const std::vector<double>& values, double x);

}  // namespace anaforge
