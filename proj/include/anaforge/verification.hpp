#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "anaforge/circuit.hpp"
#include "anaforge/sim.hpp"
#include "anaforge/task.hpp"

namespace anaforge {

enum class CheckStage { requirement, op_point, dc_sweep, function, waveform };
std::string_view to_string(CheckStage stage);
inline constexpr CheckStage kAllStages[] = {CheckStage::requirement, CheckStage::op_point, CheckStage::dc_sweep,
                                            CheckStage::function, CheckStage::waveform};

enum class Severity { info, fail };

// ---------------------------------------------------------------------------
// Diagnostic templates

/// Value slot of a diagnostic: text or number.
using DiagnosticValue = std::variant<std::string, double>;
using DiagnosticData = std::map<std::string, DiagnosticValue>;

struct DiagnosticTemplate {
  std::string_view id;
  Severity severity;
  /// Text with `{name}` slots (string or number via %g) and `{name:%.6f}`
  /// slots with a printf conversion for numbers.
  std::string_view text;
};

/// Every registered template, keyed by id.
const std::map<std::string_view, DiagnosticTemplate>& diagnostic_templates();
/// Renders a template; throws PreconditionError for an unknown id or a
/// missing slot value.
std::string render_template(std::string_view template_id, const DiagnosticData& data);

struct Diagnostic {
  CheckStage stage = CheckStage::requirement;
  std::string template_id;
  std::string message;
  DiagnosticData data;
  Severity severity = Severity::fail;

  /// Builds a diagnostic whose message is rendered from the template.
  static Diagnostic make(CheckStage stage, std::string_view template_id, DiagnosticData data = {});
};

// ---------------------------------------------------------------------------
// Profiles

enum class AnalysisId { op, dc_sweep, ac, transient, fft, dc_transfer };
std::string_view to_string(AnalysisId id);

struct CircuitTypeProfile {
  CircuitType circuit_type;
  /// Analyses used by the function check (rows of the waveform-type table;
  /// types absent from that table use framework choices).
  std::set<AnalysisId> required_analyses;
  /// Whether stage 2 flags MOSFETs in cutoff.
  bool check_cutoff = false;
  /// Whether stage 3 sweeps the input (0 to VDD).
  bool dc_sweep_stage = false;
  std::map<std::string, double> thresholds;
  double threshold(const std::string& key) const;
};

const CircuitTypeProfile& profile_for(CircuitType type);

// ---------------------------------------------------------------------------
// Reports

struct WaveformImage {
  std::string analysis;  // series id, e.g. "tran", "ac", "fft"
  std::vector<std::uint8_t> png;
};

enum class Verdict { pass, fail };

struct CheckReport {
  Verdict verdict = Verdict::fail;
  std::vector<CheckStage> stages_run;
  std::optional<CheckStage> failed_stage;
  std::vector<Diagnostic> diagnostics;
  std::map<std::string, double> measurements;
  std::vector<WaveformImage> waveform_images;

  bool has_template(std::string_view template_id) const;
  /// Diagnostic messages in order, one per line (the repair-prompt text).
  std::string diagnostic_text() const;
};

nlohmann::json to_json(const CheckReport& report);
/// Writes report.json plus one PNG per waveform image into `dir`.
void write_report(const CheckReport& report, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Stage checks

/// Stage 1: declared nets, supply and essential component kinds.
std::vector<Diagnostic> check_requirements(const CircuitIR& circuit, const DesignTask& task);

/// Stage 2: convergence, floating-node warnings in the engine log, and
/// cutoff MOSFETs (when `check_cutoff`).
std::vector<Diagnostic> check_op_point(const SimulationResult& sim, bool check_cutoff = true);

struct StageOutcome {
  std::vector<Diagnostic> diagnostics;
  std::map<std::string, double> measurements;
  bool failed() const;
};

/// Stage 3: maximum |dVout/dVin| over the sweep and the best-bias candidate
/// (input whose output is nearest VDD/2). `output` names the output signal.
StageOutcome check_dc_sweep(const WaveformSeries& series, const NodeRoles& roles, std::string_view output = {});

struct OscillationMetrics {
  double period = 0.0;     // s; 0 when fewer than two rising crossings
  double amplitude = 0.0;  // V, half peak-to-peak after start-up discard
  bool sustained = false;
  int cycles = 0;
};

/// Discards the first 20% of the window; period from rising crossings of the
/// signal mean; sustained when the last-quarter amplitude is at least 0.8x
/// the second-quarter amplitude.
OscillationMetrics measure_oscillation(const WaveformSeries& series, std::string_view signal);

/// Inputs for the function check: simulation results per analysis id.
struct FunctionInputs {
  const DesignTask* task = nullptr;
  NodeRoles roles;
  /// Series by id: "dc" (input sweep), "ac", "tran", "fft", "dc_up" and
  /// "dc_down" (DC transfer).
  std::map<std::string, WaveformSeries> series;
  /// Stimulus waveform (time axis shared with the transient) for integrator
  /// and differentiator checks.
  std::vector<double> stimulus;
  /// Tones of the SIN sources driving a mixer, Hz.
  std::vector<double> tones;
  /// DC sweep step used for the Schmitt hysteresis resolution, V.
  double sweep_step = 0.0;
  /// Small-signal slopes dVout/dVin per input net (adder/subtractor).
  std::map<std::string, double> input_slopes;
  /// Output current for current mirrors, A.
  std::optional<double> output_current;
};

class MissingAnalysis : public Error {
 public:
  using Error::Error;
};

/// Stage 4: per-type functional checks. Throws MissingAnalysis when a
/// required analysis is absent from `inputs`.
StageOutcome check_function(const FunctionInputs& inputs, const CircuitTypeProfile& profile);

/// Pearson correlation of two equally long vectors (0 when degenerate).
double correlation(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Rendering

class EmptySeries : public Error {
 public:
  using Error::Error;
};

struct RenderOptions {
  int width = 800;
  int height = 500;
  std::size_t max_points = 2000;  // per trace, min/max decimation beyond this
  bool log_x = false;
  bool decibels = false;  // plot 20*log10(|y|)
};

/// PNG line chart with axes, tick labels, legend and title. Identical input
/// gives identical bytes.
std::vector<std::uint8_t> render_waveform(const WaveformSeries& series, const std::vector<std::string>& signals,
                                          const std::string& title, const RenderOptions& options = {});

/// Keeps at most `max_points` points by per-bucket min/max selection.
std::vector<std::size_t> decimate(const std::vector<double>& values, std::size_t max_points);

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOptions {
  int dc_sweep_points = 101;
  double ac_fstart = 0.1;
  double ac_fstop = 1e9;
  int ac_points_per_decade = 20;
  double tran_stop = 20e-3;      // s, self-generating circuits
  double tran_step = 5e-6;       // s
  double stimulus_freq = 1e3;    // Hz, integrator/differentiator/Schmitt
  double stimulus_amplitude = 0.1;  // V
  double mixer_tones[2] = {10e3, 6e3};  // Hz, for mixer inputs not driven by a SIN source
  std::filesystem::path workdir;    // scratch for engine runs (empty: temp)
  bool render_images = true;
};

/// Runs stages 1-5, stopping at the first failing stage; images are attached
/// for every analysis that ran. Engine failures become diagnostics.
CheckReport run_pipeline(const CircuitIR& circuit, const DesignTask& task, const Simulator& simulator,
                         const PipelineOptions& options = {});

/// The circuit as simulated: task roles applied, an input source added at
/// VDD/2 when none drives the input net.
CircuitIR prepare_testbench(const CircuitIR& circuit, const DesignTask& task);

/// Independent voltage source whose positive terminal drives `net` against
/// ground; nullptr when none.
const Component* find_driving_source(const CircuitIR& circuit, std::string_view net);

}  // namespace anaforge
