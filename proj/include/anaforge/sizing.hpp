#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anaforge/error.hpp"
#include "anaforge/prompt.hpp"
#include "anaforge/sim.hpp"
#include "anaforge/task.hpp"

namespace anaforge {

// ---------------------------------------------------------------------------
// Parameter space

enum class ParamKind { width, length, resistance, capacitance, bias, other };
std::string_view to_string(ParamKind kind);
std::optional<ParamKind> param_kind_from_string(std::string_view text);

struct ParamRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;
  bool log_scale = false;
  std::string unit;
  ParamKind kind = ParamKind::other;
};

using ParamValues = std::map<std::string, double>;

/// Tunable parameters of a parameterized netlist. The builder is netlist text
/// with `{name}` placeholders; each placeholder has a range or a fixed value.
struct ParamSpace {
  std::vector<ParamRange> ranges;
  ParamValues initial;
  ParamValues fixed;
  std::string builder;
  /// Adjustments made by validate_param_space (clamped initial values, ...).
  std::vector<std::string> notes;

  const ParamRange* find(std::string_view name) const;
  /// Placeholder names in order of first appearance.
  std::vector<std::string> placeholders() const;
  /// Builder with placeholders replaced by `values`, then fixed values.
  /// Throws PreconditionError naming a placeholder left without a value.
  std::string instantiate(const ParamValues& values) const;
};

/// Parses the extraction format:
///   * PARAMS
///   * range <name> min=<v> max=<v> log=true|false kind=<kind> unit=<text>
///   * initial_params <name>=<v> ...
///   * fixed <name>=<v> ...
///   <netlist with {name} placeholders>
/// Magnitudes accept SPICE suffixes. Throws ParseError on malformed lines and
/// when no range line is present.
ParamSpace parse_param_spec(std::string_view text);
/// Renders a space in the format parse_param_spec reads.
std::string format_param_spec(const ParamSpace& space);

/// Space for a concrete netlist with no extraction step: every MOSFET width
/// in [L, 500 L] and every resistor in [value/4, 4 value], log-scaled, with
/// the netlist values as initial values.
ParamSpace default_param_space(std::string_view netlist);

class EmptySpace : public Error {
 public:
  using Error::Error;
};

class ConstraintViolation : public Error {
 public:
  ConstraintViolation(std::string parameter, std::string rule, const std::string& detail);
  const std::string& parameter() const { return parameter_; }
  const std::string& rule() const { return rule_; }

 private:
  std::string parameter_;
  std::string rule_;
};

/// The width rule stated to the extraction model.
inline constexpr std::string_view kWidthRule = "Transistor width (W) should be within 1–500× the corresponding length (L)";

/// Checks ranges (min < max, log ranges positive, unique names), placeholder
/// coverage and the 1–500× W/L rule (each width paired with the length of the
/// same device suffix: an `l_<dev>` range or fixed value, or the device's
/// `l=` in the builder). Initial values outside their range are clamped and
/// missing ones set to the range midpoint, with a note each. Throws
/// EmptySpace or ConstraintViolation.
ParamSpace validate_param_space(const ParamSpace& space);

// ---------------------------------------------------------------------------
// Multi-resolution bias search

class BiasSearchFailed : public Error {
 public:
  using Error::Error;
};

/// Output voltages of a uniform input sweep: `points` inputs from `start` to
/// `stop` inclusive. Each point counts as one simulation.
using SweepFn = std::function<std::vector<double>(double start, double stop, int points)>;

struct BiasSearchOptions {
  std::vector<int> stages{20, 200, 2000};
  /// Search window as fractions of the supply.
  double window_lo = 0.25;
  double window_hi = 0.75;
  /// Random phase of the stage-1 grid: with a seed, stage 1 samples
  /// lo + (i + u) (hi - lo) / n for u ~ U[0, 1) instead of the inclusive
  /// linspace.
  std::optional<std::uint64_t> seed;
};

struct BiasResult {
  double bias = 0.0;
  double vout = 0.0;
  int sims_used = 0;
};

/// Coarse-to-fine search for the input whose output is nearest supply/2.
/// Stage k > 1 sweeps [v* - Δ, v* + Δ] (clipped to the window) where Δ is the
/// previous stage's step; the best point over all stages wins, ties toward
/// the lower bias. Throws BiasSearchFailed when a sweep fails or yields no
/// finite output; PreconditionError for empty stages or a bad window.
BiasResult multires_bias_search(const SweepFn& sweep, double supply, const BiasSearchOptions& options = {});

/// Single-resolution baseline: one sweep of `points` over the window (same
/// seeded phase rule as stage 1 of the multi-resolution search).
BiasResult uniform_bias_search(const SweepFn& sweep, double supply, int points, const BiasSearchOptions& options = {});

// ---------------------------------------------------------------------------
// Objective

enum class TrialStatus { ok, sim_fail, bias_fail };
std::string_view to_string(TrialStatus status);

struct TrialMetrics {
  double gain_db = 0.0;
  double bandwidth_hz = 0.0;
  double gbw_mhz = 0.0;
  double power_uw = 0.0;
  double fom = 0.0;
};

struct TrialRecord {
  int trial_id = 0;
  ParamValues params;
  double bias = 0.0;
  /// Finite iff status == ok.
  double objective = 0.0;
  TrialMetrics metrics;
  TrialStatus status = TrialStatus::ok;
  std::string error;
};

nlohmann::json to_json(const TrialRecord& record);

struct ObjectiveSpec {
  DesignObjective target = DesignObjective::fom;
  double load_capacitance = 100e-12;  // F
  double supply = 5.0;                // V
};

/// 20 log10(|gain|).
double gain_to_db(double linear_gain);
/// gbw[MHz] * C_L[pF] / power[µW]. Throws DomainError for power <= 0.
double figure_of_merit(double gbw_hz, double load_capacitance_f, double power_w);
/// Metrics from an AC magnitude response (input magnitude 1): gain at the
/// lowest frequency, -3 dB bandwidth by log interpolation (the last
/// frequency when the response never drops 3 dB), gbw, and fom when power > 0.
TrialMetrics metrics_from_response(const std::vector<double>& freq, const std::vector<double>& magnitude,
                                   double power_w, double load_capacitance_f);
/// Objective value of metrics for a target.
double objective_value(const TrialMetrics& metrics, DesignObjective target);

/// Simulation-backed evaluation of a parameterized circuit.
class CircuitSizer {
 public:
  /// `task` supplies the roles (input, output, supply) for the testbench.
  CircuitSizer(const Simulator& simulator, ParamSpace space, DesignTask task, ObjectiveSpec objective,
               BiasSearchOptions bias_options = {});

  /// Testbench circuit for a parameter set (input source at `bias`).
  CircuitIR testbench(const ParamValues& params, double bias) const;
  BiasResult find_bias(const ParamValues& params) const;
  /// AC analysis at `bias` with C_L on the output, op-point power.
  /// Throws Error on simulator failure.
  TrialMetrics evaluate(const ParamValues& params, double bias) const;
  /// Bias search (unless `params` carries "bias") then evaluate; failures
  /// become the record status.
  TrialRecord run_trial(const ParamValues& params, int trial_id) const;

  const ParamSpace& space() const { return space_; }
  const ObjectiveSpec& objective() const { return objective_; }

 private:
  const Simulator& simulator_;
  ParamSpace space_;
  DesignTask task_;
  ObjectiveSpec objective_;
  BiasSearchOptions bias_options_;
};

// ---------------------------------------------------------------------------
// TPE

struct TpeOptions {
  double gamma = 0.25;
  int candidates = 24;
  int n_startup = 10;
  /// Joint product-kernel densities; per-parameter independent ones when off.
  bool multivariate = true;
};

/// Next parameter set for maximization. Uniform (log-uniform for log ranges)
/// while the history has fewer than n_startup trials or no ok trial.
ParamValues tpe_suggest(const std::vector<TrialRecord>& history, const ParamSpace& space, std::uint64_t seed,
                        const TpeOptions& options = {});

/// One uniform draw from the space.
ParamValues random_suggest(const ParamSpace& space, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optimization loop

class AllTrialsFailed : public Error {
 public:
  using Error::Error;
};

enum class SamplerKind { tpe, random };

struct OptimizeOptions {
  int budget = 1000;
  std::uint64_t seed = 0;
  SamplerKind sampler = SamplerKind::tpe;
  TpeOptions tpe;
  /// n_startup = budget / 4 when unset.
  std::optional<int> n_startup;
  /// Adds the input bias as an optimized parameter (baseline of the
  /// decoupled search); the range is `bias_range`.
  bool include_bias = false;
  std::pair<double, double> bias_range{1.25, 3.75};
  /// Trial 0 evaluates the space's initial values when set.
  bool start_from_initial = false;
};

struct OptimizeResult {
  TrialRecord best;
  std::vector<TrialRecord> history;
  /// Running maximum of ok objectives per trial (-inf before the first ok).
  std::vector<double> best_so_far;
};

using TrialEvaluator = std::function<TrialRecord(const ParamValues& params, int trial_id)>;

/// suggest -> evaluate -> record for `budget` trials. Throws AllTrialsFailed
/// when no trial is ok (including budget 0).
OptimizeResult optimize(const ParamSpace& space, const TrialEvaluator& evaluate, const OptimizeOptions& options = {});

/// History as JSON lines, one trial per line.
void write_history(const std::vector<TrialRecord>& history, const std::filesystem::path& path);
/// Convergence curve (best-so-far and per-trial objective) as PNG bytes.
std::vector<std::uint8_t> render_convergence(const OptimizeResult& result, const std::string& title);

}  // namespace anaforge
