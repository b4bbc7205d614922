#pragma once

#include <optional>
#include <string>
#include <variant>

namespace anaforge {

struct OpAnalysis {};

/// DC sweep of one independent source, start/stop/step in volts.
struct DcSweepAnalysis {
  std::string source;
  double start = 0.0;
  double stop = 0.0;
  double step = 0.0;
};

struct TransientAnalysis {
  double step = 0.0;  // s
  double stop = 0.0;  // s
  bool use_initial_conditions = false;
};

struct AcAnalysis {
  int points_per_decade = 20;
  double fstart = 1.0;  // Hz
  double fstop = 1e9;   // Hz
};

/// A DC transfer is a pair of DC sweeps, upward then downward, so
/// hysteresis shows up as two different switching thresholds.
struct DcTransferAnalysis {
  std::string source;
  double low = 0.0;
  double high = 0.0;
  double step = 0.0;
};

enum class AnalysisKind { op, dc_sweep, transient, ac, dc_transfer };

struct AnalysisRequest {
  std::variant<OpAnalysis, DcSweepAnalysis, TransientAnalysis, AcAnalysis, DcTransferAnalysis> spec;

  AnalysisKind kind() const;
  /// Throws PreconditionError when the grid is malformed.
  void validate() const;

  static AnalysisRequest op() { return {OpAnalysis{}}; }
  static AnalysisRequest dc(std::string source, double start, double stop, double step) {
    return {DcSweepAnalysis{std::move(source), start, stop, step}};
  }
  static AnalysisRequest tran(double step, double stop, bool uic = false) {
    return {TransientAnalysis{step, stop, uic}};
  }
  static AnalysisRequest ac(int ppd, double fstart, double fstop) {
    return {AcAnalysis{ppd, fstart, fstop}};
  }
};

/// SPICE control lines for the request (one line, or two for dc_transfer).
std::string analysis_lines(const AnalysisRequest& request);

}  // namespace anaforge
