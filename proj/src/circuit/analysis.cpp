#include "anaforge/analysis.hpp"

#include <cmath>

#include "anaforge/error.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

AnalysisKind AnalysisRequest::kind() const {
  return std::visit(Overloaded{
                        [](const OpAnalysis&) { return AnalysisKind::op; },
                        [](const DcSweepAnalysis&) { return AnalysisKind::dc_sweep; },
                        [](const TransientAnalysis&) { return AnalysisKind::transient; },
                        [](const AcAnalysis&) { return AnalysisKind::ac; },
                        [](const DcTransferAnalysis&) { return AnalysisKind::dc_transfer; },
                    },
                    spec);
}

void AnalysisRequest::validate() const {
  std::visit(Overloaded{
                 [](const OpAnalysis&) {},
                 [](const DcSweepAnalysis& a) {
                   if (a.source.empty()) throw PreconditionError("dc sweep: source name required");
                   if (!(a.step > 0.0)) throw PreconditionError("dc sweep: step must be > 0");
                   if (!(a.start < a.stop)) throw PreconditionError("dc sweep: start must be < stop");
                 },
                 [](const TransientAnalysis& a) {
                   if (!(a.step > 0.0)) throw PreconditionError("transient: step must be > 0");
                   if (!(a.step < a.stop)) throw PreconditionError("transient: step must be < stop");
                 },
                 [](const AcAnalysis& a) {
                   if (!(a.fstart > 0.0)) throw PreconditionError("ac: fstart must be > 0");
                   if (!(a.fstart < a.fstop)) throw PreconditionError("ac: fstart must be < fstop");
                   if (a.points_per_decade < 1) throw PreconditionError("ac: points per decade must be >= 1");
                 },
                 [](const DcTransferAnalysis& a) {
                   if (a.source.empty()) throw PreconditionError("dc transfer: source name required");
                   if (!(a.step > 0.0)) throw PreconditionError("dc transfer: step must be > 0");
                   if (!(a.low < a.high)) throw PreconditionError("dc transfer: low must be < high");
                 },
             },
             spec);
}

std::string analysis_lines(const AnalysisRequest& request) {
  request.validate();
  return std::visit(
      Overloaded{
          [](const OpAnalysis&) { return std::string(".op"); },
          [](const DcSweepAnalysis& a) {
            return ".dc " + a.source + " " + format_number(a.start) + " " + format_number(a.stop) + " " +
                   format_number(a.step);
          },
          [](const TransientAnalysis& a) {
            return ".tran " + format_number(a.step) + " " + format_number(a.stop) +
                   (a.use_initial_conditions ? " uic" : "");
          },
          [](const AcAnalysis& a) {
            return ".ac dec " + std::to_string(a.points_per_decade) + " " + format_number(a.fstart) + " " +
                   format_number(a.fstop);
          },
          [](const DcTransferAnalysis& a) {
            return ".dc " + a.source + " " + format_number(a.low) + " " + format_number(a.high) + " " +
                   format_number(a.step) + "\n.dc " + a.source + " " + format_number(a.high) + " " +
                   format_number(a.low) + " " + format_number(-a.step);
          },
      },
      request.spec);
}

}  // namespace anaforge
