#include <cmath>
#include <limits>

#include "anaforge/netlist.hpp"
#include "anaforge/sizing.hpp"
#include "anaforge/units.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

namespace {

Component* driving_source(CircuitIR& circuit, std::string_view net) {
  return const_cast<Component*>(find_driving_source(circuit, net));
}

}  // namespace

std::string_view to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::ok: return "ok";
    case TrialStatus::sim_fail: return "sim_fail";
    case TrialStatus::bias_fail: return "bias_fail";
  }
  return "sim_fail";
}

nlohmann::json to_json(const TrialRecord& record) {
  nlohmann::json j;
  j["trial_id"] = record.trial_id;
  j["params"] = record.params;
  j["bias"] = record.bias;
  j["objective"] = std::isfinite(record.objective) ? nlohmann::json(record.objective) : nlohmann::json(nullptr);
  j["metrics"] = {{"gain_db", record.metrics.gain_db},   {"bandwidth_hz", record.metrics.bandwidth_hz},
                  {"gbw_mhz", record.metrics.gbw_mhz},   {"power_uw", record.metrics.power_uw},
                  {"fom", record.metrics.fom}};
  j["status"] = std::string(to_string(record.status));
  if (!record.error.empty()) j["error"] = record.error;
  return j;
}

double gain_to_db(double linear_gain) { return 20.0 * std::log10(std::abs(linear_gain)); }

double figure_of_merit(double gbw_hz, double load_capacitance_f, double power_w) {
  if (!(power_w > 0.0)) throw DomainError("figure of merit needs a positive power");
  return (gbw_hz / 1e6) * (load_capacitance_f / 1e-12) / (power_w / 1e-6);
}

TrialMetrics metrics_from_response(const std::vector<double>& freq, const std::vector<double>& magnitude,
                                   double power_w, double load_capacitance_f) {
  if (freq.empty() || freq.size() != magnitude.size())
    throw PreconditionError("metrics_from_response: empty or mismatched response");
  TrialMetrics m;
  const double a0 = std::abs(magnitude.front());
  m.gain_db = gain_to_db(a0);
  const double ref_db = m.gain_db - 3.0;
  m.bandwidth_hz = freq.back();
  for (std::size_t i = 1; i < freq.size(); ++i) {
    const double db = gain_to_db(magnitude[i]);
    if (db < ref_db) {
      const double db_prev = gain_to_db(magnitude[i - 1]);
      const double lf0 = std::log10(freq[i - 1]);
      const double lf1 = std::log10(freq[i]);
      const double t = db_prev == db ? 0.0 : (db_prev - ref_db) / (db_prev - db);
      m.bandwidth_hz = std::pow(10.0, lf0 + t * (lf1 - lf0));
      break;
    }
  }
  const double gbw_hz = a0 * m.bandwidth_hz;
  m.gbw_mhz = gbw_hz / 1e6;
  m.power_uw = power_w * 1e6;
  m.fom = power_w > 0.0 ? figure_of_merit(gbw_hz, load_capacitance_f, power_w) : 0.0;
  return m;
}

double objective_value(const TrialMetrics& metrics, DesignObjective target) {
  switch (target) {
    case DesignObjective::gain: return metrics.gain_db;
    case DesignObjective::gbw: return metrics.gbw_mhz;
    case DesignObjective::fom: return metrics.fom;
  }
  return metrics.fom;
}

CircuitSizer::CircuitSizer(const Simulator& simulator, ParamSpace space, DesignTask task, ObjectiveSpec objective,
                           BiasSearchOptions bias_options)
    : simulator_(simulator),
      space_(std::move(space)),
      task_(std::move(task)),
      objective_(objective),
      bias_options_(std::move(bias_options)) {
  if (!task_.input_node) throw PreconditionError("sizing needs a task with an input node");
}

CircuitIR CircuitSizer::testbench(const ParamValues& params, double bias) const {
  const CircuitIR circuit = parse_netlist_lenient(space_.instantiate(params)).circuit;
  CircuitIR tb = prepare_testbench(circuit, task_);
  Component* src = driving_source(tb, *task_.input_node);
  if (!src) throw Error("no source drives the input " + *task_.input_node);
  src->params["dc"] = bias;
  return tb;
}

BiasResult CircuitSizer::find_bias(const ParamValues& params) const {
  const CircuitIR tb = testbench(params, 0.0);
  const std::string source = driving_source(const_cast<CircuitIR&>(tb), *task_.input_node)->refdes;
  const std::string output = task_.output_node;
  SweepFn sweep = [&](double start, double stop, int points) {
    const WaveformSeries s = simulator_.dc_sweep(tb, source, start, stop, points);
    return s.at(output);
  };
  return multires_bias_search(sweep, objective_.supply, bias_options_);
}

TrialMetrics CircuitSizer::evaluate(const ParamValues& params, double bias) const {
  CircuitIR tb = testbench(params, bias);
  driving_source(tb, *task_.input_node)->params["ac"] = 1.0;
  Component load;
  load.refdes = "CLOAD";
  load.kind = ComponentKind::capacitor;
  load.terminals = {task_.output_node, "0"};
  load.params["value"] = objective_.load_capacitance;
  tb.components.push_back(load);

  const std::vector<AnalysisRequest> analyses{AnalysisRequest::op(), AnalysisRequest::ac(20, 0.1, 1e9)};
  const SimulationResult result = simulator_.simulate(tb, analyses);
  const WaveformSeries* ac = result.find_series("ac");
  if (!result.converged || !ac || ac->axis.empty()) throw Error("AC analysis produced no data");
  std::vector<double> magnitude = ac->at(task_.output_node);
  if (const auto* in = ac->find(*task_.input_node)) {
    for (std::size_t i = 0; i < magnitude.size(); ++i)
      if (i < in->size() && (*in)[i] > 0.0) magnitude[i] /= (*in)[i];
  }

  double power_w = 0.0;
  if (tb.meta.supply) {
    const Component* s = find_driving_source(tb, tb.meta.supply->net);
    const WaveformSeries* op = result.find_series("op");
    if (s && op) {
      if (const auto* i = op->find("i(" + fold_case(s->refdes) + ")"); i && !i->empty())
        power_w = std::abs(tb.meta.supply->volts * i->front());
    }
  }
  if (objective_.target == DesignObjective::fom && !(power_w > 0.0))
    throw Error("supply power is not measurable; the FoM needs it");
  return metrics_from_response(ac->axis, magnitude, power_w, objective_.load_capacitance);
}

TrialRecord CircuitSizer::run_trial(const ParamValues& params, int trial_id) const {
  TrialRecord rec;
  rec.trial_id = trial_id;
  rec.params = params;
  rec.objective = std::numeric_limits<double>::quiet_NaN();
  try {
    if (auto it = params.find("bias"); it != params.end() && !space_.find("bias")) {
      rec.bias = it->second;
    } else {
      rec.bias = find_bias(params).bias;
    }
  } catch (const Error& e) {
    rec.status = TrialStatus::bias_fail;
    rec.error = e.what();
    return rec;
  }
  try {
    rec.metrics = evaluate(params, rec.bias);
    rec.objective = objective_value(rec.metrics, objective_.target);
    rec.status = std::isfinite(rec.objective) ? TrialStatus::ok : TrialStatus::sim_fail;
    if (rec.status != TrialStatus::ok) rec.objective = std::numeric_limits<double>::quiet_NaN();
  } catch (const Error& e) {
    rec.status = TrialStatus::sim_fail;
    rec.error = e.what();
  }
  return rec;
}

}  // namespace anaforge
