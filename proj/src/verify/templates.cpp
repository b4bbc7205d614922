#include <cstdio>

#include "anaforge/verification.hpp"

namespace anaforge {

namespace {

constexpr DiagnosticTemplate kTemplates[] = {
    // stage 1: requirement
    {"missing_node", Severity::fail, "Missing {node} node"},
    {"missing_supply", Severity::fail,
     "Missing supply node: declare it with * META supply=<net>:<volts> and connect it to a voltage source"},
    {"missing_component", Severity::fail, "The circuit contains no {kind}; a {circuit_type} needs at least one"},
    {"no_ground", Severity::fail, "No ground node (0/gnd) in circuit"},
    {"floating_node", Severity::fail, "Floating node {node}: connected to only one terminal"},
    {"unknown_subcircuit", Severity::fail, "Subcircuit {name} is not defined"},
    {"port_mismatch", Severity::fail,
     "Instance {refdes} connects {given:%.0f} nets to subcircuit {name}, which has {ports:%.0f} ports"},
    {"parse_error", Severity::fail, "The netlist could not be parsed: {reason}"},
    {"no_code_block", Severity::fail,
     "No SPICE netlist was found in the response; write the complete netlist inside a ```spice code block"},
    {"missing_meta", Severity::fail,
     "The netlist lacks the required * META directives ({reason}); add * META type=, input=, output= and supply= lines"},
    {"invalid_circuit", Severity::fail, "Invalid circuit: {reason}"},
    {"parse_warning", Severity::info, "Ignored netlist line {line:%.0f}: {snippet} ({reason})"},
    // stage 2: simulation and operating point
    {"simulation_error", Severity::fail, "Simulation failed: {reason}"},
    {"nonconvergence", Severity::fail, "Simulation did not converge. Simulator output:\n{log}"},
    {"engine_floating_node", Severity::fail,
     "Floating node {node}: the simulator reports a singular matrix at this node"},
    {"cutoff", Severity::fail, "{device}: Vgs <= Vth (cutoff)"},
    {"cutoff_pmos", Severity::fail, "{device}: Vsg <= |Vth| (cutoff)"},
    // stage 3: DC sweep
    {"low_gain", Severity::fail, "Gain is less than 1e-5"},
    // stage 4: function
    {"missing_analysis", Severity::fail, "Analysis {analysis} produced no data"},
    {"amp_low_gain", Severity::fail,
     "The gain is {gain:%.4f} V/V ({gain_db:%.2f} dB), below the required {min_gain:%g} V/V"},
    {"osc_period", Severity::info, "Average oscillation period: {period:%.6f} s"},
    {"osc_amplitude", Severity::info, "Maximum amplitude: {amplitude:%.6f} V"},
    {"osc_amplitude_small", Severity::fail, "The oscillation amplitude is too small."},
    {"osc_not_sustained", Severity::fail,
     "The oscillation is not sustained: the amplitude falls from {early:%.6f} V to {late:%.6f} V"},
    {"osc_no_period", Severity::fail, "No periodic oscillation detected at {signal}"},
    {"filter_mismatch", Severity::fail,
     "The frequency response does not match a {kind} filter: passband gain {pass_db:%.2f} dB, stopband gain "
     "{stop_db:%.2f} dB (at least {min_db:%g} dB attenuation required)"},
    {"comparator_swing", Severity::fail,
     "The output does not swing rail to rail: Vout spans {vmin:%.4f} V to {vmax:%.4f} V"},
    {"inverter_not_inverting", Severity::fail,
     "The output does not invert: Vout is {v_in_low:%.4f} V at Vin = 0 V and {v_in_high:%.4f} V at Vin = VDD"},
    {"waveform_mismatch", Severity::fail,
     "The output does not follow the ideal {operation} of the input: correlation {corr:%.3f}, required {min_corr:%g}"},
    {"mixer_no_product", Severity::fail,
     "No mixing product at {f_diff:%g} Hz or {f_sum:%g} Hz in the output spectrum"},
    {"mixer_no_tones", Severity::fail, "The mixer needs two sinusoidal inputs (SIN sources); found {count:%.0f}"},
    {"schmitt_no_switch", Severity::fail, "The output does not switch during the DC transfer sweep"},
    {"schmitt_no_hysteresis", Severity::fail,
     "No hysteresis: the rising threshold {up:%.4f} V and falling threshold {down:%.4f} V differ by less than two "
     "sweep steps"},
    {"input_no_effect", Severity::fail, "Input {input} has no effect on the output (dVout/dVin = {slope:%.4f})"},
    {"subtractor_sign", Severity::fail,
     "The output does not subtract: dVout/d{a} = {slope_a:%.4f} and dVout/d{b} = {slope_b:%.4f} have the same sign"},
    {"mirror_no_current", Severity::fail, "The output current is {current:%g} A, below {min:%g} A"},
    // stage 5: waveform
    {"render_failed", Severity::info, "Waveform rendering failed: {reason}"},
};

std::string format_number_slot(const std::string& spec, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec.empty() ? "%g" : spec.c_str(), value);
  return buf;
}

}  // namespace

std::string_view to_string(CheckStage stage) {
  switch (stage) {
    case CheckStage::requirement: return "requirement";
    case CheckStage::op_point: return "op_point";
    case CheckStage::dc_sweep: return "dc_sweep";
    case CheckStage::function: return "function";
    case CheckStage::waveform: return "waveform";
  }
  return "requirement";
}

std::string_view to_string(AnalysisId id) {
  switch (id) {
    case AnalysisId::op: return "op";
    case AnalysisId::dc_sweep: return "dc_sweep";
    case AnalysisId::ac: return "ac";
    case AnalysisId::transient: return "transient";
    case AnalysisId::fft: return "fft";
    case AnalysisId::dc_transfer: return "dc_transfer";
  }
  return "op";
}

const std::map<std::string_view, DiagnosticTemplate>& diagnostic_templates() {
  static const std::map<std::string_view, DiagnosticTemplate> table = [] {
    std::map<std::string_view, DiagnosticTemplate> m;
    for (const auto& t : kTemplates) m.emplace(t.id, t);
    return m;
  }();
  return table;
}

std::string render_template(std::string_view template_id, const DiagnosticData& data) {
  auto it = diagnostic_templates().find(template_id);
  if (it == diagnostic_templates().end()) {
    throw PreconditionError("unknown diagnostic template: " + std::string(template_id));
  }
  std::string_view text = it->second.text;
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') {
      out.push_back(text[i]);
      continue;
    }
    auto close = text.find('}', i);
    if (close == std::string_view::npos) throw PreconditionError("unterminated slot in template");
    std::string slot(text.substr(i + 1, close - i - 1));
    std::string spec;
    if (auto colon = slot.find(':'); colon != std::string::npos) {
      spec = slot.substr(colon + 1);
      slot.resize(colon);
    }
    auto value = data.find(slot);
    if (value == data.end()) {
      throw PreconditionError("template " + std::string(template_id) + " needs value '" + slot + "'");
    }
    if (const auto* s = std::get_if<std::string>(&value->second)) {
      out += *s;
    } else {
      out += format_number_slot(spec, std::get<double>(value->second));
    }
    i = close;
  }
  return out;
}

Diagnostic Diagnostic::make(CheckStage stage, std::string_view template_id, DiagnosticData data) {
  Diagnostic d;
  d.stage = stage;
  d.template_id = std::string(template_id);
  d.message = render_template(template_id, data);
  d.severity = diagnostic_templates().at(template_id).severity;
  d.data = std::move(data);
  return d;
}

bool StageOutcome::failed() const {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::fail) return true;
  }
  return false;
}

bool CheckReport::has_template(std::string_view template_id) const {
  for (const auto& d : diagnostics) {
    if (d.template_id == template_id) return true;
  }
  return false;
}

std::string CheckReport::diagnostic_text() const {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += "\n\n";
    out += d.message;
  }
  return out;
}

double CircuitTypeProfile::threshold(const std::string& key) const {
  auto it = thresholds.find(key);
  if (it == thresholds.end()) throw PreconditionError("profile has no threshold " + key);
  return it->second;
}

const CircuitTypeProfile& profile_for(CircuitType type) {
  using A = AnalysisId;
  static const std::map<CircuitType, CircuitTypeProfile> profiles = [] {
    std::map<CircuitType, CircuitTypeProfile> m;
    auto add = [&](CircuitType t, std::set<A> analyses, bool cutoff, bool sweep, std::map<std::string, double> th) {
      m.emplace(t, CircuitTypeProfile{t, std::move(analyses), cutoff, sweep, std::move(th)});
    };
    // Rows of the waveform-type table.
    add(CircuitType::mixer, {A::transient, A::fft}, false, false, {{"min_snr", 10.0}, {"min_product", 1e-6}});
    add(CircuitType::comparator, {A::dc_sweep}, false, true, {{"min_swing_fraction", 0.8}});
    add(CircuitType::filter, {A::ac}, false, false, {{"min_attenuation_db", 20.0}});
    add(CircuitType::oscillator, {A::transient}, false, false, {{"min_amplitude", 0.01}});
    add(CircuitType::integrator, {A::transient}, false, false, {{"min_correlation", 0.9}});
    add(CircuitType::differentiator, {A::transient}, false, false, {{"min_correlation", 0.9}});
    add(CircuitType::schmitt_trigger, {A::transient, A::dc_transfer}, false, true, {{"min_hysteresis_steps", 2.0}});
    // Types the table does not list.
    add(CircuitType::amplifier, {A::ac}, true, true, {{"min_gain", 1.0}});
    add(CircuitType::opamp, {A::ac}, true, true, {{"min_gain", 10.0}});
    add(CircuitType::inverter, {A::dc_sweep}, false, true, {{"min_swing_fraction", 0.5}});
    add(CircuitType::current_mirror, {A::op}, true, false, {{"min_current", 1e-6}});
    add(CircuitType::adder, {A::dc_sweep}, false, true, {{"min_slope", 0.1}});
    add(CircuitType::subtractor, {A::dc_sweep}, false, true, {{"min_slope", 0.1}});
    return m;
  }();
  return profiles.at(type);
}

}  // namespace anaforge
