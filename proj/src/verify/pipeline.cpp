#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

Component* find_driving_source_mut(CircuitIR& circuit, std::string_view net) {
  return const_cast<Component*>(find_driving_source(circuit, net));
}

std::string sanitize(std::string_view net) {
  std::string out;
  for (char c : net) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::vector<std::string> task_inputs(const DesignTask& task) {
  std::vector<std::string> inputs;
  if (task.input_node) inputs.push_back(*task.input_node);
  inputs.insert(inputs.end(), task.extra_inputs.begin(), task.extra_inputs.end());
  return inputs;
}

double supply_of(const CircuitIR& tb, const DesignTask& task) {
  return tb.meta.supply ? tb.meta.supply->volts : task.supply_volts;
}

// Frequencies of the SIN sources in the top level, in refdes order.
std::vector<double> sin_tones(const CircuitIR& circuit) {
  std::vector<const Component*> sources;
  for (const auto& c : circuit.components) {
    if (c.kind != ComponentKind::vsource || !c.waveform) continue;
    if (fold_case(*c.waveform).rfind("sin", 0) == 0) sources.push_back(&c);
  }
  std::sort(sources.begin(), sources.end(),
            [](const Component* a, const Component* b) { return fold_case(a->refdes) < fold_case(b->refdes); });
  std::vector<double> tones;
  for (const auto* c : sources) {
    std::string w = *c->waveform;
    auto open = w.find('('), close = w.rfind(')');
    std::string args = w.substr(open == std::string::npos ? 3 : open + 1,
                                close == std::string::npos ? std::string::npos : close - open - 1);
    std::replace(args.begin(), args.end(), ',', ' ');
    std::istringstream in(args);
    std::string tok;
    std::vector<double> values;
    while (in >> tok) {
      if (auto v = parse_spice_number(tok)) values.push_back(*v);
    }
    if (values.size() >= 3 && values[2] > 0) tones.push_back(values[2]);
  }
  return tones;
}

double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double d = n * sxx - sx * sx;
  return d != 0 ? (n * sxy - sx * sy) / d : 0.0;
}

bool has_initial_conditions(const CircuitIR& circuit) {
  for (const auto& c : flatten(circuit).components) {
    if (c.initial_condition) return true;
  }
  return false;
}

fs::path subdir(const PipelineOptions& options, const char* name) {
  return options.workdir.empty() ? fs::path{} : options.workdir / name;
}

struct Runner {
  const Simulator& sim;
  const PipelineOptions& options;
  CheckReport& report;

  // Runs `body`; engine failures become a diagnostic of `stage`. Returns
  // false when the body failed.
  template <typename F>
  bool guarded(CheckStage stage, const std::string& analysis, F&& body) {
    try {
      body();
      return true;
    } catch (const NonConvergence& e) {
      report.diagnostics.push_back(Diagnostic::make(stage, "nonconvergence", {{"log", std::string(e.what())}}));
    } catch (const MissingAnalysis& e) {
      report.diagnostics.push_back(Diagnostic::make(stage, "missing_analysis", {{"analysis", analysis}}));
    } catch (const Error& e) {
      report.diagnostics.push_back(Diagnostic::make(stage, "simulation_error", {{"reason", std::string(e.what())}}));
    }
    return false;
  }
};

void absorb(CheckReport& report, StageOutcome outcome) {
  for (auto& d : outcome.diagnostics) report.diagnostics.push_back(std::move(d));
  for (auto& [k, v] : outcome.measurements) report.measurements[k] = v;
}

bool stage_failed(const CheckReport& report, CheckStage stage) {
  return std::any_of(report.diagnostics.begin(), report.diagnostics.end(),
                     [&](const Diagnostic& d) { return d.stage == stage && d.severity == Severity::fail; });
}

std::string format_pulse(double v1, double v2, double td, double tr, double tf, double pw, double per) {
  return "PULSE(" + format_number(v1) + " " + format_number(v2) + " " + format_number(td) + " " + format_number(tr) +
         " " + format_number(tf) + " " + format_number(pw) + " " + format_number(per) + ")";
}

void render_images(CheckReport& report, const std::map<std::string, WaveformSeries>& series, const NodeRoles& roles,
                   const std::string& type_name) {
  for (const auto& [id, s] : series) {
    RenderOptions ro;
    std::vector<std::string> signals;
    if (id == "dc_transfer") {
      signals = {"up", "down"};
    } else {
      signals.push_back(roles.output);
      if (roles.input && id != "fft" && id != "ac") signals.push_back(*roles.input);
    }
    if (id == "ac") {
      ro.log_x = true;
      ro.decibels = true;
    }
    try {
      report.waveform_images.push_back({id, render_waveform(s, signals, type_name + " - " + id, ro)});
    } catch (const Error& e) {
      report.diagnostics.push_back(
          Diagnostic::make(CheckStage::waveform, "render_failed", {{"reason", id + ": " + e.what()}}));
    }
  }
}

}  // namespace

const Component* find_driving_source(const CircuitIR& circuit, std::string_view net) {
  for (const auto& c : circuit.components) {
    if (c.kind != ComponentKind::vsource || c.terminals.size() < 2) continue;
    if (iequals(c.terminals[0], net) && is_ground(c.terminals[1])) return &c;
  }
  return nullptr;
}

CircuitIR prepare_testbench(const CircuitIR& circuit, const DesignTask& task) {
  CircuitIR tb = circuit;
  tb.meta.circuit_type = task.circuit_type;
  tb.meta.output = task.output_node;
  tb.meta.input = task.input_node;
  if (!tb.meta.supply) {
    // adopt a net called Vdd if the design uses one
    for (const auto& net : collect_nets(flatten(circuit))) {
      if (net == "vdd") tb.meta.supply = NetVoltage{"Vdd", task.supply_volts};
    }
  }
  const double vdd = supply_of(tb, task);
  if (tb.meta.supply && !find_driving_source(tb, tb.meta.supply->net)) {
    Component s;
    s.refdes = "Vtb_supply";
    s.kind = ComponentKind::vsource;
    s.terminals = {tb.meta.supply->net, "0"};
    s.params["dc"] = tb.meta.supply->volts;
    tb.components.push_back(std::move(s));
  }
  if (tb.meta.reference && !find_driving_source(tb, tb.meta.reference->net)) {
    Component s;
    s.refdes = "Vtb_" + sanitize(tb.meta.reference->net);
    s.kind = ComponentKind::vsource;
    s.terminals = {tb.meta.reference->net, "0"};
    s.params["dc"] = tb.meta.reference->volts;
    tb.components.push_back(std::move(s));
  }
  for (const auto& net : task_inputs(task)) {
    if (find_driving_source(tb, net)) continue;
    Component s;
    s.refdes = "Vtb_" + sanitize(net);
    s.kind = ComponentKind::vsource;
    s.terminals = {net, "0"};
    s.params["dc"] = vdd / 2.0;
    tb.components.push_back(std::move(s));
  }
  return tb;
}

CheckReport run_pipeline(const CircuitIR& circuit, const DesignTask& task, const Simulator& simulator,
                         const PipelineOptions& options) {
  CheckReport report;
  const CircuitTypeProfile& profile = profile_for(task.circuit_type);
  const std::string type_name(to_string(task.circuit_type));
  Runner runner{simulator, options, report};
  std::map<std::string, WaveformSeries> plotted;

  auto finish = [&](std::optional<CheckStage> failed, const NodeRoles& roles) {
    report.failed_stage = failed;
    report.verdict = failed ? Verdict::fail : Verdict::pass;
    if (options.render_images && !plotted.empty()) render_images(report, plotted, roles, type_name);
    return report;
  };

  // Stage 1: requirements.
  report.stages_run.push_back(CheckStage::requirement);
  for (auto& d : check_requirements(circuit, task)) report.diagnostics.push_back(std::move(d));
  if (!stage_failed(report, CheckStage::requirement)) {
    if (auto problems = invariant_violations(circuit); !problems.empty()) {
      std::string joined;
      for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
      report.diagnostics.push_back(Diagnostic::make(CheckStage::requirement, "invalid_circuit", {{"reason", joined}}));
    }
  }
  if (stage_failed(report, CheckStage::requirement)) return finish(CheckStage::requirement, circuit.meta);

  CircuitIR tb = prepare_testbench(circuit, task);
  const NodeRoles& roles = tb.meta;
  const double vdd = supply_of(tb, task);

  // Stage 2: operating point.
  report.stages_run.push_back(CheckStage::op_point);
  SimulationResult op;
  bool op_ok = runner.guarded(CheckStage::op_point, "op", [&] {
    std::vector<AnalysisRequest> a{AnalysisRequest::op()};
    op = simulator.simulate(tb, a, subdir(options, "op"));
  });
  if (op_ok) {
    for (auto& d : check_op_point(op, profile.check_cutoff)) report.diagnostics.push_back(std::move(d));
    if (roles.supply) {
      if (const Component* s = find_driving_source(tb, roles.supply->net); s && op.find_series("op")) {
        if (const auto* i = op.find_series("op")->find("i(" + fold_case(s->refdes) + ")")) {
          report.measurements["power_w"] = std::abs(roles.supply->volts * i->front());
        }
      }
    }
    if (auto it = op.op_point.find(fold_case(roles.output)); it != op.op_point.end()) {
      report.measurements["vout_op"] = it->second;
    }
  }
  if (stage_failed(report, CheckStage::op_point)) return finish(CheckStage::op_point, roles);

  FunctionInputs fin;
  fin.task = &task;
  fin.roles = roles;

  // Stage 3: DC sweep of the input.
  const Component* input_src = roles.input ? find_driving_source(tb, *roles.input) : nullptr;
  std::optional<double> best_bias;
  // Types without a sweep pass the stage trivially so the executed stages
  // always form a prefix of the stage order.
  report.stages_run.push_back(CheckStage::dc_sweep);
  if (profile.dc_sweep_stage && input_src) {
    runner.guarded(CheckStage::dc_sweep, "dc_sweep", [&] {
      WaveformSeries dc =
          simulator.dc_sweep(tb, input_src->refdes, 0.0, vdd, options.dc_sweep_points, subdir(options, "dc"));
      StageOutcome outcome = check_dc_sweep(dc, roles);
      if (auto it = outcome.measurements.find("best_bias"); it != outcome.measurements.end()) best_bias = it->second;
      absorb(report, std::move(outcome));
      plotted["dc"] = dc;
      fin.series["dc"] = std::move(dc);
    });
    if (stage_failed(report, CheckStage::dc_sweep)) return finish(CheckStage::dc_sweep, roles);
    const bool linear = task.circuit_type == CircuitType::amplifier || task.circuit_type == CircuitType::opamp;
    if (linear && best_bias) {
      // High-gain stages leave the linear region within one coarse step, so
      // the bias is zoomed in around the coarse candidate.
      double step = vdd / (options.dc_sweep_points - 1);
      for (int level = 0; level < 3; ++level) {
        double lo = std::max(0.0, *best_bias - step), hi = std::min(vdd, *best_bias + step);
        bool ok = runner.guarded(CheckStage::dc_sweep, "dc_sweep", [&] {
          WaveformSeries fine = simulator.dc_sweep(tb, input_src->refdes, lo, hi, 41, subdir(options, "dc_fine"));
          StageOutcome o = check_dc_sweep(fine, roles);
          best_bias = o.measurements.at("best_bias");
          report.measurements["best_bias_vout"] = o.measurements.at("best_bias_vout");
        });
        if (!ok) return finish(CheckStage::dc_sweep, roles);
        if (std::abs(report.measurements["best_bias_vout"] - vdd / 2) < 0.01 * vdd) break;
        step = (hi - lo) / 40;
      }
      report.measurements["best_bias"] = *best_bias;
    }
  }

  // Stage 4: function.
  report.stages_run.push_back(CheckStage::function);
  auto input_bias = [&]() {
    if (auto it = op.op_point.find(fold_case(*roles.input)); it != op.op_point.end()) return it->second;
    return input_src ? input_src->param_or("dc", vdd / 2) : vdd / 2;
  };
  bool ran = runner.guarded(CheckStage::function, type_name, [&] {
    switch (task.circuit_type) {
      case CircuitType::amplifier:
      case CircuitType::opamp:
      case CircuitType::filter: {
        if (!input_src) throw MissingAnalysis("no input source");
        CircuitIR ac_tb = tb;
        Component* src = find_driving_source_mut(ac_tb, *roles.input);
        if (best_bias && task.circuit_type != CircuitType::filter) src->params["dc"] = *best_bias;
        src->params["ac"] = 1.0;
        std::vector<AnalysisRequest> a{
            AnalysisRequest::ac(options.ac_points_per_decade, options.ac_fstart, options.ac_fstop)};
        SimulationResult r = simulator.simulate(ac_tb, a, subdir(options, "ac"));
        if (const auto* s = r.find_series("ac")) fin.series["ac"] = *s;
        if (best_bias) report.measurements["ac_bias"] = *best_bias;
        break;
      }
      case CircuitType::oscillator: {
        std::vector<AnalysisRequest> a{
            AnalysisRequest::tran(options.tran_step, options.tran_stop, has_initial_conditions(tb))};
        SimulationResult r = simulator.simulate(tb, a, subdir(options, "tran"));
        if (const auto* s = r.find_series("tran")) fin.series["tran"] = *s;
        break;
      }
      case CircuitType::integrator:
      case CircuitType::differentiator: {
        if (!input_src) throw MissingAnalysis("no input source");
        const double bias = input_bias(), amp = options.stimulus_amplitude;
        const double period = 1.0 / options.stimulus_freq;
        CircuitIR tr_tb = tb;
        Component* src = find_driving_source_mut(tr_tb, *roles.input);
        src->params["dc"] = bias;
        if (task.circuit_type == CircuitType::integrator) {
          const double edge = period / 1000;
          src->waveform = format_pulse(bias - amp, bias + amp, 0, edge, edge, period / 2 - edge, period);
        } else {
          const double pw = period * 1e-6, ramp = (period - pw) / 2;
          src->waveform = format_pulse(bias - amp, bias + amp, 0, ramp, ramp, pw, period);
        }
        std::vector<AnalysisRequest> a{AnalysisRequest::tran(period / 200, 10 * period)};
        SimulationResult r = simulator.simulate(tr_tb, a, subdir(options, "tran"));
        if (const auto* s = r.find_series("tran")) {
          fin.series["tran"] = *s;
          if (const auto* v = s->find(*roles.input)) fin.stimulus = *v;
        }
        break;
      }
      case CircuitType::mixer: {
        // inputs without a SIN drive get the default test tones
        CircuitIR mix_tb = tb;
        const double default_tones[] = {options.mixer_tones[0], options.mixer_tones[1]};
        std::size_t k = 0;
        for (const auto& net : task_inputs(task)) {
          Component* src = find_driving_source_mut(mix_tb, net);
          const double tone = default_tones[std::min<std::size_t>(k++, 1)];
          if (!src || (src->waveform && fold_case(*src->waveform).rfind("sin", 0) == 0)) continue;
          double bias = src->param_or("dc", vdd / 2);
          if (auto it = op.op_point.find(fold_case(net)); it != op.op_point.end()) bias = it->second;
          src->waveform = "SIN(" + format_number(bias) + " " + format_number(options.stimulus_amplitude) + " " +
                          format_number(tone) + ")";
        }
        fin.tones = sin_tones(mix_tb);
        if (fin.tones.size() < 2) break;
        const double f1 = fin.tones[0], f2 = fin.tones[1];
        const double f_max = std::max(f1, f2) + std::min(f1, f2), f_diff = std::abs(f1 - f2);
        const double step = 1.0 / (200.0 * f_max);
        double stop = f_diff > 0 ? 10.0 / f_diff : 10.0 / std::min(f1, f2);
        stop = std::min(stop, step * 100000);  // bound the raw file size
        std::vector<AnalysisRequest> a{AnalysisRequest::tran(step, stop)};
        SimulationResult r = simulator.simulate(mix_tb, a, subdir(options, "tran"));
        if (const auto* s = r.find_series("tran")) {
          fin.series["tran"] = *s;
          auto samples = static_cast<std::size_t>(std::lround(stop / step)) + 1;
          fin.series["fft"] = compute_fft(*s, roles.output, samples);
        }
        break;
      }
      case CircuitType::schmitt_trigger: {
        if (!input_src) throw MissingAnalysis("no input source");
        const double step = vdd / 200;
        fin.sweep_step = step;
        std::vector<AnalysisRequest> a{AnalysisRequest{DcTransferAnalysis{input_src->refdes, 0.0, vdd, step}}};
        SimulationResult r = simulator.simulate(tb, a, subdir(options, "dc_transfer"));
        // engines differ in plot order, so the sweeps are told apart by direction
        const auto* up = r.find_series("dc");
        const auto* down = r.find_series("dc2");
        if (up && down && up->descending && !down->descending) std::swap(up, down);
        if (up && down) {
          fin.series["dc_up"] = *up;
          fin.series["dc_down"] = *down;
          WaveformSeries both;
          both.axis_kind = AxisKind::voltage;
          both.axis_name = fold_case(input_src->refdes);
          both.axis = up->axis;
          both.signals["up"] = up->at(roles.output);
          for (double x : up->axis) both.signals["down"].push_back(interpolate(down->axis, down->at(roles.output), x));
          plotted["dc_transfer"] = std::move(both);
        }
        // transient view with a full-swing sine
        CircuitIR tr_tb = tb;
        Component* src = find_driving_source_mut(tr_tb, *roles.input);
        src->waveform = "SIN(" + format_number(vdd / 2) + " " + format_number(vdd / 2) + " " +
                        format_number(options.stimulus_freq) + ")";
        const double period = 1.0 / options.stimulus_freq;
        std::vector<AnalysisRequest> t{AnalysisRequest::tran(period / 400, 5 * period)};
        SimulationResult rt = simulator.simulate(tr_tb, t, subdir(options, "tran"));
        if (const auto* s = rt.find_series("tran")) fin.series["tran"] = *s;
        break;
      }
      case CircuitType::adder:
      case CircuitType::subtractor: {
        for (const auto& net : task_inputs(task)) {
          const Component* src = find_driving_source(tb, net);
          if (!src) continue;
          double bias = src->param_or("dc", vdd / 2);
          if (auto it = op.op_point.find(fold_case(net)); it != op.op_point.end()) bias = it->second;
          WaveformSeries s = simulator.dc_sweep(tb, src->refdes, bias - 0.1, bias + 0.1, 11,
                                                subdir(options, ("slope_" + sanitize(net)).c_str()));
          fin.input_slopes[net] = regression_slope(s.axis, s.at(roles.output));
        }
        break;
      }
      case CircuitType::current_mirror: {
        double total = 0;
        for (const auto& c : flatten(tb).components) {
          if (c.kind != ComponentKind::mosfet || !iequals(c.terminals[0], roles.output)) continue;
          if (auto it = op.devices.find(fold_case(c.refdes)); it != op.devices.end()) total += std::abs(it->second.id);
        }
        fin.output_current = total;
        break;
      }
      case CircuitType::comparator:
      case CircuitType::inverter:
        if (!fin.series.count("dc") && input_src) {
          fin.series["dc"] =
              simulator.dc_sweep(tb, input_src->refdes, 0.0, vdd, options.dc_sweep_points, subdir(options, "dc"));
          plotted["dc"] = fin.series["dc"];
        }
        break;
    }
    for (const char* id : {"ac", "tran", "fft"}) {
      if (auto it = fin.series.find(id); it != fin.series.end()) plotted[id] = it->second;
    }
    absorb(report, check_function(fin, profile));
  });
  (void)ran;
  if (stage_failed(report, CheckStage::function)) return finish(CheckStage::function, roles);

  // Stage 5: waveform images (attached in finish).
  report.stages_run.push_back(CheckStage::waveform);
  return finish(std::nullopt, roles);
}

json to_json(const CheckReport& report) {
  json j;
  j["verdict"] = report.verdict == Verdict::pass ? "pass" : "fail";
  j["stages_run"] = json::array();
  for (auto s : report.stages_run) j["stages_run"].push_back(std::string(to_string(s)));
  j["failed_stage"] = report.failed_stage ? json(std::string(to_string(*report.failed_stage))) : json(nullptr);
  j["diagnostics"] = json::array();
  for (const auto& d : report.diagnostics) {
    json data = json::object();
    for (const auto& [k, v] : d.data) {
      if (const auto* s = std::get_if<std::string>(&v)) data[k] = *s;
      else data[k] = std::get<double>(v);
    }
    j["diagnostics"].push_back({{"stage", std::string(to_string(d.stage))},
                                {"template", d.template_id},
                                {"severity", d.severity == Severity::fail ? "fail" : "info"},
                                {"message", d.message},
                                {"data", data}});
  }
  j["measurements"] = report.measurements;
  j["waveform_images"] = json::array();
  for (const auto& img : report.waveform_images) j["waveform_images"].push_back(img.analysis + ".png");
  return j;
}

void write_report(const CheckReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "report.json", std::ios::trunc);
    out << to_json(report).dump(2) << "\n";
    if (!out) throw Error("cannot write " + (dir / "report.json").string());
  }
  for (const auto& img : report.waveform_images) {
    std::ofstream out(dir / (img.analysis + ".png"), std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(img.png.data()), static_cast<std::streamsize>(img.png.size()));
    if (!out) throw Error("cannot write image " + img.analysis);
  }
}

}  // namespace anaforge
