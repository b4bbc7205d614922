#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <set>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

namespace {

constexpr double kStartupDiscard = 0.2;

bool net_present(const CircuitIR& flat, const std::string& net) {
  if (is_ground(net)) return true;
  for (const auto& c : flat.components) {
    for (const auto& t : c.terminals) {
      if (iequals(t, net)) return true;
    }
  }
  return false;
}

std::size_t count_kind(const CircuitIR& flat, ComponentKind kind) {
  return static_cast<std::size_t>(std::count_if(flat.components.begin(), flat.components.end(),
                                                [&](const Component& c) { return c.kind == kind; }));
}

double supply_volts(const NodeRoles& roles, const std::vector<double>& fallback_axis) {
  if (roles.supply) return roles.supply->volts;
  return fallback_axis.empty() ? 0.0 : fallback_axis.back();
}

std::string output_key(const NodeRoles& roles, std::string_view output) {
  return std::string(output.empty() ? std::string_view(roles.output) : output);
}

// Uniform resampling of a signal over [t0, t1].
std::vector<double> resample(const std::vector<double>& axis, const std::vector<double>& values, double t0, double t1,
                             std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = n == 1 ? t0 : t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = interpolate(axis, values, t);
  }
  return out;
}

double half_peak_to_peak(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (begin >= end) return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin() + static_cast<long>(begin), v.begin() + static_cast<long>(end));
  return (*hi - *lo) / 2.0;
}

// Removes the least-squares line from `v` (sample index as abscissa).
std::vector<double> detrend(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return v;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    double x = static_cast<double>(i);
    sx += x;
    sy += v[i];
    sxx += x * x;
    sxy += x * v[i];
  }
  double denom = n * sxx - sx * sx;
  double slope = denom != 0 ? (n * sxy - sx * sy) / denom : 0.0;
  double icpt = (sy - slope * sx) / n;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - (icpt + slope * static_cast<double>(i));
  return out;
}

double magnitude_db(double v) { return 20.0 * std::log10(std::max(std::abs(v), 1e-300)); }

// Frequency where `gain` first falls `drop_db` below its value at index `ref`,
// searching upward (direction +1) or downward (-1); log-linear interpolation.
std::optional<double> crossing_frequency(const std::vector<double>& f, const std::vector<double>& gain_db,
                                         std::size_t ref, double drop_db, int direction) {
  const double target = gain_db[ref] - drop_db;
  for (long i = static_cast<long>(ref) + direction; i >= 0 && i < static_cast<long>(f.size()); i += direction) {
    std::size_t a = static_cast<std::size_t>(i - direction), b = static_cast<std::size_t>(i);
    if (gain_db[b] <= target) {
      double span = gain_db[a] - gain_db[b];
      double frac = span != 0 ? (gain_db[a] - target) / span : 0.0;
      return std::exp(std::log(f[a]) + frac * (std::log(f[b]) - std::log(f[a])));
    }
  }
  return std::nullopt;
}

const WaveformSeries& need(const FunctionInputs& in, const std::string& id) {
  auto it = in.series.find(id);
  if (it == in.series.end() || it->second.axis.empty()) throw MissingAnalysis("analysis " + id + " produced no data");
  return it->second;
}

std::vector<double> transfer(const WaveformSeries& s, const NodeRoles& roles) {
  const auto& out = s.at(roles.output);
  std::vector<double> h(out);
  if (roles.input) {
    if (const auto* in = s.find(*roles.input)) {
      for (std::size_t i = 0; i < h.size(); ++i) h[i] = (*in)[i] != 0 ? out[i] / (*in)[i] : out[i];
    }
  }
  return h;
}

void check_amplifier(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  const WaveformSeries& ac = need(in, "ac");
  std::vector<double> h = transfer(ac, in.roles);
  std::vector<double> db(h.size());
  std::transform(h.begin(), h.end(), db.begin(), magnitude_db);
  const double gain = h.front();
  out.measurements["gain"] = gain;
  out.measurements["gain_db"] = db.front();
  if (auto bw = crossing_frequency(ac.axis, db, 0, 3.0, +1)) {
    out.measurements["bandwidth_hz"] = *bw;
    out.measurements["gbw_hz"] = gain * *bw;
  }
  const double min_gain = profile.threshold("min_gain");
  if (!(gain >= min_gain)) {
    out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "amp_low_gain",
                                               {{"gain", gain}, {"gain_db", db.front()}, {"min_gain", min_gain}}));
  }
}

void check_filter(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  const WaveformSeries& ac = need(in, "ac");
  std::vector<double> h = transfer(ac, in.roles);
  std::vector<double> db(h.size());
  std::transform(h.begin(), h.end(), db.begin(), magnitude_db);
  const FilterKind kind =
      in.task ? filter_kind_from_description(in.task->description) : FilterKind::low_pass;
  const double min_db = profile.threshold("min_attenuation_db");
  const std::size_t last = db.size() - 1;
  auto peak = static_cast<std::size_t>(std::max_element(db.begin(), db.end()) - db.begin());
  auto dip = static_cast<std::size_t>(std::min_element(db.begin(), db.end()) - db.begin());
  double pass_db = 0, stop_db = 0;
  bool ok = false;
  switch (kind) {
    case FilterKind::low_pass:
      pass_db = db.front();
      stop_db = db.back();
      ok = pass_db - stop_db >= min_db;
      if (auto fc = crossing_frequency(ac.axis, db, 0, 3.0, +1)) out.measurements["cutoff_hz"] = *fc;
      break;
    case FilterKind::high_pass:
      pass_db = db.back();
      stop_db = db.front();
      ok = pass_db - stop_db >= min_db;
      if (auto fc = crossing_frequency(ac.axis, db, last, 3.0, -1)) out.measurements["cutoff_hz"] = *fc;
      break;
    case FilterKind::band_pass:
      pass_db = db[peak];
      stop_db = std::max(db.front(), db.back());
      ok = peak > 0 && peak < last && pass_db - stop_db >= min_db;
      out.measurements["center_hz"] = ac.axis[peak];
      if (auto lo = crossing_frequency(ac.axis, db, peak, 3.0, -1)) out.measurements["lower_cutoff_hz"] = *lo;
      if (auto hi = crossing_frequency(ac.axis, db, peak, 3.0, +1)) out.measurements["upper_cutoff_hz"] = *hi;
      break;
    case FilterKind::band_stop:
      pass_db = std::min(db.front(), db.back());
      stop_db = db[dip];
      ok = dip > 0 && dip < last && pass_db - stop_db >= min_db;
      out.measurements["notch_hz"] = ac.axis[dip];
      break;
  }
  out.measurements["passband_db"] = pass_db;
  out.measurements["stopband_db"] = stop_db;
  if (!ok) {
    out.diagnostics.push_back(Diagnostic::make(
        CheckStage::function, "filter_mismatch",
        {{"kind", std::string(to_string(kind))}, {"pass_db", pass_db}, {"stop_db", stop_db}, {"min_db", min_db}}));
  }
}

void check_oscillator(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  const WaveformSeries& tran = need(in, "tran");
  OscillationMetrics m = measure_oscillation(tran, in.roles.output);
  out.measurements["period_s"] = m.period;
  out.measurements["amplitude_v"] = m.amplitude;
  out.measurements["cycles"] = m.cycles;
  if (m.period > 0) out.measurements["frequency_hz"] = 1.0 / m.period;
  std::optional<Diagnostic> verdict;
  const double min_amp = profile.threshold("min_amplitude");
  if (m.amplitude < min_amp) {
    verdict = Diagnostic::make(CheckStage::function, "osc_amplitude_small");
  } else if (m.cycles < 2) {
    verdict = Diagnostic::make(CheckStage::function, "osc_no_period", {{"signal", in.roles.output}});
  } else if (!m.sustained) {
    // amplitudes of the second and last quarters
    const auto& v = tran.at(in.roles.output);
    std::vector<double> u = resample(tran.axis, v, tran.axis.front(), tran.axis.back(), 4000);
    verdict = Diagnostic::make(CheckStage::function, "osc_not_sustained",
                               {{"early", half_peak_to_peak(u, 1000, 2000)}, {"late", half_peak_to_peak(u, 3000, 4000)}});
  }
  if (verdict) {
    out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "osc_period", {{"period", m.period}}));
    out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "osc_amplitude", {{"amplitude", m.amplitude}}));
    out.diagnostics.push_back(std::move(*verdict));
  }
}

void check_shape(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out, bool integrate) {
  const WaveformSeries& tran = need(in, "tran");
  if (in.stimulus.size() != tran.axis.size()) throw MissingAnalysis("stimulus samples do not match the transient");
  const auto& t = tran.axis;
  // ideal operator applied to the (mean-removed) stimulus
  std::vector<double> ideal(t.size(), 0.0);
  const double mean = std::accumulate(in.stimulus.begin(), in.stimulus.end(), 0.0) / static_cast<double>(t.size());
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double dt = t[i] - t[i - 1];
    if (integrate) {
      ideal[i] = ideal[i - 1] + 0.5 * dt * ((in.stimulus[i] - mean) + (in.stimulus[i - 1] - mean));
    } else {
      ideal[i] = dt > 0 ? (in.stimulus[i] - in.stimulus[i - 1]) / dt : ideal[i - 1];
    }
  }
  if (!integrate && t.size() > 1) ideal[0] = ideal[1];
  // compare after start-up on a uniform grid
  const double t0 = t.front() + kStartupDiscard * (t.back() - t.front());
  const std::size_t n = 2000;
  auto a = detrend(resample(t, tran.at(in.roles.output), t0, t.back(), n));
  auto b = detrend(resample(t, ideal, t0, t.back(), n));
  // inverting stages produce the negated operator, so the sign is ignored
  const double corr = std::abs(correlation(a, b));
  out.measurements["correlation"] = corr;
  const double min_corr = profile.threshold("min_correlation");
  if (!(corr >= min_corr)) {
    out.diagnostics.push_back(Diagnostic::make(
        CheckStage::function, "waveform_mismatch",
        {{"operation", std::string(integrate ? "integral" : "derivative")}, {"corr", corr}, {"min_corr", min_corr}}));
  }
}

void check_swing(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out, bool inverter) {
  const WaveformSeries& dc = need(in, "dc");
  const auto& v = dc.at(in.roles.output);
  const double vdd = supply_volts(in.roles, dc.axis);
  const double fraction = profile.threshold("min_swing_fraction");
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  out.measurements["vout_min"] = *lo;
  out.measurements["vout_max"] = *hi;
  if (inverter) {
    out.measurements["vout_at_low_input"] = v.front();
    out.measurements["vout_at_high_input"] = v.back();
    if (!(v.front() - v.back() >= fraction * vdd)) {
      out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "inverter_not_inverting",
                                                 {{"v_in_low", v.front()}, {"v_in_high", v.back()}}));
    }
    return;
  }
  if (!(*hi - *lo >= fraction * vdd)) {
    out.diagnostics.push_back(
        Diagnostic::make(CheckStage::function, "comparator_swing", {{"vmin", *lo}, {"vmax", *hi}}));
  }
}

void check_mixer(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  const WaveformSeries& fft = need(in, "fft");
  if (in.tones.size() < 2) {
    out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "mixer_no_tones",
                                               {{"count", static_cast<double>(in.tones.size())}}));
    return;
  }
  const double f1 = in.tones[0], f2 = in.tones[1];
  const double f_diff = std::abs(f1 - f2), f_sum = f1 + f2;
  const auto& mag = fft.at(in.roles.output);
  const double bin = fft.axis.size() > 1 ? fft.axis[1] - fft.axis[0] : 1.0;
  auto tone_amplitude = [&](double f) {
    double best = 0;
    for (std::size_t k = 1; k < mag.size(); ++k) {
      if (std::abs(fft.axis[k] - f) <= 2 * bin) best = std::max(best, mag[k]);
    }
    return best;
  };
  std::vector<double> rest(mag.begin() + 1, mag.end());
  std::nth_element(rest.begin(), rest.begin() + static_cast<long>(rest.size() / 2), rest.end());
  const double floor = rest.empty() ? 0.0 : rest[rest.size() / 2];
  const double a_diff = tone_amplitude(f_diff), a_sum = tone_amplitude(f_sum);
  const double product = std::max(a_diff, a_sum);
  out.measurements["if_diff_amplitude"] = a_diff;
  out.measurements["if_sum_amplitude"] = a_sum;
  out.measurements["noise_floor"] = floor;
  if (!(product >= profile.threshold("min_product") && product >= profile.threshold("min_snr") * floor)) {
    out.diagnostics.push_back(
        Diagnostic::make(CheckStage::function, "mixer_no_product", {{"f_diff", f_diff}, {"f_sum", f_sum}}));
  }
}

// First input value where the output crosses `mid` when scanning in the
// given direction.
std::optional<double> threshold_crossing(const WaveformSeries& s, const std::string& output, double mid, bool upward) {
  const auto& v = s.at(output);
  const std::size_t n = v.size();
  for (std::size_t j = 1; j < n; ++j) {
    std::size_t a = upward ? j - 1 : n - j, b = upward ? j : n - j - 1;
    if ((v[a] - mid) * (v[b] - mid) <= 0 && v[a] != v[b]) {
      double frac = (mid - v[a]) / (v[b] - v[a]);
      return s.axis[a] + frac * (s.axis[b] - s.axis[a]);
    }
  }
  return std::nullopt;
}

void check_schmitt(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  const WaveformSeries& up = need(in, "dc_up");
  const WaveformSeries& down = need(in, "dc_down");
  const auto& vu = up.at(in.roles.output);
  const auto& vd = down.at(in.roles.output);
  double lo = std::min(*std::min_element(vu.begin(), vu.end()), *std::min_element(vd.begin(), vd.end()));
  double hi = std::max(*std::max_element(vu.begin(), vu.end()), *std::max_element(vd.begin(), vd.end()));
  const double vdd = supply_volts(in.roles, up.axis);
  const double mid = (lo + hi) / 2;
  auto rising = threshold_crossing(up, in.roles.output, mid, true);
  auto falling = threshold_crossing(down, in.roles.output, mid, false);
  if (hi - lo < 0.5 * vdd || !rising || !falling) {
    out.diagnostics.push_back(Diagnostic::make(CheckStage::function, "schmitt_no_switch"));
    return;
  }
  const double width = std::abs(*rising - *falling);
  const double step = in.sweep_step > 0 ? in.sweep_step : (up.axis.size() > 1 ? up.axis[1] - up.axis[0] : 0.0);
  out.measurements["threshold_rising"] = *rising;
  out.measurements["threshold_falling"] = *falling;
  out.measurements["hysteresis_v"] = width;
  if (!(width >= profile.threshold("min_hysteresis_steps") * step)) {
    out.diagnostics.push_back(
        Diagnostic::make(CheckStage::function, "schmitt_no_hysteresis", {{"up", *rising}, {"down", *falling}}));
  }
}

void check_arithmetic(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out, bool subtract) {
  const double min_slope = profile.threshold("min_slope");
  for (const auto& [net, slope] : in.input_slopes) {
    out.measurements["slope_" + fold_case(net)] = slope;
    if (!(std::abs(slope) >= min_slope)) {
      out.diagnostics.push_back(
          Diagnostic::make(CheckStage::function, "input_no_effect", {{"input", net}, {"slope", slope}}));
    }
  }
  if (in.input_slopes.size() < 2) {
    throw MissingAnalysis("arithmetic check needs slopes for two inputs");
  }
  if (subtract && !out.failed()) {
    auto a = in.input_slopes.begin(), b = std::next(a);
    if (a->second * b->second > 0) {
      out.diagnostics.push_back(Diagnostic::make(
          CheckStage::function, "subtractor_sign",
          {{"a", a->first}, {"b", b->first}, {"slope_a", a->second}, {"slope_b", b->second}}));
    }
  }
}

void check_mirror(const FunctionInputs& in, const CircuitTypeProfile& profile, StageOutcome& out) {
  if (!in.output_current) throw MissingAnalysis("analysis op produced no output current");
  const double current = std::abs(*in.output_current);
  out.measurements["output_current_a"] = current;
  const double min = profile.threshold("min_current");
  if (!(current >= min)) {
    out.diagnostics.push_back(
        Diagnostic::make(CheckStage::function, "mirror_no_current", {{"current", current}, {"min", min}}));
  }
}

}  // namespace

std::vector<Diagnostic> check_requirements(const CircuitIR& circuit, const DesignTask& task) {
  std::vector<Diagnostic> out;
  CircuitIR flat;
  try {
    flat = flatten(circuit);
  } catch (const UnknownSubcircuit&) {
    flat = circuit;  // reported by the connectivity check
  }
  std::vector<std::string> inputs;
  if (task.input_node) inputs.push_back(*task.input_node);
  inputs.insert(inputs.end(), task.extra_inputs.begin(), task.extra_inputs.end());
  for (const auto& net : inputs) {
    if (!net_present(flat, net)) out.push_back(Diagnostic::make(CheckStage::requirement, "missing_node", {{"node", net}}));
  }
  if (!net_present(flat, task.output_node)) {
    out.push_back(Diagnostic::make(CheckStage::requirement, "missing_node", {{"node", task.output_node}}));
  }

  const bool has_mos = count_kind(flat, ComponentKind::mosfet) > 0;
  const std::size_t reactive = count_kind(flat, ComponentKind::capacitor) + count_kind(flat, ComponentKind::inductor);
  const std::string type_name(to_string(task.circuit_type));
  auto need_kind = [&](bool ok, const char* kind) {
    if (!ok) {
      out.push_back(Diagnostic::make(CheckStage::requirement, "missing_component",
                                     {{"kind", std::string(kind)}, {"circuit_type", type_name}}));
    }
  };
  switch (task.circuit_type) {
    case CircuitType::filter:
      need_kind(reactive > 0, "capacitor or inductor");
      break;
    case CircuitType::integrator:
    case CircuitType::differentiator:
      need_kind(has_mos, "MOSFET");
      need_kind(count_kind(flat, ComponentKind::capacitor) > 0, "capacitor");
      break;
    case CircuitType::oscillator:
      need_kind(has_mos, "MOSFET");
      need_kind(reactive > 0, "capacitor or inductor");
      break;
    default:
      need_kind(has_mos, "MOSFET");
      break;
  }
  if (has_mos) {
    const auto& supply = circuit.meta.supply;
    if (!supply || !net_present(flat, supply->net)) {
      out.push_back(Diagnostic::make(CheckStage::requirement, "missing_supply"));
    }
  }

  for (const auto& issue : validate_connectivity(circuit)) {
    switch (issue.kind) {
      case IssueKind::missing_node:
        break;  // task nodes are checked above
      case IssueKind::floating_net:
        out.push_back(Diagnostic::make(CheckStage::requirement, "floating_node", {{"node", issue.subject}}));
        break;
      case IssueKind::no_ground:
        out.push_back(Diagnostic::make(CheckStage::requirement, "no_ground"));
        break;
      case IssueKind::unknown_subcircuit:
        out.push_back(Diagnostic::make(CheckStage::requirement, "unknown_subcircuit", {{"name", issue.subject}}));
        break;
      case IssueKind::port_mismatch: {
        const Component* inst = circuit.find_component(issue.subject);
        const SubcircuitDef* def = inst ? circuit.find_subcircuit(inst->model) : nullptr;
        out.push_back(Diagnostic::make(
            CheckStage::requirement, "port_mismatch",
            {{"refdes", issue.subject},
             {"name", def ? def->name : std::string("?")},
             {"given", static_cast<double>(inst ? inst->terminals.size() : 0)},
             {"ports", static_cast<double>(def ? def->ports.size() : 0)}}));
        break;
      }
    }
  }
  return out;
}

std::vector<Diagnostic> check_op_point(const SimulationResult& sim, bool check_cutoff) {
  std::vector<Diagnostic> out;
  if (!sim.converged || sim.op_point.empty()) {
    // the last lines of the log carry the engine's complaint
    std::vector<std::string> lines;
    std::size_t start = 0;
    const std::string& log = sim.engine_log;
    while (start < log.size()) {
      auto end = log.find('\n', start);
      if (end == std::string::npos) end = log.size();
      std::string line = log.substr(start, end - start);
      std::string folded = fold_case(line);
      if (folded.find("error") != std::string::npos || folded.find("warning") != std::string::npos ||
          folded.find("singular") != std::string::npos || folded.find("converge") != std::string::npos) {
        if (lines.empty() || lines.back() != line) lines.push_back(line);
      }
      start = end + 1;
    }
    if (lines.size() > 12) lines.erase(lines.begin(), lines.end() - 12);
    std::string excerpt;
    for (const auto& l : lines) excerpt += l + "\n";
    if (excerpt.empty()) excerpt = log.size() > 800 ? log.substr(log.size() - 800) : log;
    out.push_back(Diagnostic::make(CheckStage::op_point, "nonconvergence", {{"log", excerpt}}));
    return out;
  }

  static const std::regex singular(R"(singular matrix:\s*check node\s+(\S+))", std::regex::icase);
  std::set<std::string> reported;
  for (auto it = std::sregex_iterator(sim.engine_log.begin(), sim.engine_log.end(), singular);
       it != std::sregex_iterator(); ++it) {
    std::string node = (*it)[1].str();
    if (reported.insert(fold_case(node)).second) {
      out.push_back(Diagnostic::make(CheckStage::op_point, "engine_floating_node", {{"node", node}}));
    }
  }

  if (check_cutoff) {
    for (const auto& [name, d] : sim.devices) {
      if (d.region != Region::cutoff) continue;
      // upper-case the device letter like the netlist usually does
      std::string device = name;
      if (!device.empty()) device[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(device[0])));
      out.push_back(Diagnostic::make(CheckStage::op_point, d.kind == DeviceKind::pmos ? "cutoff_pmos" : "cutoff",
                                     {{"device", device}, {"vgs", d.vgs}, {"vth", d.vth}}));
    }
  }
  return out;
}

StageOutcome check_dc_sweep(const WaveformSeries& series, const NodeRoles& roles, std::string_view output) {
  StageOutcome out;
  const auto& v = series.at(output_key(roles, output));
  const auto& x = series.axis;
  double max_slope = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    double dx = x[i] - x[i - 1];
    if (dx > 0) max_slope = std::max(max_slope, std::abs((v[i] - v[i - 1]) / dx));
  }
  out.measurements["dc_max_slope"] = max_slope;
  const double target = supply_volts(roles, x) / 2.0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i] - target) < std::abs(v[best] - target)) best = i;  // ties keep the lower bias
  }
  if (!x.empty()) {
    out.measurements["best_bias"] = x[best];
    out.measurements["best_bias_vout"] = v[best];
  }
  if (max_slope < 1e-5) out.diagnostics.push_back(Diagnostic::make(CheckStage::dc_sweep, "low_gain"));
  return out;
}

OscillationMetrics measure_oscillation(const WaveformSeries& series, std::string_view signal) {
  OscillationMetrics m;
  const auto& t = series.axis;
  if (t.size() < 4) return m;
  const auto& v = series.at(signal);
  const double t_begin = t.front(), t_end = t.back();
  const std::size_t n = std::max<std::size_t>(4000, t.size());
  std::vector<double> u = resample(t, v, t_begin, t_end, n);
  const std::size_t first = static_cast<std::size_t>(kStartupDiscard * static_cast<double>(n));
  m.amplitude = half_peak_to_peak(u, first, n);

  const double early = half_peak_to_peak(u, n / 4, n / 2);
  const double late = half_peak_to_peak(u, 3 * n / 4, n);
  m.sustained = early > 1e-9 && late >= 0.8 * early;

  if (m.amplitude <= 0) return m;
  double mean = 0;
  for (std::size_t i = first; i < n; ++i) mean += u[i];
  mean /= static_cast<double>(n - first);
  // rising crossings with a small hysteresis band against numerical ripple
  const double band = 0.05 * m.amplitude;
  const double dt = (t_end - t_begin) / static_cast<double>(n - 1);
  std::vector<double> crossings;
  bool armed = u[first] < mean - band;
  for (std::size_t i = first + 1; i < n; ++i) {
    if (u[i] < mean - band) armed = true;
    if (armed && u[i - 1] < mean && u[i] >= mean) {
      double frac = (mean - u[i - 1]) / (u[i] - u[i - 1]);
      crossings.push_back(t_begin + (static_cast<double>(i - 1) + frac) * dt);
      armed = false;
    }
  }
  if (crossings.size() >= 2) {
    m.cycles = static_cast<int>(crossings.size() - 1);
    m.period = (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
  }
  return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

StageOutcome check_function(const FunctionInputs& inputs, const CircuitTypeProfile& profile) {
  StageOutcome out;
  switch (profile.circuit_type) {
    case CircuitType::amplifier:
    case CircuitType::opamp: check_amplifier(inputs, profile, out); break;
    case CircuitType::filter: check_filter(inputs, profile, out); break;
    case CircuitType::oscillator: check_oscillator(inputs, profile, out); break;
    case CircuitType::integrator: check_shape(inputs, profile, out, true); break;
    case CircuitType::differentiator: check_shape(inputs, profile, out, false); break;
    case CircuitType::comparator: check_swing(inputs, profile, out, false); break;
    case CircuitType::inverter: check_swing(inputs, profile, out, true); break;
    case CircuitType::mixer: check_mixer(inputs, profile, out); break;
    case CircuitType::schmitt_trigger: check_schmitt(inputs, profile, out); break;
    case CircuitType::adder: check_arithmetic(inputs, profile, out, false); break;
    case CircuitType::subtractor: check_arithmetic(inputs, profile, out, true); break;
    case CircuitType::current_mirror: check_mirror(inputs, profile, out); break;
  }
  return out;
}

}  // namespace anaforge
