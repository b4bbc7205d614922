#include <unistd.h>

#include <atomic>
#include <fstream>
#include <random>
#include <sstream>

#include "anaforge/netlist.hpp"
#include "anaforge/sim.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

bool blank(std::string_view text) {
  return text.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

double node_voltage(const SimulationResult& r, const std::string& net, bool& ok) {
  if (is_ground(net)) return 0.0;
  auto it = r.op_point.find(fold_case(net));
  if (it == r.op_point.end()) {
    ok = false;
    return 0.0;
  }
  return it->second;
}

}  // namespace

Simulator::Simulator(std::shared_ptr<SpiceEngine> engine, fs::path scratch_root)
    : engine_(std::move(engine)), scratch_root_(std::move(scratch_root)) {
  if (!engine_) throw EngineNotFound("no SPICE engine");
  if (scratch_root_.empty()) scratch_root_ = fs::temp_directory_path() / "anaforge-sim";
}

fs::path Simulator::fresh_workdir() const {
  static std::atomic<unsigned long> counter{0};
  static const unsigned long salt = std::random_device{}();
  fs::path dir = scratch_root_ / ("run-" + std::to_string(::getpid()) + "-" + std::to_string(salt) + "-" +
                                  std::to_string(counter.fetch_add(1)));
  fs::create_directories(dir);
  return dir;
}

SimulationResult Simulator::run(std::string_view deck, const fs::path& workdir) const {
  const bool scratch = workdir.empty();
  const fs::path dir = fs::absolute(scratch ? fresh_workdir() : workdir);
  fs::create_directories(dir);
  struct Cleanup {
    bool active;
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      if (active) fs::remove_all(dir, ec);
    }
  } cleanup{scratch, dir};

  const fs::path deck_path = dir / "deck.cir", raw_path = dir / "out.raw", log_path = dir / "engine.log";
  std::error_code ec;
  fs::remove(raw_path, ec);
  write_file(deck_path, deck);

  EngineRun run = engine_->execute(deck_path, raw_path, log_path);

  std::vector<RawPlot> plots;
  std::string parse_problem;
  if (fs::exists(raw_path)) {
    try {
      plots = parse_raw(read_file(raw_path));
    } catch (const Error& e) {
      parse_problem = e.what();
    }
  }
  SimulationResult result = result_from_plots(plots);
  result.engine_log = run.log;
  if (!parse_problem.empty()) result.engine_log += "\n" + parse_problem + "\n";
  result.converged = run.status == 0 && !plots.empty();
  if (plots.empty() && blank(result.engine_log)) {
    throw NonConvergence("engine produced no output (exit status " + std::to_string(run.status) + ")");
  }
  if (!result.converged && blank(result.engine_log)) {
    result.engine_log = "engine exit status " + std::to_string(run.status) + "\n";
  }
  return result;
}

std::vector<std::string> telemetry_saves(const CircuitIR& circuit) {
  std::vector<std::string> refs;
  for (const auto& c : flatten(circuit).components) {
    if (c.kind != ComponentKind::mosfet) continue;
    std::string ref = fold_case(c.refdes);
    for (const char* p : {"id", "vgs", "vds", "von", "gm"}) refs.push_back("@" + ref + "[" + p + "]");
  }
  if (refs.empty()) return {};
  std::vector<std::string> lines{".save all"};
  std::string line = ".save";
  for (const auto& r : refs) {
    if (line.size() + r.size() > 200) {
      lines.push_back(line);
      line = ".save";
    }
    line += " " + r;
  }
  lines.push_back(line);
  return lines;
}

void annotate_devices(const CircuitIR& circuit, SimulationResult& result) {
  CircuitIR flat = flatten(circuit);
  for (const auto& c : flat.components) {
    if (c.kind != ComponentKind::mosfet) continue;
    DeviceOp& d = result.devices[fold_case(c.refdes)];
    const DeviceModel* model = flat.find_model(c.model);
    d.kind = model ? model->kind : DeviceKind::other;
    if (d.kind == DeviceKind::other && model) {
      std::string t = fold_case(model->type_token);
      d.kind = t == "pmos" ? DeviceKind::pmos : t == "nmos" ? DeviceKind::nmos : DeviceKind::other;
    }
    bool ok = true;
    double vd = node_voltage(result, c.terminals[0], ok);
    double vg = node_voltage(result, c.terminals[1], ok);
    double vs = node_voltage(result, c.terminals[2], ok);
    if (ok) {
      d.vgs = vg - vs;
      d.vds = vd - vs;
    }
    const bool pmos = d.kind == DeviceKind::pmos;
    if (d.vth == 0.0 && model) {
      auto vto = model->params.find("vto");
      if (vto != model->params.end()) d.vth = vto->second;
    }
    if (pmos && d.vth > 0.0) d.vth = -d.vth;
    if (!ok && result.op_point.empty()) {
      d.region = Region::unknown;
      continue;
    }
    double s = pmos ? -1.0 : 1.0;  // mirror PMOS onto NMOS conventions
    double vov = s * (d.vgs - d.vth);
    if (vov <= 0.0) {
      d.region = Region::cutoff;
    } else {
      d.region = s * d.vds >= vov ? Region::saturation : Region::triode;
    }
  }
}

SimulationResult Simulator::simulate(const CircuitIR& circuit, std::span<const AnalysisRequest> analyses,
                                     const fs::path& workdir) const {
  auto saves = telemetry_saves(circuit);
  SimulationResult result = run(emit_netlist(circuit, analyses, saves), workdir);
  if (!result.op_point.empty() || !result.devices.empty()) annotate_devices(circuit, result);
  return result;
}

WaveformSeries Simulator::dc_sweep(const CircuitIR& circuit, const std::string& source, double start, double stop,
                                   int steps, const fs::path& workdir) const {
  if (steps < 2) throw PreconditionError("dc_sweep: steps must be >= 2");
  if (!(start < stop)) throw PreconditionError("dc_sweep: start must be < stop");
  const Component* src = circuit.find_component(source);
  if (!src || (src->kind != ComponentKind::vsource && src->kind != ComponentKind::isource)) {
    throw PreconditionError("dc_sweep: no independent source named " + source);
  }
  const double step = (stop - start) / (steps - 1);
  std::vector<AnalysisRequest> analyses{AnalysisRequest::dc(src->refdes, start, stop, step)};
  SimulationResult result = simulate(circuit, analyses, workdir);
  const WaveformSeries* raw = result.find_series("dc");
  if (!raw || raw->axis.size() < 2) {
    throw NonConvergence("dc sweep of " + source + " produced no data\n" + result.engine_log);
  }
  // The engine's own stepping may add or drop the end point by rounding;
  // report exactly `steps` points.
  WaveformSeries out;
  out.axis_kind = AxisKind::voltage;
  out.axis_name = fold_case(src->refdes);
  for (int i = 0; i < steps; ++i) out.axis.push_back(i == steps - 1 ? stop : start + i * step);
  for (const auto& [name, values] : raw->signals) {
    auto& dst = out.signals[name];
    for (double x : out.axis) dst.push_back(interpolate(raw->axis, values, x));
  }
  return out;
}

}  // namespace anaforge
