// Acceptance checks: one line per criterion with its verdict, wall time and
// time limit. Exit status 0 iff every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>

#include "../support/ablation_probe.hpp"
#include "../unit/test_support.hpp"
#include "anaforge/cli.hpp"
#include "anaforge/netlist.hpp"
#include "anaforge/orchestrator.hpp"
#include "anaforge/sizing.hpp"

namespace fs = std::filesystem;
using namespace anaforge;
using anaforge::testing::read_fixture;
using anaforge::testing::shared_simulator;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "anaforge-acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// 1 ---------------------------------------------------------------------------

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

Outcome pass_at_k_exactness() {
  double worst = 0.0;
  for (int n = 1; n <= 30; ++n)
    for (int k = 1; k <= std::min(5, n); ++k)
      for (int c = 0; c <= n; ++c) {
        const long double exact = static_cast<long double>(binomial(n, k) - binomial(n - c, k)) /
                                  static_cast<long double>(binomial(n, k));
        worst = std::max(worst, static_cast<double>(std::abs(pass_at_k(n, c, k) - exact)));
      }
  const double ref = pass_at_k(30, 16, 5);
  return {worst <= 1e-12 && std::abs(ref - 0.986) < 5e-4,
          fmt("max error %.2e over n<=30,k<=5; pass@5(30,16)=%.4f", worst, ref)};
}

// 2 ---------------------------------------------------------------------------

Outcome metric_formulas() {
  const double db = gain_to_db(10.0);
  const double fom = figure_of_merit(1e6, 100e-12, 100e-6);
  return {std::abs(db - 20.0) < 1e-12 && std::abs(fom - 1.0) < 1e-12, fmt("gain 10 -> %.6f dB; fom -> %.6f", db, fom)};
}

// 3 ---------------------------------------------------------------------------

Outcome simulator_oracles() {
  const Simulator& sim = shared_simulator();
  const auto div = sim.run("divider\nV1 in 0 5\nR1 in mid 10k\nR2 mid 0 10k\n.op\n.end\n");
  const double vmid = div.op_point.at("mid");

  const auto rc = sim.run("rc\nV1 in 0 DC 0 AC 1\nR1 in out 1k\nC1 out 0 1u\n.ac dec 20 1 1meg\n.end\n");
  const WaveformSeries& ac = rc.series.at("ac");
  const auto& mag = ac.at("out");
  const double target = 1.0 / std::sqrt(2.0);
  double crossing = 0.0;
  for (std::size_t i = 1; i < mag.size(); ++i)
    if (mag[i - 1] >= target && mag[i] < target) {
      const double f = (mag[i - 1] - target) / (mag[i - 1] - mag[i]);
      crossing = std::exp(std::log(ac.axis[i - 1]) + f * (std::log(ac.axis[i]) - std::log(ac.axis[i - 1])));
    }
  const double fc = 1.0 / (2 * std::numbers::pi * 1e3 * 1e-6);
  const double rc_err = std::abs(crossing - fc) / fc;

  const double f0 = 1e3;
  const auto tran = sim.run("sine\nV1 out 0 SIN(0 1 1k)\nR1 out 0 1k\n.tran 10u 20m\n.end\n");
  const Spectrum sp = compute_spectrum(tran.series.at("tran"), "out");
  const auto& amp = sp.series.at("out");
  const auto peak = static_cast<std::size_t>(std::max_element(amp.begin() + 1, amp.end()) - amp.begin());
  const double bins_off = std::abs(sp.series.axis[peak] - f0) / sp.bin_width;

  return {std::abs(vmid - 2.5) <= 1e-6 && rc_err <= 0.02 && bins_off <= 1.0,
          fmt("divider %.7f V; RC -3 dB %.2f Hz (%.2f%% off); FFT peak %.1f Hz (%.2f bins off)", vmid, crossing,
              100 * rc_err, sp.series.axis[peak], bins_off)};
}

// 4 ---------------------------------------------------------------------------

const char* kReferenceSpace = R"(* PARAMS
* range w_M1 min=0.045e-6 max=22.5e-6 log=true kind=width unit=m
* range r_load min=5k max=20k log=true kind=resistance unit=ohm
* initial_params w_M1=5e-6 r_load=10k
Common-source amplifier with resistive load
.model nmos_model nmos (kp=100e-6 vto=0.5 level=1)
M1 Vout Vin 0 0 nmos_model w={w_M1} l=0.045e-6
R1 Vout Vdd {r_load}
Vdd Vdd 0 DC 5
Vin Vin 0 DC 0.7 AC 1
.end
)";

DesignTask amp_task() {
  DesignTask t;
  t.task_id = 1;
  t.circuit_type = CircuitType::amplifier;
  t.description = "Common-source amp. with R load";
  t.input_node = "Vin";
  return t;
}

Outcome bias_search() {
  const Simulator& sim = shared_simulator();
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  BiasSearchOptions o;
  o.stages = {20, 200, 200};
  // The level-1 reference amplifier biases near 0.71 V, so the whole supply
  // range is searched.
  o.window_lo = 0.0;
  o.window_hi = 1.0;
  const double supply = 5.0;
  const CircuitSizer sizer(sim, space, amp_task(), {DesignObjective::gain}, o);
  const CircuitIR tb = sizer.testbench(space.initial, 0.0);
  SweepFn sweep = [&](double start, double stop, int points) {
    return sim.dc_sweep(tb, "Vin", start, stop, points).at("Vout");
  };

  const BiasResult r = multires_bias_search(sweep, supply, o);
  double oracle = 1e9;
  for (double v : sweep(0.0, supply, 2000)) oracle = std::min(oracle, std::abs(v - 2.5));
  double fine = supply / (o.stages[0] - 1);
  for (std::size_t k = 1; k < o.stages.size(); ++k) fine = 2.0 * fine / (o.stages[k] - 1);
  const auto around = sweep(r.bias, r.bias + fine, 2);
  const double slack = std::abs(around[1] - around[0]);
  const double err = std::abs(r.vout - 2.5);
  bool ok = r.sims_used <= 420 && err <= oracle + slack;

  std::vector<double> multi, uniform;
  int max_sims = r.sims_used;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    BiasSearchOptions s = o;
    s.seed = seed;
    const BiasResult m = multires_bias_search(sweep, supply, s);
    max_sims = std::max(max_sims, m.sims_used);
    multi.push_back(std::abs(m.vout - 2.5));
    uniform.push_back(std::abs(uniform_bias_search(sweep, supply, m.sims_used, s).vout - 2.5));
  }
  ok = ok && max_sims <= 420 && median(multi) <= median(uniform);
  return {ok, fmt("bias %.5f V, |Vout-2.5|=%.2e (oracle %.2e + step %.2e), %d sims; median over 5 seeds %.2e vs "
                  "uniform %.2e",
                  r.bias, err, oracle, slack, max_sims, median(multi), median(uniform))};
}

// 5 ---------------------------------------------------------------------------

Outcome tpe_vs_random() {
  ParamSpace box;
  box.ranges.push_back({"x", 0.0, 1.0, false, "", ParamKind::other});
  box.ranges.push_back({"y", 0.0, 1.0, false, "", ParamKind::other});
  const auto trial = [](const ParamValues& p, int id) {
    TrialRecord r;
    r.trial_id = id;
    r.params = p;
    r.objective = -std::pow(p.at("x") - 0.23, 2) - std::pow(p.at("y") - 0.71, 2);
    return r;
  };
  std::vector<double> tpe, random;
  bool monotone = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (SamplerKind kind : {SamplerKind::tpe, SamplerKind::random}) {
      OptimizeOptions o;
      o.budget = 200;
      o.seed = seed;
      o.sampler = kind;
      const OptimizeResult r = optimize(box, trial, o);
      for (std::size_t i = 1; i < r.best_so_far.size(); ++i) monotone = monotone && r.best_so_far[i] >= r.best_so_far[i - 1];
      (kind == SamplerKind::tpe ? tpe : random).push_back(r.best.objective);
    }
  }
  return {monotone && median(tpe) > median(random),
          fmt("median best TPE %.3e vs random %.3e; best-so-far monotone: %s", median(tpe), median(random),
              monotone ? "yes" : "no")};
}

// 6 ---------------------------------------------------------------------------

Outcome verification_corpus() {
  const auto corpus = nlohmann::json::parse(read_fixture("verify/corpus.json"));
  int matched = 0;
  bool amplitude_message = false;
  std::string first_mismatch;
  for (const auto& e : corpus) {
    const auto& jt = e["task"];
    DesignTask task;
    task.circuit_type = *circuit_type_from_string(jt["circuit_type"].get<std::string>());
    if (!jt["input_node"].is_null()) task.input_node = jt["input_node"].get<std::string>();
    task.extra_inputs = jt["extra_inputs"].get<std::vector<std::string>>();
    task.description = jt["description"].get<std::string>();
    const CircuitIR circuit = parse_netlist_lenient(read_fixture("verify/" + e["file"].get<std::string>())).circuit;
    const CheckReport report = run_pipeline(circuit, task, shared_simulator());

    const auto& x = e["expect"];
    std::vector<std::string> ids;
    for (const auto& d : report.diagnostics) {
      if (d.stage != CheckStage::waveform) ids.push_back(d.template_id);
      if (d.message.find("The oscillation amplitude is too small") != std::string::npos) amplitude_message = true;
    }
    const std::string stage = report.failed_stage ? std::string(to_string(*report.failed_stage)) : "";
    const std::string want_stage = x["failed_stage"].is_null() ? "" : x["failed_stage"].get<std::string>();
    const bool ok = (report.verdict == Verdict::pass) == (x["verdict"] == "pass") && stage == want_stage &&
                    ids == x["templates"].get<std::vector<std::string>>();
    if (ok) {
      ++matched;
    } else if (first_mismatch.empty()) {
      first_mismatch = e["file"].get<std::string>();
    }
  }
  const int total = static_cast<int>(corpus.size());
  return {total >= 10 && matched == total && amplitude_message,
          fmt("%d/%d netlists matched stage and templates; amplitude message seen: %s%s%s", matched, total,
              amplitude_message ? "yes" : "no", first_mismatch.empty() ? "" : "; first mismatch ",
              first_mismatch.c_str())};
}

// 7 ---------------------------------------------------------------------------

struct CliRun {
  int code = 0;
  std::string out;
};

CliRun cli(std::vector<std::string> args, const std::shared_ptr<HttpTransport>& transport) {
  std::ostringstream out, err;
  CliEnvironment env;
  env.transport = transport;
  env.out = &out;
  env.err = &err;
  args.insert(args.begin(), "anaforge");
  const int code = run_cli(args, env);
  return {code, out.str() + err.str()};
}

/// Every file of a run tree except the tool library (whose provenance holds
/// a timestamp), with the `Date:` header lines of engine raw files blanked.
std::map<std::string, std::string> snapshot(const fs::path& root, int* masked) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (rel.rfind("library", 0) == 0) continue;
    std::string text = testing::read_text(e.path().string());
    if (e.path().extension() == ".raw") {
      const auto at = text.find("\nDate: ");
      if (at != std::string::npos) {
        text.erase(at + 7, text.find('\n', at + 1) - (at + 7));
        ++*masked;
      }
    }
    files[rel] = std::move(text);
  }
  return files;
}

Outcome replay() {
  auto transport = std::make_shared<ForbiddenTransport>();
  std::vector<std::map<std::string, std::string>> runs;
  bool ok = true;
  std::string detail;
  int masked = 0;
  for (int round = 0; round < 2; ++round) {
    const fs::path dir = scratch("replay-" + std::to_string(round));
    const auto amp = cli({"design", "--task", "1", "--mode", "replay", "--workdir", dir.string(), "--data-dir",
                          ANAFORGE_DATA_DIR},
                         transport);
    const auto osc = cli({"design", "--task", "23", "--mode", "replay", "--workdir", dir.string(), "--data-dir",
                          ANAFORGE_DATA_DIR},
                         transport);
    const bool amp_ok = amp.code == 0 && amp.out.find("verdict: pass") != std::string::npos;
    const bool osc_ok = osc.code == 0 && osc.out.find("attempt 1: fail") != std::string::npos &&
                        osc.out.find("attempt 2: pass") != std::string::npos;
    ok = ok && amp_ok && osc_ok;
    if (!amp_ok && detail.empty()) detail = "task 1: " + amp.out;
    if (!osc_ok && detail.empty()) detail = "task 23: " + osc.out;
    runs.push_back(snapshot(dir, &masked));
  }
  const bool identical = runs[0] == runs[1] && !runs[0].empty();
  ok = ok && identical && transport->attempts() == 0;
  if (detail.empty())
    detail = fmt("task 1 pass; task 23 fail then pass; %zu files identical across runs (raw Date: lines masked in "
                 "%d): %s; network attempts %d",
                 runs[0].size(), masked / 2, identical ? "yes" : "no", transport->attempts());
  return {ok, detail};
}

// 8 ---------------------------------------------------------------------------

Outcome parameter_space() {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  std::string text = kReferenceSpace;
  const std::string from = "max=22.5e-6";
  text.replace(text.find(from), from.size(), "max=45e-6");
  try {
    validate_param_space(parse_param_spec(text));
    return {false, "widened w_M1 range was accepted"};
  } catch (const ConstraintViolation& e) {
    const std::string what = e.what();
    const bool named = what.find(kWidthRule) != std::string::npos;
    return {named && space.ranges.size() == 2, "reference space valid; widened range rejected: " + what};
  }
}

// 9 ---------------------------------------------------------------------------

Outcome ablations() {
  testing::AblationProbe probe;
  probe.data_dir = ANAFORGE_DATA_DIR;
  probe.fixture_dir = ANAFORGE_FIXTURE_DIR;
  probe.scratch = scratch("ablations");
  probe.simulator = &shared_simulator();
  const auto baseline = probe.run({}, "baseline");
  bool ok = true;
  std::string detail;
  for (const auto& c : testing::AblationProbe::cases()) {
    const auto changed = testing::AblationProbe::diff(baseline, probe.run(c.ablations, c.flag));
    const bool same = changed == c.expected;
    ok = ok && same;
    detail += (detail.empty() ? "" : "; ") + c.flag + " changes {";
    bool first = true;
    for (const auto& a : changed) {
      detail += (first ? "" : ", ") + a;
      first = false;
    }
    detail += same ? "}" : "} UNEXPECTED";
  }
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "pass@k exactness", 1.0, pass_at_k_exactness},
      {2, "metric formulas", 1.0, metric_formulas},
      {3, "simulator oracles", 30.0, simulator_oracles},
      {4, "multi-resolution bias search", 300.0, bias_search},
      {5, "TPE vs random sampling", 60.0, tpe_vs_random},
      {6, "verification corpus", 120.0, verification_corpus},
      {7, "offline replay", 60.0, replay},
      {8, "parameter space validation", 1.0, parameter_space},
      {9, "ablation isolation", 10.0, ablations},
  };
  // Start the engine before timing so criterion 3 does not pay for it.
  shared_simulator().run("warmup\nV1 a 0 1\nR1 a 0 1k\n.op\n.end\n");

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs <= c.limit_s;
    if (!pass) ++failures;
    std::printf("criterion %d [%s] %s (%.2f s, limit %.0f s): %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                c.limit_s, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
