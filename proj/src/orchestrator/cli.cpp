#include "anaforge/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "anaforge/netlist.hpp"
#include "anaforge/orchestrator.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Settings shared by the subcommands

struct Settings {
  std::string config_file;
  std::string data_dir;
  std::string workdir = "runs";
  std::string mode = "live";
  std::string transcript;
  std::string provider = "openai";
  std::string base_url;
  std::string api_key_env;
  std::string script;
  std::string llm_model = "gpt-4.1";
  std::string mllm_model;
  std::string engine;
  std::string library;
  std::uint64_t seed = 0;
  int workers = 1;
  int engine_workers = 2;
  Ablations ablations;
  std::string repr = "annotated_netlist";
};

/// Applies a JSON config file; command-line flags given explicitly win
/// because they are parsed again afterwards.
void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read config file " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  auto str = [&](const nlohmann::json& obj, const char* key, std::string& dst) {
    if (obj.contains(key) && obj[key].is_string()) dst = obj[key].get<std::string>();
  };
  str(j, "llm_model", s.llm_model);
  str(j, "mllm_model", s.mllm_model);
  str(j, "workdir", s.workdir);
  str(j, "data_dir", s.data_dir);
  str(j, "library", s.library);
  if (j.contains("workers")) s.workers = j["workers"].get<int>();
  if (j.contains("provider")) {
    const auto& p = j["provider"];
    str(p, "kind", s.provider);
    str(p, "base_url", s.base_url);
    str(p, "api_key_env", s.api_key_env);
    str(p, "script", s.script);
  }
  if (j.contains("engine")) {
    const auto& e = j["engine"];
    str(e, "executable", s.engine);
    if (e.contains("workers")) s.engine_workers = e["workers"].get<int>();
  }
}

fs::path data_dir_of(const Settings& s) { return s.data_dir.empty() ? default_data_dir() : fs::path(s.data_dir); }

GatewayMode mode_of(const Settings& s) {
  auto m = gateway_mode_from_string(s.mode);
  if (!m) throw PreconditionError("unknown mode " + s.mode);
  return *m;
}

ProviderConfig provider_config(const Settings& s, const std::string& model) {
  ProviderConfig c;
  if (s.provider == "openai") {
    c.kind = ProviderKind::openai;
  } else if (s.provider == "anthropic") {
    c.kind = ProviderKind::anthropic;
    c.base_url = "https://api.anthropic.com/v1";
    c.api_key_env = "ANTHROPIC_API_KEY";
  } else if (s.provider == "scripted") {
    c.kind = ProviderKind::scripted;
    c.script = s.script;
  } else {
    throw PreconditionError("unknown provider " + s.provider);
  }
  if (!s.base_url.empty()) c.base_url = s.base_url;
  if (!s.api_key_env.empty()) c.api_key_env = s.api_key_env;
  c.model = model;
  return c;
}

Simulator make_simulator(const Settings& s) {
  const fs::path data = data_dir_of(s);
  EngineConfig ec = engine_config_from_env(data.parent_path());
  if (!s.engine.empty()) ec.executable = s.engine;
  ec.workers = std::max(1, s.engine_workers);
  return Simulator(make_engine(ec));
}

RunConfig run_config(const Settings& s) {
  RunConfig c;
  c.llm_model = s.llm_model;
  c.mllm_model = s.mllm_model.empty() ? s.llm_model : s.mllm_model;
  c.mode = mode_of(s);
  c.ablations = s.ablations;
  auto repr = representation_from_string(s.repr);
  if (!repr) throw PreconditionError("unknown representation " + s.repr);
  c.ablations.repr = *repr;
  c.seed = s.seed;
  c.workdir = s.workdir;
  if (!s.transcript.empty()) {
    c.transcript = fs::path(s.transcript);
  } else if (c.mode != GatewayMode::live) {
    c.transcript = data_dir_of(s) / "transcripts";
  }
  return c;
}

/// Gateways for one task: transcript stores are shared per file.
class GatewayFactory {
 public:
  GatewayFactory(const Settings& settings, const RunConfig& config, std::shared_ptr<HttpTransport> transport)
      : settings_(settings), config_(config), transport_(std::move(transport)) {}

  std::unique_ptr<LlmGateway> make(int task_id, const std::string& model) {
    std::shared_ptr<TranscriptStore> store;
    if (config_.transcript && (config_.mode != GatewayMode::live)) store = store_for(config_.transcript_for(task_id));
    std::unique_ptr<ChatProvider> provider;
    if (config_.mode != GatewayMode::replay) {
      if (!transport_) transport_ = make_http_transport();
      provider = make_provider(provider_config(settings_, model), transport_);
    }
    return std::make_unique<LlmGateway>(config_.mode, std::move(provider), std::move(store));
  }

 private:
  std::shared_ptr<TranscriptStore> store_for(const fs::path& path) {
    std::lock_guard lock(mutex_);
    auto& slot = stores_[path.lexically_normal().string()];
    if (!slot) slot = std::make_shared<TranscriptStore>(path);
    return slot;
  }

  const Settings& settings_;
  const RunConfig& config_;
  std::shared_ptr<HttpTransport> transport_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<TranscriptStore>> stores_;
};

std::vector<DesignTask> load_suite(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot read suite " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  const nlohmann::json& list = j.is_array() ? j : j.at("tasks");
  std::vector<DesignTask> out;
  for (const auto& t : list) out.push_back(task_from_json(t));
  return out;
}

DesignTask resolve_task(const Settings& s, const std::string& spec) {
  const bool numeric = !spec.empty() && spec.find_first_not_of("0123456789") == std::string::npos;
  if (numeric) return find_task(load_task_registry(data_dir_of(s) / "benchmark_tasks.json"), std::stoi(spec));
  std::ifstream in(spec);
  if (!in) throw PreconditionError("no task " + spec);
  return task_from_json(nlohmann::json::parse(in));
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto v = parse_spice_number(item);
    if (!v) throw PreconditionError("bad number " + item);
    out.push_back(*v);
  }
  return out;
}

std::optional<DesignObjective> parse_objective(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const std::string t = text == "g" ? "gain" : text;
  auto o = design_objective_from_string(t);
  if (!o) throw PreconditionError("unknown objective " + text + " (gain, gbw or fom)");
  return o;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

std::string metrics_line(const TrialRecord& t) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "gain_db=%.3f bandwidth_hz=%.6g gbw_mhz=%.6g power_uw=%.6g fom=%.6g bias=%.6g",
                t.metrics.gain_db, t.metrics.bandwidth_hz, t.metrics.gbw_mhz, t.metrics.power_uw, t.metrics.fom,
                t.bias);
  return buf;
}

std::string attempt_summary(const AttemptRecord& a) {
  if (a.report.verdict == Verdict::pass) return "pass";
  std::string line = "fail";
  if (a.report.failed_stage) line += " at " + std::string(to_string(*a.report.failed_stage));
  for (const auto& d : a.report.diagnostics) {
    if (d.severity != Severity::fail) continue;
    std::string msg = d.message.substr(0, d.message.find('\n'));
    line += ": " + msg;
    break;
  }
  return line;
}

/// Library for a run: the --library directory, else a fresh copy of the
/// shipped seed library at `fresh`.
std::unique_ptr<ToolLibrary> open_library(const Settings& s, const fs::path& fresh) {
  if (!s.library.empty()) return std::make_unique<ToolLibrary>(s.library);
  copy_library(data_dir_of(s) / "library_seed", fresh);
  return std::make_unique<ToolLibrary>(fresh);
}

void add_common_options(CLI::App& cmd, Settings& s) {
  cmd.add_option("--config", s.config_file, "JSON config file (models, provider, engine, workers)");
  cmd.add_option("--data-dir", s.data_dir, "Data directory (prompts, registry, transcripts, seed library)");
  cmd.add_option("--workdir", s.workdir, "Run directory root");
  cmd.add_option("--engine", s.engine, "SPICE engine executable");
  cmd.add_option("--seed", s.seed, "Random seed");
}

void add_llm_options(CLI::App& cmd, Settings& s) {
  cmd.add_option("--mode", s.mode, "live, record or replay")->check(CLI::IsMember({"live", "record", "replay"}));
  cmd.add_option("--transcript", s.transcript, "Transcript file or directory of task-<id>.jsonl files");
  cmd.add_option("--provider", s.provider, "openai, anthropic or scripted")
      ->check(CLI::IsMember({"openai", "anthropic", "scripted"}));
  cmd.add_option("--base-url", s.base_url, "Provider base URL");
  cmd.add_option("--api-key-env", s.api_key_env, "Environment variable holding the API key");
  cmd.add_option("--script", s.script, "Rules file for the scripted provider");
  cmd.add_option("--model", s.llm_model, "LLM model name");
  cmd.add_option("--mllm-model", s.mllm_model, "Multimodal model name (default: --model)");
  cmd.add_option("--library", s.library, "Tool library directory (default: fresh copy of the seed library)");
  cmd.add_flag("--no-feedback", s.ablations.no_feedback, "Ablation: single attempt, no repair loop");
  cmd.add_flag("--no-library", s.ablations.no_library, "Ablation: no tool library");
  cmd.add_flag("--no-cot", s.ablations.no_cot, "Ablation: no chain-of-thought instruction");
  cmd.add_flag("--no-incontext", s.ablations.no_incontext, "Ablation: no in-context example");
  cmd.add_option("--repr", s.repr, "Circuit representation: annotated_netlist or plain_netlist")
      ->check(CLI::IsMember({"annotated_netlist", "plain_netlist"}));
}

// ---------------------------------------------------------------------------
// Subcommands

struct DesignArgs {
  std::string task;
  std::string objective;
  int attempts = 3;
  int sample = 0;
  int budget = 1000;
};

int cmd_design(const Settings& s, const DesignArgs& a, const CliEnvironment& env) {
  std::ostream& out = *env.out;
  RunConfig config = run_config(s);
  config.attempts_max = a.attempts;
  config.validate();
  const DesignTask task = resolve_task(s, a.task);
  const auto objective = parse_objective(a.objective);

  Simulator simulator = make_simulator(s);
  const PromptAssets assets = PromptAssets::load(data_dir_of(s) / "prompts");
  GatewayFactory gateways(s, config, env.transport);
  auto llm = gateways.make(task.task_id, config.llm_model);
  auto mllm = gateways.make(task.task_id, config.mllm_model);
  auto library = open_library(s, config.workdir / "library");

  DesignServices services;
  services.llm = llm.get();
  services.mllm = mllm.get();
  services.simulator = &simulator;
  services.assets = &assets;
  services.library = library.get();

  const fs::path run_dir =
      config.workdir / ("task-" + std::to_string(task.task_id)) / ("sample-" + std::to_string(a.sample));
  out << "task " << task.task_id << " (" << task.description << "), sample " << a.sample << ", mode "
      << to_string(config.mode) << "\n";

  TaskResult result;
  std::optional<UnifiedResult> unified;
  if (objective) {
    unified = run_unified(task, objective, config, services, a.budget, run_dir);
    result = unified->design;
  } else {
    result = run_design_task(task, config, services, a.sample, std::nullopt, run_dir);
  }
  for (const auto& w : result.warnings) out << "warning: " << w << "\n";
  for (std::size_t i = 0; i < result.attempts.size(); ++i) {
    out << "attempt " << i + 1 << ": " << attempt_summary(result.attempts[i]) << "\n";
    if (result.attempts[i].waveform_analysis) out << "  waveform analysis received\n";
  }
  if (!result.error.empty()) out << "error: " << result.error << "\n";
  if (unified && unified->initial) out << "initial:   " << metrics_line(*unified->initial) << "\n";
  if (unified && unified->optimized) out << "optimized: " << metrics_line(unified->optimized->best) << "\n";
  out << "verdict: " << (result.final_verdict == Verdict::pass ? "pass" : "fail") << "\n";
  out << "run directory: " << run_dir.string() << "\n";
  return result.final_verdict == Verdict::pass ? 0 : 1;
}

struct BenchArgs {
  std::string suite;
  std::string tasks;
  int n = 30;
  std::string ks = "1,5";
};

int cmd_bench(const Settings& s, const BenchArgs& a, const CliEnvironment& env) {
  std::ostream& out = *env.out;
  RunConfig config = run_config(s);
  config.samples_n = a.n;
  config.validate();
  std::vector<DesignTask> suite = load_suite(a.suite.empty() ? data_dir_of(s) / "benchmark_tasks.json" : fs::path(a.suite));
  if (!a.tasks.empty()) {
    const auto ids = parse_int_list(a.tasks);
    std::vector<DesignTask> picked;
    for (int id : ids) picked.push_back(find_task(suite, id));
    suite = std::move(picked);
  }
  const std::vector<int> ks = parse_int_list(a.ks);

  Simulator simulator = make_simulator(s);
  const PromptAssets assets = PromptAssets::load(data_dir_of(s) / "prompts");
  GatewayFactory gateways(s, config, env.transport);
  std::mutex library_mutex;
  std::map<int, std::unique_ptr<ToolLibrary>> libraries;

  SampleRunner runner = [&](const DesignTask& task, int sample, const fs::path& run_dir) {
    ToolLibrary* library = nullptr;
    {
      std::lock_guard lock(library_mutex);
      auto& slot = libraries[sample];
      if (!slot) {
        Settings fresh = s;
        fresh.library.clear();
        slot = open_library(fresh, config.workdir / "libraries" / ("sample-" + std::to_string(sample)));
      }
      library = slot.get();
    }
    auto llm = gateways.make(task.task_id, config.llm_model);
    auto mllm = gateways.make(task.task_id, config.mllm_model);
    DesignServices services;
    services.llm = llm.get();
    services.mllm = mllm.get();
    services.simulator = &simulator;
    services.assets = &assets;
    services.library = library;
    return run_design_task(task, config, services, sample, std::nullopt, run_dir);
  };

  const BenchmarkResult result = run_benchmark(suite, config, ks, runner, s.workers);
  const std::string csv = benchmark_csv(result);
  write_file(config.workdir / "results.csv", csv);
  write_file(config.workdir / "results.json", to_json(result).dump(2) + "\n");
  out << csv;
  return 0;
}

struct SizeArgs {
  std::string netlist;
  std::string task;
  std::string objective = "fom";
  int trials = 1000;
  std::string stages = "20,200,2000";
  std::string window = "0.25,0.75";
  std::string out;
  bool include_bias = false;
};

int cmd_size(const Settings& s, const SizeArgs& a, const CliEnvironment& env) {
  std::ostream& out = *env.out;
  std::ifstream in(a.netlist, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + a.netlist);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  ParamSpace space = text.find("* range ") != std::string::npos || text.find("* PARAMS") != std::string::npos
                         ? parse_param_spec(text)
                         : default_param_space(text);
  space = validate_param_space(space);
  for (const auto& note : space.notes) out << "note: " << note << "\n";

  DesignTask task;
  if (!a.task.empty()) {
    task = resolve_task(s, a.task);
  } else {
    const CircuitIR c = parse_netlist_lenient(space.instantiate(space.initial)).circuit;
    task.circuit_type = c.meta.circuit_type;
    task.input_node = c.meta.input.value_or("Vin");
    task.output_node = c.meta.output.empty() ? "Vout" : c.meta.output;
    if (c.meta.supply) task.supply_volts = c.meta.supply->volts;
    task.description = c.title;
  }

  ObjectiveSpec spec;
  spec.target = parse_objective(a.objective).value_or(DesignObjective::fom);
  spec.supply = task.supply_volts;
  BiasSearchOptions bias;
  bias.stages = parse_int_list(a.stages);
  const auto window = parse_double_list(a.window);
  if (window.size() != 2) throw PreconditionError("--window needs two fractions, e.g. 0.25,0.75");
  bias.window_lo = window[0];
  bias.window_hi = window[1];

  Simulator simulator = make_simulator(s);
  const CircuitSizer sizer(simulator, space, task, spec, bias);
  const TrialRecord initial = sizer.run_trial(space.initial, -1);
  if (initial.status == TrialStatus::ok) {
    out << "initial:   " << metrics_line(initial) << "\n";
  } else {
    out << "initial:   " << to_string(initial.status) << " " << initial.error << "\n";
  }

  OptimizeOptions options;
  options.budget = a.trials;
  options.seed = s.seed;
  options.include_bias = a.include_bias;
  options.bias_range = {bias.window_lo * spec.supply, bias.window_hi * spec.supply};
  const OptimizeResult result =
      optimize(space, [&](const ParamValues& p, int id) { return sizer.run_trial(p, id); }, options);
  out << "optimized: " << metrics_line(result.best) << "\n";
  out << "best params:";
  for (const auto& [k, v] : result.best.params) out << " " << k << "=" << format_number(v);
  out << "\n";

  const fs::path dir = a.out.empty() ? fs::path(s.workdir) / "size" : fs::path(a.out);
  write_history(result.history, dir / "history.jsonl");
  write_bytes(dir / "convergence.png", render_convergence(result, "Sizing convergence"));
  write_file(dir / "best.cir", space.instantiate(result.best.params));
  nlohmann::json summary;
  summary["objective"] = std::string(to_string(spec.target));
  summary["initial"] = to_json(initial);
  summary["best"] = to_json(result.best);
  summary["trials"] = result.history.size();
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  out << "history: " << (dir / "history.jsonl").string() << "\n";
  return 0;
}

struct LibraryArgs {
  std::string root;
  std::string netlist;
  std::string task;
  std::string text;
  int limit = 3;
};

int cmd_library_add(const Settings& s, const LibraryArgs& a, const CliEnvironment& env) {
  std::ifstream in(a.netlist, std::ios::binary);
  if (!in) throw PreconditionError("cannot read " + a.netlist);
  std::stringstream buf;
  buf << in.rdbuf();
  const DesignTask task = resolve_task(s, a.task);
  const CircuitIR circuit = parse_netlist_lenient(buf.str()).circuit;
  Simulator simulator = make_simulator(s);
  const CheckReport report = run_pipeline(circuit, task, simulator);
  if (report.verdict != Verdict::pass) {
    *env.out << "verification failed; not added\n" << report.diagnostic_text() << "\n";
    return 1;
  }
  ToolLibrary library(a.root);
  const ToolEntry entry = make_tool_entry(circuit, task, report, "library-add", utc_timestamp());
  const AddResult r = library.add_tool(entry);
  *env.out << (r.stored ? "stored " : "kept existing entry for ") << entry.id() << "\n";
  return 0;
}

int cmd_library_query(const LibraryArgs& a, const CliEnvironment& env) {
  const ToolLibrary library(a.root);
  for (const auto& e : library.query(a.text, static_cast<std::size_t>(a.limit)))
    *env.out << e.id() << "\t" << ToolLibrary::score(a.text, e) << "\t" << e.key.description << "\n";
  return 0;
}

int cmd_library_list(const LibraryArgs& a, const CliEnvironment& env) {
  const ToolLibrary library(a.root);
  for (const auto& e : library.list()) {
    *env.out << e.id() << "\t" << to_string(e.key.circuit_type) << "\t" << e.key.description;
    for (const auto& [k, v] : e.key.specs) *env.out << "\t" << k << "=" << format_number(v);
    *env.out << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, const CliEnvironment& env) {
  CLI::App app{"Analog circuit design with LLM topology generation, simulation feedback and sizing"};
  app.require_subcommand(1);
  Settings s;

  DesignArgs design_args;
  CLI::App* design = app.add_subcommand("design", "Design one task (optionally with sizing)");
  add_common_options(*design, s);
  add_llm_options(*design, s);
  design->add_option("--task", design_args.task, "Task id or task JSON file")->required();
  design->add_option("--objective", design_args.objective, "Sizing objective: gain, gbw or fom");
  design->add_option("--attempts", design_args.attempts, "Maximum design attempts");
  design->add_option("--sample", design_args.sample, "Sample index");
  design->add_option("--budget", design_args.budget, "Sizing trials when --objective is given");

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Run the benchmark and report Pass@k");
  add_common_options(*bench, s);
  add_llm_options(*bench, s);
  bench->add_option("--suite", bench_args.suite, "Task registry file (default: shipped registry)");
  bench->add_option("--tasks", bench_args.tasks, "Comma-separated task ids to run");
  bench->add_option("--n", bench_args.n, "Samples per task");
  bench->add_option("--k", bench_args.ks, "Comma-separated k values");
  bench->add_option("--workers", s.workers, "Samples run in parallel");

  SizeArgs size_args;
  CLI::App* size = app.add_subcommand("size", "Size a parameterized netlist");
  add_common_options(*size, s);
  size->add_option("--netlist", size_args.netlist, "Parameter spec or plain netlist")->required();
  size->add_option("--task", size_args.task, "Task id or JSON file giving the node roles");
  size->add_option("--objective", size_args.objective, "gain, gbw or fom");
  size->add_option("--trials", size_args.trials, "Trial budget");
  size->add_option("--stages", size_args.stages, "Bias search points per stage, e.g. 20,200,2000");
  size->add_option("--window", size_args.window, "Bias window as supply fractions, e.g. 0.25,0.75");
  size->add_option("--out", size_args.out, "Output directory (default: <workdir>/size)");
  size->add_flag("--include-bias", size_args.include_bias, "Optimize the bias with TPE instead of searching it");

  LibraryArgs lib_args;
  CLI::App* library = app.add_subcommand("library", "Manage a tool library");
  library->require_subcommand(1);
  CLI::App* lib_add = library->add_subcommand("add", "Verify a netlist and archive it");
  add_common_options(*lib_add, s);
  lib_add->add_option("--root", lib_args.root, "Library directory")->required();
  lib_add->add_option("--netlist", lib_args.netlist, "Netlist file")->required();
  lib_add->add_option("--task", lib_args.task, "Task id or JSON file")->required();
  CLI::App* lib_query = library->add_subcommand("query", "Rank entries for a description");
  lib_query->add_option("--root", lib_args.root, "Library directory")->required();
  lib_query->add_option("--text", lib_args.text, "Task description")->required();
  lib_query->add_option("--limit", lib_args.limit, "Maximum entries");
  CLI::App* lib_list = library->add_subcommand("list", "List entries");
  lib_list->add_option("--root", lib_args.root, "Library directory")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    *env.out << o.str();
    *env.err << er.str();
    return code == 0 ? 0 : 2;
  }

  try {
    if (!s.config_file.empty()) {
      // Config file first, then the command line again so explicit flags win.
      apply_config_file(s, s.config_file);
      app.parse(static_cast<int>(argv.size()), argv.data());
    }
    if (design->parsed()) return cmd_design(s, design_args, env);
    if (bench->parsed()) return cmd_bench(s, bench_args, env);
    if (size->parsed()) return cmd_size(s, size_args, env);
    if (lib_add->parsed()) return cmd_library_add(s, lib_args, env);
    if (lib_query->parsed()) return cmd_library_query(lib_args, env);
    if (lib_list->parsed()) return cmd_library_list(lib_args, env);
  } catch (const std::exception& e) {
    *env.err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace anaforge
