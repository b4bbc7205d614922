#include <fstream>

#include "anaforge/netlist.hpp"
#include "anaforge/orchestrator.hpp"

namespace anaforge {

namespace fs = std::filesystem;

namespace {

constexpr int kExtractionTries = 3;

/// A parameter space that validates and whose initial instance parses.
ParamSpace accept_space(const std::string& response) {
  const Payload payload = extract_payload(response);
  ParamSpace space = validate_param_space(parse_param_spec(payload.text));
  parse_netlist_lenient(space.instantiate(space.initial));
  return space;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

UnifiedResult run_unified(const DesignTask& task, std::optional<DesignObjective> objective, const RunConfig& config,
                          DesignServices& services, int budget, const std::optional<fs::path>& run_dir) {
  UnifiedResult out;
  out.design = run_design_task(task, config, services, 0, objective, run_dir);
  if (out.design.final_verdict != Verdict::pass || !out.design.final_circuit) return out;

  ChatRequest request;
  request.params.temperature = config.extraction_temperature;
  request.params.top_p = config.top_p;
  request.params.model = config.llm_model;
  request.messages.push_back(
      {"user", build_extraction_prompt(*services.assets, emit_netlist(*out.design.final_circuit)), {}});

  std::string last_error;
  for (int attempt = 0; attempt < kExtractionTries && !out.space; ++attempt) {
    const ChatResponse response = services.llm->complete(request);
    try {
      out.space = accept_space(response.text);
    } catch (const Error& e) {
      last_error = e.what();
      request.messages.push_back({"assistant", response.text, {}});
      request.messages.push_back({"user",
                                  "The parameter specification is invalid: " + last_error +
                                      "\nPlease answer again with the complete specification in the required format.",
                                  {}});
    }
  }
  if (!out.space)
    throw ExtractionFailed("no valid parameter space after " + std::to_string(kExtractionTries) +
                           " extraction attempts: " + last_error);

  ObjectiveSpec spec;
  spec.target = objective.value_or(DesignObjective::fom);
  spec.supply = task.supply_volts;
  const CircuitSizer sizer(*services.simulator, *out.space, task, spec, config.bias);
  out.initial = sizer.run_trial(out.space->initial, -1);

  OptimizeOptions options;
  options.budget = budget;
  options.seed = config.seed;
  try {
    out.optimized = optimize(*out.space, [&](const ParamValues& p, int id) { return sizer.run_trial(p, id); }, options);
  } catch (const AllTrialsFailed& e) {
    out.design.warnings.push_back(std::string("sizing: ") + e.what());
  }

  if (run_dir) {
    const fs::path dir = *run_dir / "sizing";
    fs::create_directories(dir);
    write_text(dir / "params.spec", format_param_spec(*out.space));
    nlohmann::json summary;
    summary["objective"] = std::string(to_string(spec.target));
    summary["initial"] = to_json(*out.initial);
    if (out.optimized) {
      summary["best"] = to_json(out.optimized->best);
      write_history(out.optimized->history, dir / "history.jsonl");
      const auto png = render_convergence(*out.optimized, "Sizing convergence");
      std::ofstream(dir / "convergence.png", std::ios::binary)
          .write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
      write_text(dir / "best.cir", out.space->instantiate(out.optimized->best.params));
    }
    write_text(dir / "summary.json", summary.dump(2) + "\n");
  }
  return out;
}

}  // namespace anaforge
