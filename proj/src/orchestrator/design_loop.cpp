#include <algorithm>
#include <fstream>

#include "anaforge/netlist.hpp"
#include "anaforge/orchestrator.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace fs = std::filesystem;

namespace {

CheckReport requirement_failure(std::string_view template_id, DiagnosticData data = {}) {
  CheckReport report;
  report.verdict = Verdict::fail;
  report.stages_run = {CheckStage::requirement};
  report.failed_stage = CheckStage::requirement;
  report.diagnostics.push_back(Diagnostic::make(CheckStage::requirement, template_id, std::move(data)));
  return report;
}

/// Adds tool subcircuits the response instantiates without defining them.
void link_tools(CircuitIR& circuit, const std::vector<ToolEntry>& tools) {
  for (const auto& tool : tools) {
    const auto& def = tool.value.subcircuit;
    if (circuit.find_subcircuit(def.name)) continue;
    const bool used = std::any_of(circuit.components.begin(), circuit.components.end(), [&](const Component& c) {
      return c.kind == ComponentKind::subckt_instance && iequals(c.model, def.name);
    });
    if (!used) continue;
    circuit.add_subcircuit(def);
    for (const auto& m : def.models)
      if (!circuit.find_model(m.name)) circuit.models.push_back(m);
  }
}

struct Verified {
  std::optional<CircuitIR> circuit;
  std::string netlist;
  CheckReport report;
};

Verified verify_response(const std::string& response, const DesignTask& task, const std::vector<ToolEntry>& tools,
                         const DesignServices& services, const PipelineOptions& pipeline) {
  Verified v;
  try {
    v.netlist = extract_payload(response).text;
  } catch (const NoCodeBlock&) {
    v.report = requirement_failure("no_code_block");
    return v;
  }
  CircuitIR circuit;
  try {
    circuit = parse_netlist_lenient(v.netlist).circuit;
  } catch (const Error& e) {
    v.report = requirement_failure("parse_error", {{"reason", std::string(e.what())}});
    return v;
  }
  link_tools(circuit, tools);
  v.report = run_pipeline(circuit, task, *services.simulator, pipeline);
  v.circuit = std::move(circuit);
  return v;
}

/// The image shown to the multimodal model: the transient when there is one,
/// else the AC or DC response, else the first image.
const WaveformImage* feedback_image(const CheckReport& report) {
  if (!report.failed_stage || *report.failed_stage == CheckStage::requirement ||
      *report.failed_stage == CheckStage::op_point)
    return nullptr;
  for (const char* id : {"tran", "ac", "dc", "dc_up", "fft"})
    for (const auto& img : report.waveform_images)
      if (img.analysis == id) return &img;
  return report.waveform_images.empty() ? nullptr : &report.waveform_images.front();
}

void add_usage(Usage& total, const Usage& u) {
  total.prompt_tokens += u.prompt_tokens;
  total.completion_tokens += u.completion_tokens;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace

void RunConfig::validate() const {
  if (attempts_max < 1) throw PreconditionError("attempts_max must be at least 1");
  if (samples_n < 1) throw PreconditionError("samples_n must be at least 1");
  if (mode != GatewayMode::live && !transcript)
    throw PreconditionError(std::string(to_string(mode)) + " mode needs a transcript path");
}

fs::path RunConfig::transcript_for(int task_id) const {
  if (!transcript) throw PreconditionError("no transcript path configured");
  if (fs::is_directory(*transcript) || !transcript->has_extension())
    return *transcript / ("task-" + std::to_string(task_id) + ".jsonl");
  return *transcript;
}

std::string tool_query(const DesignTask& task) {
  std::string query = task.description;
  for (CircuitType t : task.required_tools) query += " " + std::string(to_string(t));
  return query;
}

DesignPromptOptions prompt_options(const Ablations& ablations, std::optional<DesignObjective> objective) {
  DesignPromptOptions o;
  o.toggles.chain_of_thought = !ablations.no_cot;
  o.toggles.in_context_example = !ablations.no_incontext;
  o.representation = ablations.repr;
  o.objective = objective;
  return o;
}

nlohmann::json to_json(const TaskResult& result) {
  nlohmann::json j;
  j["task_id"] = result.task_id;
  j["sample"] = result.sample;
  j["verdict"] = result.final_verdict == Verdict::pass ? "pass" : "fail";
  j["attempts"] = nlohmann::json::array();
  for (const auto& a : result.attempts) {
    nlohmann::json aj;
    aj["prompt"] = a.prompt;
    aj["response"] = a.response;
    aj["netlist"] = a.netlist;
    aj["report"] = to_json(a.report);
    if (a.waveform_analysis) aj["waveform_analysis"] = *a.waveform_analysis;
    j["attempts"].push_back(std::move(aj));
  }
  if (result.final_circuit) {
    try {
      j["final_netlist"] = emit_netlist(*result.final_circuit);
    } catch (const Error&) {
      j["final_netlist"] = nullptr;
    }
  }
  j["tokens_used"] = {{"prompt", result.tokens_used.prompt_tokens},
                      {"completion", result.tokens_used.completion_tokens}};
  j["tools"] = result.tools;
  j["warnings"] = result.warnings;
  if (!result.error.empty()) j["error"] = result.error;
  return j;
}

void write_run_directory(const TaskResult& result, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < result.attempts.size(); ++i) {
    const auto& a = result.attempts[i];
    const fs::path adir = dir / ("attempt-" + std::to_string(i + 1));
    fs::create_directories(adir);
    write_text(adir / "prompt.txt", a.prompt);
    write_text(adir / "response.txt", a.response);
    if (!a.netlist.empty()) write_text(adir / "netlist.cir", a.netlist);
    if (a.waveform_analysis) write_text(adir / "waveform_analysis.txt", *a.waveform_analysis);
    write_report(a.report, adir);
  }
  write_text(dir / "result.json", to_json(result).dump(2) + "\n");
}

TaskResult run_design_task(const DesignTask& task, const RunConfig& config, DesignServices& services, int sample,
                           std::optional<DesignObjective> objective, const std::optional<fs::path>& run_dir) {
  config.validate();
  if (!services.llm || !services.simulator || !services.assets)
    throw PreconditionError("run_design_task needs an LLM gateway, a simulator and prompt assets");

  TaskResult result;
  result.task_id = task.task_id;
  result.sample = sample;
  if (run_dir) fs::remove_all(*run_dir);

  std::vector<ToolEntry> tools;
  if (task.is_composite && !config.ablations.no_library && services.library) {
    tools = services.library->query(tool_query(task));
  }
  for (const auto& t : tools) result.tools.push_back(t.id());

  const DesignPrompt prompt = build_design_prompt(*services.assets, task, tools, prompt_options(config.ablations, objective));
  result.warnings = prompt.warnings;

  ChatRequest conversation;
  conversation.params.temperature = config.temperature;
  conversation.params.top_p = config.top_p;
  conversation.params.model = config.llm_model;
  conversation.params.sample = sample;
  conversation.messages.push_back({"user", prompt.text(), {}});

  const int attempts_max = config.ablations.no_feedback ? 1 : config.attempts_max;
  for (int attempt = 0; attempt < attempts_max; ++attempt) {
    AttemptRecord record;
    record.prompt = conversation.messages.back().text;
    ChatResponse response;
    try {
      response = services.llm->complete(conversation);
    } catch (const Error& e) {
      result.error = e.what();
      break;
    }
    add_usage(result.tokens_used, response.usage);
    record.response = response.text;
    conversation.messages.push_back({"assistant", response.text, {}});

    // Engine decks, raw files and logs are kept in the run directory.
    PipelineOptions pipeline = services.pipeline;
    if (run_dir) pipeline.workdir = *run_dir / ("attempt-" + std::to_string(attempt + 1)) / "sim";
    Verified v = verify_response(response.text, task, tools, services, pipeline);
    record.netlist = v.netlist;
    record.report = std::move(v.report);

    if (record.report.verdict == Verdict::pass) {
      result.final_verdict = Verdict::pass;
      result.final_circuit = std::move(v.circuit);
      result.attempts.push_back(std::move(record));
      if (!task.is_composite && !config.ablations.no_library && services.library) {
        try {
          const std::string run_id = "task-" + std::to_string(task.task_id) + "-sample-" + std::to_string(sample);
          const ToolEntry entry = make_tool_entry(*result.final_circuit, task, result.attempts.back().report, run_id,
                                                  utc_timestamp());
          services.library->add_tool(entry);
        } catch (const Error& e) {
          result.warnings.push_back(std::string("not archived: ") + e.what());
        }
      }
      break;
    }

    const bool last = attempt + 1 >= attempts_max;
    if (!last) {
      const WaveformImage* image = feedback_image(record.report);
      if (image && services.mllm) {
        ChatRequest analysis;
        analysis.params.temperature = config.temperature;
        analysis.params.top_p = config.top_p;
        analysis.params.model = config.mllm_model;
        analysis.params.sample = sample;
        analysis.messages.push_back({"user",
                                     build_waveform_analysis_prompt(*services.assets, task,
                                                                    expectation_for(*services.assets, task),
                                                                    testbench_context(*services.assets, task)),
                                     {image->png}});
        try {
          const ChatResponse r = services.mllm->complete_multimodal(analysis);
          add_usage(result.tokens_used, r.usage);
          record.waveform_analysis = r.text;
        } catch (const UnsupportedByProvider& e) {
          result.warnings.push_back(std::string("waveform analysis skipped: ") + e.what());
        } catch (const Error& e) {
          result.error = e.what();
          result.attempts.push_back(std::move(record));
          break;
        }
      }
      conversation.messages.push_back(
          {"user", build_repair_prompt(*services.assets, record.report, record.waveform_analysis), {}});
    }
    result.attempts.push_back(std::move(record));
  }

  if (run_dir) write_run_directory(result, *run_dir);
  return result;
}

}  // namespace anaforge
