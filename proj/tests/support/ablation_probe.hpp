#pragma once

// Runs the design loop once per ablation flag and reports which aspects of
// the run changed relative to the default configuration.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include "anaforge/orchestrator.hpp"

namespace anaforge::testing {

struct AblationSnapshot {
  std::vector<PromptSection> sections;  // of the first design prompt
  int attempts = 0;
  std::vector<std::string> tools;
  std::size_t archived = 0;  // library entries added by the basic task
};

struct AblationProbe {
  std::filesystem::path data_dir;
  std::filesystem::path fixture_dir;  // tests/fixtures
  std::filesystem::path scratch;
  const Simulator* simulator = nullptr;

  /// Task 23 (composite, answered with a decaying oscillator so the repair
  /// loop runs) and task 1 (basic, answered with a passing amplifier so it
  /// is archived).
  AblationSnapshot run(const Ablations& ablations, const std::string& label) const {
    const PromptAssets assets = PromptAssets::load(data_dir / "prompts");
    const auto registry = load_task_registry(data_dir / "benchmark_tasks.json");
    std::vector<ScriptedProvider::Rule> rules{
        {"Analyze the attached waveform", "The oscillation decays; increase the loop gain above 29.", {}},
        {"a common-source amplifier with a resistive load", embed_code_block(read(fixture_dir / "verify/good_amp.cir")), {}},
        {"", embed_code_block(read(fixture_dir / "verify/decaying_osc.cir")), {}},
    };
    LlmGateway llm(GatewayMode::live, std::make_unique<ScriptedProvider>(rules), nullptr);
    const std::filesystem::path lib_dir = scratch / ("library-" + label);
    copy_library(data_dir / "library_seed", lib_dir);
    ToolLibrary library(lib_dir);
    const std::size_t before = library.list().size();

    DesignServices services;
    services.llm = &llm;
    services.mllm = &llm;
    services.simulator = simulator;
    services.assets = &assets;
    services.library = &library;
    services.pipeline.render_images = true;
    RunConfig config;
    config.ablations = ablations;

    AblationSnapshot snap;
    const DesignTask composite = find_task(registry, 23);
    const TaskResult r = run_design_task(composite, config, services);
    const DesignPrompt expected =
        build_design_prompt(assets, composite, library_tools(library, composite, ablations), prompt_options(ablations));
    if (r.attempts.empty() || r.attempts.front().prompt != expected.text())
      throw Error("design loop did not send the prompt built from its options");
    snap.sections = expected.sections;
    snap.attempts = static_cast<int>(r.attempts.size());
    snap.tools = r.tools;

    run_design_task(find_task(registry, 1), config, services);
    snap.archived = library.list().size() - before;
    return snap;
  }

  /// Names of the aspects that differ: "section:<id>", "attempts", "tools",
  /// "archived".
  static std::set<std::string> diff(const AblationSnapshot& a, const AblationSnapshot& b) {
    std::set<std::string> out;
    std::set<std::string> ids;
    for (const auto& s : a.sections) ids.insert(s.id);
    for (const auto& s : b.sections) ids.insert(s.id);
    for (const auto& id : ids) {
      const std::string* ta = text_of(a, id);
      const std::string* tb = text_of(b, id);
      if (!ta || !tb || *ta != *tb) out.insert("section:" + id);
    }
    if (a.attempts != b.attempts) out.insert("attempts");
    if (a.tools != b.tools) out.insert("tools");
    if (a.archived != b.archived) out.insert("archived");
    return out;
  }

  struct Case {
    std::string flag;
    Ablations ablations;
    std::set<std::string> expected;
  };

  static std::vector<Case> cases() {
    std::vector<Case> out;
    Ablations a;
    a.no_cot = true;
    out.push_back({"no_cot", a, {"section:chain_of_thought"}});
    a = {};
    a.no_incontext = true;
    out.push_back({"no_incontext", a, {"section:example"}});
    a = {};
    a.no_feedback = true;
    out.push_back({"no_feedback", a, {"attempts"}});
    a = {};
    a.no_library = true;
    out.push_back({"no_library", a, {"section:tools", "tools", "archived"}});
    a = {};
    a.repr = Representation::plain_netlist;
    out.push_back({"repr", a, {"section:framing", "section:example"}});
    return out;
  }

 private:
  static std::string read(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static const std::string* text_of(const AblationSnapshot& s, const std::string& id) {
    for (const auto& sec : s.sections)
      if (sec.id == id) return &sec.text;
    return nullptr;
  }

  static std::vector<ToolEntry> library_tools(const ToolLibrary& library, const DesignTask& task, const Ablations& a) {
    if (a.no_library || !task.is_composite) return {};
    return library.query(tool_query(task));
  }
};

}  // namespace anaforge::testing
