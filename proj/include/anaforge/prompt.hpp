#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/library.hpp"
#include "anaforge/task.hpp"

namespace anaforge {

struct CheckReport;

// ---------------------------------------------------------------------------
// Templates and assets

/// Fills `{{name}}` markers. Throws PreconditionError naming any marker left
/// without a value. Single braces are left untouched.
std::string fill_slots(std::string_view body, const std::map<std::string, std::string>& slots);

struct TypeExpectation {
  /// Expected behaviour, with an `{{output}}` slot ("Vout should exhibit
  /// periodic oscillations.").
  std::string expectation;
  /// Testbench description with `{{input}}`, `{{output}}`, `{{vdd}}` slots.
  std::string context;
};

/// Prompt template files loaded from a directory (default
/// `<data>/prompts`). Editing the files changes prompts without code
/// changes; rendering is a pure function of the assets and its arguments.
struct PromptAssets {
  std::string framing;                  // design_framing.txt
  std::string representation_annotated; // representation_annotated.txt
  std::string representation_plain;     // representation_plain.txt
  std::string tool_intro;               // tool_intro.txt
  std::string opamp_tool_note;          // opamp_tool_note.txt
  std::string in_context_example;       // in_context_example.txt
  std::string tips;                     // tips.txt
  std::string chain_of_thought;         // chain_of_thought.txt
  std::string question;                 // question.txt
  std::string objective;                // objective.txt
  std::string repair;                   // repair.txt
  std::string repair_analysis;          // repair_analysis.txt
  std::string waveform_analysis;        // waveform_analysis.txt
  std::string extraction;               // extraction.txt
  std::map<CircuitType, TypeExpectation> expectations;  // expectations.json

  static PromptAssets load(const std::filesystem::path& dir);
};

/// Data directory: $ANAFORGE_DATA_DIR, else the build-time default.
std::filesystem::path default_data_dir();

/// Benchmark registry (`<data>/benchmark_tasks.json`), ordered by id.
std::vector<DesignTask> load_task_registry(const std::filesystem::path& path);
/// One task of a registry; throws PreconditionError for an unknown id.
DesignTask find_task(const std::vector<DesignTask>& registry, int task_id);
/// A single task from a JSON document (same fields as a registry entry).
DesignTask task_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Design prompt

struct PromptToggles {
  bool in_context_example = true;
  bool chain_of_thought = true;
  bool tips = true;
};

/// How the LLM is asked to write circuits: SPICE with `* META` role
/// annotations (default) or a plain SPICE netlist (ablation).
enum class Representation { annotated_netlist, plain_netlist };
std::string_view to_string(Representation repr);
std::optional<Representation> representation_from_string(std::string_view text);

enum class DesignObjective { gain, gbw, fom };
std::string_view to_string(DesignObjective objective);
std::optional<DesignObjective> design_objective_from_string(std::string_view text);

struct DesignPromptOptions {
  PromptToggles toggles;
  Representation representation = Representation::annotated_netlist;
  /// Target-guided sentence for unified generation and optimization.
  std::optional<DesignObjective> objective;
};

struct PromptSection {
  std::string id;  // framing, tools, example, tips, chain_of_thought, question
  std::string text;
};

struct DesignPrompt {
  std::vector<PromptSection> sections;
  std::vector<std::string> warnings;
  /// Sections joined by blank lines.
  std::string text() const;
  const PromptSection* find(std::string_view id) const;
};

/// Framing (with the representation contract); tool section when tools are
/// given; in-context example; tips; chain-of-thought instruction; question.
DesignPrompt build_design_prompt(const PromptAssets& assets, const DesignTask& task,
                                 const std::vector<ToolEntry>& tools, const DesignPromptOptions& options = {});

// ---------------------------------------------------------------------------
// Feedback prompts

/// Round-2 prompt: diagnostics verbatim, optional "Waveform Analysis:"
/// section, rewrite instruction. Throws PreconditionError for a passing
/// report.
std::string build_repair_prompt(const PromptAssets& assets, const CheckReport& report,
                                const std::optional<std::string>& mllm_analysis);

/// Expectation sentence for the task's circuit type, output slot filled.
std::string expectation_for(const PromptAssets& assets, const DesignTask& task);
/// Testbench description for the task's circuit type.
std::string testbench_context(const PromptAssets& assets, const DesignTask& task);

/// Multimodal analysis prompt. Throws PreconditionError for an empty
/// expectation.
std::string build_waveform_analysis_prompt(const PromptAssets& assets, const DesignTask& task,
                                           const std::string& expectation, const std::string& context);

/// Sizing extraction prompt. Throws PreconditionError for an empty netlist.
std::string build_extraction_prompt(const PromptAssets& assets, const std::string& netlist);

// ---------------------------------------------------------------------------
// Response parsing

class NoCodeBlock : public Error {
 public:
  using Error::Error;
};

enum class PayloadKind { netlist, param_spec };
std::string_view to_string(PayloadKind kind);

struct Payload {
  std::string text;
  PayloadKind kind = PayloadKind::netlist;
};

/// The last fenced code block, byte-exact; classified as a parameter spec
/// when it carries `* PARAMS` / `* range` markers. Throws NoCodeBlock.
Payload extract_payload(std::string_view response);

/// Wraps code in a fence that extract_payload returns unchanged.
std::string embed_code_block(std::string_view code, std::string_view language = "spice");

}  // namespace anaforge
