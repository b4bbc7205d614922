#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anaforge/library.hpp"
#include "anaforge/llm.hpp"
#include "anaforge/prompt.hpp"
#include "anaforge/sizing.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

// ---------------------------------------------------------------------------
// Configuration

/// The five rows of the ablation study.
struct Ablations {
  bool no_feedback = false;   // single attempt, no repair loop
  bool no_library = false;    // no tool section, nothing archived
  bool no_cot = false;        // no chain-of-thought instruction
  bool no_incontext = false;  // no in-context example
  Representation repr = Representation::annotated_netlist;
};

struct RunConfig {
  std::string llm_model = "gpt-4.1";
  std::string mllm_model = "gpt-4.1";
  GatewayMode mode = GatewayMode::live;
  int attempts_max = 3;
  int samples_n = 30;
  Ablations ablations;
  std::uint64_t seed = 0;
  std::filesystem::path workdir = "runs";
  /// Transcript file, or a directory holding `task-<id>.jsonl` files.
  std::optional<std::filesystem::path> transcript;
  double temperature = 0.5;
  double top_p = 1.0;
  double extraction_temperature = 0.0;
  /// Bias search used by the unified flow.
  BiasSearchOptions bias;

  /// Throws PreconditionError: attempts_max < 1, samples_n < 1, or record /
  /// replay without a transcript path.
  void validate() const;
  /// Transcript file for one task.
  std::filesystem::path transcript_for(int task_id) const;
};

/// Library query for a composite task: its description plus the names of
/// the circuit kinds it builds on.
std::string tool_query(const DesignTask& task);

/// Design-prompt options implied by the ablation flags.
DesignPromptOptions prompt_options(const Ablations& ablations, std::optional<DesignObjective> objective = {});

// ---------------------------------------------------------------------------
// Results

struct AttemptRecord {
  std::string prompt;
  std::string response;
  std::string netlist;  // extracted code block (empty when none)
  CheckReport report;
  /// Multimodal analysis of the failing waveform, when requested.
  std::optional<std::string> waveform_analysis;
};

struct TaskResult {
  int task_id = 0;
  int sample = 0;
  std::vector<AttemptRecord> attempts;
  Verdict final_verdict = Verdict::fail;
  std::optional<CircuitIR> final_circuit;
  Usage tokens_used;
  /// Tools offered in the design prompt (library ids).
  std::vector<std::string> tools;
  std::vector<std::string> warnings;
  /// Set when the run stopped on an infrastructure error (replay miss,
  /// provider failure); the verdict is then fail.
  std::string error;
};

nlohmann::json to_json(const TaskResult& result);

// ---------------------------------------------------------------------------
// Design loop

/// Collaborators of a design run. `mllm` may equal `llm`; `library` may be
/// null (no tools, nothing archived).
struct DesignServices {
  LlmGateway* llm = nullptr;
  LlmGateway* mllm = nullptr;
  const Simulator* simulator = nullptr;
  const PromptAssets* assets = nullptr;
  ToolLibrary* library = nullptr;
  PipelineOptions pipeline;
};

/// Up to attempts_max rounds of: (attempt 1) library query for composite
/// tasks, design prompt; (later) waveform analysis by the MLLM when the
/// failure produced an image, repair prompt in the same conversation. Each
/// response's last code block is parsed and verified. A passing basic
/// (non-composite) circuit is archived in the library. When `run_dir` is
/// set it is replaced by the run directory: attempt-<n>/{prompt.txt,
/// response.txt, netlist.cir, waveform_analysis.txt, report.json, *.png,
/// sim/<analysis>/{deck.cir, out.raw, engine.log}} and result.json.
TaskResult run_design_task(const DesignTask& task, const RunConfig& config, DesignServices& services, int sample = 0,
                           std::optional<DesignObjective> objective = {},
                           const std::optional<std::filesystem::path>& run_dir = {});

/// Writes prompts, responses, netlists, reports and images of a result.
void write_run_directory(const TaskResult& result, const std::filesystem::path& dir);

// ---------------------------------------------------------------------------
// Pass@k and the benchmark

/// 1 - C(n-c, k) / C(n, k) in product form; 1 when c > n - k. Throws
/// DomainError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct TaskOutcomes {
  int task_id = 0;
  std::vector<bool> samples;
  std::map<int, double> pass_at_k;
  int passes() const;
};

struct BenchmarkResult {
  std::vector<TaskOutcomes> tasks;
  std::vector<int> ks;
  std::map<int, double> average;
  int solved = 0;
};

/// Pass@k per task for each k (k larger than the sample count is skipped),
/// averages over tasks, and the solved count.
BenchmarkResult summarize_benchmark(const std::vector<std::pair<int, std::vector<bool>>>& outcomes,
                                    const std::vector<int>& ks);

/// Table with one row per task (Pass@k in percent), an average row and the
/// solved count, as comma-separated text.
std::string benchmark_csv(const BenchmarkResult& result);
nlohmann::json to_json(const BenchmarkResult& result);

/// Builds the services of one benchmark sample (its own library copy) and
/// runs tasks in it. Called concurrently for different samples.
using SampleRunner = std::function<TaskResult(const DesignTask& task, int sample, const std::filesystem::path& run_dir)>;

/// Runs samples_n samples of every task (basic tasks before composite ones
/// within a sample, so composites see that sample's archived tools) on up
/// to `workers` threads, then summarizes.
BenchmarkResult run_benchmark(const std::vector<DesignTask>& suite, const RunConfig& config, const std::vector<int>& ks,
                              const SampleRunner& runner, int workers = 1,
                              std::vector<TaskResult>* results = nullptr);

// ---------------------------------------------------------------------------
// Unified generation and optimization

class ExtractionFailed : public Error {
 public:
  using Error::Error;
};

struct UnifiedResult {
  TaskResult design;
  std::optional<ParamSpace> space;
  std::optional<TrialRecord> initial;
  std::optional<OptimizeResult> optimized;
};

/// Design with the target-guided prompt; on pass, extraction (up to 3
/// tries, errors fed back), validation, an evaluation at the initial values
/// and `budget` optimizer trials.
UnifiedResult run_unified(const DesignTask& task, std::optional<DesignObjective> objective, const RunConfig& config,
                          DesignServices& services, int budget,
                          const std::optional<std::filesystem::path>& run_dir = {});

}  // namespace anaforge
