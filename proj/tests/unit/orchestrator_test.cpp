#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>

#include "../support/ablation_probe.hpp"
#include "anaforge/cli.hpp"
#include "anaforge/orchestrator.hpp"
#include "test_support.hpp"

namespace anaforge {
namespace {

namespace fs = std::filesystem;
using testing::read_fixture;
using testing::shared_simulator;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "anaforge-orchestrator-test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// ---------------------------------------------------------------------------
// pass@k

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

/// 1 - C(n-c,k)/C(n,k) from exact integer binomials (exact for n <= 60).
double pass_at_k_oracle(int n, int c, int k) {
  const std::uint64_t total = binomial(n, k);
  const std::uint64_t fail = binomial(n - c, k);
  return static_cast<double>(static_cast<long double>(total - fail) / static_cast<long double>(total));
}

TEST(PassAtK, MatchesTheRationalOracle) {
  double worst = 0.0;
  for (int n = 1; n <= 30; ++n)
    for (int k = 1; k <= std::min(5, n); ++k)
      for (int c = 0; c <= n; ++c) worst = std::max(worst, std::abs(pass_at_k(n, c, k) - pass_at_k_oracle(n, c, k)));
  EXPECT_LE(worst, 1e-12);
}

TEST(PassAtK, ReferenceValues) {
  EXPECT_NEAR(pass_at_k(30, 16, 5), 0.986, 5e-4);
  EXPECT_DOUBLE_EQ(pass_at_k(30, 0, 5), 0.0);
  EXPECT_DOUBLE_EQ(pass_at_k(30, 30, 1), 1.0);
  EXPECT_DOUBLE_EQ(pass_at_k(30, 26, 5), 1.0);  // n - c < k
  EXPECT_NEAR(pass_at_k(30, 3, 1), 0.1, 1e-15);
}

TEST(PassAtK, MonotoneInPassesAndK) {
  for (int c = 0; c < 30; ++c) {
    for (int k = 1; k <= 5; ++k) {
      EXPECT_LE(pass_at_k(30, c, k), pass_at_k(30, c + 1, k));
      if (k < 5) {
        EXPECT_LE(pass_at_k(30, c, k), pass_at_k(30, c, k + 1));
      }
    }
  }
}

TEST(PassAtK, RejectsInvalidArguments) {
  EXPECT_THROW(pass_at_k(5, 6, 1), DomainError);
  EXPECT_THROW(pass_at_k(5, -1, 1), DomainError);
  EXPECT_THROW(pass_at_k(5, 2, 0), DomainError);
  EXPECT_THROW(pass_at_k(5, 2, 6), DomainError);
}

// ---------------------------------------------------------------------------
// Benchmark summaries

TEST(Benchmark, SummaryAveragesAndCountsSolvedTasks) {
  std::vector<bool> half(10, false);
  for (int i = 0; i < 5; ++i) half[static_cast<std::size_t>(i)] = true;
  const auto result = summarize_benchmark({{1, std::vector<bool>(10, true)}, {2, half}, {3, std::vector<bool>(10, false)}},
                                          {1, 5});
  ASSERT_EQ(result.tasks.size(), 3u);
  EXPECT_EQ(result.solved, 2);
  EXPECT_DOUBLE_EQ(result.tasks[1].pass_at_k.at(1), 0.5);
  EXPECT_NEAR(result.average.at(1), 0.5, 1e-12);
  EXPECT_NEAR(result.average.at(5), (1.0 + pass_at_k(10, 5, 5)) / 3.0, 1e-12);

  const std::string csv = benchmark_csv(result);
  EXPECT_NE(csv.find("task_id,n,passes,pass@1,pass@5\n"), std::string::npos);
  EXPECT_NE(csv.find("1,10,10,100.0,100.0\n"), std::string::npos);
  EXPECT_NE(csv.find("2,10,5,50.0,"), std::string::npos);
  EXPECT_NE(csv.find("average,,,50.0,"), std::string::npos);
  EXPECT_NE(csv.find("solved,2/3\n"), std::string::npos);
  EXPECT_EQ(to_json(result)["solved"], 2);
}

TEST(Benchmark, RunsBasicTasksBeforeCompositesAndCapturesErrors) {
  const auto registry = load_task_registry(fs::path(ANAFORGE_DATA_DIR) / "benchmark_tasks.json");
  const std::vector<DesignTask> suite{find_task(registry, 23), find_task(registry, 1), find_task(registry, 9)};
  RunConfig config;
  config.samples_n = 6;
  config.workdir = scratch_dir("bench");
  std::mutex m;
  std::map<int, std::vector<int>> order;  // sample -> task ids in run order
  SampleRunner runner = [&](const DesignTask& task, int sample, const fs::path&) {
    {
      std::lock_guard lock(m);
      order[sample].push_back(task.task_id);
    }
    if (task.task_id == 9) throw Error("engine exploded");
    TaskResult r;
    r.task_id = task.task_id;
    r.sample = sample;
    r.final_verdict = (task.task_id == 1 || sample % 2 == 0) ? Verdict::pass : Verdict::fail;
    return r;
  };
  std::vector<TaskResult> results;
  const auto bench = run_benchmark(suite, config, {1, 5}, runner, 3, &results);
  ASSERT_EQ(order.size(), 6u);
  for (const auto& [sample, ids] : order) EXPECT_EQ(ids.front(), 1) << "sample " << sample;
  EXPECT_EQ(results.size(), 18u);
  ASSERT_EQ(bench.tasks.size(), 3u);
  EXPECT_EQ(bench.tasks[0].task_id, 23);
  EXPECT_EQ(bench.tasks[0].passes(), 3);
  EXPECT_EQ(bench.tasks[1].passes(), 6);
  EXPECT_EQ(bench.tasks[2].passes(), 0);
  const auto failed = std::find_if(results.begin(), results.end(), [](const TaskResult& r) { return r.task_id == 9; });
  ASSERT_NE(failed, results.end());
  EXPECT_EQ(failed->error, "engine exploded");
  EXPECT_EQ(bench.solved, 2);
}

// ---------------------------------------------------------------------------
// Design loop

class DesignLoop : public ::testing::Test {
 protected:
  void SetUp() override {
    assets_ = PromptAssets::load(fs::path(ANAFORGE_DATA_DIR) / "prompts");
    registry_ = load_task_registry(fs::path(ANAFORGE_DATA_DIR) / "benchmark_tasks.json");
  }

  static std::string block(const std::string& fixture) { return embed_code_block(read_fixture(fixture)); }

  TaskResult run(int task_id, std::vector<ScriptedProvider::Rule> rules, RunConfig config = {},
                 ToolLibrary* library = nullptr, LlmGateway** gateway_out = nullptr) {
    gateway_ = std::make_unique<LlmGateway>(GatewayMode::live, std::make_unique<ScriptedProvider>(std::move(rules)),
                                            nullptr);
    DesignServices services;
    services.llm = gateway_.get();
    services.mllm = gateway_.get();
    services.simulator = &shared_simulator();
    services.assets = &assets_;
    services.library = library;
    if (gateway_out) *gateway_out = gateway_.get();
    return run_design_task(find_task(registry_, task_id), config, services);
  }

  PromptAssets assets_;
  std::vector<DesignTask> registry_;
  std::unique_ptr<LlmGateway> gateway_;
};

TEST_F(DesignLoop, PassingFirstAnswerStopsAndArchivesTheTool) {
  const fs::path dir = scratch_dir("archive");
  ToolLibrary library(dir / "lib");
  const TaskResult r = run(1, {{"", block("verify/good_amp.cir"), {}}}, {}, &library);
  EXPECT_EQ(r.final_verdict, Verdict::pass);
  ASSERT_EQ(r.attempts.size(), 1u);
  ASSERT_TRUE(r.final_circuit.has_value());
  ASSERT_EQ(library.list().size(), 1u);
  EXPECT_EQ(library.list().front().provenance.run_id, "task-1-sample-0");
  EXPECT_TRUE(r.error.empty());
}

TEST_F(DesignLoop, FailingAnswersUseEveryAttemptWithDiagnosticsAndAnalysis) {
  LlmGateway* gw = nullptr;
  const TaskResult r = run(23,
                           {{"Analyze the attached waveform", "The oscillation decays.", {}},
                            {"", block("verify/decaying_osc.cir"), {}}},
                           {}, nullptr, &gw);
  EXPECT_EQ(r.final_verdict, Verdict::fail);
  ASSERT_EQ(r.attempts.size(), 3u);
  EXPECT_EQ(gw->provider_calls(), 5);  // 3 designs + 2 analyses (none after the last attempt)
  EXPECT_TRUE(r.attempts[0].waveform_analysis.has_value());
  EXPECT_FALSE(r.attempts[2].waveform_analysis.has_value());
  EXPECT_NE(r.attempts[1].prompt.find("The oscillation amplitude is too small"), std::string::npos);
  EXPECT_NE(r.attempts[1].prompt.find("The oscillation decays."), std::string::npos);
}

TEST_F(DesignLoop, NoFeedbackMeansOneAttempt) {
  RunConfig config;
  config.ablations.no_feedback = true;
  const TaskResult r = run(23, {{"", block("verify/decaying_osc.cir"), {}}}, config);
  EXPECT_EQ(r.attempts.size(), 1u);
  EXPECT_FALSE(r.attempts[0].waveform_analysis.has_value());
}

TEST_F(DesignLoop, AttemptCapIsConfigurable) {
  RunConfig config;
  config.attempts_max = 2;
  EXPECT_EQ(run(23, {{"", block("verify/decaying_osc.cir"), {}}}, config).attempts.size(), 2u);
  config.attempts_max = 0;
  EXPECT_THROW(run(23, {{"", "x", {}}}, config), PreconditionError);
}

TEST_F(DesignLoop, MissingCodeBlockAndUnparsableNetlistAreRequirementFailures) {
  RunConfig config;
  config.attempts_max = 1;
  TaskResult r = run(1, {{"", "I cannot design this circuit.", {}}}, config);
  ASSERT_EQ(r.attempts.size(), 1u);
  ASSERT_FALSE(r.attempts[0].report.diagnostics.empty());
  EXPECT_EQ(r.attempts[0].report.diagnostics[0].template_id, "no_code_block");
  EXPECT_EQ(r.attempts[0].report.failed_stage, CheckStage::requirement);

  r = run(1, {{"", "```spice\ntitle\nM1 a\n.end\n```", {}}}, config);
  ASSERT_FALSE(r.attempts[0].report.diagnostics.empty());
  EXPECT_EQ(r.attempts[0].report.failed_stage, CheckStage::requirement);
}

TEST_F(DesignLoop, CompositeTaskLinksLibraryToolsItInstantiates) {
  const fs::path dir = scratch_dir("compose");
  copy_library(fs::path(ANAFORGE_DATA_DIR) / "library_seed", dir / "lib");
  ToolLibrary library(dir / "lib");
  const std::string response = read_fixture("../../data/scripts/responses/task23_round2.md");
  const TaskResult r = run(23, {{"", response, {}}}, {}, &library);
  ASSERT_EQ(r.tools.size(), 1u);
  EXPECT_EQ(r.tools[0].rfind("opamp-", 0), 0u);
  EXPECT_NE(r.attempts[0].prompt.find("X1 <Vinp> <Vinn> <Vout> Opamp"), std::string::npos);
  EXPECT_EQ(r.final_verdict, Verdict::pass) << r.attempts[0].report.diagnostic_text();
  ASSERT_TRUE(r.final_circuit.has_value());
  EXPECT_NE(r.final_circuit->find_subcircuit("Opamp"), nullptr);
  EXPECT_EQ(library.list().size(), 1u);  // composites are not archived
}

TEST_F(DesignLoop, ProviderErrorsEndTheRunWithAnError) {
  const fs::path dir = scratch_dir("replay-miss");
  auto store = std::make_shared<TranscriptStore>(dir / "empty.jsonl");
  LlmGateway gw(GatewayMode::replay, nullptr, store);
  DesignServices services;
  services.llm = &gw;
  services.simulator = &shared_simulator();
  services.assets = &assets_;
  RunConfig config;
  config.mode = GatewayMode::replay;
  config.transcript = dir / "empty.jsonl";
  const TaskResult r = run_design_task(find_task(registry_, 1), config, services);
  EXPECT_EQ(r.final_verdict, Verdict::fail);
  EXPECT_TRUE(r.attempts.empty());
  EXPECT_NE(r.error.find("no recorded response"), std::string::npos) << r.error;
}

TEST_F(DesignLoop, RunDirectoryHoldsEveryAttempt) {
  const fs::path dir = scratch_dir("rundir");
  gateway_ = std::make_unique<LlmGateway>(
      GatewayMode::live,
      std::make_unique<ScriptedProvider>(std::vector<ScriptedProvider::Rule>{
          {"Analyze the attached waveform", "Decaying.", {}}, {"", block("verify/decaying_osc.cir"), {}}}),
      nullptr);
  DesignServices services;
  services.llm = gateway_.get();
  services.mllm = gateway_.get();
  services.simulator = &shared_simulator();
  services.assets = &assets_;
  RunConfig config;
  config.attempts_max = 2;
  run_design_task(find_task(registry_, 23), config, services, 4, std::nullopt, dir);
  for (const char* f : {"prompt.txt", "response.txt", "netlist.cir", "report.json", "tran.png", "waveform_analysis.txt"})
    EXPECT_TRUE(fs::exists(dir / "attempt-1" / f)) << f;
  EXPECT_TRUE(fs::exists(dir / "attempt-2" / "report.json"));
  EXPECT_FALSE(fs::exists(dir / "attempt-2" / "waveform_analysis.txt"));
  std::ifstream in(dir / "result.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["sample"], 4);
  EXPECT_EQ(j["verdict"], "fail");
  EXPECT_EQ(j["attempts"].size(), 2u);
}

// ---------------------------------------------------------------------------
// Ablations

TEST(Ablations, EachFlagAltersOnlyItsOwnAspect) {
  testing::AblationProbe probe;
  probe.data_dir = ANAFORGE_DATA_DIR;
  probe.fixture_dir = ANAFORGE_FIXTURE_DIR;
  probe.scratch = scratch_dir("ablations");
  probe.simulator = &shared_simulator();
  const auto baseline = probe.run({}, "baseline");
  EXPECT_EQ(baseline.attempts, 3);
  EXPECT_EQ(baseline.tools.size(), 1u);
  EXPECT_EQ(baseline.archived, 1u);
  for (const auto& c : testing::AblationProbe::cases()) {
    const auto snap = probe.run(c.ablations, c.flag);
    EXPECT_EQ(testing::AblationProbe::diff(baseline, snap), c.expected) << c.flag;
  }
}

TEST(Ablations, PromptOptionsFollowTheFlags) {
  Ablations a;
  a.no_cot = true;
  a.repr = Representation::plain_netlist;
  const auto o = prompt_options(a, DesignObjective::gain);
  EXPECT_FALSE(o.toggles.chain_of_thought);
  EXPECT_TRUE(o.toggles.in_context_example);
  EXPECT_TRUE(o.toggles.tips);
  EXPECT_EQ(o.representation, Representation::plain_netlist);
  EXPECT_EQ(o.objective, DesignObjective::gain);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(RunConfigTest, TranscriptPathsAndValidation) {
  RunConfig c;
  c.mode = GatewayMode::replay;
  EXPECT_THROW(c.validate(), PreconditionError);
  c.transcript = fs::path("some/dir");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.transcript_for(23), fs::path("some/dir/task-23.jsonl"));
  c.transcript = fs::path("all.jsonl");
  EXPECT_EQ(c.transcript_for(23), fs::path("all.jsonl"));
  c.samples_n = 0;
  EXPECT_THROW(c.validate(), PreconditionError);
}

// ---------------------------------------------------------------------------
// Unified generation and optimization

const char* kAmpSpec = R"(```spice
* PARAMS
* range w_M1 min=0.045u max=22.5u log=true kind=width unit=m
* range r_R1 min=2.5k max=40k log=true kind=resistance unit=ohm
* initial_params w_M1=5u r_R1=10k
Common-source amplifier with resistive load
* META type=amplifier
* META input=Vin
* META output=Vout
* META supply=Vdd:5
.model nmos_model nmos (kp=100e-6 vto=0.5 level=1)
M1 Vout Vin 0 0 nmos_model w={w_M1} l=0.045u
R1 Vout Vdd {r_R1}
Vdd Vdd 0 DC 5
Vin Vin 0 DC 0.7 AC 1
.end
```)";

const char* kBadSpec = R"(```spice
* PARAMS
* range w_M1 min=0.045u max=45u log=true kind=width unit=m
* initial_params w_M1=5u
Common-source amplifier with resistive load
M1 Vout Vin 0 0 nmos_model w={w_M1} l=0.045u
.end
```)";

TEST_F(DesignLoop, UnifiedExtractsValidatesAndOptimizes) {
  const fs::path dir = scratch_dir("unified");
  gateway_ = std::make_unique<LlmGateway>(
      GatewayMode::live,
      std::make_unique<ScriptedProvider>(std::vector<ScriptedProvider::Rule>{
          {"parameterized form", kAmpSpec, {}}, {"", block("verify/good_amp.cir"), {}}}),
      nullptr);
  DesignServices services;
  services.llm = gateway_.get();
  services.mllm = gateway_.get();
  services.simulator = &shared_simulator();
  services.assets = &assets_;
  RunConfig config;
  config.bias.window_lo = 0.0;
  config.bias.window_hi = 1.0;
  const auto u = run_unified(find_task(registry_, 1), DesignObjective::gain, config, services, 12, dir);
  ASSERT_EQ(u.design.final_verdict, Verdict::pass);
  EXPECT_NE(u.design.attempts[0].prompt.find("gain"), std::string::npos);
  ASSERT_TRUE(u.space.has_value());
  EXPECT_EQ(u.space->ranges.size(), 2u);
  ASSERT_TRUE(u.initial.has_value());
  EXPECT_EQ(u.initial->status, TrialStatus::ok);
  ASSERT_TRUE(u.optimized.has_value());
  EXPECT_EQ(u.optimized->history.size(), 12u);
  EXPECT_GE(u.optimized->best.objective, u.initial->objective - 1e-9);
  for (const char* f : {"params.spec", "summary.json", "history.jsonl", "convergence.png", "best.cir"})
    EXPECT_TRUE(fs::exists(dir / "sizing" / f)) << f;
}

TEST_F(DesignLoop, UnifiedGivesUpAfterThreeInvalidExtractions) {
  LlmGateway* gw = nullptr;
  gateway_ = std::make_unique<LlmGateway>(
      GatewayMode::live,
      std::make_unique<ScriptedProvider>(std::vector<ScriptedProvider::Rule>{
          {"The parameter specification is invalid", kBadSpec, {}},
          {"parameterized form", kBadSpec, {}},
          {"", block("verify/good_amp.cir"), {}}}),
      nullptr);
  gw = gateway_.get();
  DesignServices services;
  services.llm = gw;
  services.simulator = &shared_simulator();
  services.assets = &assets_;
  try {
    run_unified(find_task(registry_, 1), DesignObjective::fom, {}, services, 5);
    FAIL() << "expected ExtractionFailed";
  } catch (const ExtractionFailed& e) {
    EXPECT_NE(std::string(e.what()).find(kWidthRule), std::string::npos) << e.what();
  }
  EXPECT_EQ(gw->provider_calls(), 4);  // one design + three extractions
}

// ---------------------------------------------------------------------------
// Command line

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args, std::shared_ptr<HttpTransport> transport = nullptr) {
  std::ostringstream out, err;
  CliEnvironment env;
  env.transport = std::move(transport);
  env.out = &out;
  env.err = &err;
  args.insert(args.begin(), "anaforge");
  const int code = run_cli(args, env);
  return {code, out.str(), err.str()};
}

TEST(Cli, ReplayDesignNeedsNoNetwork) {
  const fs::path dir = scratch_dir("cli-replay");
  auto transport = std::make_shared<ForbiddenTransport>();
  const auto r = cli({"design", "--task", "1", "--mode", "replay", "--workdir", dir.string(), "--data-dir",
                      ANAFORGE_DATA_DIR},
                     transport);
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("attempt 1: pass"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("verdict: pass"), std::string::npos);
  EXPECT_EQ(transport->attempts(), 0);
  EXPECT_TRUE(fs::exists(dir / "task-1" / "sample-0" / "result.json"));
}

TEST(Cli, ReplayOscillatorFailsThenPasses) {
  const fs::path dir = scratch_dir("cli-osc");
  auto transport = std::make_shared<ForbiddenTransport>();
  const auto r = cli({"design", "--task", "23", "--mode", "replay", "--workdir", dir.string(), "--data-dir",
                      ANAFORGE_DATA_DIR},
                     transport);
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("attempt 1: fail at function: The oscillation amplitude is too small"), std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("attempt 2: pass"), std::string::npos);
  EXPECT_EQ(transport->attempts(), 0);
}

TEST(Cli, ReplayMissIsReportedAsFailure) {
  const fs::path dir = scratch_dir("cli-miss");
  const auto r = cli({"design", "--task", "1", "--mode", "replay", "--no-cot", "--workdir", dir.string(),
                      "--data-dir", ANAFORGE_DATA_DIR},
                     std::make_shared<ForbiddenTransport>());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("error: "), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("verdict: fail"), std::string::npos);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"design"}).code, 2);
  EXPECT_EQ(cli({"design", "--task", "1", "--mode", "sideways"}).code, 2);
  const auto help = cli({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("bench"), std::string::npos);
}

TEST(Cli, SizeRejectsAWidthOutsideTheRule) {
  const fs::path dir = scratch_dir("cli-size");
  std::ofstream(dir / "bad.spec") << "* PARAMS\n* range w_M1 min=1u max=1000u log=true kind=width\n"
                                  << "* initial_params w_M1=10u\ntitle\nM1 d g 0 0 nmos_model w={w_M1} l=1u\n.end\n";
  const auto r = cli({"size", "--netlist", (dir / "bad.spec").string(), "--workdir", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Transistor width (W) should be within 1"), std::string::npos) << r.err;
}

TEST(Cli, SizeAPlainNetlist) {
  const fs::path dir = scratch_dir("cli-size-plain");
  const auto r = cli({"size", "--netlist", testing::fixture_path("verify/good_amp.cir"), "--objective", "gain",
                      "--trials", "6", "--window", "0,1", "--out", (dir / "out").string(), "--data-dir",
                      ANAFORGE_DATA_DIR});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("optimized: gain_db="), std::string::npos) << r.out;
  for (const char* f : {"history.jsonl", "convergence.png", "best.cir", "summary.json"})
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
}

TEST(Cli, LibraryListAndQuery) {
  const std::string seed = std::string(ANAFORGE_DATA_DIR) + "/library_seed";
  auto r = cli({"library", "list", "--root", seed});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("opamp-"), std::string::npos);
  r = cli({"library", "query", "--root", seed, "--text", "op-amp based integrator"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("opamp-"), std::string::npos);
}

TEST(Cli, BenchWithScriptedProvider) {
  const fs::path dir = scratch_dir("cli-bench");
  const auto r = cli({"bench", "--tasks", "1,23", "--n", "2", "--k", "1", "--workers", "2", "--provider", "scripted",
                      "--script", std::string(ANAFORGE_DATA_DIR) + "/scripts/fixtures.json", "--workdir", dir.string(),
                      "--data-dir", ANAFORGE_DATA_DIR});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("1,2,2,100.0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("23,2,2,100.0\n"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "results.json"));
}

}  // namespace
}  // namespace anaforge
