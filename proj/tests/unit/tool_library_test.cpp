#include <filesystem>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "anaforge/library.hpp"
#include "anaforge/netlist.hpp"
#include "anaforge/verification.hpp"
#include "test_support.hpp"

namespace anaforge {
namespace {

namespace fs = std::filesystem;
using testing::read_fixture;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("anaforge_lib_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

DesignTask opamp_task(std::string description = "Op-amp with active current mirror loads") {
  DesignTask t;
  t.task_id = 17;
  t.circuit_type = CircuitType::opamp;
  t.description = std::move(description);
  t.input_node = "Vinp";
  t.extra_inputs = {"Vinn"};
  return t;
}

CheckReport passed(std::map<std::string, double> measurements) {
  CheckReport r;
  r.verdict = Verdict::pass;
  r.measurements = std::move(measurements);
  return r;
}

ToolEntry opamp_entry(double gain_db, std::string description = "Op-amp with active current mirror loads") {
  auto circuit = parse_netlist_lenient(read_fixture("verify/opamp.cir")).circuit;
  return make_tool_entry(circuit, opamp_task(std::move(description)), passed({{"gain_db", gain_db}}), "run",
                         "2026-01-01T00:00:00Z");
}

ToolEntry simple_entry(CircuitType type, const std::string& description, const std::string& fixture,
                       std::optional<std::string> input = "Vin") {
  DesignTask t;
  t.circuit_type = type;
  t.description = description;
  t.input_node = std::move(input);
  auto circuit = parse_netlist_lenient(read_fixture(fixture)).circuit;
  return make_tool_entry(circuit, t, passed({{"vout_op", 1.0}}), "run", "2026-01-01T00:00:00Z");
}

TEST(ToolEntryTest, WrapsVerifiedCircuitAsSubcircuit) {
  auto e = opamp_entry(40);
  EXPECT_EQ(e.value.subcircuit.name, "Opamp");
  EXPECT_EQ(e.value.subcircuit.ports, (std::vector<std::string>{"Vinp", "Vinn", "Vout"}));
  for (const auto& c : e.value.subcircuit.body) EXPECT_NE(c.kind, ComponentKind::vsource) << c.refdes;
  EXPECT_NE(e.value.usage.find("Parameter order: Vinp (the non-inverting input), Vinn (the inverting input), Vout"),
            std::string::npos)
      << e.value.usage;
  EXPECT_NE(e.value.usage.find("X1 <Vinp> <Vinn> <Vout> Opamp"), std::string::npos);
  EXPECT_EQ(e.key.specs.at("gain_db"), 40);
  EXPECT_THROW(make_tool_entry(CircuitIR{}, opamp_task(), CheckReport{}, "r", "t"), PreconditionError);
}

TEST(ToolEntryTest, SubcircuitTextIsInstantiable) {
  auto e = opamp_entry(40);
  std::string deck = "follower\n* META type=amplifier\n* META input=Vin\n* META output=Vout\n* META supply=Vdd:5\n" +
                     e.value.netlist_text + "X1 Vin Vout Vout Opamp\nVdd Vdd 0 DC 5\nVin Vin 0 DC 2.5\n.end\n";
  auto parsed = parse_netlist(deck);
  auto flat = flatten(parsed.circuit);
  EXPECT_TRUE(validate_connectivity(parsed.circuit).empty());
  EXPECT_GT(flat.components.size(), 8u);
  // The follower settles at the input bias: the archived op-amp still works.
  std::vector<AnalysisRequest> op{AnalysisRequest{OpAnalysis{}}};
  auto result = testing::shared_simulator().simulate(parsed.circuit, op);
  EXPECT_NEAR(result.op_point.at("vout"), 2.5, 0.05);
}

TEST(ToolLibraryTest, RetainsBestBySpec) {
  ToolLibrary lib(fresh_dir("best"));
  auto r1 = lib.add_tool(opamp_entry(40));
  EXPECT_TRUE(r1.stored);
  EXPECT_FALSE(r1.replaced);
  auto r2 = lib.add_tool(opamp_entry(55));
  EXPECT_TRUE(r2.stored);
  ASSERT_TRUE(r2.replaced);
  EXPECT_EQ(r2.replaced->key.specs.at("gain_db"), 40);
  auto r3 = lib.add_tool(opamp_entry(30));
  EXPECT_FALSE(r3.stored);
  ASSERT_EQ(lib.list().size(), 1u);
  EXPECT_EQ(lib.list()[0].key.specs.at("gain_db"), 55);
  EXPECT_TRUE(fs::exists(lib.root() / "archive"));
}

TEST(ToolLibraryTest, MonotoneQualityProperty) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    ToolLibrary lib(fresh_dir("mono" + std::to_string(trial)));
    double best = -1e9;
    for (int i = 0; i < 8; ++i) {
      double g = std::uniform_real_distribution<double>(0, 80)(rng);
      best = std::max(best, g);
      lib.add_tool(opamp_entry(g));
      ASSERT_EQ(lib.list().size(), 1u);
      EXPECT_EQ(lib.list()[0].key.specs.at("gain_db"), best);
    }
  }
}

TEST(ToolLibraryTest, DescriptionClassesDoNotShadowEachOther) {
  ToolLibrary lib(fresh_dir("classes"));
  lib.add_tool(opamp_entry(60));
  lib.add_tool(opamp_entry(20, "Cascode op-amp with cascode loads"));
  lib.add_tool(simple_entry(CircuitType::current_mirror, "Cascode current mirror", "verify/current_mirror.cir", std::nullopt));
  EXPECT_EQ(lib.list().size(), 3u);
  // Same class after canonicalisation ("op amp" == "op-amp", plural loads).
  EXPECT_EQ(opamp_entry(1, "op amp with active current-mirror load").id(), opamp_entry(1).id());
}

TEST(ToolLibraryTest, SurvivesRestart) {
  auto dir = fresh_dir("durable");
  {
    ToolLibrary lib(dir);
    lib.add_tool(opamp_entry(42));
  }
  ToolLibrary reopened(dir);
  auto hits = reopened.query("Design an op-amp integrator");
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].key.specs.at("gain_db"), 42);
  EXPECT_EQ(hits[0].value.subcircuit.ports, (std::vector<std::string>{"Vinp", "Vinn", "Vout"}));
  EXPECT_EQ(hits[0].value.usage, opamp_entry(42).value.usage);
  EXPECT_TRUE(fs::exists(dir / "index.json"));
}

TEST(ToolLibraryTest, QueryRanksAndAppliesFloor) {
  ToolLibrary empty(fresh_dir("empty"));
  EXPECT_TRUE(empty.query("Design an op-amp integrator").empty());

  ToolLibrary lib(fresh_dir("query"));
  lib.add_tool(simple_entry(CircuitType::filter, "a passive low-pass filter", "verify/lowpass.cir"));
  lib.add_tool(simple_entry(CircuitType::current_mirror, "Cascode current mirror", "verify/current_mirror.cir", std::nullopt));
  lib.add_tool(opamp_entry(50));
  auto hits = lib.query("Design an op-amp integrator");
  ASSERT_FALSE(hits.empty());
  EXPECT_EQ(hits[0].key.circuit_type, CircuitType::opamp);
  auto synonyms = lib.query("operational amplifier based integrator");
  ASSERT_FALSE(synonyms.empty());
  EXPECT_EQ(synonyms[0].key.circuit_type, CircuitType::opamp);
  EXPECT_EQ(lib.query("Design a low pass filter")[0].key.circuit_type, CircuitType::filter);
  EXPECT_EQ(lib.query("anything at all", 0).size(), 0u);

  ToolLibrary only_opamps(fresh_dir("opamps"));
  only_opamps.add_tool(opamp_entry(50));
  EXPECT_TRUE(only_opamps.query("band-pass filter").empty());
}

TEST(ToolLibraryTest, QueryIsDeterministic) {
  ToolLibrary lib(fresh_dir("det"));
  lib.add_tool(opamp_entry(50));
  lib.add_tool(opamp_entry(30, "Cascode op-amp with cascode loads"));
  lib.add_tool(opamp_entry(45, "2-stage op-amp with active loads"));
  auto a = lib.query("op-amp integrator", 5);
  auto b = lib.query("op-amp integrator", 5);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id(), b[i].id());
  // Equal lexical scores fall back to the higher gain.
  EXPECT_EQ(a[0].key.specs.at("gain_db"), 50);
}

TEST(RenderContextTest, ListsPortOrderAndPreservesInputOrder) {
  EXPECT_EQ(render_context({}), "");
  auto opamp = opamp_entry(50);
  auto mirror = simple_entry(CircuitType::current_mirror, "Cascode current mirror", "verify/current_mirror.cir", std::nullopt);
  auto text = render_context({opamp});
  EXPECT_NE(text.find("Parameter order"), std::string::npos);
  EXPECT_NE(text.find(".subckt Opamp Vinp Vinn Vout"), std::string::npos);
  EXPECT_NE(text.find("gain_db=50"), std::string::npos);
  auto both = render_context({mirror, opamp});
  EXPECT_LT(both.find("Subcircuit CurrentMirror"), both.find("Subcircuit Opamp"));
}

TEST(ToolLibraryTest, ConcurrentAddsAreSerialised) {
  ToolLibrary lib(fresh_dir("concurrent"));
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      for (int i = 0; i < 5; ++i) lib.add_tool(opamp_entry(t * 10 + i));
    });
  for (auto& th : threads) th.join();
  ASSERT_EQ(lib.list().size(), 1u);
  EXPECT_EQ(lib.list()[0].key.specs.at("gain_db"), 34);
  ToolLibrary reopened(lib.root());
  EXPECT_EQ(reopened.list()[0].key.specs.at("gain_db"), 34);
}

}  // namespace
}  // namespace anaforge
