#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "anaforge/netlist.hpp"
#include "anaforge/sizing.hpp"
#include "anaforge/units.hpp"
#include "test_support.hpp"

using namespace anaforge;
using anaforge::testing::read_fixture;
using anaforge::testing::shared_simulator;

namespace {

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
  t.output_node = "Vout";
  return t;
}

SweepFn analytic(std::function<double(double)> f, int* calls = nullptr) {
  return [f, calls](double start, double stop, int points) {
    if (calls) *calls += points;
    std::vector<double> out;
    const double step = (stop - start) / (points - 1);
    for (int i = 0; i < points; ++i) out.push_back(f(i == points - 1 ? stop : start + i * step));
    return out;
  };
}

double final_step(double supply, const BiasSearchOptions& o) {
  double step = (o.window_hi - o.window_lo) * supply / (o.stages[0] - 1);
  for (std::size_t k = 1; k < o.stages.size(); ++k) step = 2.0 * step / (o.stages[k] - 1);
  return step;
}

ParamSpace unit_box(int dims) {
  ParamSpace s;
  for (int d = 0; d < dims; ++d) s.ranges.push_back({"x" + std::to_string(d), 0.0, 1.0, false, "", ParamKind::other});
  return s;
}

TrialRecord surrogate_trial(const ParamValues& p, int id, const std::vector<double>& optimum) {
  TrialRecord r;
  r.trial_id = id;
  r.params = p;
  double v = 0.0;
  for (std::size_t d = 0; d < optimum.size(); ++d) {
    const double x = p.at("x" + std::to_string(d));
    v -= (x - optimum[d]) * (x - optimum[d]);
  }
  r.objective = v;
  return r;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter space

TEST(ParamSpace, ParsesAndValidatesTheReferenceExample) {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  ASSERT_EQ(space.ranges.size(), 2u);
  EXPECT_EQ(space.ranges[0].name, "w_M1");
  EXPECT_DOUBLE_EQ(space.ranges[0].min, 0.045e-6);
  EXPECT_DOUBLE_EQ(space.ranges[0].max, 22.5e-6);
  EXPECT_TRUE(space.ranges[0].log_scale);
  EXPECT_EQ(space.ranges[0].kind, ParamKind::width);
  EXPECT_DOUBLE_EQ(space.ranges[1].min, 5e3);
  EXPECT_DOUBLE_EQ(space.initial.at("r_load"), 10e3);
  EXPECT_EQ(space.placeholders(), (std::vector<std::string>{"w_M1", "r_load"}));
  const std::string deck = space.instantiate(space.initial);
  EXPECT_NE(deck.find("w=5e-06"), std::string::npos);
  EXPECT_NE(deck.find("R1 Vout Vdd 10000"), std::string::npos);
  EXPECT_NO_THROW(parse_netlist_lenient(deck));
}

TEST(ParamSpace, FormatRoundTrips) {
  const ParamSpace a = parse_param_spec(kReferenceSpace);
  const ParamSpace b = parse_param_spec(format_param_spec(a));
  ASSERT_EQ(a.ranges.size(), b.ranges.size());
  for (std::size_t i = 0; i < a.ranges.size(); ++i) {
    EXPECT_EQ(a.ranges[i].name, b.ranges[i].name);
    EXPECT_EQ(a.ranges[i].min, b.ranges[i].min);
    EXPECT_EQ(a.ranges[i].max, b.ranges[i].max);
    EXPECT_EQ(a.ranges[i].log_scale, b.ranges[i].log_scale);
  }
  EXPECT_EQ(a.initial, b.initial);
  EXPECT_EQ(a.builder, b.builder);
}

TEST(ParamSpace, WidthBeyond500TimesLengthIsRejectedNamingTheRule) {
  ParamSpace space = parse_param_spec(kReferenceSpace);
  space.ranges[0].max = 45e-6;
  try {
    validate_param_space(space);
    FAIL() << "expected ConstraintViolation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.parameter(), "w_M1");
    EXPECT_NE(e.rule().find("1–500×"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1000x"), std::string::npos);
  }
}

TEST(ParamSpace, WidthBelowLengthIsRejected) {
  ParamSpace space = parse_param_spec(kReferenceSpace);
  space.ranges[0].min = 0.01e-6;
  EXPECT_THROW(validate_param_space(space), ConstraintViolation);
}

TEST(ParamSpace, WidthPairsWithLengthParameter) {
  ParamSpace space = parse_param_spec(R"(* PARAMS
* range w_M1 min=1u max=100u log=true kind=width
* range l_M1 min=0.5u max=1u log=true kind=length
M1 out in 0 0 nm w={w_M1} l={l_M1}
)");
  EXPECT_NO_THROW(validate_param_space(space));
  space.ranges[0].max = 600e-6;
  EXPECT_THROW(validate_param_space(space), ConstraintViolation);
}

TEST(ParamSpace, EmptySpaceIsRejected) {
  ParamSpace space;
  space.builder = "R1 a 0 1k\n";
  EXPECT_THROW(validate_param_space(space), EmptySpace);
}

TEST(ParamSpace, RangeAndPlaceholderInvariants) {
  ParamSpace space = parse_param_spec(kReferenceSpace);
  space.ranges[1].min = 20e3;  // [20k, 20k] is empty
  EXPECT_THROW(validate_param_space(space), ConstraintViolation);

  space = parse_param_spec(kReferenceSpace);
  space.builder += "C1 Vout 0 {c_out}\n";
  try {
    validate_param_space(space);
    FAIL();
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.parameter(), "c_out");
  }
  space.fixed["c_out"] = 1e-12;
  EXPECT_NO_THROW(validate_param_space(space));

  space = parse_param_spec(kReferenceSpace);
  space.ranges[1].log_scale = true;
  space.ranges[1].min = 0.0;
  EXPECT_THROW(validate_param_space(space), ConstraintViolation);
}

TEST(ParamSpace, InitialValuesAreClampedWithANote) {
  ParamSpace space = parse_param_spec(kReferenceSpace);
  space.initial["r_load"] = 50e3;
  space.initial.erase("w_M1");
  const ParamSpace v = validate_param_space(space);
  EXPECT_DOUBLE_EQ(v.initial.at("r_load"), 20e3);
  EXPECT_NEAR(v.initial.at("w_M1"), std::sqrt(0.045e-6 * 22.5e-6), 1e-12);
  EXPECT_EQ(v.notes.size(), 2u);
}

TEST(ParamSpace, MalformedSpecsAreParseErrors) {
  EXPECT_THROW(parse_param_spec("R1 a 0 1k\n"), ParseError);
  EXPECT_THROW(parse_param_spec("* PARAMS\n* range w_M1 min=1u\n"), ParseError);
  EXPECT_THROW(parse_param_spec("* PARAMS\n* range w_M1 min=abc max=2u\n"), ParseError);
  EXPECT_THROW(parse_param_spec("* PARAMS\n* range w_M1 min=1u max=2u kind=bogus\n"), ParseError);
}

TEST(ParamSpace, DefaultSpaceFromAConcreteNetlist) {
  const ParamSpace space = validate_param_space(default_param_space(read_fixture("verify/good_amp.cir")));
  ASSERT_EQ(space.ranges.size(), 2u);
  const ParamRange* w = space.find("w_M1");
  ASSERT_NE(w, nullptr);
  EXPECT_DOUBLE_EQ(w->min, 0.045e-6);
  EXPECT_NEAR(w->max, 22.5e-6, 1e-15);
  EXPECT_DOUBLE_EQ(space.initial.at("w_M1"), 5e-6);
  EXPECT_DOUBLE_EQ(space.initial.at("r_R1"), 10e3);
  const CircuitIR c = parse_netlist(space.instantiate(space.initial)).circuit;
  EXPECT_DOUBLE_EQ(c.find_component("M1")->params.at("w"), 5e-6);
  EXPECT_DOUBLE_EQ(c.find_component("R1")->params.at("value"), 10e3);
}

// ---------------------------------------------------------------------------
// Bias search

TEST(BiasSearch, IdealInverterFindsHalfSupply) {
  BiasSearchOptions o;
  int calls = 0;
  const BiasResult r = multires_bias_search(analytic([](double v) { return 5.0 - v; }, &calls), 5.0, o);
  EXPECT_NEAR(r.bias, 2.5, final_step(5.0, o));
  EXPECT_NEAR(r.vout, 2.5, final_step(5.0, o));
  EXPECT_EQ(r.sims_used, 2220);
  EXPECT_EQ(calls, 2220);
}

TEST(BiasSearch, SigmoidMidpoint) {
  BiasSearchOptions o;
  const auto f = [](double v) { return 5.0 / (1.0 + std::exp(10.0 * (v - 2.0))); };
  const BiasResult r = multires_bias_search(analytic(f), 5.0, o);
  EXPECT_NEAR(r.bias, 2.0, final_step(5.0, o));
}

TEST(BiasSearch, TiesGoToTheLowerBias) {
  BiasSearchOptions o;
  o.stages = {21};
  o.window_lo = 0.0;
  o.window_hi = 1.0;
  // A flat transfer ties every point.
  const BiasResult r = multires_bias_search(analytic([](double) { return 1.5; }), 5.0, o);
  EXPECT_DOUBLE_EQ(r.bias, 0.0);
}

TEST(BiasSearch, PropertyBudgetAndNeverWorseThanStageOne) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double x0 = 1.3 + 2.4 * uni(rng);
    const double k = 0.5 + 20.0 * uni(rng);
    const bool rising = uni(rng) < 0.5;
    auto f = [=](double v) {
      const double s = 5.0 / (1.0 + std::exp(-k * (v - x0)));
      return rising ? s : 5.0 - s;
    };
    BiasSearchOptions o;
    o.stages = {20, 200, 200};
    o.seed = trial;
    const BiasResult full = multires_bias_search(analytic(f), 5.0, o);
    BiasSearchOptions first = o;
    first.stages = {20};
    const BiasResult coarse = multires_bias_search(analytic(f), 5.0, first);
    EXPECT_LE(full.sims_used, 420);
    EXPECT_LE(std::abs(full.vout - 2.5), std::abs(coarse.vout - 2.5));
    // Monotone transfer crossing 2.5 V inside the window: within one fine step.
    const double fine = 2.0 * (2.0 * 2.5 / 20) / 199 * 2.0 / 199;
    EXPECT_NEAR(full.bias, x0, fine + 1e-12) << "trial " << trial;
  }
}

TEST(BiasSearch, RejectsBadInputsAndFailedSweeps) {
  BiasSearchOptions o;
  o.stages = {};
  EXPECT_THROW(multires_bias_search(analytic([](double v) { return v; }), 5.0, o), PreconditionError);
  o.stages = {20};
  o.window_lo = 0.8;
  EXPECT_THROW(multires_bias_search(analytic([](double v) { return v; }), 5.0, o), PreconditionError);
  SweepFn failing = [](double, double, int) -> std::vector<double> { throw NonConvergence("no dc"); };
  EXPECT_THROW(multires_bias_search(failing, 5.0), BiasSearchFailed);
  EXPECT_THROW(multires_bias_search(analytic([](double) { return std::nan(""); }), 5.0), BiasSearchFailed);
}

TEST(BiasSearch, SeededPhaseStaysInsideTheWindow) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    BiasSearchOptions o;
    o.seed = seed;
    o.stages = {20};
    double lo = 1e9, hi = -1e9;
    SweepFn f = [&](double start, double stop, int points) {
      lo = std::min(lo, start);
      hi = std::max(hi, stop);
      return std::vector<double>(points, 1.0);
    };
    multires_bias_search(f, 5.0, o);
    EXPECT_GE(lo, 1.25);
    EXPECT_LE(hi, 3.75);
  }
}

// ---------------------------------------------------------------------------
// Metrics

TEST(Metrics, GainAndFigureOfMerit) {
  EXPECT_DOUBLE_EQ(gain_to_db(10.0), 20.0);
  EXPECT_NEAR(figure_of_merit(1e6, 100e-12, 100e-6), 1.0, 1e-12);
  EXPECT_THROW(figure_of_merit(1e6, 100e-12, 0.0), DomainError);
}

TEST(Metrics, OnePoleResponse) {
  std::vector<double> f, m;
  for (int i = 0; i <= 160; ++i) {
    const double freq = std::pow(10.0, i / 20.0);
    f.push_back(freq);
    m.push_back(100.0 / std::sqrt(1.0 + (freq / 1e4) * (freq / 1e4)));
  }
  const TrialMetrics t = metrics_from_response(f, m, 1e-3, 100e-12);
  EXPECT_NEAR(t.gain_db, 40.0, 1e-6);
  EXPECT_NEAR(t.bandwidth_hz, 1e4, 1e4 * 0.02);
  EXPECT_NEAR(t.gbw_mhz, 1.0, 0.02);
  EXPECT_NEAR(t.power_uw, 1000.0, 1e-9);
  EXPECT_NEAR(t.fom, t.gbw_mhz * 100.0 / 1000.0, 1e-12);
  EXPECT_DOUBLE_EQ(objective_value(t, DesignObjective::gain), t.gain_db);
  EXPECT_DOUBLE_EQ(objective_value(t, DesignObjective::fom), t.fom);
}

// ---------------------------------------------------------------------------
// TPE

TEST(Tpe, EmptyHistoryIsUniformInsideRanges) {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  double lw = 0.0;
  const int n = 2000;
  for (int s = 0; s < n; ++s) {
    const ParamValues p = tpe_suggest({}, space, s);
    ASSERT_GE(p.at("w_M1"), 0.045e-6);
    ASSERT_LE(p.at("w_M1"), 22.5e-6);
    ASSERT_GE(p.at("r_load"), 5e3);
    ASSERT_LE(p.at("r_load"), 20e3);
    lw += std::log(p.at("w_M1"));
  }
  // Log-uniform: mean of log(w) is the midpoint of the log range.
  EXPECT_NEAR(lw / n, 0.5 * (std::log(0.045e-6) + std::log(22.5e-6)), 0.1);
}

TEST(Tpe, ConcentratesNearTheOptimumOfA1dQuadratic) {
  const ParamSpace space = unit_box(1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<TrialRecord> history;
  for (int i = 0; i < 300; ++i) history.push_back(surrogate_trial({{"x0", uni(rng)}}, i, {0.3}));
  int inside = 0;
  for (int s = 0; s < 100; ++s) {
    const double x = tpe_suggest(history, space, 1000 + s).at("x0");
    inside += x >= 0.2 && x <= 0.4;
  }
  EXPECT_GE(inside, 90);
}

TEST(Tpe, NarrowAndLogRangesAreRespected) {
  ParamSpace space;
  space.ranges.push_back({"a", 1.0, 1.0 + 1e-9, false, "", ParamKind::other});
  space.ranges.push_back({"b", 1e-9, 1e-3, true, "", ParamKind::other});
  std::vector<TrialRecord> history;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 60; ++i) {
    TrialRecord t;
    t.trial_id = i;
    t.params = random_suggest(space, rng());
    t.objective = -std::abs(std::log10(t.params["b"]) + 6.0);
    if (i % 7 == 0) {
      t.status = TrialStatus::sim_fail;
      t.objective = std::nan("");
    }
    history.push_back(t);
    const ParamValues p = tpe_suggest(history, space, rng(), {0.25, 24, 5, true});
    ASSERT_GE(p.at("a"), 1.0);
    ASSERT_LE(p.at("a"), 1.0 + 1e-9);
    ASSERT_GT(p.at("b"), 0.0);
    ASSERT_GE(p.at("b"), 1e-9);
    ASSERT_LE(p.at("b"), 1e-3);
  }
}

TEST(Tpe, SuggestionsAreSeedDeterministic) {
  const ParamSpace space = unit_box(2);
  std::vector<TrialRecord> history;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 30; ++i)
    history.push_back(surrogate_trial(random_suggest(space, rng()), i, {0.2, 0.7}));
  EXPECT_EQ(tpe_suggest(history, space, 42), tpe_suggest(history, space, 42));
  TpeOptions uni;
  uni.multivariate = false;
  EXPECT_EQ(tpe_suggest(history, space, 42, uni), tpe_suggest(history, space, 42, uni));
}

// ---------------------------------------------------------------------------
// Optimization loop

TEST(Optimize, ZeroBudgetFails) {
  OptimizeOptions o;
  o.budget = 0;
  EXPECT_THROW(optimize(unit_box(1), [](const ParamValues& p, int id) { return surrogate_trial(p, id, {0.3}); }, o),
               AllTrialsFailed);
}

TEST(Optimize, AllFailedTrialsFail) {
  OptimizeOptions o;
  o.budget = 5;
  EXPECT_THROW(optimize(unit_box(1),
                        [](const ParamValues& p, int id) {
                          TrialRecord r;
                          r.trial_id = id;
                          r.params = p;
                          r.status = TrialStatus::sim_fail;
                          return r;
                        },
                        o),
               AllTrialsFailed);
}

TEST(Optimize, Budget40FindsThe1dOptimum) {
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    OptimizeOptions o;
    o.budget = 40;
    o.seed = seed;
    const OptimizeResult r =
        optimize(unit_box(1), [](const ParamValues& p, int id) { return surrogate_trial(p, id, {0.3}); }, o);
    EXPECT_EQ(r.history.size(), 40u);
    hits += std::abs(r.best.params.at("x0") - 0.3) <= 0.05;
  }
  EXPECT_GE(hits, 4);
}

TEST(Optimize, TpeBeatsRandomOn2dQuadraticAndBestIsMonotone) {
  std::vector<double> tpe_best, random_best;
  const std::vector<double> optimum{0.23, 0.71};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (SamplerKind kind : {SamplerKind::tpe, SamplerKind::random}) {
      OptimizeOptions o;
      o.budget = 200;
      o.seed = seed;
      o.sampler = kind;
      const OptimizeResult r =
          optimize(unit_box(2), [&](const ParamValues& p, int id) { return surrogate_trial(p, id, optimum); }, o);
      for (std::size_t i = 1; i < r.best_so_far.size(); ++i) ASSERT_GE(r.best_so_far[i], r.best_so_far[i - 1]);
      EXPECT_EQ(r.best_so_far.back(), r.best.objective);
      (kind == SamplerKind::tpe ? tpe_best : random_best).push_back(r.best.objective);
    }
  }
  EXPECT_GT(median(tpe_best), median(random_best));
}

TEST(Optimize, SameSeedSameHistory) {
  OptimizeOptions o;
  o.budget = 60;
  o.seed = 9;
  const auto f = [](const ParamValues& p, int id) { return surrogate_trial(p, id, {0.4, 0.6}); };
  const OptimizeResult a = optimize(unit_box(2), f, o);
  const OptimizeResult b = optimize(unit_box(2), f, o);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].params, b.history[i].params);
}

TEST(Optimize, FailuresArePenalizedNotFatal) {
  OptimizeOptions o;
  o.budget = 80;
  o.seed = 2;
  const OptimizeResult r = optimize(
      unit_box(1),
      [](const ParamValues& p, int id) {
        TrialRecord t = surrogate_trial(p, id, {0.3});
        if (p.at("x0") > 0.8) {
          t.status = TrialStatus::sim_fail;
          t.objective = 123.0;  // ignored for failed trials
        }
        return t;
      },
      o);
  EXPECT_LE(r.best.params.at("x0"), 0.8);
  for (const auto& t : r.history)
    EXPECT_EQ(std::isfinite(t.objective), t.status == TrialStatus::ok) << t.trial_id;
  const auto png = render_convergence(r, "convergence");
  ASSERT_GT(png.size(), 8u);
  EXPECT_EQ(png[1], 'P');
}

TEST(Optimize, IncludeBiasAddsTheBiasParameter) {
  OptimizeOptions o;
  o.budget = 10;
  o.include_bias = true;
  const OptimizeResult r = optimize(
      unit_box(1),
      [](const ParamValues& p, int id) {
        TrialRecord t = surrogate_trial(p, id, {0.3});
        t.bias = p.at("bias");
        return t;
      },
      o);
  for (const auto& t : r.history) {
    EXPECT_GE(t.params.at("bias"), 1.25);
    EXPECT_LE(t.params.at("bias"), 3.75);
  }
}

// ---------------------------------------------------------------------------
// Simulator-backed sizing

namespace {

double cs_amp_oracle_error(const Simulator& sim, const CircuitIR& tb, double lo, double hi, int points) {
  const WaveformSeries s = sim.dc_sweep(tb, "Vin", lo, hi, points);
  double best = 1e9;
  for (double v : s.at("Vout")) best = std::min(best, std::abs(v - 2.5));
  return best;
}

}  // namespace

TEST(SizingSim, ReferenceAmpBiasBeatsTheOracleWithin420Sims) {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  BiasSearchOptions o;
  o.stages = {20, 200, 200};
  o.window_lo = 0.0;
  o.window_hi = 1.0;
  CircuitSizer sizer(shared_simulator(), space, amp_task(), {DesignObjective::gain}, o);
  const BiasResult r = sizer.find_bias(space.initial);
  EXPECT_LE(r.sims_used, 420);
  const CircuitIR tb = sizer.testbench(space.initial, 0.0);
  const double oracle = cs_amp_oracle_error(shared_simulator(), tb, 0.0, 5.0, 2000);
  const double fine = final_step(5.0, o);
  const WaveformSeries around = shared_simulator().dc_sweep(tb, "Vin", r.bias, r.bias + fine, 2);
  const double slack = std::abs(around.at("Vout")[1] - around.at("Vout")[0]);
  EXPECT_LE(std::abs(r.vout - 2.5), oracle + slack);
  EXPECT_NEAR(r.bias, 0.5 + std::sqrt(2.5 / (10e3 * 0.5 * 100e-6 * 5e-6 / 0.045e-6)), 1e-3);
}

TEST(SizingSim, ReferenceAmpGainMatchesSmallSignalEstimate) {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  // The level-1 reference amp biases near 0.71 V, below the default window.
  BiasSearchOptions full;
  full.window_lo = 0.0;
  full.window_hi = 1.0;
  CircuitSizer sizer(shared_simulator(), space, amp_task(), {DesignObjective::gain}, full);
  const BiasResult b = sizer.find_bias(space.initial);
  const TrialMetrics m = sizer.evaluate(space.initial, b.bias);
  const SimulationResult op =
      shared_simulator().simulate(sizer.testbench(space.initial, b.bias), std::vector{AnalysisRequest::op()});
  const double gm = op.devices.at("m1").gm;
  ASSERT_GT(gm, 0.0);
  const double expected = gain_to_db(gm * 10e3);
  EXPECT_NEAR(std::pow(10.0, m.gain_db / 20.0), gm * 10e3, 0.1 * gm * 10e3) << "expected " << expected << " dB";
  // 10k || 100 pF: one pole near 159 kHz.
  EXPECT_NEAR(m.bandwidth_hz, 1.0 / (2 * M_PI * 10e3 * 100e-12), 0.05 * 159e3);
  EXPECT_NEAR(m.power_uw, 5.0 * (5.0 - b.vout) / 10e3 * 1e6, 1.0);
  EXPECT_GT(m.fom, 0.0);
}

TEST(SizingSim, IdealGainOfTenIs20Db) {
  ParamSpace space = parse_param_spec(R"(* PARAMS
* range r_load min=1k max=10k log=true kind=resistance
Ideal controlled source
E1 Vout 0 Vin 0 -10
R1 Vout 0 {r_load}
Rb Vdd 0 1meg
.end
)");
  space = validate_param_space(space);
  CircuitSizer sizer(shared_simulator(), space, amp_task(), {DesignObjective::gain});
  const TrialMetrics m = sizer.evaluate(space.initial, 0.0);
  EXPECT_NEAR(m.gain_db, 20.0, 1e-6);
}

TEST(SizingSim, OptimizingGainNeverEndsBelowTheInitialDesign) {
  const ParamSpace space = validate_param_space(parse_param_spec(kReferenceSpace));
  BiasSearchOptions bias;
  bias.stages = {20, 200};
  bias.window_lo = 0.0;
  bias.window_hi = 1.0;
  CircuitSizer sizer(shared_simulator(), space, amp_task(), {DesignObjective::gain}, bias);
  const TrialRecord initial = sizer.run_trial(space.initial, -1);
  ASSERT_EQ(initial.status, TrialStatus::ok) << initial.error;
  OptimizeOptions o;
  o.budget = 200;
  o.seed = 1;
  o.start_from_initial = true;
  const OptimizeResult r =
      optimize(space, [&](const ParamValues& p, int id) { return sizer.run_trial(p, id); }, o);
  EXPECT_GE(r.best.objective, initial.objective);
  EXPECT_GE(r.best.metrics.gain_db, initial.metrics.gain_db);
}
