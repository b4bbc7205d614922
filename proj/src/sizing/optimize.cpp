#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "anaforge/sizing.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

OptimizeResult optimize(const ParamSpace& space, const TrialEvaluator& evaluate, const OptimizeOptions& options) {
  if (options.budget < 0) throw PreconditionError("optimize: negative budget");
  ParamSpace search = space;
  if (options.include_bias) {
    search.ranges.push_back({"bias", options.bias_range.first, options.bias_range.second, false, "V", ParamKind::bias});
    search.initial["bias"] = 0.5 * (options.bias_range.first + options.bias_range.second);
  }
  TpeOptions tpe = options.tpe;
  tpe.n_startup = options.n_startup.value_or(options.budget / 4);

  OptimizeResult result;
  double running = -std::numeric_limits<double>::infinity();
  int best_index = -1;
  for (int t = 0; t < options.budget; ++t) {
    const std::uint64_t seed = splitmix64(options.seed ^ splitmix64(static_cast<std::uint64_t>(t)));
    ParamValues params;
    if (t == 0 && options.start_from_initial) {
      for (const auto& r : search.ranges) {
        auto it = search.initial.find(r.name);
        params[r.name] = it != search.initial.end() ? it->second : 0.5 * (r.min + r.max);
      }
    } else if (options.sampler == SamplerKind::tpe) {
      params = tpe_suggest(result.history, search, seed, tpe);
    } else {
      params = random_suggest(search, seed);
    }
    TrialRecord rec = evaluate(params, t);
    rec.trial_id = t;
    if (rec.params.empty()) rec.params = params;
    if (rec.status == TrialStatus::ok && !std::isfinite(rec.objective)) rec.status = TrialStatus::sim_fail;
    if (rec.status != TrialStatus::ok) rec.objective = std::numeric_limits<double>::quiet_NaN();
    if (rec.status == TrialStatus::ok && rec.objective > running) {
      running = rec.objective;
      best_index = t;
    }
    result.history.push_back(std::move(rec));
    result.best_so_far.push_back(running);
  }
  if (best_index < 0) throw AllTrialsFailed("no trial out of " + std::to_string(options.budget) + " succeeded");
  result.best = result.history[static_cast<std::size_t>(best_index)];
  return result;
}

void write_history(const std::vector<TrialRecord>& history, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : history) out << to_json(t).dump() << '\n';
}

std::vector<std::uint8_t> render_convergence(const OptimizeResult& result, const std::string& title) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& t : result.history)
    if (t.status == TrialStatus::ok) worst = std::min(worst, t.objective);
  if (!std::isfinite(worst)) throw EmptySeries("no successful trial to plot");
  WaveformSeries s;
  s.axis_name = "trial";
  auto& best = s.signals["best"];
  auto& obj = s.signals["objective"];
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    s.axis.push_back(static_cast<double>(i));
    const double b = result.best_so_far[i];
    best.push_back(std::isfinite(b) ? b : worst);
    const auto& t = result.history[i];
    obj.push_back(t.status == TrialStatus::ok ? t.objective : worst);
  }
  if (s.axis.size() == 1) {
    s.axis.push_back(1.0);
    best.push_back(best.front());
    obj.push_back(obj.front());
  }
  return render_waveform(s, {"objective", "best"}, title);
}

}  // namespace anaforge
