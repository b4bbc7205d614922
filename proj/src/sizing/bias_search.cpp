#include <cmath>
#include <limits>
#include <random>

#include "anaforge/sizing.hpp"

namespace anaforge {

namespace {

struct Grid {
  double start = 0.0;
  double stop = 0.0;
  int points = 0;
  double step = 0.0;

  double at(int i) const { return i == points - 1 ? stop : start + i * step; }
};

struct Best {
  double bias = std::numeric_limits<double>::quiet_NaN();
  double vout = std::numeric_limits<double>::quiet_NaN();
  double error = std::numeric_limits<double>::infinity();
};

void check_window(double supply, const BiasSearchOptions& options) {
  if (!(supply > 0.0)) throw PreconditionError("bias search: supply must be positive");
  if (!(options.window_lo >= 0.0 && options.window_lo < options.window_hi && options.window_hi <= 1.0))
    throw PreconditionError("bias search: window fractions must satisfy 0 <= lo < hi <= 1");
}

/// Stage-1 grid: inclusive linspace, or a seeded random phase.
Grid first_grid(double lo, double hi, int points, const BiasSearchOptions& options) {
  if (points < 2) throw PreconditionError("bias search: every stage needs at least 2 points");
  Grid g;
  g.points = points;
  if (options.seed) {
    std::mt19937_64 rng(*options.seed);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    g.step = (hi - lo) / points;
    g.start = lo + u * g.step;
    g.stop = g.start + (points - 1) * g.step;
  } else {
    g.start = lo;
    g.stop = hi;
    g.step = (hi - lo) / (points - 1);
  }
  return g;
}

int run_grid(const SweepFn& sweep, const Grid& g, double target, Best& best) {
  std::vector<double> vout;
  try {
    vout = sweep(g.start, g.stop, g.points);
  } catch (const PreconditionError&) {
    throw;
  } catch (const std::exception& e) {
    throw BiasSearchFailed(std::string("bias sweep failed: ") + e.what());
  }
  if (static_cast<int>(vout.size()) != g.points)
    throw BiasSearchFailed("bias sweep returned " + std::to_string(vout.size()) + " points, expected " +
                           std::to_string(g.points));
  for (int i = 0; i < g.points; ++i) {
    if (!std::isfinite(vout[i])) continue;
    const double bias = g.at(i);
    const double err = std::abs(vout[i] - target);
    if (err < best.error || (err == best.error && bias < best.bias)) best = {bias, vout[i], err};
  }
  return g.points;
}

}  // namespace

BiasResult multires_bias_search(const SweepFn& sweep, double supply, const BiasSearchOptions& options) {
  if (options.stages.empty()) throw PreconditionError("bias search: stages must be nonempty");
  check_window(supply, options);
  const double lo = options.window_lo * supply;
  const double hi = options.window_hi * supply;
  const double target = supply / 2.0;

  Best best;
  int sims = 0;
  Grid grid = first_grid(lo, hi, options.stages.front(), options);
  sims += run_grid(sweep, grid, target, best);
  if (!std::isfinite(best.error)) throw BiasSearchFailed("bias sweep produced no finite output");

  for (std::size_t k = 1; k < options.stages.size(); ++k) {
    const int n = options.stages[k];
    if (n < 2) throw PreconditionError("bias search: every stage needs at least 2 points");
    const double delta = grid.step;
    Grid next;
    next.start = std::max(lo, best.bias - delta);
    next.stop = std::min(hi, best.bias + delta);
    next.points = n;
    if (!(next.start < next.stop)) break;
    next.step = (next.stop - next.start) / (n - 1);
    sims += run_grid(sweep, next, target, best);
    grid = next;
  }
  return {best.bias, best.vout, sims};
}

BiasResult uniform_bias_search(const SweepFn& sweep, double supply, int points, const BiasSearchOptions& options) {
  check_window(supply, options);
  Best best;
  const Grid grid = first_grid(options.window_lo * supply, options.window_hi * supply, points, options);
  const int sims = run_grid(sweep, grid, supply / 2.0, best);
  if (!std::isfinite(best.error)) throw BiasSearchFailed("bias sweep produced no finite output");
  return {best.bias, best.vout, sims};
}

}  // namespace anaforge
