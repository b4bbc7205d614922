#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "anaforge/sizing.hpp"

namespace anaforge {

namespace {

/// One parameter on its transformed axis (log for log-scaled ranges).
struct Dim {
  double a = 0.0;
  double b = 1.0;
  bool log = false;

  double to_u(double x) const { return log ? std::log(x) : x; }
  double from_u(double u, const ParamRange& r) const {
    return std::clamp(log ? std::exp(u) : u, r.min, r.max);
  }
  double width() const { return b - a; }
};

std::vector<Dim> dims_of(const ParamSpace& space) {
  std::vector<Dim> dims;
  for (const auto& r : space.ranges) {
    if (!(r.min < r.max)) throw PreconditionError("tpe: empty range for " + r.name);
    if (r.log_scale && r.min <= 0.0) throw PreconditionError("tpe: log range must be positive: " + r.name);
    Dim d;
    d.log = r.log_scale;
    d.a = d.to_u(r.min);
    d.b = d.to_u(r.max);
    dims.push_back(d);
  }
  return dims;
}

ParamValues to_params(const std::vector<double>& u, const std::vector<Dim>& dims, const ParamSpace& space) {
  ParamValues out;
  for (std::size_t d = 0; d < dims.size(); ++d) out[space.ranges[d].name] = dims[d].from_u(u[d], space.ranges[d]);
  return out;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double log_truncnorm(double u, double c, double sigma, double a, double b) {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  const double z = (u - c) / sigma;
  const double mass = std::max(normal_cdf((b - c) / sigma) - normal_cdf((a - c) / sigma), 1e-300);
  return -0.5 * z * z - kLogSqrt2Pi - std::log(sigma) - std::log(mass);
}

double sample_truncnorm(std::mt19937_64& rng, double c, double sigma, double a, double b) {
  std::normal_distribution<double> normal(c, sigma);
  for (int i = 0; i < 64; ++i) {
    const double x = normal(rng);
    if (x >= a && x <= b) return x;
  }
  return std::uniform_real_distribution<double>(a, b)(rng);
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// Parzen estimator: one Gaussian per observation plus a broad prior
/// component centred in the box, equally weighted, truncated to the box.
class Parzen {
 public:
  Parzen(const std::vector<std::vector<double>>& points, const std::vector<Dim>& dims, bool multivariate)
      : dims_(dims), multivariate_(multivariate) {
    const std::size_t D = dims.size();
    std::vector<double> prior(D);
    for (std::size_t d = 0; d < D; ++d) prior[d] = 0.5 * (dims[d].a + dims[d].b);
    centers_ = points;
    centers_.push_back(prior);
    const double n = static_cast<double>(std::max<std::size_t>(points.size(), 1));
    const double exponent = multivariate ? -1.0 / (static_cast<double>(D) + 4.0) : -1.0 / 5.0;
    // Scott's rule with a fixed reference spread of 0.2 x range: the
    // bandwidth shrinks with the sample count but never collapses onto a
    // tight cluster of good points.
    for (std::size_t d = 0; d < D; ++d) {
      const double w = dims[d].width();
      sigma_.push_back(std::clamp(0.2 * w * std::pow(n, exponent), w / 100.0, w));
      prior_sigma_.push_back(w);
    }
  }

  double log_density(const std::vector<double>& u) const {
    const std::size_t K = centers_.size();
    const double log_k = std::log(static_cast<double>(K));
    if (multivariate_) {
      std::vector<double> terms(K);
      for (std::size_t k = 0; k < K; ++k) {
        double s = 0.0;
        for (std::size_t d = 0; d < dims_.size(); ++d) s += component_logpdf(k, d, u[d]);
        terms[k] = s;
      }
      return log_sum_exp(terms) - log_k;
    }
    double total = 0.0;
    std::vector<double> terms(K);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      for (std::size_t k = 0; k < K; ++k) terms[k] = component_logpdf(k, d, u[d]);
      total += log_sum_exp(terms) - log_k;
    }
    return total;
  }

  std::vector<double> sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> pick(0, centers_.size() - 1);
    std::vector<double> u(dims_.size());
    std::size_t k = pick(rng);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      if (!multivariate_ && d > 0) k = pick(rng);
      u[d] = sample_truncnorm(rng, centers_[k][d], sigma(k, d), dims_[d].a, dims_[d].b);
    }
    return u;
  }

 private:
  bool is_prior(std::size_t k) const { return k + 1 == centers_.size(); }
  double sigma(std::size_t k, std::size_t d) const { return is_prior(k) ? prior_sigma_[d] : sigma_[d]; }
  double component_logpdf(std::size_t k, std::size_t d, double u) const {
    return log_truncnorm(u, centers_[k][d], sigma(k, d), dims_[d].a, dims_[d].b);
  }

  std::vector<Dim> dims_;
  bool multivariate_;
  std::vector<std::vector<double>> centers_;
  std::vector<double> sigma_;
  std::vector<double> prior_sigma_;
};

}  // namespace

ParamValues random_suggest(const ParamSpace& space, std::uint64_t seed) {
  const auto dims = dims_of(space);
  std::mt19937_64 rng(seed);
  std::vector<double> u(dims.size());
  for (std::size_t d = 0; d < dims.size(); ++d) u[d] = std::uniform_real_distribution<double>(dims[d].a, dims[d].b)(rng);
  return to_params(u, dims, space);
}

ParamValues tpe_suggest(const std::vector<TrialRecord>& history, const ParamSpace& space, std::uint64_t seed,
                        const TpeOptions& options) {
  if (space.ranges.empty()) throw PreconditionError("tpe: empty parameter space");
  const auto dims = dims_of(space);
  if (static_cast<int>(history.size()) < options.n_startup) return random_suggest(space, seed);

  // Observations on the transformed axis, with failures at a penalty value.
  std::vector<std::vector<double>> points;
  std::vector<double> objective;
  std::vector<bool> ok;
  for (const auto& t : history) {
    std::vector<double> u;
    bool complete = true;
    for (std::size_t d = 0; d < dims.size() && complete; ++d) {
      auto it = t.params.find(space.ranges[d].name);
      if (it == t.params.end() || (dims[d].log && it->second <= 0.0)) {
        complete = false;
        break;
      }
      u.push_back(std::clamp(dims[d].to_u(it->second), dims[d].a, dims[d].b));
    }
    if (!complete) continue;
    const bool good = t.status == TrialStatus::ok && std::isfinite(t.objective);
    points.push_back(std::move(u));
    objective.push_back(good ? t.objective : 0.0);
    ok.push_back(good);
  }
  double worst = std::numeric_limits<double>::infinity();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < objective.size(); ++i) {
    if (!ok[i]) continue;
    worst = std::min(worst, objective[i]);
    best = std::max(best, objective[i]);
  }
  if (!std::isfinite(worst)) return random_suggest(space, seed);
  double spread = best - worst;
  if (spread <= 0.0) spread = std::max(std::abs(worst), 1.0);
  const double penalty = worst - 3.0 * spread;
  for (std::size_t i = 0; i < objective.size(); ++i)
    if (!ok[i]) objective[i] = penalty;

  // Split at the gamma quantile (maximization: the top fraction is good).
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return objective[x] > objective[y]; });
  const std::size_t n = order.size();
  std::size_t n_good = static_cast<std::size_t>(std::ceil(options.gamma * static_cast<double>(n)));
  n_good = std::clamp<std::size_t>(n_good, 1, n);
  std::vector<std::vector<double>> good_pts, bad_pts;
  for (std::size_t i = 0; i < n; ++i) (i < n_good ? good_pts : bad_pts).push_back(points[order[i]]);

  const Parzen l(good_pts, dims, options.multivariate);
  const Parzen g(bad_pts, dims, options.multivariate);

  std::mt19937_64 rng(seed);
  std::vector<double> chosen;
  double chosen_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < std::max(1, options.candidates); ++c) {
    auto u = l.sample(rng);
    const double score = l.log_density(u) - g.log_density(u);
    if (chosen.empty() || score > chosen_score) {
      chosen = std::move(u);
      chosen_score = score;
    }
  }
  return to_params(chosen, dims, space);
}

}  // namespace anaforge
