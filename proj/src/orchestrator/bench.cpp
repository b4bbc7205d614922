#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "anaforge/orchestrator.hpp"

namespace anaforge {

namespace fs = std::filesystem;

double pass_at_k(int n, int c, int k) {
  if (n < 0 || c < 0 || c > n) throw DomainError("pass_at_k: need 0 <= c <= n");
  if (k < 1 || k > n) throw DomainError("pass_at_k: need 1 <= k <= n");
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
  double ratio = 1.0;
  for (int i = n - c + 1; i <= n; ++i) ratio *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  return 1.0 - ratio;
}

int TaskOutcomes::passes() const { return static_cast<int>(std::count(samples.begin(), samples.end(), true)); }

BenchmarkResult summarize_benchmark(const std::vector<std::pair<int, std::vector<bool>>>& outcomes,
                                    const std::vector<int>& ks) {
  BenchmarkResult result;
  result.ks = ks;
  std::map<int, int> counted;
  for (const auto& [task_id, samples] : outcomes) {
    TaskOutcomes t;
    t.task_id = task_id;
    t.samples = samples;
    const int n = static_cast<int>(samples.size());
    for (int k : ks) {
      if (k < 1 || k > n) continue;
      t.pass_at_k[k] = pass_at_k(n, t.passes(), k);
      result.average[k] += t.pass_at_k[k];
      ++counted[k];
    }
    if (t.passes() > 0) ++result.solved;
    result.tasks.push_back(std::move(t));
  }
  for (auto& [k, sum] : result.average) sum /= counted[k];
  return result;
}

std::string benchmark_csv(const BenchmarkResult& result) {
  auto pct = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return std::string(buf);
  };
  std::string out = "task_id,n,passes";
  for (int k : result.ks) out += ",pass@" + std::to_string(k);
  out += "\n";
  for (const auto& t : result.tasks) {
    out += std::to_string(t.task_id) + "," + std::to_string(t.samples.size()) + "," + std::to_string(t.passes());
    for (int k : result.ks) {
      auto it = t.pass_at_k.find(k);
      out += "," + (it == t.pass_at_k.end() ? std::string() : pct(it->second));
    }
    out += "\n";
  }
  out += "average,,";
  for (int k : result.ks) {
    auto it = result.average.find(k);
    out += "," + (it == result.average.end() ? std::string() : pct(it->second));
  }
  out += "\n";
  out += "solved," + std::to_string(result.solved) + "/" + std::to_string(result.tasks.size()) + "\n";
  return out;
}

nlohmann::json to_json(const BenchmarkResult& result) {
  nlohmann::json j;
  j["ks"] = result.ks;
  j["solved"] = result.solved;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : result.tasks) {
    nlohmann::json tj;
    tj["task_id"] = t.task_id;
    tj["samples"] = t.samples;
    tj["passes"] = t.passes();
    for (const auto& [k, v] : t.pass_at_k) tj["pass_at_k"][std::to_string(k)] = v;
    j["tasks"].push_back(std::move(tj));
  }
  for (const auto& [k, v] : result.average) j["average"][std::to_string(k)] = v;
  return j;
}

BenchmarkResult run_benchmark(const std::vector<DesignTask>& suite, const RunConfig& config, const std::vector<int>& ks,
                              const SampleRunner& runner, int workers, std::vector<TaskResult>* results) {
  if (suite.empty()) throw PreconditionError("run_benchmark: empty suite");
  config.validate();

  // Basic tasks first so composites of the same sample can use their tools.
  std::vector<std::size_t> order(suite.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return !suite[a].is_composite && suite[b].is_composite; });

  const int n = config.samples_n;
  std::vector<std::vector<TaskResult>> grid(suite.size(), std::vector<TaskResult>(static_cast<std::size_t>(n)));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int s = next++; s < n; s = next++) {
      for (std::size_t i : order) {
        const DesignTask& task = suite[i];
        const fs::path dir =
            config.workdir / ("task-" + std::to_string(task.task_id)) / ("sample-" + std::to_string(s));
        TaskResult r;
        try {
          r = runner(task, s, dir);
        } catch (const std::exception& e) {
          r.task_id = task.task_id;
          r.sample = s;
          r.error = e.what();
        }
        grid[i][static_cast<std::size_t>(s)] = std::move(r);
      }
    }
  };
  const int threads = std::clamp(workers, 1, n);
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::vector<std::pair<int, std::vector<bool>>> outcomes;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    std::vector<bool> samples;
    for (const auto& r : grid[i]) samples.push_back(r.final_verdict == Verdict::pass);
    outcomes.emplace_back(suite[i].task_id, std::move(samples));
    if (results)
      for (auto& r : grid[i]) results->push_back(std::move(r));
  }
  return summarize_benchmark(outcomes, ks);
}

}  // namespace anaforge
