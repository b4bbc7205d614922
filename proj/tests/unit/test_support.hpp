#pragma once

#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "anaforge/sim.hpp"

namespace anaforge::testing {

inline std::string fixture_path(const std::string& relative) {
  return std::string(ANAFORGE_FIXTURE_DIR) + "/" + relative;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string read_fixture(const std::string& relative) { return read_text(fixture_path(relative)); }

/// Engine configuration for tests: ANAFORGE_SPICE / ANAFORGE_SPICE_MODE
/// override the build-time default.
inline EngineConfig test_engine_config() {
  EngineConfig config;
  const char* env = std::getenv("ANAFORGE_SPICE");
  config.executable = env && *env ? env : ANAFORGE_TEST_ENGINE;
  const char* mode = std::getenv("ANAFORGE_SPICE_MODE");
  std::string m = mode && *mode ? mode : ANAFORGE_TEST_ENGINE_MODE;
  config.mode = m == "server" ? EngineMode::server : EngineMode::batch;
  config.workers = 4;
  return config;
}

/// One engine shared by every test of a binary (server start-up is slow).
inline std::shared_ptr<SpiceEngine> shared_engine() {
  static std::shared_ptr<SpiceEngine> engine = make_engine(test_engine_config());
  return engine;
}

inline const Simulator& shared_simulator() {
  static Simulator sim(shared_engine());
  return sim;
}

}  // namespace anaforge::testing
