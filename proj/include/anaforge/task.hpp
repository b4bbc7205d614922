#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/circuit.hpp"

namespace anaforge {

enum class Difficulty { easy, medium, hard };
std::string_view to_string(Difficulty d);
std::optional<Difficulty> difficulty_from_string(std::string_view text);

/// One benchmark design task (registry entry).
struct DesignTask {
  int task_id = 0;
  CircuitType circuit_type = CircuitType::amplifier;
  std::string description;  // e.g. "Common-source amp. with R load"
  std::optional<std::string> input_node;  // absent for self-generating circuits
  /// Further input nets for multi-input circuits (adder/subtractor second operand).
  std::vector<std::string> extra_inputs;
  std::string output_node = "Vout";
  double supply_volts = 5.0;
  Difficulty difficulty = Difficulty::easy;
  bool is_composite = false;
  /// Circuit kinds a composite task builds on (looked up in the tool library).
  std::vector<CircuitType> required_tools;
  /// Noun phrase used in prompts, e.g. "an RC phase-shift oscillator"; empty
  /// means "a <description>".
  std::string phrase;
  /// Extra sentences for the question block (testbench conventions).
  std::vector<std::string> notes;
};

/// The task's prompt phrase (see DesignTask::phrase).
std::string design_phrase(const DesignTask& task);

enum class FilterKind { low_pass, high_pass, band_pass, band_stop };
std::string_view to_string(FilterKind kind);
/// Filter subtype from description keywords ("low-pass", "band stop", ...);
/// low-pass when no keyword matches.
FilterKind filter_kind_from_description(std::string_view description);

}  // namespace anaforge
