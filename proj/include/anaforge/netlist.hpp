#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/analysis.hpp"
#include "anaforge/circuit.hpp"

namespace anaforge {

struct ParseDiagnostic {
  int line = 0;
  std::string snippet;
  std::string reason;
};

struct ParsedNetlist {
  CircuitIR circuit;
  std::vector<ParseDiagnostic> diagnostics;
};

/// Renders a complete SPICE deck: title, `* META` role directives, models,
/// components sorted by refdes, subcircuit blocks, analysis lines, `.end`.
/// `extra_lines` are inserted before the analyses (e.g. `.save` directives).
/// Throws InvalidCircuit listing every offending refdes or net.
std::string emit_netlist(const CircuitIR& circuit, std::span<const AnalysisRequest> analyses = {},
                         std::span<const std::string> extra_lines = {});

/// Tolerant parser for SPICE decks, including LLM output: case-insensitive,
/// `+` continuations, `*`/`;`/`$` comments, magnitude suffixes. Lines that
/// cannot be understood are reported in `diagnostics`.
/// Throws ParseError when no component is recovered and MissingMeta when the
/// `* META` directives do not determine the node roles.
ParsedNetlist parse_netlist(std::string_view deck);

/// Same as parse_netlist without requiring META directives; roles are left
/// defaulted when absent.
ParsedNetlist parse_netlist_lenient(std::string_view deck);

enum class IssueKind { missing_node, floating_net, no_ground, unknown_subcircuit, port_mismatch };

struct StructuralIssue {
  IssueKind kind;
  std::string subject;  // net, refdes or subcircuit name
  std::string message;

  friend bool operator==(const StructuralIssue&, const StructuralIssue&) = default;
};

/// Structural checks on the flattened circuit: declared role nets exist,
/// a ground net exists, and no net is left dangling on one terminal.
/// Result is sorted, so it does not depend on component order.
std::vector<StructuralIssue> validate_connectivity(const CircuitIR& circuit);

/// Replaces every subcircuit instance by its body. Internal nets become
/// `<instance>.<net>`; ground and role nets stay global. Throws
/// UnknownSubcircuit for an undefined reference.
CircuitIR flatten(const CircuitIR& circuit);

/// Every distinct net name (folded) touched by a component terminal.
std::vector<std::string> collect_nets(const CircuitIR& circuit);

/// Structural invariants required by emit_netlist; empty when valid.
std::vector<std::string> invariant_violations(const CircuitIR& circuit);

/// `.model` line for a device model.
std::string model_line(const DeviceModel& model);

/// SPICE element line for a single component.
std::string component_line(const Component& component);

}  // namespace anaforge
