#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anaforge/error.hpp"

namespace anaforge {

/// The thirteen circuit families of the benchmark suite.
enum class CircuitType {
  amplifier,
  inverter,
  current_mirror,
  comparator,
  filter,
  opamp,
  mixer,
  oscillator,
  integrator,
  differentiator,
  adder,
  subtractor,
  schmitt_trigger,
};

inline constexpr int kCircuitTypeCount = 13;

std::string_view to_string(CircuitType type);
std::optional<CircuitType> circuit_type_from_string(std::string_view text);
const std::vector<CircuitType>& all_circuit_types();

enum class DeviceKind { nmos, pmos, other };

struct DeviceModel {
  std::string name;
  DeviceKind kind = DeviceKind::other;
  std::string type_token;  // SPICE model type as written, e.g. "nmos", "d"
  std::map<std::string, double> params;  // keys lower-cased: kp [A/V^2], vto [V], level
};

enum class ComponentKind {
  mosfet,
  resistor,
  capacitor,
  inductor,
  vsource,
  isource,
  vcvs,
  subckt_instance,
};

std::string_view to_string(ComponentKind kind);

/// One circuit element. Parameter keys are lower-case:
///   mosfet: w, l [m];  resistor/capacitor/inductor: value [ohm/F/H];
///   sources: dc, ac, ac_phase;  vcvs: gain.
/// `model` names the DeviceModel for a MOSFET or the subcircuit for an instance.
struct Component {
  std::string refdes;
  ComponentKind kind = ComponentKind::resistor;
  std::vector<std::string> terminals;
  std::string model;
  std::map<std::string, double> params;
  std::optional<std::string> waveform;  // transient descriptor, e.g. "SIN(2.5 0.1 1k)"
  std::optional<double> initial_condition;  // V

  double param_or(std::string_view key, double fallback) const;
};

struct SubcircuitDef {
  std::string name;
  std::vector<std::string> ports;
  std::vector<Component> body;
  std::vector<DeviceModel> models;
};

struct NetVoltage {
  std::string net;
  double volts = 0.0;
};

struct NodeRoles {
  std::optional<std::string> input;
  std::string output;
  std::optional<NetVoltage> supply;
  std::optional<NetVoltage> reference;
  CircuitType circuit_type = CircuitType::amplifier;
};

struct CircuitIR {
  std::string title;
  std::vector<DeviceModel> models;
  std::vector<Component> components;
  std::map<std::string, SubcircuitDef> subcircuits;  // keyed by folded name
  NodeRoles meta;

  const Component* find_component(std::string_view refdes) const;
  const SubcircuitDef* find_subcircuit(std::string_view name) const;
  const DeviceModel* find_model(std::string_view name) const;
  void add_subcircuit(SubcircuitDef def);
};

/// Expected terminal count for a component kind; nullopt when variable.
std::optional<std::size_t> terminal_count(ComponentKind kind);

/// Ground aliases: "0" and "gnd", case-insensitive.
bool is_ground(std::string_view net);

/// Equality used by the round-trip contract: same component multiset, same
/// net graph, model parameters equal within `rel_tol`.
bool structurally_equal(const CircuitIR& a, const CircuitIR& b, double rel_tol = 1e-12);

class InvalidCircuit : public Error {
 public:
  explicit InvalidCircuit(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

class ParseError : public Error {
 public:
  ParseError(int line, std::string snippet, const std::string& what);
  int line() const { return line_; }
  const std::string& snippet() const { return snippet_; }

 private:
  int line_;
  std::string snippet_;
};

class MissingMeta : public Error {
 public:
  using Error::Error;
};

class UnknownSubcircuit : public Error {
 public:
  explicit UnknownSubcircuit(const std::string& name)
      : Error("unknown subcircuit: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

}  // namespace anaforge
