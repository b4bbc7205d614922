#include "anaforge/circuit.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "anaforge/units.hpp"

namespace anaforge {

namespace {

struct TypeName {
  CircuitType type;
  std::string_view name;
};

constexpr std::array<TypeName, kCircuitTypeCount> kTypeNames{{
    {CircuitType::amplifier, "amplifier"},
    {CircuitType::inverter, "inverter"},
    {CircuitType::current_mirror, "current_mirror"},
    {CircuitType::comparator, "comparator"},
    {CircuitType::filter, "filter"},
    {CircuitType::opamp, "opamp"},
    {CircuitType::mixer, "mixer"},
    {CircuitType::oscillator, "oscillator"},
    {CircuitType::integrator, "integrator"},
    {CircuitType::differentiator, "differentiator"},
    {CircuitType::adder, "adder"},
    {CircuitType::subtractor, "subtractor"},
    {CircuitType::schmitt_trigger, "schmitt_trigger"},
}};

std::string squash(std::string_view text) {
  std::string out;
  for (char c : fold_case(text)) {
    if (std::isalnum(static_cast<unsigned char>(c))) out.push_back(c);
  }
  return out;
}

bool close(double a, double b, double rel_tol) {
  if (a == b) return true;
  return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
}

bool params_close(const std::map<std::string, double>& a, const std::map<std::string, double>& b,
                  double rel_tol) {
  if (a.size() != b.size()) return false;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !close(ia->second, ib->second, rel_tol)) return false;
  }
  return true;
}

bool nets_equal(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(),
                    [](const std::string& x, const std::string& y) { return iequals(x, y); });
}

bool components_equal(const Component& a, const Component& b, double rel_tol) {
  return iequals(a.refdes, b.refdes) && a.kind == b.kind && nets_equal(a.terminals, b.terminals) &&
         iequals(a.model, b.model) && params_close(a.params, b.params, rel_tol) &&
         a.waveform.has_value() == b.waveform.has_value() &&
         (!a.waveform || iequals(*a.waveform, *b.waveform)) &&
         a.initial_condition.has_value() == b.initial_condition.has_value() &&
         (!a.initial_condition || close(*a.initial_condition, *b.initial_condition, rel_tol));
}

bool component_lists_equal(std::vector<Component> a, std::vector<Component> b, double rel_tol) {
  if (a.size() != b.size()) return false;
  auto by_ref = [](const Component& x, const Component& y) { return fold_case(x.refdes) < fold_case(y.refdes); };
  std::sort(a.begin(), a.end(), by_ref);
  std::sort(b.begin(), b.end(), by_ref);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!components_equal(a[i], b[i], rel_tol)) return false;
  }
  return true;
}

bool model_lists_equal(std::vector<DeviceModel> a, std::vector<DeviceModel> b, double rel_tol) {
  if (a.size() != b.size()) return false;
  auto by_name = [](const DeviceModel& x, const DeviceModel& y) { return fold_case(x.name) < fold_case(y.name); };
  std::sort(a.begin(), a.end(), by_name);
  std::sort(b.begin(), b.end(), by_name);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!iequals(a[i].name, b[i].name) || a[i].kind != b[i].kind ||
        !params_close(a[i].params, b[i].params, rel_tol)) {
      return false;
    }
  }
  return true;
}

bool roles_equal(const NodeRoles& a, const NodeRoles& b, double rel_tol) {
  auto nv_equal = [&](const std::optional<NetVoltage>& x, const std::optional<NetVoltage>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (iequals(x->net, y->net) && close(x->volts, y->volts, rel_tol));
  };
  bool inputs = a.input.has_value() == b.input.has_value() && (!a.input || iequals(*a.input, *b.input));
  return inputs && iequals(a.output, b.output) && nv_equal(a.supply, b.supply) &&
         nv_equal(a.reference, b.reference) && a.circuit_type == b.circuit_type;
}

}  // namespace

std::string_view to_string(CircuitType type) {
  for (const auto& entry : kTypeNames) {
    if (entry.type == type) return entry.name;
  }
  return "unknown";
}

std::optional<CircuitType> circuit_type_from_string(std::string_view text) {
  const std::string key = squash(text);
  for (const auto& entry : kTypeNames) {
    if (squash(entry.name) == key) return entry.type;
  }
  if (key == "operationalamplifier" || key == "opamps") return CircuitType::opamp;
  if (key == "schmitt" || key == "schmitttrigger") return CircuitType::schmitt_trigger;
  if (key == "mirror" || key == "currentsource") return CircuitType::current_mirror;
  if (key == "diff") return CircuitType::differentiator;
  return std::nullopt;
}

const std::vector<CircuitType>& all_circuit_types() {
  static const std::vector<CircuitType> types = [] {
    std::vector<CircuitType> out;
    for (const auto& entry : kTypeNames) out.push_back(entry.type);
    return out;
  }();
  return types;
}

std::string_view to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::mosfet: return "mosfet";
    case ComponentKind::resistor: return "resistor";
    case ComponentKind::capacitor: return "capacitor";
    case ComponentKind::inductor: return "inductor";
    case ComponentKind::vsource: return "vsource";
    case ComponentKind::isource: return "isource";
    case ComponentKind::vcvs: return "vcvs";
    case ComponentKind::subckt_instance: return "subckt_instance";
  }
  return "unknown";
}

double Component::param_or(std::string_view key, double fallback) const {
  auto it = params.find(std::string(key));
  return it == params.end() ? fallback : it->second;
}

const Component* CircuitIR::find_component(std::string_view refdes) const {
  for (const auto& c : components) {
    if (iequals(c.refdes, refdes)) return &c;
  }
  return nullptr;
}

const SubcircuitDef* CircuitIR::find_subcircuit(std::string_view name) const {
  auto it = subcircuits.find(fold_case(name));
  return it == subcircuits.end() ? nullptr : &it->second;
}

const DeviceModel* CircuitIR::find_model(std::string_view name) const {
  for (const auto& m : models) {
    if (iequals(m.name, name)) return &m;
  }
  for (const auto& [key, sub] : subcircuits) {
    for (const auto& m : sub.models) {
      if (iequals(m.name, name)) return &m;
    }
  }
  return nullptr;
}

void CircuitIR::add_subcircuit(SubcircuitDef def) {
  std::string key = fold_case(def.name);
  subcircuits.insert_or_assign(std::move(key), std::move(def));
}

std::optional<std::size_t> terminal_count(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::mosfet: return 4;
    case ComponentKind::vcvs: return 4;
    case ComponentKind::subckt_instance: return std::nullopt;
    default: return 2;
  }
}

bool is_ground(std::string_view net) { return net == "0" || iequals(net, "gnd"); }

bool structurally_equal(const CircuitIR& a, const CircuitIR& b, double rel_tol) {
  if (!roles_equal(a.meta, b.meta, rel_tol)) return false;
  if (!model_lists_equal(a.models, b.models, rel_tol)) return false;
  if (!component_lists_equal(a.components, b.components, rel_tol)) return false;
  if (a.subcircuits.size() != b.subcircuits.size()) return false;
  for (const auto& [key, sa] : a.subcircuits) {
    auto it = b.subcircuits.find(key);
    if (it == b.subcircuits.end()) return false;
    const SubcircuitDef& sb = it->second;
    if (!nets_equal(sa.ports, sb.ports) || !component_lists_equal(sa.body, sb.body, rel_tol) ||
        !model_lists_equal(sa.models, sb.models, rel_tol)) {
      return false;
    }
  }
  return true;
}

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid circuit";
  for (const auto& p : problems) out += "; " + p;
  return out;
}

}  // namespace

InvalidCircuit::InvalidCircuit(std::vector<std::string> problems)
    : Error(join_problems(problems)), problems_(std::move(problems)) {}

ParseError::ParseError(int line, std::string snippet, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what + ": " + snippet),
      line_(line),
      snippet_(std::move(snippet)) {}

}  // namespace anaforge
