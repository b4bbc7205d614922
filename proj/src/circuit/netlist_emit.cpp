#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

char expected_prefix(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::mosfet: return 'm';
    case ComponentKind::resistor: return 'r';
    case ComponentKind::capacitor: return 'c';
    case ComponentKind::inductor: return 'l';
    case ComponentKind::vsource: return 'v';
    case ComponentKind::isource: return 'i';
    case ComponentKind::vcvs: return 'e';
    case ComponentKind::subckt_instance: return 'x';
  }
  return '?';
}

void check_components(const std::vector<Component>& components, const CircuitIR& circuit,
                      const std::string& scope, std::vector<std::string>& problems) {
  std::set<std::string> seen;
  for (const Component& c : components) {
    const std::string where = scope.empty() ? c.refdes : scope + "/" + c.refdes;
    if (c.refdes.empty()) {
      problems.push_back(scope + ": component with empty refdes");
      continue;
    }
    if (!seen.insert(fold_case(c.refdes)).second) problems.push_back(where + ": duplicate refdes");
    if (std::tolower(static_cast<unsigned char>(c.refdes.front())) != expected_prefix(c.kind)) {
      problems.push_back(where + ": refdes prefix does not match " + std::string(to_string(c.kind)));
    }
    auto count = terminal_count(c.kind);
    if (count && c.terminals.size() != *count) {
      problems.push_back(where + ": expected " + std::to_string(*count) + " terminals, got " +
                         std::to_string(c.terminals.size()));
    }
    for (const auto& t : c.terminals) {
      if (t.empty()) problems.push_back(where + ": empty net name");
    }
    switch (c.kind) {
      case ComponentKind::mosfet: {
        for (const char* key : {"w", "l"}) {
          auto it = c.params.find(key);
          if (it != c.params.end() && !(it->second > 0.0)) {
            problems.push_back(where + ": " + key + " must be > 0");
          }
        }
        if (c.model.empty()) problems.push_back(where + ": MOSFET without model");
        break;
      }
      case ComponentKind::resistor:
      case ComponentKind::capacitor:
      case ComponentKind::inductor:
        if (!c.params.contains("value")) problems.push_back(where + ": missing value");
        break;
      case ComponentKind::vcvs:
        if (!c.params.contains("gain")) problems.push_back(where + ": missing gain");
        break;
      case ComponentKind::subckt_instance: {
        const SubcircuitDef* def = circuit.find_subcircuit(c.model);
        if (!def) {
          problems.push_back(where + ": unknown subcircuit " + c.model);
        } else if (def->ports.size() != c.terminals.size()) {
          problems.push_back(where + ": " + std::to_string(c.terminals.size()) + " ports for subcircuit " +
                             def->name + " with " + std::to_string(def->ports.size()));
        }
        break;
      }
      default:
        break;
    }
  }
}

std::vector<const Component*> sorted_by_refdes(const std::vector<Component>& components) {
  std::vector<const Component*> out;
  for (const auto& c : components) out.push_back(&c);
  std::sort(out.begin(), out.end(),
            [](const Component* a, const Component* b) { return fold_case(a->refdes) < fold_case(b->refdes); });
  return out;
}

// Role nets referenced inside a subcircuit body without being ports. SPICE
// would treat them as local, so they are declared global.
std::vector<std::string> global_nets(const CircuitIR& circuit) {
  std::vector<std::string> roles;
  if (circuit.meta.supply) roles.push_back(circuit.meta.supply->net);
  if (circuit.meta.reference) roles.push_back(circuit.meta.reference->net);
  std::vector<std::string> out;
  for (const auto& role : roles) {
    bool needed = false;
    for (const auto& [key, sub] : circuit.subcircuits) {
      bool is_port = std::any_of(sub.ports.begin(), sub.ports.end(),
                                 [&](const std::string& p) { return iequals(p, role); });
      if (is_port) continue;
      for (const auto& c : sub.body) {
        for (const auto& t : c.terminals) needed = needed || iequals(t, role);
      }
    }
    if (needed && std::none_of(out.begin(), out.end(), [&](const std::string& n) { return iequals(n, role); })) {
      out.push_back(role);
    }
  }
  return out;
}

}  // namespace

std::string model_line(const DeviceModel& model) {
  std::string type = model.type_token;
  if (type.empty()) type = model.kind == DeviceKind::nmos ? "nmos" : model.kind == DeviceKind::pmos ? "pmos" : "d";
  std::string line = ".model " + model.name + " " + type;
  if (!model.params.empty()) {
    line += " (";
    bool first = true;
    for (const auto& [key, value] : model.params) {
      if (!first) line += " ";
      first = false;
      line += key + "=" + format_number(value);
    }
    line += ")";
  }
  return line;
}

std::vector<std::string> invariant_violations(const CircuitIR& circuit) {
  std::vector<std::string> problems;
  if (circuit.components.empty()) problems.push_back("circuit has no components");
  check_components(circuit.components, circuit, "", problems);
  for (const auto& [key, sub] : circuit.subcircuits) {
    if (sub.ports.empty()) problems.push_back("subcircuit " + sub.name + ": no ports");
    check_components(sub.body, circuit, sub.name, problems);
  }
  std::set<std::string> model_names;
  for (const auto& m : circuit.models) {
    if (!model_names.insert(fold_case(m.name)).second) problems.push_back("model " + m.name + ": duplicate name");
  }
  auto check_models = [&](const std::vector<Component>& body, const std::string& scope) {
    for (const auto& c : body) {
      if (c.kind == ComponentKind::mosfet && !c.model.empty() && !circuit.find_model(c.model)) {
        problems.push_back((scope.empty() ? c.refdes : scope + "/" + c.refdes) + ": undefined model " + c.model);
      }
    }
  };
  check_models(circuit.components, "");
  for (const auto& [key, sub] : circuit.subcircuits) check_models(sub.body, sub.name);
  if (circuit.meta.output.empty()) problems.push_back("node roles: output net not declared");
  return problems;
}

std::string component_line(const Component& c) {
  std::ostringstream line;
  line << c.refdes;
  for (const auto& t : c.terminals) line << ' ' << t;
  switch (c.kind) {
    case ComponentKind::mosfet:
      line << ' ' << c.model;
      for (const auto& [key, value] : c.params) line << ' ' << key << '=' << format_number(value);
      break;
    case ComponentKind::resistor:
    case ComponentKind::capacitor:
    case ComponentKind::inductor:
      line << ' ' << format_number(c.param_or("value", 0.0));
      if (c.initial_condition) line << " ic=" << format_number(*c.initial_condition);
      break;
    case ComponentKind::vsource:
    case ComponentKind::isource:
      if (auto it = c.params.find("dc"); it != c.params.end()) line << " DC " << format_number(it->second);
      if (auto it = c.params.find("ac"); it != c.params.end()) {
        line << " AC " << format_number(it->second);
        if (auto ph = c.params.find("ac_phase"); ph != c.params.end()) line << ' ' << format_number(ph->second);
      }
      if (c.waveform) line << ' ' << *c.waveform;
      break;
    case ComponentKind::vcvs:
      line << ' ' << format_number(c.param_or("gain", 1.0));
      break;
    case ComponentKind::subckt_instance:
      line << ' ' << c.model;
      break;
  }
  return line.str();
}

std::string emit_netlist(const CircuitIR& circuit, std::span<const AnalysisRequest> analyses,
                         std::span<const std::string> extra_lines) {
  if (auto problems = invariant_violations(circuit); !problems.empty()) throw InvalidCircuit(std::move(problems));

  std::ostringstream deck;
  deck << (circuit.title.empty() ? std::string("circuit") : circuit.title) << '\n';
  const NodeRoles& roles = circuit.meta;
  deck << "* META type=" << to_string(roles.circuit_type) << '\n';
  deck << "* META input=" << (roles.input ? *roles.input : std::string("-")) << '\n';
  deck << "* META output=" << roles.output << '\n';
  if (roles.supply) deck << "* META supply=" << roles.supply->net << ':' << format_number(roles.supply->volts) << '\n';
  if (roles.reference) {
    deck << "* META reference=" << roles.reference->net << ':' << format_number(roles.reference->volts) << '\n';
  }

  std::vector<const DeviceModel*> models;
  for (const auto& m : circuit.models) models.push_back(&m);
  std::sort(models.begin(), models.end(),
            [](const DeviceModel* a, const DeviceModel* b) { return fold_case(a->name) < fold_case(b->name); });
  for (const DeviceModel* m : models) deck << model_line(*m) << '\n';

  for (const auto& net : global_nets(circuit)) deck << ".global " << net << '\n';

  for (const Component* c : sorted_by_refdes(circuit.components)) deck << component_line(*c) << '\n';

  for (const auto& [key, sub] : circuit.subcircuits) {
    deck << ".subckt " << sub.name;
    for (const auto& p : sub.ports) deck << ' ' << p;
    deck << '\n';
    for (const auto& m : sub.models) deck << model_line(m) << '\n';
    for (const Component* c : sorted_by_refdes(sub.body)) deck << component_line(*c) << '\n';
    deck << ".ends " << sub.name << '\n';
  }

  for (const auto& line : extra_lines) deck << line << '\n';
  for (const auto& a : analyses) deck << analysis_lines(a) << '\n';
  deck << ".end\n";
  return deck.str();
}

}  // namespace anaforge
