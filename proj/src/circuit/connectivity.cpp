#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

struct FlattenContext {
  const CircuitIR& root;
  std::set<std::string> global;  // folded names of nets never renamed
  std::vector<Component>& out;
};

std::set<std::string> global_net_set(const CircuitIR& circuit) {
  std::set<std::string> global{"0", "gnd"};
  const NodeRoles& r = circuit.meta;
  if (r.supply) global.insert(fold_case(r.supply->net));
  if (r.reference) global.insert(fold_case(r.reference->net));
  return global;
}

void expand(FlattenContext& ctx, const Component& instance, const std::string& path,
            const std::map<std::string, std::string>& outer_map, int depth) {
  const SubcircuitDef* def = ctx.root.find_subcircuit(instance.model);
  if (!def) throw UnknownSubcircuit(instance.model);
  if (depth > 32) throw InvalidCircuit({"subcircuit nesting too deep at " + path});

  auto map_outer = [&](const std::string& net) {
    auto it = outer_map.find(fold_case(net));
    return it == outer_map.end() ? net : it->second;
  };

  // port -> net in the parent scope
  std::map<std::string, std::string> port_map;
  for (std::size_t i = 0; i < def->ports.size() && i < instance.terminals.size(); ++i) {
    port_map[fold_case(def->ports[i])] = map_outer(instance.terminals[i]);
  }
  auto map_inner = [&](const std::string& net) {
    std::string key = fold_case(net);
    if (auto it = port_map.find(key); it != port_map.end()) return it->second;
    if (ctx.global.contains(key)) return net;
    return path + "." + net;
  };

  for (const Component& inner : def->body) {
    Component c = inner;
    for (auto& t : c.terminals) t = map_inner(t);
    if (inner.kind == ComponentKind::subckt_instance) {
      Component nested = inner;
      nested.terminals = c.terminals;
      expand(ctx, nested, path + "." + inner.refdes, {}, depth + 1);
      continue;
    }
    c.refdes = std::string(1, inner.refdes.front()) + "." + path + "." + inner.refdes;
    ctx.out.push_back(std::move(c));
  }
}

}  // namespace

CircuitIR flatten(const CircuitIR& circuit) {
  CircuitIR flat;
  flat.title = circuit.title;
  flat.meta = circuit.meta;
  flat.models = circuit.models;
  std::set<std::string> model_names;
  for (const auto& m : flat.models) model_names.insert(fold_case(m.name));

  FlattenContext ctx{circuit, global_net_set(circuit), flat.components};
  for (const Component& c : circuit.components) {
    if (c.kind != ComponentKind::subckt_instance) {
      flat.components.push_back(c);
      continue;
    }
    expand(ctx, c, c.refdes, {}, 0);
  }
  for (const auto& [key, sub] : circuit.subcircuits) {
    for (const auto& m : sub.models) {
      if (model_names.insert(fold_case(m.name)).second) flat.models.push_back(m);
    }
  }
  return flat;
}

std::vector<std::string> collect_nets(const CircuitIR& circuit) {
  std::set<std::string> nets;
  for (const auto& c : circuit.components) {
    for (const auto& t : c.terminals) nets.insert(is_ground(t) ? "0" : fold_case(t));
  }
  return {nets.begin(), nets.end()};
}

std::vector<StructuralIssue> validate_connectivity(const CircuitIR& circuit) {
  std::vector<StructuralIssue> issues;

  CircuitIR flat;
  bool flattened = false;
  // Instances of undefined subcircuits and port-count mismatches are reported,
  // then left out so the rest of the graph can still be checked.
  CircuitIR pruned = circuit;
  pruned.components.clear();
  for (const auto& c : circuit.components) {
    if (c.kind == ComponentKind::subckt_instance) {
      const SubcircuitDef* def = circuit.find_subcircuit(c.model);
      if (!def) {
        issues.push_back({IssueKind::unknown_subcircuit, c.model,
                          "Subcircuit " + c.model + " used by " + c.refdes + " is not defined"});
        continue;
      }
      if (def->ports.size() != c.terminals.size()) {
        issues.push_back({IssueKind::port_mismatch, c.refdes,
                          c.refdes + " connects " + std::to_string(c.terminals.size()) + " nets to " + def->name +
                              " which has " + std::to_string(def->ports.size()) + " ports"});
      }
    }
    pruned.components.push_back(c);
  }
  try {
    flat = flatten(pruned);
    flattened = true;
  } catch (const UnknownSubcircuit& e) {
    issues.push_back({IssueKind::unknown_subcircuit, e.name(), "Subcircuit " + e.name() + " is not defined"});
  }
  if (!flattened) flat = pruned;

  std::map<std::string, std::pair<std::string, int>> touches;  // folded -> (display name, count)
  bool has_ground = false;
  for (const auto& c : flat.components) {
    for (const auto& t : c.terminals) {
      if (is_ground(t)) {
        has_ground = true;
        continue;
      }
      auto& entry = touches[fold_case(t)];
      if (entry.first.empty() || t < entry.first) entry.first = t;
      ++entry.second;
    }
  }

  const NodeRoles& roles = circuit.meta;
  std::set<std::string> driven_roles;
  if (roles.input) driven_roles.insert(fold_case(*roles.input));
  if (roles.supply) driven_roles.insert(fold_case(roles.supply->net));
  if (roles.reference) driven_roles.insert(fold_case(roles.reference->net));

  auto present = [&](const std::string& net) { return is_ground(net) || touches.contains(fold_case(net)); };
  if (roles.input && !present(*roles.input)) {
    issues.push_back({IssueKind::missing_node, *roles.input, "Missing " + *roles.input + " node"});
  }
  if (!roles.output.empty() && !present(roles.output)) {
    issues.push_back({IssueKind::missing_node, roles.output, "Missing " + roles.output + " node"});
  }
  if (!has_ground) issues.push_back({IssueKind::no_ground, "0", "No ground node (0/gnd) in circuit"});

  for (const auto& [key, entry] : touches) {
    if (entry.second < 2 && !driven_roles.contains(key)) {
      issues.push_back({IssueKind::floating_net, entry.first,
                        "Floating node " + entry.first + ": connected to only one terminal"});
    }
  }

  std::sort(issues.begin(), issues.end(), [](const StructuralIssue& a, const StructuralIssue& b) {
    return std::tie(a.kind, a.subject, a.message) < std::tie(b.kind, b.subject, b.message);
  });
  issues.erase(std::unique(issues.begin(), issues.end()), issues.end());
  return issues;
}

}  // namespace anaforge
