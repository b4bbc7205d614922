#include "anaforge/library.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"
#include "anaforge/verification.hpp"

namespace anaforge {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& stop_words() {
  static const std::set<std::string> words = {"a",     "an",   "and", "be",   "circuit", "design", "for",  "in",
                                              "is",    "of",   "on",  "please", "that",  "the",    "this", "to",
                                              "using", "with", "using"};
  return words;
}

void replace_all(std::string& text, const std::string& from, const std::string& to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
}

std::string word_synonym(const std::string& word) {
  static const std::map<std::string, std::string> table = {
      {"amp", "amplifier"},     {"amps", "amplifier"},         {"amplifiers", "amplifier"},
      {"opamps", "opamp"},      {"opmap", "opamp"},            {"loads", "load"},
      {"mirrors", "mirror"},    {"oscillators", "oscillator"}, {"filters", "filter"},
      {"inverters", "inverter"}, {"comparators", "comparator"}, {"mixers", "mixer"},
      {"stages", "stage"},      {"schmitt", "schmitt"},        {"substractor", "subtractor"},
      {"substrator", "subtractor"}};
  auto it = table.find(word);
  return it == table.end() ? word : it->second;
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

std::string type_words(CircuitType type) {
  std::string name(to_string(type));
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw StorageError("cannot write " + path.string());
}

/// Writes `text` to a temporary sibling and renames it over `path`.
void write_atomic(const fs::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp-" + std::to_string(::getpid());
  write_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot replace " + path.string() + ": " + ec.message());
}

std::string subcircuit_name(CircuitType type) {
  if (type == CircuitType::opamp) return "Opamp";
  std::string out;
  bool upper = true;
  for (char c : std::string(to_string(type))) {
    if (c == '_') {
      upper = true;
      continue;
    }
    out.push_back(upper ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c);
    upper = false;
  }
  return out;
}

std::vector<std::string> port_roles(CircuitType type, std::size_t inputs) {
  std::vector<std::string> roles;
  if (type == CircuitType::opamp && inputs == 2) {
    roles = {"the non-inverting input", "the inverting input"};
  } else if (type == CircuitType::mixer && inputs == 2) {
    roles = {"the RF input", "the LO input"};
  } else {
    for (std::size_t i = 0; i < inputs; ++i)
      roles.push_back(inputs == 1 ? "the input" : "input " + std::to_string(i + 1));
  }
  roles.push_back("the output");
  return roles;
}

std::string spec_text(const std::map<std::string, double>& specs) {
  std::string out;
  for (const auto& [name, value] : specs) {
    if (!out.empty()) out += ", ";
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%s=%.6g", name.c_str(), value);
    out += buffer;
  }
  return out;
}

std::string sanitize(std::string name) {
  std::replace(name.begin(), name.end(), '.', '_');
  return name;
}

}  // namespace

std::vector<std::string> canonical_tokens(std::string_view text) {
  std::string t;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    t.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
  }
  t = " " + t + " ";
  for (const auto& [from, to] : std::vector<std::pair<std::string, std::string>>{
           {" operational amplifiers ", " opamp "}, {" operational amplifier ", " opamp "}, {" op amps ", " opamp "},
           {" op amp ", " opamp "}, {" op map ", " opamp "}, {" low pass ", " lowpass "},
           {" high pass ", " highpass "}, {" band pass ", " bandpass "}, {" band stop ", " bandstop "},
           {" band reject ", " bandstop "}, {" notch ", " bandstop "}})
    replace_all(t, from, to);
  std::istringstream words(t);
  std::set<std::string> out;
  for (std::string w; words >> w;) {
    w = word_synonym(w);
    if (!stop_words().contains(w)) out.insert(w);
  }
  return {out.begin(), out.end()};
}

std::string description_class(const ToolKey& key) {
  std::string out(to_string(key.circuit_type));
  out += ":";
  for (const auto& t : canonical_tokens(key.description)) out += t + " ";
  return out;
}

std::optional<std::string> primary_spec(CircuitType type) {
  if (type == CircuitType::amplifier || type == CircuitType::opamp) return "gain_db";
  return std::nullopt;
}

std::string ToolEntry::id() const {
  return std::string(to_string(key.circuit_type)) + "-" + fnv1a_hex(description_class(key)).substr(0, 12);
}

nlohmann::json to_json(const ToolEntry& entry) {
  nlohmann::json specs = nlohmann::json::object();
  for (const auto& [k, v] : entry.key.specs) specs[k] = v;
  return {{"id", entry.id()},
          {"description", entry.key.description},
          {"circuit_type", std::string(to_string(entry.key.circuit_type))},
          {"specs", specs},
          {"subcircuit", {{"name", entry.value.subcircuit.name}, {"ports", entry.value.subcircuit.ports}}},
          {"provenance",
           {{"task_id", entry.provenance.task_id},
            {"run_id", entry.provenance.run_id},
            {"timestamp", entry.provenance.timestamp}}}};
}

ToolEntry tool_entry_from_json(const nlohmann::json& key_doc, std::string netlist_text, std::string usage) {
  ToolEntry entry;
  entry.key.description = key_doc.at("description").get<std::string>();
  auto type = circuit_type_from_string(key_doc.at("circuit_type").get<std::string>());
  if (!type) throw StorageError("unknown circuit type in tool entry");
  entry.key.circuit_type = *type;
  for (const auto& [k, v] : key_doc.at("specs").items()) entry.key.specs[k] = v.get<double>();
  const auto& p = key_doc.at("provenance");
  entry.provenance = {p.value("task_id", 0), p.value("run_id", std::string()), p.value("timestamp", std::string())};
  auto name = key_doc.at("subcircuit").at("name").get<std::string>();
  std::string ports;
  for (const auto& port : key_doc.at("subcircuit").at("ports")) ports += " " + port.get<std::string>();
  // A throw-away instance gives the parser a top-level component.
  auto parsed = parse_netlist_lenient("tool\n" + netlist_text + "\nXtool" + ports + " " + name + "\n.end\n");
  const SubcircuitDef* def = parsed.circuit.find_subcircuit(name);
  if (!def) throw StorageError("tool entry netlist lacks subcircuit " + name);
  entry.value.subcircuit = *def;
  // Models written before the .subckt line belong to the tool as well.
  for (const auto& m : parsed.circuit.models) entry.value.subcircuit.models.push_back(m);
  entry.value.netlist_text = std::move(netlist_text);
  entry.value.usage = std::move(usage);
  return entry;
}

ToolEntry make_tool_entry(const CircuitIR& circuit, const DesignTask& task, const CheckReport& report,
                          const std::string& run_id, const std::string& timestamp) {
  if (report.verdict != Verdict::pass) throw PreconditionError("only verified circuits can be archived");
  CircuitIR flat = flatten(circuit);

  std::vector<std::string> inputs;
  if (task.input_node) inputs.push_back(*task.input_node);
  for (const auto& e : task.extra_inputs) inputs.push_back(e);
  std::vector<std::string> ports = inputs;
  ports.push_back(task.output_node);

  std::string supply = flat.meta.supply ? flat.meta.supply->net : std::string("Vdd");
  double supply_volts = flat.meta.supply ? flat.meta.supply->volts : task.supply_volts;
  auto is_stimulus = [&](const Component& c) {
    if (c.kind != ComponentKind::vsource || c.terminals.size() != 2 || !is_ground(c.terminals[1])) return false;
    if (iequals(c.terminals[0], supply)) return true;
    return std::any_of(inputs.begin(), inputs.end(), [&](const std::string& n) { return iequals(n, c.terminals[0]); });
  };

  SubcircuitDef def;
  def.name = subcircuit_name(task.circuit_type);
  def.ports = ports;
  def.models = flat.models;
  for (const auto& c : flat.components) {
    if (is_stimulus(c)) continue;
    Component copy = c;
    copy.refdes = sanitize(copy.refdes);
    for (auto& t : copy.terminals) t = sanitize(t);
    def.body.push_back(std::move(copy));
  }

  std::ostringstream text;
  text << ".subckt " << def.name;
  for (const auto& p : def.ports) text << ' ' << p;
  text << '\n';
  for (const auto& m : def.models) text << model_line(m) << '\n';
  for (const auto& c : def.body) text << component_line(c) << '\n';
  text << ".ends " << def.name << '\n';

  auto roles = port_roles(task.circuit_type, inputs.size());
  std::ostringstream usage;
  usage << "Subcircuit " << def.name << " (" << type_words(task.circuit_type) << ": " << task.description << ").\n";
  usage << "Parameter order: ";
  for (std::size_t i = 0; i < ports.size(); ++i)
    usage << (i ? ", " : "") << ports[i] << " (" << roles[i] << ")";
  usage << ".\nInstantiate it as:\nX1";
  for (const auto& p : ports) usage << " <" << p << ">";
  usage << ' ' << def.name << "\n";
  char supply_line[160];
  std::snprintf(supply_line, sizeof supply_line,
                "It is powered from the global supply net %s (%g V), which the top-level netlist must define.\n",
                supply.c_str(), supply_volts);
  usage << supply_line;

  ToolEntry entry;
  entry.key.description = task.description;
  entry.key.circuit_type = task.circuit_type;
  entry.key.specs = report.measurements;
  entry.value.subcircuit = std::move(def);
  entry.value.netlist_text = text.str();
  entry.value.usage = usage.str();
  entry.provenance = {task.task_id, run_id, timestamp};
  return entry;
}

ToolLibrary::ToolLibrary(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "entries", ec);
  if (ec) throw StorageError("cannot create library at " + root_.string() + ": " + ec.message());
  for (const auto& dir : fs::directory_iterator(root_ / "entries")) {
    if (!dir.is_directory() || dir.path().filename().string().starts_with(".")) continue;
    try {
      auto key = nlohmann::json::parse(read_file(dir.path() / "key.json"));
      auto entry = tool_entry_from_json(key, read_file(dir.path() / "netlist.cir"), read_file(dir.path() / "usage.txt"));
      entries_.emplace(entry.id(), std::move(entry));
    } catch (const nlohmann::json::exception& e) {
      throw StorageError("corrupt library entry " + dir.path().string() + ": " + e.what());
    }
  }
  write_index();
}

void ToolLibrary::write_index() const {
  nlohmann::json index = nlohmann::json::array();
  for (const auto& [id, entry] : entries_) index.push_back(to_json(entry));
  write_atomic(root_ / "index.json", index.dump(2) + "\n");
}

AddResult ToolLibrary::add_tool(const ToolEntry& entry) {
  std::unique_lock lock(mutex_);
  const std::string id = entry.id();
  AddResult result;
  auto existing = entries_.find(id);
  if (existing != entries_.end()) {
    if (auto spec = primary_spec(entry.key.circuit_type)) {
      auto value = [&](const ToolEntry& e) {
        auto it = e.key.specs.find(*spec);
        return it == e.key.specs.end() ? -HUGE_VAL : it->second;
      };
      if (!(value(entry) > value(existing->second))) return result;
    }
    result.replaced = existing->second;
  }

  const fs::path final_dir = root_ / "entries" / id;
  const fs::path tmp_dir = root_ / "entries" / ("." + id + ".tmp-" + std::to_string(::getpid()));
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  fs::create_directories(tmp_dir, ec);
  if (ec) throw StorageError("cannot create " + tmp_dir.string() + ": " + ec.message());
  write_file(tmp_dir / "key.json", to_json(entry).dump(2) + "\n");
  write_file(tmp_dir / "netlist.cir", entry.value.netlist_text);
  write_file(tmp_dir / "usage.txt", entry.value.usage);

  if (fs::exists(final_dir)) {
    fs::create_directories(root_ / "archive", ec);
    int n = 1;
    fs::path archived;
    do archived = root_ / "archive" / (id + "-" + std::to_string(n++));
    while (fs::exists(archived));
    fs::rename(final_dir, archived, ec);
    if (ec) throw StorageError("cannot archive " + final_dir.string() + ": " + ec.message());
  }
  fs::rename(tmp_dir, final_dir, ec);
  if (ec) throw StorageError("cannot store " + final_dir.string() + ": " + ec.message());

  entries_.insert_or_assign(id, entry);
  write_index();
  result.stored = true;
  return result;
}

double ToolLibrary::score(std::string_view query, const ToolEntry& entry) {
  auto q = canonical_tokens(query);
  if (q.empty()) return 0.0;
  auto e = canonical_tokens(entry.key.description + " " + type_words(entry.key.circuit_type));
  std::vector<std::string> common;
  std::set_intersection(q.begin(), q.end(), e.begin(), e.end(), std::back_inserter(common));
  return static_cast<double>(common.size()) / static_cast<double>(q.size());
}

std::vector<ToolEntry> ToolLibrary::query(std::string_view task_description, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  struct Ranked {
    double score;
    double spec;
    const ToolEntry* entry;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, entry] : entries_) {
    double s = score(task_description, entry);
    if (s < 0.2) continue;
    double spec = -HUGE_VAL;
    if (auto name = primary_spec(entry.key.circuit_type))
      if (auto it = entry.key.specs.find(*name); it != entry.key.specs.end()) spec = it->second;
    ranked.push_back({s, spec, &entry});
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.spec > b.spec;
  });
  std::vector<ToolEntry> out;
  for (const auto& r : ranked) {
    if (out.size() >= limit) break;
    out.push_back(*r.entry);
  }
  return out;
}

std::vector<ToolEntry> ToolLibrary::list() const {
  std::shared_lock lock(mutex_);
  std::vector<ToolEntry> out;
  for (const auto& [id, entry] : entries_) out.push_back(entry);
  return out;
}

std::string render_context(const std::vector<ToolEntry>& entries) {
  std::ostringstream out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (i) out << '\n';
    out << e.value.usage;
    if (!e.key.specs.empty()) out << "Measured specs: " << spec_text(e.key.specs) << "\n";
    out << "```spice\n" << e.value.netlist_text << "```\n";
  }
  return out.str();
}

void copy_library(const fs::path& source, const fs::path& destination) {
  std::error_code ec;
  fs::remove_all(destination, ec);
  fs::create_directories(destination.parent_path().empty() ? fs::path(".") : destination.parent_path(), ec);
  if (fs::exists(source)) {
    fs::copy(source, destination, fs::copy_options::recursive, ec);
    if (ec) throw StorageError("cannot copy library " + source.string() + ": " + ec.message());
  } else {
    fs::create_directories(destination / "entries", ec);
  }
}

}  // namespace anaforge
