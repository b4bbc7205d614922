#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "anaforge/netlist.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

struct LogicalLine {
  int number = 0;  // 1-based line of the first physical line
  std::string text;
};

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_inline_comment(const std::string& line) {
  std::size_t cut = line.find(';');
  for (std::size_t i = 1; i < line.size() && i < cut; ++i) {
    if (line[i] == '$' && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
      cut = i;
      break;
    }
  }
  return cut == std::string::npos ? line : line.substr(0, cut);
}

bool is_meta_line(std::string_view text) {
  std::string t = fold_case(trim(text));
  if (t.empty() || t.front() != '*') return false;
  t = trim(std::string_view(t).substr(1));
  return t.rfind("meta", 0) == 0 && (t.size() == 4 || std::isspace(static_cast<unsigned char>(t[4])));
}

std::vector<std::string> split_physical(std::string_view deck) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : deck) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

// Tokens with parenthesised groups kept whole and `key = value` joined.
std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> raw;
  std::string cur;
  int depth = 0;
  for (char c : text) {
    if (c == '(') ++depth;
    if (c == ')') depth = std::max(0, depth - 1);
    bool sep = depth == 0 && (std::isspace(static_cast<unsigned char>(c)) || c == ',');
    if (sep) {
      if (!cur.empty()) raw.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) raw.push_back(std::move(cur));

  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == "=" && !out.empty() && i + 1 < raw.size()) {
      out.back() += "=" + raw[++i];
    } else if (!raw[i].empty() && raw[i].front() == '=' && !out.empty()) {
      out.back() += raw[i];
    } else if (!raw[i].empty() && raw[i].back() == '=' && i + 1 < raw.size()) {
      out.push_back(raw[i] + raw[i + 1]);
      ++i;
    } else if (!raw[i].empty() && raw[i].front() == '(' && !out.empty() &&
               std::isalpha(static_cast<unsigned char>(out.back().back()))) {
      out.back() += raw[i];  // "SIN (0 1 1k)" -> "SIN(0 1 1k)"
    } else {
      out.push_back(raw[i]);
    }
  }
  return out;
}

std::optional<std::pair<std::string, std::string>> split_assignment(const std::string& token) {
  auto eq = token.find('=');
  if (eq == std::string::npos || eq == 0) return std::nullopt;
  return std::make_pair(fold_case(token.substr(0, eq)), token.substr(eq + 1));
}

// Canonical form of a transient source function: upper-case name, single
// spaces between arguments.
std::optional<std::string> canonical_waveform(const std::string& token) {
  auto open = token.find('(');
  if (open == std::string::npos || token.back() != ')') return std::nullopt;
  std::string name = fold_case(token.substr(0, open));
  static const std::set<std::string> known{"sin", "pulse", "pwl", "exp", "sffm", "am"};
  if (!known.contains(name)) return std::nullopt;
  std::string inner = token.substr(open + 1, token.size() - open - 2);
  std::vector<std::string> args;
  std::string cur;
  for (char c : inner) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) args.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) args.push_back(std::move(cur));
  std::string out;
  for (char c : name) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  out += "(";
  for (std::size_t i = 0; i < args.size(); ++i) out += (i ? " " : "") + args[i];
  out += ")";
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view deck) : deck_(deck) {}

  ParsedNetlist run(bool require_meta) {
    auto physical = split_physical(deck_);
    std::vector<LogicalLine> lines;
    bool title_taken = false;
    for (std::size_t i = 0; i < physical.size(); ++i) {
      const int number = static_cast<int>(i) + 1;
      std::string text = physical[i];
      if (!title_taken) {
        if (trim(text).empty()) continue;
        title_taken = true;
        if (!is_meta_line(text)) {
          out_.circuit.title = trim(text);
          continue;
        }
      }
      std::string t = trim(text);
      if (!t.empty() && t.front() == '+' && !lines.empty()) {
        lines.back().text += " " + strip_inline_comment(t.substr(1));
        continue;
      }
      lines.push_back({number, t});
    }

    for (const auto& line : lines) handle(line);
    if (in_subckt_) {
      out_.diagnostics.push_back({current_sub_line_, current_sub_.name, "unterminated .subckt block"});
      out_.circuit.add_subcircuit(std::move(current_sub_));
    }

    if (out_.circuit.components.empty()) {
      int line = lines.empty() ? 1 : lines.front().number;
      std::string snippet = lines.empty() ? out_.circuit.title : lines.front().text;
      throw ParseError(line, snippet.substr(0, 80), "no component could be recovered");
    }
    finish_meta(require_meta);
    return std::move(out_);
  }

 private:
  void handle(const LogicalLine& line) {
    const std::string& t = line.text;
    if (t.empty()) return;
    if (t.front() == '*') {
      if (is_meta_line(t)) handle_meta(line);
      return;
    }
    std::string body = trim(strip_inline_comment(t));
    if (body.empty()) return;
    if (in_control_) {
      if (fold_case(body).rfind(".endc", 0) == 0) in_control_ = false;
      return;
    }
    if (body.front() == '.') {
      handle_directive(line, body);
      return;
    }
    handle_element(line, body);
  }

  void handle_meta(const LogicalLine& line) {
    std::string rest = trim(line.text);
    rest = trim(std::string_view(rest).substr(1));  // '*'
    rest = trim(std::string_view(rest).substr(4));  // 'META'
    for (const auto& token : tokenize(rest)) {
      auto kv = split_assignment(token);
      if (!kv) {
        out_.diagnostics.push_back({line.number, line.text, "malformed META directive"});
        continue;
      }
      meta_[kv->first] = {line.number, trim(kv->second)};
    }
  }

  void handle_directive(const LogicalLine& line, const std::string& body) {
    auto tokens = tokenize(body);
    std::string name = fold_case(tokens.front());
    if (name == ".model") {
      if (tokens.size() < 3) {
        diag(line, "incomplete .model");
        return;
      }
      DeviceModel model;
      model.name = tokens[1];
      std::string type = tokens[2];
      std::vector<std::string> param_tokens;
      if (auto open = type.find('('); open != std::string::npos) {
        param_tokens = tokenize(type.substr(open + 1, type.size() - open - 2));
        type = type.substr(0, open);
      }
      model.type_token = fold_case(type);
      model.kind = model.type_token == "nmos" ? DeviceKind::nmos
                   : model.type_token == "pmos" ? DeviceKind::pmos
                                                : DeviceKind::other;
      for (std::size_t i = 3; i < tokens.size(); ++i) {
        std::string tok = tokens[i];
        if (!tok.empty() && tok.front() == '(') tok = tok.substr(1, tok.size() - (tok.back() == ')' ? 2 : 1));
        for (const auto& sub : tokenize(tok)) param_tokens.push_back(sub);
      }
      for (const auto& tok : param_tokens) {
        auto kv = split_assignment(tok);
        auto value = kv ? parse_spice_number(kv->second) : std::nullopt;
        if (!value) {
          diag(line, "unreadable model parameter '" + tok + "'");
          continue;
        }
        model.params[kv->first] = *value;
      }
      (in_subckt_ ? current_sub_.models : out_.circuit.models).push_back(std::move(model));
    } else if (name == ".subckt") {
      if (in_subckt_) {
        diag(line, "nested .subckt definitions are not supported");
        return;
      }
      if (tokens.size() < 2) {
        diag(line, "incomplete .subckt");
        return;
      }
      in_subckt_ = true;
      current_sub_line_ = line.number;
      current_sub_ = SubcircuitDef{};
      current_sub_.name = tokens[1];
      for (std::size_t i = 2; i < tokens.size(); ++i) {
        if (fold_case(tokens[i]) == "params:" || tokens[i].find('=') != std::string::npos) break;
        current_sub_.ports.push_back(tokens[i]);
      }
    } else if (name == ".ends") {
      if (!in_subckt_) {
        diag(line, ".ends without .subckt");
        return;
      }
      in_subckt_ = false;
      out_.circuit.add_subcircuit(std::move(current_sub_));
      current_sub_ = SubcircuitDef{};
    } else if (name == ".control") {
      in_control_ = true;
    } else if (name == ".end" || name == ".op" || name == ".dc" || name == ".ac" || name == ".tran" ||
               name == ".save" || name == ".options" || name == ".option" || name == ".print" ||
               name == ".plot" || name == ".probe" || name == ".temp" || name == ".global" ||
               name == ".meas" || name == ".measure") {
      // analysis and output control lines are regenerated by the simulator driver
    } else {
      diag(line, "unsupported directive " + tokens.front());
    }
  }

  void handle_element(const LogicalLine& line, const std::string& body) {
    auto tokens = tokenize(body);
    const std::string& refdes = tokens.front();
    const char prefix = static_cast<char>(std::tolower(static_cast<unsigned char>(refdes.front())));
    Component c;
    c.refdes = refdes;
    bool ok = false;
    switch (prefix) {
      case 'm': ok = parse_mosfet(line, tokens, c); break;
      case 'r': ok = parse_passive(line, tokens, c, ComponentKind::resistor); break;
      case 'c': ok = parse_passive(line, tokens, c, ComponentKind::capacitor); break;
      case 'l': ok = parse_passive(line, tokens, c, ComponentKind::inductor); break;
      case 'v': ok = parse_source(line, tokens, c, ComponentKind::vsource); break;
      case 'i': ok = parse_source(line, tokens, c, ComponentKind::isource); break;
      case 'e': ok = parse_vcvs(line, tokens, c); break;
      case 'x': ok = parse_instance(line, tokens, c); break;
      default: diag(line, "unsupported element type '" + std::string(1, refdes.front()) + "'"); return;
    }
    if (!ok) return;
    auto& target = in_subckt_ ? current_sub_.body : out_.circuit.components;
    for (const auto& existing : target) {
      if (iequals(existing.refdes, c.refdes)) {
        throw InvalidCircuit({c.refdes + ": duplicate refdes (line " + std::to_string(line.number) + ")"});
      }
    }
    target.push_back(std::move(c));
  }

  bool parse_mosfet(const LogicalLine& line, const std::vector<std::string>& tokens, Component& c) {
    c.kind = ComponentKind::mosfet;
    std::vector<std::string> positional;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (auto kv = split_assignment(tokens[i])) {
        auto value = parse_spice_number(kv->second);
        if (!value) {
          diag(line, "unreadable MOSFET parameter '" + tokens[i] + "'");
          return false;
        }
        c.params[kv->first] = *value;
      } else {
        positional.push_back(tokens[i]);
      }
    }
    if (positional.size() != 5) {
      diag(line, "MOSFET needs drain gate source bulk model");
      return false;
    }
    c.terminals.assign(positional.begin(), positional.begin() + 4);
    c.model = positional[4];
    return true;
  }

  bool parse_passive(const LogicalLine& line, const std::vector<std::string>& tokens, Component& c,
                     ComponentKind kind) {
    c.kind = kind;
    if (tokens.size() < 4) {
      diag(line, "two nodes and a value expected");
      return false;
    }
    c.terminals = {tokens[1], tokens[2]};
    std::optional<double> value;
    for (std::size_t i = 3; i < tokens.size(); ++i) {
      if (auto kv = split_assignment(tokens[i])) {
        auto v = parse_spice_number(kv->second);
        if (kv->first == "ic" && v) {
          c.initial_condition = *v;
        } else if ((kv->first == "r" || kv->first == "c" || kv->first == "l" || kv->first == "value") && v) {
          value = *v;
        } else {
          diag(line, "ignored parameter '" + tokens[i] + "'");
        }
      } else if (!value) {
        value = parse_spice_number(tokens[i]);
        if (!value) {
          diag(line, "unreadable value '" + tokens[i] + "'");
          return false;
        }
      }
    }
    if (!value) {
      diag(line, "missing value");
      return false;
    }
    c.params["value"] = *value;
    return true;
  }

  bool parse_source(const LogicalLine& line, const std::vector<std::string>& tokens, Component& c,
                    ComponentKind kind) {
    c.kind = kind;
    if (tokens.size() < 3) {
      diag(line, "source needs two nodes");
      return false;
    }
    c.terminals = {tokens[1], tokens[2]};
    for (std::size_t i = 3; i < tokens.size(); ++i) {
      std::string key = fold_case(tokens[i]);
      if (key == "dc" && i + 1 < tokens.size()) {
        if (auto v = parse_spice_number(tokens[i + 1])) {
          c.params["dc"] = *v;
          ++i;
          continue;
        }
      }
      if (key == "ac") {
        double mag = 1.0;
        if (i + 1 < tokens.size()) {
          if (auto v = parse_spice_number(tokens[i + 1])) {
            mag = *v;
            ++i;
            if (i + 1 < tokens.size()) {
              if (auto ph = parse_spice_number(tokens[i + 1])) {
                c.params["ac_phase"] = *ph;
                ++i;
              }
            }
          }
        }
        c.params["ac"] = mag;
        continue;
      }
      if (auto wf = canonical_waveform(tokens[i])) {
        c.waveform = *wf;
        continue;
      }
      if (auto v = parse_spice_number(tokens[i]); v && !c.params.contains("dc")) {
        c.params["dc"] = *v;
        continue;
      }
      diag(line, "ignored source token '" + tokens[i] + "'");
    }
    return true;
  }

  bool parse_vcvs(const LogicalLine& line, const std::vector<std::string>& tokens, Component& c) {
    c.kind = ComponentKind::vcvs;
    if (tokens.size() != 6) {
      diag(line, "linear VCVS expects four nodes and a gain");
      return false;
    }
    auto gain = parse_spice_number(tokens[5]);
    if (!gain) {
      diag(line, "unreadable gain '" + tokens[5] + "'");
      return false;
    }
    c.terminals = {tokens[1], tokens[2], tokens[3], tokens[4]};
    c.params["gain"] = *gain;
    return true;
  }

  bool parse_instance(const LogicalLine& line, const std::vector<std::string>& tokens, Component& c) {
    c.kind = ComponentKind::subckt_instance;
    std::vector<std::string> positional;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      if (fold_case(tokens[i]) == "params:") break;
      if (tokens[i].find('=') != std::string::npos) continue;
      positional.push_back(tokens[i]);
    }
    if (positional.size() < 2) {
      diag(line, "subcircuit instance needs ports and a subcircuit name");
      return false;
    }
    c.model = positional.back();
    positional.pop_back();
    c.terminals = std::move(positional);
    return true;
  }

  void finish_meta(bool require_meta) {
    NodeRoles& roles = out_.circuit.meta;
    auto get = [&](const char* key) -> std::optional<std::string> {
      auto it = meta_.find(key);
      if (it == meta_.end()) return std::nullopt;
      return it->second.second;
    };
    auto net_voltage = [&](const char* key) -> std::optional<NetVoltage> {
      auto text = get(key);
      if (!text) return std::nullopt;
      auto colon = text->rfind(':');
      std::optional<double> volts = colon == std::string::npos ? std::nullopt
                                                                : parse_spice_number(text->substr(colon + 1));
      if (!volts) {
        if (require_meta) throw MissingMeta(std::string("META ") + key + " must be net:volts, got '" + *text + "'");
        return std::nullopt;
      }
      return NetVoltage{text->substr(0, colon), *volts};
    };

    std::vector<std::string> missing;
    if (auto type = get("type")) {
      if (auto parsed = circuit_type_from_string(*type)) {
        roles.circuit_type = *parsed;
      } else if (require_meta) {
        throw MissingMeta("unknown circuit type in META: '" + *type + "'");
      }
    } else {
      missing.push_back("type");
    }
    if (auto output = get("output")) {
      roles.output = *output;
    } else {
      missing.push_back("output");
    }
    if (auto input = get("input"); input && *input != "-" && !input->empty()) roles.input = *input;
    roles.supply = net_voltage("supply");
    roles.reference = net_voltage("reference");
    for (const auto& [key, entry] : meta_) {
      static const std::set<std::string> known{"type", "input", "output", "supply", "reference"};
      if (!known.contains(key)) out_.diagnostics.push_back({entry.first, key, "unknown META key"});
    }
    if (require_meta && !missing.empty()) {
      std::string what = "node roles undetermined; missing META";
      for (const auto& m : missing) what += " " + m;
      throw MissingMeta(what);
    }
  }

  void diag(const LogicalLine& line, std::string reason) {
    out_.diagnostics.push_back({line.number, line.text.substr(0, 120), std::move(reason)});
  }

  std::string_view deck_;
  ParsedNetlist out_;
  std::map<std::string, std::pair<int, std::string>> meta_;
  bool in_subckt_ = false;
  bool in_control_ = false;
  int current_sub_line_ = 0;
  SubcircuitDef current_sub_;
};

}  // namespace

ParsedNetlist parse_netlist(std::string_view deck) { return Parser(deck).run(true); }

ParsedNetlist parse_netlist_lenient(std::string_view deck) { return Parser(deck).run(false); }

}  // namespace anaforge
