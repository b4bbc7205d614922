#include <algorithm>
#include <cstdio>
#include <cmath>
#include <regex>
#include <set>
#include <sstream>

#include "anaforge/circuit.hpp"
#include "anaforge/netlist.hpp"
#include "anaforge/sizing.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

std::vector<std::string> split_ws(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string trim(std::string_view text) {
  const auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

double parse_value(const std::string& text, int line_no, const std::string& line) {
  std::string t = text;
  while (!t.empty() && (t.back() == ',' || t.back() == ';')) t.pop_back();
  auto v = parse_spice_number(t);
  if (!v) throw ParseError(line_no, line, "bad number '" + text + "'");
  return *v;
}

/// `name=value` pairs of the tokens after the directive word.
std::vector<std::pair<std::string, std::string>> key_values(const std::vector<std::string>& tokens, std::size_t from,
                                                            int line_no, const std::string& line) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const auto eq = tokens[i].find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(line_no, line, "expected name=value, got '" + tokens[i] + "'");
    out.emplace_back(tokens[i].substr(0, eq), tokens[i].substr(eq + 1));
  }
  return out;
}

bool parse_bool(std::string text, int line_no, const std::string& line) {
  text = fold_case(text);
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ParseError(line_no, line, "bad flag '" + text + "'");
}

const std::regex& placeholder_regex() {
  static const std::regex re(R"(\{([A-Za-z_][A-Za-z0-9_]*)\})");
  return re;
}

std::string ratio_text(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", ratio);
  return buf;
}

std::optional<double> lookup(const ParamSpace& space, const std::string& name, bool use_max) {
  for (const auto& r : space.ranges)
    if (iequals(r.name, name)) return use_max ? r.max : r.min;
  for (const auto& [k, v] : space.fixed)
    if (iequals(k, name)) return v;
  return std::nullopt;
}

/// Length bounds (min, max) paired with a width parameter, if any.
std::optional<std::pair<double, double>> paired_length(const ParamSpace& space, const std::string& suffix) {
  const std::string lname = "l_" + suffix;
  if (auto lo = lookup(space, lname, false)) return std::pair{*lo, *lookup(space, lname, true)};
  for (const auto& line : split_lines(space.builder)) {
    const auto tokens = split_ws(line);
    if (tokens.empty() || !iequals(tokens[0], suffix)) continue;
    for (const auto& tok : tokens) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || !iequals(tok.substr(0, eq), "l")) continue;
      const std::string value = tok.substr(eq + 1);
      std::smatch m;
      if (std::regex_match(value, m, placeholder_regex())) {
        if (auto lo = lookup(space, m[1].str(), false)) return std::pair{*lo, *lookup(space, m[1].str(), true)};
        return std::nullopt;
      }
      if (auto v = parse_spice_number(value)) return std::pair{*v, *v};
    }
  }
  return std::nullopt;
}

std::string width_suffix(const ParamRange& r) {
  const std::string folded = fold_case(r.name);
  if (folded.rfind("w_", 0) == 0) return r.name.substr(2);
  if (r.kind == ParamKind::width) {
    const auto us = r.name.find('_');
    if (us != std::string::npos) return r.name.substr(us + 1);
  }
  return {};
}

}  // namespace

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::width: return "width";
    case ParamKind::length: return "length";
    case ParamKind::resistance: return "resistance";
    case ParamKind::capacitance: return "capacitance";
    case ParamKind::bias: return "bias";
    case ParamKind::other: return "other";
  }
  return "other";
}

std::optional<ParamKind> param_kind_from_string(std::string_view text) {
  for (auto k : {ParamKind::width, ParamKind::length, ParamKind::resistance, ParamKind::capacitance, ParamKind::bias,
                 ParamKind::other})
    if (iequals(to_string(k), text)) return k;
  return std::nullopt;
}

const ParamRange* ParamSpace::find(std::string_view name) const {
  for (const auto& r : ranges)
    if (iequals(r.name, name)) return &r;
  return nullptr;
}

std::vector<std::string> ParamSpace::placeholders() const {
  std::vector<std::string> out;
  for (std::sregex_iterator it(builder.begin(), builder.end(), placeholder_regex()), end; it != end; ++it) {
    const std::string name = (*it)[1].str();
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::string ParamSpace::instantiate(const ParamValues& values) const {
  std::string out;
  std::size_t last = 0;
  for (std::sregex_iterator it(builder.begin(), builder.end(), placeholder_regex()), end; it != end; ++it) {
    const std::string name = (*it)[1].str();
    out.append(builder, last, static_cast<std::size_t>(it->position()) - last);
    double value = 0.0;
    if (auto v = values.find(name); v != values.end()) {
      value = v->second;
    } else if (auto f = fixed.find(name); f != fixed.end()) {
      value = f->second;
    } else {
      throw PreconditionError("no value for placeholder {" + name + "}");
    }
    out += format_number(value);
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(builder, last, std::string::npos);
  return out;
}

ParamSpace parse_param_spec(std::string_view text) {
  ParamSpace space;
  std::string builder;
  int line_no = 0;
  for (const auto& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.size() > 1 && line[0] == '*') {
      const auto tokens = split_ws(std::string_view(line).substr(1));
      if (!tokens.empty()) {
        const std::string word = fold_case(tokens[0]);
        if (word == "params") continue;
        if (word == "range") {
          if (tokens.size() < 2) throw ParseError(line_no, line, "range without a name");
          ParamRange r;
          r.name = tokens[1];
          bool has_min = false, has_max = false;
          for (const auto& [k, v] : key_values(tokens, 2, line_no, line)) {
            const std::string key = fold_case(k);
            if (key == "min") {
              r.min = parse_value(v, line_no, line);
              has_min = true;
            } else if (key == "max") {
              r.max = parse_value(v, line_no, line);
              has_max = true;
            } else if (key == "log") {
              r.log_scale = parse_bool(v, line_no, line);
            } else if (key == "kind") {
              auto kind = param_kind_from_string(v);
              if (!kind) throw ParseError(line_no, line, "unknown kind '" + v + "'");
              r.kind = *kind;
            } else if (key == "unit") {
              r.unit = v;
            } else {
              throw ParseError(line_no, line, "unknown range field '" + k + "'");
            }
          }
          if (!has_min || !has_max) throw ParseError(line_no, line, "range needs min= and max=");
          space.ranges.push_back(std::move(r));
          continue;
        }
        if (word == "initial_params" || word == "initial") {
          for (const auto& [k, v] : key_values(tokens, 1, line_no, line)) space.initial[k] = parse_value(v, line_no, line);
          continue;
        }
        if (word == "fixed") {
          for (const auto& [k, v] : key_values(tokens, 1, line_no, line)) space.fixed[k] = parse_value(v, line_no, line);
          continue;
        }
      }
    }
    builder += raw;
    builder += '\n';
  }
  if (space.ranges.empty()) throw ParseError(line_no, "", "parameter spec has no range lines");
  space.builder = std::move(builder);
  return space;
}

std::string format_param_spec(const ParamSpace& space) {
  std::string out = "* PARAMS\n";
  for (const auto& r : space.ranges) {
    out += "* range " + r.name + " min=" + format_number(r.min) + " max=" + format_number(r.max) +
           " log=" + (r.log_scale ? "true" : "false") + " kind=" + std::string(to_string(r.kind));
    if (!r.unit.empty()) out += " unit=" + r.unit;
    out += '\n';
  }
  if (!space.initial.empty()) {
    out += "* initial_params";
    for (const auto& [k, v] : space.initial) out += " " + k + "=" + format_number(v);
    out += '\n';
  }
  if (!space.fixed.empty()) {
    out += "* fixed";
    for (const auto& [k, v] : space.fixed) out += " " + k + "=" + format_number(v);
    out += '\n';
  }
  out += space.builder;
  return out;
}

ParamSpace default_param_space(std::string_view netlist) {
  const CircuitIR circuit = parse_netlist_lenient(netlist).circuit;
  ParamSpace space;
  std::string builder;
  for (const auto& raw : split_lines(netlist)) {
    auto tokens = split_ws(raw);
    const Component* c = tokens.empty() ? nullptr : circuit.find_component(tokens[0]);
    std::string line = raw;
    if (c && c->kind == ComponentKind::mosfet && c->params.count("w") && c->params.count("l")) {
      const std::string name = "w_" + c->refdes;
      const double l = c->params.at("l");
      bool replaced = false;
      for (auto& tok : tokens) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos && iequals(tok.substr(0, eq), "w")) {
          tok = tok.substr(0, eq + 1) + "{" + name + "}";
          replaced = true;
        }
      }
      if (replaced) {
        space.ranges.push_back({name, l, 500.0 * l, true, "m", ParamKind::width});
        space.initial[name] = std::clamp(c->params.at("w"), l, 500.0 * l);
        line.clear();
        for (const auto& tok : tokens) line += (line.empty() ? "" : " ") + tok;
      }
    } else if (c && c->kind == ComponentKind::resistor && tokens.size() >= 4 && c->params.count("value")) {
      const std::string name = "r_" + c->refdes;
      const double v = c->params.at("value");
      tokens[3] = "{" + name + "}";
      space.ranges.push_back({name, v / 4.0, v * 4.0, true, "ohm", ParamKind::resistance});
      space.initial[name] = v;
      line.clear();
      for (const auto& tok : tokens) line += (line.empty() ? "" : " ") + tok;
    }
    builder += line + "\n";
  }
  space.builder = std::move(builder);
  return space;
}

ConstraintViolation::ConstraintViolation(std::string parameter, std::string rule, const std::string& detail)
    : Error(parameter + ": " + detail + " (rule: " + rule + ")"), parameter_(std::move(parameter)), rule_(std::move(rule)) {}

ParamSpace validate_param_space(const ParamSpace& input) {
  ParamSpace space = input;
  if (space.ranges.empty()) throw EmptySpace("parameter space has no tunable parameters");

  std::set<std::string> names;
  for (const auto& r : space.ranges) {
    if (!names.insert(fold_case(r.name)).second)
      throw ConstraintViolation(r.name, "unique parameter names", "declared more than once");
    if (!std::isfinite(r.min) || !std::isfinite(r.max) || !(r.min < r.max))
      throw ConstraintViolation(r.name, "min < max",
                                "range [" + format_number(r.min) + ", " + format_number(r.max) + "] is empty");
    if (r.log_scale && r.min <= 0.0)
      throw ConstraintViolation(r.name, "log-scaled ranges are positive", "min " + format_number(r.min) + " <= 0");
  }

  for (const auto& p : space.placeholders())
    if (!space.find(p) && !space.fixed.count(p))
      throw ConstraintViolation(p, "every placeholder has a range or fixed value", "placeholder {" + p + "} is unbound");

  constexpr double tol = 1e-9;
  for (const auto& r : space.ranges) {
    const std::string suffix = width_suffix(r);
    if (suffix.empty()) continue;
    const auto l = paired_length(space, suffix);
    if (!l) {
      space.notes.push_back(r.name + ": no paired length found; the 1–500× rule was not checked");
      continue;
    }
    const auto [lmin, lmax] = *l;
    if (r.min < lmin * (1.0 - tol)) {
      throw ConstraintViolation(r.name, std::string(kWidthRule),
                                "min " + format_number(r.min) + " is " + ratio_text(r.min / lmin) +
                                    "x the length " + format_number(lmin) + " (< 1x)");
    }
    if (r.max > 500.0 * lmax * (1.0 + tol)) {
      throw ConstraintViolation(r.name, std::string(kWidthRule),
                                "max " + format_number(r.max) + " is " + ratio_text(r.max / lmax) +
                                    "x the length " + format_number(lmax) + " (> 500x)");
    }
  }

  for (const auto& r : space.ranges) {
    auto it = space.initial.find(r.name);
    if (it == space.initial.end()) {
      const double mid = r.log_scale ? std::sqrt(r.min * r.max) : 0.5 * (r.min + r.max);
      space.initial[r.name] = mid;
      space.notes.push_back(r.name + ": no initial value; using the range midpoint " + format_number(mid));
    } else if (it->second < r.min || it->second > r.max) {
      const double clamped = std::clamp(it->second, r.min, r.max);
      space.notes.push_back(r.name + ": initial value " + format_number(it->second) + " clamped to " +
                            format_number(clamped));
      it->second = clamped;
    }
  }
  return space;
}

}  // namespace anaforge
