#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <regex>
#include <sstream>

#include "anaforge/sim.hpp"
#include "anaforge/units.hpp"

namespace anaforge {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

double to_double(std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    // from_chars rejects some spellings the engine may produce (e.g. "nan").
    std::string s(text);
    char* end = nullptr;
    v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size()) throw Error("raw file: bad number '" + s + "'");
  }
  return v;
}

std::complex<double> to_value(std::string_view token) {
  auto comma = token.find(',');
  if (comma == std::string_view::npos) return {to_double(token), 0.0};
  return {to_double(token.substr(0, comma)), to_double(token.substr(comma + 1))};
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  int number() const { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int number_ = 0;
};

std::string unwrap(const std::string& name, char fn) {
  if (name.size() > 3 && std::tolower(static_cast<unsigned char>(name[0])) == fn && name[1] == '(' &&
      name.back() == ')') {
    return name.substr(2, name.size() - 3);
  }
  return {};
}

// Normalised key for a raw vector name.
std::string signal_key(const std::string& raw_name) {
  std::string name = fold_case(raw_name);
  if (std::string inner = unwrap(name, 'v'); !inner.empty()) return inner;
  if (auto pos = name.find("#branch"); pos != std::string::npos) return "i(" + name.substr(0, pos) + ")";
  return name;
}

struct DeviceVector {
  std::string device;
  std::string param;
};

std::optional<DeviceVector> device_vector(const std::string& raw_name) {
  static const std::regex pattern(R"(^(?:[vi]\()?@([^\[\]]+)\[([a-z0-9_]+)\]\)?$)", std::regex::icase);
  std::smatch m;
  std::string name = fold_case(raw_name);
  if (!std::regex_match(name, m, pattern)) return std::nullopt;
  return DeviceVector{m[1].str(), m[2].str()};
}

std::string series_id(const std::string& plotname) {
  std::string p = fold_case(plotname);
  if (p.find("operating point") != std::string::npos) return "op";
  if (p.find("dc transfer") != std::string::npos) return "dc";
  if (p.find("ac analysis") != std::string::npos) return "ac";
  if (p.find("transient") != std::string::npos) return "tran";
  std::string id;
  for (char c : p) id.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return id;
}

AxisKind axis_kind_for(const std::string& id) {
  if (id == "dc") return AxisKind::voltage;
  if (id == "ac") return AxisKind::frequency;
  if (id == "tran") return AxisKind::time;
  return AxisKind::none;
}

void set_device_param(DeviceOp& d, const std::string& param, double value) {
  if (param == "id") d.id = value;
  else if (param == "vgs") d.vgs = value;
  else if (param == "vds") d.vds = value;
  else if (param == "von") d.vth = value;
  else if (param == "vth" && value != 0.0 && d.vth == 0.0) d.vth = value;
  else if (param == "gm") d.gm = value;
}

WaveformSeries series_from_plot(const RawPlot& plot, const std::string& id) {
  WaveformSeries s;
  s.axis_kind = axis_kind_for(id);
  if (plot.variables.empty()) return s;
  if (id == "op") {
    // An operating point has no sweep variable: every vector is a signal.
    s.axis = {0.0};
    for (std::size_t i = 0; i < plot.variables.size(); ++i) {
      if (plot.values[i].empty()) continue;
      s.signals[signal_key(plot.variables[i].name)].push_back(plot.values[i][0].real());
    }
    return s;
  }
  s.axis_name = signal_key(plot.variables[0].name);
  const auto& axis = plot.values[0];
  for (const auto& v : axis) s.axis.push_back(v.real());
  for (std::size_t i = 1; i < plot.variables.size(); ++i) {
    std::string key = signal_key(plot.variables[i].name);
    auto& out = s.signals[key];
    for (const auto& v : plot.values[i]) out.push_back(plot.complex ? std::abs(v) : v.real());
    if (plot.complex) {
      auto& ph = s.phase_deg[key];
      for (const auto& v : plot.values[i]) ph.push_back(std::arg(v) * 180.0 / std::numbers::pi);
    }
  }
  // Downward sweeps are stored in increasing axis order.
  if (s.axis.size() > 1 && s.axis.front() > s.axis.back()) {
    s.descending = true;
    std::reverse(s.axis.begin(), s.axis.end());
    for (auto& [k, v] : s.signals) std::reverse(v.begin(), v.end());
    for (auto& [k, v] : s.phase_deg) std::reverse(v.begin(), v.end());
  }
  // Drop repeated axis points (engines may emit a breakpoint twice).
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < s.axis.size(); ++i) {
    if (keep.empty() || s.axis[i] > s.axis[keep.back()]) keep.push_back(i);
  }
  if (keep.size() != s.axis.size()) {
    auto select = [&](std::vector<double>& v) {
      std::vector<double> out;
      for (auto i : keep) out.push_back(v[i]);
      v = std::move(out);
    };
    select(s.axis);
    for (auto& [k, v] : s.signals) select(v);
    for (auto& [k, v] : s.phase_deg) select(v);
  }
  return s;
}

}  // namespace

std::string_view to_string(AxisKind kind) {
  switch (kind) {
    case AxisKind::none: return "none";
    case AxisKind::time: return "time";
    case AxisKind::frequency: return "frequency";
    case AxisKind::voltage: return "voltage";
  }
  return "none";
}

std::string_view to_string(Region region) {
  switch (region) {
    case Region::unknown: return "unknown";
    case Region::cutoff: return "cutoff";
    case Region::triode: return "triode";
    case Region::saturation: return "saturation";
  }
  return "unknown";
}

const std::vector<double>* WaveformSeries::find(std::string_view name) const {
  std::string key = signal_key(std::string(name));
  if (auto it = signals.find(key); it != signals.end()) return &it->second;
  return nullptr;
}

const std::vector<double>& WaveformSeries::at(std::string_view name) const {
  if (const auto* v = find(name)) return *v;
  throw Error("signal '" + std::string(name) + "' not in series");
}

const WaveformSeries* SimulationResult::find_series(std::string_view id) const {
  auto it = series.find(std::string(id));
  return it == series.end() ? nullptr : &it->second;
}

std::vector<RawPlot> parse_raw(std::string_view text) {
  std::vector<RawPlot> plots;
  LineReader reader(text);
  std::string_view line;
  RawPlot current;
  std::size_t n_vars = 0, n_points = 0;
  bool in_header = false;

  auto fail = [&](const std::string& why) {
    throw Error("raw file line " + std::to_string(reader.number()) + ": " + why);
  };

  while (reader.next(line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    auto colon = t.find(':');
    std::string key = colon == std::string::npos ? t : fold_case(trim(std::string_view(t).substr(0, colon)));
    std::string value = colon == std::string::npos ? "" : trim(std::string_view(t).substr(colon + 1));

    if (key == "title") {
      current = RawPlot{};
      current.title = value;
      n_vars = n_points = 0;
      in_header = true;
    } else if (!in_header) {
      fail("expected 'Title:'");
    } else if (key == "plotname") {
      current.plotname = value;
    } else if (key == "flags") {
      current.complex = fold_case(value).find("complex") != std::string::npos;
    } else if (key == "no. variables") {
      n_vars = static_cast<std::size_t>(to_double(value));
    } else if (key == "no. points") {
      n_points = static_cast<std::size_t>(to_double(value));
    } else if (key == "variables") {
      for (std::size_t i = 0; i < n_vars; ++i) {
        if (!reader.next(line)) fail("truncated variable list");
        std::istringstream fields{std::string(line)};
        std::string index, name, type;
        fields >> index >> name >> type;
        if (name.empty()) fail("bad variable line");
        current.variables.push_back({name, type});
      }
    } else if (key == "binary") {
      fail("binary raw files are not supported; request ASCII output");
    } else if (key == "values") {
      current.values.assign(n_vars, std::vector<std::complex<double>>(n_points));
      std::size_t needed = n_points * (n_vars + 1), got = 0;
      while (got < needed) {
        if (!reader.next(line)) fail("truncated values");
        std::istringstream tokens{std::string(line)};
        std::string tok;
        while (tokens >> tok) {
          std::size_t point = got / (n_vars + 1), slot = got % (n_vars + 1);
          if (point >= n_points) fail("too many values");
          if (slot > 0) current.values[slot - 1][point] = to_value(tok);
          ++got;
        }
      }
      plots.push_back(std::move(current));
      current = RawPlot{};
      in_header = false;
    }
    // Date, Command, Option and other headers are informational.
  }
  if (in_header) fail("plot without values");
  return plots;
}

SimulationResult result_from_plots(const std::vector<RawPlot>& plots) {
  SimulationResult result;
  std::map<std::string, int> seen;
  for (const RawPlot& plot : plots) {
    std::string base = series_id(plot.plotname);
    int n = ++seen[base];
    std::string id = n == 1 ? base : base + std::to_string(n);
    if (base == "op") {
      for (std::size_t i = 0; i < plot.variables.size(); ++i) {
        if (plot.values[i].empty()) continue;
        double value = plot.values[i][0].real();
        const std::string& name = plot.variables[i].name;
        if (auto dv = device_vector(name)) {
          set_device_param(result.devices[dv->device], dv->param, value);
          continue;
        }
        std::string key = signal_key(name);
        if (fold_case(plot.variables[i].type) == "voltage") result.op_point[key] = value;
      }
    }
    result.series[id] = series_from_plot(plot, base);
  }
  return result;
}

double interpolate(const std::vector<double>& axis, const std::vector<double>& values, double x) {
  if (axis.empty()) throw PreconditionError("interpolate: empty axis");
  if (x <= axis.front()) return values.front();
  if (x >= axis.back()) return values.back();
  auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t hi = static_cast<std::size_t>(it - axis.begin()), lo = hi - 1;
  double span = axis[hi] - axis[lo];
  double f = span > 0 ? (x - axis[lo]) / span : 0.0;
  return values[lo] + f * (values[hi] - values[lo]);
}

}  // namespace anaforge
