#include "anaforge/units.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>

namespace anaforge {

namespace {

// Sub-unit prefixes divide by an exact power of ten so that e.g. 10u is
// exactly 1e-05 (multiplying by 1e-6 would round).
struct Scale {
  std::string_view prefix;
  double factor;
  bool divide = false;
};

// Longest prefixes first so `meg` and `mil` win over `m`.
constexpr std::array<Scale, 11> kScales{{
    {"meg", 1e6},
    {"mil", 25.4e-6},
    {"t", 1e12},
    {"g", 1e9},
    {"k", 1e3},
    {"m", 1e3, true},
    {"u", 1e6, true},
    {"n", 1e9, true},
    {"p", 1e12, true},
    {"f", 1e15, true},
    {"a", 1e18, true},
}};

}  // namespace

std::string fold_case(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::optional<double> parse_spice_number(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);

  double mantissa = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), mantissa);
  if (ec != std::errc{}) return std::nullopt;
  std::string rest = fold_case(std::string_view(ptr, text.data() + text.size() - ptr));
  if (rest.empty()) return mantissa;
  if (!std::isalpha(static_cast<unsigned char>(rest.front()))) return std::nullopt;

  double factor = 1.0;
  for (const Scale& s : kScales) {
    if (rest.compare(0, s.prefix.size(), s.prefix) == 0) {
      if (s.divide) {
        mantissa /= s.factor;
      } else {
        factor = s.factor;
      }
      rest.erase(0, s.prefix.size());
      break;
    }
  }
  for (char c : rest) {
    if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
  }
  return mantissa * factor;
}

std::string format_number(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

}  // namespace anaforge
