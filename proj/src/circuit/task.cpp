#include "anaforge/task.hpp"

#include <cctype>

#include "anaforge/units.hpp"

namespace anaforge {

std::string_view to_string(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return "easy";
    case Difficulty::medium: return "medium";
    case Difficulty::hard: return "hard";
  }
  return "easy";
}

std::optional<Difficulty> difficulty_from_string(std::string_view text) {
  std::string t = fold_case(text);
  if (t == "easy") return Difficulty::easy;
  if (t == "medium") return Difficulty::medium;
  if (t == "hard") return Difficulty::hard;
  return std::nullopt;
}

std::string design_phrase(const DesignTask& task) {
  if (!task.phrase.empty()) return task.phrase;
  std::string d = task.description;
  if (!d.empty() && std::isupper(static_cast<unsigned char>(d[0])) &&
      (d.size() < 2 || !std::isupper(static_cast<unsigned char>(d[1]))))
    d[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(d[0])));
  return "a " + d;
}

std::string_view to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::low_pass: return "low-pass";
    case FilterKind::high_pass: return "high-pass";
    case FilterKind::band_pass: return "band-pass";
    case FilterKind::band_stop: return "band-stop";
  }
  return "low-pass";
}

FilterKind filter_kind_from_description(std::string_view description) {
  std::string d;
  for (char c : fold_case(description)) d.push_back(c == '-' || c == '_' ? ' ' : c);
  auto has = [&](std::string_view needle) { return d.find(needle) != std::string::npos; };
  if (has("band stop") || has("bandstop") || has("notch") || has("band reject")) return FilterKind::band_stop;
  if (has("band pass") || has("bandpass")) return FilterKind::band_pass;
  if (has("high pass") || has("highpass")) return FilterKind::high_pass;
  return FilterKind::low_pass;
}

}  // namespace anaforge
