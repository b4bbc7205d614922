#include "anaforge/prompt.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "anaforge/units.hpp"
#include "anaforge/verification.hpp"

#ifndef ANAFORGE_DEFAULT_DATA_DIR
#define ANAFORGE_DEFAULT_DATA_DIR "data"
#endif

namespace anaforge {

namespace fs = std::filesystem;

namespace {

std::string read_asset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read prompt asset " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string trim_trailing_newlines(std::string text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string strip_meta_lines(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    auto first = line.find_first_not_of(" \t");
    if (first != std::string::npos && fold_case(line.substr(first)).rfind("* meta", 0) == 0) continue;
    out += line + "\n";
  }
  if (!text.empty() && text.back() != '\n' && !out.empty()) out.pop_back();
  return out;
}

std::string tool_names(const std::vector<ToolEntry>& tools) {
  std::vector<std::string> names;
  for (const auto& t : tools) {
    std::string name(to_string(t.key.circuit_type));
    for (auto& c : name)
      if (c == '_') c = ' ';
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }
  if (names.size() <= 1) return names.empty() ? "" : names[0];
  std::string last = names.back();
  names.pop_back();
  return join(names, ", ") + " and " + last;
}

std::string objective_target(DesignObjective objective) {
  switch (objective) {
    case DesignObjective::gain: return "the gain";
    case DesignObjective::gbw: return "the GBW (gain-bandwidth product)";
    case DesignObjective::fom: return "FoM (GBW*CL/Power)";
  }
  return "";
}

}  // namespace

std::string fill_slots(std::string_view body, const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = body.find("{{", pos);
    if (open == std::string_view::npos) break;
    auto close = body.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    std::string name(body.substr(open + 2, close - open - 2));
    auto it = slots.find(name);
    if (it == slots.end()) throw PreconditionError("template slot '" + name + "' has no value");
    out.append(body.substr(pos, open - pos));
    out += it->second;
    pos = close + 2;
  }
  out.append(body.substr(pos));
  return out;
}

PromptAssets PromptAssets::load(const fs::path& dir) {
  PromptAssets a;
  a.framing = read_asset(dir / "design_framing.txt");
  a.representation_annotated = read_asset(dir / "representation_annotated.txt");
  a.representation_plain = read_asset(dir / "representation_plain.txt");
  a.tool_intro = read_asset(dir / "tool_intro.txt");
  a.opamp_tool_note = read_asset(dir / "opamp_tool_note.txt");
  a.in_context_example = read_asset(dir / "in_context_example.txt");
  a.tips = read_asset(dir / "tips.txt");
  a.chain_of_thought = read_asset(dir / "chain_of_thought.txt");
  a.question = read_asset(dir / "question.txt");
  a.objective = read_asset(dir / "objective.txt");
  a.repair = read_asset(dir / "repair.txt");
  a.repair_analysis = read_asset(dir / "repair_analysis.txt");
  a.waveform_analysis = read_asset(dir / "waveform_analysis.txt");
  a.extraction = read_asset(dir / "extraction.txt");
  auto expectations = nlohmann::json::parse(read_asset(dir / "expectations.json"));
  for (const auto& [name, entry] : expectations.items()) {
    auto type = circuit_type_from_string(name);
    if (!type) throw Error("expectations.json: unknown circuit type '" + name + "'");
    a.expectations[*type] = {entry.at("expectation").get<std::string>(), entry.at("context").get<std::string>()};
  }
  return a;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("ANAFORGE_DATA_DIR"); env && *env) return env;
  return ANAFORGE_DEFAULT_DATA_DIR;
}

DesignTask task_from_json(const nlohmann::json& j) {
  DesignTask t;
  t.task_id = j.value("task_id", 0);
  auto type = circuit_type_from_string(j.at("circuit_type").get<std::string>());
  if (!type) throw Error("unknown circuit type '" + j.at("circuit_type").get<std::string>() + "'");
  t.circuit_type = *type;
  t.description = j.at("description").get<std::string>();
  if (j.contains("input_node") && j["input_node"].is_string()) t.input_node = j["input_node"].get<std::string>();
  t.extra_inputs = j.value("extra_inputs", std::vector<std::string>{});
  t.output_node = j.value("output_node", std::string("Vout"));
  t.supply_volts = j.value("supply_volts", 5.0);
  auto difficulty = difficulty_from_string(j.value("difficulty", std::string("easy")));
  if (!difficulty) throw Error("unknown difficulty in task " + std::to_string(t.task_id));
  t.difficulty = *difficulty;
  t.is_composite = j.value("composite", false);
  for (const auto& name : j.value("required_tools", std::vector<std::string>{})) {
    auto tool = circuit_type_from_string(name);
    if (!tool) throw Error("unknown required tool '" + name + "'");
    t.required_tools.push_back(*tool);
  }
  if (t.is_composite && t.required_tools.empty())
    throw Error("composite task " + std::to_string(t.task_id) + " lists no required subcircuit kinds");
  t.phrase = j.value("phrase", std::string());
  t.notes = j.value("notes", std::vector<std::string>{});
  return t;
}

std::vector<DesignTask> load_task_registry(const fs::path& path) {
  auto doc = nlohmann::json::parse(read_asset(path));
  std::vector<DesignTask> tasks;
  std::set<int> ids;
  for (const auto& j : doc.at("tasks")) {
    tasks.push_back(task_from_json(j));
    if (!ids.insert(tasks.back().task_id).second)
      throw Error("duplicate task id " + std::to_string(tasks.back().task_id) + " in " + path.string());
  }
  std::sort(tasks.begin(), tasks.end(), [](const DesignTask& a, const DesignTask& b) { return a.task_id < b.task_id; });
  return tasks;
}

DesignTask find_task(const std::vector<DesignTask>& registry, int task_id) {
  for (const auto& t : registry)
    if (t.task_id == task_id) return t;
  throw PreconditionError("unknown task id " + std::to_string(task_id));
}

std::string_view to_string(Representation repr) {
  return repr == Representation::annotated_netlist ? "annotated_netlist" : "plain_netlist";
}

std::optional<Representation> representation_from_string(std::string_view text) {
  auto t = fold_case(text);
  if (t == "annotated_netlist" || t == "annotated") return Representation::annotated_netlist;
  if (t == "plain_netlist" || t == "plain" || t == "spice") return Representation::plain_netlist;
  return std::nullopt;
}

std::string_view to_string(DesignObjective objective) {
  switch (objective) {
    case DesignObjective::gain: return "gain";
    case DesignObjective::gbw: return "gbw";
    case DesignObjective::fom: return "fom";
  }
  return "gain";
}

std::optional<DesignObjective> design_objective_from_string(std::string_view text) {
  auto t = fold_case(text);
  if (t == "gain" || t == "g") return DesignObjective::gain;
  if (t == "gbw") return DesignObjective::gbw;
  if (t == "fom") return DesignObjective::fom;
  return std::nullopt;
}

std::string DesignPrompt::text() const {
  std::string out;
  for (std::size_t i = 0; i < sections.size(); ++i) out += (i ? "\n\n" : "") + sections[i].text;
  return out + "\n";
}

const PromptSection* DesignPrompt::find(std::string_view id) const {
  for (const auto& s : sections)
    if (s.id == id) return &s;
  return nullptr;
}

DesignPrompt build_design_prompt(const PromptAssets& assets, const DesignTask& task, const std::vector<ToolEntry>& tools,
                                 const DesignPromptOptions& options) {
  DesignPrompt prompt;
  const bool annotated = options.representation == Representation::annotated_netlist;
  std::string representation = fill_slots(annotated ? assets.representation_annotated : assets.representation_plain,
                                          {{"vdd", format_number(task.supply_volts)}});
  prompt.sections.push_back(
      {"framing", trim_trailing_newlines(fill_slots(assets.framing, {{"representation", trim_trailing_newlines(representation)}}))});

  if (!tools.empty()) {
    std::string text = fill_slots(assets.tool_intro, {{"names", tool_names(tools)}}) + render_context(tools);
    bool has_opamp = std::any_of(tools.begin(), tools.end(),
                                 [](const ToolEntry& t) { return t.key.circuit_type == CircuitType::opamp; });
    if (has_opamp) text += "\n" + assets.opamp_tool_note;
    prompt.sections.push_back({"tools", trim_trailing_newlines(text)});
  } else if (task.is_composite) {
    prompt.warnings.push_back("composite task " + std::to_string(task.task_id) +
                              " received no library tools; the model has to design every subcircuit itself");
  }

  if (options.toggles.in_context_example) {
    std::string example = annotated ? assets.in_context_example : strip_meta_lines(assets.in_context_example);
    prompt.sections.push_back({"example", trim_trailing_newlines(example)});
  }
  if (options.toggles.tips) prompt.sections.push_back({"tips", trim_trailing_newlines(assets.tips)});
  if (options.toggles.chain_of_thought)
    prompt.sections.push_back({"chain_of_thought", trim_trailing_newlines(assets.chain_of_thought)});

  std::vector<std::string> inputs;
  if (task.input_node) inputs.push_back(*task.input_node);
  for (const auto& e : task.extra_inputs) inputs.push_back(e);
  std::string notes;
  for (const auto& n : task.notes) notes += n + "\n";
  std::string objective;
  if (options.objective) objective = trim_trailing_newlines(fill_slots(assets.objective, {{"target", objective_target(*options.objective)}}));
  prompt.sections.push_back(
      {"question", trim_trailing_newlines(fill_slots(assets.question, {{"phrase", design_phrase(task)},
                                                                       {"objective", objective},
                                                                       {"inputs", inputs.empty() ? "-" : join(inputs, ", ")},
                                                                       {"output", task.output_node},
                                                                       {"notes", notes}}))});
  return prompt;
}

std::string build_repair_prompt(const PromptAssets& assets, const CheckReport& report,
                                const std::optional<std::string>& mllm_analysis) {
  if (report.verdict == Verdict::pass) throw PreconditionError("repair prompts are built for failing reports only");
  std::string analysis;
  if (mllm_analysis && !mllm_analysis->empty())
    analysis = fill_slots(assets.repair_analysis, {{"analysis", trim_trailing_newlines(*mllm_analysis)}});
  return fill_slots(assets.repair, {{"diagnostics", trim_trailing_newlines(report.diagnostic_text())}, {"analysis", analysis}});
}

std::string expectation_for(const PromptAssets& assets, const DesignTask& task) {
  auto it = assets.expectations.find(task.circuit_type);
  if (it == assets.expectations.end()) return {};
  return fill_slots(it->second.expectation, {{"output", task.output_node}});
}

std::string testbench_context(const PromptAssets& assets, const DesignTask& task) {
  auto it = assets.expectations.find(task.circuit_type);
  if (it == assets.expectations.end()) return {};
  std::vector<std::string> inputs;
  if (task.input_node) inputs.push_back(*task.input_node);
  for (const auto& e : task.extra_inputs) inputs.push_back(e);
  return fill_slots(it->second.context, {{"input", inputs.empty() ? "-" : join(inputs, " and ")},
                                         {"output", task.output_node},
                                         {"vdd", format_number(task.supply_volts)}});
}

std::string build_waveform_analysis_prompt(const PromptAssets& assets, const DesignTask& task,
                                           const std::string& expectation, const std::string& context) {
  if (expectation.find_first_not_of(" \t\r\n") == std::string::npos)
    throw PreconditionError("waveform analysis needs a nonempty expectation");
  return fill_slots(assets.waveform_analysis,
                    {{"circuit", design_phrase(task)}, {"expectation", expectation}, {"context", context}});
}

std::string build_extraction_prompt(const PromptAssets& assets, const std::string& netlist) {
  if (netlist.find_first_not_of(" \t\r\n") == std::string::npos)
    throw PreconditionError("extraction needs a nonempty netlist");
  return fill_slots(assets.extraction, {{"netlist", trim_trailing_newlines(netlist)}});
}

std::string_view to_string(PayloadKind kind) { return kind == PayloadKind::netlist ? "netlist" : "param_spec"; }

Payload extract_payload(std::string_view response) {
  struct Block {
    std::size_t begin, end;
  };
  std::vector<Block> blocks;
  bool inside = false;
  std::size_t content_begin = 0;
  std::size_t pos = 0;
  while (pos < response.size()) {
    std::size_t eol = response.find('\n', pos);
    std::size_t line_end = eol == std::string_view::npos ? response.size() : eol;
    std::size_t next = eol == std::string_view::npos ? response.size() : eol + 1;
    std::string_view line = response.substr(pos, line_end - pos);
    std::size_t indent = 0;
    while (indent < line.size() && indent < 3 && line[indent] == ' ') ++indent;
    bool fence = line.substr(indent).rfind("```", 0) == 0;
    if (fence && !inside) {
      inside = true;
      content_begin = next;
    } else if (fence && inside && line.substr(indent + 3).find_first_not_of(" \t\r`") == std::string_view::npos) {
      inside = false;
      blocks.push_back({content_begin, pos > content_begin ? pos - 1 : content_begin});
    }
    pos = next;
  }
  if (inside) blocks.push_back({content_begin, response.size()});
  if (blocks.empty()) throw NoCodeBlock("the response contains no fenced code block");
  Payload payload;
  payload.text = std::string(response.substr(blocks.back().begin, blocks.back().end - blocks.back().begin));
  std::istringstream lines(payload.text);
  for (std::string line; std::getline(lines, line);) {
    auto t = fold_case(line);
    auto first = t.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    t = t.substr(first);
    if (t.rfind("* params", 0) == 0 || t.rfind("* range ", 0) == 0) {
      payload.kind = PayloadKind::param_spec;
      break;
    }
  }
  return payload;
}

std::string embed_code_block(std::string_view code, std::string_view language) {
  return "```" + std::string(language) + "\n" + std::string(code) + "\n```\n";
}

}  // namespace anaforge
