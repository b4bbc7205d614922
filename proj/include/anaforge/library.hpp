#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "anaforge/circuit.hpp"
#include "anaforge/task.hpp"

namespace anaforge {

struct CheckReport;

struct ToolKey {
  std::string description;
  CircuitType circuit_type = CircuitType::opamp;
  /// Measured by the verification module (e.g. gain_db), never self-reported.
  std::map<std::string, double> specs;
};

struct ToolValue {
  SubcircuitDef subcircuit;
  /// `.model` lines plus the `.subckt ... .ends` block, ready to paste.
  std::string netlist_text;
  /// Port order and an instantiation line.
  std::string usage;
};

struct Provenance {
  int task_id = 0;
  std::string run_id;
  std::string timestamp;  // ISO-8601 UTC
};

struct ToolEntry {
  ToolKey key;
  ToolValue value;
  Provenance provenance;

  /// Storage id: circuit type plus a digest of the description class.
  std::string id() const;
};

nlohmann::json to_json(const ToolEntry& entry);
ToolEntry tool_entry_from_json(const nlohmann::json& key_doc, std::string netlist_text, std::string usage);

/// Canonical description tokens: lower-case words, punctuation dropped,
/// circuit-type synonyms merged ("op-amp", "operational amplifier" ->
/// "opamp"), stop words removed. Sorted and unique.
std::vector<std::string> canonical_tokens(std::string_view text);

/// Best-of retention class: circuit type + canonical description tokens.
std::string description_class(const ToolKey& key);

/// Spec that orders entries of one class (gain_db for amplifiers and
/// op-amps); nullopt when the most recent entry wins.
std::optional<std::string> primary_spec(CircuitType type);

/// Wraps a verified top-level circuit as a reusable subcircuit: ports are the
/// task's input nets followed by the output; testbench sources on the inputs
/// and the supply are dropped (the supply stays a global net). Throws
/// PreconditionError unless `report` passed.
ToolEntry make_tool_entry(const CircuitIR& circuit, const DesignTask& task, const CheckReport& report,
                          const std::string& run_id, const std::string& timestamp);

class StorageError : public Error {
 public:
  using Error::Error;
};

struct AddResult {
  bool stored = false;
  std::optional<ToolEntry> replaced;
};

/// On-disk library:
///   <root>/entries/<id>/key.json      description, type, specs, provenance
///   <root>/entries/<id>/netlist.cir   subcircuit text
///   <root>/entries/<id>/usage.txt     usage snippet
///   <root>/archive/<id>-<n>/          replaced entries
///   <root>/index.json                 rebuilt on open
class ToolLibrary {
 public:
  /// Opens (creating if needed) the library at `root`.
  explicit ToolLibrary(std::filesystem::path root);

  AddResult add_tool(const ToolEntry& entry);
  /// Ranked by score (normalized token overlap), then primary spec, then id;
  /// entries scoring below 0.2 are dropped.
  std::vector<ToolEntry> query(std::string_view task_description, std::size_t limit = 3) const;
  std::vector<ToolEntry> list() const;
  const std::filesystem::path& root() const { return root_; }

  /// Relevance of an entry for a query in [0, 1].
  static double score(std::string_view query, const ToolEntry& entry);

 private:
  void write_index() const;

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ToolEntry> entries_;  // by id
};

/// Design-prompt tool section: per entry, its usage (with the port order),
/// measured specs and the subcircuit text. Empty for no entries.
std::string render_context(const std::vector<ToolEntry>& entries);

/// Copies a library directory (seed) to `destination`, replacing it.
void copy_library(const std::filesystem::path& source, const std::filesystem::path& destination);

}  // namespace anaforge
