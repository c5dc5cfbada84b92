#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace netlabel {

// Literal used by Zeek for empty fields; doubles as the "no label" value.
inline constexpr std::string_view kEmptyLabel = "(empty)";

// Separator between the components of a detailed label.
inline constexpr char kDetailSeparator = '-';

// The seven ontology levels, in their fixed order.
enum class Level : std::uint8_t {
  Label,
  Source,
  Destination,
  Technique,
  SubTechnique,
  Process,
  AppProtocol,
};

inline constexpr std::size_t kLevelCount = 7;

inline constexpr std::array<Level, kLevelCount> kAllLevels = {
    Level::Label,     Level::Source,       Level::Destination, Level::Technique,
    Level::SubTechnique, Level::Process, Level::AppProtocol,
};

// Levels 2-7, the ones that make up a detailed label.
inline constexpr std::array<Level, kLevelCount - 1> kDetailLevels = {
    Level::Source,       Level::Destination, Level::Technique,
    Level::SubTechnique, Level::Process,     Level::AppProtocol,
};

std::string_view level_name(Level level) noexcept;

// Accepts the canonical names plus the "app-process" alias for Process.
// Case-insensitive.
std::optional<Level> level_from_name(std::string_view name) noexcept;

struct LevelSpec {
  Level level;
  std::string name;
  bool mandatory = false;
  bool extensible = false;
  std::vector<std::string> items;  // declaration order
};

// Label vocabulary per level. Immutable once built by load_ontology().
class OntologySpec {
 public:
  // Only the closed vocabularies: Benign/Malicious/Unknown, From_*, To_*.
  static OntologySpec builtin();

  std::span<const LevelSpec> levels() const noexcept { return levels_; }
  const LevelSpec& level(Level level) const noexcept {
    return levels_[static_cast<std::size_t>(level)];
  }

  bool contains(Level level, std::string_view item) const;

  // Level owning a detail item (levels 2-7). Items are unique across those
  // levels, so the answer is unambiguous.
  std::optional<Level> detail_level_of(std::string_view item) const;

 private:
  friend OntologySpec load_ontology(std::string_view, std::size_t);

  OntologySpec();
  void add_item(Level level, std::string item);

  std::array<LevelSpec, kLevelCount> levels_;
  std::unordered_map<std::string, Level> detail_owner_;
};

// Parses the body of an "[ontology]" section. Each non-blank, non-comment
// line is "level: item, item, ...". Closed levels (label, source,
// destination) may restate their built-in items but not add new ones.
// first_line is the file line number of the first line of `text`, used in
// diagnostics.
OntologySpec load_ontology(std::string_view text, std::size_t first_line = 1);

using DetailMap = std::map<Level, std::string>;

struct LabelAssignment {
  std::string label;
  DetailMap detail;

  friend bool operator==(const LabelAssignment&, const LabelAssignment&) = default;
};

struct Violation {
  Level level;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

ValidationResult validate_assignment(const LabelAssignment& assignment,
                                     const OntologySpec& ontology);

// Detail items joined with '-' in level order, or "(empty)" if there are none.
std::string render_detailed_label(const LabelAssignment& assignment);
std::string render_detailed_label(const DetailMap& detail);

// A rendered (label, detailed_label) pair as written into log files.
struct LabelPair {
  std::string label;
  std::string detailed;

  static LabelPair empty() { return {std::string(kEmptyLabel), std::string(kEmptyLabel)}; }
  friend bool operator==(const LabelPair&, const LabelPair&) = default;
};

// Inverse of render_detailed_label. Throws ConfigError on unknown tokens,
// empty tokens, or two tokens for the same level.
DetailMap parse_detailed_label(std::string_view text, const OntologySpec& ontology);

}  // namespace netlabel
