#pragma once

#include "netlabel/ip_address.hpp"
#include "netlabel/ontology.hpp"
#include "netlabel/zeek_io.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace netlabel {

// Flow columns that rule conditions may reference.
enum class Column : std::uint8_t {
  Date,
  Start,
  Duration,
  Proto,
  SrcIp,
  SrcPort,
  DstIp,
  DstPort,
  State,
  Tos,
  Packets,
  Bytes,
};

inline constexpr std::array<Column, 12> kAllColumns = {
    Column::Date,  Column::Start,   Column::Duration, Column::Proto,
    Column::SrcIp, Column::SrcPort, Column::DstIp,    Column::DstPort,
    Column::State, Column::Tos,     Column::Packets,  Column::Bytes,
};

enum class CompareOp : std::uint8_t { Less, Greater, LessEqual, GreaterEqual, Equal };

std::string_view column_name(Column column) noexcept;
std::optional<Column> column_from_name(std::string_view name) noexcept;  // case-insensitive
std::string_view op_symbol(CompareOp op) noexcept;

// Whether <, >, <=, >= are allowed on the column.
bool column_is_ordered(Column column) noexcept;

// Date values are held as days since the epoch; all other ordered columns
// as plain numbers.
using ConditionValue = std::variant<double, std::string, IpAddress>;

struct Condition {
  Column column;
  CompareOp op;
  ConditionValue value;
  std::string text;  // value token as written

  friend bool operator==(const Condition&, const Condition&) = default;
};

// Conjunction of conditions (one "-" line).
struct ConditionGroup {
  std::vector<Condition> conditions;

  friend bool operator==(const ConditionGroup&, const ConditionGroup&) = default;
};

struct Rule {
  LabelAssignment assignment;
  LabelPair labels;  // assignment rendered once at parse time
  std::vector<ConditionGroup> groups;  // disjunction
  std::size_t source_line = 0;

  friend bool operator==(const Rule& a, const Rule& b) {
    return a.assignment == b.assignment && a.groups == b.groups;
  }
};

struct RuleSet {
  std::vector<Rule> rules;  // file order

  friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

// Parses a single condition such as "srcIP=77.67.96.222" or "dstPort <= 1024".
Condition parse_condition(std::string_view text, std::size_t line = 0);

// Parses the rules section. Headers are "label, detailed-label:" and may wrap
// over several lines until the closing ':'; each following "- ..." line is a
// condition group joined with "&" or "and". A line without "-" or "," that
// follows a condition line continues it. first_line is the file line number
// of the first line of `text`.
RuleSet parse_ruleset(std::string_view text, const OntologySpec& ontology,
                      std::size_t first_line = 1);

// Text that parse_ruleset() turns back into an equal RuleSet.
std::string render_ruleset(const RuleSet& rules);

bool evaluate_condition(const Condition& condition, const FlowView& flow);
bool match_rule(const Rule& rule, const FlowView& flow);

// Index of the first rule matching the flow.
std::optional<std::size_t> first_match(const RuleSet& rules, const FlowView& flow);

// A whole configuration file: optional "[ontology]" and "[rules]" sections.
// Text before any section marker belongs to the rules section.
struct LabelConfig {
  OntologySpec ontology;
  RuleSet rules;
};

LabelConfig load_config(std::string_view text);

}  // namespace netlabel
