#include "netlabel/rule_dsl.hpp"

#include "netlabel/error.hpp"
#include "netlabel/text.hpp"

#include <algorithm>
#include <charconv>

namespace netlabel {

namespace {

constexpr std::array<std::string_view, 12> kColumnNames = {
    "Date", "start", "Duration", "Proto", "srcIP", "srcPort",
    "dstIP", "dstPort", "State", "Tos", "Packets", "Bytes",
};

std::optional<double> parse_double(std::string_view s) {
  double value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); }

bool is_operator_char(char c) { return c == '<' || c == '>' || c == '=' || c == '!'; }

template <class T>
bool compare(const T& lhs, CompareOp op, const T& rhs) {
  switch (op) {
    case CompareOp::Less: return lhs < rhs;
    case CompareOp::Greater: return lhs > rhs;
    case CompareOp::LessEqual: return lhs <= rhs;
    case CompareOp::GreaterEqual: return lhs >= rhs;
    case CompareOp::Equal: return lhs == rhs;
  }
  return false;
}

bool compare_number(const std::optional<double>& field, const Condition& c) {
  return field && compare(*field, c.op, std::get<double>(c.value));
}

template <class Int>
std::optional<double> as_double(const std::optional<Int>& v) {
  if (!v) return std::nullopt;
  return static_cast<double>(*v);
}

std::vector<Condition> parse_group(std::string_view text, std::size_t line) {
  std::string spaced;
  spaced.reserve(text.size() + 8);
  for (char c : text) {
    if (c == '&') {
      spaced += " & ";
    } else {
      spaced.push_back(c);
    }
  }

  std::vector<Condition> conditions;
  std::string current;
  auto flush = [&] {
    if (text::trim(current).empty()) throw ConfigError("empty condition in '" + std::string(text::trim(text)) + "'", line);
    conditions.push_back(parse_condition(current, line));
    current.clear();
  };
  for (auto token : text::split_ws(spaced)) {
    if (token == "&" || text::iequals(token, "and")) {
      flush();
    } else {
      if (!current.empty()) current.push_back(' ');
      current += token;
    }
  }
  flush();
  return conditions;
}

struct SectionText {
  std::string body;
  std::size_t first_line = 1;
  bool present = false;
};

}  // namespace

std::string_view column_name(Column column) noexcept {
  return kColumnNames[static_cast<std::size_t>(column)];
}

std::optional<Column> column_from_name(std::string_view name) noexcept {
  for (auto column : kAllColumns) {
    if (text::iequals(name, column_name(column))) return column;
  }
  return std::nullopt;
}

std::string_view op_symbol(CompareOp op) noexcept {
  switch (op) {
    case CompareOp::Less: return "<";
    case CompareOp::Greater: return ">";
    case CompareOp::LessEqual: return "<=";
    case CompareOp::GreaterEqual: return ">=";
    case CompareOp::Equal: return "=";
  }
  return "?";
}

bool column_is_ordered(Column column) noexcept {
  switch (column) {
    case Column::Proto:
    case Column::SrcIp:
    case Column::DstIp:
    case Column::State: return false;
    default: return true;
  }
}

Condition parse_condition(std::string_view text, std::size_t line) {
  const auto s = text::trim(text);
  std::size_t pos = 0;
  while (pos < s.size() && is_alpha(s[pos])) ++pos;
  const auto name = s.substr(0, pos);
  if (name.empty()) throw ConfigError("condition '" + std::string(s) + "' does not start with a column name", line);
  const auto column = column_from_name(name);
  if (!column) throw ConfigError("unknown column '" + std::string(name) + "'", line);

  while (pos < s.size() && text::kWhitespace.find(s[pos]) != std::string_view::npos) ++pos;
  const auto rest = s.substr(pos);
  CompareOp op;
  std::size_t op_len = 1;
  if (rest.starts_with("<=")) {
    op = CompareOp::LessEqual;
    op_len = 2;
  } else if (rest.starts_with(">=")) {
    op = CompareOp::GreaterEqual;
    op_len = 2;
  } else if (rest.starts_with('<')) {
    op = CompareOp::Less;
  } else if (rest.starts_with('>')) {
    op = CompareOp::Greater;
  } else if (rest.starts_with('=')) {
    op = CompareOp::Equal;
  } else {
    throw ConfigError("missing operator after column '" + std::string(name) + "'", line);
  }
  if (rest.size() > op_len && is_operator_char(rest[op_len])) {
    std::size_t end = op_len;
    while (end < rest.size() && is_operator_char(rest[end])) ++end;
    throw ConfigError("malformed operator '" + std::string(rest.substr(0, end)) + "'", line);
  }
  if (!rest.empty() && rest.front() == '!') {
    throw ConfigError("malformed operator in '" + std::string(s) + "'", line);
  }

  const auto value_text = text::trim(rest.substr(op_len));
  if (value_text.empty()) throw ConfigError("missing value in condition '" + std::string(s) + "'", line);
  if (value_text.find_first_of(text::kWhitespace) != std::string_view::npos) {
    throw ConfigError("value '" + std::string(value_text) + "' must be a single token", line);
  }
  if (op != CompareOp::Equal && !column_is_ordered(*column)) {
    throw ConfigError("operator '" + std::string(op_symbol(op)) + "' is not allowed on column '" +
                          std::string(column_name(*column)) + "'; only '=' applies",
                      line);
  }

  Condition condition{*column, op, 0.0, std::string(value_text)};
  switch (*column) {
    case Column::Date: {
      const auto days = parse_calendar_date(value_text);
      if (!days) throw ConfigError("invalid Date '" + condition.text + "', expected YYYY-MM-DD", line);
      condition.value = static_cast<double>(*days);
      break;
    }
    case Column::Start: {
      const auto ts = parse_zeek_time(value_text);
      if (!ts) throw ConfigError("invalid start time '" + condition.text + "'", line);
      condition.value = *ts;
      break;
    }
    case Column::Proto:
    case Column::State: condition.value = condition.text; break;
    case Column::SrcIp:
    case Column::DstIp: {
      if (value_text.find('/') != std::string_view::npos) {
        throw ConfigError("CIDR ranges are not supported ('" + condition.text +
                              "'); use an exact address",
                          line);
      }
      const auto ip = IpAddress::parse(value_text);
      if (!ip) throw ConfigError("invalid IP address '" + condition.text + "'", line);
      condition.value = *ip;
      break;
    }
    default: {
      const auto number = parse_double(value_text);
      if (!number) {
        throw ConfigError("column '" + std::string(column_name(*column)) +
                              "' needs a numeric value, got '" + condition.text + "'",
                          line);
      }
      condition.value = *number;
    }
  }
  return condition;
}

RuleSet parse_ruleset(std::string_view body, const OntologySpec& ontology, std::size_t first_line) {
  RuleSet ruleset;

  std::string header;  // accumulated text of an unterminated header
  std::size_t header_line = 0;
  std::optional<Rule> rule;
  std::string condition;  // accumulated text of the current "-" line
  std::size_t condition_line = 0;
  bool in_condition = false;

  auto flush_condition = [&] {
    if (!in_condition) return;
    if (text::trim(condition).empty()) throw ConfigError("empty condition line", condition_line);
    rule->groups.push_back(ConditionGroup{parse_group(condition, condition_line)});
    condition.clear();
    in_condition = false;
  };
  auto finish_rule = [&] {
    flush_condition();
    if (!rule) return;
    if (rule->groups.empty()) {
      throw ConfigError("rule '" + rule->labels.label + ", " + rule->labels.detailed +
                            "' has no condition lines",
                        rule->source_line);
    }
    ruleset.rules.push_back(std::move(*rule));
    rule.reset();
  };
  auto finish_header = [&] {
    std::string_view h = text::trim(header);
    h.remove_suffix(1);  // ':'
    const auto comma = h.find(',');
    const auto label = text::trim(h.substr(0, comma));
    const auto detail_text = text::trim(h.substr(comma + 1));

    Rule r;
    r.source_line = header_line;
    r.assignment.label = std::string(label);
    if (!ontology.contains(Level::Label, label)) {
      throw ConfigError("label '" + std::string(label) + "' is not one of the ontology's main labels",
                        header_line);
    }
    try {
      r.assignment.detail = parse_detailed_label(detail_text, ontology);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), header_line);
    }
    const auto validation = validate_assignment(r.assignment, ontology);
    if (!validation.ok()) throw ConfigError(validation.violations.front().message, header_line);
    r.labels = LabelPair{r.assignment.label, render_detailed_label(r.assignment)};
    rule = std::move(r);
    header.clear();
  };

  const auto all_lines = text::lines(body);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = first_line + i;
    const auto t = text::trim(all_lines[i]);
    if (t.empty() || t.front() == '#') {
      if (t.empty()) flush_condition();
      continue;
    }

    if (t.front() == '-') {
      if (!header.empty()) throw ConfigError("rule header must end with ':'", header_line);
      if (!rule) throw ConfigError("condition line before any rule header", line_no);
      flush_condition();
      condition = std::string(t.substr(1));
      condition_line = line_no;
      in_condition = true;
    } else if (!header.empty()) {
      header += t;
      if (t.back() == ':') finish_header();
    } else if (t.find(',') != std::string_view::npos) {
      finish_rule();
      header = std::string(t);
      header_line = line_no;
      if (t.back() == ':') finish_header();
    } else if (in_condition) {
      condition.push_back(' ');
      condition += t;
    } else {
      throw ConfigError("expected a rule header 'label, detailed-label:' or a '-' condition line",
                        line_no);
    }
  }
  if (!header.empty()) throw ConfigError("rule header must end with ':'", header_line);
  finish_rule();
  return ruleset;
}

std::string render_ruleset(const RuleSet& rules) {
  std::string out;
  for (const auto& rule : rules.rules) {
    out += rule.assignment.label;
    out += ", ";
    out += render_detailed_label(rule.assignment);
    out += ":\n";
    for (const auto& group : rule.groups) {
      out += "    - ";
      for (std::size_t i = 0; i < group.conditions.size(); ++i) {
        const auto& c = group.conditions[i];
        if (i) out += " and ";
        out += column_name(c.column);
        out += op_symbol(c.op);
        out += c.text;
      }
      out += '\n';
    }
  }
  return out;
}

bool evaluate_condition(const Condition& c, const FlowView& flow) {
  switch (c.column) {
    case Column::Date: return compare_number(as_double(flow.date), c);
    case Column::Start: return compare_number(flow.start, c);
    case Column::Duration: return compare_number(flow.duration, c);
    case Column::SrcPort: return compare_number(as_double(flow.src_port), c);
    case Column::DstPort: return compare_number(as_double(flow.dst_port), c);
    case Column::Tos: return compare_number(as_double(flow.tos), c);
    case Column::Packets: return compare_number(as_double(flow.packets), c);
    case Column::Bytes: return compare_number(as_double(flow.bytes), c);
    case Column::Proto:
      return flow.proto && text::iequals(*flow.proto, std::get<std::string>(c.value));
    case Column::State:
      return flow.state && text::iequals(*flow.state, std::get<std::string>(c.value));
    case Column::SrcIp: return flow.src_ip && *flow.src_ip == std::get<IpAddress>(c.value);
    case Column::DstIp: return flow.dst_ip && *flow.dst_ip == std::get<IpAddress>(c.value);
  }
  return false;
}

bool match_rule(const Rule& rule, const FlowView& flow) {
  return std::any_of(rule.groups.begin(), rule.groups.end(), [&](const ConditionGroup& group) {
    return std::all_of(group.conditions.begin(), group.conditions.end(),
                       [&](const Condition& c) { return evaluate_condition(c, flow); });
  });
}

std::optional<std::size_t> first_match(const RuleSet& rules, const FlowView& flow) {
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    if (match_rule(rules.rules[i], flow)) return i;
  }
  return std::nullopt;
}

LabelConfig load_config(std::string_view text) {
  const auto all_lines = text::lines(text);
  SectionText ontology_section;
  SectionText rules_section;
  SectionText* current = nullptr;

  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const auto t = text::trim(all_lines[i]);
    if (t.starts_with('[') && t.ends_with(']')) {
      const auto name = text::trim(t.substr(1, t.size() - 2));
      SectionText* target = nullptr;
      if (text::iequals(name, "ontology")) {
        target = &ontology_section;
      } else if (text::iequals(name, "rules")) {
        target = &rules_section;
      } else {
        throw ConfigError("unknown section '" + std::string(t) + "'", i + 1);
      }
      if (target->present) throw ConfigError("duplicate section '" + std::string(t) + "'", i + 1);
      target->present = true;
      target->first_line = i + 2;
      current = target;
      continue;
    }
    if (!current) {
      if (!t.empty() && t.front() != '#') {
        // No section markers seen yet: the text is a bare rules section.
        rules_section.present = true;
        current = &rules_section;
      } else {
        continue;
      }
    }
    if (current->body.empty()) current->first_line = i + 1;
    current->body.append(all_lines[i]);
    current->body.push_back('\n');
  }

  LabelConfig config{load_ontology(ontology_section.body, ontology_section.first_line), {}};
  config.rules = parse_ruleset(rules_section.body, config.ontology, rules_section.first_line);
  return config;
}

}  // namespace netlabel
