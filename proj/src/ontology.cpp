#include "netlabel/ontology.hpp"

#include "netlabel/error.hpp"
#include "netlabel/text.hpp"

#include <algorithm>
#include <set>

namespace netlabel {

namespace {

struct LevelInfo {
  std::string_view name;
  bool mandatory;
  bool extensible;
};

constexpr std::array<LevelInfo, kLevelCount> kLevelInfo = {{
    {"label", true, false},
    {"source", false, false},
    {"destination", false, false},
    {"technique", false, true},
    {"sub-technique", false, true},
    {"process", false, true},
    {"app-protocol", false, true},
}};

bool valid_item(std::string_view item) {
  if (item.empty() || item == kEmptyLabel) return false;
  return std::none_of(item.begin(), item.end(), [](char c) {
    return c == kDetailSeparator || c == ',' || c == ':' || c == '#' ||
           text::kWhitespace.find(c) != std::string_view::npos;
  });
}

}  // namespace

std::string_view level_name(Level level) noexcept {
  return kLevelInfo[static_cast<std::size_t>(level)].name;
}

std::optional<Level> level_from_name(std::string_view name) noexcept {
  for (auto level : kAllLevels) {
    if (text::iequals(name, level_name(level))) return level;
  }
  if (text::iequals(name, "app-process")) return Level::Process;
  return std::nullopt;
}

OntologySpec::OntologySpec() {
  for (auto level : kAllLevels) {
    const auto& info = kLevelInfo[static_cast<std::size_t>(level)];
    levels_[static_cast<std::size_t>(level)] =
        LevelSpec{level, std::string(info.name), info.mandatory, info.extensible, {}};
  }
}

OntologySpec OntologySpec::builtin() {
  OntologySpec spec;
  for (const char* item : {"Benign", "Malicious", "Unknown"}) spec.add_item(Level::Label, item);
  for (const char* item : {"From_malicious", "From_benign"}) spec.add_item(Level::Source, item);
  for (const char* item : {"To_malicious", "To_benign"}) spec.add_item(Level::Destination, item);
  return spec;
}

void OntologySpec::add_item(Level level, std::string item) {
  if (level != Level::Label) detail_owner_.emplace(item, level);
  levels_[static_cast<std::size_t>(level)].items.push_back(std::move(item));
}

bool OntologySpec::contains(Level level, std::string_view item) const {
  const auto& items = this->level(level).items;
  return std::find(items.begin(), items.end(), item) != items.end();
}

std::optional<Level> OntologySpec::detail_level_of(std::string_view item) const {
  const auto it = detail_owner_.find(std::string(item));
  if (it == detail_owner_.end()) return std::nullopt;
  return it->second;
}

OntologySpec load_ontology(std::string_view body, std::size_t first_line) {
  OntologySpec spec = OntologySpec::builtin();
  std::array<std::set<std::string, std::less<>>, kLevelCount> declared;

  const auto all_lines = text::lines(body);
  for (std::size_t i = 0; i < all_lines.size(); ++i) {
    const std::size_t line_no = first_line + i;
    const auto line = text::trim(all_lines[i]);
    if (line.empty() || line.front() == '#') continue;

    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw ConfigError("expected 'level: item, item, ...' in ontology section", line_no);
    }
    const auto name = text::trim(line.substr(0, colon));
    const auto level = level_from_name(name);
    if (!level) throw ConfigError("unknown ontology level '" + std::string(name) + "'", line_no);
    const auto idx = static_cast<std::size_t>(*level);

    for (auto raw : text::split(line.substr(colon + 1), ',')) {
      const auto item = text::trim(raw);
      if (item.empty()) continue;
      const std::string item_str(item);
      if (!valid_item(item)) {
        throw ConfigError("invalid item '" + item_str + "' in level '" +
                              std::string(level_name(*level)) +
                              "': items must be non-empty and contain no '-', ',', ':' or spaces",
                          line_no);
      }
      if (!declared[idx].insert(item_str).second) {
        throw ConfigError("duplicate item '" + item_str + "' in level '" +
                              std::string(level_name(*level)) + "'",
                          line_no);
      }
      if (spec.contains(*level, item)) continue;  // restating a built-in item
      if (!spec.level(*level).extensible) {
        throw ConfigError("level '" + std::string(level_name(*level)) +
                              "' is closed; cannot add item '" + item_str + "'",
                          line_no);
      }
      if (const auto owner = spec.detail_level_of(item)) {
        throw ConfigError("item '" + item_str + "' already belongs to level '" +
                              std::string(level_name(*owner)) + "'",
                          line_no);
      }
      spec.add_item(*level, item_str);
    }
  }
  return spec;
}

ValidationResult validate_assignment(const LabelAssignment& assignment,
                                     const OntologySpec& ontology) {
  ValidationResult result;
  if (!ontology.contains(Level::Label, assignment.label)) {
    result.violations.push_back(
        {Level::Label, "label '" + assignment.label + "' is not an item of level 'label'"});
  }
  for (const auto& [level, item] : assignment.detail) {
    if (level == Level::Label) {
      result.violations.push_back({level, "level 'label' cannot appear in the detailed label"});
    } else if (!ontology.contains(level, item)) {
      result.violations.push_back({level, "item '" + item + "' is not in level '" +
                                              std::string(level_name(level)) + "'"});
    }
  }
  if (assignment.detail.contains(Level::SubTechnique) &&
      !assignment.detail.contains(Level::Technique)) {
    result.violations.push_back(
        {Level::SubTechnique, "sub-technique requires a technique"});
  }
  return result;
}

std::string render_detailed_label(const DetailMap& detail) {
  std::string out;
  for (auto level : kDetailLevels) {
    const auto it = detail.find(level);
    if (it == detail.end()) continue;
    if (!out.empty()) out.push_back(kDetailSeparator);
    out += it->second;
  }
  return out.empty() ? std::string(kEmptyLabel) : out;
}

std::string render_detailed_label(const LabelAssignment& assignment) {
  return render_detailed_label(assignment.detail);
}

DetailMap parse_detailed_label(std::string_view s, const OntologySpec& ontology) {
  DetailMap detail;
  s = text::trim(s);
  if (s == kEmptyLabel) return detail;
  for (auto token : text::split(s, kDetailSeparator)) {
    if (token.empty()) {
      throw ConfigError("empty component in detailed label '" + std::string(s) + "'");
    }
    const auto level = ontology.detail_level_of(token);
    if (!level) {
      throw ConfigError("unknown detailed-label item '" + std::string(token) + "'");
    }
    if (!detail.emplace(*level, std::string(token)).second) {
      throw ConfigError("detailed label '" + std::string(s) + "' has two items for level '" +
                        std::string(level_name(*level)) + "'");
    }
  }
  return detail;
}

}  // namespace netlabel
