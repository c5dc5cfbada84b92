#include "netlabel/labeler.hpp"

#include "netlabel/error.hpp"

namespace netlabel {

namespace {

constexpr std::size_t kMaxWarnings = 20;

std::string pair_key(const LabelPair& labels) {
  std::string key = labels.label;
  key.push_back('\x1f');
  key += labels.detailed;
  return key;
}

// Keeps conn-schema resolution in step with JSON inputs whose synthetic
// header grows as new keys appear.
class SchemaTracker {
 public:
  const ConnSchema& get(const ZeekHeader& header) {
    if (!schema_ || header.field_names.size() != seen_fields_) {
      schema_ = ConnSchema::resolve(header);
      seen_fields_ = header.field_names.size();
    }
    return *schema_;
  }

 private:
  std::optional<ConnSchema> schema_;
  std::size_t seen_fields_ = 0;
};

}  // namespace

std::uint32_t UidIndex::intern(const LabelPair& labels) {
  auto key = pair_key(labels);
  if (const auto it = pair_ids_.find(key); it != pair_ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(pairs_.size());
  pairs_.push_back(labels);
  pair_ids_.emplace(std::move(key), id);
  return id;
}

bool UidIndex::insert(std::string_view uid, const LabelPair& labels) {
  if (entries_.find(uid) != entries_.end()) return false;
  entries_.emplace(std::string(uid), intern(labels));
  return true;
}

const LabelPair* UidIndex::find(std::string_view uid) const {
  const auto it = entries_.find(uid);
  return it == entries_.end() ? nullptr : &pairs_[it->second];
}

void IndexBuild::add(std::string_view uid, bool uid_unset, const LabelPair& labels,
                     std::size_t row) {
  if (uid_unset || uid.empty()) {
    ++unset_uids;
    if (warnings.size() < kMaxWarnings) {
      warnings.push_back("row " + std::to_string(row) + ": unset uid, not indexed");
    }
    return;
  }
  if (!index.insert(uid, labels)) {
    ++duplicate_uids;
    if (warnings.size() < kMaxWarnings) {
      warnings.push_back("row " + std::to_string(row) + ": duplicate uid " + std::string(uid) +
                         ", keeping first occurrence");
    }
  }
}

std::vector<LabelPair> label_conn(const ZeekLogTable& table, const RuleSet& rules) {
  const auto schema = ConnSchema::resolve(table.header);
  std::vector<LabelPair> out;
  out.reserve(table.records.size());
  for (const auto& record : table.records) {
    const auto flow = flow_view(schema, table.header, record.cells);
    const auto match = first_match(rules, flow);
    out.push_back(match ? rules.rules[*match].labels : LabelPair::empty());
  }
  return out;
}

IndexBuild build_uid_index(const ZeekLogTable& table, std::span<const LabelPair> assignments) {
  if (assignments.size() != table.records.size()) {
    throw UsageError("build_uid_index: " + std::to_string(assignments.size()) +
                     " assignments for " + std::to_string(table.records.size()) + " rows");
  }
  const auto uid_col = table.header.field_index("uid");
  if (!uid_col) throw FormatError("log has no uid field");
  IndexBuild build;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const auto& uid = table.records[i].cells[*uid_col];
    build.add(uid, table.header.is_unset(uid), assignments[i], i + 1);
  }
  return build;
}

LabelSummary label_conn_stream(ZeekReader& reader, ZeekWriter& writer, const RuleSet& rules,
                               IndexBuild* index) {
  LabelSummary summary;
  SchemaTracker schemas;
  const auto empty = LabelPair::empty();
  std::vector<std::size_t> per_rule(rules.rules.size(), 0);
  std::size_t unmatched = 0;

  Record record;
  while (reader.next(record)) {
    const auto& header = reader.header();
    const auto& schema = schemas.get(header);
    record.cells.resize(header.field_names.size(), header.unset_field);
    const auto flow = flow_view(schema, header, record.cells);
    const auto match = first_match(rules, flow);
    const LabelPair& labels = match ? rules.rules[*match].labels : empty;
    writer.write(record, labels);
    ++summary.rows;
    if (match) {
      ++per_rule[*match];
    } else {
      ++unmatched;
    }
    if (index) {
      const auto& uid = record.cells[schema.uid];
      index->add(uid, header.is_unset(uid), labels, summary.rows);
    }
  }
  writer.finish(reader.trailer());

  for (std::size_t i = 0; i < per_rule.size(); ++i) {
    if (per_rule[i] == 0) continue;
    summary.labeled += per_rule[i];
    summary.histogram[rules.rules[i].labels.label] += per_rule[i];
  }
  if (unmatched) summary.histogram[std::string(kEmptyLabel)] += unmatched;
  return summary;
}

IndexBuild load_uid_index(ZeekReader& labeled_conn) {
  IndexBuild build;
  Record record;
  std::size_t row = 0;
  while (labeled_conn.next(record)) {
    const auto& header = labeled_conn.header();
    const auto uid_col = header.field_index("uid");
    const auto label_col = header.field_index(kLabelField);
    const auto detail_col = header.field_index(kDetailedLabelField);
    if (!uid_col || !label_col || !detail_col) {
      throw UsageError("labeled conn.log must have uid, label and detailed_label fields");
    }
    record.cells.resize(header.field_names.size(), header.unset_field);
    const auto& uid = record.cells[*uid_col];
    build.add(uid, header.is_unset(uid),
              LabelPair{record.cells[*label_col], record.cells[*detail_col]}, ++row);
  }
  // A header-only file still has to carry the label columns.
  const auto& header = labeled_conn.header();
  if (labeled_conn.format() == LogFormat::Tsv &&
      (!header.field_index(kLabelField) || !header.field_index(kDetailedLabelField))) {
    throw UsageError("labeled conn.log must have label and detailed_label fields");
  }
  return build;
}

}  // namespace netlabel
