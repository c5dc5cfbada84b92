#pragma once

#include "netlabel/ontology.hpp"
#include "netlabel/rule_dsl.hpp"
#include "netlabel/zeek_io.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace netlabel {

// uid -> conn.log labels. Label pairs are interned, so the index costs one
// uid string and one integer per flow.
class UidIndex {
 public:
  // Returns false (and keeps the existing entry) if the uid is already present.
  bool insert(std::string_view uid, const LabelPair& labels);

  // nullptr when the uid is absent; distinct from a stored "(empty)" pair.
  const LabelPair* find(std::string_view uid) const;

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t distinct_labels() const noexcept { return pairs_.size(); }

 private:
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::uint32_t intern(const LabelPair& labels);

  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> entries_;
  std::deque<LabelPair> pairs_;
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> pair_ids_;
};

struct IndexBuild {
  UidIndex index;
  std::size_t unset_uids = 0;
  std::size_t duplicate_uids = 0;
  std::vector<std::string> warnings;  // first few, for display

  // Adds one conn.log row. row is 1-based, used in warnings.
  void add(std::string_view uid, bool uid_unset, const LabelPair& labels, std::size_t row);
};

// First-match-wins labeling of every row; unmatched rows get "(empty)".
std::vector<LabelPair> label_conn(const ZeekLogTable& table, const RuleSet& rules);

IndexBuild build_uid_index(const ZeekLogTable& table, std::span<const LabelPair> assignments);

struct LabelSummary {
  std::size_t rows = 0;
  std::size_t labeled = 0;  // rows matched by some rule
  std::map<std::string, std::size_t> histogram;  // main label -> rows, "(empty)" included
};

// Streams a conn.log through the rules into `writer`, one row in memory at a
// time. When `index` is non-null the uid index is built along the way. The
// writer is finished (trailer lines copied) before returning.
LabelSummary label_conn_stream(ZeekReader& reader, ZeekWriter& writer, const RuleSet& rules,
                               IndexBuild* index = nullptr);

// Builds the index from an already labeled conn.log. Throws UsageError when
// the log lacks the label columns.
IndexBuild load_uid_index(ZeekReader& labeled_conn);

}  // namespace netlabel
