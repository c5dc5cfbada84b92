#pragma once

#include "netlabel/ip_address.hpp"
#include "netlabel/ontology.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace netlabel {

enum class LogFormat { Tsv, JsonLines };

inline constexpr std::string_view kLabelField = "label";
inline constexpr std::string_view kDetailedLabelField = "detailed_label";

// Metadata of a Zeek ASCII log. For JSON-lines input the field list is
// synthesized from the keys seen so far, in order of first appearance.
struct ZeekHeader {
  char separator = '\t';
  std::string set_separator = ",";
  std::string empty_field = "(empty)";
  std::string unset_field = "-";
  std::string path;
  std::string open;
  std::vector<std::string> field_names;
  std::vector<std::string> field_types;
  // Every '#' line preceding the first record, verbatim (TSV only).
  std::vector<std::string> lines;

  std::optional<std::size_t> field_index(std::string_view name) const;
  bool is_unset(std::string_view cell) const {
    return cell == unset_field || cell == empty_field;
  }
};

struct Record {
  std::vector<std::string> cells;
  // The input line exactly as read, without the line terminator.
  std::string raw;
};

struct ZeekLogTable {
  ZeekHeader header;
  std::vector<Record> records;
  LogFormat format = LogFormat::Tsv;
  // '#' lines after the last record, e.g. "#close".
  std::vector<std::string> trailer;
};

// Pull-style reader; holds one record at a time.
class ZeekReader {
 public:
  // Reads the header (TSV) or the first record (JSON-lines). Throws
  // FormatError if a TSV log has no "#fields" line.
  explicit ZeekReader(std::istream& in);

  const ZeekHeader& header() const noexcept { return header_; }
  LogFormat format() const noexcept { return format_; }

  // Returns false at end of input. `record` is overwritten and its buffers
  // reused between calls.
  bool next(Record& record);

  // Trailing '#' lines; complete once next() has returned false.
  const std::vector<std::string>& trailer() const noexcept { return trailer_; }
  std::size_t records_read() const noexcept { return records_read_; }

 private:
  bool read_line(std::string& line);
  void parse_tsv_header();
  void split_tsv(Record& record);
  void decode_json(Record& record);

  std::istream& in_;
  ZeekHeader header_;
  LogFormat format_ = LogFormat::Tsv;
  std::vector<std::string> trailer_;
  std::unordered_map<std::string, std::size_t> json_keys_;
  std::string pending_;
  bool has_pending_ = false;
  std::size_t line_no_ = 0;
  std::size_t records_read_ = 0;
};

// Writes a log with two extra columns, "label" and "detailed_label". TSV
// header lines are reproduced verbatim except "#fields" and "#types", which
// gain the two trailing entries.
class ZeekWriter {
 public:
  ZeekWriter(std::ostream& out, const ZeekHeader& header, LogFormat format);

  void write(const Record& record, const LabelPair& labels);
  void finish(std::span<const std::string> trailer);

 private:
  std::ostream& out_;
  char separator_;
  LogFormat format_;
};

ZeekLogTable read_log(std::istream& in);

// labels[i] belongs to table.records[i]; throws UsageError on a size mismatch.
void write_log(const ZeekLogTable& table, std::span<const LabelPair> labels, std::ostream& out);

// Rule-visible projection of a conn.log row. Views point into the row's
// cells and are valid while the row is.
struct FlowView {
  std::string_view uid;
  std::optional<double> start;       // ts, epoch seconds
  std::optional<std::int64_t> date;  // days since 1970-01-01, UTC
  std::optional<double> duration;
  std::optional<std::string_view> proto;
  std::optional<IpAddress> src_ip;
  std::optional<std::int64_t> src_port;
  std::optional<IpAddress> dst_ip;
  std::optional<std::int64_t> dst_port;
  std::optional<std::string_view> state;
  std::optional<std::int64_t> tos;
  std::optional<std::int64_t> packets;
  std::optional<std::int64_t> bytes;
};

// Column positions of the conn.log fields that feed a FlowView.
struct ConnSchema {
  std::size_t uid = 0;
  std::optional<std::size_t> ts, orig_h, orig_p, resp_h, resp_p, proto, duration, conn_state,
      tos, orig_pkts, resp_pkts, orig_bytes, resp_bytes;

  // Throws FormatError when the header has no uid field, or when it is not a
  // conn log and lacks any of id.orig_h, id.resp_h or proto.
  static ConnSchema resolve(const ZeekHeader& header);
};

FlowView flow_view(const ConnSchema& schema, const ZeekHeader& header,
                   std::span<const std::string> row);

// Parses a Zeek time value: epoch seconds ("1674567890.5") or ISO 8601 UTC
// ("2023-01-24T13:44:50.5Z").
std::optional<double> parse_zeek_time(std::string_view text);

// Days since 1970-01-01 for a "YYYY-MM-DD" calendar date.
std::optional<std::int64_t> parse_calendar_date(std::string_view text);

}  // namespace netlabel
