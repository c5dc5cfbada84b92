#include "netlabel/zeek_io.hpp"

#include "netlabel/error.hpp"
#include "netlabel/text.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace netlabel {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::string_view kFieldsDirective = "#fields";
constexpr std::string_view kTypesDirective = "#types";
constexpr std::string_view kSeparatorDirective = "#separator";

// Decodes the "\x09"-style escapes Zeek uses in the #separator line.
std::string decode_escapes(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 3 < s.size() && s[i + 1] == 'x') {
      unsigned value = 0;
      const auto* first = s.data() + i + 2;
      const auto [ptr, ec] = std::from_chars(first, first + 2, value, 16);
      if (ec == std::errc() && ptr == first + 2) {
        out.push_back(static_cast<char>(value));
        i += 3;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

bool starts_with_directive(std::string_view line, std::string_view directive, char sep) {
  if (!line.starts_with(directive)) return false;
  if (line.size() == directive.size()) return true;
  const char next = line[directive.size()];
  return next == sep || next == ' ';
}

std::string_view directive_value(std::string_view line, std::string_view directive) {
  if (line.size() <= directive.size()) return {};
  return line.substr(directive.size() + 1);
}

std::string infer_json_type(const ordered_json& value) {
  switch (value.type()) {
    case ordered_json::value_t::string: return "string";
    case ordered_json::value_t::boolean: return "bool";
    case ordered_json::value_t::number_integer:
    case ordered_json::value_t::number_unsigned: return "count";
    case ordered_json::value_t::number_float: return "double";
    case ordered_json::value_t::array: return "vector[string]";
    default: return "string";
  }
}

std::string json_cell(const ordered_json& value, const ZeekHeader& header) {
  switch (value.type()) {
    case ordered_json::value_t::string: return value.get<std::string>();
    case ordered_json::value_t::boolean: return value.get<bool>() ? "T" : "F";
    case ordered_json::value_t::null: return header.unset_field;
    case ordered_json::value_t::array: {
      if (value.empty()) return header.empty_field;
      std::string out;
      for (const auto& element : value) {
        if (!out.empty()) out += header.set_separator;
        out += element.is_string() ? element.get<std::string>() : element.dump();
      }
      return out;
    }
    default: return value.dump();
  }
}

template <class T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <class T>
std::optional<T> cell_number(const ZeekHeader& header, std::span<const std::string> row,
                             const std::optional<std::size_t>& idx) {
  if (!idx || *idx >= row.size() || header.is_unset(row[*idx])) return std::nullopt;
  return parse_number<T>(row[*idx]);
}

std::optional<std::string_view> cell_text(const ZeekHeader& header,
                                          std::span<const std::string> row,
                                          const std::optional<std::size_t>& idx) {
  if (!idx || *idx >= row.size() || header.is_unset(row[*idx])) return std::nullopt;
  return std::string_view(row[*idx]);
}

std::optional<IpAddress> cell_ip(const ZeekHeader& header, std::span<const std::string> row,
                                 const std::optional<std::size_t>& idx) {
  const auto text = cell_text(header, row, idx);
  if (!text) return std::nullopt;
  return IpAddress::parse(*text);
}

// Sum of two counters where an unset member counts as zero; unset only when
// neither column exists in the log.
std::optional<std::int64_t> additive(const ZeekHeader& header, std::span<const std::string> row,
                                     const std::optional<std::size_t>& a,
                                     const std::optional<std::size_t>& b) {
  if (!a && !b) return std::nullopt;
  return cell_number<std::int64_t>(header, row, a).value_or(0) +
         cell_number<std::int64_t>(header, row, b).value_or(0);
}

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return sys_days{year{y} / month{m} / day{d}}.time_since_epoch().count();
}

bool valid_civil(int y, unsigned m, unsigned d) {
  using namespace std::chrono;
  return year_month_day{year{y}, month{m}, day{d}}.ok();
}

}  // namespace

std::optional<std::size_t> ZeekHeader::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < field_names.size(); ++i) {
    if (field_names[i] == name) return i;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reader

ZeekReader::ZeekReader(std::istream& in) : in_(in) {
  std::string line;
  while (read_line(line)) {
    const auto trimmed = text::trim(line);
    if (trimmed.empty() && header_.lines.empty()) continue;
    if (trimmed.starts_with('{')) {
      format_ = LogFormat::JsonLines;
      pending_ = std::move(line);
      has_pending_ = true;
      // Seed the synthetic header from the first object.
      Record first;
      first.raw = pending_;
      decode_json(first);
      return;
    }
    if (line.starts_with('#')) {
      header_.lines.push_back(line);
      continue;
    }
    pending_ = std::move(line);
    has_pending_ = true;
    break;
  }
  parse_tsv_header();
}

bool ZeekReader::read_line(std::string& line) {
  if (!std::getline(in_, line)) return false;
  ++line_no_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void ZeekReader::parse_tsv_header() {
  format_ = LogFormat::Tsv;
  bool have_fields = false;
  bool have_types = false;
  // #separator must be known before the other directives can be split.
  for (const auto& line : header_.lines) {
    if (line.starts_with(kSeparatorDirective) && line.size() > kSeparatorDirective.size()) {
      const auto value = decode_escapes(line.substr(kSeparatorDirective.size() + 1));
      if (value.size() != 1) throw FormatError("unsupported #separator '" + value + "'");
      header_.separator = value.front();
    }
  }
  const char sep = header_.separator;
  for (const std::string_view line : header_.lines) {
    auto values = [&](std::string_view directive) {
      std::vector<std::string> out;
      for (auto piece : text::split(directive_value(line, directive), sep)) out.emplace_back(piece);
      return out;
    };
    if (starts_with_directive(line, kFieldsDirective, sep)) {
      header_.field_names = values(kFieldsDirective);
      have_fields = true;
    } else if (starts_with_directive(line, kTypesDirective, sep)) {
      header_.field_types = values(kTypesDirective);
      have_types = true;
    } else if (starts_with_directive(line, "#set_separator", sep)) {
      header_.set_separator = std::string(directive_value(line, "#set_separator"));
    } else if (starts_with_directive(line, "#empty_field", sep)) {
      header_.empty_field = std::string(directive_value(line, "#empty_field"));
    } else if (starts_with_directive(line, "#unset_field", sep)) {
      header_.unset_field = std::string(directive_value(line, "#unset_field"));
    } else if (starts_with_directive(line, "#path", sep)) {
      header_.path = std::string(directive_value(line, "#path"));
    } else if (starts_with_directive(line, "#open", sep)) {
      header_.open = std::string(directive_value(line, "#open"));
    }
  }
  if (!have_fields) throw FormatError("Zeek TSV log has no #fields line");
  if (!have_types) {
    header_.field_types.assign(header_.field_names.size(), "string");
  } else if (header_.field_types.size() != header_.field_names.size()) {
    throw FormatError("#types has " + std::to_string(header_.field_types.size()) +
                      " entries but #fields has " + std::to_string(header_.field_names.size()));
  }
}

bool ZeekReader::next(Record& record) {
  while (true) {
    if (has_pending_) {
      record.raw.swap(pending_);
      has_pending_ = false;
    } else if (!read_line(record.raw)) {
      return false;
    }

    if (format_ == LogFormat::JsonLines) {
      if (text::trim(record.raw).empty()) continue;
      decode_json(record);
      ++records_read_;
      return true;
    }

    if (record.raw.starts_with('#')) {
      trailer_.push_back(record.raw);
      continue;
    }
    if (!trailer_.empty()) {
      throw FormatError("record after trailing '#' lines", line_no_);
    }
    split_tsv(record);
    ++records_read_;
    return true;
  }
}

void ZeekReader::split_tsv(Record& record) {
  const std::string_view line = record.raw;
  const std::size_t expected = header_.field_names.size();
  record.cells.resize(expected);
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(header_.separator, start);
    const auto piece =
        line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    if (count < expected) record.cells[count].assign(piece);
    ++count;
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (count != expected) {
    throw FormatError("row " + std::to_string(records_read_ + 1) + " has " +
                          std::to_string(count) + " fields, expected " + std::to_string(expected),
                      line_no_);
  }
}

void ZeekReader::decode_json(Record& record) {
  // The constructor decodes the first object once to seed the header; the
  // same line is decoded again by the first next() call.
  const std::size_t line_no = line_no_;
  auto value = ordered_json::parse(record.raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded() || !value.is_object()) {
    throw FormatError("invalid JSON object", line_no);
  }
  for (const auto& [key, element] : value.items()) {
    if (json_keys_.contains(key)) continue;
    json_keys_.emplace(key, header_.field_names.size());
    header_.field_names.push_back(key);
    header_.field_types.push_back(infer_json_type(element));
  }
  record.cells.assign(header_.field_names.size(), header_.unset_field);
  for (const auto& [key, element] : value.items()) {
    record.cells[json_keys_.at(key)] = json_cell(element, header_);
  }
}

ZeekLogTable read_log(std::istream& in) {
  ZeekReader reader(in);
  ZeekLogTable table;
  Record record;
  while (reader.next(record)) table.records.push_back(record);
  table.header = reader.header();
  table.format = reader.format();
  table.trailer = reader.trailer();
  // JSON rows decoded before later keys appeared are shorter; pad them.
  for (auto& r : table.records) r.cells.resize(table.header.field_names.size(), table.header.unset_field);
  return table;
}

// ---------------------------------------------------------------------------
// Writer

ZeekWriter::ZeekWriter(std::ostream& out, const ZeekHeader& header, LogFormat format)
    : out_(out), separator_(header.separator), format_(format) {
  if (format_ != LogFormat::Tsv) return;
  const std::string sep(1, separator_);
  const std::string label_fields = sep + std::string(kLabelField) + sep + std::string(kDetailedLabelField);
  const std::string label_types = sep + "string" + sep + "string";

  if (header.lines.empty()) {
    char hex[8];
    std::snprintf(hex, sizeof(hex), "\\x%02x", static_cast<unsigned char>(separator_));
    out_ << "#separator " << hex << '\n';
    out_ << "#set_separator" << sep << header.set_separator << '\n';
    out_ << "#empty_field" << sep << header.empty_field << '\n';
    out_ << "#unset_field" << sep << header.unset_field << '\n';
    if (!header.path.empty()) out_ << "#path" << sep << header.path << '\n';
    out_ << "#fields";
    for (const auto& name : header.field_names) out_ << sep << name;
    out_ << label_fields << '\n';
    out_ << "#types";
    for (const auto& type : header.field_types) out_ << sep << type;
    out_ << label_types << '\n';
    return;
  }
  for (const std::string_view line : header.lines) {
    out_ << line;
    if (starts_with_directive(line, kFieldsDirective, separator_)) {
      out_ << label_fields;
    } else if (starts_with_directive(line, kTypesDirective, separator_)) {
      out_ << label_types;
    }
    out_ << '\n';
  }
}

void ZeekWriter::write(const Record& record, const LabelPair& labels) {
  if (format_ == LogFormat::JsonLines) {
    const auto close = record.raw.rfind('}');
    const auto open = record.raw.find('{');
    if (close == std::string::npos || open == std::string::npos) {
      throw UsageError("JSON record has no enclosing braces");
    }
    const bool empty_object = text::trim(std::string_view(record.raw).substr(open + 1, close - open - 1)).empty();
    out_.write(record.raw.data(), static_cast<std::streamsize>(close));
    if (!empty_object) out_ << ',';
    out_ << '"' << kLabelField << "\":" << ordered_json(labels.label).dump() << ",\""
         << kDetailedLabelField << "\":" << ordered_json(labels.detailed).dump();
    out_ << std::string_view(record.raw).substr(close) << '\n';
    return;
  }

  if (!record.raw.empty() || record.cells.size() <= 1) {
    out_ << record.raw;
  } else {
    for (std::size_t i = 0; i < record.cells.size(); ++i) {
      if (i) out_ << separator_;
      out_ << record.cells[i];
    }
  }
  out_ << separator_ << labels.label << separator_ << labels.detailed << '\n';
}

void ZeekWriter::finish(std::span<const std::string> trailer) {
  if (format_ == LogFormat::Tsv) {
    for (const auto& line : trailer) out_ << line << '\n';
  }
  out_.flush();
}

void write_log(const ZeekLogTable& table, std::span<const LabelPair> labels, std::ostream& out) {
  if (labels.size() != table.records.size()) {
    throw UsageError("write_log: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(table.records.size()) + " records");
  }
  ZeekWriter writer(out, table.header, table.format);
  for (std::size_t i = 0; i < labels.size(); ++i) writer.write(table.records[i], labels[i]);
  writer.finish(table.trailer);
}

// ---------------------------------------------------------------------------
// Conn projection

ConnSchema ConnSchema::resolve(const ZeekHeader& header) {
  const auto uid = header.field_index("uid");
  if (!uid) throw FormatError("log has no uid field");
  ConnSchema schema;
  schema.uid = *uid;
  schema.ts = header.field_index("ts");
  schema.orig_h = header.field_index("id.orig_h");
  schema.orig_p = header.field_index("id.orig_p");
  schema.resp_h = header.field_index("id.resp_h");
  schema.resp_p = header.field_index("id.resp_p");
  schema.proto = header.field_index("proto");
  schema.duration = header.field_index("duration");
  schema.conn_state = header.field_index("conn_state");
  schema.tos = header.field_index("tos");
  schema.orig_pkts = header.field_index("orig_pkts");
  schema.resp_pkts = header.field_index("resp_pkts");
  schema.orig_bytes = header.field_index("orig_bytes");
  schema.resp_bytes = header.field_index("resp_bytes");
  if (header.path != "conn" && (!schema.orig_h || !schema.resp_h || !schema.proto)) {
    throw FormatError("not a conn log: needs id.orig_h, id.resp_h and proto fields");
  }
  return schema;
}

FlowView flow_view(const ConnSchema& schema, const ZeekHeader& header,
                   std::span<const std::string> row) {
  FlowView view;
  if (schema.uid < row.size() && !header.is_unset(row[schema.uid])) view.uid = row[schema.uid];
  if (const auto ts = cell_text(header, row, schema.ts)) {
    view.start = parse_zeek_time(*ts);
    if (view.start) view.date = static_cast<std::int64_t>(std::floor(*view.start / 86400.0));
  }
  view.duration = cell_number<double>(header, row, schema.duration);
  view.proto = cell_text(header, row, schema.proto);
  view.src_ip = cell_ip(header, row, schema.orig_h);
  view.src_port = cell_number<std::int64_t>(header, row, schema.orig_p);
  view.dst_ip = cell_ip(header, row, schema.resp_h);
  view.dst_port = cell_number<std::int64_t>(header, row, schema.resp_p);
  view.state = cell_text(header, row, schema.conn_state);
  view.tos = cell_number<std::int64_t>(header, row, schema.tos);
  view.packets = additive(header, row, schema.orig_pkts, schema.resp_pkts);
  view.bytes = additive(header, row, schema.orig_bytes, schema.resp_bytes);
  return view;
}

std::optional<double> parse_zeek_time(std::string_view s) {
  if (auto epoch = parse_number<double>(s)) return epoch;

  // YYYY-MM-DDTHH:MM:SS[.frac][Z]
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  const auto date = parse_calendar_date(s.substr(0, 10));
  const auto hh = parse_number<int>(s.substr(11, 2));
  const auto mm = parse_number<int>(s.substr(14, 2));
  auto rest = s.substr(17);
  if (rest.ends_with('Z')) rest.remove_suffix(1);
  const auto ss = parse_number<double>(rest);
  if (!date || !hh || !mm || !ss || *hh > 23 || *mm > 59 || *ss < 0 || *ss >= 61) {
    return std::nullopt;
  }
  return static_cast<double>(*date) * 86400.0 + *hh * 3600.0 + *mm * 60.0 + *ss;
}

std::optional<std::int64_t> parse_calendar_date(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  const auto y = parse_number<int>(s.substr(0, 4));
  const auto m = parse_number<unsigned>(s.substr(5, 2));
  const auto d = parse_number<unsigned>(s.substr(8, 2));
  if (!y || !m || !d || !valid_civil(*y, *m, *d)) return std::nullopt;
  return days_from_civil(*y, *m, *d);
}

}  // namespace netlabel
