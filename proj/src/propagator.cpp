#include "netlabel/propagator.hpp"

#include "netlabel/error.hpp"
#include "netlabel/text.hpp"

namespace netlabel {

namespace {

struct Resolved {
  LabelPair labels;
  bool matched = false;
};

// Running merge_labels over a stream of candidates.
class Merger {
 public:
  void add(const LabelPair& candidate) {
    const int rank = label_rank(candidate.label);
    if (!best_ || rank > rank_) {
      best_ = candidate;
      rank_ = rank;
    }
  }
  LabelPair result() const { return best_ ? *best_ : LabelPair::empty(); }

 private:
  std::optional<LabelPair> best_;
  int rank_ = -1;
};

std::vector<std::string_view> set_members(const ZeekHeader& header, std::string_view cell) {
  if (header.is_unset(cell) || cell.empty()) return {};
  if (header.set_separator.size() == 1) return text::split(cell, header.set_separator.front());
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = cell.find(header.set_separator, start);
    out.push_back(cell.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + header.set_separator.size();
  }
}

Resolved resolve_uid(const ZeekHeader& header, std::string_view uid, const UidIndex& index) {
  if (header.is_unset(uid)) return {LabelPair::empty(), false};
  if (const auto* labels = index.find(uid)) return {*labels, true};
  return {LabelPair::empty(), false};
}

Resolved resolve_uid_set(const ZeekHeader& header, std::string_view cell, const UidIndex& index) {
  Merger merger;
  bool matched = false;
  for (auto uid : set_members(header, cell)) {
    const auto* labels = index.find(uid);
    matched = matched || labels != nullptr;
    merger.add(labels ? *labels : LabelPair::empty());
  }
  return {merger.result(), matched};
}

std::optional<std::size_t> cert_id_column(const ZeekHeader& x509, CertLabels::Key key) {
  if (key == CertLabels::Key::Fingerprint) return x509.field_index("fingerprint");
  if (auto id = x509.field_index("id")) return id;
  return x509.field_index("fuid");
}

struct ChainColumns {
  std::size_t uid;
  std::size_t chain;
  CertLabels::Key key;
};

std::optional<ChainColumns> find_chain_columns(const ZeekHeader& ssl) {
  const auto uid = ssl.field_index("uid");
  if (!uid) return std::nullopt;
  if (const auto fuids = ssl.field_index("cert_chain_fuids")) {
    return ChainColumns{*uid, *fuids, CertLabels::Key::FileId};
  }
  if (const auto fps = ssl.field_index("cert_chain_fps")) {
    return ChainColumns{*uid, *fps, CertLabels::Key::Fingerprint};
  }
  return std::nullopt;
}

ChainColumns chain_columns(const ZeekHeader& ssl) {
  if (!ssl.field_index("uid")) throw FormatError("ssl.log has no uid field");
  if (auto cols = find_chain_columns(ssl)) return *cols;
  throw FormatError("ssl.log has no cert_chain_fuids field");
}

// Column a dependent log joins on, or nullopt if it is missing.
std::optional<std::size_t> join_column(const ZeekHeader& header, LogKind kind,
                                       const CertLabels* certs) {
  switch (kind) {
    case LogKind::Uid: return header.field_index("uid");
    case LogKind::Files: return header.field_index("conn_uids");
    case LogKind::X509: return cert_id_column(header, certs->key());
    case LogKind::Unlinked: return std::nullopt;
  }
  return std::nullopt;
}

void add_ssl_row(CertLabels& certs, const ZeekHeader& header, const ChainColumns& cols,
                 std::span<const std::string> row, const UidIndex& index) {
  const auto parent = resolve_uid(header, row[cols.uid], index);
  for (auto cert : set_members(header, row[cols.chain])) {
    certs.add(cert, parent.labels, parent.matched);
  }
}

}  // namespace

LogKind classify_log(const ZeekHeader& header) {
  if (header.field_index("uid")) return LogKind::Uid;
  if (header.path == "files" || header.field_index("conn_uids")) return LogKind::Files;
  if (header.path == "x509" || header.field_index("certificate.serial")) return LogKind::X509;
  return LogKind::Unlinked;
}

std::string_view log_kind_name(LogKind kind) noexcept {
  switch (kind) {
    case LogKind::Uid: return "uid";
    case LogKind::Files: return "files";
    case LogKind::X509: return "x509";
    case LogKind::Unlinked: return "unlinked";
  }
  return "?";
}

int label_rank(std::string_view label) noexcept {
  if (label == "Malicious") return 3;
  if (label == "Unknown") return 2;
  if (label == "Benign") return 1;
  return 0;
}

LabelPair merge_labels(std::span<const LabelPair> candidates) {
  Merger merger;
  for (const auto& c : candidates) merger.add(c);
  return merger.result();
}

std::vector<LabelPair> propagate_log(const ZeekLogTable& table, const UidIndex& index) {
  const auto uid_col = table.header.field_index("uid");
  if (!uid_col) {
    throw UsageError("log '" + table.header.path +
                     "' has no uid field; route files.log through propagate_files_log and "
                     "x509.log through propagate_x509");
  }
  std::vector<LabelPair> out;
  out.reserve(table.records.size());
  for (const auto& record : table.records) {
    out.push_back(resolve_uid(table.header, record.cells[*uid_col], index).labels);
  }
  return out;
}

FilesPropagation propagate_files_log(const ZeekLogTable& files, const UidIndex& index) {
  const auto uids_col = files.header.field_index("conn_uids");
  if (!uids_col) throw FormatError("files.log has no conn_uids field");
  const auto fuid_col = files.header.field_index("fuid");

  FilesPropagation result;
  result.rows.reserve(files.records.size());
  for (const auto& record : files.records) {
    auto labels = resolve_uid_set(files.header, record.cells[*uids_col], index).labels;
    if (fuid_col && !files.header.is_unset(record.cells[*fuid_col])) {
      result.by_fuid.emplace(record.cells[*fuid_col], labels);
    }
    result.rows.push_back(std::move(labels));
  }
  return result;
}

void CertLabels::add(std::string_view cert, const LabelPair& labels, bool matched) {
  auto [it, inserted] = entries_.try_emplace(std::string(cert), Entry{labels, matched});
  if (inserted) return;
  auto& entry = it->second;
  if (label_rank(labels.label) > label_rank(entry.labels.label)) entry.labels = labels;
  entry.matched = entry.matched || matched;
}

void CertLabels::merge(const CertLabels& other) {
  for (const auto& [cert, entry] : other.entries_) add(cert, entry.labels, entry.matched);
}

const LabelPair* CertLabels::find(std::string_view cert) const {
  const auto it = entries_.find(std::string(cert));
  return it == entries_.end() ? nullptr : &it->second.labels;
}

bool CertLabels::matched(std::string_view cert) const {
  const auto it = entries_.find(std::string(cert));
  return it != entries_.end() && it->second.matched;
}

CertLabels collect_cert_labels(ZeekReader& ssl, const UidIndex& index) {
  // TSV headers are complete up front; JSON rows may omit unset keys, so the
  // columns are looked up again whenever the synthetic header grows.
  std::optional<ChainColumns> cols;
  if (ssl.format() == LogFormat::Tsv) cols = chain_columns(ssl.header());
  std::optional<CertLabels> certs;
  if (cols) certs.emplace(cols->key);
  std::size_t seen_fields = ssl.header().field_names.size();

  Record record;
  while (ssl.next(record)) {
    const auto& header = ssl.header();
    if (header.field_names.size() != seen_fields || !cols) {
      seen_fields = header.field_names.size();
      cols = find_chain_columns(header);
      if (cols && !certs) certs.emplace(cols->key);
    }
    if (!cols) continue;
    record.cells.resize(header.field_names.size(), header.unset_field);
    add_ssl_row(*certs, header, *cols, record.cells, index);
  }
  return certs ? std::move(*certs) : CertLabels{};
}

CertLabels collect_cert_labels(const ZeekLogTable& ssl, const UidIndex& index) {
  const auto cols = chain_columns(ssl.header);
  CertLabels certs(cols.key);
  for (const auto& record : ssl.records) add_ssl_row(certs, ssl.header, cols, record.cells, index);
  return certs;
}

std::vector<LabelPair> propagate_x509(const ZeekLogTable& x509, const ZeekLogTable& ssl,
                                      const UidIndex& index) {
  const auto certs = collect_cert_labels(ssl, index);
  const auto id_col = cert_id_column(x509.header, certs.key());
  if (!id_col) throw FormatError("x509.log has no certificate id field");
  std::vector<LabelPair> out;
  out.reserve(x509.records.size());
  for (const auto& record : x509.records) {
    const auto* labels = certs.find(record.cells[*id_col]);
    out.push_back(labels ? *labels : LabelPair::empty());
  }
  return out;
}

PropagationStats propagate_stream(ZeekReader& reader, ZeekWriter& writer, const UidIndex& index,
                                  const CertLabels* certs) {
  PropagationStats stats;
  stats.kind = classify_log(reader.header());
  if (stats.kind == LogKind::X509 && !certs) stats.kind = LogKind::Unlinked;

  std::optional<std::size_t> col = join_column(reader.header(), stats.kind, certs);
  if (reader.format() == LogFormat::Tsv && !col) {
    if (stats.kind == LogKind::Files) throw FormatError("files.log has no conn_uids field");
    if (stats.kind == LogKind::X509) throw FormatError("x509.log has no certificate id field");
  }
  std::size_t seen_fields = reader.header().field_names.size();
  const auto empty = LabelPair::empty();

  Record record;
  while (reader.next(record)) {
    const auto& header = reader.header();
    if (header.field_names.size() != seen_fields) {
      seen_fields = header.field_names.size();
      col = join_column(header, stats.kind, certs);
    }
    record.cells.resize(header.field_names.size(), header.unset_field);
    ++stats.rows;

    Resolved resolved{empty, false};
    if (col) {
      const auto& cell = record.cells[*col];
      switch (stats.kind) {
        case LogKind::Uid: resolved = resolve_uid(header, cell, index); break;
        case LogKind::Files: resolved = resolve_uid_set(header, cell, index); break;
        case LogKind::X509:
          if (const auto* labels = certs->find(cell)) resolved = {*labels, certs->matched(cell)};
          break;
        case LogKind::Unlinked: break;
      }
    }
    if (resolved.matched) ++stats.matched;
    writer.write(record, resolved.labels);
  }
  writer.finish(reader.trailer());
  return stats;
}

}  // namespace netlabel
