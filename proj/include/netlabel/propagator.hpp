#pragma once

#include "netlabel/labeler.hpp"
#include "netlabel/ontology.hpp"
#include "netlabel/zeek_io.hpp"

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace netlabel {

// How a dependent log reaches conn.log labels.
enum class LogKind {
  Uid,       // has a uid field: direct join
  Files,     // files.log with conn_uids, no uid
  X509,      // x509.log: via ssl.log certificate chains
  Unlinked,  // no known link: passed through with "(empty)"
};

LogKind classify_log(const ZeekHeader& header);
std::string_view log_kind_name(LogKind kind) noexcept;

// Precedence used when one row has several parent flows:
// Malicious > Unknown > Benign > anything else ("(empty)").
int label_rank(std::string_view label) noexcept;

// Highest-ranked candidate, first occurrence on ties; "(empty)" pair for an
// empty list.
LabelPair merge_labels(std::span<const LabelPair> candidates);

// Row-by-row labels for a log with a uid field. Throws UsageError for logs
// without one; those go through propagate_files_log or propagate_x509.
std::vector<LabelPair> propagate_log(const ZeekLogTable& table, const UidIndex& index);

struct FilesPropagation {
  std::vector<LabelPair> rows;
  std::unordered_map<std::string, LabelPair> by_fuid;
};

// Throws FormatError when the table has no conn_uids field.
FilesPropagation propagate_files_log(const ZeekLogTable& files, const UidIndex& index);

// Labels of certificates, keyed by file id (or fingerprint for logs that use
// cert_chain_fps), merged over every ssl row whose chain references them.
class CertLabels {
 public:
  enum class Key { FileId, Fingerprint };

  CertLabels() = default;
  explicit CertLabels(Key key) : key_(key) {}

  void add(std::string_view cert, const LabelPair& labels, bool matched);
  // Folds in certificates collected from another ssl log; ties keep ours.
  void merge(const CertLabels& other);
  const LabelPair* find(std::string_view cert) const;
  bool matched(std::string_view cert) const;
  Key key() const noexcept { return key_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  struct Entry {
    LabelPair labels;
    bool matched = false;
  };
  Key key_ = Key::FileId;
  std::unordered_map<std::string, Entry> entries_;
};

// Throws FormatError when ssl.log lacks cert_chain_fuids (and cert_chain_fps).
CertLabels collect_cert_labels(ZeekReader& ssl, const UidIndex& index);
CertLabels collect_cert_labels(const ZeekLogTable& ssl, const UidIndex& index);

std::vector<LabelPair> propagate_x509(const ZeekLogTable& x509, const ZeekLogTable& ssl,
                                      const UidIndex& index);

struct PropagationStats {
  LogKind kind = LogKind::Unlinked;
  std::size_t rows = 0;
  std::size_t matched = 0;  // rows that resolved to at least one indexed flow
};

// Streams any dependent log through the join matching its kind. `certs` is
// required for x509 logs; when it is null they are passed through. Finishes
// the writer.
PropagationStats propagate_stream(ZeekReader& reader, ZeekWriter& writer, const UidIndex& index,
                                  const CertLabels* certs);

}  // namespace netlabel
