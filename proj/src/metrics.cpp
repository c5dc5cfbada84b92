#include "netlabel/metrics.hpp"

#include "netlabel/error.hpp"
#include "netlabel/text.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <set>
#include <unordered_map>

namespace netlabel {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::int64_t window_of(double t, double width) {
  return static_cast<std::int64_t>(std::floor(t / width));
}

std::string join_limited(const std::vector<std::string>& items, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < items.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  if (items.size() > limit) out += ", ... (" + std::to_string(items.size()) + " total)";
  return out;
}

Outcome outcome_of(bool actual, bool predicted) {
  if (actual) return predicted ? Outcome::TruePositive : Outcome::FalseNegative;
  return predicted ? Outcome::FalsePositive : Outcome::TrueNegative;
}

void count(ConfusionCounts& counts, Outcome outcome) {
  switch (outcome) {
    case Outcome::TruePositive: ++counts.tp; break;
    case Outcome::FalsePositive: ++counts.fp; break;
    case Outcome::TrueNegative: ++counts.tn; break;
    case Outcome::FalseNegative: ++counts.fn; break;
  }
}

}  // namespace

GroundTruth ground_truth_of(std::string_view label) noexcept {
  if (label == "Malicious") return GroundTruth::Malicious;
  if (label == "Benign") return GroundTruth::Benign;
  if (label == "Unknown") return GroundTruth::Unknown;
  return GroundTruth::Unlabeled;
}

std::vector<LabeledFlow> load_labeled_flows(ZeekReader& reader) {
  std::vector<LabeledFlow> flows;
  Record record;
  std::size_t seen_fields = 0;
  std::optional<std::size_t> uid, ts, orig_h, resp_h, label, detailed;
  auto resolve = [&](const ZeekHeader& header) {
    uid = header.field_index("uid");
    ts = header.field_index("ts");
    orig_h = header.field_index("id.orig_h");
    resp_h = header.field_index("id.resp_h");
    label = header.field_index(kLabelField);
    detailed = header.field_index(kDetailedLabelField);
    seen_fields = header.field_names.size();
  };
  auto require = [&] {
    if (!uid || !ts) throw FormatError("labeled conn.log needs uid and ts fields");
    if (!label || !detailed) {
      throw UsageError("conn.log has no label/detailed_label columns; run 'label' first");
    }
  };
  if (reader.format() == LogFormat::Tsv) {
    resolve(reader.header());
    require();
  }

  while (reader.next(record)) {
    const auto& header = reader.header();
    if (header.field_names.size() != seen_fields) {
      resolve(header);
      require();
    }
    record.cells.resize(header.field_names.size(), header.unset_field);
    const auto start = parse_zeek_time(record.cells[*ts]);
    if (!start) {
      throw FormatError("row " + std::to_string(reader.records_read()) + ": invalid ts '" +
                        record.cells[*ts] + "'");
    }
    LabeledFlow flow;
    flow.uid = record.cells[*uid];
    flow.start = *start;
    if (orig_h) flow.src_ip = IpAddress::parse(record.cells[*orig_h]);
    if (resp_h) flow.dst_ip = IpAddress::parse(record.cells[*resp_h]);
    flow.label = record.cells[*label];
    flow.detailed = record.cells[*detailed];
    flows.push_back(std::move(flow));
  }
  return flows;
}

FlowConfusion flow_confusion(std::span<const LabeledFlow> flows,
                             const std::unordered_set<std::string>& evidence,
                             std::optional<double> cutoff) {
  std::unordered_set<std::string_view> known;
  known.reserve(flows.size());
  for (const auto& flow : flows) known.insert(flow.uid);
  std::vector<std::string> missing;
  for (const auto& uid : evidence) {
    if (!known.contains(uid)) missing.push_back(uid);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    throw UsageError("evidence references unknown flow uids: " + join_limited(missing, 10));
  }

  FlowConfusion result;
  for (const auto& flow : flows) {
    if (cutoff && flow.start > *cutoff) continue;
    const bool used = evidence.contains(flow.uid);
    switch (ground_truth_of(flow.label)) {
      case GroundTruth::Unknown: ++result.unknown_excluded; continue;
      case GroundTruth::Malicious: used ? ++result.counts.tp : ++result.counts.fn; break;
      case GroundTruth::Unlabeled: ++result.unlabeled_negatives; [[fallthrough]];
      case GroundTruth::Benign: used ? ++result.counts.fp : ++result.counts.tn; break;
    }
  }
  return result;
}

MetricsReport compute_metrics(const ConfusionCounts& c) {
  MetricsReport report;
  report.counts = c;
  report.fpr = ratio(c.fp, c.fp + c.tn);
  report.tpr = ratio(c.tp, c.tp + c.fn);
  report.accuracy = ratio(c.tp + c.tn, c.total());
  report.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return report;
}

std::vector<DetectionRecord> read_detections(std::istream& in) {
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) throw FormatError("invalid JSON object", line_no);
    if (!obj.contains("ip") || !obj["ip"].is_string()) {
      throw FormatError("detection needs a string 'ip'", line_no);
    }
    if (!obj.contains("time") || !obj["time"].is_number()) {
      throw FormatError("detection needs a numeric 'time'", line_no);
    }
    const auto ip = IpAddress::parse(obj["ip"].get<std::string>());
    if (!ip) throw FormatError("invalid ip '" + obj["ip"].get<std::string>() + "'", line_no);

    DetectionRecord record{*ip, obj["time"].get<double>(), {}};
    if (obj.contains("evidence")) {
      if (!obj["evidence"].is_array()) throw FormatError("'evidence' must be an array", line_no);
      for (const auto& uid : obj["evidence"]) {
        if (!uid.is_string()) throw FormatError("evidence entries must be uid strings", line_no);
        record.evidence.push_back(uid.get<std::string>());
      }
    }
    out.push_back(std::move(record));
  }
  return out;
}

void validate_detections(std::span<const LabeledFlow> flows,
                         std::span<const DetectionRecord> detections) {
  std::unordered_map<std::string_view, double> start_of;
  start_of.reserve(flows.size());
  for (const auto& flow : flows) start_of.emplace(flow.uid, flow.start);

  std::set<std::string> unknown;
  std::vector<std::string> late;
  for (const auto& d : detections) {
    for (const auto& uid : d.evidence) {
      const auto it = start_of.find(uid);
      if (it == start_of.end()) {
        unknown.insert(uid);
      } else if (it->second > d.time) {
        late.push_back(uid + " (detection of " + d.ip.to_string() + ")");
      }
    }
  }
  if (!unknown.empty()) {
    throw UsageError("evidence references unknown flow uids: " +
                     join_limited({unknown.begin(), unknown.end()}, 10));
  }
  if (!late.empty()) {
    throw UsageError("evidence flows start after their detection time: " + join_limited(late, 10));
  }
}

std::string_view outcome_name(Outcome outcome) noexcept {
  switch (outcome) {
    case Outcome::TruePositive: return "TP";
    case Outcome::FalsePositive: return "FP";
    case Outcome::TrueNegative: return "TN";
    case Outcome::FalseNegative: return "FN";
  }
  return "?";
}

TimelineReport ip_detection_timeline(std::span<const LabeledFlow> flows,
                                     std::span<const DetectionRecord> detections,
                                     double window_seconds, std::size_t threshold) {
  if (!(window_seconds > 0.0) || !std::isfinite(window_seconds)) {
    throw UsageError("window must be a positive number of seconds");
  }

  struct PerIp {
    std::set<std::int64_t> malicious;
    std::set<std::int64_t> detected;
  };
  std::map<IpAddress, PerIp> per_ip;
  TimelineReport report;
  report.window_seconds = window_seconds;
  std::optional<std::int64_t> lo, hi;
  auto touch = [&](std::int64_t w) {
    lo = lo ? std::min(*lo, w) : w;
    hi = hi ? std::max(*hi, w) : w;
  };

  for (const auto& flow : flows) {
    const auto w = window_of(flow.start, window_seconds);
    touch(w);
    if (!flow.src_ip) continue;
    auto& entry = per_ip[*flow.src_ip];
    if (ground_truth_of(flow.label) == GroundTruth::Malicious) entry.malicious.insert(w);
  }
  for (const auto& d : detections) {
    const auto w = window_of(d.time, window_seconds);
    touch(w);
    auto& entry = per_ip[d.ip];
    if (d.evidence.size() >= threshold) entry.detected.insert(w);
  }
  if (!lo) return report;
  report.first_window = *lo;
  report.last_window = *hi;

  for (const auto& [ip, entry] : per_ip) {
    IpTimeline timeline{ip, {}};
    timeline.windows.reserve(static_cast<std::size_t>(*hi - *lo + 1));
    bool detected = false;
    for (auto w = *lo; w <= *hi; ++w) {
      const bool actual = entry.malicious.contains(w);
      detected = entry.detected.contains(w) || (detected && actual);
      const auto outcome = outcome_of(actual, detected);
      count(report.counts, outcome);
      timeline.windows.push_back({w, actual, detected, outcome});
    }
    report.ips.push_back(std::move(timeline));
  }
  return report;
}

}  // namespace netlabel
