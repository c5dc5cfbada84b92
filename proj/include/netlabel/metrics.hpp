#pragma once

#include "netlabel/ip_address.hpp"
#include "netlabel/zeek_io.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace netlabel {

// Binary ground truth of a labeled flow. Unknown flows are kept out of the
// confusion matrix; unlabeled ("(empty)") flows count as negatives.
enum class GroundTruth { Malicious, Benign, Unknown, Unlabeled };

GroundTruth ground_truth_of(std::string_view label) noexcept;

struct LabeledFlow {
  std::string uid;
  double start = 0.0;
  std::optional<IpAddress> src_ip;
  std::optional<IpAddress> dst_ip;
  std::string label;
  std::string detailed;
};

// Reads uid, ts, endpoints and the two label columns from a labeled conn.log.
// Throws UsageError if the label columns are missing.
std::vector<LabeledFlow> load_labeled_flows(ZeekReader& reader);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct FlowConfusion {
  ConfusionCounts counts;
  std::size_t unknown_excluded = 0;     // Unknown flows left out of counts
  std::size_t unlabeled_negatives = 0;  // "(empty)" flows counted as negatives
};

// tp/fp/fn/tn of a detector's evidence set against flow labels, counting only
// flows with start <= cutoff. Throws UsageError listing evidence uids that
// are not among `flows`.
FlowConfusion flow_confusion(std::span<const LabeledFlow> flows,
                             const std::unordered_set<std::string>& evidence,
                             std::optional<double> cutoff = std::nullopt);

// Ratios in [0, 1]; nullopt where the denominator is zero.
struct MetricsReport {
  std::optional<double> fpr;
  std::optional<double> tpr;
  std::optional<double> accuracy;
  std::optional<double> f1;
  ConfusionCounts counts;
};

MetricsReport compute_metrics(const ConfusionCounts& counts);

struct DetectionRecord {
  IpAddress ip;
  double time = 0.0;
  std::vector<std::string> evidence;  // flow uids
};

// One JSON object per line: {"ip": "...", "time": <epoch>, "evidence": [uid, ...]}.
std::vector<DetectionRecord> read_detections(std::istream& in);

// Throws UsageError when evidence cites unknown uids or flows that start
// after the detection.
void validate_detections(std::span<const LabeledFlow> flows,
                         std::span<const DetectionRecord> detections);

enum class Outcome { TruePositive, FalsePositive, TrueNegative, FalseNegative };

std::string_view outcome_name(Outcome outcome) noexcept;  // "TP", "FP", ...

struct WindowStatus {
  std::int64_t window = 0;  // floor(time / window_seconds)
  bool actual = false;      // some malicious flow from the IP in the window
  bool predicted = false;   // the IP counts as detected in the window
  Outcome outcome = Outcome::TrueNegative;
};

struct IpTimeline {
  IpAddress ip;
  std::vector<WindowStatus> windows;
};

struct TimelineReport {
  double window_seconds = 0.0;
  std::int64_t first_window = 0;
  std::int64_t last_window = -1;
  std::vector<IpTimeline> ips;  // sorted by address
  ConfusionCounts counts;
};

// Per-IP detect/undetect evaluation over epoch-aligned tumbling windows.
//
// Every source IP of a flow and every detected IP is evaluated over the
// whole span of windows touched by flows or detections. A window is actual
// positive when the IP originates at least one Malicious flow in it. A
// detection with at least `threshold` evidence flows marks the IP as
// detected in its own window; the mark carries into each following window
// for as long as the IP keeps sending malicious flows, and the first window
// without malicious activity undetects it.
//
// Throws UsageError if window_seconds is not positive.
TimelineReport ip_detection_timeline(std::span<const LabeledFlow> flows,
                                     std::span<const DetectionRecord> detections,
                                     double window_seconds, std::size_t threshold = 1);

}  // namespace netlabel
