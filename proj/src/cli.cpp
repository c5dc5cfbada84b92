#include "netlabel/cli.hpp"

#include "netlabel/error.hpp"
#include "netlabel/labeler.hpp"
#include "netlabel/metrics.hpp"
#include "netlabel/propagator.hpp"
#include "netlabel/rule_dsl.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

namespace netlabel::cli {

namespace {

using nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

bool same_file(const fs::path& a, const fs::path& b) {
  std::error_code ec;
  if (fs::exists(a, ec) && fs::exists(b, ec)) return fs::equivalent(a, b, ec);
  return fs::weakly_canonical(a, ec) == fs::weakly_canonical(b, ec);
}

std::string percent(std::optional<double> ratio) {
  if (!ratio) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", *ratio * 100.0);
  return buf;
}

std::string percent_of(std::size_t part, std::size_t whole) {
  return percent(whole ? std::optional<double>(static_cast<double>(part) / whole) : std::nullopt);
}

ordered_json ratio_json(std::optional<double> ratio) {
  return ratio ? ordered_json(*ratio) : ordered_json(nullptr);
}

ordered_json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

ordered_json metrics_json(const MetricsReport& m) {
  return {{"counts", counts_json(m.counts)},
          {"fpr", ratio_json(m.fpr)},
          {"tpr", ratio_json(m.tpr)},
          {"accuracy", ratio_json(m.accuracy)},
          {"f1", ratio_json(m.f1)}};
}

void print_metrics(std::ostream& out, const MetricsReport& m) {
  const auto& c = m.counts;
  out << "  TP " << c.tp << "  FP " << c.fp << "  TN " << c.tn << "  FN " << c.fn << '\n';
  out << "  FPR       " << percent(m.fpr) << '\n';
  out << "  TPR       " << percent(m.tpr) << '\n';
  out << "  Accuracy  " << percent(m.accuracy) << '\n';
  out << "  F1        " << percent(m.f1) << '\n';
}

// Maps the library's exceptions onto exit codes, prefixing messages with the
// file being processed.
template <class F>
int guarded(std::ostream& err, const fs::path& context, F&& body) {
  auto report = [&](const std::exception& e) {
    err << "error: ";
    if (!context.empty()) err << context.string() << ": ";
    err << e.what() << '\n';
  };
  try {
    return body();
  } catch (const ConfigError& e) {
    report(e);
    return kExitUsageError;
  } catch (const UsageError& e) {
    report(e);
    return kExitUsageError;
  } catch (const std::exception& e) {
    report(e);
    return kExitDataError;
  }
}

LabelConfig load_config_file(const fs::path& path) { return load_config(read_file(path)); }

struct LogFileResult {
  fs::path input;
  fs::path output;
  PropagationStats stats;
  std::string error;
  bool skipped = false;
  std::string note;
};

}  // namespace

fs::path labeled_name(const fs::path& input) {
  const auto stem = input.stem().string();
  const auto ext = input.extension().string();
  if (ext.empty()) return input.parent_path() / (input.filename().string() + ".labeled");
  return input.parent_path() / (stem + ".labeled" + ext);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  std::string hex;
  static constexpr char kDigits[] = "0123456789abcdef";
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 0xf]);
  }
  return hex;
}

int cmd_label(const fs::path& config, const fs::path& conn, const std::optional<fs::path>& output,
              std::ostream& out, std::ostream& err) {
  fs::path context = config;
  return guarded(err, context, [&] {
    const auto config_text = read_file(config);
    const auto cfg = load_config(config_text);

    const fs::path target = output.value_or(labeled_name(conn));
    if (same_file(target, conn) || same_file(target, config)) {
      throw UsageError("output " + target.string() + " would overwrite an input");
    }
    context = conn;
    auto in = open_input(conn);
    ZeekReader reader(in);
    auto sink = open_output(target);
    ZeekWriter writer(sink, reader.header(), reader.format());
    const auto summary = label_conn_stream(reader, writer, cfg.rules);
    if (!sink) throw Error("write failed: " + target.string());

    const std::size_t empty_rows = summary.rows - summary.labeled;
    out << "config: " << config.string() << " (sha256 " << sha256_hex(config_text) << ")\n";
    out << "rules: " << cfg.rules.rules.size() << '\n';
    out << "input: " << conn.string() << '\n';
    out << "output: " << target.string() << '\n';
    out << "rows: " << summary.rows << '\n';
    out << "labeled: " << summary.labeled << " (" << percent_of(summary.labeled, summary.rows) << ")\n";
    out << kEmptyLabel << ": " << empty_rows << " (" << percent_of(empty_rows, summary.rows) << ")\n";
    out << "labels:\n";
    for (const auto& [label, n] : summary.histogram) {
      out << "  " << std::left << std::setw(12) << label << std::right << std::setw(10) << n << "  "
          << percent_of(n, summary.rows) << '\n';
    }
    return kExitOk;
  });
}

int cmd_propagate(const fs::path& labeled_conn, const fs::path& log_dir, const fs::path& output_dir,
                  std::ostream& out, std::ostream& err) {
  fs::path context = labeled_conn;
  return guarded(err, context, [&]() -> int {
    if (!fs::is_directory(log_dir)) throw UsageError("not a directory: " + log_dir.string());

    IndexBuild build;
    {
      auto in = open_input(labeled_conn);
      ZeekReader reader(in);
      build = load_uid_index(reader);
    }
    for (const auto& w : build.warnings) err << "warning: " << labeled_conn.string() << ": " << w << '\n';
    if (build.unset_uids + build.duplicate_uids > build.warnings.size()) {
      err << "warning: " << labeled_conn.string() << ": " << build.unset_uids << " unset and "
          << build.duplicate_uids << " duplicate uids in total\n";
    }
    context.clear();

    std::vector<fs::path> inputs;
    for (const auto& entry : fs::directory_iterator(log_dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".log") continue;
      if (entry.path().filename().string().find(".labeled.") != std::string::npos) continue;
      if (same_file(entry.path(), labeled_conn)) continue;
      inputs.push_back(entry.path());
    }
    std::sort(inputs.begin(), inputs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    fs::create_directories(output_dir);
    std::vector<LogFileResult> results(inputs.size());
    std::vector<fs::path> ssl_logs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto& r = results[i];
      r.input = inputs[i];
      r.output = output_dir / labeled_name(inputs[i].filename());
      if (same_file(r.output, labeled_conn) || same_file(r.output, r.input)) {
        r.skipped = true;
        r.note = "output would overwrite an input";
        continue;
      }
      try {
        auto in = open_input(r.input);
        ZeekReader reader(in);
        const auto& header = reader.header();
        if (header.field_index(kLabelField) && header.field_index(kDetailedLabelField)) {
          r.skipped = true;
          r.note = "already labeled";
        } else if (header.path == "ssl" || r.input.stem().string().starts_with("ssl") ||
                   header.field_index("cert_chain_fuids") || header.field_index("cert_chain_fps")) {
          ssl_logs.push_back(r.input);
        }
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }

    // x509 rows resolve through ssl.log, so certificates are collected first.
    std::optional<CertLabels> certs;
    std::string cert_error;
    for (const auto& ssl : ssl_logs) {
      try {
        auto in = open_input(ssl);
        ZeekReader reader(in);
        auto part = collect_cert_labels(reader, build.index);
        // Rotated ssl logs are merged in file-name order.
        if (certs) {
          certs->merge(part);
        } else {
          certs = std::move(part);
        }
      } catch (const std::exception& e) {
        cert_error = ssl.filename().string() + ": " + e.what();
      }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < results.size(); i = next++) {
        auto& r = results[i];
        if (r.skipped || !r.error.empty()) continue;
        try {
          auto in = open_input(r.input);
          ZeekReader reader(in);
          auto sink = open_output(r.output);
          ZeekWriter writer(sink, reader.header(), reader.format());
          r.stats = propagate_stream(reader, writer, build.index, certs ? &*certs : nullptr);
          if (!sink) throw Error("write failed: " + r.output.string());
        } catch (const std::exception& e) {
          r.error = e.what();
          std::error_code ec;
          fs::remove(r.output, ec);
        }
      }
    };
    const auto n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < std::min(n_threads, results.size()); ++t) pool.emplace_back(worker);
    }

    if (!cert_error.empty()) err << "warning: " << cert_error << '\n';
    int status = kExitOk;
    std::size_t written = 0;
    out << "index: " << build.index.size() << " uids from " << labeled_conn.string() << '\n';
    for (const auto& r : results) {
      const auto name = r.input.filename().string();
      if (!r.error.empty()) {
        err << "error: " << name << ": " << r.error << '\n';
        status = kExitDataError;
        continue;
      }
      if (r.skipped) {
        out << "  " << name << ": skipped (" << r.note << ")\n";
        continue;
      }
      ++written;
      if (r.stats.kind == LogKind::Unlinked) {
        err << "warning: " << name << ": no uid or known link to conn.log; labeled " << kEmptyLabel << '\n';
      }
      out << "  " << name << " [" << log_kind_name(r.stats.kind) << "] rows " << r.stats.rows
          << ", matched " << r.stats.matched << ", unmatched " << r.stats.rows - r.stats.matched
          << " -> " << r.output.string() << '\n';
    }
    out << "files: " << written << '\n';
    return status;
  });
}

int cmd_eval(const fs::path& labeled_conn, const fs::path& detections_path,
             const EvalOptions& options, std::ostream& out, std::ostream& err) {
  fs::path context = labeled_conn;
  return guarded(err, context, [&]() -> int {
    if (!(options.window > 0.0)) throw UsageError("--window must be positive");

    std::vector<LabeledFlow> flows;
    {
      auto in = open_input(labeled_conn);
      ZeekReader reader(in);
      flows = load_labeled_flows(reader);
    }
    context = detections_path;
    std::vector<DetectionRecord> detections;
    {
      auto in = open_input(detections_path);
      detections = read_detections(in);
    }
    try {
      validate_detections(flows, detections);
    } catch (const UsageError& e) {
      err << "error: " << detections_path.string() << ": " << e.what() << '\n';
      return kExitDataError;
    }
    context.clear();

    if (options.cutoff) {
      std::erase_if(flows, [&](const LabeledFlow& f) { return f.start > *options.cutoff; });
      std::erase_if(detections, [&](const DetectionRecord& d) { return d.time > *options.cutoff; });
    }
    std::unordered_set<std::string> evidence;
    for (const auto& d : detections) evidence.insert(d.evidence.begin(), d.evidence.end());

    const auto confusion = flow_confusion(flows, evidence, options.cutoff);
    const auto flow_metrics = compute_metrics(confusion.counts);
    const auto timeline = ip_detection_timeline(flows, detections, options.window, options.threshold);
    const auto ip_metrics = compute_metrics(timeline.counts);

    // Only IPs with some positive window are listed.
    auto interesting = [](const IpTimeline& t) {
      return std::any_of(t.windows.begin(), t.windows.end(),
                         [](const WindowStatus& w) { return w.actual || w.predicted; });
    };

    if (options.json) {
      ordered_json doc;
      doc["flows"] = flows.size();
      doc["detections"] = detections.size();
      doc["cutoff"] = options.cutoff ? ordered_json(*options.cutoff) : ordered_json(nullptr);
      auto flow_doc = metrics_json(flow_metrics);
      flow_doc["unknown_excluded"] = confusion.unknown_excluded;
      flow_doc["unlabeled_negatives"] = confusion.unlabeled_negatives;
      doc["flow_level"] = std::move(flow_doc);
      auto ip_doc = metrics_json(ip_metrics);
      ip_doc["window_seconds"] = options.window;
      ip_doc["threshold"] = options.threshold;
      ip_doc["ips"] = timeline.ips.size();
      auto timelines = ordered_json::array();
      for (const auto& t : timeline.ips) {
        if (!interesting(t)) continue;
        auto windows = ordered_json::array();
        for (const auto& w : t.windows) {
          windows.push_back({{"start", static_cast<double>(w.window) * options.window},
                             {"actual", w.actual},
                             {"predicted", w.predicted},
                             {"outcome", outcome_name(w.outcome)}});
        }
        timelines.push_back({{"ip", t.ip.to_string()}, {"windows", std::move(windows)}});
      }
      ip_doc["timelines"] = std::move(timelines);
      doc["ip_level"] = std::move(ip_doc);
      out << doc.dump(2) << '\n';
      return kExitOk;
    }

    out << "Flow level: " << flows.size() << " flows, " << detections.size() << " detections";
    if (options.cutoff) out << ", cutoff " << std::fixed << std::setprecision(6) << *options.cutoff << std::defaultfloat;
    out << '\n';
    print_metrics(out, flow_metrics);
    out << "  Unknown excluded: " << confusion.unknown_excluded
        << ", unlabeled counted as negative: " << confusion.unlabeled_negatives << '\n';
    out << "IP level: window " << options.window << " s, threshold " << options.threshold << ", "
        << timeline.ips.size() << " IPs\n";
    print_metrics(out, ip_metrics);
    for (const auto& t : timeline.ips) {
      if (!interesting(t)) continue;
      out << "  " << t.ip.to_string() << ':';
      for (const auto& w : t.windows) out << ' ' << outcome_name(w.outcome);
      out << '\n';
    }
    return kExitOk;
  });
}

int cmd_validate_config(const fs::path& config, std::ostream& out, std::ostream& err) {
  return guarded(err, config, [&] {
    const auto text = read_file(config);
    const auto cfg = load_config(text);
    std::size_t groups = 0;
    for (const auto& rule : cfg.rules.rules) groups += rule.groups.size();
    out << config.string() << ": ok, " << cfg.rules.rules.size() << " rules, " << groups
        << " condition lines (sha256 " << sha256_hex(text) << ")\n";
    return kExitOk;
  });
}

int cmd_show_ontology(const std::optional<fs::path>& config, std::ostream& out, std::ostream& err) {
  return guarded(err, config.value_or(fs::path{}), [&] {
    const auto ontology = config ? load_config_file(*config).ontology : OntologySpec::builtin();
    for (const auto& level : ontology.levels()) {
      out << level.name << (level.mandatory ? " (mandatory" : " (optional")
          << (level.extensible ? ", extensible)" : ", closed)") << ':';
      for (const auto& item : level.items) out << ' ' << item;
      out << '\n';
    }
    return kExitOk;
  });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ground-truth labeling for Zeek logs"};
  app.name("netlabel");
  app.require_subcommand(1);

  std::string config, conn, output, log_dir, detections;
  EvalOptions eval;

  auto* label = app.add_subcommand("label", "Label a conn.log with a rule configuration");
  label->add_option("--config", config, "Rule configuration file")->required();
  label->add_option("conn", conn, "conn.log to label")->required();
  label->add_option("--output", output, "Output path (default: <name>.labeled.log)");

  auto* propagate = app.add_subcommand("propagate", "Copy conn.log labels to the other Zeek logs");
  propagate->add_option("labeled_conn", conn, "Labeled conn.log")->required();
  propagate->add_option("log_dir", log_dir, "Directory with the Zeek logs")->required();
  propagate->add_option("--output", output, "Output directory")->required();

  auto* evaluate = app.add_subcommand("eval", "Evaluate detections against labeled flows");
  evaluate->add_option("labeled_conn", conn, "Labeled conn.log")->required();
  evaluate->add_option("detections", detections, "Detections, JSON lines")->required();
  evaluate->add_option("--window", eval.window, "IP-level window in seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  evaluate->add_option("--threshold", eval.threshold, "Minimum evidence flows per detection")
      ->capture_default_str();
  std::optional<double> cutoff;
  evaluate->add_option("--cutoff", cutoff, "Ignore flows and detections after this epoch time");
  evaluate->add_flag("--json", eval.json, "Machine-readable output");

  auto* validate = app.add_subcommand("validate-config", "Check a rule configuration");
  validate->add_option("--config", config, "Rule configuration file")->required();

  auto* show = app.add_subcommand("show-ontology", "Print the label ontology");
  show->add_option("--config", config, "Rule configuration file (default: built-in ontology)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsageError;
  }

  if (*label) {
    return cmd_label(config, conn, output.empty() ? std::nullopt : std::optional<fs::path>(output), out, err);
  }
  if (*propagate) return cmd_propagate(conn, log_dir, output, out, err);
  if (*evaluate) {
    eval.cutoff = cutoff;
    return cmd_eval(conn, detections, eval, out, err);
  }
  if (*validate) return cmd_validate_config(config, out, err);
  if (*show) {
    return cmd_show_ontology(config.empty() ? std::nullopt : std::optional<fs::path>(config), out, err);
  }
  return kExitUsageError;
}

}  // namespace netlabel::cli
