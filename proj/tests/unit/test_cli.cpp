#include <doctest.h>

#include "netlabel/cli.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>

using namespace netlabel;
using testing::fixture;
using testing::read_file;
using testing::TempDir;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "netlabel");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& haystack, std::string_view needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string pct(const nlohmann::json& v) {
  if (v.is_null()) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", v.get<double>() * 100.0);
  return buf;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("output naming and hashing") {
  CHECK(cli::labeled_name("conn.log") == "conn.labeled.log");
  CHECK(cli::labeled_name("/data/x/ssl.log") == "/data/x/ssl.labeled.log");
  CHECK(cli::labeled_name("conn.json.log") == "conn.json.labeled.log");
  CHECK(cli::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("label: port-scan rule over the 3-row log") {
  TempDir tmp;
  const auto output = tmp / "conn.labeled.log";
  const auto r = run({"label", "--config", fixture("configs/portscan.conf").string(),
                      fixture("basic/conn.log").string(), "--output", output.string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(contains(r.out, "rows: 3\n"));
  CHECK(contains(r.out, "labeled: 1 (33.3%)\n"));
  CHECK(contains(r.out, "  Malicious            1  33.3%\n"));
  CHECK(contains(r.out, "sha256 " + cli::sha256_hex(read_file(fixture("configs/portscan.conf")))));
  const auto lines = testing::split_lines(read_file(output));
  CHECK(lines[8].ends_with("\tMalicious\tFrom_malicious-To_benign-Discovery-Port_discovery-Linux"));
  CHECK(lines[9].ends_with("\t(empty)\t(empty)"));

  SUBCASE("identical inputs give identical outputs") {
    const auto second = tmp / "again.log";
    const auto r2 = run({"label", "--config", fixture("configs/portscan.conf").string(),
                         fixture("basic/conn.log").string(), "--output", second.string()});
    CHECK(read_file(second) == read_file(output));
    auto strip_output = [](std::string s) { return s.erase(s.find("output: "), s.find('\n', s.find("output: ")) - s.find("output: ")); };
    CHECK(strip_output(r2.out) == strip_output(r.out));
  }
}

TEST_CASE("label: default output name next to the input") {
  TempDir tmp;
  std::filesystem::copy_file(fixture("basic/conn.log"), tmp / "conn.log");
  const auto r = run({"label", "--config", fixture("configs/nmap.conf").string(), (tmp / "conn.log").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(std::filesystem::exists(tmp / "conn.labeled.log"));
  CHECK(read_file(tmp / "conn.log") == read_file(fixture("basic/conn.log")));
}

TEST_CASE("label: empty rules leave everything unlabeled") {
  TempDir tmp;
  const auto r = run({"label", "--config", fixture("configs/empty_rules.conf").string(),
                      fixture("basic/conn.log").string(), "--output", (tmp / "o.log").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(contains(r.out, "(empty): 3 (100.0%)\n"));
  CHECK(contains(r.out, "labeled: 0 (0.0%)\n"));
}

TEST_CASE("label: errors and exit codes") {
  TempDir tmp;
  SUBCASE("malformed config") {
    const auto r = run({"label", "--config", fixture("configs/malformed.conf").string(),
                        fixture("basic/conn.log").string(), "--output", (tmp / "o.log").string()});
    CHECK(r.code == cli::kExitUsageError);
    CHECK(contains(r.err, "malformed.conf: line 6: unknown column 'Protocol'"));
    CHECK_FALSE(std::filesystem::exists(tmp / "o.log"));
  }
  SUBCASE("output would overwrite the input") {
    const auto r = run({"label", "--config", fixture("configs/nmap.conf").string(),
                        fixture("basic/conn.log").string(), "--output", fixture("basic/conn.log").string()});
    CHECK(r.code == cli::kExitUsageError);
  }
  SUBCASE("missing input") {
    const auto r = run({"label", "--config", fixture("configs/nmap.conf").string(),
                        (tmp / "nope.log").string(), "--output", (tmp / "o.log").string()});
    CHECK(r.code == cli::kExitUsageError);
    CHECK(contains(r.err, "nope.log"));
  }
  SUBCASE("broken conn.log") {
    auto text = read_file(fixture("basic/conn.log"));
    text.insert(text.find("\n#close"), "\nonly\ttwo");
    testing::write_file(tmp / "bad.log", text);
    const auto r = run({"label", "--config", fixture("configs/nmap.conf").string(),
                        (tmp / "bad.log").string(), "--output", (tmp / "o.log").string()});
    CHECK(r.code == cli::kExitDataError);
    CHECK(contains(r.err, "line 12"));
  }
  SUBCASE("missing required option") {
    CHECK(run({"label", fixture("basic/conn.log").string()}).code == cli::kExitUsageError);
  }
}

TEST_CASE("propagate: fixture directory") {
  TempDir tmp;
  const auto labeled = tmp / "conn.labeled.log";
  REQUIRE(run({"label", "--config", fixture("configs/propagation.conf").string(),
               fixture("propagation/conn.log").string(), "--output", labeled.string()})
              .code == 0);
  const auto out_dir = tmp / "out";
  const auto r = run({"propagate", labeled.string(), fixture("propagation").string(), "--output", out_dir.string()});
  CHECK(r.code == cli::kExitOk);
  for (const char* name : {"conn", "dns", "files", "http", "ssl", "x509"}) {
    CHECK(std::filesystem::exists(out_dir / (std::string(name) + ".labeled.log")));
  }
  // alphabetical summary
  const auto conn = r.out.find("  conn.log [uid]");
  const auto dns = r.out.find("  dns.log [uid]");
  const auto files = r.out.find("  files.log [files] rows 7, matched 5, unmatched 2");
  const auto x509 = r.out.find("  x509.log [x509] rows 6, matched 4, unmatched 2");
  CHECK(conn < dns);
  CHECK(dns < files);
  CHECK(files < x509);
  CHECK(x509 != std::string::npos);
  CHECK(contains(r.out, "files: 6\n"));

  SUBCASE("runs are reproducible") {
    const auto again = tmp / "again";
    const auto r2 = run({"propagate", labeled.string(), fixture("propagation").string(), "--output", again.string()});
    for (const char* name : {"conn", "dns", "files", "http", "ssl", "x509"}) {
      const auto file = std::string(name) + ".labeled.log";
      CHECK(read_file(again / file) == read_file(out_dir / file));
    }
  }
}

TEST_CASE("propagate: uid-less log is passed through with a warning") {
  TempDir tmp;
  const auto logs = tmp / "logs";
  std::filesystem::create_directory(logs);
  std::filesystem::copy_file(fixture("propagation/dns.log"), logs / "dns.log");
  testing::write_file(logs / "known_hosts.log",
                      "#separator \\x09\n#set_separator\t,\n#empty_field\t(empty)\n#unset_field\t-\n"
                      "#path\tknown_hosts\n#open\t2023-01-24-08-00-00\n#fields\tts\thost\n#types\ttime\taddr\n"
                      "1674547200.000000\t192.168.1.100\n1674547300.000000\t192.168.1.20\n"
                      "#close\t2023-01-24-09-00-00\n");
  const auto labeled = tmp / "conn.labeled.log";
  REQUIRE(run({"label", "--config", fixture("configs/propagation.conf").string(),
               fixture("propagation/conn.log").string(), "--output", labeled.string()})
              .code == 0);
  const auto r = run({"propagate", labeled.string(), logs.string(), "--output", (tmp / "out").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(contains(r.err, "warning: known_hosts.log"));
  CHECK(contains(r.out, "known_hosts.log [unlinked] rows 2, matched 0, unmatched 2"));
  for (const auto& line : testing::split_lines(read_file(tmp / "out" / "known_hosts.labeled.log"))) {
    if (line[0] != '#') CHECK(line.ends_with("\t(empty)\t(empty)"));
  }
}

TEST_CASE("propagate: edge cases") {
  TempDir tmp;
  std::filesystem::create_directory(tmp / "empty");
  const auto labeled = tmp / "conn.labeled.log";
  REQUIRE(run({"label", "--config", fixture("configs/propagation.conf").string(),
               fixture("propagation/conn.log").string(), "--output", labeled.string()})
              .code == 0);
  SUBCASE("empty directory") {
    const auto r = run({"propagate", labeled.string(), (tmp / "empty").string(), "--output", (tmp / "out").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "files: 0\n"));
  }
  SUBCASE("conn.log without labels") {
    const auto r = run({"propagate", fixture("propagation/conn.log").string(), fixture("propagation").string(),
                        "--output", (tmp / "out").string()});
    CHECK(r.code == cli::kExitUsageError);
    CHECK(contains(r.err, "label"));
  }
  SUBCASE("output directory equal to the log directory") {
    const auto logs = tmp / "logs";
    std::filesystem::create_directory(logs);
    std::filesystem::copy_file(fixture("propagation/dns.log"), logs / "dns.log");
    const auto r = run({"propagate", labeled.string(), logs.string(), "--output", logs.string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(read_file(logs / "dns.log") == read_file(fixture("propagation/dns.log")));
    CHECK(std::filesystem::exists(logs / "dns.labeled.log"));
    // a second run ignores the labeled output it produced before
    const auto again = run({"propagate", labeled.string(), logs.string(), "--output", logs.string()});
    CHECK(again.code == cli::kExitOk);
    CHECK(contains(again.out, "files: 1\n"));
  }
}

TEST_CASE("eval: 15-flow scenario") {
  const auto conn = fixture("host_a/conn.labeled.log").string();
  const auto det = fixture("host_a/detections.jsonl").string();
  const auto r = run({"eval", conn, det});
  CHECK(r.code == cli::kExitOk);
  CHECK(contains(r.out, "  TP 3  FP 1  TN 9  FN 2\n"));
  CHECK(contains(r.out, "  FPR       10.0%\n"));
  CHECK(contains(r.out, "  TPR       60.0%\n"));
  CHECK(contains(r.out, "  Accuracy  80.0%\n"));
  CHECK(contains(r.out, "  F1        66.7%\n"));
  CHECK(contains(r.out, "  10.0.0.66: TP\n"));

  SUBCASE("JSON carries the same numbers") {
    const auto j = run({"eval", conn, det, "--json"});
    CHECK(j.code == cli::kExitOk);
    const auto doc = nlohmann::json::parse(j.out);
    for (const char* level : {"flow_level", "ip_level"}) {
      const auto& m = doc[level];
      const auto& c = m["counts"];
      const auto counts = "  TP " + std::to_string(c["tp"].get<int>()) + "  FP " + std::to_string(c["fp"].get<int>()) +
                          "  TN " + std::to_string(c["tn"].get<int>()) + "  FN " + std::to_string(c["fn"].get<int>());
      CHECK(contains(r.out, counts + "\n"));
      CHECK(contains(r.out, "  FPR       " + pct(m["fpr"]) + "\n"));
      CHECK(contains(r.out, "  TPR       " + pct(m["tpr"]) + "\n"));
      CHECK(contains(r.out, "  Accuracy  " + pct(m["accuracy"]) + "\n"));
      CHECK(contains(r.out, "  F1        " + pct(m["f1"]) + "\n"));
    }
    CHECK(doc["flow_level"]["fpr"].get<double>() == doctest::Approx(0.1));
    CHECK(doc["ip_level"]["fpr"].is_null());
    CHECK(doc["ip_level"]["timelines"][0]["windows"][0]["outcome"] == "TP");
  }
}

TEST_CASE("eval: other inputs") {
  TempDir tmp;
  const auto conn = fixture("host_a/conn.labeled.log").string();
  SUBCASE("empty detections") {
    testing::write_file(tmp / "none.jsonl", "");
    const auto r = run({"eval", conn, (tmp / "none.jsonl").string()});
    CHECK(r.code == cli::kExitOk);
    CHECK(contains(r.out, "  TP 0  FP 0  TN 10  FN 5\n"));
    CHECK(contains(r.out, "  10.0.0.66: FN\n"));
  }
  SUBCASE("unknown evidence uid") {
    testing::write_file(tmp / "bad.jsonl", "{\"ip\":\"10.0.0.66\",\"time\":1674548200,\"evidence\":[\"CHostA02\",\"Cghost\"]}\n");
    const auto r = run({"eval", conn, (tmp / "bad.jsonl").string()});
    CHECK(r.code == cli::kExitDataError);
    CHECK(contains(r.err, "Cghost"));
  }
  SUBCASE("narrative timeline") {
    const auto r = run({"eval", fixture("timeline/conn.labeled.log").string(),
                        fixture("timeline/detections.jsonl").string(), "--window", "3600"});
    CHECK(contains(r.out, "  203.0.113.7: TP TN TP\n"));
  }
  SUBCASE("cutoff") {
    const auto r = run({"eval", conn, fixture("host_a/detections.jsonl").string(), "--cutoff", "1674547560", "--json"});
    CHECK(r.code == cli::kExitOk);
    CHECK(nlohmann::json::parse(r.out)["flows"] == 6);
  }
  SUBCASE("bad window") {
    CHECK(run({"eval", conn, fixture("host_a/detections.jsonl").string(), "--window", "0"}).code == cli::kExitUsageError);
  }
  SUBCASE("unlabeled conn.log") {
    CHECK(run({"eval", fixture("basic/conn.log").string(), fixture("host_a/detections.jsonl").string()}).code ==
          cli::kExitUsageError);
  }
}

TEST_CASE("validate-config and show-ontology") {
  const auto ok = run({"validate-config", "--config", fixture("configs/dos.conf").string()});
  CHECK(ok.code == cli::kExitOk);
  CHECK(contains(ok.out, "ok, 1 rules, 3 condition lines"));
  const auto bad = run({"validate-config", "--config", fixture("configs/malformed.conf").string()});
  CHECK(bad.code == cli::kExitUsageError);
  CHECK(contains(bad.err, "line 6"));

  const auto builtin = run({"show-ontology"});
  CHECK(builtin.code == cli::kExitOk);
  CHECK(contains(builtin.out, "From_malicious"));
  CHECK_FALSE(contains(builtin.out, "Port_discovery"));
  const auto extended = run({"show-ontology", "--config", fixture("configs/portscan.conf").string()});
  CHECK(contains(extended.out, "Port_discovery"));
}

TEST_CASE("argument handling") {
  CHECK(run({}).code == cli::kExitUsageError);
  CHECK(run({"frobnicate"}).code == cli::kExitUsageError);
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"eval", "a", "b", "--window", "soon"}).code == cli::kExitUsageError);
}

}  // TEST_SUITE
