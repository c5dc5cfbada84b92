#include <doctest.h>

#include "netlabel/error.hpp"
#include "netlabel/labeler.hpp"
#include "netlabel/rule_dsl.hpp"
#include "netlabel/zeek_io.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

using namespace netlabel;
using testing::fixture;
using testing::read_file;

namespace {

ZeekLogTable load(std::string_view relative) {
  std::istringstream in(read_file(fixture(relative)));
  return read_log(in);
}

ZeekLogTable parse(const std::string& text) {
  std::istringstream in(text);
  return read_log(in);
}

std::string written(const ZeekLogTable& table, const std::vector<LabelPair>& labels) {
  std::ostringstream out;
  write_log(table, labels, out);
  return out.str();
}

std::vector<LabelPair> empties(std::size_t n) { return std::vector<LabelPair>(n, LabelPair::empty()); }

std::size_t format_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const FormatError& e) {
    return e.line();
  }
  return 0;
}

// Removes the two label entries from header and record lines.
std::string strip_labels(const std::string& text) {
  std::string out;
  for (const auto& line : testing::split_lines(text)) {
    const bool data = line.empty() || line[0] != '#';
    if (data || line.rfind("#fields\t", 0) == 0 || line.rfind("#types\t", 0) == 0) {
      auto cut = line.rfind('\t');
      cut = line.rfind('\t', cut - 1);
      out += line.substr(0, cut);
    } else {
      out += line;
    }
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_SUITE("zeek_io") {

TEST_CASE("3-row conn.log") {
  const auto t = load("basic/conn.log");
  CHECK(t.format == LogFormat::Tsv);
  CHECK(t.records.size() == 3);
  CHECK(t.header.field_names.size() == 21);
  CHECK(t.header.field_types.size() == 21);
  CHECK(t.header.path == "conn");
  CHECK(t.header.open == "2023-01-24-08-00-00");
  CHECK(t.header.separator == '\t');
  CHECK(t.header.set_separator == ",");
  CHECK(t.header.unset_field == "-");
  CHECK(t.header.empty_field == "(empty)");
  CHECK(t.trailer == std::vector<std::string>{"#close\t2023-01-24-12-00-00"});
  CHECK(t.records[2].cells[9] == "-");  // orig_bytes kept verbatim
  CHECK(t.header.field_index("conn_state") == 11);
  CHECK_FALSE(t.header.field_index("label").has_value());
}

TEST_CASE("header-only log") {
  const auto t = load("basic/header_only.log");
  CHECK(t.records.empty());
  CHECK(t.header.field_names.size() == 21);
  const auto out = testing::split_lines(written(t, {}));
  REQUIRE(out.size() == 8);
  CHECK(out[6].ends_with("\ttunnel_parents\tlabel\tdetailed_label"));
  CHECK(out[7].ends_with("\tset[string]\tstring\tstring"));
}

TEST_CASE("JSON-lines header follows first appearance of keys") {
  const auto t = load("basic/conn.json.log");
  CHECK(t.format == LogFormat::JsonLines);
  REQUIRE(t.records.size() == 3);
  const std::vector<std::string> expected = {
      "ts", "uid", "id.orig_h", "id.orig_p", "id.resp_h", "id.resp_p", "proto", "duration",
      "orig_bytes", "resp_bytes", "conn_state", "local_orig", "local_resp", "missed_bytes",
      "history", "orig_pkts", "orig_ip_bytes", "resp_pkts", "resp_ip_bytes", "service"};
  CHECK(t.header.field_names == expected);
  for (const auto& r : t.records) CHECK(r.cells.size() == expected.size());
  CHECK(t.records[0].cells[19] == "-");       // service absent in the first object
  CHECK(t.records[1].cells[19] == "ntp");
  CHECK(t.records[2].cells[8] == "-");        // orig_bytes omitted
  CHECK(t.records[0].cells[11] == "F");       // booleans in Zeek spelling
  CHECK(t.records[0].cells[0] == "1674567890.5");
}

TEST_CASE("JSON-lines output adds both keys and keeps the rest") {
  const auto t = load("basic/conn.json.log");
  std::vector<LabelPair> labels = empties(3);
  labels[0] = {"Malicious", "From_malicious-To_benign-Discovery-Port_discovery-Nmap"};
  const auto out = testing::split_lines(written(t, labels));
  const auto in = testing::split_lines(read_file(fixture("basic/conn.json.log")));
  REQUIRE(out.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    auto got = nlohmann::ordered_json::parse(out[i]);
    const auto original = nlohmann::ordered_json::parse(in[i]);
    CHECK(got["label"] == labels[i].label);
    CHECK(got["detailed_label"] == labels[i].detailed);
    got.erase("label");
    got.erase("detailed_label");
    CHECK(got == original);
  }
}

TEST_CASE("format errors") {
  const auto good = read_file(fixture("basic/conn.log"));
  SUBCASE("missing #fields") {
    std::string text;
    for (const auto& line : testing::split_lines(good)) {
      if (line.rfind("#fields", 0) != 0) text += line + "\n";
    }
    CHECK_THROWS_AS(parse(text), FormatError);
  }
  SUBCASE("row arity mismatch names the row") {
    auto lines = testing::split_lines(good);
    lines[9] += "\textra";  // second record
    std::string text;
    for (const auto& l : lines) text += l + "\n";
    try {
      parse(text);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.line() == 10);
      CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
  }
  SUBCASE("invalid JSON line") {
    CHECK(format_error_line("{\"uid\":\"C1\",\"ts\":1}\n{\"uid\":\"C2\",\n") == 2);
    CHECK(format_error_line("{\"uid\":\"C1\"}\n\n[1,2]\n") == 3);
  }
  SUBCASE("mismatched #types") {
    CHECK_THROWS_AS(parse("#separator \\x09\n#fields\ta\tb\n#types\tstring\n"), FormatError);
  }
}

TEST_CASE("write_log appends two columns") {
  const auto t = load("basic/conn.log");
  const auto cfg = load_config(read_file(fixture("configs/nmap.conf")));
  const auto labels = label_conn(t, cfg.rules);
  const auto out = testing::split_lines(written(t, labels));
  const auto first_record = std::find_if(out.begin(), out.end(), [](const std::string& l) { return l[0] != '#'; });
  REQUIRE(first_record != out.end());
  const std::string tail = "\tMalicious\tFrom_malicious-To_benign-Discovery-Port_discovery-Nmap";
  CHECK(first_record->ends_with(tail));
  CHECK((first_record + 1)->ends_with("\t(empty)\t(empty)"));

  const auto unlabeled = testing::split_lines(written(t, empties(3)));
  for (const auto& line : unlabeled) {
    if (line[0] != '#') CHECK(line.ends_with("\t(empty)\t(empty)"));
  }
  CHECK(std::find(unlabeled.begin(), unlabeled.end(),
                  "#types\ttime\tstring\taddr\tport\taddr\tport\tenum\tstring\tinterval\tcount\tcount\t"
                  "string\tbool\tbool\tcount\tstring\tcount\tcount\tcount\tcount\tset[string]\tstring\tstring") !=
        unlabeled.end());

  CHECK_THROWS_AS(written(t, empties(2)), UsageError);
}

TEST_CASE("round trip is byte-identical apart from the label columns") {
  for (const char* path : {"basic/conn.log", "basic/header_only.log", "portscan/conn.log",
                           "propagation/conn.log", "propagation/ssl.log", "propagation/x509.log",
                           "propagation/files.log", "propagation/http.log", "propagation/dns.log"}) {
    CAPTURE(path);
    const auto original = read_file(fixture(path));
    const auto t = parse(original);
    CHECK(strip_labels(written(t, empties(t.records.size()))) == original);
  }
}

TEST_CASE("flow_view mapping") {
  const auto t = load("basic/conn.log");
  const auto schema = ConnSchema::resolve(t.header);
  const auto row0 = flow_view(schema, t.header, t.records[0].cells);
  CHECK(row0.uid == "CmES5u32sYpV7JYN");
  CHECK(row0.start == doctest::Approx(1674567890.5));
  CHECK(row0.date == oracle::days_from_civil(2023, 1, 24));
  CHECK(row0.proto == "tcp");
  CHECK(row0.src_ip == IpAddress::parse("44.61.93.2"));
  CHECK(row0.dst_port == 22);
  CHECK(row0.state == "REJ");
  CHECK_FALSE(row0.tos.has_value());  // no tos field in conn.log
  CHECK(row0.packets == 2);

  const auto row1 = flow_view(schema, t.header, t.records[1].cells);
  CHECK(row1.packets == 10);  // orig_pkts=10, resp_pkts=0
  CHECK(row1.bytes == 48 + 468);
  CHECK(row1.duration == doctest::Approx(0.105012));

  const auto row2 = flow_view(schema, t.header, t.records[2].cells);
  CHECK(row2.bytes == 300);  // orig_bytes unset
  CHECK(row2.src_ip == IpAddress::parse("2a00:1450:400c:c05::69"));

  SUBCASE("missing uid") {
    auto header = t.header;
    header.field_names[1] = "uuid";
    CHECK_THROWS_AS(ConnSchema::resolve(header), FormatError);
  }
  SUBCASE("not a conn log") {
    auto header = t.header;
    header.path = "dns";
    header.field_names[6] = "qproto";
    CHECK_THROWS_AS(ConnSchema::resolve(header), FormatError);
  }
}

TEST_CASE("time parsing") {
  CHECK(parse_zeek_time("1674567890.5") == 1674567890.5);
  CHECK(parse_zeek_time("2023-01-24T08:00:00Z") == 1674547200.0);
  CHECK(parse_zeek_time("2023-01-24T08:00:00.25Z") == 1674547200.25);
  CHECK_FALSE(parse_zeek_time("yesterday").has_value());
  CHECK(parse_calendar_date("2023-01-24") == oracle::days_from_civil(2023, 1, 24));
  CHECK(parse_calendar_date("1970-01-01") == 0);
  CHECK_FALSE(parse_calendar_date("2023-13-01").has_value());
}

TEST_CASE("property: order preservation and arity") {
  oracle::Generator gen(99);
  for (int round = 0; round < 20; ++round) {
    std::vector<oracle::SynthFlow> flows;
    const int n = gen.uniform(0, 40);
    for (int i = 0; i < n; ++i) flows.push_back(gen.flow(i));
    const bool tos = gen.coin();
    const auto t = parse(oracle::render_conn_log(flows, tos));
    REQUIRE(t.records.size() == flows.size());
    std::vector<LabelPair> labels;
    for (int i = 0; i < n; ++i) labels.push_back({"Benign", "row" + std::to_string(i)});
    const auto out = parse(written(t, labels));
    REQUIRE(out.records.size() == flows.size());
    for (int i = 0; i < n; ++i) {
      const auto& cells = out.records[i].cells;
      CHECK(cells.size() == t.header.field_names.size() + 2);
      CHECK(cells[1] == flows[i].uid);
      CHECK(cells.back() == "row" + std::to_string(i));
    }
  }
}

}  // TEST_SUITE
