#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace netlabel::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsageError = 2;

namespace fs = std::filesystem;

// "conn.log" -> "conn.labeled.log"
fs::path labeled_name(const fs::path& input);

// Hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

int cmd_label(const fs::path& config, const fs::path& conn, const std::optional<fs::path>& output,
              std::ostream& out, std::ostream& err);

int cmd_propagate(const fs::path& labeled_conn, const fs::path& log_dir, const fs::path& output_dir,
                  std::ostream& out, std::ostream& err);

struct EvalOptions {
  double window = 3600.0;
  std::size_t threshold = 1;
  std::optional<double> cutoff;
  bool json = false;
};

int cmd_eval(const fs::path& labeled_conn, const fs::path& detections, const EvalOptions& options,
             std::ostream& out, std::ostream& err);

int cmd_validate_config(const fs::path& config, std::ostream& out, std::ostream& err);

int cmd_show_ontology(const std::optional<fs::path>& config, std::ostream& out, std::ostream& err);

// Parses argv and dispatches to the commands above.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace netlabel::cli
