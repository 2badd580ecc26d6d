#pragma once

// CSV output: one "# ..." provenance line, a header row, then data rows.
// Doubles are written with 17 significant digits so files round-trip.

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "vmsd/errors.hpp"

namespace vmsd {

inline constexpr const char* kVersion = "0.1.0";

class CsvWriter {
 public:
  using Cell = std::variant<double, long long, std::string, std::optional<double>>;

  CsvWriter(const std::filesystem::path& path, const std::string& provenance, const std::vector<std::string>& header)
      : columns_(header.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    out_.precision(17);
    out_ << "# " << provenance << '\n';
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  void row(std::initializer_list<Cell> cells) { row(std::vector<Cell>(cells)); }

  void row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw InvariantError("CsvWriter: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::optional<double>>) {
              if (v) out_ << *v;  // empty cell for "not available"
            } else {
              out_ << v;
            }
          },
          cells[i]);
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

/// "vmsd <version> config=<hash> <command>"
inline std::string provenance(const std::string& command, const std::string& config_hash) {
  return std::string("vmsd ") + kVersion + " config=" + config_hash + " command=" + command;
}

}  // namespace vmsd
