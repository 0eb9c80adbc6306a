// SPDX-License-Identifier: Apache-2.0
//
// Config-driven experiment runner behind the `urae` CLI.
//
// Configs are flat JSON objects; nested objects are flattened with dots, so
// {"gd": {"eta": 0.01}} and {"gd.eta": 0.01} are the same knob. Every
// effective value, defaults included, is echoed into report.json.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "urae/archive.hpp"
#include "urae/error.hpp"
#include "urae/flow.hpp"

namespace urae::harness {

using Json = nlohmann::json;

[[nodiscard]] std::string_view version() noexcept;

enum class Kind {
  Theorem1,
  Fig2Sweep,
  ToyTrain,
  ToyDistill,
  CfgAdapt,
  AdapterOp,
  ArchiveInspect,
};

[[nodiscard]] std::string_view to_string(Kind kind) noexcept;
[[nodiscard]] std::optional<Kind> parse_kind(std::string_view text) noexcept;

// Validation failure carrying one message per violated field.
class ConfigError : public ValidationError {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  [[nodiscard]] const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

[[nodiscard]] Json flatten(const Json& doc);
// Flattened document. IoError when unreadable, ConfigError when not a JSON object.
[[nodiscard]] Json load_config(const std::filesystem::path& path);
[[nodiscard]] Json default_config(Kind kind);

// Applies defaults and validates. `overrides` (flat) win over `user`; the
// CLI passes the seed and the adapter op this way. Throws ConfigError
// listing every problem before anything runs.
[[nodiscard]] Json resolve_config(Kind kind, const Json& user, const Json& overrides = Json::object());

// URAE_THREADS if set (positive integer), else the hardware concurrency.
[[nodiscard]] std::size_t worker_threads();

struct RunResult {
  Json report;
  std::vector<std::filesystem::path> outputs;
};

// Runs a resolved config and writes report.json plus the experiment's tables
// into config["output_dir"].
RunResult run_experiment(Kind kind, const Json& config, std::size_t threads);

// CSV tables ---------------------------------------------------------------

enum class ColumnType { Real, Integer, Text };

struct Column {
  std::string name;
  ColumnType type;
};

using Cell = std::variant<double, std::uint64_t, std::string>;
using Row = std::vector<Cell>;

// 17 significant digits, so doubles round-trip exactly.
[[nodiscard]] std::string format_real(double v);
// Header plus rows, LF line endings. ValidationError names the offending row.
[[nodiscard]] std::string format_csv(const std::vector<Column>& schema, const std::vector<Row>& rows);
void emit_report(const std::vector<Row>& rows, const std::vector<Column>& schema,
                 const std::filesystem::path& path);
// Inverse of format_csv for the same schema.
[[nodiscard]] std::vector<Row> parse_csv(std::string_view text, const std::vector<Column>& schema);

// Process-level error handling ----------------------------------------------

// 2 invalid input, 3 numerical failure, 4 I/O or unreadable archive.
[[nodiscard]] int exit_code(ErrorKind kind) noexcept;
// {"error": {"kind", "message", "exit_code", ["violations"]}}
[[nodiscard]] Json failure_report(const std::exception& e);

// Toy model <-> archive, one entry per parameter block.
[[nodiscard]] io::TensorArchive model_to_archive(const flow::ToyFlowModel& model);
[[nodiscard]] flow::ToyFlowModel model_from_archive(const io::TensorArchive& archive);

}  // namespace urae::harness
