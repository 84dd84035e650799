#pragma once

// Config-driven experiments behind the carnotflow executable.

#include "carnotflow/field_calculus.hpp"
#include "carnotflow/flow_solver.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace carnotflow {

namespace exit_code {
inline constexpr int pass = 0;
inline constexpr int ordering_failure = 1;
inline constexpr int solver_abort = 2;
inline constexpr int config_error = 64;
inline constexpr int incompatible = 65;
}  // namespace exit_code

/// A bad or missing config entry; key names it.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : std::runtime_error("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// c * prod_a x_a^{p_a} over the flattened coordinates.
struct Monomial {
  double coeff;
  std::vector<int> powers;
};

enum class BoundaryMode { frozen, exact, drift };

struct ExperimentConfig {
  nlohmann::json raw;  // as read, echoed into summary.json
  std::string command;
  GroupSpec spec;
  std::optional<Grid> grid;
  std::string initial_preset;         // "grim_reaper" or empty
  std::vector<Monomial> polynomial;   // used when no preset
  BoundaryMode boundary = BoundaryMode::frozen;
  double drift_rate = 1.0;
  FlowVariant variant = FlowVariant::det_plus;
  double t_end = 0.0;
  double dt_safety = 0.4;
  int snapshot_every = 0;
  double snapshot_interval = 0.0;
  double tol_ordering = 1e-6;
  double tol_residual = 1e-9;
  double tol_final_error = 1e-3;
  double tol_identity = 1e-6;
  std::filesystem::path output_dir = "carnotflow_out";
  std::uint64_t seed = 1;
  std::vector<std::string> checks;
  nlohmann::json check_params = nlohmann::json::object();
};

/// Throws ConfigError. Relative htype:<file> paths resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
/// Reads and parses a file; malformed JSON is a ConfigError on key "<document>".
ExperimentConfig load_config(const std::filesystem::path& path);

/// "euclidean:n", "heisenberg:n", "quaternionic", "htype:<file>".
GroupSpec group_from_preset(const std::string& name, const std::filesystem::path& base_dir = {});

/// Initial data of a config on its grid.
ScalarField initial_field(const ExperimentConfig& cfg);
FlowProblem make_problem(const ExperimentConfig& cfg);

/// Runs the flow, writes snapshots, diagnostics.csv and summary.json into
/// cfg.output_dir. Messages go to log.
int cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
/// Runs cfg.checks and writes verify_report.json.
int cmd_verify(const ExperimentConfig& cfg, std::ostream& log);
/// Runs both and compares them; writes compare_report.json into out_dir.
int cmd_compare(const ExperimentConfig& a, const ExperimentConfig& b, double tol,
                const std::filesystem::path& out_dir, std::ostream& log);

/// Entry point shared by the executable and the tests: command is
/// simulate, verify or compare; configs holds one path (two for compare, or
/// one compare config with "a" and "b" sections).
int run_command(const std::string& command, const std::vector<std::filesystem::path>& configs,
                const std::optional<std::filesystem::path>& out, const std::optional<double>& tol,
                std::ostream& log);

}  // namespace carnotflow
