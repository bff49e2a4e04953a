#pragma once

// Configuration, experiment dispatch and table output behind the `magnon`
// command line tool.  The schema is documented in configs/README.md.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magnon/control.hpp"
#include "magnon/dynamics.hpp"
#include "magnon/model.hpp"
#include "magnon/opensys.hpp"

namespace magnon::app {

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A module error, with the experiment that raised it prepended.
class experiment_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ExperimentKind { Closed, Envelope, Control, Opensys, Validate };

std::string to_string(ExperimentKind kind);
ExperimentKind kind_from_string(const std::string& name);

/// Either a uniform grid or an explicit list of sample times.
struct TimeSpec {
  std::optional<double> t_start, t_end;
  std::optional<int> n_steps;     // filled from default_step_count when absent
  std::vector<double> samples;    // explicit times, ascending
  std::vector<double> centres;    // windows of `width` sampled every `step` after each centre
  double width = 0;
  double step = 0;

  bool uniform() const { return t_end.has_value(); }
  TimeGrid grid() const;
  /// All sample times in output order.
  std::vector<double> times() const;
};

struct ControlSettings {
  std::vector<double> total_times{45};
  double steps_per_unit = 20;
  double guess = 1.0;
  std::array<double, kNumControls> lambda{5.0, 5.0};
  double lambda_decay = 0.95;
  double lambda_min = 0.3;
  double flattop_rise = 0;  // 0 keeps S = 1
  StopRule stop;
  bool sequential = true;
};

struct OpenSettings {
  int substeps = 10;
  int trajectories = 0;  // QSD ensemble size; 0 runs the master equation only
  double positivity_tolerance = 1e-6;
  bool check_positivity = true;
  bool controlled = false;  // optimize with the control section first, then run open dynamics
};

struct ValidateSettings {
  double update_sign = 1.0;  // -1 corrupts the Krotov update (test fixture)
  FullModelParams<double> full{12, 1, 1, 10, 10, 1, 1, 1, 1, 3};
  double adiabatic_horizon = 50;
  int adiabatic_steps = 1000;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Closed;
  EffectiveParams<double> model{1200, 1, 1, 0.1, 0.23, 1.3};
  std::optional<FullModelParams<double>> full_model;  // closed runs of the 10-level model
  std::string initial = "m1";
  TimeSpec times;
  BathSpec bath;
  ControlSettings control;
  OpenSettings open;
  ValidateSettings validate;
  std::optional<std::uint64_t> seed;
  int threads = 1;

  /// Fully resolved document; parse_config(to_json()) gives back this config.
  nlohmann::ordered_json to_json() const;
  void validate_fields() const;
};

/// Command-line values that replace the document's seed and threads.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

/// Parses a JSON document (comments allowed).  `origin` names the source in
/// error messages.  Unknown keys, type mismatches and invalid values throw
/// config_error.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>",
                              const Overrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

struct ResultTable {
  std::string name;
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  std::size_t column(const std::string& label) const;
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text, const std::string& name = "");
};

void write_table(const ResultTable& table, const std::filesystem::path& path);
ResultTable read_table(const std::filesystem::path& path);

/// 17 significant digits, enough to round-trip any double.
std::string format_number(double x);

struct ExperimentResult {
  std::vector<ResultTable> tables;
  nlohmann::ordered_json summary;
};

/// Runs the experiment; tables carry the config echo and code version.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes every table as <name>.csv and the summary as summary.json; returns
/// the paths written.
std::vector<std::filesystem::path> write_result(const ExperimentResult& result, const std::filesystem::path& out_dir);

struct CheckResult {
  std::string name;
  double observed = 0;
  double tolerance = 0;
  bool passed = false;
  std::string detail;
  std::vector<double> values;  // check-specific series, e.g. deviations of a sweep
};

/// Cross-oracle checks: Wootters against the pure-state formula, Markov master
/// equation against a Lindblad propagator, O-bar against the double integral,
/// Krotov update against finite differences, adiabatic elimination sweep.
std::vector<CheckResult> validate_suite(const ExperimentConfig& config);

const char* version();

}  // namespace magnon::app
