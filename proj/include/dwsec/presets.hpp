#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dwsec/sim.hpp"

namespace dwsec {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentPreset {
  std::string name;
  std::string description;
  ScenarioConfig scenario;
  /// Named assertions evaluated on the trace of `scenario`.
  std::function<std::vector<CheckResult>(const SimTrace&)> checks;
};

/// fig4, fig5, fig6, fig7, table1.
std::vector<ExperimentPreset> experiment_presets();
std::optional<ExperimentPreset> find_preset(const std::string& name);

/// Reference error power used to normalize E_T.
inline constexpr double kErrorPowerReference = 0.0077;

/// First step after `attack_end` at which the detector reports healthy.
std::optional<std::int64_t> recovery_step(const SimTrace& trace,
                                          std::int64_t attack_end);

/// max E_T(k) / reference over steps whose window lies entirely after the
/// recovery step. Empty when the run never recovers.
std::optional<double> post_recovery_error_ratio(const SimTrace& trace,
                                                std::size_t window,
                                                std::int64_t attack_end,
                                                double reference =
                                                    kErrorPowerReference);

/// Step of the first alarm at or after `onset`, if any.
std::optional<std::int64_t> first_alarm(const SimTrace& trace,
                                        std::int64_t onset);

/// True when every conventional statistic stays below its threshold.
bool conventional_tests_silent(const SimTrace& trace,
                               const DetectorConfig& cfg);

}  // namespace dwsec
