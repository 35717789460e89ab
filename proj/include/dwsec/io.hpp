#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "dwsec/analysis.hpp"
#include "dwsec/sim.hpp"

namespace dwsec::io {

using Json = nlohmann::json;

// Matrices are row-major nested arrays; vectors are flat arrays.
Json matrix_to_json(const Matrix& m);
Json vector_to_json(const Vector& v);
Matrix matrix_from_json(const Json& j, const std::string& key);
Vector vector_from_json(const Json& j, const std::string& key);

/// Keys a, b, c, gamma, sigma_n, sigma_v, l, k_gain, q_weight, r_weight,
/// plus p, s, sigma_o when known.
Json model_to_json(const PlantModel& model, const LoopGains& gains);

struct ModelDocument {
  PlantModel model;
  std::optional<LoopGains> gains;  // present when l and k_gain are given
};

/// Missing sigma_o is rebuilt from p, or from the filter Riccati equation.
ModelDocument model_from_json(const Json& j);

Json scenario_to_json(const ScenarioConfig& cfg);
/// "model" may be the string "pendulum" or an inline model document with
/// gains (or with q_weight/r_weight, in which case gains are designed).
ScenarioConfig scenario_from_json(const Json& j);

Json attack_to_json(const FdiaSpec& spec);
FdiaSpec attack_from_json(const Json& j);

/// Exchange document for the LMI certifier: a0, a1, gamma0, e, e_c,
/// sigma_n, sigma_v, c, hbar. Throws ConfigError for hbar < 0.
Json export_lmi_document(const PlantModel& model, const LoopGains& gains,
                         std::int64_t hbar);

Json load_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& text);

}  // namespace dwsec::io
