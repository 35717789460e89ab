#include "dwsec/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dwsec/errors.hpp"

namespace dwsec::io {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

namespace {

double number(const Json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(key, "non-finite number");
  return v;
}

const Json& require(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(key, "missing required key");
  }
  return j.at(key);
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(key, e.what());
  }
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& key) {
  if (j.is_number()) return Matrix::Constant(1, 1, number(j, key));
  if (!j.is_array()) throw ConfigError(key, "expected a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Matrix(0, 0);
  // A flat array is read as a single row.
  if (!j.front().is_array()) {
    Matrix m(1, rows);
    for (Eigen::Index c = 0; c < rows; ++c) m(0, c) = number(j[c], key);
    return m;
  }
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(key, "ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[c], key);
  }
  return m;
}

Vector vector_from_json(const Json& j, const std::string& key) {
  if (j.is_number()) return Vector::Constant(1, number(j, key));
  if (!j.is_array()) throw ConfigError(key, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const Json& e = j[i];
    // Accept column vectors written as [[a],[b]].
    if (e.is_array() && e.size() == 1) {
      v(i) = number(e[0], key);
    } else {
      v(i) = number(e, key);
    }
  }
  return v;
}

Json model_to_json(const PlantModel& model, const LoopGains& gains) {
  Json j;
  j["a"] = matrix_to_json(model.a);
  j["b"] = matrix_to_json(model.b);
  j["c"] = matrix_to_json(model.c);
  j["gamma"] = matrix_to_json(model.gamma);
  j["sigma_n"] = matrix_to_json(model.sigma_n);
  j["sigma_v"] = matrix_to_json(model.sigma_v);
  j["l"] = matrix_to_json(gains.l);
  j["k_gain"] = matrix_to_json(gains.k_gain);
  j["q_weight"] = matrix_to_json(gains.q_weight);
  j["r_weight"] = matrix_to_json(gains.r_weight);
  if (gains.p.size()) j["p"] = matrix_to_json(gains.p);
  if (gains.s.size()) j["s"] = matrix_to_json(gains.s);
  if (gains.sigma_o.size()) j["sigma_o"] = matrix_to_json(gains.sigma_o);
  return j;
}

ModelDocument model_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("model", "expected an object");
  ModelDocument doc;
  PlantModel& m = doc.model;
  m.a = matrix_from_json(require(j, "a"), "a");
  m.b = matrix_from_json(require(j, "b"), "b");
  if (m.b.rows() == 1 && m.a.rows() > 1 && m.b.cols() == m.a.rows()) {
    m.b.transposeInPlace();  // flat array means a column input map
  }
  m.c = matrix_from_json(require(j, "c"), "c");
  m.gamma = matrix_from_json(require(j, "gamma"), "gamma");
  m.sigma_n = matrix_from_json(require(j, "sigma_n"), "sigma_n");
  m.sigma_v = matrix_from_json(require(j, "sigma_v"), "sigma_v");
  try {
    m.validate();
  } catch (const Error& e) {
    throw ConfigError("model", e.what());
  }

  const bool has_l = j.contains("l");
  const bool has_k = j.contains("k_gain");
  if (has_l != has_k) {
    throw ConfigError(has_l ? "k_gain" : "l",
                      "gains must be given together");
  }
  if (has_l) {
    LoopGains g;
    g.l = matrix_from_json(j.at("l"), "l");
    g.k_gain = matrix_from_json(j.at("k_gain"), "k_gain");
    if (j.contains("q_weight")) {
      g.q_weight = matrix_from_json(j.at("q_weight"), "q_weight");
    }
    if (j.contains("r_weight")) {
      g.r_weight = matrix_from_json(j.at("r_weight"), "r_weight");
    }
    if (j.contains("p")) g.p = matrix_from_json(j.at("p"), "p");
    if (j.contains("s")) g.s = matrix_from_json(j.at("s"), "s");
    if (j.contains("sigma_o")) {
      g.sigma_o = matrix_from_json(j.at("sigma_o"), "sigma_o");
    } else {
      if (g.p.size() == 0) {
        const Matrix w = m.gamma * m.sigma_n * m.gamma.transpose();
        g.p = numerics::solve_dare_estimator(m.a, m.c, w, m.sigma_v);
      }
      g.sigma_o = m.c * g.p * m.c.transpose() + m.sigma_v;
    }
    if (g.l.rows() != m.nx() || g.l.cols() != m.ny()) {
      throw ConfigError("l", "must be m_x x m_y");
    }
    if (g.k_gain.rows() != m.nu() || g.k_gain.cols() != m.nx()) {
      throw ConfigError("k_gain", "must be m_u x m_x");
    }
    doc.gains = std::move(g);
  } else if (j.contains("q_weight") && j.contains("r_weight")) {
    doc.gains = compute_loop_gains(
        m, matrix_from_json(j.at("q_weight"), "q_weight"),
        matrix_from_json(j.at("r_weight"), "r_weight"));
  }
  return doc;
}

Json attack_to_json(const FdiaSpec& spec) {
  Json j;
  j["a_attack"] = matrix_to_json(spec.a_attack);
  j["x_a_init"] = vector_to_json(spec.x_a_init);
  Json windows = Json::array();
  for (const auto& w : spec.windows) {
    windows.push_back(Json::array({w.start, w.end ? Json(*w.end) : Json()}));
  }
  j["windows"] = std::move(windows);
  return j;
}

FdiaSpec attack_from_json(const Json& j) {
  FdiaSpec s;
  s.a_attack = matrix_from_json(require(j, "a_attack"), "a_attack");
  s.x_a_init = vector_from_json(require(j, "x_a_init"), "x_a_init");
  const Json& ws = require(j, "windows");
  if (!ws.is_array()) throw ConfigError("windows", "expected a list of pairs");
  for (const auto& w : ws) {
    if (!w.is_array() || w.size() != 2 || !w[0].is_number_integer() ||
        !(w[1].is_null() || w[1].is_number_integer())) {
      throw ConfigError("windows", "each window is [start, end|null]");
    }
    AttackWindow win;
    win.start = w[0].get<std::int64_t>();
    if (!w[1].is_null()) win.end = w[1].get<std::int64_t>();
    s.windows.push_back(win);
  }
  try {
    s.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError("attack", e.what());
  }
  return s;
}

Json scenario_to_json(const ScenarioConfig& cfg) {
  Json j;
  j["scheme"] = scheme_name(cfg.scheme);
  j["compensation"] = cfg.compensation;
  j["model"] = model_to_json(cfg.model, cfg.gains);
  j["watermark"] = {{"seed", cfg.watermark_seed},
                    {"sigma_w", vector_to_json(cfg.sigma_w)},
                    {"sign", cfg.watermark_sign}};
  j["attack"] = cfg.attack ? attack_to_json(*cfg.attack) : Json();
  j["detector"] = {
      {"window_T", cfg.detector.window},
      {"thresh_conv",
       Json::array({cfg.detector.thresh_conv_1, cfg.detector.thresh_conv_2})},
      {"thresh_new_1", vector_to_json(cfg.detector.thresh_new_1)},
      {"thresh_new_2", cfg.detector.thresh_new_2}};
  j["horizon"] = cfg.horizon;
  j["noise_seed"] = cfg.noise_seed;
  Json safety = {{"enabled", cfg.safety.enabled},
                 {"position_limit", cfg.safety.position_limit},
                 {"angle_limit", cfg.safety.angle_limit}};
  safety["velocity_limit"] =
      cfg.safety.velocity_limit ? Json(*cfg.safety.velocity_limit) : Json();
  j["safety"] = std::move(safety);
  if (cfg.x0.size()) j["x0"] = vector_to_json(cfg.x0);
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("", "scenario must be an object");
  const Scheme scheme =
      parse_scheme(get_or<std::string>(j, "scheme", "new_dw"));
  ScenarioConfig cfg;
  const Json& model = require(j, "model");
  if (model.is_string()) {
    if (model.get<std::string>() != "pendulum") {
      throw ConfigError("model", "unknown built-in model '" +
                                     model.get<std::string>() + "'");
    }
    cfg = pendulum_scenario(scheme);
  } else {
    ModelDocument doc = model_from_json(model);
    if (!doc.gains) {
      throw ConfigError("l", "model has no gains and no q_weight/r_weight");
    }
    cfg.scheme = scheme;
    cfg.model = std::move(doc.model);
    cfg.gains = std::move(*doc.gains);
    cfg.detector.thresh_new_1 = Vector::Constant(cfg.model.ny(), 7e-4);
    if (scheme == Scheme::NewDW) {
      cfg.sigma_w = Vector::Constant(cfg.model.ny(), 1e-4);
    } else if (scheme == Scheme::ConventionalDW) {
      cfg.sigma_w = Vector::Constant(cfg.model.nu(), 1e-4);
    }
  }
  cfg.compensation = get_or<bool>(j, "compensation", false);

  if (j.contains("watermark") && !j.at("watermark").is_null()) {
    const Json& w = j.at("watermark");
    cfg.watermark_seed = get_or<std::uint64_t>(w, "seed", cfg.watermark_seed);
    if (w.contains("sigma_w")) {
      cfg.sigma_w = vector_from_json(w.at("sigma_w"), "sigma_w");
    }
    cfg.watermark_sign = get_or<int>(w, "sign", 1);
  }
  if (scheme == Scheme::NoWatermark) cfg.sigma_w.resize(0);

  if (j.contains("attack") && !j.at("attack").is_null()) {
    cfg.attack = attack_from_json(j.at("attack"));
  }
  if (j.contains("detector") && !j.at("detector").is_null()) {
    const Json& d = j.at("detector");
    if (d.contains("window_T")) {
      const Json& t = d.at("window_T");
      if (!t.is_number_integer() || t.get<std::int64_t>() < 1) {
        throw ConfigError("window_T", "must be an integer >= 1");
      }
      cfg.detector.window = t.get<std::size_t>();
    }
    if (d.contains("thresh_conv")) {
      const Vector tc = vector_from_json(d.at("thresh_conv"), "thresh_conv");
      if (tc.size() != 2) throw ConfigError("thresh_conv", "expected a pair");
      cfg.detector.thresh_conv_1 = tc(0);
      cfg.detector.thresh_conv_2 = tc(1);
    }
    if (d.contains("thresh_new_1")) {
      cfg.detector.thresh_new_1 =
          vector_from_json(d.at("thresh_new_1"), "thresh_new_1");
    }
    if (d.contains("thresh_new_2")) {
      cfg.detector.thresh_new_2 = number(d.at("thresh_new_2"), "thresh_new_2");
    }
  }
  if (!j.contains("horizon") || !j.at("horizon").is_number_integer()) {
    throw ConfigError("horizon", "missing or not an integer");
  }
  cfg.horizon = j.at("horizon").get<std::int64_t>();
  cfg.noise_seed = get_or<std::uint64_t>(j, "noise_seed", cfg.noise_seed);
  if (j.contains("safety") && !j.at("safety").is_null()) {
    const Json& s = j.at("safety");
    cfg.safety.enabled = get_or<bool>(s, "enabled", true);
    if (s.contains("position_limit")) {
      cfg.safety.position_limit =
          number(s.at("position_limit"), "position_limit");
    }
    if (s.contains("angle_limit")) {
      cfg.safety.angle_limit = number(s.at("angle_limit"), "angle_limit");
    }
    if (s.contains("velocity_limit")) {
      const Json& v = s.at("velocity_limit");
      cfg.safety.velocity_limit =
          v.is_null() ? std::nullopt
                      : std::optional<double>(number(v, "velocity_limit"));
    }
  }
  if (j.contains("x0")) cfg.x0 = vector_from_json(j.at("x0"), "x0");
  cfg.validate();
  return cfg;
}

Json export_lmi_document(const PlantModel& model, const LoopGains& gains,
                         std::int64_t hbar) {
  if (hbar < 0) throw ConfigError("hbar", "must be >= 0");
  if (gains.l.size() == 0 || gains.k_gain.size() == 0) {
    throw ConfigError("l", "model-exchange export needs L and K");
  }
  const ClosedLoopModel cl =
      build_closed_loop(model, gains, Matrix::Zero(model.nx(), model.nx()));
  Json j;
  j["a0"] = matrix_to_json(cl.a0_delay);
  j["a1"] = matrix_to_json(cl.a1_delay);
  j["gamma0"] = matrix_to_json(cl.gamma0_delay);
  j["e"] = matrix_to_json(cl.e_selector);
  j["e_c"] = matrix_to_json(cl.e_complement);
  j["sigma_n"] = matrix_to_json(model.sigma_n);
  j["sigma_v"] = matrix_to_json(model.sigma_v);
  j["c"] = matrix_to_json(model.c);
  j["hbar"] = hbar;
  return j;
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

}  // namespace dwsec::io
