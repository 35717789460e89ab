#include <doctest.h>

#include <filesystem>
#include <string>

#include "dwsec/errors.hpp"
#include "dwsec/io.hpp"

using namespace dwsec;
using io::Json;

namespace {

std::string key_of(const Json& j) {
  try {
    io::scenario_from_json(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

Json minimal() { return Json{{"model", "pendulum"}, {"horizon", 100}}; }

}  // namespace

TEST_CASE("matrix json layout is row-major") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Json j = io::matrix_to_json(m);
  CHECK(j.dump() == "[[1.0,2.0,3.0],[4.0,5.0,6.0]]");
  CHECK(io::matrix_from_json(j, "m") == m);
  CHECK_THROWS_AS(io::matrix_from_json(Json::parse("[[1,2],[3]]"), "m"),
                  ConfigError);
}

TEST_CASE("model document round trip") {
  const Preset p = pendulum_preset();
  const Json j = io::model_to_json(p.model, p.gains);
  for (const char* key : {"a", "b", "c", "gamma", "sigma_n", "sigma_v", "l",
                          "k_gain", "q_weight", "r_weight"}) {
    CHECK(j.contains(key));
  }
  const io::ModelDocument d = io::model_from_json(Json::parse(j.dump()));
  CHECK(d.model.a == p.model.a);
  CHECK(d.model.b == p.model.b);
  CHECK(d.model.c == p.model.c);
  CHECK(d.model.gamma == p.model.gamma);
  CHECK(d.model.sigma_n == p.model.sigma_n);
  CHECK(d.model.sigma_v == p.model.sigma_v);
  REQUIRE(d.gains.has_value());
  CHECK(d.gains->l == p.gains.l);
  CHECK(d.gains->k_gain == p.gains.k_gain);
  CHECK(d.gains->sigma_o == p.gains.sigma_o);
  CHECK(d.gains->p == p.gains.p);
  CHECK(d.gains->s == p.gains.s);
}

TEST_CASE("model document without gains designs them from the weights") {
  const Preset p = pendulum_preset();
  Json j = io::model_to_json(pendulum_design_model(), p.gains);
  j.erase("l");
  j.erase("k_gain");
  const io::ModelDocument d = io::model_from_json(j);
  REQUIRE(d.gains.has_value());
  CHECK((d.gains->l - p.gains.l).norm() <= 1e-12);
  CHECK((d.gains->k_gain - p.gains.k_gain).norm() <= 1e-9);

  j.erase("q_weight");
  CHECK_FALSE(io::model_from_json(j).gains.has_value());
}

TEST_CASE("model document errors name the key") {
  const Preset p = pendulum_preset();
  Json j = io::model_to_json(p.model, p.gains);
  j.erase("gamma");
  try {
    io::model_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "gamma");
  }
  j = io::model_to_json(p.model, p.gains);
  j.erase("k_gain");
  try {
    io::model_from_json(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "k_gain");
  }
}

TEST_CASE("scenario round trip") {
  ScenarioConfig cfg = pendulum_scenario(Scheme::NewDW);
  cfg.compensation = true;
  cfg.attack = burst_preset_fig6();
  cfg.horizon = 1234;
  cfg.noise_seed = 987654321;
  cfg.watermark_seed = 42;
  cfg.sigma_w = Vector{{1e-4, 3e-4}};
  cfg.detector.window = 7;
  cfg.detector.thresh_new_1 = Vector{{6e-4, 8e-4}};
  cfg.safety.velocity_limit.reset();
  cfg.x0 = Vector{{0.01, 0.02, 0.0, 0.1 / 3.0}};

  const ScenarioConfig back =
      io::scenario_from_json(Json::parse(io::scenario_to_json(cfg).dump()));
  CHECK(back.scheme == cfg.scheme);
  CHECK(back.compensation);
  CHECK(back.horizon == 1234);
  CHECK(back.noise_seed == 987654321u);
  CHECK(back.watermark_seed == 42u);
  CHECK(back.sigma_w == cfg.sigma_w);
  CHECK(back.detector.window == 7);
  CHECK(back.detector.thresh_new_1 == cfg.detector.thresh_new_1);
  CHECK(back.detector.thresh_conv_1 == cfg.detector.thresh_conv_1);
  CHECK_FALSE(back.safety.velocity_limit.has_value());
  CHECK(back.x0 == cfg.x0);
  CHECK(back.model.a == cfg.model.a);
  CHECK(back.gains.l == cfg.gains.l);
  CHECK(back.gains.k_gain == cfg.gains.k_gain);
  REQUIRE(back.attack.has_value());
  CHECK(back.attack->a_attack == cfg.attack->a_attack);
  CHECK(back.attack->x_a_init == cfg.attack->x_a_init);
  REQUIRE(back.attack->windows.size() == 1);
  CHECK(back.attack->windows[0].end == 103);
}

TEST_CASE("open-ended attack window round trip") {
  const FdiaSpec s = persistent_fdia_preset();
  const Json j = io::attack_to_json(s);
  CHECK(j["windows"][0][1].is_null());
  const FdiaSpec back = io::attack_from_json(Json::parse(j.dump()));
  CHECK(back.windows[0].start == 2);
  CHECK_FALSE(back.windows[0].end.has_value());
  CHECK(back.x_a_init == s.x_a_init);
}

TEST_CASE("scenario errors name the offending key") {
  CHECK(key_of(Json{{"model", "pendulum"}}) == "horizon");
  Json j = minimal();
  j["horizon"] = 0;
  CHECK(key_of(j) == "horizon");
  j = minimal();
  j["model"] = "segway";
  CHECK(key_of(j) == "model");
  j = minimal();
  j["scheme"] = "quantum";
  CHECK(key_of(j) == "scheme");
  j = minimal();
  j["detector"] = {{"window_T", 0}};
  CHECK(key_of(j) == "window_T");
  j = minimal();
  j["detector"] = {{"thresh_conv", {1e-4}}};
  CHECK(key_of(j) == "thresh_conv");
  j = minimal();
  j["watermark"] = {{"sigma_w", {1e-4}}};
  CHECK(key_of(j) == "sigma_w");
  j = minimal();
  j["attack"] = {{"a_attack", {{0.1}}}, {"x_a_init", {1.0}}, {"windows", "x"}};
  CHECK(key_of(j) == "windows");
  j = minimal();
  j["scheme"] = "conventional_dw";
  j["compensation"] = true;
  CHECK(key_of(j) == "compensation");
  CHECK(key_of(minimal()) == "<no error>");
}

TEST_CASE("model-exchange document") {
  const Preset p = pendulum_preset();
  const Json d = io::export_lmi_document(p.model, p.gains, 4);
  for (const char* key :
       {"a0", "a1", "gamma0", "e", "e_c", "sigma_n", "sigma_v", "c", "hbar"}) {
    CHECK(d.contains(key));
  }
  const Matrix a0 = io::matrix_from_json(d["a0"], "a0");
  CHECK(a0.rows() == 8);
  CHECK(a0.cols() == 8);
  CHECK(d["hbar"] == 4);
  const ClosedLoopModel cl =
      build_closed_loop(p.model, p.gains, Matrix::Zero(4, 4));
  CHECK(a0 == cl.a0_delay);
  CHECK(io::matrix_from_json(d["gamma0"], "gamma0") == cl.gamma0_delay);
  CHECK(io::matrix_from_json(d["e"], "e") == cl.e_selector);

  CHECK(io::export_lmi_document(p.model, p.gains, 0)["hbar"] == 0);
  try {
    io::export_lmi_document(p.model, p.gains, -1);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "hbar");
  }
  LoopGains none = p.gains;
  none.l.resize(0, 0);
  CHECK_THROWS_AS(io::export_lmi_document(p.model, none, 4), ConfigError);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "dwsec_io_test.json";
  io::write_text_file(path, minimal().dump());
  CHECK(io::load_json_file(path) == minimal());
  io::write_text_file(path, "{not json");
  CHECK_THROWS_AS(io::load_json_file(path), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(io::load_json_file(dir / "dwsec_missing_file.json"),
                  ConfigError);
}
