#include <catch2/catch_amalgamated.hpp>

#include "qttf/config.hpp"

using namespace qttf;

namespace {

const char* kFullConfig = R"(
# paper-style scenario
[source_a]
singles_rate_hz = 6000
heralding_efficiency = 0.048933

[transmission_fiber]
length_km = 20
k2_ps2_per_km = -21.7

[compensation_fiber]
length_km = 2.49
k2_ps2_per_km = 186   ; opposite sign

[jitter]
detector_fwhm_ps = 35
timer_fwhm_ps = 35

[clock_a]
initial_offset_ns = 1000

[run]
n_blocks = 4
rng_seed = 7

[analysis]
fine_bin_ps = 2
)";

}  // namespace

TEST_CASE("parses sections, comments and whitespace") {
  const Config cfg = Config::parse_string(kFullConfig);
  REQUIRE(cfg.sections().count("source_a") == 1);
  CHECK(cfg.sections().at("compensation_fiber").at("k2_ps2_per_km") == "186");
  CHECK(cfg.sections().at("run").at("rng_seed") == "7");
}

TEST_CASE("syntax errors carry line numbers") {
  CHECK_THROWS_AS(Config::parse_string("[unterminated\n"), ValidationError);
  CHECK_THROWS_AS(Config::parse_string("novalue\n"), ValidationError);
  CHECK_THROWS_AS(Config::parse_string("= 3\n"), ValidationError);
}

TEST_CASE("full config binds to a scenario with units converted") {
  const RunSpec spec = run_spec_from_config(Config::parse_string(kFullConfig));
  CHECK(spec.scenario.link.transmission.length_m == 20000.0);
  CHECK(spec.scenario.link.transmission.k2_s2_per_m == Catch::Approx(-2.17e-26).epsilon(1e-12));
  CHECK(spec.scenario.link.compensation.k2_s2_per_m == Catch::Approx(1.86e-25).epsilon(1e-12));
  CHECK(spec.scenario.jitter.combined_fwhm_s() == Catch::Approx(70e-12).epsilon(1e-9));
  CHECK(spec.scenario.clock_a.initial_offset_s == Catch::Approx(1e-6).epsilon(1e-12));
  CHECK(spec.scenario.n_blocks == 4);
  CHECK(spec.scenario.rng_seed == 7);
  CHECK(spec.histogram.fine_bin_s == Catch::Approx(2e-12).epsilon(1e-12));
  CHECK(spec.auto_fine_window);
}

TEST_CASE("unknown keys are rejected with their path") {
  Config cfg = Config::parse_string(kFullConfig);
  cfg.set("run", "blokcs", "12");
  try {
    run_spec_from_config(cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("run.blokcs") != std::string::npos);
  }

  Config cfg2 = Config::parse_string("[nosuchsection]\nkey = 1\n");
  CHECK_THROWS_AS(run_spec_from_config(cfg2), ValidationError);
}

TEST_CASE("type errors carry the key path") {
  Config cfg = Config::parse_string(kFullConfig);
  cfg.set("run", "n_blocks", "many");
  try {
    run_spec_from_config(cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("run.n_blocks") != std::string::npos);
  }

  cfg = Config::parse_string(kFullConfig);
  cfg.set("run", "sinc_jsa", "maybe");
  CHECK_THROWS_AS(run_spec_from_config(cfg), ValidationError);
}

TEST_CASE("defaults are echoed and marked") {
  const RunSpec spec = run_spec_from_config(Config::parse_string(kFullConfig));
  bool found_default = false, found_given = false;
  for (const auto& e : spec.resolved) {
    if (e.key == "source_a.gamma") {
      CHECK(e.is_default);
      CHECK(e.value == "0.04822");
      found_default = true;
    }
    if (e.key == "run.n_blocks") {
      CHECK_FALSE(e.is_default);
      CHECK(e.value == "4");
      found_given = true;
    }
  }
  CHECK(found_default);
  CHECK(found_given);
}

TEST_CASE("validation failures surface through config binding") {
  Config cfg = Config::parse_string(kFullConfig);
  cfg.set("run", "n_blocks", "0");
  CHECK_THROWS_AS(run_spec_from_config(cfg), ValidationError);

  cfg = Config::parse_string(kFullConfig);
  cfg.set("source_a", "heralding_efficiency", "1.5");
  CHECK_THROWS_AS(run_spec_from_config(cfg), ValidationError);
}

TEST_CASE("drift configuration binds all kinds") {
  Config cfg = Config::parse_string(kFullConfig);
  cfg.set("drift", "transmission_kind", "sinusoidal");
  cfg.set("drift", "transmission_amplitude_ps", "100");
  cfg.set("drift", "transmission_period_s", "500");
  cfg.set("drift", "compensation_a_kind", "random-walk");
  cfg.set("drift", "compensation_a_random_walk_ps_per_sqrt_s", "9");
  cfg.set("drift", "correlation", "co-located");
  const RunSpec spec = run_spec_from_config(cfg);
  CHECK(spec.scenario.topology.transmission.kind == DriftKind::sinusoidal);
  CHECK(spec.scenario.topology.transmission.amplitude_s == Catch::Approx(100e-12));
  CHECK(spec.scenario.topology.compensation_a.kind == DriftKind::random_walk);
  CHECK(spec.scenario.topology.correlation == DcfCorrelation::co_located);

  cfg.set("drift", "correlation", "sideways");
  CHECK_THROWS_AS(run_spec_from_config(cfg), ValidationError);

  cfg.set("drift", "correlation", "shared");
  cfg.set("drift", "transmission_kind", "warp");
  CHECK_THROWS_AS(run_spec_from_config(cfg), ValidationError);
}

TEST_CASE("temperature-linear drift uses named traces and the stated default coefficient") {
  Config cfg = Config::parse_string(kFullConfig);
  cfg.set("drift", "compensation_a_kind", "temperature-linear");
  cfg.set("drift", "compensation_a_temperature_trace", "lab-irregular");
  const RunSpec spec = run_spec_from_config(cfg);
  const DriftProcess& d = spec.scenario.topology.compensation_a;
  CHECK(d.kind == DriftKind::temperature_linear);
  CHECK(d.length_scale_m == spec.scenario.link.compensation.length_m);
  CHECK(d.temperature_coeff_s_per_k_m == Catch::Approx(3.8e-14).epsilon(1e-9));
  CHECK_FALSE(d.temperature_trace.time_s.empty());

  bool coeff_echoed = false;
  for (const auto& e : spec.resolved) {
    if (e.key == "drift.compensation_a_temperature_coeff_ps_per_k_km") coeff_echoed = true;
  }
  CHECK(coeff_echoed);
}

TEST_CASE("scenario entries embed the full effective configuration") {
  const Scenario sc = preset("paper-20km-dcf");
  const auto entries = scenario_entries(sc, default_histogram_spec(sc));
  const auto has = [&](const std::string& key) {
    for (const auto& e : entries)
      if (e.key == key) return true;
    return false;
  };
  CHECK(has("source_a.dl_product_ps"));
  CHECK(has("transmission_fiber.k2_ps2_per_km"));
  CHECK(has("compensation_fiber.length_km"));
  CHECK(has("jitter.detector_fwhm_ps"));
  CHECK(has("run.rng_seed"));
  CHECK(has("analysis.fine_window_ps"));
}

TEST_CASE("preset registry") {
  CHECK(preset_names().size() == 7);
  for (const auto& name : preset_names()) {
    const Scenario sc = preset(name);
    CHECK_NOTHROW(sc.validate());
  }
  CHECK_THROWS_AS(preset("paper-25km"), std::invalid_argument);
}
