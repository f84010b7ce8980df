#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbm/config.hpp"
#include "bbm/error.hpp"
#include "bbm/report.hpp"

using namespace bbm;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no bbm::Error thrown");
  return ErrorCode::IoError;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment names round-trip") {
  for (auto n : {ExperimentName::Ergodic, ExperimentName::Survival, ExperimentName::Phase,
                 ExperimentName::Martingale, ExperimentName::WindowTail,
                 ExperimentName::BridgeCheck, ExperimentName::Wave})
    CHECK(parse_experiment_name(to_string(n)) == n);
  CHECK(parse_experiment_name("window-tail") == ExperimentName::WindowTail);
  CHECK(code_of([] { parse_experiment_name("bogus"); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("defaults validate") {
  for (auto n : {ExperimentName::Ergodic, ExperimentName::Survival, ExperimentName::Phase,
                 ExperimentName::Martingale, ExperimentName::WindowTail,
                 ExperimentName::BridgeCheck, ExperimentName::Wave}) {
    const auto cfg = default_config(n);
    CHECK(cfg.name == n);
    CHECK_NOTHROW(cfg.validate());
  }
  const auto erg = default_config(ExperimentName::Ergodic);
  CHECK(erg.sim.horizon == 14.0);
  CHECK(erg.sim.obs_grid_step == 0.02);
  CHECK(erg.sim.barrier.mode == BarrierMode::Full);
  CHECK(erg.sim.barrier.slope == 0.0);
  CHECK(erg.burn_in_fraction == 0.2);
  const auto wt = default_config(ExperimentName::WindowTail);
  CHECK(wt.sim.horizon == 12.0);
  CHECK(wt.sim.barrier.slope == 0.5);
  CHECK(wt.sweep == std::vector<double>{2, 4, 6});
}

TEST_CASE("toml overlay") {
  auto cfg = default_config(ExperimentName::Martingale);
  apply_toml_text(cfg, R"(
[sim]
horizon = 2.0
seed = 77
offspring = [[1, 0.25], [3, 0.25], [2, 0.5]]
knots = "all"

[barrier]
slope = 0.25
mode = "truncated"
truncation = 1.5

[experiment]
name = "martingale"
replicas = 10
times = [1.0, 2.0]
)");
  CHECK(cfg.sim.horizon == 2.0);
  CHECK(cfg.sim.seed == 77);
  CHECK(cfg.sim.offspring.masses().size() == 3);
  CHECK(cfg.sim.knots == KnotRetention::All);
  CHECK(cfg.sim.barrier == BarrierSpec::truncated_at(0.25, 1.5));
  CHECK(cfg.replicas == 10);
  CHECK(cfg.times == std::vector<double>{1.0, 2.0});

  CHECK(config_from_json(to_json(cfg)) == cfg);
}

TEST_CASE("toml rejects unknown or malformed input") {
  auto cfg = default_config(ExperimentName::Wave);
  CHECK(code_of([&] { apply_toml_text(cfg, "[sim]\nwobble = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[extra]\nx = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "top = 1\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[sim]\nhorizon = \"long\"\n"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[sim]\noffspring = [[1, 1.0]]\n"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[barrier]\nmode = \"half\"\n"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[experiment]\nname = \"phase\"\n"); }) ==
        ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_text(cfg, "[sim\n"); }) == ErrorCode::InvalidConfig);
  CHECK(code_of([&] { apply_toml_file(cfg, "/nonexistent/bbm.toml"); }) == ErrorCode::IoError);
}

TEST_CASE("validation") {
  auto cfg = default_config(ExperimentName::Ergodic);
  cfg.burn_in_fraction = 1.5;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
  cfg = default_config(ExperimentName::Ergodic);
  cfg.replicas = 0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(-2.5e-10) == "-2.5e-10");
  CHECK(format_number(1.0) == "1");
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(-kInfinity) == "-inf");
  const double x = 0.1 + 0.2;
  CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("csv quoting") {
  Table t{"demo", {"a", "b", "c"}, {}};
  t.add({std::int64_t(1), 2.5, std::string("plain")});
  t.add({std::int64_t(-3), 0.0, std::string("has,comma \"q\"\nline")});
  CHECK_THROWS_AS(t.add({std::int64_t(1)}), Error);
  CHECK(to_csv(t) ==
        "a,b,c\r\n1,2.5,plain\r\n-3,0,\"has,comma \"\"q\"\"\nline\"\r\n");
}

TEST_CASE("emit writes every table and the summary") {
  const auto dir = std::filesystem::temp_directory_path() / "bbm_emit_test";
  std::filesystem::remove_all(dir);
  Report r;
  r.tables.push_back(Table{"one", {"x"}, {{1.5}}});
  r.tables.push_back(Table{"two", {"y"}, {}});
  r.summary["seed"] = 3;
  emit(r, dir);
  CHECK(slurp(dir / "one.csv") == "x\r\n1.5\r\n");
  CHECK(slurp(dir / "two.csv") == "y\r\n");
  CHECK(nlohmann::json::parse(slurp(dir / "summary.json"))["seed"] == 3);
  CHECK(&r.table("two") == &r.tables[1]);
  CHECK_THROWS_AS(r.table("three"), Error);
  std::filesystem::remove_all(dir);

  std::ofstream(dir.string() + "_file") << "x";
  CHECK(code_of([&] { emit(r, dir.string() + "_file"); }) == ErrorCode::IoError);
  std::filesystem::remove(dir.string() + "_file");
}
