#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvrad/artifacts.hpp"
#include "mvrad/cli.hpp"
#include "mvrad/config.hpp"
#include "mvrad/error.hpp"

using namespace mvrad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mvrad_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Small enough to run the whole pipeline in a couple of seconds.
std::vector<std::string> quick_flags() {
  return {"--quiet",
          "--set", "synth.n=80",
          "--set", "synth.d=8",
          "--set", "vae.max_epochs=15",
          "--set", "grid.n_estimators=10",
          "--set", "grid.max_depth=none,3",
          "--set", "grid.max_features=sqrt",
          "--set", "grid.min_samples_split=2",
          "--set", "grid.min_samples_leaf=1",
          "--set", "baseline.n_estimators=10",
          "--set", "split.cv_folds=3"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("config text parsing") {
  auto e = parse_config_text("# comment\nmode: synth\nseed = 7\nout_dir = \"some dir\"\n");
  CHECK(e.at("mode") == "synth");
  CHECK(e.at("seed") == "7");
  CHECK(e.at("out_dir") == "some dir");
  CHECK_THROWS_AS(parse_config_text("seed = 1\nseed = 2\n"), Error);
  CHECK_THROWS_AS(parse_config_text("just words\n"), Error);
}

TEST_CASE("config resolution") {
  auto minimal = resolve_config(parse_config_text("mode: synth\nseed: 7\n"));
  CHECK(minimal.mode == DataMode::Synthetic);
  CHECK(minimal.seed == 7);
  CHECK(minimal.synth.n == 400);
  CHECK(minimal.synth.d == 144);
  CHECK(minimal.synth.seed == 7);
  CHECK(minimal.experiment.seed == 7);
  CHECK(minimal.experiment.vae.beta == 0.3);
  CHECK(minimal.experiment.vae.latent_dim == 6);
  CHECK(minimal.experiment.grid.size() == 243);

  try {
    resolve_config({{"seed", "1"}, {"leraning_rate", "0.1"}});
    FAIL("unknown key accepted");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::SchemaViolation);
    CHECK(std::string(err.what()).find("leraning_rate") != std::string::npos);
  }
  CHECK_THROWS_AS(resolve_config({{"mode", "synth"}}), Error);
  CHECK_THROWS_AS(resolve_config({{"seed", "1"}, {"data.t1gd", "a.csv"}}), Error);
  CHECK_THROWS_AS(resolve_config({{"seed", "1"}, {"vae.beta", "lots"}}), Error);
  CHECK_THROWS_AS(resolve_config({{"seed", "1"}, {"mode", "real"}, {"data.t1gd", "a"}, {"data.flair", "b"},
                                  {"data.clinical", "c"}, {"synth.n", "5"}}),
                  Error);

  auto real = resolve_config({{"seed", "3"}, {"data.t1gd", "a"}, {"data.flair", "b"}, {"data.clinical", "c"}});
  CHECK(real.mode == DataMode::Real);

  auto regime = resolve_config({{"seed", "4"}, {"synth.regime", "shared-signal"}, {"synth.n", "123"}});
  CHECK(regime.synth.n == 123);
  CHECK(regime.synth.latent_dim == 4);
  CHECK(regime.synth.private_scale == shared_signal_regime(4).private_scale);

  auto rendered = render_config(regime);
  auto again = resolve_config(parse_config_text(rendered));
  CHECK(render_config(again) == rendered);
}

TEST_CASE("explicit flags override the config file") {
  const auto dir = scratch("precedence");
  write(dir / "run.cfg", "mode: synth\nseed: 7\nsynth.n: 50\n");
  const int code = run_cli(with({"--config", (dir / "run.cfg").string(), "--seed", "9", "--set", "synth.n=60", "--set",
                                 "seed=8", "--out-dir", (dir / "out").string(), "--quiet", "synth"},
                                {}));
  REQUIRE(code == 0);
  const auto cfg = resolve_config(parse_config_text(read(dir / "out" / "config.txt")));
  CHECK(cfg.seed == 9);
  CHECK(cfg.synth.n == 60);
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("codes");
  CHECK(run_cli({"--out-dir", (dir / "none").string(), "--quiet", "report"}) == 2);
  CHECK(run_cli({"--quiet", "--seed", "1", "frobnicate"}) == 2);
  CHECK(run_cli({"--quiet", "--config", (dir / "missing.cfg").string(), "synth"}) == 2);
  CHECK(run_cli({"--quiet", "--seed", "1", "--set", "bogus.key=1", "--out-dir", (dir / "x").string(), "synth"}) == 2);

  write(dir / "t1.csv", "subject_id,a,b\nS1,1,2\nS2,2,3\nS3,3,1\nS4,4,0\n");
  write(dir / "fl.csv", "subject_id,c,d\nS1,1,2\nS2,2,3\nS3,3,1\nS4,4,0\n");
  write(dir / "cl.csv", "subject_id,mgmt\nS1,methylated\nS2,methylated\nS3,methylated\nS4,unknown\n");
  CHECK(run_cli({"--quiet", "--seed", "1", "--t1gd", (dir / "t1.csv").string(), "--flair", (dir / "fl.csv").string(),
                 "--clinical", (dir / "cl.csv").string(), "--out-dir", (dir / "real").string(), "run"}) == 3);
  fs::remove_all(dir);
}

TEST_CASE("run, report, train-vae, embed and grid-search") {
  const auto dir = scratch("pipeline");
  const auto out = dir / "out";
  REQUIRE(run_cli(with({"--seed", "5", "--out-dir", out.string()}, with(quick_flags(), {"run"}))) == 0);
  const Report report = load_metrics_json(out / "metrics.json");
  CHECK(report.models.size() == 5);
  CHECK(report.oracle_auc.has_value());
  std::size_t roc = 0, svg = 0;
  for (const auto& entry : fs::directory_iterator(out)) {
    const auto name = entry.path().filename().string();
    roc += name.rfind("roc_", 0) == 0;
    svg += entry.path().extension() == ".svg";
  }
  CHECK(roc == 5);
  CHECK(svg == 2);

  const std::string metrics = read(out / "metrics.json");
  fs::remove(out / "auc_bar.svg");
  REQUIRE(run_cli({"--out-dir", out.string(), "--quiet", "report"}) == 0);
  CHECK(fs::exists(out / "auc_bar.svg"));
  CHECK(read(out / "metrics.json") == metrics);

  const auto vae_dir = dir / "vae";
  REQUIRE(run_cli(with({"--seed", "5", "--out-dir", vae_dir.string()}, with(quick_flags(), {"train-vae"}))) == 0);
  CHECK(fs::exists(vae_dir / "vae_checkpoint.txt"));
  REQUIRE(run_cli(with({"--seed", "5", "--out-dir", vae_dir.string()}, with(quick_flags(), {"embed"}))) == 0);
  std::ifstream emb(vae_dir / "embeddings.csv");
  std::string header, line;
  std::getline(emb, header);
  CHECK(header.rfind("subject_id,mgmt,T1Gd_mu", 0) == 0);
  std::size_t rows = 0, commas = 0;
  while (std::getline(emb, line)) {
    ++rows;
    commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  }
  CHECK(rows == 80);
  CHECK(commas == 13);

  const auto grid_dir = dir / "grid";
  REQUIRE(run_cli(with({"--seed", "5", "--out-dir", grid_dir.string()}, with(quick_flags(), {"grid-search"}))) == 0);
  std::ifstream table(grid_dir / "cv_table.csv");
  rows = 0;
  while (std::getline(table, line)) ++rows;
  CHECK(rows == 1 + 2 * 3);
  CHECK(fs::exists(grid_dir / "grid_best.json"));
  fs::remove_all(dir);
}
