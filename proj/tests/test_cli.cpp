#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sldml/cli.hpp"
#include "sldml/trainer.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace sldml;
using sldml::testing::TempDir;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Runs the installed binary through the shell and captures stdout.
Outcome invoke_binary(const std::string& args) {
  const std::string cmd = std::string(SLDML_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::string out;
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), int(buf.size()), pipe)) out += buf.data();
  const int status = pclose(pipe);
  return {WEXITSTATUS(status), out, ""};
}

nlohmann::json last_json_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line)) {
    if (!line.empty()) last = line;
  }
  return nlohmann::json::parse(last);
}

struct Workspace {
  TempDir dir;
  testing::SyntheticDataset data;
  std::filesystem::path config;

  Workspace() {
    testing::SyntheticOptions opt;
    opt.classes = 4;
    opt.per_class = 6;
    opt.samples = 24;
    opt.aux = 2;
    data = testing::write_synthetic(dir / "data", opt);
    config = dir.write("run.json", R"({
      "batch_size": 4, "epochs": 2, "target_width": 16,
      "manifest": "data/manifest.jsonl", "protocol": "data/protocol.json",
      "checkpoint": "out/model.ckpt", "history": "out/history.csv"
    })");
    std::filesystem::create_directories(dir / "out");
  }
};

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"train"}).code == 2);  // --config is required
  const auto r = invoke({"frobnicate"});
  CHECK(r.err.find("encode") != std::string::npos);

  Workspace ws;
  CHECK(invoke({"train", "--config", ws.config.string(), "--override", "no_such_key=1"}).code == 2);
  CHECK(invoke({"train", "--config", ws.config.string(), "--override", "weights"}).code == 2);
  CHECK(invoke({"export-embeddings", "--config", ws.config.string()}).code == 2);
  CHECK(invoke_binary("frobnicate").code == 2);
}

TEST_CASE("config loading and overrides") {
  Workspace ws;
  auto rc = load_run_config(ws.config);
  CHECK(rc.at("manifest") == (ws.dir.path() / "data/manifest.jsonl").lexically_normal().string());
  CHECK(rc.at("weights").at("delta") == 0.1);
  const auto before = config_digest(rc);
  apply_override(rc, "weights.alpha=1.0");
  CHECK(rc.at("weights").at("alpha") == 1.0);
  CHECK(train_config_of(rc).weights.alpha == 1.0);
  CHECK(config_digest(rc) != before);
  apply_override(rc, "miner_mode=literal-eq3");
  CHECK(train_config_of(rc).miner_mode == MinerMode::LiteralEq3);

  const auto bad = ws.dir.write("bad.json", R"({"weights": {"gamma": 1}})");
  try {
    load_run_config(bad);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidConfig);
  }
  const auto shipped = std::filesystem::path(SLDML_SOURCE_DIR) / "configs" / "default.json";
  const auto defaults = train_config_of(load_run_config(shipped));
  CHECK(defaults.batch_size == 32);
  CHECK(defaults.epochs == 100);
  CHECK(defaults.weights.alpha == 0.5);
  CHECK(defaults.weights.epsilon_mine == 0.05);
}

TEST_CASE("train, eval, export and encode through the command line") {
  Workspace ws;
  const auto cfg = ws.config.string();
  const auto train = invoke({"train", "--config", cfg});
  REQUIRE(train.code == 0);
  const auto trained = last_json_line(train.out);
  CHECK(trained.at("epochs") == 2);
  CHECK(trained.at("pretrained_lr") == 1e-6);
  CHECK(std::filesystem::exists(ws.dir / "out/model.ckpt"));
  CHECK(std::filesystem::exists(ws.dir / "out/history.csv"));
  CHECK(train.err.find("epoch 2") != std::string::npos);

  const auto eval = invoke({"eval", "--config", cfg, "--out", (ws.dir / "out/report.json").string()});
  REQUIRE(eval.code == 0);
  const auto report = last_json_line(eval.out);
  CHECK(report.contains("accuracy"));
  CHECK(report.contains("config_digest"));
  CHECK(report.at("queries") == 10);
  CHECK(report.at("accuracy").get<double>() >= 0);
  CHECK(report.at("accuracy").get<double>() <= 1);

  const auto overridden = invoke({"eval", "--config", cfg, "--override", "weights.alpha=1.0"});
  REQUIRE(overridden.code == 0);
  const auto report2 = last_json_line(overridden.out);
  CHECK(report2.at("config_digest") != report.at("config_digest"));
  CHECK(report2.at("accuracy") == report.at("accuracy"));

  const auto binary = invoke_binary("eval --config " + cfg);
  CHECK(binary.code == 0);
  CHECK(last_json_line(binary.out).at("config_digest") == report.at("config_digest"));

  const auto tsv = ws.dir / "out/emb.tsv";
  CHECK(invoke({"export-embeddings", "--config", cfg, "--out", tsv.string()}).code == 0);
  CHECK(std::filesystem::file_size(tsv) > 0);

  const auto enc_cfg = ws.dir.write("enc.json", R"({"inputs": ["data/C0_000.csv"], "target_width": 8})");
  const auto png = ws.dir / "out/c0.png";
  const auto enc = invoke({"encode", "--config", enc_cfg.string(), "--out", png.string()});
  REQUIRE(enc.code == 0);
  CHECK(last_json_line(enc.out).at("height") == 3);
  CHECK(std::filesystem::exists(png));
}

TEST_CASE("domain errors exit with 1 and name the error") {
  Workspace ws;
  std::filesystem::remove(ws.dir / "data/C1_003.csv");
  const auto r = invoke({"train", "--config", ws.config.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("MissingFile") != std::string::npos);
  CHECK(r.err.find("C1_003.csv") != std::string::npos);

  const auto missing_cfg = invoke({"eval", "--config", (ws.dir / "nope.json").string()});
  CHECK(missing_cfg.code == 1);
  CHECK(missing_cfg.err.find("MissingFile") != std::string::npos);

  const auto no_ckpt = invoke({"eval", "--config", ws.config.string()});
  CHECK(no_ckpt.code == 1);
  CHECK(no_ckpt.err.find("IoError") != std::string::npos);

  const auto bad_value = invoke({"train", "--config", ws.config.string(), "--override", "lr=-1"});
  CHECK(bad_value.code == 1);
  CHECK(bad_value.err.find("InvalidConfig") != std::string::npos);
}

TEST_CASE("ablation grid") {
  Workspace ws;
  auto rc = load_run_config(ws.config);
  const auto manifest = load_manifest(rc.at("manifest").get<std::string>());
  const auto protocol = load_protocol(rc.at("protocol").get<std::string>());
  const auto rows = ablate(manifest, manifest, protocol, train_config_of(rc));
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CHECK(r.accuracy >= 0);
    CHECK(r.accuracy <= 1);
    CHECK(std::isfinite(r.final_total_loss));
  }
  CHECK(rows[0].miner == MinerMode::Standard);
  CHECK(rows[3].miner == MinerMode::LiteralEq3);
  CHECK(rows[1].alpha == 0);
  CHECK(rows[1].beta == 1);
  std::ostringstream a, b;
  write_ablation_csv(rows, a);
  write_ablation_csv(ablate(manifest, manifest, protocol, train_config_of(rc)), b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("miner,alpha,beta,accuracy\nstandard,1,0,", 0) == 0);

  const auto cli = invoke({"ablate", "--config", ws.config.string()});
  REQUIRE(cli.code == 0);
  CHECK(cli.out == a.str());
}
