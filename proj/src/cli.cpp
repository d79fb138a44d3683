#include "sldml/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "sldml/encoder.hpp"
#include "sldml/trainer.hpp"

namespace sldml {
namespace {

constexpr const char* kBuiltinNtu = "builtin:ntu120";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const char* const kPathKeys[] = {"manifest", "eval_manifest", "protocol", "checkpoint", "history"};

void merge_into(nlohmann::json& base, const nlohmann::json& patch, const std::string& where) {
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw Error(ErrorCode::InvalidConfig, "unknown config key " + path);
    if (base[key].is_object()) {
      if (!value.is_object()) throw Error(ErrorCode::InvalidConfig, path + " must be an object");
      merge_into(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

std::string resolve(const std::string& value, const std::filesystem::path& base) {
  if (value.empty() || value == kBuiltinNtu) return value;
  std::filesystem::path p(value);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal().string();
}

SplitProtocol protocol_of(const nlohmann::json& rc) {
  const auto ref = rc.at("protocol").get<std::string>();
  if (ref.empty()) throw Error(ErrorCode::InvalidConfig, "config key 'protocol' is required");
  SplitProtocol protocol = ref == kBuiltinNtu ? ntu_oneshot_split() : load_protocol(ref);
  const int keep = rc.at("aux_keep").get<int>();
  if (keep > 0) protocol = reduced_aux_split(protocol, keep, rc.at("aux_seed").get<std::uint64_t>());
  return protocol;
}

std::string required_path(const nlohmann::json& rc, const char* key) {
  auto v = rc.at(key).get<std::string>();
  if (v.empty()) throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' is required");
  return v;
}

DatasetManifest eval_manifest_of(const nlohmann::json& rc) {
  const auto p = rc.at("eval_manifest").get<std::string>();
  return load_manifest(p.empty() ? required_path(rc, "manifest") : p);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_encode(const nlohmann::json& rc, const std::string& out_path, std::ostream& out) {
  const auto inputs = rc.at("inputs").get<std::vector<std::string>>();
  if (inputs.empty()) throw Error(ErrorCode::InvalidConfig, "config key 'inputs' needs at least one signal file");
  if (out_path.empty()) throw UsageError("encode requires --out PATH (.png or .csv)");
  std::vector<SignalMatrix> signals;
  for (const auto& in : inputs) signals.push_back(load_signal_csv(in));
  Eigen::Index cols = signals.front().samples();
  for (const auto& s : signals) cols = std::min(cols, s.samples());
  SignalMatrix fused = subsample_time(signals.front(), cols);
  for (std::size_t i = 1; i < signals.size(); ++i) fused = fuse_rows(fused, subsample_time(signals[i], cols));

  if (ends_with(out_path, ".csv")) {
    write_signal_csv(fused, out_path);
  } else {
    export_png(encode(fused, rc.at("target_width").get<int>(), out_path), out_path);
  }
  out << nlohmann::json{{"signals", fused.signals()},
                        {"samples", fused.samples()},
                        {"height", (fused.signals() + 2) / 3},
                        {"width", rc.at("target_width").get<int>()},
                        {"out", out_path}}
             .dump()
      << '\n';
  return 0;
}

int cmd_train(const nlohmann::json& rc, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const TrainConfig cfg = train_config_of(rc);
  const auto manifest = load_manifest(required_path(rc, "manifest"));
  const auto protocol = protocol_of(rc);
  const auto checkpoint = out_path.empty() ? required_path(rc, "checkpoint") : out_path;
  auto result = train(manifest, protocol.aux_classes, cfg, nullptr, [&](const EpochRecord& e) {
    err << "epoch " << e.epoch << " total=" << e.mean_total_loss << " triplet=" << e.mean_triplet_loss
        << " ce=" << e.mean_ce_loss << " pos=" << e.mined_positive_count << " neg=" << e.mined_negative_count << '\n';
  });
  save_checkpoint(result.params, cfg, checkpoint);
  if (const auto h = rc.at("history").get<std::string>(); !h.empty()) result.history.write_csv(h);
  const auto& last = result.history.epochs.back();
  out << nlohmann::json{{"epochs", result.history.epochs.size()},
                        {"final_total_loss", last.mean_total_loss},
                        {"final_triplet_loss", last.mean_triplet_loss},
                        {"final_ce_loss", last.mean_ce_loss},
                        {"lr", result.history.lr},
                        {"pretrained_lr", result.history.pretrained_lr},
                        {"checkpoint", checkpoint},
                        {"config_digest", config_digest(rc)}}
             .dump()
      << '\n';
  return 0;
}

int cmd_eval(const nlohmann::json& rc, const std::string& out_path, std::ostream& out) {
  const auto ck = load_checkpoint(required_path(rc, "checkpoint"));
  const auto report = evaluate(ck.params, eval_manifest_of(rc), protocol_of(rc), ck.config);
  const auto digest = config_digest(rc);
  const auto json = report_to_json(report, digest);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + out_path);
    f << std::setw(2) << json << '\n';
  }
  out << nlohmann::json{{"accuracy", report.accuracy},
                        {"macro_accuracy", report.macro_accuracy},
                        {"queries", report.queries.size()},
                        {"config_digest", digest}}
             .dump()
      << '\n';
  return 0;
}

int cmd_ablate(const nlohmann::json& rc, const std::string& out_path, std::ostream& out) {
  const auto train_manifest = load_manifest(required_path(rc, "manifest"));
  const auto rows = ablate(train_manifest, eval_manifest_of(rc), protocol_of(rc), train_config_of(rc));
  if (out_path.empty()) {
    write_ablation_csv(rows, out);
  } else {
    std::ofstream f(out_path);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + out_path);
    write_ablation_csv(rows, f);
  }
  return 0;
}

int cmd_export(const nlohmann::json& rc, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) throw UsageError("export-embeddings requires --out PATH");
  const auto ck = load_checkpoint(required_path(rc, "checkpoint"));
  export_embeddings(ck.params, eval_manifest_of(rc), protocol_of(rc), ck.config, out_path);
  out << nlohmann::json{{"out", out_path}}.dump() << '\n';
  return 0;
}

}  // namespace

nlohmann::json default_run_config() {
  nlohmann::json j = to_json(TrainConfig{});
  j["manifest"] = "";
  j["eval_manifest"] = "";
  j["protocol"] = "";
  j["aux_keep"] = 0;
  j["aux_seed"] = 0;
  j["checkpoint"] = "";
  j["history"] = "";
  j["inputs"] = nlohmann::json::array();
  return j;
}

nlohmann::json load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  nlohmann::json patch;
  try {
    patch = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
  if (!patch.is_object()) throw Error(ErrorCode::InvalidConfig, path.string() + ": config must be a JSON object");
  nlohmann::json config = default_run_config();
  merge_into(config, patch, "");
  const auto base = path.parent_path();
  for (const char* key : kPathKeys) config[key] = resolve(config[key].get<std::string>(), base);
  for (auto& input : config["inputs"]) input = resolve(input.get<std::string>(), base);
  return config;
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override must be KEY=VALUE: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(part)) throw UsageError("unknown config key in override: " + key);
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  if (node->is_object()) throw UsageError("override must target a value, not a section: " + key);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  *node = std::move(value);
}

TrainConfig train_config_of(const nlohmann::json& rc) {
  const nlohmann::json defaults = to_json(TrainConfig{});
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : defaults.items()) j[key] = rc.at(key);
  return train_config_from_json(j);
}

std::string config_digest(const nlohmann::json& run_config) { return text_digest(run_config.dump()); }

std::vector<AblationRow> ablate(const DatasetManifest& train_manifest, const DatasetManifest& eval_manifest,
                                const SplitProtocol& protocol, const TrainConfig& cfg) {
  constexpr std::pair<double, double> kWeightings[] = {{1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}};
  std::vector<AblationRow> rows;
  ImageCache cache;
  for (MinerMode miner : {MinerMode::Standard, MinerMode::LiteralEq3}) {
    for (auto [alpha, beta] : kWeightings) {
      TrainConfig run = cfg;
      run.miner_mode = miner;
      run.weights.alpha = alpha;
      run.weights.beta = beta;
      const auto trained = train(train_manifest, protocol.aux_classes, run, &cache);
      const auto report = evaluate(trained.params, eval_manifest, protocol, run, &cache);
      const auto& last = trained.history.epochs.back();
      rows.push_back({miner, alpha, beta, report.accuracy, last.mean_total_loss, last.mean_triplet_loss,
                      last.mean_ce_loss});
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "miner,alpha,beta,accuracy\n";
  for (const auto& r : rows) {
    out << miner_mode_name(r.miner) << ',' << r.alpha << ',' << r.beta << ',' << std::setprecision(6) << r.accuracy
        << '\n';
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Signal-level deep metric learning for one-shot action recognition", "sldml"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_path;
  std::optional<std::uint64_t> seed;

  const std::pair<const char*, const char*> commands[] = {
      {"encode", "Encode (and fuse) signal CSVs into a signal image PNG or fused CSV"},
      {"train", "Train the embedding on the auxiliary classes"},
      {"eval", "One-shot evaluation against one reference per evaluation class"},
      {"ablate", "Miner x loss-weighting ablation grid"},
      {"export-embeddings", "Write query embeddings as TSV"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--override", overrides, "KEY=VALUE applied over the config (repeatable)");
    sub->add_option("--out", out_path, "Output path");
    sub->add_option("--seed", seed, "Random seed");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json rc = load_run_config(config_path);
    for (const auto& o : overrides) apply_override(rc, o);
    if (seed) rc["seed"] = *seed;
    if (command == "encode") return cmd_encode(rc, out_path, out);
    if (command == "train") return cmd_train(rc, out_path, out, err);
    if (command == "eval") return cmd_eval(rc, out_path, out);
    if (command == "ablate") return cmd_ablate(rc, out_path, out);
    return cmd_export(rc, out_path, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: InvalidConfig: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace sldml
