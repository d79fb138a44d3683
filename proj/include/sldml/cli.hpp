#ifndef SLDML_CLI_HPP_
#define SLDML_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sldml/config.hpp"
#include "sldml/oneshot.hpp"

namespace sldml {

/**
 * Fully resolved run configuration: training keys (TrainConfig, top level)
 * plus pipeline keys. Paths are resolved against the config file directory.
 *
 *   manifest        training manifest (JSON lines)
 *   eval_manifest   evaluation manifest; defaults to `manifest`
 *   protocol        split protocol file, or "builtin:ntu120"
 *   aux_keep        keep a seeded subset of this many aux classes (0 = all)
 *   aux_seed        seed of that subset
 *   checkpoint      checkpoint written by train, read by eval/export
 *   history         optional RunHistory CSV written by train
 *   inputs          signal CSVs for `encode` (fused in order when > 1)
 */
nlohmann::json default_run_config();

/// Loads a JSON config over the defaults. Unknown keys are rejected.
nlohmann::json load_run_config(const std::filesystem::path& path);

/// Applies KEY=VALUE with a dotted KEY that must already exist. VALUE is parsed
/// as JSON, falling back to a plain string.
void apply_override(nlohmann::json& config, const std::string& assignment);

TrainConfig train_config_of(const nlohmann::json& run_config);

/// SHA-256 of the canonical JSON dump.
std::string config_digest(const nlohmann::json& run_config);

struct AblationRow {
  MinerMode miner = MinerMode::Standard;
  double alpha = 0;
  double beta = 0;
  double accuracy = 0;
  double final_total_loss = 0;
  double final_triplet_loss = 0;
  double final_ce_loss = 0;
};

/// miner x {(1,0), (0,1), (0.5,0.5)} grid, trained and evaluated sequentially with one seed.
std::vector<AblationRow> ablate(const DatasetManifest& train_manifest, const DatasetManifest& eval_manifest,
                                const SplitProtocol& protocol, const TrainConfig& cfg);

/// CSV: miner,alpha,beta,accuracy
void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);

/// Entry point: exit 0 on success, 1 on domain errors, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sldml

#endif  // SLDML_CLI_HPP_
