#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/attacks.hpp"
#include "fedsim/dataset.hpp"
#include "fedsim/model.hpp"
#include "fedsim/oracles.hpp"
#include "fedsim/protocol.hpp"

namespace fedsim {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "fedsim 0.1.0";
inline constexpr double kEvalFraction = 0.2;

enum class ScenarioKind { regular, single_dictator, coalition, mutual_domination, betrayal };

std::string to_string(ScenarioKind kind);

struct RoleSpec {
    enum class Kind { honest, dictator, coalition, cheater, probe } kind = Kind::honest;
    std::vector<int> members;          // coalition
    int partner = 0;                   // cheater
    int betrayal_round = 0;            // cheater, >= 2
    double probe_magnitude = 0.0;      // probe: absolute B
    double probe_magnitude_scale = 0.0;  // probe: B = scale * median |grad(theta_0)|
};

struct DatasetConfig {
    enum class Type { blobs, idx } type = Type::blobs;
    // blobs
    int num_classes = 0;
    int dim = 0;
    int per_class = 50;
    double sigma = 0.5;
    // idx
    std::string images;
    std::string labels;
    int limit = 0;
};

// Complete declarative experiment description; everything a run needs and
// nothing environment-dependent.
struct ScenarioConfig {
    int schema_version = kSchemaVersion;
    std::string name;
    ScenarioKind kind = ScenarioKind::regular;
    std::uint64_t seed = 42;
    std::vector<std::uint64_t> seeds;  // multi-seed mode when non-empty
    ModelSpec model;
    DatasetConfig dataset;
    PartitionPlan partition;
    ProtocolConfig protocol;
    std::map<int, RoleSpec> roles;
    std::string outputs;
};

struct ConfigParse {
    std::optional<ScenarioConfig> config;
    std::vector<std::string> errors;  // every problem found, not just the first

    bool ok() const { return errors.empty() && config.has_value(); }
};

// Strict parsing: unknown fields are errors, all validation problems are
// collected. Defaults (documented in the README): seed 42, dataset blobs
// sized from the model, contiguous label partition, outputs "out/<name>".
ConfigParse parse_config_json(const nlohmann::json& j);
ConfigParse parse_config(const std::string& path);
nlohmann::json to_json(const ScenarioConfig& cfg);

// Everything run_scenario builds before the round loop; exposed so tests
// and deeper checks can reuse the exact same data, evaluators and theta0.
struct ScenarioEnv {
    ScenarioConfig cfg;
    DatasetShard source;
    std::map<int, DatasetShard> train_shards;
    std::map<int, DatasetShard> eval_shards;
    std::vector<std::unique_ptr<ModelLossEvaluator>> evaluators;  // index id-1
    ParamVector theta0;

    std::vector<const LossEvaluator*> evaluator_ptrs() const;
    MetricsFn metrics_fn() const;
};

ScenarioEnv build_env(const ScenarioConfig& cfg);

// Builds the per-client strategies implied by cfg.roles. The returned
// strategies borrow env's evaluators.
std::vector<std::unique_ptr<ClientStrategy>> build_strategies(const ScenarioEnv& env);

struct ScenarioResult {
    std::vector<RoundRecord> records;
    std::vector<EquivalenceReport> checks;
    std::vector<double> final_accuracy_pct;  // index id-1
    std::optional<double> eta_hat;           // probe runs only

    bool all_checks_passed() const;
};

ScenarioResult run_in_env(const ScenarioEnv& env);

// Run + write curves.csv, accuracy.json, checks.json and stamp.json into
// the output directory (resolved from, in priority order: the override,
// $FEDSIM_OUT_ROOT/<name>, cfg.outputs).
ScenarioResult run_scenario(const ScenarioConfig& cfg, const std::string& out_override = "");

std::string resolve_output_dir(const ScenarioConfig& cfg, const std::string& out_override);

struct MultiSeedCell {
    double mean = 0.0;
    double sigma = 0.0;  // population sigma; zero for a single seed
};

struct MultiSeedTable {
    std::vector<std::uint64_t> seeds;
    std::map<int, MultiSeedCell> accuracy_pct;  // client id -> mean/sigma
    bool all_checks_passed = true;              // across every seed's run
};

// One full run per seed (artifacts under <outdir>/seed_<s>/), then
// accuracy_sigma.json with per-client mean and 1-sigma at <outdir>.
MultiSeedTable run_multi_seed(const ScenarioConfig& cfg, const std::string& out_override = "");

std::uint64_t config_hash(const ScenarioConfig& cfg);

void write_artifacts(const ScenarioConfig& cfg, const ScenarioResult& result,
                     const std::string& outdir);

}  // namespace fedsim
