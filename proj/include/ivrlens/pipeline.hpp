#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivrlens/analytics.hpp"
#include "ivrlens/eval.hpp"
#include "ivrlens/features.hpp"
#include "ivrlens/ingest.hpp"
#include "ivrlens/models.hpp"
#include "ivrlens/synth.hpp"

#include "json.hpp"

namespace ivrlens::pipeline {

// Everything one end-to-end run needs. Loaded from a single JSON file;
// command-line flags override config values, which override defaults.
//
// Stage seeds are derived from the global seed (synth, split and per-cell
// training seeds each get their own stream), so one number reproduces the
// whole run.
struct PipelineConfig {
    std::uint64_t seed = 20240501;
    int jobs = 1;
    std::string out_dir = "out";
    std::optional<std::string> input_csv;  // use an existing corpus instead of synth

    std::optional<synth::CohortConfig> synth_config;  // default: reference archetype mix
    int synth_total = 10000;  // scales the default archetype mix

    ingest::IngestOptions ingest_options{};
    analytics::BucketThresholds bucket_thresholds{};
    analytics::EfficacyUnit efficacy_unit = analytics::EfficacyUnit::BeneficiaryWeek;
    int gap_weeks = 6;

    features::WindowSpec window{};             // feature_set field ignored here
    std::vector<features::FeatureSet> feature_sets;
    features::SplitSpec split{};

    std::map<models::ModelKind, models::TrainConfig> train_configs;
    std::vector<models::ModelKind> eval_models;
    std::vector<eval::Target> targets;
    double k_percent = 5.0;
    std::size_t max_train_windows = 8000;
    std::size_t max_test_windows = 30000;

    static PipelineConfig defaults();
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig load(const std::string& path);
    nlohmann::json to_json() const;

    std::uint64_t synth_seed() const;
    std::uint64_t split_seed() const;

    // out_dir subdirectories
    std::string data_dir() const;
    std::string analysis_dir() const;
    std::string datasets_dir() const;
    std::string artifacts_dir() const;
    std::string reports_dir() const;
};

// Pipeline stages behind the CLI subcommands. Each writes its outputs under
// out_dir and returns nothing; failures throw (DataError for bad inputs).
void cmd_synth(const PipelineConfig& config);
void cmd_ingest(const PipelineConfig& config);
void cmd_analyze(const PipelineConfig& config);
void cmd_featurize(const PipelineConfig& config);
void cmd_train_eval(const PipelineConfig& config);
void cmd_report(const PipelineConfig& config, std::ostream& out);

// Shared plumbing, exposed for tests.
ingest::ParseResult load_corpus(const PipelineConfig& config);
std::map<std::string, eval::SplitData> build_datasets(
    const PipelineConfig& config, const std::map<std::string, Trajectory>& trajectories);
std::string config_hash(const nlohmann::json& j);

}  // namespace ivrlens::pipeline
