#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ivrlens/features.hpp"
#include "ivrlens/models.hpp"

#include "json.hpp"

namespace ivrlens::eval {

enum class Target : int { LowPickup = 0, LowEngagement = 1 };

const char* target_name(Target t);
std::optional<Target> parse_target(std::string_view name);

// Train/test windows for one feature set, already standardized with
// train-set statistics.
struct SplitData {
    features::WindowSpec spec;
    std::vector<features::FeatureWindow> train;
    std::vector<features::FeatureWindow> test;
    features::StandardizationStats stats;
};

struct EvalRow {
    models::ModelKind kind = models::ModelKind::Random;
    std::string feature_set;
    Target target = Target::LowPickup;
    double balanced_accuracy = 0.0;
    double precision_at_k = 0.0;
    double auc = 0.0;
    std::size_t n_test = 0;
    double positive_prevalence = 0.0;
    std::uint64_t seed = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double k_percent = 5.0;
    nlohmann::json provenance;  // config echo, seeds, hashes

    // Per target, best balanced accuracy first (table presentation order).
    void sort_rows();
    void write_csv(std::ostream& out) const;
    nlohmann::json to_json() const;
};

struct MatrixSpec {
    std::vector<models::ModelKind> kinds;
    std::vector<Target> targets;
    double k_percent = 5.0;
    int jobs = 1;
    std::size_t max_train_windows = 0;  // 0 = use everything
    std::size_t max_test_windows = 0;
    std::map<models::ModelKind, models::TrainConfig> train_configs;
    std::uint64_t seed = 1;
    std::optional<std::string> artifacts_dir;  // save fitted models here
};

// Trains and evaluates every (model, feature set, target) cell. Cells run
// in parallel up to jobs; results are assembled in a fixed order so the
// report is identical for any jobs value.
EvalReport run_matrix(const std::map<std::string, SplitData>& datasets, const MatrixSpec& spec);

// Flat matrix view of a window list.
struct FlatWindows {
    std::vector<double> x;
    std::vector<int> y_low_pickup;
    std::vector<int> y_low_engagement;
    int dim = 0;

    models::Samples samples(Target t) const {
        return {x, t == Target::LowPickup ? y_low_pickup : y_low_engagement, dim};
    }
};

FlatWindows flatten_windows(std::span<const features::FeatureWindow> windows, int dim);

void write_roc_csv(std::ostream& out,
                   const std::vector<std::pair<double, double>>& points);

}  // namespace ivrlens::eval
