#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ivrlens/records.hpp"

#include "json.hpp"

namespace ivrlens::features {

// Which per-week columns enter the feature matrix.
struct FeatureSet {
    bool duration = true;  // total listened seconds (1 column)
    bool attempt = true;   // attempt count (1 column)
    bool status = false;   // per-status attempt counts (5 columns)
    bool date = false;     // week-of-year and pickup-slot encodings (2 columns)

    int columns_per_week() const {
        return (duration ? 1 : 0) + (attempt ? 1 : 0) + (status ? kNumStatuses : 0) +
               (date ? 2 : 0);
    }
    // "duration+attempt+status" style tag used in filenames and reports.
    std::string tag() const;
    static std::optional<FeatureSet> from_tag(std::string_view tag);
    bool operator==(const FeatureSet&) const = default;
};

struct WindowSpec {
    int n_features_weeks = 6;
    int n_offset_weeks = 1;
    int label_window_weeks = 6;  // fixed by the label definitions
    int stride_weeks = 1;
    FeatureSet feature_set{};

    int total_weeks() const { return n_features_weeks + n_offset_weeks + label_window_weeks; }
    int flat_dim() const { return n_features_weeks * feature_set.columns_per_week(); }
    void validate() const;
};

// One supervised instance: the feature weeks flattened row-major
// (week-major, column-minor) plus the two binary targets.
struct FeatureWindow {
    std::string beneficiary_id;
    int start_week = 0;  // message index of the first feature week
    std::vector<double> features;
    bool label_low_pickup = false;
    bool label_low_engagement = false;
};

// Fewer than 3 picked (resp. engaged) weeks among the 6 label weeks.
bool label_low_pickup(std::span<const WeeklySummary> label_weeks);
bool label_low_engagement(std::span<const WeeklySummary> label_weeks);

// Rolling windows over one trajectory; trajectories shorter than the window
// yield none.
std::vector<FeatureWindow> make_windows(const Trajectory& traj, const WindowSpec& spec);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 1;

    void validate() const;
};

// Deterministic disjoint beneficiary split; round(train_fraction * N) ids
// go to train. Throws unless both sides end up non-empty.
std::pair<std::vector<std::string>, std::vector<std::string>> split_beneficiaries(
    std::vector<std::string> ids, const SplitSpec& spec);

struct StandardizationStats {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::vector<bool> passthrough;  // column was near-constant, left unscaled
    int dim = 0;

    nlohmann::json to_json() const;
    static StandardizationStats from_json(const nlohmann::json& j);
};

// Z-scores every feature column in place. Without stats (training mode) the
// statistics are computed from the given windows and returned; with stats
// (test mode) they are applied unchanged.
StandardizationStats standardize(std::vector<FeatureWindow>& windows,
                                 const std::optional<StandardizationStats>& stats = std::nullopt);

// Materialized split: windows for a set of beneficiaries, deterministic
// order (beneficiary id, then start week).
std::vector<FeatureWindow> windows_for(const std::map<std::string, Trajectory>& trajectories,
                                       std::span<const std::string> ids, const WindowSpec& spec);

// Dataset CSV: beneficiary_id,start_week,f_0..f_{K-1},label_low_pickup,label_low_engagement
void write_windows_csv(std::ostream& out, std::span<const FeatureWindow> windows, int flat_dim);
std::vector<FeatureWindow> read_windows_csv(std::istream& in, int flat_dim);

}  // namespace ivrlens::features
