#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ivrlens/records.hpp"
#include "ivrlens/slots.hpp"

namespace ivrlens::analytics {

// Pickup x engagement quadrants (High/Low each).
enum class Bucket : int { HPHE = 0, HPLE = 1, LPHE = 2, LPLE = 3 };

constexpr int kNumBuckets = 4;
const char* bucket_name(Bucket b);
std::optional<Bucket> parse_bucket_name(std::string_view name);

// Which per-trajectory length notion drives the extreme-set screening.
enum class ScreenMetric { EngagedWeeks, AttemptedWeeks, EnrolledWeeks };

struct BucketThresholds {
    double pickup_rate_cut = 0.5;
    double engagement_rate_cut = 0.5;
    int long_trajectory_min_weeks = 51;  // "> 50"
    int short_trajectory_max_weeks = 19; // "< 20"
    ScreenMetric screen_metric = ScreenMetric::EngagedWeeks;

    void validate() const;
};

struct EfficacyCurve {
    std::array<double, kMaxAttempts> per_attempt_reach{};  // first pickup at attempt k+1
    std::array<double, kMaxAttempts> cumulative_reach{};   // prefix sums, non-decreasing
    double never_reached = 0.0;
    long long weeks_counted = 0;  // beneficiary-weeks with at least one attempt
};

enum class EfficacyUnit { BeneficiaryWeek, BeneficiaryFirstWeek };

// Share of beneficiary-weeks first reached at each attempt number.
EfficacyCurve attempt_efficacy(const std::map<std::string, Trajectory>& trajectories,
                               EfficacyUnit unit = EfficacyUnit::BeneficiaryWeek);

// Per-trajectory rates over weeks with at least one attempt.
struct ListenerRates {
    double pickup_rate = 0.0;
    double engagement_rate = 0.0;
    int attempted_weeks = 0;
    int engaged_weeks = 0;
    int picked_weeks = 0;
};
ListenerRates listener_rates(const Trajectory& traj);

// Mean of weekly technical_success_ratio over attempted weeks.
double mean_technical_success(const Trajectory& traj);

// Beneficiaries with extreme listening-trajectory lengths: strictly more
// than long-1 weeks, or strictly fewer than short+1 weeks. Returns sorted ids.
std::vector<std::string> screen_extremes(const std::map<std::string, Trajectory>& trajectories,
                                         const BucketThresholds& thresholds);

// Quadrant for one trajectory; a rate at the cut counts as High. Throws on
// trajectories with no attempted weeks.
Bucket bucket_assign(const Trajectory& traj, const BucketThresholds& thresholds);

// One row per message index, averaged over every member of the bucket
// (members not observing a week contribute zeros); modal statistics are over
// members with a pickup that week, ties to the smaller value.
struct WeekProfile {
    int message_index = 0;
    double mean_pickup_rate = 0.0;
    std::optional<int> modal_pickup_attempt_day;
    double mean_technical_success_ratio = 0.0;
    std::optional<int> modal_pickup_slot;
    double mean_duration_seconds = 0.0;
    bool engaged_flag = false;  // mean duration strictly above threshold
    std::optional<int> modal_pickup_weekday;
    int members_observing = 0;
};

struct BucketProfile {
    int n_members = 0;
    std::vector<WeekProfile> weeks;
};

BucketProfile bucket_profile(std::span<const Trajectory* const> members,
                             double engagement_threshold_seconds = 30.0);

// Attempt-level pickup rate per time slot. Slots with zero attempts report
// an absent rate. Attempts outside the grid are tallied separately.
struct SlotRates {
    std::vector<long long> attempts;  // size n_slots
    std::vector<long long> pickups;
    std::vector<std::optional<double>> rate;
    long long outside_attempts = 0;
    long long outside_pickups = 0;
};

SlotRates slot_pickup_rates(std::span<const CallAttemptRecord> records, const TimeSlotGrid& grid,
                            const std::set<std::string>* member_filter = nullptr);

// Maximal runs of >= gap_weeks consecutive unpicked weeks. A run is
// technical_failure_driven when it contains attempts and none of them was a
// technical success.
struct GapEvent {
    int start_week = 0;
    int length_weeks = 0;
    bool technical_failure_driven = false;
};

std::vector<GapEvent> dropout_gap_scan(const Trajectory& traj, int gap_weeks = 6,
                                       const StatusSet& technical_success = {});

}  // namespace ivrlens::analytics
