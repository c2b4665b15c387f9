#include "ivrlens/analytics.hpp"

#include <algorithm>
#include <cmath>

#include "ivrlens/error.hpp"

namespace ivrlens::analytics {

const char* bucket_name(Bucket b) {
    switch (b) {
        case Bucket::HPHE: return "HPHE";
        case Bucket::HPLE: return "HPLE";
        case Bucket::LPHE: return "LPHE";
        case Bucket::LPLE: return "LPLE";
    }
    return "LPLE";
}

std::optional<Bucket> parse_bucket_name(std::string_view name) {
    for (int i = 0; i < kNumBuckets; ++i) {
        if (name == bucket_name(Bucket(i))) return Bucket(i);
    }
    return std::nullopt;
}

void BucketThresholds::validate() const {
    if (pickup_rate_cut < 0 || pickup_rate_cut > 1 || engagement_rate_cut < 0 ||
        engagement_rate_cut > 1) {
        throw DataError("bucket rate cuts must lie in [0,1]");
    }
    if (short_trajectory_max_weeks >= long_trajectory_min_weeks) {
        throw DataError("short trajectory bound must be below the long bound");
    }
}

EfficacyCurve attempt_efficacy(const std::map<std::string, Trajectory>& trajectories,
                               EfficacyUnit unit) {
    EfficacyCurve curve;
    std::array<long long, kMaxAttempts> reached_at{};
    long long never = 0;
    for (const auto& [id, traj] : trajectories) {
        for (const auto& week : traj.weeks) {
            if (week.n_attempts == 0) continue;
            if (week.first_pickup_attempt) {
                reached_at[*week.first_pickup_attempt - 1] += 1;
            } else {
                never += 1;
            }
            ++curve.weeks_counted;
            if (unit == EfficacyUnit::BeneficiaryFirstWeek) break;
        }
    }
    if (curve.weeks_counted == 0) throw DataError("attempt_efficacy: no attempted weeks in cohort");
    double total = double(curve.weeks_counted);
    double running = 0.0;
    for (int k = 0; k < kMaxAttempts; ++k) {
        curve.per_attempt_reach[k] = double(reached_at[k]) / total;
        running += curve.per_attempt_reach[k];
        curve.cumulative_reach[k] = running;
    }
    curve.never_reached = double(never) / total;
    return curve;
}

ListenerRates listener_rates(const Trajectory& traj) {
    ListenerRates rates;
    for (const auto& week : traj.weeks) {
        if (week.n_attempts == 0) continue;
        ++rates.attempted_weeks;
        if (week.picked) ++rates.picked_weeks;
        if (week.engaged) ++rates.engaged_weeks;
    }
    if (rates.attempted_weeks > 0) {
        rates.pickup_rate = double(rates.picked_weeks) / double(rates.attempted_weeks);
        rates.engagement_rate = double(rates.engaged_weeks) / double(rates.attempted_weeks);
    }
    return rates;
}

double mean_technical_success(const Trajectory& traj) {
    double sum = 0.0;
    int n = 0;
    for (const auto& week : traj.weeks) {
        if (week.n_attempts == 0) continue;
        sum += week.technical_success_ratio;
        ++n;
    }
    return n > 0 ? sum / double(n) : 0.0;
}

std::vector<std::string> screen_extremes(const std::map<std::string, Trajectory>& trajectories,
                                         const BucketThresholds& thresholds) {
    thresholds.validate();
    std::vector<std::string> kept;
    for (const auto& [id, traj] : trajectories) {
        const auto rates = listener_rates(traj);
        int length = 0;
        switch (thresholds.screen_metric) {
            case ScreenMetric::EngagedWeeks: length = rates.engaged_weeks; break;
            case ScreenMetric::AttemptedWeeks: length = rates.attempted_weeks; break;
            case ScreenMetric::EnrolledWeeks: length = traj.enrollment_span(); break;
        }
        if (length >= thresholds.long_trajectory_min_weeks ||
            length <= thresholds.short_trajectory_max_weeks) {
            kept.push_back(id);
        }
    }
    return kept;
}

Bucket bucket_assign(const Trajectory& traj, const BucketThresholds& thresholds) {
    thresholds.validate();
    const auto rates = listener_rates(traj);
    if (rates.attempted_weeks == 0) {
        throw DataError("bucket_assign: trajectory " + traj.beneficiary_id +
                        " has no attempted weeks");
    }
    const bool high_pickup = rates.pickup_rate >= thresholds.pickup_rate_cut;
    const bool high_engagement = rates.engagement_rate >= thresholds.engagement_rate_cut;
    if (high_pickup) return high_engagement ? Bucket::HPHE : Bucket::HPLE;
    return high_engagement ? Bucket::LPHE : Bucket::LPLE;
}

namespace {

// Mode with ties broken toward the smaller value.
std::optional<int> modal_value(const std::map<int, int>& counts) {
    std::optional<int> best;
    int best_count = 0;
    for (const auto& [value, count] : counts) {
        if (count > best_count) {
            best = value;
            best_count = count;
        }
    }
    return best;
}

}  // namespace

BucketProfile bucket_profile(std::span<const Trajectory* const> members,
                             double engagement_threshold_seconds) {
    if (members.empty()) throw DataError("bucket_profile: empty bucket");
    BucketProfile profile;
    profile.n_members = int(members.size());
    int max_week = 0;
    for (const auto* traj : members) max_week = std::max(max_week, traj->last_week());
    profile.weeks.resize(max_week);

    std::vector<std::map<int, int>> day_counts(max_week), slot_counts(max_week),
        weekday_counts(max_week);
    for (const auto* traj : members) {
        for (const auto& week : traj->weeks) {
            auto& row = profile.weeks[week.message_index - 1];
            row.mean_pickup_rate += week.picked ? 1.0 : 0.0;
            row.mean_technical_success_ratio += week.technical_success_ratio;
            row.mean_duration_seconds += week.total_duration_seconds;
            row.members_observing += 1;
            const int idx = week.message_index - 1;
            if (week.pickup_attempt_day) day_counts[idx][*week.pickup_attempt_day] += 1;
            if (week.pickup_slot) slot_counts[idx][*week.pickup_slot] += 1;
            if (week.pickup_weekday) weekday_counts[idx][*week.pickup_weekday] += 1;
        }
    }
    const double n = double(profile.n_members);
    for (int w = 0; w < max_week; ++w) {
        auto& row = profile.weeks[w];
        row.message_index = w + 1;
        row.mean_pickup_rate /= n;
        row.mean_technical_success_ratio /= n;
        row.mean_duration_seconds /= n;
        row.engaged_flag = row.mean_duration_seconds > engagement_threshold_seconds;
        row.modal_pickup_attempt_day = modal_value(day_counts[w]);
        row.modal_pickup_slot = modal_value(slot_counts[w]);
        row.modal_pickup_weekday = modal_value(weekday_counts[w]);
    }
    return profile;
}

SlotRates slot_pickup_rates(std::span<const CallAttemptRecord> records, const TimeSlotGrid& grid,
                            const std::set<std::string>* member_filter) {
    grid.validate();
    SlotRates rates;
    rates.attempts.assign(grid.n_slots(), 0);
    rates.pickups.assign(grid.n_slots(), 0);
    long long in_grid = 0;
    for (const auto& rec : records) {
        if (member_filter && !member_filter->count(rec.beneficiary_id)) continue;
        const bool picked = rec.status == TechnicalStatus::PickedUp;
        if (auto slot = assign_time_slot(rec.attempt_time, grid)) {
            rates.attempts[*slot] += 1;
            if (picked) rates.pickups[*slot] += 1;
            ++in_grid;
        } else {
            rates.outside_attempts += 1;
            if (picked) rates.outside_pickups += 1;
        }
    }
    if (in_grid == 0) throw DataError("slot_pickup_rates: no attempts inside the slot grid");
    rates.rate.resize(grid.n_slots());
    for (int s = 0; s < grid.n_slots(); ++s) {
        if (rates.attempts[s] > 0) {
            rates.rate[s] = double(rates.pickups[s]) / double(rates.attempts[s]);
        }
    }
    return rates;
}

std::vector<GapEvent> dropout_gap_scan(const Trajectory& traj, int gap_weeks,
                                       const StatusSet& technical_success) {
    std::vector<GapEvent> events;
    if (gap_weeks <= 0) throw DataError("dropout_gap_scan: gap_weeks must be positive");
    std::size_t i = 0;
    while (i < traj.weeks.size()) {
        if (traj.weeks[i].picked) {
            ++i;
            continue;
        }
        std::size_t j = i;
        long long attempts = 0;
        long long successes = 0;
        while (j < traj.weeks.size() && !traj.weeks[j].picked) {
            attempts += traj.weeks[j].n_attempts;
            for (int s = 0; s < kNumStatuses; ++s) {
                if (technical_success.contains(TechnicalStatus(s))) {
                    successes += traj.weeks[j].status_counts[s];
                }
            }
            ++j;
        }
        const int run = int(j - i);
        if (run >= gap_weeks) {
            events.push_back({traj.weeks[i].message_index, run, attempts > 0 && successes == 0});
        }
        i = j;
    }
    return events;
}

}  // namespace ivrlens::analytics
