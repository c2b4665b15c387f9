#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ivrlens/dates.hpp"

namespace ivrlens {

// Outcome of one dialing attempt as logged by the IVR platform.
enum class TechnicalStatus : int {
    PickedUp = 0,
    Busy = 1,
    SwitchedOff = 2,
    OutOfNetwork = 3,
    OtherFailure = 4,
};

constexpr int kNumStatuses = 5;
constexpr int kMaxMessageIndex = 72;
constexpr int kMaxAttempts = 9;
constexpr int kMaxAttemptDays = 4;

// CSV wire tokens, in enum order.
const char* status_token(TechnicalStatus s);
std::optional<TechnicalStatus> parse_status_token(std::string_view token);

// Which statuses count as a technical success (the network delivered the
// call to the line). Default: PickedUp and Busy.
struct StatusSet {
    std::array<bool, kNumStatuses> member{true, true, false, false, false};

    bool contains(TechnicalStatus s) const { return member[int(s)]; }
};

// One dialing attempt to one beneficiary.
struct CallAttemptRecord {
    std::string beneficiary_id;
    int message_index = 0;   // program week, 1..72
    int attempt_number = 0;  // 1..9 within the week
    Date attempt_date{};
    int attempt_time = 0;  // seconds since midnight
    TechnicalStatus status = TechnicalStatus::OtherFailure;
    double duration_seconds = 0.0;  // > 0 only when picked up
    std::optional<int> gestation_week;  // passthrough, unused by models

    bool operator==(const CallAttemptRecord&) const = default;
};

// Per-beneficiary per-program-week rollup. The 7 model features are
// total_duration_seconds, n_attempts and the 5 status counts; the remaining
// fields serve the cohort analyses.
struct WeeklySummary {
    std::string beneficiary_id;
    int message_index = 0;
    double total_duration_seconds = 0.0;
    int n_attempts = 0;
    std::array<int, kNumStatuses> status_counts{};
    bool picked = false;
    bool engaged = false;
    std::optional<int> pickup_attempt_day;     // 1..4, day of first pickup
    std::optional<int> first_pickup_attempt;   // 1..9, attempt of first pickup
    std::optional<int> pickup_slot;            // grid slot of first pickup
    std::optional<int> pickup_weekday;         // 0=Monday
    double technical_success_ratio = 0.0;      // successful attempts / n_attempts
    std::optional<Date> first_attempt_date;    // calendar anchor for the week

    bool operator==(const WeeklySummary&) const = default;
};

// Contiguous weekly history of one beneficiary; gap weeks inside the
// observed span are explicit zero-attempt summaries.
struct Trajectory {
    std::string beneficiary_id;
    std::vector<WeeklySummary> weeks;  // ascending message_index, no gaps

    int first_week() const { return weeks.empty() ? 0 : weeks.front().message_index; }
    int last_week() const { return weeks.empty() ? 0 : weeks.back().message_index; }
    int enrollment_span() const { return int(weeks.size()); }

    bool operator==(const Trajectory&) const = default;
};

}  // namespace ivrlens
