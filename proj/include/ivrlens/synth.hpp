#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ivrlens/records.hpp"
#include "ivrlens/slots.hpp"

#include "json.hpp"

namespace ivrlens::synth {

// Temporary dip in pickup probability (festive periods etc), expressed in
// program weeks.
struct HolidayDip {
    int start_week = 0;
    int length_weeks = 0;
    double pickup_multiplier = 1.0;
};

struct LengthSpec {
    int min_weeks = 1;
    int max_weeks = kMaxMessageIndex;
};

// One behavioral archetype. slot_preference drives when attempts land AND
// scales pickup probability: an attempt in slot s picks up with
// pickup_prob_per_attempt * slot_preference[s]/max(slot_preference), so
// preferred slots carry both more attempts and higher pickup rates.
struct ArchetypeConfig {
    std::string name;
    double pickup_prob_per_attempt = 0.5;
    double engagement_prob_given_pickup = 0.5;
    std::vector<double> slot_preference;  // one entry per grid slot, sums to 1
    double technical_failure_prob = 0.0;
    LengthSpec trajectory_length_weeks{};
    std::optional<HolidayDip> holiday_dip;
    // Relative weights for SwitchedOff / OutOfNetwork / OtherFailure.
    std::array<double, 3> failure_mix{1.0, 1.0, 1.0};

    void validate(int n_slots) const;
};

struct CohortConfig {
    std::uint64_t seed = 1;
    std::vector<std::pair<ArchetypeConfig, int>> archetypes;  // (config, count)
    int max_attempts = kMaxAttempts;
    int attempt_days = kMaxAttemptDays;
    TimeSlotGrid slot_grid{};
    Date base_start_date{};      // earliest enrollment date
    int start_spread_days = 180; // enrollment dates uniform in [base, base+spread)

    int total_beneficiaries() const;
    void validate() const;
};

struct BeneficiaryInfo {
    std::string id;
    std::string archetype;
};

struct GeneratedCohort {
    std::vector<CallAttemptRecord> records;       // beneficiary-ordinal order
    std::vector<BeneficiaryInfo> beneficiaries;   // same order
};

// Four archetypes (HPHE, HPLE, LPHE, LPLE) with counts apportioned
// proportionally to the reference cohort distribution 1212/2651/1421/6087.
CohortConfig default_bucket_archetypes(int total_beneficiaries = 10000,
                                       std::uint64_t seed = 20240501);

// Deterministic for a fixed config; every draw is keyed by
// (seed, beneficiary ordinal, week, attempt), so results are independent of
// partitioning and jobs.
GeneratedCohort generate_cohort(const CohortConfig& config, int jobs = 1);

// All attempts of one beneficiary. ordinal is the 0-based position in the
// cohort; id its printed name.
std::vector<CallAttemptRecord> generate_beneficiary(const CohortConfig& config,
                                                    const ArchetypeConfig& archetype,
                                                    std::uint64_t ordinal, const std::string& id);

// Streams the cohort as ingest-schema CSV without materializing it;
// byte-identical to writing generate_cohort() output. Optionally writes
// "beneficiary_id,archetype" assignments.
void write_cohort_csv(const CohortConfig& config, std::ostream& records_out,
                      std::ostream* assignments_out = nullptr, int jobs = 1);

std::string beneficiary_name(std::uint64_t ordinal);

CohortConfig cohort_config_from_json(const nlohmann::json& j);
nlohmann::json cohort_config_to_json(const CohortConfig& config);
CohortConfig load_cohort_config(const std::string& path);

// Largest-remainder apportionment of total into parts proportional to
// weights; preserves order, ties to the earlier entry.
std::vector<int> apportion_counts(const std::vector<long long>& weights, int total);

}  // namespace ivrlens::synth
