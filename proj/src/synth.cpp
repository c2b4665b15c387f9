#include "ivrlens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <thread>

#include "ivrlens/error.hpp"
#include "ivrlens/ingest.hpp"
#include "ivrlens/rng.hpp"

namespace ivrlens::synth {

namespace {

// Stream tags for counter-based draws; one per decision kind.
enum Purpose : std::uint64_t {
    kLen = 1,
    kStart = 2,
    kSlot = 3,
    kTime = 4,
    kFail = 5,
    kFailKind = 6,
    kPick = 7,
    kEngage = 8,
    kDuration = 9,
};

constexpr std::uint64_t kSynthDomain = 0x53594E5448ULL;  // distinct from other seed uses

double attempt_draw(const CohortConfig& cfg, std::uint64_t ordinal, int week, int attempt,
                    Purpose purpose) {
    return uniform01({cfg.seed, kSynthDomain, ordinal, std::uint64_t(week),
                      std::uint64_t(attempt), std::uint64_t(purpose)});
}

int categorical(const std::vector<double>& weights, double u) {
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double target = u * total;
    double running = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        running += weights[i];
        if (target < running) return int(i);
    }
    return int(weights.size()) - 1;
}

// Round-robin split of attempts over calendar days, front-loaded:
// 9 attempts over 4 days -> days 0,0,0,1,1,2,2,3,3.
int day_of_attempt(int attempt_number, int max_attempts, int attempt_days) {
    int base = max_attempts / attempt_days;
    int extra = max_attempts % attempt_days;
    int idx = attempt_number - 1;
    int boundary = extra * (base + 1);
    if (idx < boundary) return idx / (base + 1);
    return extra + (idx - boundary) / base;
}

}  // namespace

void ArchetypeConfig::validate(int n_slots) const {
    auto in01 = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (name.empty()) throw DataError("archetype needs a name");
    if (!in01(pickup_prob_per_attempt) || !in01(engagement_prob_given_pickup) ||
        !in01(technical_failure_prob)) {
        throw DataError("archetype " + name + ": probabilities must lie in [0,1]");
    }
    if (int(slot_preference.size()) != n_slots) {
        throw DataError("archetype " + name + ": slot_preference needs " +
                        std::to_string(n_slots) + " entries");
    }
    double sum = 0.0;
    for (double p : slot_preference) {
        if (!in01(p)) throw DataError("archetype " + name + ": slot preference outside [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw DataError("archetype " + name + ": slot_preference must sum to 1");
    }
    if (trajectory_length_weeks.min_weeks < 1 ||
        trajectory_length_weeks.max_weeks > kMaxMessageIndex ||
        trajectory_length_weeks.min_weeks > trajectory_length_weeks.max_weeks) {
        throw DataError("archetype " + name + ": bad trajectory length range");
    }
    if (holiday_dip && (holiday_dip->length_weeks < 0 || holiday_dip->pickup_multiplier < 0.0)) {
        throw DataError("archetype " + name + ": bad holiday dip");
    }
    for (double w : failure_mix) {
        if (w < 0.0) throw DataError("archetype " + name + ": negative failure weight");
    }
    if (failure_mix[0] + failure_mix[1] + failure_mix[2] <= 0.0) {
        throw DataError("archetype " + name + ": failure_mix sums to zero");
    }
}

int CohortConfig::total_beneficiaries() const {
    int total = 0;
    for (const auto& [cfg, count] : archetypes) total += count;
    return total;
}

void CohortConfig::validate() const {
    slot_grid.validate();
    if (max_attempts < 1 || max_attempts > kMaxAttempts) {
        throw DataError("max_attempts must lie in [1," + std::to_string(kMaxAttempts) + "]");
    }
    if (attempt_days < 1 || attempt_days > kMaxAttemptDays) {
        throw DataError("attempt_days must lie in [1," + std::to_string(kMaxAttemptDays) + "]");
    }
    if (start_spread_days < 1) throw DataError("start_spread_days must be positive");
    for (const auto& [cfg, count] : archetypes) {
        if (count < 0) throw DataError("archetype " + cfg.name + ": negative count");
        cfg.validate(slot_grid.n_slots());
    }
    if (total_beneficiaries() == 0) throw DataError("cohort has zero beneficiaries");
}

std::string beneficiary_name(std::uint64_t ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "B%06llu", static_cast<unsigned long long>(ordinal + 1));
    return buf;
}

std::vector<CallAttemptRecord> generate_beneficiary(const CohortConfig& config,
                                                    const ArchetypeConfig& archetype,
                                                    std::uint64_t ordinal,
                                                    const std::string& id) {
    const int n_slots = config.slot_grid.n_slots();
    const double max_pref =
        *std::max_element(archetype.slot_preference.begin(), archetype.slot_preference.end());
    const int slot_seconds = config.slot_grid.slot_hours * 3600;
    const int grid_start = config.slot_grid.start_hour * 3600;

    const auto& len = archetype.trajectory_length_weeks;
    const int span = len.max_weeks - len.min_weeks + 1;
    const int n_weeks =
        len.min_weeks + int(attempt_draw(config, ordinal, 0, 0, kLen) * span);
    const Date start_date =
        config.base_start_date +
        std::chrono::days(int(attempt_draw(config, ordinal, 0, 0, kStart) * config.start_spread_days));

    std::vector<double> failure_weights(archetype.failure_mix.begin(), archetype.failure_mix.end());

    std::vector<CallAttemptRecord> records;
    records.reserve(std::size_t(n_weeks) * 2);
    for (int week = 1; week <= n_weeks; ++week) {
        double multiplier = 1.0;
        if (archetype.holiday_dip) {
            const auto& dip = *archetype.holiday_dip;
            if (week >= dip.start_week && week < dip.start_week + dip.length_weeks) {
                multiplier = dip.pickup_multiplier;
            }
        }
        for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
            CallAttemptRecord rec;
            rec.beneficiary_id = id;
            rec.message_index = week;
            rec.attempt_number = attempt;
            const int day = day_of_attempt(attempt, config.max_attempts, config.attempt_days);
            rec.attempt_date = start_date + std::chrono::days(7 * (week - 1) + day);

            const int slot =
                categorical(archetype.slot_preference, attempt_draw(config, ordinal, week, attempt, kSlot));
            const int offset =
                std::min(slot_seconds - 1,
                         int(attempt_draw(config, ordinal, week, attempt, kTime) * slot_seconds));
            rec.attempt_time = grid_start + slot * slot_seconds + offset;

            bool picked = false;
            if (attempt_draw(config, ordinal, week, attempt, kFail) <
                archetype.technical_failure_prob) {
                const int kind = categorical(
                    failure_weights, attempt_draw(config, ordinal, week, attempt, kFailKind));
                rec.status = TechnicalStatus(int(TechnicalStatus::SwitchedOff) + kind);
            } else {
                const double affinity = archetype.slot_preference[std::size_t(slot)] / max_pref;
                const double p = std::clamp(
                    archetype.pickup_prob_per_attempt * affinity * multiplier, 0.0, 1.0);
                if (attempt_draw(config, ordinal, week, attempt, kPick) < p) {
                    picked = true;
                    rec.status = TechnicalStatus::PickedUp;
                    const bool engaged = attempt_draw(config, ordinal, week, attempt, kEngage) <
                                         archetype.engagement_prob_given_pickup;
                    const double u = attempt_draw(config, ordinal, week, attempt, kDuration);
                    // engaged: (30, 90]; non-engaged: (0, 30]
                    rec.duration_seconds = engaged ? 30.0 + (1.0 - u) * 60.0 : (1.0 - u) * 30.0;
                } else {
                    rec.status = TechnicalStatus::Busy;
                }
            }
            records.push_back(std::move(rec));
            if (picked) break;
        }
    }
    return records;
}

namespace {

// Runs fn(ordinal) for each beneficiary, chunked over jobs threads. Results
// land in preassigned slots so thread count never affects output.
template <typename Fn>
void for_each_beneficiary(int total, int jobs, Fn&& fn) {
    jobs = std::max(1, std::min(jobs, total));
    if (jobs == 1) {
        for (int i = 0; i < total; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(std::size_t(jobs));
    const int chunk = (total + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j) {
        const int begin = j * chunk;
        const int end = std::min(total, begin + chunk);
        if (begin >= end) break;
        workers.emplace_back([begin, end, &fn] {
            for (int i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& w : workers) w.join();
}

const ArchetypeConfig& archetype_of(const CohortConfig& config, int ordinal, int* block_out) {
    int offset = 0;
    for (std::size_t a = 0; a < config.archetypes.size(); ++a) {
        if (ordinal < offset + config.archetypes[a].second) {
            if (block_out) *block_out = int(a);
            return config.archetypes[a].first;
        }
        offset += config.archetypes[a].second;
    }
    throw DataError("beneficiary ordinal out of range");
}

}  // namespace

GeneratedCohort generate_cohort(const CohortConfig& config, int jobs) {
    config.validate();
    const int total = config.total_beneficiaries();

    std::vector<std::vector<CallAttemptRecord>> per_beneficiary(std::size_t(total));
    GeneratedCohort cohort;
    cohort.beneficiaries.resize(std::size_t(total));
    for_each_beneficiary(total, jobs, [&](int i) {
        const auto& archetype = archetype_of(config, i, nullptr);
        std::string id = beneficiary_name(std::uint64_t(i));
        per_beneficiary[std::size_t(i)] =
            generate_beneficiary(config, archetype, std::uint64_t(i), id);
        cohort.beneficiaries[std::size_t(i)] = {std::move(id), archetype.name};
    });

    std::size_t n_records = 0;
    for (const auto& recs : per_beneficiary) n_records += recs.size();
    cohort.records.reserve(n_records);
    for (auto& recs : per_beneficiary) {
        std::move(recs.begin(), recs.end(), std::back_inserter(cohort.records));
    }
    return cohort;
}

void write_cohort_csv(const CohortConfig& config, std::ostream& records_out,
                      std::ostream* assignments_out, int jobs) {
    config.validate();
    const int total = config.total_beneficiaries();
    ingest::write_record_header(records_out, /*with_gestation=*/false);
    if (assignments_out) *assignments_out << "beneficiary_id,archetype\n";

    // Generate in parallel batches, write sequentially in ordinal order.
    const int batch = 512;
    for (int begin = 0; begin < total; begin += batch) {
        const int end = std::min(total, begin + batch);
        std::vector<std::vector<CallAttemptRecord>> rows(std::size_t(end - begin));
        std::vector<const ArchetypeConfig*> archetypes(std::size_t(end - begin));
        for_each_beneficiary(end - begin, jobs, [&](int k) {
            const int i = begin + k;
            const auto& archetype = archetype_of(config, i, nullptr);
            archetypes[std::size_t(k)] = &archetype;
            rows[std::size_t(k)] = generate_beneficiary(config, archetype, std::uint64_t(i),
                                                        beneficiary_name(std::uint64_t(i)));
        });
        for (int k = 0; k < end - begin; ++k) {
            ingest::append_record_rows(records_out, rows[std::size_t(k)], false);
            if (assignments_out) {
                *assignments_out << beneficiary_name(std::uint64_t(begin + k)) << ','
                                 << archetypes[std::size_t(k)]->name << '\n';
            }
        }
    }
}

std::vector<int> apportion_counts(const std::vector<long long>& weights, int total) {
    long long weight_sum = std::accumulate(weights.begin(), weights.end(), 0LL);
    if (weight_sum <= 0 || total < 0) throw DataError("apportion_counts: bad inputs");
    std::vector<int> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double exact = double(total) * double(weights[i]) / double(weight_sum);
        counts[i] = int(exact);
        assigned += counts[i];
        remainders.push_back({exact - double(counts[i]), i});
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int r = 0; r < total - assigned; ++r) counts[remainders[std::size_t(r)].second] += 1;
    return counts;
}

CohortConfig default_bucket_archetypes(int total_beneficiaries, std::uint64_t seed) {
    CohortConfig config;
    config.seed = seed;
    config.base_start_date = *parse_date("2021-01-04");
    config.start_spread_days = 180;

    ArchetypeConfig hphe;
    hphe.name = "HPHE";
    hphe.pickup_prob_per_attempt = 0.60;
    hphe.engagement_prob_given_pickup = 0.93;
    hphe.technical_failure_prob = 0.14;
    hphe.slot_preference = {0.26, 0.12, 0.08, 0.08, 0.08, 0.21, 0.17};
    hphe.trajectory_length_weeks = {60, 72};

    ArchetypeConfig hple;
    hple.name = "HPLE";
    hple.pickup_prob_per_attempt = 0.62;
    hple.engagement_prob_given_pickup = 0.10;
    hple.technical_failure_prob = 0.12;
    hple.slot_preference = {0.24, 0.14, 0.10, 0.10, 0.10, 0.16, 0.16};
    hple.trajectory_length_weeks = {58, 72};
    hple.holiday_dip = HolidayDip{44, 3, 0.10};

    ArchetypeConfig lphe;
    lphe.name = "LPHE";
    lphe.pickup_prob_per_attempt = 0.12;
    lphe.engagement_prob_given_pickup = 0.97;
    lphe.technical_failure_prob = 0.45;
    lphe.slot_preference = {0.23, 0.17, 0.04, 0.04, 0.04, 0.19, 0.29};
    lphe.trajectory_length_weeks = {26, 36};

    ArchetypeConfig lple;
    lple.name = "LPLE";
    lple.pickup_prob_per_attempt = 0.28;
    lple.engagement_prob_given_pickup = 0.15;
    lple.technical_failure_prob = 0.80;
    lple.slot_preference = {0.31, 0.07, 0.06, 0.06, 0.06, 0.11, 0.33};
    lple.trajectory_length_weeks = {10, 20};

    const std::vector<long long> table_weights{1212, 2651, 1421, 6087};
    const auto counts = apportion_counts(table_weights, total_beneficiaries);
    config.archetypes = {{hphe, counts[0]}, {hple, counts[1]}, {lphe, counts[2]}, {lple, counts[3]}};
    return config;
}

namespace {

nlohmann::json archetype_to_json(const ArchetypeConfig& a) {
    nlohmann::json j{
        {"name", a.name},
        {"pickup_prob_per_attempt", a.pickup_prob_per_attempt},
        {"engagement_prob_given_pickup", a.engagement_prob_given_pickup},
        {"slot_preference", a.slot_preference},
        {"technical_failure_prob", a.technical_failure_prob},
        {"trajectory_length_weeks",
         {{"min", a.trajectory_length_weeks.min_weeks}, {"max", a.trajectory_length_weeks.max_weeks}}},
    };
    if (a.holiday_dip) {
        j["holiday_dip"] = {{"start_week", a.holiday_dip->start_week},
                            {"length_weeks", a.holiday_dip->length_weeks},
                            {"pickup_multiplier", a.holiday_dip->pickup_multiplier}};
    }
    if (a.failure_mix != std::array<double, 3>{1.0, 1.0, 1.0}) {
        j["failure_mix"] = a.failure_mix;
    }
    return j;
}

ArchetypeConfig archetype_from_json(const nlohmann::json& j) {
    ArchetypeConfig a;
    a.name = j.at("name").get<std::string>();
    a.pickup_prob_per_attempt = j.at("pickup_prob_per_attempt").get<double>();
    a.engagement_prob_given_pickup = j.at("engagement_prob_given_pickup").get<double>();
    a.slot_preference = j.at("slot_preference").get<std::vector<double>>();
    a.technical_failure_prob = j.at("technical_failure_prob").get<double>();
    a.trajectory_length_weeks.min_weeks = j.at("trajectory_length_weeks").at("min").get<int>();
    a.trajectory_length_weeks.max_weeks = j.at("trajectory_length_weeks").at("max").get<int>();
    if (j.contains("holiday_dip")) {
        const auto& d = j.at("holiday_dip");
        a.holiday_dip = HolidayDip{d.at("start_week").get<int>(), d.at("length_weeks").get<int>(),
                                   d.at("pickup_multiplier").get<double>()};
    }
    if (j.contains("failure_mix")) {
        a.failure_mix = j.at("failure_mix").get<std::array<double, 3>>();
    }
    return a;
}

}  // namespace

nlohmann::json cohort_config_to_json(const CohortConfig& config) {
    nlohmann::json archetypes = nlohmann::json::array();
    for (const auto& [a, count] : config.archetypes) {
        auto j = archetype_to_json(a);
        j["count"] = count;
        archetypes.push_back(std::move(j));
    }
    return nlohmann::json{
        {"seed", config.seed},
        {"max_attempts", config.max_attempts},
        {"attempt_days", config.attempt_days},
        {"slot_grid",
         {{"start_hour", config.slot_grid.start_hour},
          {"end_hour", config.slot_grid.end_hour},
          {"slot_hours", config.slot_grid.slot_hours}}},
        {"base_start_date", format_date(config.base_start_date)},
        {"start_spread_days", config.start_spread_days},
        {"archetypes", archetypes},
    };
}

CohortConfig cohort_config_from_json(const nlohmann::json& j) {
    CohortConfig config;
    config.seed = j.value("seed", std::uint64_t{1});
    config.max_attempts = j.value("max_attempts", kMaxAttempts);
    config.attempt_days = j.value("attempt_days", kMaxAttemptDays);
    if (j.contains("slot_grid")) {
        const auto& g = j.at("slot_grid");
        config.slot_grid.start_hour = g.value("start_hour", 8);
        config.slot_grid.end_hour = g.value("end_hour", 22);
        config.slot_grid.slot_hours = g.value("slot_hours", 2);
    }
    if (j.contains("base_start_date")) {
        auto d = parse_date(j.at("base_start_date").get<std::string>());
        if (!d) throw DataError("bad base_start_date");
        config.base_start_date = *d;
    } else {
        config.base_start_date = *parse_date("2021-01-04");
    }
    config.start_spread_days = j.value("start_spread_days", 180);

    int scale_to = j.value("total_beneficiaries", 0);
    std::vector<long long> weights;
    for (const auto& aj : j.at("archetypes")) {
        auto a = archetype_from_json(aj);
        int count = aj.value("count", 0);
        weights.push_back(count);
        config.archetypes.push_back({std::move(a), count});
    }
    if (scale_to > 0) {
        auto counts = apportion_counts(weights, scale_to);
        for (std::size_t i = 0; i < counts.size(); ++i) config.archetypes[i].second = counts[i];
    }
    config.validate();
    return config;
}

CohortConfig load_cohort_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cohort config: " + path);
    nlohmann::json j;
    in >> j;
    return cohort_config_from_json(j);
}

}  // namespace ivrlens::synth
