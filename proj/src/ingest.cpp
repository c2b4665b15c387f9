#include "ivrlens/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "ivrlens/csv.hpp"
#include "ivrlens/error.hpp"

#include "json.hpp"

namespace ivrlens {

const char* status_token(TechnicalStatus s) {
    switch (s) {
        case TechnicalStatus::PickedUp: return "PICKED_UP";
        case TechnicalStatus::Busy: return "BUSY";
        case TechnicalStatus::SwitchedOff: return "SWITCHED_OFF";
        case TechnicalStatus::OutOfNetwork: return "OUT_OF_NETWORK";
        case TechnicalStatus::OtherFailure: return "OTHER";
    }
    return "OTHER";
}

std::optional<TechnicalStatus> parse_status_token(std::string_view token) {
    for (int i = 0; i < kNumStatuses; ++i) {
        if (token == status_token(TechnicalStatus(i))) return TechnicalStatus(i);
    }
    return std::nullopt;
}

}  // namespace ivrlens

namespace ivrlens::ingest {

namespace {

constexpr std::string_view kRecordHeader =
    "beneficiary_id,message_index,attempt_number,attempt_date,attempt_time,status,duration_seconds";

// Chronological order within a week; attempt_number breaks exact ties.
bool attempt_before(const CallAttemptRecord& a, const CallAttemptRecord& b) {
    if (a.attempt_date != b.attempt_date) return a.attempt_date < b.attempt_date;
    if (a.attempt_time != b.attempt_time) return a.attempt_time < b.attempt_time;
    return a.attempt_number < b.attempt_number;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

ParseResult parse_call_records(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty input: missing CSV header");
    line = strip_cr(line);

    bool has_gestation = false;
    if (line == kRecordHeader) {
        has_gestation = false;
    } else if (line == std::string(kRecordHeader) + ",gestation_week") {
        has_gestation = true;
    } else {
        throw DataError("unrecognized CSV header: " + line);
    }

    ParseResult result;
    const std::size_t expected_fields = has_gestation ? 8 : 7;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = csv::split_fields(line);
        auto reject = [&](std::string reason) {
            result.row_errors.push_back({line_no, std::move(reason)});
        };
        if (fields.size() != expected_fields) {
            reject("expected " + std::to_string(expected_fields) + " fields, got " +
                   std::to_string(fields.size()));
            continue;
        }

        CallAttemptRecord rec;
        rec.beneficiary_id = std::string(fields[0]);
        if (rec.beneficiary_id.empty()) {
            reject("empty beneficiary_id");
            continue;
        }
        auto msg = csv::parse_int(fields[1]);
        if (!msg || *msg < 1 || *msg > kMaxMessageIndex) {
            reject("message_index out of range [1," + std::to_string(kMaxMessageIndex) +
                   "]: " + std::string(fields[1]));
            continue;
        }
        rec.message_index = int(*msg);
        auto att = csv::parse_int(fields[2]);
        if (!att || *att < 1 || *att > kMaxAttempts) {
            reject("attempt_number out of range [1," + std::to_string(kMaxAttempts) +
                   "]: " + std::string(fields[2]));
            continue;
        }
        rec.attempt_number = int(*att);
        auto date = parse_date(fields[3]);
        if (!date) {
            reject("bad attempt_date: " + std::string(fields[3]));
            continue;
        }
        rec.attempt_date = *date;
        auto time = parse_time_of_day(fields[4]);
        if (!time) {
            reject("bad attempt_time: " + std::string(fields[4]));
            continue;
        }
        rec.attempt_time = *time;
        auto status = parse_status_token(fields[5]);
        if (!status) {
            reject("unknown status token: " + std::string(fields[5]));
            continue;
        }
        rec.status = *status;
        auto dur = csv::parse_double(fields[6]);
        if (!dur || *dur < 0.0 || !std::isfinite(*dur)) {
            reject("bad duration_seconds: " + std::string(fields[6]));
            continue;
        }
        rec.duration_seconds = *dur;
        if (rec.duration_seconds > 0.0 && rec.status != TechnicalStatus::PickedUp) {
            reject("duration > 0 with status " + std::string(status_token(rec.status)));
            continue;
        }
        if (has_gestation && !fields[7].empty()) {
            auto gw = csv::parse_int(fields[7]);
            if (!gw) {
                reject("bad gestation_week: " + std::string(fields[7]));
                continue;
            }
            rec.gestation_week = int(*gw);
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

ParseResult parse_call_records_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open input CSV: " + path);
    return parse_call_records(in);
}

WeeklySummary summarize_week(std::span<const CallAttemptRecord> attempts,
                             const IngestOptions& options) {
    WeeklySummary summary;
    if (attempts.empty()) return summary;

    std::vector<CallAttemptRecord> sorted(attempts.begin(), attempts.end());
    std::sort(sorted.begin(), sorted.end(), attempt_before);

    summary.beneficiary_id = sorted.front().beneficiary_id;
    summary.message_index = sorted.front().message_index;
    summary.first_attempt_date = sorted.front().attempt_date;
    summary.n_attempts = int(sorted.size());

    std::vector<Date> distinct_dates;
    int successes = 0;
    for (const auto& rec : sorted) {
        summary.status_counts[int(rec.status)] += 1;
        if (options.technical_success.contains(rec.status)) ++successes;
        if (distinct_dates.empty() || distinct_dates.back() != rec.attempt_date) {
            distinct_dates.push_back(rec.attempt_date);
        }
        if (rec.status == TechnicalStatus::PickedUp) {
            summary.total_duration_seconds += rec.duration_seconds;
            if (!summary.picked) {
                summary.picked = true;
                summary.first_pickup_attempt = rec.attempt_number;
                // Dates are visited in ascending order, so the pickup date is
                // the latest distinct date seen so far.
                summary.pickup_attempt_day = int(distinct_dates.size());
                summary.pickup_slot = assign_time_slot(rec.attempt_time, options.grid);
                summary.pickup_weekday = weekday_monday0(rec.attempt_date);
            }
        }
    }
    summary.engaged = summary.total_duration_seconds > options.engagement_threshold_seconds;
    summary.technical_success_ratio = double(successes) / double(summary.n_attempts);
    return summary;
}

std::map<std::string, Trajectory> build_trajectories(std::span<const CallAttemptRecord> records,
                                                     const IngestOptions& options) {
    options.grid.validate();

    // (beneficiary, week) -> attempts
    std::map<std::string, std::map<int, std::vector<CallAttemptRecord>>> grouped;
    for (const auto& rec : records) {
        grouped[rec.beneficiary_id][rec.message_index].push_back(rec);
    }

    std::map<std::string, Trajectory> out;
    for (auto& [id, weeks] : grouped) {
        Trajectory traj;
        traj.beneficiary_id = id;
        int first = weeks.begin()->first;
        int last = weeks.rbegin()->first;
        for (int w = first; w <= last; ++w) {
            auto it = weeks.find(w);
            if (it == weeks.end()) {
                WeeklySummary gap;
                gap.beneficiary_id = id;
                gap.message_index = w;
                traj.weeks.push_back(std::move(gap));
                continue;
            }
            auto& attempts = it->second;
            std::set<int> seen;
            std::set<Date> dates;
            for (const auto& rec : attempts) {
                if (!seen.insert(rec.attempt_number).second) {
                    throw DataError("duplicate attempt (" + id + ", week " + std::to_string(w) +
                                    ", attempt " + std::to_string(rec.attempt_number) + ")");
                }
                dates.insert(rec.attempt_date);
            }
            if (int(dates.size()) > kMaxAttemptDays) {
                throw DataError("attempts for (" + id + ", week " + std::to_string(w) + ") span " +
                                std::to_string(dates.size()) + " dates (max " +
                                std::to_string(kMaxAttemptDays) + ")");
            }
            traj.weeks.push_back(summarize_week(attempts, options));
        }
        // Weekly cadence: give zero-attempt gap weeks a calendar anchor
        // extrapolated from the previous observed week.
        for (std::size_t i = 1; i < traj.weeks.size(); ++i) {
            if (!traj.weeks[i].first_attempt_date && traj.weeks[i - 1].first_attempt_date) {
                traj.weeks[i].first_attempt_date =
                    *traj.weeks[i - 1].first_attempt_date + std::chrono::days(7);
            }
        }
        out.emplace(id, std::move(traj));
    }
    return out;
}

void write_record_header(std::ostream& out, bool with_gestation) {
    out << kRecordHeader;
    if (with_gestation) out << ",gestation_week";
    out << '\n';
}

void append_record_rows(std::ostream& out, std::span<const CallAttemptRecord> records,
                        bool with_gestation) {
    std::string row;
    for (const auto& rec : records) {
        row.clear();
        row += rec.beneficiary_id;
        row += ',';
        row += std::to_string(rec.message_index);
        row += ',';
        row += std::to_string(rec.attempt_number);
        row += ',';
        row += format_date(rec.attempt_date);
        row += ',';
        row += format_time_of_day(rec.attempt_time);
        row += ',';
        row += status_token(rec.status);
        row += ',';
        row += csv::format_double(rec.duration_seconds);
        if (with_gestation) {
            row += ',';
            if (rec.gestation_week) row += std::to_string(*rec.gestation_week);
        }
        row += '\n';
        out << row;
    }
}

void write_records_csv(std::ostream& out, std::span<const CallAttemptRecord> records) {
    bool any_gestation = std::any_of(records.begin(), records.end(),
                                     [](const auto& r) { return r.gestation_week.has_value(); });
    write_record_header(out, any_gestation);
    append_record_rows(out, records, any_gestation);
}

namespace {

constexpr std::string_view kWeeklyHeader =
    "beneficiary_id,message_index,total_duration_seconds,n_attempts,n_picked_up,n_busy,"
    "n_switched_off,n_out_of_network,n_other,picked,engaged,pickup_attempt_day,"
    "first_pickup_attempt,pickup_slot,pickup_weekday,technical_success_ratio,first_attempt_date";

template <typename T>
std::string opt_to_field(const std::optional<T>& v) {
    return v ? std::to_string(*v) : std::string();
}

}  // namespace

void write_weekly_csv(std::ostream& out, const std::map<std::string, Trajectory>& trajectories) {
    out << kWeeklyHeader << '\n';
    for (const auto& [id, traj] : trajectories) {
        for (const auto& w : traj.weeks) {
            std::vector<std::string> f;
            f.reserve(17);
            f.push_back(id);
            f.push_back(std::to_string(w.message_index));
            f.push_back(csv::format_double(w.total_duration_seconds));
            f.push_back(std::to_string(w.n_attempts));
            for (int s = 0; s < kNumStatuses; ++s) f.push_back(std::to_string(w.status_counts[s]));
            f.push_back(w.picked ? "1" : "0");
            f.push_back(w.engaged ? "1" : "0");
            f.push_back(opt_to_field(w.pickup_attempt_day));
            f.push_back(opt_to_field(w.first_pickup_attempt));
            f.push_back(opt_to_field(w.pickup_slot));
            f.push_back(opt_to_field(w.pickup_weekday));
            f.push_back(csv::format_double(w.technical_success_ratio));
            f.push_back(w.first_attempt_date ? format_date(*w.first_attempt_date) : std::string());
            out << csv::join_row(f);
        }
    }
}

std::map<std::string, Trajectory> read_weekly_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != kWeeklyHeader) {
        throw DataError("unrecognized weekly summary header");
    }
    std::map<std::string, Trajectory> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto f = csv::split_fields(line);
        if (f.size() != 17) {
            throw DataError("weekly summary line " + std::to_string(line_no) + ": bad field count");
        }
        auto fail = [&](const char* what) -> DataError {
            return DataError("weekly summary line " + std::to_string(line_no) + ": " + what);
        };
        auto req_int = [&](std::string_view s) {
            auto v = csv::parse_int(s);
            if (!v) throw fail("bad integer");
            return int(*v);
        };
        auto opt_int = [&](std::string_view s) -> std::optional<int> {
            if (s.empty()) return std::nullopt;
            return req_int(s);
        };
        WeeklySummary w;
        w.beneficiary_id = std::string(f[0]);
        w.message_index = req_int(f[1]);
        auto dur = csv::parse_double(f[2]);
        if (!dur) throw fail("bad duration");
        w.total_duration_seconds = *dur;
        w.n_attempts = req_int(f[3]);
        for (int s = 0; s < kNumStatuses; ++s) w.status_counts[s] = req_int(f[4 + s]);
        w.picked = req_int(f[9]) != 0;
        w.engaged = req_int(f[10]) != 0;
        w.pickup_attempt_day = opt_int(f[11]);
        w.first_pickup_attempt = opt_int(f[12]);
        w.pickup_slot = opt_int(f[13]);
        w.pickup_weekday = opt_int(f[14]);
        auto ratio = csv::parse_double(f[15]);
        if (!ratio) throw fail("bad ratio");
        w.technical_success_ratio = *ratio;
        if (!f[16].empty()) {
            auto d = parse_date(f[16]);
            if (!d) throw fail("bad date");
            w.first_attempt_date = *d;
        }
        auto& traj = out[w.beneficiary_id];
        traj.beneficiary_id = w.beneficiary_id;
        traj.weeks.push_back(std::move(w));
    }
    for (auto& [id, traj] : out) {
        std::sort(traj.weeks.begin(), traj.weeks.end(),
                  [](const auto& a, const auto& b) { return a.message_index < b.message_index; });
    }
    return out;
}

void write_row_errors_jsonl(std::ostream& out, std::span<const RowError> errors) {
    for (const auto& e : errors) {
        nlohmann::json j{{"line", e.line}, {"reason", e.reason}};
        out << j.dump() << '\n';
    }
}

}  // namespace ivrlens::ingest
