#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ivrlens/records.hpp"
#include "ivrlens/slots.hpp"

namespace ivrlens::ingest {

// Expected CSV header (gestation_week column optional):
// beneficiary_id,message_index,attempt_number,attempt_date,attempt_time,status,duration_seconds[,gestation_week]

struct RowError {
    int line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct ParseResult {
    std::vector<CallAttemptRecord> records;  // input order
    std::vector<RowError> row_errors;
};

struct IngestOptions {
    double engagement_threshold_seconds = 30.0;  // engaged iff duration strictly above
    TimeSlotGrid grid{};
    StatusSet technical_success{};
};

// Parses and validates the call-record CSV. Malformed rows are rejected and
// reported with line numbers; a missing or wrong header is fatal (DataError).
ParseResult parse_call_records(std::istream& in);
ParseResult parse_call_records_file(const std::string& path);

// Rolls up all attempts sharing one (beneficiary, week). An empty attempt
// list yields a zero-attempt summary.
WeeklySummary summarize_week(std::span<const CallAttemptRecord> attempts,
                             const IngestOptions& options = {});

// Groups records per beneficiary into contiguous weekly trajectories,
// zero-filling unobserved weeks inside the span. Duplicate
// (beneficiary, week, attempt) triples are fatal.
std::map<std::string, Trajectory> build_trajectories(std::span<const CallAttemptRecord> records,
                                                     const IngestOptions& options = {});

// Call-record CSV output (exact schema accepted by parse_call_records).
void write_records_csv(std::ostream& out, std::span<const CallAttemptRecord> records);
void write_record_header(std::ostream& out, bool with_gestation);
void append_record_rows(std::ostream& out, std::span<const CallAttemptRecord> records,
                        bool with_gestation);

// Weekly-summary CSV: full-fidelity export/import of trajectories.
void write_weekly_csv(std::ostream& out, const std::map<std::string, Trajectory>& trajectories);
std::map<std::string, Trajectory> read_weekly_csv(std::istream& in);

// Row-error report as JSON lines: {"line":N,"reason":"..."}.
void write_row_errors_jsonl(std::ostream& out, std::span<const RowError> errors);

}  // namespace ivrlens::ingest
