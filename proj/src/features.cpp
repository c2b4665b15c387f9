#include "ivrlens/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "ivrlens/csv.hpp"
#include "ivrlens/error.hpp"
#include "ivrlens/rng.hpp"
#include "ivrlens/slots.hpp"

namespace ivrlens::features {

std::string FeatureSet::tag() const {
    std::string out;
    auto add = [&](const char* name) {
        if (!out.empty()) out += '+';
        out += name;
    };
    if (duration) add("duration");
    if (attempt) add("attempt");
    if (status) add("status");
    if (date) add("date");
    return out;
}

std::optional<FeatureSet> FeatureSet::from_tag(std::string_view tag) {
    FeatureSet fs{false, false, false, false};
    std::size_t start = 0;
    while (start <= tag.size()) {
        std::size_t pos = tag.find('+', start);
        std::string_view part =
            tag.substr(start, pos == std::string_view::npos ? tag.size() - start : pos - start);
        if (part == "duration") fs.duration = true;
        else if (part == "attempt") fs.attempt = true;
        else if (part == "status") fs.status = true;
        else if (part == "date") fs.date = true;
        else return std::nullopt;
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (fs.columns_per_week() == 0) return std::nullopt;
    return fs;
}

void WindowSpec::validate() const {
    if (n_features_weeks < 1) throw DataError("n_features_weeks must be >= 1");
    if (n_offset_weeks < 0) throw DataError("n_offset_weeks must be >= 0");
    if (label_window_weeks != 6) throw DataError("label window is fixed at 6 weeks");
    if (stride_weeks < 1) throw DataError("stride_weeks must be >= 1");
    if (feature_set.columns_per_week() == 0) throw DataError("empty feature set");
}

namespace {

int count_if_weeks(std::span<const WeeklySummary> weeks, bool WeeklySummary::*flag) {
    int n = 0;
    for (const auto& w : weeks) {
        if (w.*flag) ++n;
    }
    return n;
}

void require_label_window(std::span<const WeeklySummary> weeks) {
    if (weeks.size() != 6) {
        throw DataError("label window must contain exactly 6 weeks, got " +
                        std::to_string(weeks.size()));
    }
}

}  // namespace

bool label_low_pickup(std::span<const WeeklySummary> label_weeks) {
    require_label_window(label_weeks);
    return count_if_weeks(label_weeks, &WeeklySummary::picked) < 3;
}

bool label_low_engagement(std::span<const WeeklySummary> label_weeks) {
    require_label_window(label_weeks);
    return count_if_weeks(label_weeks, &WeeklySummary::engaged) < 3;
}

namespace {

void append_week_features(std::vector<double>& out, const WeeklySummary& week,
                          const FeatureSet& fs) {
    if (fs.duration) out.push_back(week.total_duration_seconds);
    if (fs.attempt) out.push_back(double(week.n_attempts));
    if (fs.status) {
        for (int s = 0; s < kNumStatuses; ++s) out.push_back(double(week.status_counts[s]));
    }
    if (fs.date) {
        // Seasonality: week-of-year scaled to [0,1]; slot preference: pickup
        // slot scaled to [0,1], -1 when there was no (in-grid) pickup.
        double woy = week.first_attempt_date ? double(week_of_year(*week.first_attempt_date)) / 52.0
                                             : -1.0;
        out.push_back(woy);
        out.push_back(week.pickup_slot ? double(*week.pickup_slot) / 6.0 : -1.0);
    }
}

}  // namespace

std::vector<FeatureWindow> make_windows(const Trajectory& traj, const WindowSpec& spec) {
    spec.validate();
    const int total = spec.total_weeks();
    const int T = traj.enrollment_span();
    std::vector<FeatureWindow> windows;
    if (T < total) return windows;
    const int count = (T - total) / spec.stride_weeks + 1;
    windows.reserve(std::size_t(count));
    for (int i = 0; i < count; ++i) {
        const int offset = i * spec.stride_weeks;
        FeatureWindow win;
        win.beneficiary_id = traj.beneficiary_id;
        win.start_week = traj.weeks[std::size_t(offset)].message_index;
        win.features.reserve(std::size_t(spec.flat_dim()));
        for (int w = 0; w < spec.n_features_weeks; ++w) {
            append_week_features(win.features, traj.weeks[std::size_t(offset + w)],
                                 spec.feature_set);
        }
        const auto* label_begin =
            traj.weeks.data() + offset + spec.n_features_weeks + spec.n_offset_weeks;
        std::span<const WeeklySummary> label_weeks(label_begin,
                                                   std::size_t(spec.label_window_weeks));
        win.label_low_pickup = label_low_pickup(label_weeks);
        win.label_low_engagement = label_low_engagement(label_weeks);
        windows.push_back(std::move(win));
    }
    return windows;
}

void SplitSpec::validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DataError("train_fraction must lie strictly inside (0,1)");
    }
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_beneficiaries(
    std::vector<std::string> ids, const SplitSpec& spec) {
    spec.validate();
    if (ids.size() < 2) throw DataError("need at least 2 beneficiaries to split");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    Rng rng(spec.seed, {0x53504C4954ULL});  // "SPLIT" stream
    deterministic_shuffle(ids, rng);
    const auto n_train = std::size_t(std::llround(spec.train_fraction * double(ids.size())));
    if (n_train < 1 || n_train >= ids.size()) {
        throw DataError("split leaves an empty train or test side");
    }
    std::vector<std::string> train(ids.begin(), ids.begin() + long(n_train));
    std::vector<std::string> test(ids.begin() + long(n_train), ids.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

StandardizationStats standardize(std::vector<FeatureWindow>& windows,
                                 const std::optional<StandardizationStats>& stats) {
    if (windows.empty() && !stats) throw DataError("standardize: no windows to fit stats on");
    const int dim = windows.empty() ? (stats ? stats->dim : 0) : int(windows.front().features.size());

    StandardizationStats out;
    if (stats) {
        if (stats->dim != dim && !windows.empty()) {
            throw DataError("standardize: stats dimension mismatch");
        }
        out = *stats;
    } else {
        out.dim = dim;
        out.mean.assign(std::size_t(dim), 0.0);
        out.stddev.assign(std::size_t(dim), 0.0);
        out.passthrough.assign(std::size_t(dim), false);
        const double n = double(windows.size());
        for (const auto& w : windows) {
            for (int c = 0; c < dim; ++c) out.mean[std::size_t(c)] += w.features[std::size_t(c)];
        }
        for (int c = 0; c < dim; ++c) out.mean[std::size_t(c)] /= n;
        for (const auto& w : windows) {
            for (int c = 0; c < dim; ++c) {
                const double d = w.features[std::size_t(c)] - out.mean[std::size_t(c)];
                out.stddev[std::size_t(c)] += d * d;
            }
        }
        for (int c = 0; c < dim; ++c) {
            out.stddev[std::size_t(c)] = std::sqrt(out.stddev[std::size_t(c)] / n);
            if (out.stddev[std::size_t(c)] < 1e-12) out.passthrough[std::size_t(c)] = true;
        }
    }

    for (auto& w : windows) {
        if (int(w.features.size()) != out.dim) throw DataError("standardize: window dim mismatch");
        for (int c = 0; c < out.dim; ++c) {
            if (out.passthrough[std::size_t(c)]) continue;
            w.features[std::size_t(c)] =
                (w.features[std::size_t(c)] - out.mean[std::size_t(c)]) / out.stddev[std::size_t(c)];
        }
    }
    return out;
}

nlohmann::json StandardizationStats::to_json() const {
    return nlohmann::json{
        {"dim", dim}, {"mean", mean}, {"stddev", stddev}, {"passthrough", passthrough}};
}

StandardizationStats StandardizationStats::from_json(const nlohmann::json& j) {
    StandardizationStats s;
    s.dim = j.at("dim").get<int>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.passthrough = j.at("passthrough").get<std::vector<bool>>();
    return s;
}

std::vector<FeatureWindow> windows_for(const std::map<std::string, Trajectory>& trajectories,
                                       std::span<const std::string> ids, const WindowSpec& spec) {
    std::vector<std::string> sorted(ids.begin(), ids.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<FeatureWindow> out;
    for (const auto& id : sorted) {
        auto it = trajectories.find(id);
        if (it == trajectories.end()) throw DataError("windows_for: unknown beneficiary " + id);
        auto windows = make_windows(it->second, spec);
        std::move(windows.begin(), windows.end(), std::back_inserter(out));
    }
    return out;
}

void write_windows_csv(std::ostream& out, std::span<const FeatureWindow> windows, int flat_dim) {
    out << "beneficiary_id,start_week";
    for (int c = 0; c < flat_dim; ++c) out << ",f_" << c;
    out << ",label_low_pickup,label_low_engagement\n";
    std::string row;
    for (const auto& w : windows) {
        row.clear();
        row += w.beneficiary_id;
        row += ',';
        row += std::to_string(w.start_week);
        for (double v : w.features) {
            row += ',';
            row += csv::format_double(v);
        }
        row += w.label_low_pickup ? ",1" : ",0";
        row += w.label_low_engagement ? ",1\n" : ",0\n";
        out << row;
    }
}

std::vector<FeatureWindow> read_windows_csv(std::istream& in, int flat_dim) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("dataset CSV: missing header");
    std::vector<FeatureWindow> out;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto f = csv::split_fields(line);
        if (int(f.size()) != flat_dim + 4) {
            throw DataError("dataset CSV line " + std::to_string(line_no) + ": bad field count");
        }
        FeatureWindow w;
        w.beneficiary_id = std::string(f[0]);
        auto sw = csv::parse_int(f[1]);
        if (!sw) throw DataError("dataset CSV line " + std::to_string(line_no) + ": bad start week");
        w.start_week = int(*sw);
        w.features.reserve(std::size_t(flat_dim));
        for (int c = 0; c < flat_dim; ++c) {
            auto v = csv::parse_double(f[std::size_t(2 + c)]);
            if (!v) throw DataError("dataset CSV line " + std::to_string(line_no) + ": bad feature");
            w.features.push_back(*v);
        }
        w.label_low_pickup = f[std::size_t(flat_dim + 2)] == "1";
        w.label_low_engagement = f[std::size_t(flat_dim + 3)] == "1";
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace ivrlens::features
