#include "ivrlens/eval.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <thread>

#include "ivrlens/csv.hpp"
#include "ivrlens/error.hpp"
#include "ivrlens/metrics.hpp"
#include "ivrlens/rng.hpp"

namespace ivrlens::eval {

namespace {

constexpr std::uint64_t kCellDomain = 0x43454C4CULL;
constexpr std::uint64_t kSubsampleDomain = 0x53554253ULL;

std::uint64_t fs_key(const std::string& tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

const char* target_name(Target t) {
    return t == Target::LowPickup ? "low_pickup" : "low_engagement";
}

std::optional<Target> parse_target(std::string_view name) {
    if (name == "low_pickup") return Target::LowPickup;
    if (name == "low_engagement") return Target::LowEngagement;
    return std::nullopt;
}

FlatWindows flatten_windows(std::span<const features::FeatureWindow> windows, int dim) {
    FlatWindows flat;
    flat.dim = dim;
    flat.x.reserve(windows.size() * std::size_t(dim));
    flat.y_low_pickup.reserve(windows.size());
    flat.y_low_engagement.reserve(windows.size());
    for (const auto& w : windows) {
        if (int(w.features.size()) != dim) throw DataError("flatten_windows: dim mismatch");
        flat.x.insert(flat.x.end(), w.features.begin(), w.features.end());
        flat.y_low_pickup.push_back(w.label_low_pickup ? 1 : 0);
        flat.y_low_engagement.push_back(w.label_low_engagement ? 1 : 0);
    }
    return flat;
}

namespace {

// Deterministic subsample preserving original order.
std::vector<features::FeatureWindow> subsample(const std::vector<features::FeatureWindow>& windows,
                                               std::size_t cap, std::uint64_t seed,
                                               std::uint64_t stream) {
    if (cap == 0 || windows.size() <= cap) return windows;
    std::vector<std::size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, {kSubsampleDomain, stream});
    deterministic_shuffle(idx, rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<features::FeatureWindow> out;
    out.reserve(cap);
    for (auto i : idx) out.push_back(windows[i]);
    return out;
}

struct Cell {
    models::ModelKind kind;
    std::string feature_set;
    Target target;
};

}  // namespace

EvalReport run_matrix(const std::map<std::string, SplitData>& datasets, const MatrixSpec& spec) {
    if (datasets.empty()) throw DataError("run_matrix: no datasets");
    if (spec.kinds.empty() || spec.targets.empty()) {
        throw DataError("run_matrix: empty model or target list");
    }

    // Capped, flattened copies per feature set, shared across cells.
    struct Prepared {
        const SplitData* data;
        FlatWindows train;
        FlatWindows test;
    };
    std::map<std::string, Prepared> prepared;
    for (const auto& [tag, data] : datasets) {
        const int dim = data.spec.flat_dim();
        Prepared p;
        p.data = &data;
        p.train = flatten_windows(
            subsample(data.train, spec.max_train_windows, spec.seed, fs_key(tag) ^ 1), dim);
        p.test = flatten_windows(
            subsample(data.test, spec.max_test_windows, spec.seed, fs_key(tag) ^ 2), dim);
        if (p.test.y_low_pickup.empty() || p.train.y_low_pickup.empty()) {
            throw DataError("run_matrix: empty train or test split for " + tag);
        }
        prepared.emplace(tag, std::move(p));
    }

    std::vector<Cell> cells;
    for (const auto& [tag, p] : prepared) {
        for (auto target : spec.targets) {
            for (auto kind : spec.kinds) cells.push_back({kind, tag, target});
        }
    }

    std::vector<EvalRow> rows(cells.size());
    std::vector<std::string> errors(cells.size());

    auto run_cell = [&](std::size_t c) {
        const auto& cell = cells[c];
        const auto& p = prepared.at(cell.feature_set);
        const auto train_samples = p.train.samples(cell.target);
        const auto test_samples = p.test.samples(cell.target);

        const std::uint64_t cell_seed =
            mix_key({spec.seed, kCellDomain, std::uint64_t(cell.kind), fs_key(cell.feature_set),
                     std::uint64_t(cell.target)});

        std::vector<double> scores;
        if (cell.kind == models::ModelKind::Random) {
            scores = models::score_random(test_samples.size(), cell_seed);
        } else {
            auto cfg_it = spec.train_configs.find(cell.kind);
            models::TrainConfig cfg =
                cfg_it != spec.train_configs.end() ? cfg_it->second : models::TrainConfig{};
            cfg.seed = cell_seed;
            models::ModelArtifact artifact;
            switch (cell.kind) {
                case models::ModelKind::LogisticRegression:
                    artifact = models::fit_logreg(train_samples, target_name(cell.target),
                                                  cell.feature_set, cfg);
                    break;
                case models::ModelKind::FeedforwardNN:
                    artifact = models::fit_ffnn(train_samples, target_name(cell.target),
                                                cell.feature_set, cfg);
                    break;
                case models::ModelKind::Lstm:
                    artifact = models::fit_lstm(train_samples, p.data->spec.n_features_weeks,
                                                p.data->spec.feature_set.columns_per_week(),
                                                target_name(cell.target), cell.feature_set, cfg);
                    break;
                default:
                    throw DataError("run_matrix: unexpected model kind");
            }
            artifact.stats = p.data->stats;
            if (spec.artifacts_dir) {
                std::string slug = std::string(target_name(cell.target)) + "_" +
                                   models::model_kind_slug(cell.kind) + "_" + cell.feature_set;
                std::replace(slug.begin(), slug.end(), '+', '-');
                const auto base = std::filesystem::path(*spec.artifacts_dir) / slug;
                models::save_artifact(artifact, base.string() + ".json", base.string() + ".bin");
            }
            scores = models::score(artifact, test_samples.x, test_samples.dim);
        }

        EvalRow row;
        row.kind = cell.kind;
        row.feature_set = cell.feature_set;
        row.target = cell.target;
        row.seed = cell_seed;
        row.n_test = test_samples.size();
        long long pos = 0;
        for (int y : test_samples.y) pos += (y != 0);
        row.positive_prevalence = double(pos) / double(test_samples.size());
        row.balanced_accuracy = metrics::balanced_accuracy(test_samples.y, scores);
        row.precision_at_k = metrics::precision_at_k(test_samples.y, scores, spec.k_percent);
        row.auc = metrics::auc(test_samples.y, scores);
        rows[c] = row;
    };

    const int jobs = std::max(1, std::min<int>(spec.jobs, int(cells.size())));
    if (jobs == 1) {
        for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        for (int j = 0; j < jobs; ++j) {
            workers.emplace_back([&] {
                while (true) {
                    const std::size_t c = next.fetch_add(1);
                    if (c >= cells.size()) break;
                    try {
                        run_cell(c);
                    } catch (const std::exception& e) {
                        errors[c] = e.what();
                    }
                }
            });
        }
        for (auto& w : workers) w.join();
        for (const auto& err : errors) {
            if (!err.empty()) throw DataError("run_matrix cell failed: " + err);
        }
    }

    EvalReport report;
    report.k_percent = spec.k_percent;
    report.rows = std::move(rows);
    report.sort_rows();
    return report;
}

void EvalReport::sort_rows() {
    std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.target != b.target) return int(a.target) < int(b.target);
        if (a.balanced_accuracy != b.balanced_accuracy) {
            return a.balanced_accuracy > b.balanced_accuracy;
        }
        if (a.kind != b.kind) return int(a.kind) < int(b.kind);
        return a.feature_set < b.feature_set;
    });
}

void EvalReport::write_csv(std::ostream& out) const {
    out << "model,features,target,balanced_accuracy,precision_at_k,auc,n_test,"
           "positive_prevalence,seed\n";
    for (const auto& r : rows) {
        std::vector<std::string> f{
            models::model_kind_name(r.kind),
            r.feature_set,
            target_name(r.target),
            csv::format_double(r.balanced_accuracy),
            csv::format_double(r.precision_at_k),
            csv::format_double(r.auc),
            std::to_string(r.n_test),
            csv::format_double(r.positive_prevalence),
            std::to_string(r.seed),
        };
        out << csv::join_row(f);
    }
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({
            {"model", models::model_kind_name(r.kind)},
            {"features", r.feature_set},
            {"target", target_name(r.target)},
            {"balanced_accuracy", r.balanced_accuracy},
            {"precision_at_k", r.precision_at_k},
            {"auc", r.auc},
            {"n_test", r.n_test},
            {"positive_prevalence", r.positive_prevalence},
            {"seed", r.seed},
        });
    }
    return nlohmann::json{
        {"k_percent", k_percent}, {"rows", rows_json}, {"provenance", provenance}};
}

void write_roc_csv(std::ostream& out, const std::vector<std::pair<double, double>>& points) {
    out << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : points) {
        out << csv::format_double(fpr) << ',' << csv::format_double(tpr) << '\n';
    }
}

}  // namespace ivrlens::eval
