#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ivrlens/features.hpp"

#include "json.hpp"

namespace ivrlens::models {

enum class ModelKind : int { Random = 0, LogisticRegression = 1, FeedforwardNN = 2, Lstm = 3 };

const char* model_kind_name(ModelKind kind);     // presentation name ("Feedforward NN")
const char* model_kind_slug(ModelKind kind);     // filename-safe ("ffnn")
std::optional<ModelKind> parse_model_kind(std::string_view name);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct EarlyStopConfig {
    int patience = 5;
    double holdout_fraction = 0.1;
};

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 50;           // 0 trains nothing and keeps the seeded init
    int batch_size = 256;
    double learning_rate = 1e-3;
    AdamConfig adam{};
    double l2_penalty = 0.0;
    std::optional<EarlyStopConfig> early_stop;
    int hidden_units = 128;   // FFNN hidden width; also the LSTM dense head
    int hidden_layers = 3;
    int lstm_hidden = 128;
    double positive_class_weight = 1.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Flattened samples: n rows of dim doubles plus binary labels.
struct Samples {
    std::span<const double> x;
    std::span<const int> y;
    int dim = 0;

    std::size_t size() const { return y.size(); }
    std::span<const double> row(std::size_t i) const {
        return x.subspan(i * std::size_t(dim), std::size_t(dim));
    }
};

// Logits are clamped to [-30, 30] before the sigmoid and the loss, so
// scores stay strictly inside (0,1) and logs never overflow.
constexpr double kLogitClamp = 30.0;

double sigmoid_clamped(double logit);

// Common surface of the trainable binary classifiers. Parameters live in
// one flat vector so the optimizer and the finite-difference checks treat
// every model uniformly.
class SigmoidClassifier {
public:
    virtual ~SigmoidClassifier() = default;

    virtual ModelKind kind() const = 0;
    virtual int input_dim() const = 0;

    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }

    // Named parameter segments in flat-vector order.
    virtual std::vector<std::pair<std::string, std::vector<int>>> shapes() const = 0;

    // Mean binary cross-entropy over the given sample indices (positives
    // weighted by pos_weight) plus l2/2 * ||params||^2. Writes the full
    // gradient into grad (resized/zeroed internally).
    virtual double loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                                 double pos_weight, double l2, std::vector<double>& grad) = 0;

    virtual double score_one(std::span<const double> x) const = 0;

protected:
    std::vector<double> params_;
};

class LogRegModel : public SigmoidClassifier {
public:
    LogRegModel(int dim, std::uint64_t init_seed);

    ModelKind kind() const override { return ModelKind::LogisticRegression; }
    int input_dim() const override { return dim_; }
    std::vector<std::pair<std::string, std::vector<int>>> shapes() const override;
    double loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                         double pos_weight, double l2, std::vector<double>& grad) override;
    double score_one(std::span<const double> x) const override;

private:
    int dim_;
};

class FfnnModel : public SigmoidClassifier {
public:
    FfnnModel(int dim, int hidden_units, int hidden_layers, std::uint64_t init_seed);

    ModelKind kind() const override { return ModelKind::FeedforwardNN; }
    int input_dim() const override { return dim_; }
    std::vector<std::pair<std::string, std::vector<int>>> shapes() const override;
    double loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                         double pos_weight, double l2, std::vector<double>& grad) override;
    double score_one(std::span<const double> x) const override;

private:
    double forward(std::span<const double> x, std::vector<std::vector<double>>& acts) const;

    int dim_;
    int hidden_;
    int layers_;
    std::vector<std::size_t> w_off_, b_off_;  // per layer, plus output head
};

// Single recurrent layer (input/forget/cell/output gates) over the weekly
// sequence; the final hidden state feeds a dense head ending in a sigmoid.
class LstmModel : public SigmoidClassifier {
public:
    LstmModel(int seq_len, int feat_dim, int lstm_hidden, int head_units, int head_layers,
              std::uint64_t init_seed);

    ModelKind kind() const override { return ModelKind::Lstm; }
    int input_dim() const override { return seq_len_ * feat_dim_; }
    int seq_len() const { return seq_len_; }
    int feat_dim() const { return feat_dim_; }
    std::vector<std::pair<std::string, std::vector<int>>> shapes() const override;
    double loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                         double pos_weight, double l2, std::vector<double>& grad) override;
    double score_one(std::span<const double> x) const override;

private:
    struct Trace;  // per-sample forward cache for backpropagation through time
    double forward(std::span<const double> x, Trace& trace) const;

    int seq_len_, feat_dim_, hidden_;
    int head_units_, head_layers_;
    std::size_t wx_off_, wh_off_, b_off_;
    std::vector<std::size_t> head_w_off_, head_b_off_;
};

std::unique_ptr<SigmoidClassifier> make_classifier(ModelKind kind, int input_dim, int seq_len,
                                                   int feat_dim, const TrainConfig& config);

struct FitResult {
    std::vector<double> epoch_losses;  // mean training loss per completed epoch
    int epochs_run = 0;
};

// Seeded mini-batch Adam over the model's flat parameters. Deterministic
// for a fixed config; with early stopping, the best held-out-loss weights
// are restored.
FitResult train(SigmoidClassifier& model, const Samples& train, const TrainConfig& config);

// Trained classifier plus everything needed to reproduce its scores.
struct ModelArtifact {
    ModelKind kind = ModelKind::LogisticRegression;
    std::string target;       // "low_pickup" | "low_engagement"
    std::string feature_set;  // FeatureSet tag
    int input_dim = 0;
    int seq_len = 0;   // LSTM only
    int feat_dim = 0;  // LSTM only
    TrainConfig config;
    std::vector<std::pair<std::string, std::vector<int>>> shapes;
    std::vector<double> weights;
    std::optional<features::StandardizationStats> stats;
};

ModelArtifact fit_logreg(const Samples& train, const std::string& target,
                         const std::string& feature_set, const TrainConfig& config);
ModelArtifact fit_ffnn(const Samples& train, const std::string& target,
                       const std::string& feature_set, const TrainConfig& config);
ModelArtifact fit_lstm(const Samples& train, int seq_len, int feat_dim, const std::string& target,
                       const std::string& feature_set, const TrainConfig& config);

// Uniform [0,1) scores, deterministic per seed.
std::vector<double> score_random(std::size_t n, std::uint64_t seed);

// Pure batch scoring; identical results for any jobs count.
std::vector<double> score(const ModelArtifact& artifact, std::span<const double> x, int dim,
                          int jobs = 1);

// JSON manifest + little-endian float64 blob (see README for the layout).
void save_artifact(const ModelArtifact& artifact, const std::string& json_path,
                   const std::string& bin_path);
ModelArtifact load_artifact(const std::string& json_path);

}  // namespace ivrlens::models
