#include "ivrlens/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <thread>

#include "ivrlens/error.hpp"
#include "ivrlens/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "artifact weight blobs assume a little-endian host");

namespace ivrlens::models {

namespace {

// Stream tags hung off TrainConfig::seed.
constexpr std::uint64_t kInitDomain = 0x494E4954ULL;
constexpr std::uint64_t kShuffleDomain = 0x53485546ULL;
constexpr std::uint64_t kHoldoutDomain = 0x484F4C44ULL;
constexpr std::uint64_t kRandomScoreDomain = 0x524E4453ULL;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

const char* model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::Random: return "Random";
        case ModelKind::LogisticRegression: return "Logistic Regression";
        case ModelKind::FeedforwardNN: return "Feedforward NN";
        case ModelKind::Lstm: return "LSTM";
    }
    return "?";
}

const char* model_kind_slug(ModelKind kind) {
    switch (kind) {
        case ModelKind::Random: return "random";
        case ModelKind::LogisticRegression: return "logreg";
        case ModelKind::FeedforwardNN: return "ffnn";
        case ModelKind::Lstm: return "lstm";
    }
    return "?";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
    for (int k = 0; k < 4; ++k) {
        if (name == model_kind_name(ModelKind(k)) || name == model_kind_slug(ModelKind(k))) {
            return ModelKind(k);
        }
    }
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs < 0) throw DataError("epochs must be >= 0");
    if (batch_size < 1) throw DataError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
        throw DataError("adam betas must lie in [0,1)");
    }
    if (!(adam.epsilon > 0.0)) throw DataError("adam epsilon must be positive");
    if (l2_penalty < 0.0) throw DataError("l2_penalty must be >= 0");
    if (hidden_units < 1 || hidden_layers < 1 || lstm_hidden < 1) {
        throw DataError("hidden sizes must be >= 1");
    }
    if (!(positive_class_weight > 0.0)) throw DataError("positive_class_weight must be positive");
    if (early_stop) {
        if (early_stop->patience < 1) throw DataError("early stop patience must be >= 1");
        if (!(early_stop->holdout_fraction > 0.0 && early_stop->holdout_fraction < 1.0)) {
            throw DataError("early stop holdout fraction must lie in (0,1)");
        }
    }
}

nlohmann::json TrainConfig::to_json() const {
    nlohmann::json j{
        {"seed", seed},
        {"epochs", epochs},
        {"batch_size", batch_size},
        {"learning_rate", learning_rate},
        {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"epsilon", adam.epsilon}}},
        {"l2_penalty", l2_penalty},
        {"hidden_units", hidden_units},
        {"hidden_layers", hidden_layers},
        {"lstm_hidden", lstm_hidden},
        {"positive_class_weight", positive_class_weight},
    };
    if (early_stop) {
        j["early_stop"] = {{"patience", early_stop->patience},
                           {"holdout_fraction", early_stop->holdout_fraction}};
    }
    return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.seed = j.value("seed", std::uint64_t{1});
    c.epochs = j.value("epochs", 50);
    c.batch_size = j.value("batch_size", 256);
    c.learning_rate = j.value("learning_rate", 1e-3);
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        c.adam.beta1 = a.value("beta1", 0.9);
        c.adam.beta2 = a.value("beta2", 0.999);
        c.adam.epsilon = a.value("epsilon", 1e-8);
    }
    c.l2_penalty = j.value("l2_penalty", 0.0);
    c.hidden_units = j.value("hidden_units", 128);
    c.hidden_layers = j.value("hidden_layers", 3);
    c.lstm_hidden = j.value("lstm_hidden", 128);
    c.positive_class_weight = j.value("positive_class_weight", 1.0);
    if (j.contains("early_stop")) {
        const auto& e = j.at("early_stop");
        c.early_stop = EarlyStopConfig{e.value("patience", 5), e.value("holdout_fraction", 0.1)};
    }
    c.validate();
    return c;
}

double sigmoid_clamped(double logit) {
    const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-z));
}

namespace {

// Per-sample loss terms shared by every model. Returns the weighted loss;
// *dz_out gets dLoss/dlogit (zero where the clamp is active).
double bce_terms(double raw_logit, int label, double pos_weight, double* dz_out) {
    const double z = std::clamp(raw_logit, -kLogitClamp, kLogitClamp);
    const double p = 1.0 / (1.0 + std::exp(-z));
    const double y = label ? 1.0 : 0.0;
    const double w = label ? pos_weight : 1.0;
    const double loss = w * (softplus(z) - y * z);
    *dz_out = std::abs(raw_logit) < kLogitClamp ? w * (p - y) : 0.0;
    return loss;
}

double l2_terms(std::span<const double> params, double l2, std::span<double> grad) {
    if (l2 == 0.0) return 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        sq += params[i] * params[i];
        grad[i] += l2 * params[i];
    }
    return 0.5 * l2 * sq;
}

// Fully-connected ReLU stack with a single-logit head, parameters stored in
// a shared flat vector.
struct DenseStack {
    int in_dim = 0, hidden = 0, layers = 0;
    std::vector<std::size_t> w_off, b_off;
    std::size_t out_w_off = 0, out_b_off = 0;

    static DenseStack build(int in_dim, int hidden, int layers, std::vector<double>& params,
                            Rng& rng) {
        DenseStack s;
        s.in_dim = in_dim;
        s.hidden = hidden;
        s.layers = layers;
        int fan_in = in_dim;
        for (int l = 0; l < layers; ++l) {
            const double bound = 1.0 / std::sqrt(double(fan_in));
            s.w_off.push_back(params.size());
            for (int i = 0; i < hidden * fan_in; ++i) params.push_back(rng.next_uniform(-bound, bound));
            s.b_off.push_back(params.size());
            params.insert(params.end(), std::size_t(hidden), 0.0);
            fan_in = hidden;
        }
        const double bound = 1.0 / std::sqrt(double(fan_in));
        s.out_w_off = params.size();
        for (int i = 0; i < fan_in; ++i) params.push_back(rng.next_uniform(-bound, bound));
        s.out_b_off = params.size();
        params.push_back(0.0);
        return s;
    }

    void append_shapes(std::vector<std::pair<std::string, std::vector<int>>>& shapes,
                       const std::string& prefix) const {
        int fan_in = in_dim;
        for (int l = 0; l < layers; ++l) {
            shapes.push_back({prefix + "W" + std::to_string(l + 1), {hidden, fan_in}});
            shapes.push_back({prefix + "b" + std::to_string(l + 1), {hidden}});
            fan_in = hidden;
        }
        shapes.push_back({prefix + "W_out", {1, fan_in}});
        shapes.push_back({prefix + "b_out", {1}});
    }

    // acts[0] = input, acts[l] = post-ReLU activation of layer l.
    double forward(std::span<const double> params, std::span<const double> x,
                   std::vector<std::vector<double>>& acts) const {
        acts.resize(std::size_t(layers) + 1);
        acts[0].assign(x.begin(), x.end());
        int fan_in = in_dim;
        for (int l = 0; l < layers; ++l) {
            auto& out = acts[std::size_t(l) + 1];
            out.assign(std::size_t(hidden), 0.0);
            const double* W = params.data() + w_off[std::size_t(l)];
            const double* b = params.data() + b_off[std::size_t(l)];
            const auto& in = acts[std::size_t(l)];
            for (int r = 0; r < hidden; ++r) {
                double z = b[r];
                const double* wr = W + std::size_t(r) * std::size_t(fan_in);
                for (int c = 0; c < fan_in; ++c) z += wr[c] * in[std::size_t(c)];
                out[std::size_t(r)] = z > 0.0 ? z : 0.0;
            }
            fan_in = hidden;
        }
        const double* wo = params.data() + out_w_off;
        const auto& last = acts[std::size_t(layers)];
        double z = params[out_b_off];
        for (int c = 0; c < fan_in; ++c) z += wo[c] * last[std::size_t(c)];
        return z;
    }

    // dz = dLoss/dlogit. Accumulates into grad; when dx is non-null it
    // receives dLoss/dinput.
    void backward(std::span<const double> params, const std::vector<std::vector<double>>& acts,
                  double dz, std::span<double> grad, std::vector<double>* dx) const {
        const int last_dim = layers > 0 ? hidden : in_dim;
        const auto& last = acts[std::size_t(layers)];
        std::vector<double> dh(std::size_t(last_dim));
        for (int c = 0; c < last_dim; ++c) {
            grad[out_w_off + std::size_t(c)] += dz * last[std::size_t(c)];
            dh[std::size_t(c)] = params[out_w_off + std::size_t(c)] * dz;
        }
        grad[out_b_off] += dz;

        for (int l = layers - 1; l >= 0; --l) {
            const int fan_in = l == 0 ? in_dim : hidden;
            const auto& in = acts[std::size_t(l)];
            const auto& out = acts[std::size_t(l) + 1];
            const double* W = params.data() + w_off[std::size_t(l)];
            std::vector<double> dprev(std::size_t(fan_in), 0.0);
            for (int r = 0; r < hidden; ++r) {
                if (out[std::size_t(r)] <= 0.0) continue;  // ReLU gate
                const double d = dh[std::size_t(r)];
                double* gw = grad.data() + w_off[std::size_t(l)] + std::size_t(r) * std::size_t(fan_in);
                const double* wr = W + std::size_t(r) * std::size_t(fan_in);
                for (int c = 0; c < fan_in; ++c) {
                    gw[c] += d * in[std::size_t(c)];
                    dprev[std::size_t(c)] += wr[c] * d;
                }
                grad[b_off[std::size_t(l)] + std::size_t(r)] += d;
            }
            dh = std::move(dprev);
        }
        if (dx) *dx = std::move(dh);
    }
};

std::uint64_t init_seed_for(const TrainConfig& config, ModelKind kind) {
    return mix_key({config.seed, kInitDomain, std::uint64_t(kind)});
}

void check_finite(const Samples& samples) {
    for (double v : samples.x) {
        if (!std::isfinite(v)) throw DataError("non-finite value in feature matrix");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic regression

LogRegModel::LogRegModel(int dim, std::uint64_t init_seed) : dim_(dim) {
    if (dim < 1) throw DataError("LogRegModel: dim must be >= 1");
    Rng rng(init_seed);
    const double bound = 1.0 / std::sqrt(double(dim));
    params_.reserve(std::size_t(dim) + 1);
    for (int i = 0; i < dim; ++i) params_.push_back(rng.next_uniform(-bound, bound));
    params_.push_back(0.0);  // bias
}

std::vector<std::pair<std::string, std::vector<int>>> LogRegModel::shapes() const {
    return {{"w", {dim_}}, {"b", {1}}};
}

double LogRegModel::score_one(std::span<const double> x) const {
    double z = params_[std::size_t(dim_)];
    for (int c = 0; c < dim_; ++c) z += params_[std::size_t(c)] * x[std::size_t(c)];
    return sigmoid_clamped(z);
}

double LogRegModel::loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                                  double pos_weight, double l2, std::vector<double>& grad) {
    grad.assign(params_.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i : idx) {
        const auto row = samples.row(i);
        double z = params_[std::size_t(dim_)];
        for (int c = 0; c < dim_; ++c) z += params_[std::size_t(c)] * row[std::size_t(c)];
        double dz = 0.0;
        loss += bce_terms(z, samples.y[i], pos_weight, &dz);
        for (int c = 0; c < dim_; ++c) grad[std::size_t(c)] += dz * row[std::size_t(c)];
        grad[std::size_t(dim_)] += dz;
    }
    const double n = double(idx.size());
    loss /= n;
    for (auto& g : grad) g /= n;
    loss += l2_terms(params_, l2, grad);
    return loss;
}

// ---------------------------------------------------------------------------
// Feedforward network

namespace {
// One DenseStack per FfnnModel/LstmModel, rebuilt from stored offsets.
}  // namespace

FfnnModel::FfnnModel(int dim, int hidden_units, int hidden_layers, std::uint64_t init_seed)
    : dim_(dim), hidden_(hidden_units), layers_(hidden_layers) {
    if (dim < 1) throw DataError("FfnnModel: dim must be >= 1");
    Rng rng(init_seed);
    DenseStack stack = DenseStack::build(dim_, hidden_, layers_, params_, rng);
    w_off_ = stack.w_off;
    b_off_ = stack.b_off;
    w_off_.push_back(stack.out_w_off);
    b_off_.push_back(stack.out_b_off);
}

namespace {

DenseStack ffnn_stack(int dim, int hidden, int layers, const std::vector<std::size_t>& w_off,
                      const std::vector<std::size_t>& b_off) {
    DenseStack s;
    s.in_dim = dim;
    s.hidden = hidden;
    s.layers = layers;
    s.w_off.assign(w_off.begin(), w_off.end() - 1);
    s.b_off.assign(b_off.begin(), b_off.end() - 1);
    s.out_w_off = w_off.back();
    s.out_b_off = b_off.back();
    return s;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> FfnnModel::shapes() const {
    std::vector<std::pair<std::string, std::vector<int>>> shapes;
    ffnn_stack(dim_, hidden_, layers_, w_off_, b_off_).append_shapes(shapes, "");
    return shapes;
}

double FfnnModel::forward(std::span<const double> x, std::vector<std::vector<double>>& acts) const {
    return ffnn_stack(dim_, hidden_, layers_, w_off_, b_off_).forward(params_, x, acts);
}

double FfnnModel::score_one(std::span<const double> x) const {
    std::vector<std::vector<double>> acts;
    return sigmoid_clamped(forward(x, acts));
}

double FfnnModel::loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                                double pos_weight, double l2, std::vector<double>& grad) {
    grad.assign(params_.size(), 0.0);
    const DenseStack stack = ffnn_stack(dim_, hidden_, layers_, w_off_, b_off_);
    std::vector<std::vector<double>> acts;
    double loss = 0.0;
    for (std::size_t i : idx) {
        const double z = stack.forward(params_, samples.row(i), acts);
        double dz = 0.0;
        loss += bce_terms(z, samples.y[i], pos_weight, &dz);
        if (dz != 0.0) stack.backward(params_, acts, dz, grad, nullptr);
    }
    const double n = double(idx.size());
    loss /= n;
    for (auto& g : grad) g /= n;
    loss += l2_terms(params_, l2, grad);
    return loss;
}

// ---------------------------------------------------------------------------
// LSTM

struct LstmModel::Trace {
    // per step: gate activations and states, each hidden_ wide
    std::vector<std::vector<double>> i, f, g, o, c, tanh_c, h;
    std::vector<std::vector<double>> head_acts;
    double raw_logit = 0.0;
};

LstmModel::LstmModel(int seq_len, int feat_dim, int lstm_hidden, int head_units, int head_layers,
                     std::uint64_t init_seed)
    : seq_len_(seq_len),
      feat_dim_(feat_dim),
      hidden_(lstm_hidden),
      head_units_(head_units),
      head_layers_(head_layers) {
    if (seq_len < 1 || feat_dim < 1) throw DataError("LstmModel: bad sequence shape");
    Rng rng(init_seed);
    const double bx = 1.0 / std::sqrt(double(feat_dim_));
    wx_off_ = params_.size();
    for (int i = 0; i < 4 * hidden_ * feat_dim_; ++i) params_.push_back(rng.next_uniform(-bx, bx));
    const double bh = 1.0 / std::sqrt(double(hidden_));
    wh_off_ = params_.size();
    for (int i = 0; i < 4 * hidden_ * hidden_; ++i) params_.push_back(rng.next_uniform(-bh, bh));
    b_off_ = params_.size();
    for (int r = 0; r < 4 * hidden_; ++r) {
        // forget-gate bias starts at 1 so early training can carry state
        params_.push_back(r >= hidden_ && r < 2 * hidden_ ? 1.0 : 0.0);
    }
    DenseStack head = DenseStack::build(hidden_, head_units_, head_layers_, params_, rng);
    head_w_off_ = head.w_off;
    head_b_off_ = head.b_off;
    head_w_off_.push_back(head.out_w_off);
    head_b_off_.push_back(head.out_b_off);
}

std::vector<std::pair<std::string, std::vector<int>>> LstmModel::shapes() const {
    std::vector<std::pair<std::string, std::vector<int>>> shapes{
        {"Wx", {4 * hidden_, feat_dim_}}, {"Wh", {4 * hidden_, hidden_}}, {"b", {4 * hidden_}}};
    ffnn_stack(hidden_, head_units_, head_layers_, head_w_off_, head_b_off_)
        .append_shapes(shapes, "head_");
    return shapes;
}

double LstmModel::forward(std::span<const double> x, Trace& trace) const {
    const int H = hidden_;
    trace.i.assign(std::size_t(seq_len_), {});
    trace.f.assign(std::size_t(seq_len_), {});
    trace.g.assign(std::size_t(seq_len_), {});
    trace.o.assign(std::size_t(seq_len_), {});
    trace.c.assign(std::size_t(seq_len_), {});
    trace.tanh_c.assign(std::size_t(seq_len_), {});
    trace.h.assign(std::size_t(seq_len_), {});

    std::vector<double> a(std::size_t(4 * H));
    const double* Wx = params_.data() + wx_off_;
    const double* Wh = params_.data() + wh_off_;
    const double* b = params_.data() + b_off_;
    const std::vector<double> zeros(std::size_t(H), 0.0);
    for (int t = 0; t < seq_len_; ++t) {
        const double* xt = x.data() + std::size_t(t) * std::size_t(feat_dim_);
        const auto& h_prev = t == 0 ? zeros : trace.h[std::size_t(t) - 1];
        const auto& c_prev = t == 0 ? zeros : trace.c[std::size_t(t) - 1];
        for (int r = 0; r < 4 * H; ++r) {
            double z = b[r];
            const double* wxr = Wx + std::size_t(r) * std::size_t(feat_dim_);
            for (int cchan = 0; cchan < feat_dim_; ++cchan) z += wxr[cchan] * xt[cchan];
            const double* whr = Wh + std::size_t(r) * std::size_t(H);
            for (int k = 0; k < H; ++k) z += whr[k] * h_prev[std::size_t(k)];
            a[std::size_t(r)] = z;
        }
        auto& it = trace.i[std::size_t(t)];
        auto& ft = trace.f[std::size_t(t)];
        auto& gt = trace.g[std::size_t(t)];
        auto& ot = trace.o[std::size_t(t)];
        auto& ct = trace.c[std::size_t(t)];
        auto& tct = trace.tanh_c[std::size_t(t)];
        auto& ht = trace.h[std::size_t(t)];
        it.resize(std::size_t(H));
        ft.resize(std::size_t(H));
        gt.resize(std::size_t(H));
        ot.resize(std::size_t(H));
        ct.resize(std::size_t(H));
        tct.resize(std::size_t(H));
        ht.resize(std::size_t(H));
        for (int k = 0; k < H; ++k) {
            it[std::size_t(k)] = 1.0 / (1.0 + std::exp(-a[std::size_t(k)]));
            ft[std::size_t(k)] = 1.0 / (1.0 + std::exp(-a[std::size_t(H + k)]));
            gt[std::size_t(k)] = std::tanh(a[std::size_t(2 * H + k)]);
            ot[std::size_t(k)] = 1.0 / (1.0 + std::exp(-a[std::size_t(3 * H + k)]));
            ct[std::size_t(k)] =
                ft[std::size_t(k)] * c_prev[std::size_t(k)] + it[std::size_t(k)] * gt[std::size_t(k)];
            tct[std::size_t(k)] = std::tanh(ct[std::size_t(k)]);
            ht[std::size_t(k)] = ot[std::size_t(k)] * tct[std::size_t(k)];
        }
    }
    const DenseStack head = ffnn_stack(hidden_, head_units_, head_layers_, head_w_off_, head_b_off_);
    trace.raw_logit = head.forward(params_, trace.h[std::size_t(seq_len_) - 1], trace.head_acts);
    return trace.raw_logit;
}

double LstmModel::score_one(std::span<const double> x) const {
    if (int(x.size()) != seq_len_ * feat_dim_) {
        throw DataError("LstmModel: input length does not match sequence shape");
    }
    Trace trace;
    return sigmoid_clamped(forward(x, trace));
}

double LstmModel::loss_and_grad(const Samples& samples, std::span<const std::size_t> idx,
                                double pos_weight, double l2, std::vector<double>& grad) {
    if (samples.dim != seq_len_ * feat_dim_) {
        throw DataError("LstmModel: samples do not match sequence shape");
    }
    grad.assign(params_.size(), 0.0);
    const int H = hidden_;
    const DenseStack head = ffnn_stack(hidden_, head_units_, head_layers_, head_w_off_, head_b_off_);
    const double* Wh = params_.data() + wh_off_;
    const std::vector<double> zeros(std::size_t(H), 0.0);

    Trace trace;
    std::vector<double> dh, dc(std::size_t(H)), da(std::size_t(4 * H));
    double loss = 0.0;
    for (std::size_t s : idx) {
        const auto x = samples.row(s);
        const double z = forward(x, trace);
        double dz = 0.0;
        loss += bce_terms(z, samples.y[s], pos_weight, &dz);
        if (dz == 0.0) continue;
        head.backward(params_, trace.head_acts, dz, grad, &dh);

        std::fill(dc.begin(), dc.end(), 0.0);
        for (int t = seq_len_ - 1; t >= 0; --t) {
            const auto& it = trace.i[std::size_t(t)];
            const auto& ft = trace.f[std::size_t(t)];
            const auto& gt = trace.g[std::size_t(t)];
            const auto& ot = trace.o[std::size_t(t)];
            const auto& tct = trace.tanh_c[std::size_t(t)];
            const auto& c_prev = t == 0 ? zeros : trace.c[std::size_t(t) - 1];
            const auto& h_prev = t == 0 ? zeros : trace.h[std::size_t(t) - 1];
            const double* xt = x.data() + std::size_t(t) * std::size_t(feat_dim_);

            for (int k = 0; k < H; ++k) {
                const double dhk = dh[std::size_t(k)];
                const double do_ = dhk * tct[std::size_t(k)];
                double dck = dc[std::size_t(k)] +
                             dhk * ot[std::size_t(k)] * (1.0 - tct[std::size_t(k)] * tct[std::size_t(k)]);
                const double di = dck * gt[std::size_t(k)];
                const double dg = dck * it[std::size_t(k)];
                const double df = dck * c_prev[std::size_t(k)];
                dc[std::size_t(k)] = dck * ft[std::size_t(k)];  // carry to t-1
                da[std::size_t(k)] = di * it[std::size_t(k)] * (1.0 - it[std::size_t(k)]);
                da[std::size_t(H + k)] = df * ft[std::size_t(k)] * (1.0 - ft[std::size_t(k)]);
                da[std::size_t(2 * H + k)] = dg * (1.0 - gt[std::size_t(k)] * gt[std::size_t(k)]);
                da[std::size_t(3 * H + k)] = do_ * ot[std::size_t(k)] * (1.0 - ot[std::size_t(k)]);
            }
            for (int r = 0; r < 4 * H; ++r) {
                const double d = da[std::size_t(r)];
                if (d == 0.0) continue;
                double* gx = grad.data() + wx_off_ + std::size_t(r) * std::size_t(feat_dim_);
                for (int cchan = 0; cchan < feat_dim_; ++cchan) gx[cchan] += d * xt[cchan];
                double* gh = grad.data() + wh_off_ + std::size_t(r) * std::size_t(H);
                for (int k = 0; k < H; ++k) gh[k] += d * h_prev[std::size_t(k)];
                grad[b_off_ + std::size_t(r)] += d;
            }
            // dh for t-1 = Wh^T . da
            std::fill(dh.begin(), dh.end(), 0.0);
            for (int r = 0; r < 4 * H; ++r) {
                const double d = da[std::size_t(r)];
                if (d == 0.0) continue;
                const double* whr = Wh + std::size_t(r) * std::size_t(H);
                for (int k = 0; k < H; ++k) dh[std::size_t(k)] += whr[k] * d;
            }
        }
    }
    const double n = double(idx.size());
    loss /= n;
    for (auto& g : grad) g /= n;
    loss += l2_terms(params_, l2, grad);
    return loss;
}

// ---------------------------------------------------------------------------
// Training

std::unique_ptr<SigmoidClassifier> make_classifier(ModelKind kind, int input_dim, int seq_len,
                                                   int feat_dim, const TrainConfig& config) {
    const std::uint64_t init = init_seed_for(config, kind);
    switch (kind) {
        case ModelKind::LogisticRegression:
            return std::make_unique<LogRegModel>(input_dim, init);
        case ModelKind::FeedforwardNN:
            return std::make_unique<FfnnModel>(input_dim, config.hidden_units,
                                               config.hidden_layers, init);
        case ModelKind::Lstm:
            return std::make_unique<LstmModel>(seq_len, feat_dim, config.lstm_hidden,
                                               config.hidden_units, config.hidden_layers, init);
        case ModelKind::Random:
            break;
    }
    throw DataError("make_classifier: Random is not a trainable classifier");
}

FitResult train(SigmoidClassifier& model, const Samples& samples, const TrainConfig& config) {
    config.validate();
    if (samples.size() == 0) throw DataError("train: empty training set");
    if (samples.dim != model.input_dim()) throw DataError("train: feature dim mismatch");
    check_finite(samples);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<std::size_t> holdout;
    if (config.early_stop) {
        Rng rng(config.seed, {kHoldoutDomain});
        deterministic_shuffle(order, rng);
        std::size_t n_val = std::max<std::size_t>(
            1, std::size_t(config.early_stop->holdout_fraction * double(order.size())));
        if (n_val >= order.size()) throw DataError("train: holdout swallows the training set");
        holdout.assign(order.end() - long(n_val), order.end());
        order.resize(order.size() - n_val);
    }

    auto params = model.params();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    double b1t = 1.0, b2t = 1.0;

    FitResult result;
    std::vector<double> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng(config.seed, {kShuffleDomain, std::uint64_t(epoch)});
        deterministic_shuffle(order, rng);

        double epoch_loss = 0.0;
        std::size_t seen = 0;
        for (std::size_t beg = 0; beg < order.size(); beg += std::size_t(config.batch_size)) {
            const std::size_t end = std::min(order.size(), beg + std::size_t(config.batch_size));
            std::span<const std::size_t> batch(order.data() + beg, end - beg);
            const double loss = model.loss_and_grad(samples, batch, config.positive_class_weight,
                                                    config.l2_penalty, grad);
            epoch_loss += loss * double(batch.size());
            seen += batch.size();

            b1t *= config.adam.beta1;
            b2t *= config.adam.beta2;
            const double lr = config.learning_rate;
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = config.adam.beta1 * m[i] + (1.0 - config.adam.beta1) * grad[i];
                v[i] = config.adam.beta2 * v[i] + (1.0 - config.adam.beta2) * grad[i] * grad[i];
                const double mhat = m[i] / (1.0 - b1t);
                const double vhat = v[i] / (1.0 - b2t);
                params[i] -= lr * mhat / (std::sqrt(vhat) + config.adam.epsilon);
            }
        }
        result.epoch_losses.push_back(epoch_loss / double(seen));
        result.epochs_run = epoch + 1;

        if (config.early_stop) {
            const double val_loss = model.loss_and_grad(samples, holdout,
                                                        config.positive_class_weight,
                                                        config.l2_penalty, grad);
            if (val_loss < best_val - 1e-12) {
                best_val = val_loss;
                best_params.assign(params.begin(), params.end());
                bad_epochs = 0;
            } else if (++bad_epochs >= config.early_stop->patience) {
                break;
            }
        }
    }
    if (config.early_stop && !best_params.empty()) {
        std::copy(best_params.begin(), best_params.end(), params.begin());
    }
    return result;
}

namespace {

ModelArtifact pack_artifact(const SigmoidClassifier& model, const std::string& target,
                            const std::string& feature_set, const TrainConfig& config, int seq_len,
                            int feat_dim) {
    ModelArtifact artifact;
    artifact.kind = model.kind();
    artifact.target = target;
    artifact.feature_set = feature_set;
    artifact.input_dim = model.input_dim();
    artifact.seq_len = seq_len;
    artifact.feat_dim = feat_dim;
    artifact.config = config;
    artifact.shapes = model.shapes();
    artifact.weights.assign(model.params().begin(), model.params().end());
    return artifact;
}

}  // namespace

ModelArtifact fit_logreg(const Samples& train_set, const std::string& target,
                         const std::string& feature_set, const TrainConfig& config) {
    auto model = make_classifier(ModelKind::LogisticRegression, train_set.dim, 0, 0, config);
    train(*model, train_set, config);
    return pack_artifact(*model, target, feature_set, config, 0, 0);
}

ModelArtifact fit_ffnn(const Samples& train_set, const std::string& target,
                       const std::string& feature_set, const TrainConfig& config) {
    auto model = make_classifier(ModelKind::FeedforwardNN, train_set.dim, 0, 0, config);
    train(*model, train_set, config);
    return pack_artifact(*model, target, feature_set, config, 0, 0);
}

ModelArtifact fit_lstm(const Samples& train_set, int seq_len, int feat_dim,
                       const std::string& target, const std::string& feature_set,
                       const TrainConfig& config) {
    if (seq_len * feat_dim != train_set.dim) {
        throw DataError("fit_lstm: sequence shape does not match sample dim");
    }
    auto model = make_classifier(ModelKind::Lstm, train_set.dim, seq_len, feat_dim, config);
    train(*model, train_set, config);
    return pack_artifact(*model, target, feature_set, config, seq_len, feat_dim);
}

std::vector<double> score_random(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DataError("score_random: n must be >= 1");
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        scores[i] = uniform01({seed, kRandomScoreDomain, std::uint64_t(i)});
    }
    return scores;
}

std::vector<double> score(const ModelArtifact& artifact, std::span<const double> x, int dim,
                          int jobs) {
    if (dim != artifact.input_dim) throw DataError("score: feature dim mismatch");
    if (dim <= 0 || x.size() % std::size_t(dim) != 0) throw DataError("score: ragged input");
    const std::size_t n = x.size() / std::size_t(dim);
    std::vector<double> out(n);

    auto run_range = [&](std::size_t beg, std::size_t end) {
        auto model = make_classifier(artifact.kind, artifact.input_dim, artifact.seq_len,
                                     artifact.feat_dim, artifact.config);
        if (model->params().size() != artifact.weights.size()) {
            throw DataError("score: artifact weight count mismatch");
        }
        std::copy(artifact.weights.begin(), artifact.weights.end(), model->params().begin());
        for (std::size_t i = beg; i < end; ++i) {
            out[i] = model->score_one(x.subspan(i * std::size_t(dim), std::size_t(dim)));
        }
    };

    jobs = std::max(1, std::min<int>(jobs, int(n)));
    if (jobs == 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> workers;
        const std::size_t chunk = (n + std::size_t(jobs) - 1) / std::size_t(jobs);
        for (int j = 0; j < jobs; ++j) {
            const std::size_t beg = std::size_t(j) * chunk;
            const std::size_t end = std::min(n, beg + chunk);
            if (beg >= end) break;
            workers.emplace_back(run_range, beg, end);
        }
        for (auto& w : workers) w.join();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Artifact persistence

void save_artifact(const ModelArtifact& artifact, const std::string& json_path,
                   const std::string& bin_path) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& [name, dims] : artifact.shapes) {
        shapes.push_back(nlohmann::json::array({name, dims}));
    }
    nlohmann::json manifest{
        {"kind", model_kind_slug(artifact.kind)},
        {"target", artifact.target},
        {"feature_set", artifact.feature_set},
        {"input_dim", artifact.input_dim},
        {"seq_len", artifact.seq_len},
        {"feat_dim", artifact.feat_dim},
        {"train_config", artifact.config.to_json()},
        {"shapes", shapes},
        {"weights_file", std::filesystem::path(bin_path).filename().string()},
        {"weights_count", artifact.weights.size()},
        {"weights_dtype", "float64_le"},
        {"standardization", artifact.stats ? artifact.stats->to_json() : nlohmann::json()},
    };
    std::ofstream jf(json_path);
    if (!jf) throw DataError("cannot write artifact manifest: " + json_path);
    jf << manifest.dump(2) << '\n';

    std::ofstream bf(bin_path, std::ios::binary);
    if (!bf) throw DataError("cannot write artifact weights: " + bin_path);
    bf.write(reinterpret_cast<const char*>(artifact.weights.data()),
             std::streamsize(artifact.weights.size() * sizeof(double)));
}

ModelArtifact load_artifact(const std::string& json_path) {
    std::ifstream jf(json_path);
    if (!jf) throw DataError("cannot open artifact manifest: " + json_path);
    nlohmann::json manifest;
    jf >> manifest;

    ModelArtifact artifact;
    auto kind = parse_model_kind(manifest.at("kind").get<std::string>());
    if (!kind) throw DataError("artifact manifest: unknown kind");
    artifact.kind = *kind;
    artifact.target = manifest.at("target").get<std::string>();
    artifact.feature_set = manifest.at("feature_set").get<std::string>();
    artifact.input_dim = manifest.at("input_dim").get<int>();
    artifact.seq_len = manifest.at("seq_len").get<int>();
    artifact.feat_dim = manifest.at("feat_dim").get<int>();
    artifact.config = TrainConfig::from_json(manifest.at("train_config"));
    for (const auto& s : manifest.at("shapes")) {
        artifact.shapes.push_back({s.at(0).get<std::string>(), s.at(1).get<std::vector<int>>()});
    }
    if (!manifest.at("standardization").is_null()) {
        artifact.stats = features::StandardizationStats::from_json(manifest.at("standardization"));
    }

    const auto count = manifest.at("weights_count").get<std::size_t>();
    const auto bin_path = std::filesystem::path(json_path).parent_path() /
                          manifest.at("weights_file").get<std::string>();
    std::ifstream bf(bin_path, std::ios::binary);
    if (!bf) throw DataError("cannot open artifact weights: " + bin_path.string());
    artifact.weights.resize(count);
    bf.read(reinterpret_cast<char*>(artifact.weights.data()),
            std::streamsize(count * sizeof(double)));
    if (std::size_t(bf.gcount()) != count * sizeof(double)) {
        throw DataError("artifact weights truncated: " + bin_path.string());
    }
    return artifact;
}

}  // namespace ivrlens::models
