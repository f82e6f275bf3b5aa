#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crossgru/agru.hpp"
#include "crossgru/dataset.hpp"
#include "crossgru/gat.hpp"
#include "crossgru/gradcheck.hpp"
#include "crossgru/latent.hpp"
#include "crossgru/relgraph.hpp"

namespace crossgru::net {

using num::Mat;
using num::Param;
using num::ParamRef;

// Module toggles mirror the four architecture blocks: temporal encoder (I),
// cross-sectional encoder (II), latent banks with cross-attention (III),
// graph-attention prediction head (IV). With IV off, a plain linear readout
// maps the fused features to scores.
struct ModelConfig {
    int his_t = 10;
    int label_t = 5;
    double judge_value = 0.8;

    std::vector<int> gru_sizes = {32, 10};
    int hidden_size = 32; // temporal stream dim after projection
    int gat_hidden = 32;
    int gat_out = 4;
    int gat_heads = 4;
    int head_hidden = 32;
    int cross_heads = 4;
    int d_r = 32;
    int d_i = 0; // 0 = tied to the paired stream dim; conflicting values are overridden

    double learning_rate = 0.0002;
    int batch_size = 32;
    int epochs = 100;
    std::uint64_t seed = 1;

    bool use_agru_attention = true;
    bool use_gat_encoder = true;
    bool use_latent = true;
    bool use_head_gat = true;

    agru::GruMode gru_mode = agru::GruMode::Improved;
    agru::AttnScope attn_scope = agru::AttnScope::Window;

    int temporal_dim() const { return hidden_size; }
    int cross_dim() const { return gat_out; }

    int fused_dim() const {
        int d = 0;
        if (use_agru_attention) d += temporal_dim();
        if (use_gat_encoder) d += cross_dim();
        if (use_latent && use_agru_attention) d += temporal_dim();
        if (use_latent && use_gat_encoder) d += cross_dim();
        return d;
    }

    std::string ablation_label() const {
        std::string s;
        auto app = [&](const char* tag) {
            if (!s.empty()) s += "+";
            s += tag;
        };
        if (use_agru_attention) app("I");
        if (use_gat_encoder) app("II");
        if (use_latent) app("III");
        if (use_head_gat) app("IV");
        return s;
    }

    void validate() const {
        if (his_t < 1 || label_t < 1) throw ConfigError("config: his_t and label_t must be >= 1");
        if (gru_sizes.empty()) throw ConfigError("config: gru_sizes must not be empty");
        for (int s : gru_sizes)
            if (s < 1) throw ConfigError("config: gru layer sizes must be positive");
        if (hidden_size < 1 || gat_hidden < 1 || gat_out < 1 || head_hidden < 1)
            throw ConfigError("config: layer sizes must be positive");
        if (gat_heads < 1 || cross_heads < 1) throw ConfigError("config: head counts must be positive");
        if (d_r < 1) throw ConfigError("config: d_r must be >= 1");
        if (!(learning_rate > 0)) throw ConfigError("config: learning rate must be positive");
        if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
        if (!(use_agru_attention || use_gat_encoder))
            throw ConfigError("config: at least one of the temporal/cross-sectional encoders must be enabled");
        if (gat_hidden % gat_heads != 0)
            throw ConfigError("config: gat_hidden must be divisible by gat_heads");
        if (use_latent) {
            if (use_agru_attention && hidden_size % cross_heads != 0)
                throw ConfigError("config: cross_heads must divide hidden_size");
            if (use_gat_encoder && gat_out % cross_heads != 0)
                throw ConfigError("config: cross_heads must divide gat_out");
        }
    }
};

template <typename T>
struct Model {
    ModelConfig cfg;

    agru::Encoder<T> gru;
    Param<T> proj_w, proj_b; // lifts the top GRU state to hidden_size
    gat::Stack<T> encoder;
    latent::Bank<T> bank1, bank2;
    latent::CrossAttn<T> cross1, cross2;
    gat::Stack<T> head;
    Param<T> lin_w, lin_b; // readout when the head GAT is toggled off

    explicit Model(const ModelConfig& config) : cfg(config) {
        cfg.validate();
        Rng rng(cfg.seed);
        if (cfg.use_agru_attention) {
            gru = agru::Encoder<T>(data::kFeatureCount, cfg.gru_sizes, cfg.gru_mode, cfg.attn_scope, rng);
            proj_w = Param<T>(num::xavier_uniform<T>(cfg.hidden_size, gru.out_dim(), gru.out_dim(),
                                                     cfg.hidden_size, rng));
            proj_b = Param<T>(Mat<T>(1, cfg.hidden_size));
        }
        if (cfg.use_gat_encoder)
            encoder = gat::make_encoder_stack<T>(data::kFeatureCount, cfg.gat_hidden, cfg.gat_out,
                                                 cfg.gat_heads, rng);
        if (cfg.use_latent) {
            if (cfg.d_i != 0 && cfg.use_agru_attention && cfg.d_i != cfg.temporal_dim())
                warn("latent: configured d_i=" + std::to_string(cfg.d_i) +
                     " conflicts with temporal stream dim " + std::to_string(cfg.temporal_dim()) +
                     "; the stream dim wins");
            if (cfg.d_i != 0 && cfg.use_gat_encoder && cfg.d_i != cfg.cross_dim())
                warn("latent: configured d_i=" + std::to_string(cfg.d_i) +
                     " conflicts with cross-sectional stream dim " + std::to_string(cfg.cross_dim()) +
                     "; the stream dim wins");
            if (cfg.use_agru_attention) {
                bank1 = latent::Bank<T>(cfg.d_r, cfg.temporal_dim(), rng);
                cross1 = latent::CrossAttn<T>(cfg.temporal_dim(), cfg.cross_heads, rng);
            }
            if (cfg.use_gat_encoder) {
                bank2 = latent::Bank<T>(cfg.d_r, cfg.cross_dim(), rng);
                cross2 = latent::CrossAttn<T>(cfg.cross_dim(), cfg.cross_heads, rng);
            }
        }
        if (cfg.use_head_gat) {
            head = gat::make_head_stack<T>(cfg.fused_dim(), cfg.head_hidden, rng);
        } else {
            lin_w = Param<T>(num::xavier_uniform<T>(cfg.fused_dim(), 1, cfg.fused_dim(), 1, rng));
            lin_b = Param<T>(Mat<T>(1, 1));
        }
    }

    // Fixed-order registry; optimizer steps, checkpoints and the census all
    // walk parameters in exactly this order.
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        if (cfg.use_agru_attention) {
            gru.collect("agru", out);
            out.push_back({"proj.W", &proj_w});
            out.push_back({"proj.b", &proj_b});
        }
        if (cfg.use_gat_encoder) encoder.collect("gatenc", out);
        if (cfg.use_latent) {
            if (cfg.use_agru_attention) {
                out.push_back({"latent1.R", &bank1.R});
                cross1.collect("latent1", out);
            }
            if (cfg.use_gat_encoder) {
                out.push_back({"latent2.R", &bank2.R});
                cross2.collect("latent2", out);
            }
        }
        if (cfg.use_head_gat) {
            head.collect("head", out);
        } else {
            out.push_back({"readout.W", &lin_w});
            out.push_back({"readout.b", &lin_b});
        }
        return out;
    }

    long long param_count() {
        long long c = 0;
        for (const auto& pr : params()) c += static_cast<long long>(pr.p->value.size());
        return c;
    }

    void zero_grads() {
        for (auto& pr : params()) pr.p->zero_grad();
    }
};

template <typename T>
struct Trace {
    agru::EncoderTrace<T> gru;
    Mat<T> a1; // projected temporal stream
    gat::StackTrace<T> encoder;
    latent::CrossAttnTrace<T> c1, c2;
    Mat<T> z;
    gat::StackTrace<T> head;
    Mat<T> preds_col; // m x 1

    std::vector<T> predictions() const {
        return preds_col.v;
    }
};

namespace detail {

template <typename T>
void place_cols(Mat<T>& dst, const Mat<T>& src, int col0) {
    for (int i = 0; i < src.rows; ++i)
        for (int c = 0; c < src.cols; ++c) dst(i, col0 + c) = src(i, c);
}

template <typename T>
Mat<T> take_cols(const Mat<T>& src, int col0, int width) {
    Mat<T> out(src.rows, width);
    for (int i = 0; i < src.rows; ++i)
        for (int c = 0; c < width; ++c) out(i, c) = src(i, col0 + c);
    return out;
}

} // namespace detail

// One full pass over a single trading day: `window` holds his_t input
// matrices (active stocks as rows), `day_features` the anchor day's slice,
// `graph` the correlation graph induced on the same active stocks.
template <typename T>
Trace<T> forward(const Model<T>& model, const std::vector<Mat<T>>& window,
                 const Mat<T>& day_features, const rel::CorrelationGraph& graph) {
    const ModelConfig& cfg = model.cfg;
    Trace<T> tr;
    const int m = day_features.rows;

    int d_z = cfg.fused_dim();
    tr.z = Mat<T>(m, d_z);
    int col = 0;

    if (cfg.use_agru_attention) {
        tr.gru = agru::encode(model.gru, window);
        tr.a1 = num::matmul_nt(tr.gru.final_state(), model.proj_w.value);
        num::add_row_inplace(tr.a1, model.proj_b.value);
        detail::place_cols(tr.z, tr.a1, col);
        col += cfg.temporal_dim();
    }
    if (cfg.use_gat_encoder) {
        tr.encoder = gat::stack_forward(model.encoder, day_features, graph);
        detail::place_cols(tr.z, tr.encoder.out(), col);
        col += cfg.cross_dim();
    }
    if (cfg.use_latent) {
        if (cfg.use_agru_attention) {
            tr.c1 = latent::cross_forward(model.cross1, tr.a1, model.bank1.R.value);
            detail::place_cols(tr.z, tr.c1.out, col);
            col += cfg.temporal_dim();
        }
        if (cfg.use_gat_encoder) {
            tr.c2 = latent::cross_forward(model.cross2, tr.encoder.out(), model.bank2.R.value);
            detail::place_cols(tr.z, tr.c2.out, col);
            col += cfg.cross_dim();
        }
    }

    if (cfg.use_head_gat) {
        tr.head = gat::stack_forward(model.head, tr.z, graph);
        tr.preds_col = tr.head.out();
    } else {
        tr.preds_col = num::matmul(tr.z, model.lin_w.value);
        num::add_row_inplace(tr.preds_col, model.lin_b.value);
    }
    return tr;
}

// Accumulates parameter gradients for one day given d(loss)/d(predictions).
template <typename T>
void backward(Model<T>& model, const std::vector<Mat<T>>& window, const Mat<T>& day_features,
              const rel::CorrelationGraph& graph, const Trace<T>& tr, const std::vector<T>& d_preds) {
    const ModelConfig& cfg = model.cfg;
    const int m = day_features.rows;

    Mat<T> d_pred_col(m, 1);
    for (int i = 0; i < m; ++i) d_pred_col(i, 0) = d_preds[static_cast<std::size_t>(i)];

    Mat<T> d_z;
    if (cfg.use_head_gat) {
        d_z = gat::stack_backward(model.head, tr.z, graph, tr.head, d_pred_col);
    } else {
        num::add_inplace(model.lin_w.grad, num::matmul_tn(tr.z, d_pred_col));
        num::add_inplace(model.lin_b.grad, num::colsum(d_pred_col));
        d_z = num::matmul_nt(d_pred_col, model.lin_w.value);
    }

    int col = 0;
    Mat<T> d_a1, d_a2;
    if (cfg.use_agru_attention) {
        d_a1 = detail::take_cols(d_z, col, cfg.temporal_dim());
        col += cfg.temporal_dim();
    }
    if (cfg.use_gat_encoder) {
        d_a2 = detail::take_cols(d_z, col, cfg.cross_dim());
        col += cfg.cross_dim();
    }
    if (cfg.use_latent) {
        if (cfg.use_agru_attention) {
            Mat<T> d_b1 = detail::take_cols(d_z, col, cfg.temporal_dim());
            col += cfg.temporal_dim();
            num::add_inplace(d_a1, latent::cross_backward(model.cross1, model.bank1.R, tr.a1, tr.c1, d_b1));
        }
        if (cfg.use_gat_encoder) {
            Mat<T> d_b2 = detail::take_cols(d_z, col, cfg.cross_dim());
            col += cfg.cross_dim();
            num::add_inplace(d_a2, latent::cross_backward(model.cross2, model.bank2.R, tr.encoder.out(), tr.c2, d_b2));
        }
    }
    if (cfg.use_gat_encoder)
        gat::stack_backward(model.encoder, day_features, graph, tr.encoder, d_a2);
    if (cfg.use_agru_attention) {
        num::add_inplace(model.proj_w.grad, num::matmul_tn(d_a1, tr.gru.final_state()));
        num::add_inplace(model.proj_b.grad, num::colsum(d_a1));
        Mat<T> d_a1raw = num::matmul(d_a1, model.proj_w.value);
        agru::encode_backward(model.gru, window, tr.gru, d_a1raw);
    }
}

template <typename T>
T loss_mse(const std::vector<T>& preds, const std::vector<T>& labels) {
    if (preds.size() != labels.size()) throw Error("loss_mse: length mismatch");
    if (preds.empty()) throw Error("loss_mse: no unmasked stocks");
    T acc = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const T d = preds[i] - labels[i];
        acc += d * d;
    }
    return acc / static_cast<T>(preds.size());
}

// d(loss)/d(preds) for MSE, scaled by `scale` (used for batch averaging).
template <typename T>
std::vector<T> loss_mse_grad(const std::vector<T>& preds, const std::vector<T>& labels, T scale) {
    std::vector<T> d(preds.size());
    const T c = T(2) / static_cast<T>(preds.size()) * scale;
    for (std::size_t i = 0; i < preds.size(); ++i) d[i] = c * (preds[i] - labels[i]);
    return d;
}

// Caches induced subgraphs keyed by the active stock set; most days share
// one universe, so this is usually a single entry.
class GraphCache {
public:
    explicit GraphCache(const rel::CorrelationGraph& full) : full_(full) {}

    const rel::CorrelationGraph& get(const std::vector<int>& stocks) {
        if (static_cast<int>(stocks.size()) == full_.n) return full_;
        auto it = cache_.find(stocks);
        if (it == cache_.end()) it = cache_.emplace(stocks, full_.induce(stocks)).first;
        return it->second;
    }

private:
    const rel::CorrelationGraph& full_;
    std::map<std::vector<int>, rel::CorrelationGraph> cache_;
};

// A sample cast to the model's precision, with its induced graph resolved.
template <typename T>
struct PreparedSample {
    const data::Sample* src = nullptr;
    std::vector<Mat<T>> window;
    Mat<T> day;
    std::vector<T> labels;
    const rel::CorrelationGraph* graph = nullptr;
};

template <typename T>
PreparedSample<T> prepare_sample(const data::Sample& s, GraphCache& graphs) {
    PreparedSample<T> p;
    p.src = &s;
    p.window.reserve(s.window.size());
    for (const auto& w : s.window) {
        Mat<T> m(w.rows, w.cols);
        for (std::size_t i = 0; i < w.v.size(); ++i) m.v[i] = static_cast<T>(w.v[i]);
        p.window.push_back(std::move(m));
    }
    p.day = p.window.back();
    p.labels.reserve(s.labels.size());
    for (double y : s.labels) p.labels.push_back(static_cast<T>(y));
    p.graph = &graphs.get(s.stocks);
    return p;
}

struct EpochLoss {
    int epoch = 0;
    double train = 0.0;
    double valid = 0.0;
};

template <typename T>
double mean_loss(const Model<T>& model, const std::vector<PreparedSample<T>>& set) {
    if (set.empty()) return std::nan("");
    double acc = 0.0;
    for (const auto& s : set) {
        Trace<T> tr = forward(model, s.window, s.day, *s.graph);
        acc += static_cast<double>(loss_mse(tr.predictions(), s.labels));
    }
    return acc / static_cast<double>(set.size());
}

// Minibatch training over anchor days. Each batch averages day losses, so
// the effective step size does not scale with batch size; one Adam step per
// parameter per batch; the best-validation snapshot is restored at the end.
template <typename T>
std::vector<EpochLoss> train(Model<T>& model, const std::vector<const data::Sample*>& train_samples,
                             const std::vector<const data::Sample*>& valid_samples,
                             const rel::CorrelationGraph& graph) {
    if (train_samples.empty()) throw ConfigError("train: empty training split");
    GraphCache graphs(graph);
    std::vector<PreparedSample<T>> tr_set, va_set;
    for (const auto* s : train_samples) tr_set.push_back(prepare_sample<T>(*s, graphs));
    for (const auto* s : valid_samples) va_set.push_back(prepare_sample<T>(*s, graphs));

    num::AdamConfig<T> adam;
    adam.lr = static_cast<T>(model.cfg.learning_rate);
    adam.validate();
    auto params = model.params();

    Rng shuffle_rng(model.cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<EpochLoss> log;
    std::vector<Mat<T>> best_values;
    double best_valid = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(tr_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t batch_end = std::min(order.size(), pos + static_cast<std::size_t>(model.cfg.batch_size));
            const T inv_batch = T(1) / static_cast<T>(batch_end - pos);
            model.zero_grads();
            for (std::size_t b = pos; b < batch_end; ++b) {
                const PreparedSample<T>& s = tr_set[order[b]];
                Trace<T> trace = forward(model, s.window, s.day, *s.graph);
                const T day_loss = loss_mse(trace.predictions(), s.labels);
                if (!std::isfinite(static_cast<double>(day_loss)))
                    throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                       ", batch day index " + std::to_string(s.src->day));
                epoch_loss += static_cast<double>(day_loss);
                backward(model, s.window, s.day, *s.graph, trace,
                         loss_mse_grad(trace.predictions(), s.labels, inv_batch));
            }
            for (auto& pr : params) num::adam_step(*pr.p, adam);
            pos = batch_end;
        }
        epoch_loss /= static_cast<double>(tr_set.size());

        const double valid_loss = mean_loss(model, va_set);
        log.push_back({epoch, epoch_loss, valid_loss});
        if (!va_set.empty() && valid_loss < best_valid) {
            best_valid = valid_loss;
            best_values.clear();
            for (const auto& pr : params) best_values.push_back(pr.p->value);
        }
    }

    if (!best_values.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i].p->value = best_values[i];
    } else if (model.cfg.epochs > 0 && va_set.empty()) {
        warn("train: no validation anchors; keeping final-epoch parameters");
    }
    return log;
}

// Prediction scores for a set of anchor days, no gradient bookkeeping.
struct DayPrediction {
    int day = 0;
    std::vector<int> stocks;
    std::vector<double> scores;
    std::vector<double> labels;
};

template <typename T>
std::vector<DayPrediction> predict_scores(const Model<T>& model,
                                          const std::vector<const data::Sample*>& samples,
                                          const rel::CorrelationGraph& graph) {
    GraphCache graphs(graph);
    std::vector<DayPrediction> out;
    for (const auto* s : samples) {
        PreparedSample<T> p = prepare_sample<T>(*s, graphs);
        Trace<T> tr = forward(model, p.window, p.day, *p.graph);
        DayPrediction d;
        d.day = s->day;
        d.stocks = s->stocks;
        const auto preds = tr.predictions();
        d.scores.assign(preds.begin(), preds.end());
        d.labels = s->labels;
        out.push_back(std::move(d));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint container: versioned binary, bitwise round-trip.

namespace io {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_i64(std::ostream& os, std::int64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void put_str(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
inline std::int64_t get_i64(std::istream& is) {
    std::int64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
inline double get_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
inline std::string get_str(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    return s;
}

} // namespace io

inline void write_config_blob(std::ostream& os, const ModelConfig& c) {
    io::put_i64(os, c.his_t);
    io::put_i64(os, c.label_t);
    io::put_f64(os, c.judge_value);
    io::put_u64(os, c.gru_sizes.size());
    for (int s : c.gru_sizes) io::put_i64(os, s);
    io::put_i64(os, c.hidden_size);
    io::put_i64(os, c.gat_hidden);
    io::put_i64(os, c.gat_out);
    io::put_i64(os, c.gat_heads);
    io::put_i64(os, c.head_hidden);
    io::put_i64(os, c.cross_heads);
    io::put_i64(os, c.d_r);
    io::put_i64(os, c.d_i);
    io::put_f64(os, c.learning_rate);
    io::put_i64(os, c.batch_size);
    io::put_i64(os, c.epochs);
    io::put_u64(os, c.seed);
    const std::uint64_t flags = (c.use_agru_attention ? 1u : 0u) | (c.use_gat_encoder ? 2u : 0u) |
                                (c.use_latent ? 4u : 0u) | (c.use_head_gat ? 8u : 0u) |
                                (c.gru_mode == agru::GruMode::Classic ? 16u : 0u) |
                                (c.attn_scope == agru::AttnScope::Current ? 32u : 0u);
    io::put_u64(os, flags);
}

inline ModelConfig read_config_blob(std::istream& is) {
    ModelConfig c;
    c.his_t = static_cast<int>(io::get_i64(is));
    c.label_t = static_cast<int>(io::get_i64(is));
    c.judge_value = io::get_f64(is);
    c.gru_sizes.resize(io::get_u64(is));
    for (auto& s : c.gru_sizes) s = static_cast<int>(io::get_i64(is));
    c.hidden_size = static_cast<int>(io::get_i64(is));
    c.gat_hidden = static_cast<int>(io::get_i64(is));
    c.gat_out = static_cast<int>(io::get_i64(is));
    c.gat_heads = static_cast<int>(io::get_i64(is));
    c.head_hidden = static_cast<int>(io::get_i64(is));
    c.cross_heads = static_cast<int>(io::get_i64(is));
    c.d_r = static_cast<int>(io::get_i64(is));
    c.d_i = static_cast<int>(io::get_i64(is));
    c.learning_rate = io::get_f64(is);
    c.batch_size = static_cast<int>(io::get_i64(is));
    c.epochs = static_cast<int>(io::get_i64(is));
    c.seed = io::get_u64(is);
    const std::uint64_t flags = io::get_u64(is);
    c.use_agru_attention = flags & 1u;
    c.use_gat_encoder = flags & 2u;
    c.use_latent = flags & 4u;
    c.use_head_gat = flags & 8u;
    c.gru_mode = (flags & 16u) ? agru::GruMode::Classic : agru::GruMode::Improved;
    c.attn_scope = (flags & 32u) ? agru::AttnScope::Current : agru::AttnScope::Window;
    return c;
}

inline constexpr char kCheckpointMagic[9] = "CGCKPT01";

template <typename T>
void save_checkpoint(Model<T>& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_checkpoint: cannot write " + path);
    os.write(kCheckpointMagic, 8);
    io::put_u64(os, sizeof(T)); // precision tag
    write_config_blob(os, model.cfg);
    auto params = model.params();
    io::put_u64(os, params.size());
    for (const auto& pr : params) {
        io::put_str(os, pr.name);
        io::put_i64(os, pr.p->value.rows);
        io::put_i64(os, pr.p->value.cols);
        os.write(reinterpret_cast<const char*>(pr.p->value.v.data()),
                 static_cast<std::streamsize>(pr.p->value.v.size() * sizeof(T)));
    }
    if (!os) throw DataError("save_checkpoint: write failed for " + path);
}

template <typename T>
Model<T> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw DataError("load_checkpoint: bad magic in " + path);
    if (io::get_u64(is) != sizeof(T))
        throw DataError("load_checkpoint: precision mismatch in " + path);
    Model<T> model(read_config_blob(is));
    auto params = model.params();
    if (io::get_u64(is) != params.size())
        throw DataError("load_checkpoint: parameter census mismatch in " + path);
    for (auto& pr : params) {
        const std::string name = io::get_str(is);
        const auto rows = io::get_i64(is);
        const auto cols = io::get_i64(is);
        if (name != pr.name || rows != pr.p->value.rows || cols != pr.p->value.cols)
            throw DataError("load_checkpoint: shape mismatch for " + name + " in " + path);
        is.read(reinterpret_cast<char*>(pr.p->value.v.data()),
                static_cast<std::streamsize>(pr.p->value.v.size() * sizeof(T)));
    }
    if (!is) throw DataError("load_checkpoint: truncated file " + path);
    return model;
}

} // namespace crossgru::net
