#include "layoutprior/scorenet.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "layoutprior/dataset_io.hpp"
#include "layoutprior/util.hpp"

namespace layoutprior {

// --- schedule ----------------------------------------------------------------

void NoiseSchedule::validate() const {
    if (!(sigma_min > 0.0 && sigma_min < sigma_max && std::isfinite(sigma_max))) {
        throw UsageError("noise schedule requires 0 < sigma_min < sigma_max");
    }
}

double NoiseSchedule::sigma(double t) const {
    if (!(t >= 0.0 && t <= 1.0)) throw NumericalError("sigma: t = " + std::to_string(t) + " outside [0, 1]");
    return sigma_min * std::pow(sigma_max / sigma_min, t);
}

double NoiseSchedule::sigma_dot(double t) const { return sigma(t) * std::log(sigma_max / sigma_min); }

// --- config / params -----------------------------------------------------------

void ScoreNetConfig::validate() const {
    if (hidden_width < 8 || head_width < 8 || time_embed_dim < 8) throw UsageError("network widths must be >= 8");
    if (time_embed_dim % 2 != 0) throw UsageError("time embedding dimension must be even");
    if (vocab_size < 1) throw UsageError("vocab size must be positive");
    if (!(fourier_scale > 0.0) || !(sigma_data > 0.0)) throw UsageError("fourier scale and sigma_data must be > 0");
    schedule.validate();
}

namespace {

struct Shape {
    const char* name;
    int rows;
    int cols;
};

std::array<Shape, kNumParams> shapes(const ScoreNetConfig& c) {
    const int d = c.node_feature_dim();
    const int h = c.hidden_width;
    const int e = c.time_embed_dim;
    const int f = c.head_width;
    return {{
        {"time.proj.weight", e, e},
        {"time.proj.bias", 1, e},
        {"conv1.lin1.weight", 2 * d, h},
        {"conv1.lin1.bias", 1, h},
        {"conv1.lin2.weight", h, h},
        {"conv1.lin2.bias", 1, h},
        {"conv2.lin1.weight", 2 * h, h},
        {"conv2.lin1.bias", 1, h},
        {"conv2.lin2.weight", h, h},
        {"conv2.lin2.bias", 1, h},
        {"head.lin1.weight", 2 * h + e, f},
        {"head.lin1.bias", 1, f},
        {"head.lin2.weight", f, 2},
        {"head.lin2.bias", 1, 2},
    }};
}

// fan-in of the layer each tensor belongs to
int fan_in(ParamId id, const ScoreNetConfig& c) {
    const auto s = shapes(c);
    const int weight = (id % 2 == 0) ? id : id - 1;
    return s[static_cast<std::size_t>(weight)].rows;
}

}  // namespace

ScoreNetParams::ScoreNetParams(const ScoreNetConfig& config) : config_(config) {
    config_.validate();
    const auto s = shapes(config_);
    for (int id = 0; id < kNumParams; ++id) {
        auto& t = tensors_[static_cast<std::size_t>(id)];
        t.name = s[static_cast<std::size_t>(id)].name;
        t.value.resize(s[static_cast<std::size_t>(id)].rows, s[static_cast<std::size_t>(id)].cols);
        t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
        Rng rng = stream_rng(config_.seed, static_cast<std::uint64_t>(id));
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(static_cast<ParamId>(id), config_)));
        for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = uniform(rng, -bound, bound);
    }
    Rng rng = stream_rng(config_.seed, 1000);
    fourier_freq_.resize(config_.time_embed_dim / 2);
    for (auto& f : fourier_freq_) f = config_.fourier_scale * standard_normal(rng);
}

void ScoreNetParams::set_fourier_freq(Vector f) {
    if (f.size() != config_.time_embed_dim / 2) throw DataError("fourier frequency count does not match config");
    fourier_freq_ = std::move(f);
}

std::size_t ScoreNetParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
}

void ScoreNetParams::zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
}

bool ScoreNetParams::all_finite() const {
    for (const auto& t : tensors_) {
        if (!t.value.allFinite()) return false;
    }
    return true;
}

// --- batch -------------------------------------------------------------------

void GraphBatch::validate(const ScoreNetConfig& config) const {
    const auto m = static_cast<Eigen::Index>(labels.size());
    if (positions.rows() != m || positions.cols() != 2 || sizes.rows() != m || sizes.cols() != 2) {
        throw DataError("graph batch: position/size arrays do not match node count");
    }
    if (offsets.size() != times.size() + 1 || offsets.front() != 0 || offsets.back() != labels.size()) {
        throw DataError("graph batch: scene offsets inconsistent with node count");
    }
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        if (offsets[s + 1] <= offsets[s]) throw DataError("graph batch: empty scene");
    }
    for (double t : times) {
        if (!(t > 0.0 && t <= 1.0)) throw DataError("graph batch: time outside (0, 1]");
    }
    for (int l : labels) {
        if (l < 0 || l >= config.vocab_size) throw DataError("graph batch: label outside vocab");
    }
    if (!positions.allFinite()) throw DataError("graph batch: non-finite positions");
}

void append_scene(GraphBatch& batch, const std::vector<ObjectCondition>& conditions, const Layout& layout, double t) {
    if (conditions.size() != layout.size()) throw DataError("append_scene: conditions/positions length mismatch");
    if (batch.offsets.empty()) batch.offsets.push_back(0);
    const auto old = batch.positions.rows();
    const auto n = static_cast<Eigen::Index>(conditions.size());
    batch.positions.conservativeResize(old + n, 2);
    batch.sizes.conservativeResize(old + n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        batch.positions(old + i, 0) = layout.positions[k].x;
        batch.positions(old + i, 1) = layout.positions[k].y;
        batch.sizes(old + i, 0) = conditions[k].size.x;
        batch.sizes(old + i, 1) = conditions[k].size.y;
        batch.labels.push_back(conditions[k].label);
    }
    batch.offsets.push_back(batch.labels.size());
    batch.times.push_back(t);
}

Vector time_embed(const ScoreNetParams& params, double t) {
    if (!std::isfinite(t)) throw NumericalError("time_embed: non-finite t");
    const auto& f = params.fourier_freq();
    const auto half = f.size();
    Vector out(2 * half);
    for (Eigen::Index k = 0; k < half; ++k) {
        const double arg = 2.0 * std::numbers::pi * f[k] * t;
        out[k] = std::sin(arg);
        out[half + k] = std::cos(arg);
    }
    return out;
}

// --- activations ---------------------------------------------------------------

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix activate(const Matrix& x, Activation a) {
    if (a == Activation::relu) return x.cwiseMax(0.0);
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
}

Matrix activate_grad(const Matrix& pre, Activation a) {
    if (a == Activation::relu) return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    return pre.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 + v * (1.0 - s));
    });
}

void check_finite(const Matrix& m, const char* layer) {
    if (!m.allFinite()) throw NumericalError(std::string("non-finite activation in layer ") + layer);
}

}  // namespace

// --- edge convolution ------------------------------------------------------------

EdgeGraph EdgeGraph::fully_connected(const std::vector<std::size_t>& offsets) {
    EdgeGraph g;
    const std::size_t m = offsets.empty() ? 0 : offsets.back();
    g.start.reserve(m + 1);
    g.start.push_back(0);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i) {
            for (std::size_t j = offsets[s]; j < offsets[s + 1]; ++j) {
                if (i == j) continue;
                g.center.push_back(static_cast<int>(i));
                g.neighbor.push_back(static_cast<int>(j));
            }
            g.start.push_back(g.center.size());
        }
    }
    return g;
}

namespace {

// Row-by-row product: each output row goes through the same vector-matrix kernel wherever it
// sits in the matrix, so reordering nodes reorders the result bit for bit. Blocked GEMM treats
// edge rows differently and breaks that. For these small widths it is also not slower.
template <class A, class B>
Matrix row_product(const A& a, const B& b) {
    Matrix out(a.rows(), b.cols());
    for (Eigen::Index r = 0; r < a.rows(); ++r) out.row(r).noalias() = a.row(r) * b;
    return out;
}

}  // namespace

Matrix edge_conv_forward(const Matrix& input, const EdgeGraph& graph, const EdgeConvWeights& w, Activation act,
                         Aggregation agg, EdgeConvTape* tape) {
    const Eigen::Index d = input.cols();
    const Eigen::Index m = input.rows();
    const Eigen::Index h = w.w2.cols();
    if (w.w1.rows() != 2 * d || w.w1.cols() != h || w.w2.rows() != h || w.b1.cols() != h || w.b2.cols() != h) {
        throw DataError("edge_conv: weight shapes do not match input width");
    }
    if (static_cast<Eigen::Index>(graph.start.size()) != m + 1) throw DataError("edge_conv: graph/node mismatch");

    // [h_i, h_j - h_i] W1 = h_i (W1_top - W1_bot) + h_j W1_bot
    const Matrix w_center = w.w1.topRows(d) - w.w1.bottomRows(d);
    const Matrix center_part = row_product(input, w_center);
    const Matrix neighbor_part = row_product(input, w.w1.bottomRows(d));
    const auto ne = static_cast<Eigen::Index>(graph.num_edges());
    Matrix pre1(ne, h);
    for (Eigen::Index e = 0; e < ne; ++e) {
        pre1.row(e) = center_part.row(graph.center[static_cast<std::size_t>(e)]) +
                      neighbor_part.row(graph.neighbor[static_cast<std::size_t>(e)]) + w.b1;
    }
    Matrix act1 = activate(pre1, act);
    Matrix pre2 = row_product(act1, w.w2);
    pre2.rowwise() += w.b2.row(0);
    const Matrix act2 = activate(pre2, act);

    Matrix out = Matrix::Zero(m, h);
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
    if (agg == Aggregation::max) argmax.setConstant(m, h, -1);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto begin = static_cast<Eigen::Index>(graph.start[static_cast<std::size_t>(i)]);
        const auto end = static_cast<Eigen::Index>(graph.start[static_cast<std::size_t>(i) + 1]);
        if (begin == end) continue;
        if (agg == Aggregation::mean) {
            out.row(i) = act2.middleRows(begin, end - begin).colwise().mean();
            continue;
        }
        for (Eigen::Index k = 0; k < h; ++k) {
            Eigen::Index best = begin;
            for (Eigen::Index e = begin + 1; e < end; ++e) {
                if (act2(e, k) > act2(best, k)) best = e;
            }
            out(i, k) = act2(best, k);
            argmax(i, k) = static_cast<int>(best);
        }
    }
    if (tape) {
        tape->input = input;
        tape->pre1 = std::move(pre1);
        tape->act1 = std::move(act1);
        tape->pre2 = std::move(pre2);
        tape->argmax = std::move(argmax);
    }
    return out;
}

Matrix edge_conv_backward(const EdgeConvTape& tape, const EdgeGraph& graph, const EdgeConvWeights& w, Activation act,
                          Aggregation agg, const Matrix& d_out, EdgeConvGrads grads) {
    const Eigen::Index d = tape.input.cols();
    const Eigen::Index m = tape.input.rows();
    const Eigen::Index h = w.w2.cols();
    if (d_out.rows() != m || d_out.cols() != h) throw DataError("edge_conv_backward: upstream shape mismatch");
    const auto ne = static_cast<Eigen::Index>(graph.num_edges());

    Matrix d_act2 = Matrix::Zero(ne, h);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto begin = static_cast<Eigen::Index>(graph.start[static_cast<std::size_t>(i)]);
        const auto end = static_cast<Eigen::Index>(graph.start[static_cast<std::size_t>(i) + 1]);
        if (begin == end) continue;
        if (agg == Aggregation::mean) {
            const Eigen::RowVectorXd share = d_out.row(i) / static_cast<double>(end - begin);
            for (Eigen::Index e = begin; e < end; ++e) d_act2.row(e) += share;
            continue;
        }
        for (Eigen::Index k = 0; k < h; ++k) d_act2(tape.argmax(i, k), k) += d_out(i, k);
    }
    const Matrix d_pre2 = d_act2.cwiseProduct(activate_grad(tape.pre2, act));
    grads.w2.noalias() += tape.act1.transpose() * d_pre2;
    grads.b2 += d_pre2.colwise().sum();
    const Matrix d_pre1 = (d_pre2 * w.w2.transpose()).cwiseProduct(activate_grad(tape.pre1, act));
    grads.b1 += d_pre1.colwise().sum();

    Matrix d_center = Matrix::Zero(m, h);
    Matrix d_neighbor = Matrix::Zero(m, h);
    for (Eigen::Index e = 0; e < ne; ++e) {
        d_center.row(graph.center[static_cast<std::size_t>(e)]) += d_pre1.row(e);
        d_neighbor.row(graph.neighbor[static_cast<std::size_t>(e)]) += d_pre1.row(e);
    }
    const Matrix g_center = tape.input.transpose() * d_center;
    const Matrix g_neighbor = tape.input.transpose() * d_neighbor;
    grads.w1.topRows(d) += g_center;
    grads.w1.bottomRows(d) += g_neighbor - g_center;

    return d_center * (w.w1.topRows(d) - w.w1.bottomRows(d)).transpose() +
           d_neighbor * w.w1.bottomRows(d).transpose();
}

// --- full network ------------------------------------------------------------------

namespace {

EdgeConvWeights conv_weights(const ScoreNetParams& p, int first) {
    return {p[static_cast<ParamId>(first)].value, p[static_cast<ParamId>(first + 1)].value,
            p[static_cast<ParamId>(first + 2)].value, p[static_cast<ParamId>(first + 3)].value};
}

EdgeConvGrads conv_grads(ScoreNetParams& p, int first) {
    return {p[static_cast<ParamId>(first)].grad, p[static_cast<ParamId>(first + 1)].grad,
            p[static_cast<ParamId>(first + 2)].grad, p[static_cast<ParamId>(first + 3)].grad};
}

}  // namespace

Matrix forward(const ScoreNetParams& params, const GraphBatch& batch, ForwardTape* tape) {
    const auto& cfg = params.config();
    batch.validate(cfg);
    const auto m = static_cast<Eigen::Index>(batch.num_nodes());
    const auto s = static_cast<Eigen::Index>(batch.num_scenes());
    const int h = cfg.hidden_width;
    const int e = cfg.time_embed_dim;

    ForwardTape local;
    ForwardTape& tp = tape ? *tape : local;
    tp.nodes = batch.num_nodes();
    tp.graph = EdgeGraph::fully_connected(batch.offsets);

    std::vector<Eigen::Index> scene_of(static_cast<std::size_t>(m));
    tp.node_sigma.resize(m);
    tp.features = Matrix::Zero(m, cfg.node_feature_dim());
    for (Eigen::Index sc = 0; sc < s; ++sc) {
        const double sigma = cfg.schedule.sigma(batch.times[static_cast<std::size_t>(sc)]);
        const double c_in = 1.0 / std::sqrt(cfg.sigma_data * cfg.sigma_data + sigma * sigma);
        for (auto i = batch.offsets[static_cast<std::size_t>(sc)]; i < batch.offsets[static_cast<std::size_t>(sc) + 1];
             ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            scene_of[i] = sc;
            tp.node_sigma[r] = sigma;
            tp.features(r, 0) = c_in * batch.positions(r, 0);
            tp.features(r, 1) = c_in * batch.positions(r, 1);
            tp.features(r, 2) = batch.sizes(r, 0);
            tp.features(r, 3) = batch.sizes(r, 1);
            tp.features(r, 4 + batch.labels[i]) = 1.0;
        }
    }

    const Matrix h1 = edge_conv_forward(tp.features, tp.graph, conv_weights(params, kConv1W1), cfg.activation,
                                        cfg.aggregation, &tp.conv1);
    check_finite(h1, "conv1");
    const Matrix h2 =
        edge_conv_forward(h1, tp.graph, conv_weights(params, kConv2W1), cfg.activation, cfg.aggregation, &tp.conv2);
    check_finite(h2, "conv2");

    tp.fourier.resize(s, e);
    for (Eigen::Index sc = 0; sc < s; ++sc) {
        tp.fourier.row(sc) = time_embed(params, batch.times[static_cast<std::size_t>(sc)]).transpose();
    }
    tp.time_pre = tp.fourier * params[kTimeW].value;
    tp.time_pre.rowwise() += params[kTimeB].value.row(0);
    const Matrix temb = activate(tp.time_pre, cfg.activation);
    check_finite(temb, "time");

    tp.head_input.resize(m, 2 * h + e);
    tp.head_input.leftCols(h) = h1;
    tp.head_input.middleCols(h, h) = h2;
    for (Eigen::Index i = 0; i < m; ++i) tp.head_input.row(i).tail(e) = temb.row(scene_of[static_cast<std::size_t>(i)]);

    tp.head_pre = row_product(tp.head_input, params[kHeadW1].value);
    tp.head_pre.rowwise() += params[kHeadB1].value.row(0);
    tp.head_act = activate(tp.head_pre, cfg.activation);
    Matrix out = row_product(tp.head_act, params[kHeadW2].value);
    out.rowwise() += params[kHeadB2].value.row(0);
    for (Eigen::Index i = 0; i < m; ++i) out.row(i) /= tp.node_sigma[i];
    check_finite(out, "head");
    return out;
}

void backward(ScoreNetParams& params, const GraphBatch& batch, const ForwardTape& tape, const Matrix& upstream) {
    const auto& cfg = params.config();
    const auto m = static_cast<Eigen::Index>(batch.num_nodes());
    if (tape.nodes != batch.num_nodes() || tape.head_act.rows() != m) {
        throw DataError("backward: tape does not belong to this batch");
    }
    if (upstream.rows() != m || upstream.cols() != 2) throw DataError("backward: upstream gradient shape mismatch");
    const int h = cfg.hidden_width;
    const int e = cfg.time_embed_dim;
    const auto s = static_cast<Eigen::Index>(batch.num_scenes());

    Matrix d_out = upstream;
    for (Eigen::Index i = 0; i < m; ++i) d_out.row(i) /= tape.node_sigma[i];

    params[kHeadW2].grad.noalias() += tape.head_act.transpose() * d_out;
    params[kHeadB2].grad += d_out.colwise().sum();
    const Matrix d_head_pre =
        (d_out * params[kHeadW2].value.transpose()).cwiseProduct(activate_grad(tape.head_pre, cfg.activation));
    params[kHeadW1].grad.noalias() += tape.head_input.transpose() * d_head_pre;
    params[kHeadB1].grad += d_head_pre.colwise().sum();
    const Matrix d_head_in = d_head_pre * params[kHeadW1].value.transpose();

    Matrix d_temb = Matrix::Zero(s, e);
    for (Eigen::Index sc = 0; sc < s; ++sc) {
        const auto b = static_cast<Eigen::Index>(batch.offsets[static_cast<std::size_t>(sc)]);
        const auto n = static_cast<Eigen::Index>(batch.offsets[static_cast<std::size_t>(sc) + 1]) - b;
        d_temb.row(sc) = d_head_in.block(b, 2 * h, n, e).colwise().sum();
    }
    const Matrix d_time_pre = d_temb.cwiseProduct(activate_grad(tape.time_pre, cfg.activation));
    params[kTimeW].grad.noalias() += tape.fourier.transpose() * d_time_pre;
    params[kTimeB].grad += d_time_pre.colwise().sum();

    Matrix d_h1 = d_head_in.leftCols(h);
    const Matrix d_h2 = d_head_in.middleCols(h, h);
    d_h1 += edge_conv_backward(tape.conv2, tape.graph, conv_weights(params, kConv2W1), cfg.activation,
                               cfg.aggregation, d_h2, conv_grads(params, kConv2W1));
    (void)edge_conv_backward(tape.conv1, tape.graph, conv_weights(params, kConv1W1), cfg.activation, cfg.aggregation,
                             d_h1, conv_grads(params, kConv1W1));
}

// --- checkpoint ----------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'L', 'P', 'C', 'K', 'P', 'T', '\0', '\1'};

template <typename UInt>
void put_le(std::string& out, UInt v) {
    for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename UInt>
    UInt get() {
        need(sizeof(UInt));
        UInt v = 0;
        for (std::size_t i = 0; i < sizeof(UInt); ++i) {
            v |= static_cast<UInt>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(UInt);
        return v;
    }
    std::string take(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw DataError("checkpoint truncated");
    }
    const std::string& bytes_;
    std::size_t pos_{0};
};

void put_array(std::string& out, const std::string& name, const Matrix& m) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
}

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "silu"; }
const char* to_string(Aggregation a) { return a == Aggregation::max ? "max" : "mean"; }

}  // namespace

std::string serialize_checkpoint(const ScoreNetParams& params, const CategoryVocab& vocab) {
    const auto& c = params.config();
    if (static_cast<std::size_t>(c.vocab_size) != vocab.size()) throw DataError("checkpoint: vocab size mismatch");
    nlohmann::json header = {
        {"config",
         {{"hidden_width", c.hidden_width},
          {"time_embed_dim", c.time_embed_dim},
          {"head_width", c.head_width},
          {"vocab_size", c.vocab_size},
          {"activation", to_string(c.activation)},
          {"aggregation", to_string(c.aggregation)},
          {"seed", c.seed},
          {"fourier_scale", c.fourier_scale},
          {"sigma_data", c.sigma_data},
          {"sigma_min", c.schedule.sigma_min},
          {"sigma_max", c.schedule.sigma_max}}},
        {"vocab", nlohmann::json::parse(vocab_to_json(vocab))},
        {"vocab_hash", hex64(vocab.hash())},
    };
    const std::string h = header.dump();
    std::string out(kMagic, sizeof kMagic);
    put_le<std::uint32_t>(out, kCheckpointVersion);
    put_le<std::uint64_t>(out, h.size());
    out += h;
    put_le<std::uint32_t>(out, kNumParams + 1);
    Matrix freq(1, params.fourier_freq().size());
    freq.row(0) = params.fourier_freq().transpose();
    put_array(out, "time.fourier_freq", freq);
    for (const auto& t : params.tensors()) put_array(out, t.name, t.value);
    return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
    Reader r(bytes);
    if (r.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw DataError("not a checkpoint file");
    if (const auto v = r.get<std::uint32_t>(); v != kCheckpointVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(v));
    }
    const auto header_len = r.get<std::uint64_t>();
    nlohmann::json header;
    ScoreNetConfig cfg;
    CategoryVocab vocab;
    try {
        header = nlohmann::json::parse(r.take(static_cast<std::size_t>(header_len)));
        const auto& c = header.at("config");
        cfg.hidden_width = c.at("hidden_width").get<int>();
        cfg.time_embed_dim = c.at("time_embed_dim").get<int>();
        cfg.head_width = c.at("head_width").get<int>();
        cfg.vocab_size = c.at("vocab_size").get<int>();
        cfg.activation = c.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::silu;
        cfg.aggregation = c.at("aggregation").get<std::string>() == "mean" ? Aggregation::mean : Aggregation::max;
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.fourier_scale = c.at("fourier_scale").get<double>();
        cfg.sigma_data = c.at("sigma_data").get<double>();
        cfg.schedule = {c.at("sigma_min").get<double>(), c.at("sigma_max").get<double>()};
        vocab = vocab_from_json(header.at("vocab").dump());
        if (header.at("vocab_hash").get<std::string>() != hex64(vocab.hash())) {
            throw DataError("checkpoint vocab hash mismatch");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint header: ") + e.what());
    }
    if (static_cast<std::size_t>(cfg.vocab_size) != vocab.size()) throw DataError("checkpoint: vocab size mismatch");

    Checkpoint ck{ScoreNetParams(cfg), vocab};
    const auto count = r.get<std::uint32_t>();
    if (count != kNumParams + 1) throw DataError("checkpoint: unexpected array count " + std::to_string(count));
    for (std::uint32_t a = 0; a < count; ++a) {
        const std::string name = r.take(r.get<std::uint32_t>());
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        Matrix* target = nullptr;
        Matrix freq;
        if (name == "time.fourier_freq") {
            freq.resize(1, cfg.time_embed_dim / 2);
            target = &freq;
        } else {
            for (auto& t : ck.params.tensors()) {
                if (t.name == name) target = &t.value;
            }
        }
        if (!target) throw DataError("checkpoint: unknown array '" + name + "'");
        if (rows != target->rows() || cols != target->cols()) {
            throw DataError("checkpoint: array '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", config expects " + std::to_string(target->rows()) + "x" +
                            std::to_string(target->cols()));
        }
        for (Eigen::Index i = 0; i < target->size(); ++i) target->data()[i] = std::bit_cast<double>(r.get<std::uint64_t>());
        if (freq.size() > 0) ck.params.set_fourier_freq(freq.row(0).transpose());
    }
    if (!r.done()) throw DataError("checkpoint: trailing bytes");
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ScoreNetParams& params, const CategoryVocab& vocab) {
    const auto bytes = serialize_checkpoint(params, vocab);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return deserialize_checkpoint(ss.str());
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace layoutprior
