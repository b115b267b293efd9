#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layoutprior/core.hpp"
#include "layoutprior/schedule.hpp"

namespace layoutprior {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

enum class Activation { relu, silu };
enum class Aggregation { max, mean };

struct ScoreNetConfig {
    int hidden_width{128};
    int time_embed_dim{64};  // even: half sine, half cosine features
    int head_width{320};
    int vocab_size{7};
    Activation activation{Activation::silu};
    Aggregation aggregation{Aggregation::max};
    std::uint64_t seed{0};
    double fourier_scale{16.0};
    // Positions enter the network as P / sqrt(sigma_data^2 + sigma(t)^2); the head output is
    // divided by sigma(t) to give the score.
    double sigma_data{0.5};
    NoiseSchedule schedule;

    void validate() const;
    [[nodiscard]] int node_feature_dim() const { return 4 + vocab_size; }
    friend bool operator==(const ScoreNetConfig&, const ScoreNetConfig&) = default;
};

enum ParamId : int {
    kTimeW,
    kTimeB,
    kConv1W1,
    kConv1B1,
    kConv1W2,
    kConv1B2,
    kConv2W1,
    kConv2B1,
    kConv2W2,
    kConv2B2,
    kHeadW1,
    kHeadB1,
    kHeadW2,
    kHeadB2,
    kNumParams
};

struct ParamTensor {
    std::string name;
    Matrix value;
    Matrix grad;
};

// Parameter store for the graph score network. Values are initialised from config.seed;
// gradients are accumulated by backward() and cleared by zero_grad().
class ScoreNetParams {
public:
    ScoreNetParams() = default;
    explicit ScoreNetParams(const ScoreNetConfig& config);

    [[nodiscard]] const ScoreNetConfig& config() const noexcept { return config_; }
    [[nodiscard]] ParamTensor& operator[](ParamId id) { return tensors_[id]; }
    [[nodiscard]] const ParamTensor& operator[](ParamId id) const { return tensors_[id]; }
    [[nodiscard]] std::array<ParamTensor, kNumParams>& tensors() noexcept { return tensors_; }
    [[nodiscard]] const std::array<ParamTensor, kNumParams>& tensors() const noexcept { return tensors_; }

    // Fixed Gaussian Fourier frequencies (time_embed_dim / 2 of them); not trained.
    [[nodiscard]] const Vector& fourier_freq() const noexcept { return fourier_freq_; }
    void set_fourier_freq(Vector f);

    [[nodiscard]] std::size_t parameter_count() const noexcept;
    void zero_grad();
    [[nodiscard]] bool all_finite() const;

private:
    ScoreNetConfig config_;
    std::array<ParamTensor, kNumParams> tensors_;
    Vector fourier_freq_;
};

// Scenes packed node-wise. Scene s owns nodes [offsets[s], offsets[s+1]).
struct GraphBatch {
    Matrix positions;  // M x 2
    Matrix sizes;      // M x 2
    std::vector<int> labels;
    std::vector<std::size_t> offsets;  // S + 1 entries, offsets[0] == 0
    std::vector<double> times;         // S entries

    [[nodiscard]] std::size_t num_scenes() const noexcept { return times.size(); }
    [[nodiscard]] std::size_t num_nodes() const noexcept { return labels.size(); }
    void validate(const ScoreNetConfig& config) const;
};

// Appends a scene to the batch.
void append_scene(GraphBatch& batch, const std::vector<ObjectCondition>& conditions, const Layout& positions,
                  double t);

// [sin(2 pi f_k t) ..., cos(2 pi f_k t) ...]
[[nodiscard]] Vector time_embed(const ScoreNetParams& params, double t);

// --- edge convolution ---------------------------------------------------------

// Directed edges of the fully connected scene graphs, grouped by center node and ordered by
// ascending neighbor index. Self edges are excluded.
struct EdgeGraph {
    std::vector<int> center;
    std::vector<int> neighbor;
    std::vector<std::size_t> start;  // per node, size M + 1

    [[nodiscard]] std::size_t num_edges() const noexcept { return center.size(); }
    [[nodiscard]] static EdgeGraph fully_connected(const std::vector<std::size_t>& offsets);
};

struct EdgeConvWeights {
    const Matrix& w1;  // 2d x H, rows [0, d) act on h_i, rows [d, 2d) on h_j - h_i
    const Matrix& b1;  // 1 x H
    const Matrix& w2;  // H x H
    const Matrix& b2;  // 1 x H
};

struct EdgeConvGrads {
    Matrix& w1;
    Matrix& b1;
    Matrix& w2;
    Matrix& b2;
};

struct EdgeConvTape {
    Matrix input;  // M x d
    Matrix pre1;   // E x H
    Matrix act1;   // E x H
    Matrix pre2;   // E x H
    Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;  // M x H edge ids, -1 if none
};

// h_i' = aggregate_j MLP([h_i, h_j - h_i]) with MLP = act(act(. W1 + b1) W2 + b2).
// Max aggregation keeps the first maximal neighbor; nodes without neighbors get zeros.
[[nodiscard]] Matrix edge_conv_forward(const Matrix& input, const EdgeGraph& graph, const EdgeConvWeights& w,
                                       Activation act, Aggregation agg, EdgeConvTape* tape);

// Accumulates parameter gradients and returns the gradient with respect to the input.
[[nodiscard]] Matrix edge_conv_backward(const EdgeConvTape& tape, const EdgeGraph& graph, const EdgeConvWeights& w,
                                        Activation act, Aggregation agg, const Matrix& d_out, EdgeConvGrads grads);

// --- full network ---------------------------------------------------------------

struct ForwardTape {
    EdgeGraph graph;
    Matrix features;  // M x (4 + V)
    EdgeConvTape conv1;
    EdgeConvTape conv2;
    Matrix fourier;      // S x E
    Matrix time_pre;     // S x E
    Matrix head_input;   // M x (2H + E)
    Matrix head_pre;     // M x F
    Matrix head_act;     // M x F
    Vector node_sigma;   // M
    std::size_t nodes{0};
};

// Per-node score estimates (M x 2). Pure: safe to call concurrently on shared params.
[[nodiscard]] Matrix forward(const ScoreNetParams& params, const GraphBatch& batch, ForwardTape* tape = nullptr);

// Exact reverse pass of forward(); accumulates d(sum upstream .* scores)/d(theta) into the
// gradient slots of params.
void backward(ScoreNetParams& params, const GraphBatch& batch, const ForwardTape& tape, const Matrix& upstream);

// --- checkpoint -------------------------------------------------------------------

// Binary layout: 8-byte magic "LPCKPT\0\1", u32 version, u64 header length, JSON header
// (config, vocab, vocab hash), u32 array count, then per array: u32 name length, name,
// u32 rows, u32 cols, rows*cols little-endian f64 in row-major order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ScoreNetParams params;
    CategoryVocab vocab;
};

void save_checkpoint(const std::filesystem::path& path, const ScoreNetParams& params, const CategoryVocab& vocab);
[[nodiscard]] Checkpoint load_checkpoint(const std::filesystem::path& path);
[[nodiscard]] std::string serialize_checkpoint(const ScoreNetParams& params, const CategoryVocab& vocab);
[[nodiscard]] Checkpoint deserialize_checkpoint(const std::string& bytes);

}  // namespace layoutprior
