#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "stgcn/graph.hpp"
#include "stgcn/pipeline.hpp"
#include "stgcn/skeleton_template.hpp"

namespace stgcn {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense row-major parameter tensor.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);

    [[nodiscard]] std::size_t size() const { return data.size(); }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

enum class ParamKind { Weight, Bias, Mask };

// One spatial-temporal block.
struct BlockParams {
    Tensor graph_weight;     // (K, C_out, C_in)
    Tensor graph_bias;       // (C_out)
    Tensor temporal_weight;  // (Kt, C_out, C_out), tap-major
    Tensor temporal_bias;    // (C_out)
    std::optional<Tensor> mask;             // (V, V), present iff the M-mask is enabled
    std::optional<Tensor> residual_weight;  // (C_out, C_in), projection residual only
    std::optional<Tensor> residual_bias;    // (C_out)

    friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

// All learnable tensors. Gradients use the same type with congruent shapes.
struct ParamSet {
    std::vector<BlockParams> blocks;
    Tensor classifier_weight;  // (num_classes, C_last)
    Tensor classifier_bias;    // (num_classes)

    // Visits tensors in declaration order (the checkpoint order).
    template <typename Fn>
    void for_each(Fn&& fn) {
        visit(*this, fn);
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        visit(*this, fn);
    }

    [[nodiscard]] ParamSet zeros_like() const;
    [[nodiscard]] std::size_t parameter_count() const;
    friend bool operator==(const ParamSet&, const ParamSet&) = default;

private:
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn& fn) {
        for (std::size_t b = 0; b < self.blocks.size(); ++b) {
            auto& blk = self.blocks[b];
            const std::string p = "blocks." + std::to_string(b) + ".";
            fn(p + "graph_weight", blk.graph_weight, ParamKind::Weight);
            fn(p + "graph_bias", blk.graph_bias, ParamKind::Bias);
            fn(p + "temporal_weight", blk.temporal_weight, ParamKind::Weight);
            fn(p + "temporal_bias", blk.temporal_bias, ParamKind::Bias);
            if (blk.mask) fn(p + "mask", *blk.mask, ParamKind::Mask);
            if (blk.residual_weight) fn(p + "residual_weight", *blk.residual_weight, ParamKind::Weight);
            if (blk.residual_bias) fn(p + "residual_bias", *blk.residual_bias, ParamKind::Bias);
        }
        fn(std::string("classifier.weight"), self.classifier_weight, ParamKind::Weight);
        fn(std::string("classifier.bias"), self.classifier_bias, ParamKind::Bias);
    }
};

using Gradients = ParamSet;

// Arithmetic used inside the blocks. Parameters are always stored as double.
enum class Precision { Double, Single };

std::string_view precision_name(Precision p);
std::optional<Precision> parse_precision(std::string_view name);

struct ModelConfig {
    Strategy strategy = Strategy::SpatialConfig;
    bool mask = true;
    bool residual = false;
    // channels[0] is the input channel count; one block per later entry.
    std::vector<int> channels{kChannels, 32, 64, 64};
    int temporal_kernel = 9;
    int num_classes = 2;
    double alpha = 0.001;
    Precision precision = Precision::Double;

    // 3 blocks, 3 -> 32 -> 64 -> 64, Kt = 9.
    static ModelConfig desk(Strategy s, int num_classes, bool mask = true);
    // 10 blocks, 64/128/256 channels, Kt = 9.
    static ModelConfig paper_like(Strategy s, int num_classes, bool mask = true);

    [[nodiscard]] int num_blocks() const { return static_cast<int>(channels.size()) - 1; }
    void validate() const;
};

struct Model {
    ModelConfig config;
    std::optional<SkeletonTemplate> skeleton_template;
    PartitionedAdjacency adjacency;  // normalized
    ParamSet params;
};

// Builds the normalized partition stack for config.strategy and draws
// He-uniform weights from `seed`. Biases start at zero and masks at one.
Model make_model(const ModelConfig& config, const SkeletonTemplate* tpl, std::uint64_t seed);

// Rescales every graph and temporal convolution, block by block, so that its
// pre-activations over `clips` have zero mean and unit variance per output
// channel. Each output channel's weight rows and bias are divided by its
// standard deviation after the mean is subtracted from the bias.
void data_dependent_init(Model& model, std::span<const SkeletonClip> clips);

// Activations of one person: C rows, T*V columns (column t*V + v).
struct FeatureMap {
    int frames = 0;
    int joints = kNumJoints;
    RowMatrix values;

    [[nodiscard]] int channels() const { return static_cast<int>(values.rows()); }
};

FeatureMap person_features(const SkeletonClip& clip, int person);

// y = sum_k W_k (x (A_k * M)^T) + b, M all ones when the mask is disabled.
FeatureMap spatial_graph_conv(const FeatureMap& x, const PartitionedAdjacency& pa,
                              const BlockParams& bp, bool mask_enabled);

// Per-joint 1-D convolution along time, zero "same" padding, stride 1.
FeatureMap temporal_conv(const FeatureMap& x, const BlockParams& bp);

// Runs every block on one person's features.
FeatureMap forward_features(const Model& model, const FeatureMap& x);

// Raw class scores; non-empty person slots are averaged.
std::vector<double> forward(const Model& model, const SkeletonClip& clip);

std::vector<double> softmax(std::span<const double> scores);
double cross_entropy(std::span<const double> scores, int label);

struct BackwardResult {
    double loss = 0.0;
    std::vector<double> scores;
    Gradients grads;
};

BackwardResult backward(const Model& model, const SkeletonClip& clip, int label);

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::string worst_path;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

// Central differences (L(p + h) - L(p - h)) / 2h for every parameter, compared
// with `analytic`. Relative error is |a - n| / max(|a|, |n|, abs_floor).
// Losses are always evaluated in double precision; the second overload also
// computes the analytic gradient in double.
GradientCheckReport finite_difference_check(const Model& model, const SkeletonClip& clip, int label,
                                            double h, const Gradients& analytic,
                                            double abs_floor = 1e-6);
GradientCheckReport finite_difference_check(const Model& model, const SkeletonClip& clip, int label,
                                            double h, double abs_floor = 1e-6);

// ---- checkpoints ------------------------------------------------------------

// "STGM", u32 LE version, u32 length + JSON config, then every tensor in
// declaration order as u32 rank, u32 dims, little-endian f64 values.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<memory>");
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace stgcn
