#include "stgcn/net.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <tuple>

#include "stgcn/errors.hpp"

namespace stgcn {

namespace {

using MapRow = Eigen::Map<RowMatrix>;
using ConstMapRow = Eigen::Map<const RowMatrix>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXd>;
using MapVec = Eigen::Map<Eigen::VectorXd>;

std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
    return out + ")";
}

void expect_shape(const Tensor& t, const std::vector<std::size_t>& want, const char* what) {
    if (t.shape != want) {
        throw DimensionError(std::string(what) + ": shape " + shape_str(t.shape) + ", expected " +
                             shape_str(want));
    }
}

ConstMapRow matrix_view(const Tensor& t, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
    return {t.data.data() + offset, rows, cols};
}

MapRow matrix_view(Tensor& t, std::size_t offset, Eigen::Index rows, Eigen::Index cols) {
    return {t.data.data() + offset, rows, cols};
}

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct SpatialShape {
    int kernel = 0;
    int c_in = 0;
    int c_out = 0;
};

SpatialShape check_spatial(const PartitionedAdjacency& pa, const BlockParams& bp) {
    if (!pa.normalized) throw ConfigError("spatial_graph_conv: partition stack is not normalized");
    if (bp.graph_weight.shape.size() != 3) throw DimensionError("graph_weight: expected rank 3");
    SpatialShape s;
    s.kernel = static_cast<int>(bp.graph_weight.shape[0]);
    s.c_out = static_cast<int>(bp.graph_weight.shape[1]);
    s.c_in = static_cast<int>(bp.graph_weight.shape[2]);
    if (s.kernel != pa.kernel_size) {
        throw DimensionError("spatial_graph_conv: partition axis " + std::to_string(s.kernel) +
                             " does not match kernel size " + std::to_string(pa.kernel_size));
    }
    expect_shape(bp.graph_bias, {static_cast<std::size_t>(s.c_out)}, "graph_bias");
    return s;
}

struct TemporalShape {
    int taps = 0;
    int c_in = 0;
    int c_out = 0;
};

TemporalShape check_temporal(const BlockParams& bp) {
    if (bp.temporal_weight.shape.size() != 3) throw DimensionError("temporal_weight: expected rank 3");
    TemporalShape s;
    s.taps = static_cast<int>(bp.temporal_weight.shape[0]);
    s.c_out = static_cast<int>(bp.temporal_weight.shape[1]);
    s.c_in = static_cast<int>(bp.temporal_weight.shape[2]);
    if (s.taps % 2 == 0) {
        throw ConfigError("temporal_conv: kernel size " + std::to_string(s.taps) + " must be odd");
    }
    expect_shape(bp.temporal_bias, {static_cast<std::size_t>(s.c_out)}, "temporal_bias");
    return s;
}

// Activations of one person in compute precision.
template <typename S>
struct Act {
    int frames = 0;
    int joints = kNumJoints;
    Mat<S> values;
};

template <typename S>
void check_input(const Act<S>& x, int joints, int c_in, const char* op) {
    if (x.joints != joints) {
        throw DimensionError(std::string(op) + ": joint axis " + std::to_string(x.joints) +
                             " does not match graph size " + std::to_string(joints));
    }
    if (x.values.cols() != static_cast<Eigen::Index>(x.frames) * x.joints) {
        throw DimensionError(std::string(op) + ": time*joint axis has " + std::to_string(x.values.cols()) +
                             " columns, expected " + std::to_string(x.frames * x.joints));
    }
    if (x.values.rows() != c_in) {
        throw DimensionError(std::string(op) + ": channel axis " + std::to_string(x.values.rows()) +
                             " does not match weight input channels " + std::to_string(c_in));
    }
    if (x.frames < 1) throw DimensionError(std::string(op) + ": time axis is empty");
}

// One block's parameters converted to compute precision. The K graph
// weights sit side by side so the whole spatial mix is a single product.
template <typename S>
struct Layer {
    SpatialShape sp;
    TemporalShape tp;
    int joints = kNumJoints;
    Mat<S> graph_w;  // C_out x (K * C_in)
    Vec<S> graph_b;
    std::vector<Mat<S>> adj;  // A_k * M
    std::vector<Mat<S>> temporal_w;
    Vec<S> temporal_b;
    bool residual = false;
    bool projection = false;
    Mat<S> residual_w;
    Vec<S> residual_b;
};

template <typename S>
void load_spatial(Layer<S>& l, const PartitionedAdjacency& pa, const BlockParams& bp, bool mask_enabled) {
    l.sp = check_spatial(pa, bp);
    l.joints = pa.num_nodes;
    const int v = pa.num_nodes;
    if (mask_enabled) {
        if (!bp.mask) throw DimensionError("spatial_graph_conv: mask enabled but block has no mask");
        expect_shape(*bp.mask, {static_cast<std::size_t>(v), static_cast<std::size_t>(v)}, "mask");
    }
    l.graph_w.resize(l.sp.c_out, static_cast<Eigen::Index>(l.sp.kernel) * l.sp.c_in);
    l.adj.clear();
    for (int k = 0; k < l.sp.kernel; ++k) {
        const std::size_t off = static_cast<std::size_t>(k) * l.sp.c_out * l.sp.c_in;
        l.graph_w.middleCols(static_cast<Eigen::Index>(k) * l.sp.c_in, l.sp.c_in) =
            matrix_view(bp.graph_weight, off, l.sp.c_out, l.sp.c_in).template cast<S>();
        RowMatrix a = ConstMapRow(pa.matrices[static_cast<std::size_t>(k)].data(), v, v);
        if (mask_enabled) a.array() *= ConstMapRow(bp.mask->data.data(), v, v).array();
        l.adj.push_back(a.template cast<S>());
    }
    l.graph_b = ConstMapVec(bp.graph_bias.data.data(), l.sp.c_out).template cast<S>();
}

template <typename S>
void load_temporal(Layer<S>& l, const BlockParams& bp) {
    l.tp = check_temporal(bp);
    l.temporal_w.clear();
    for (int tap = 0; tap < l.tp.taps; ++tap) {
        const std::size_t off = static_cast<std::size_t>(tap) * l.tp.c_out * l.tp.c_in;
        l.temporal_w.push_back(matrix_view(bp.temporal_weight, off, l.tp.c_out, l.tp.c_in).template cast<S>());
    }
    l.temporal_b = ConstMapVec(bp.temporal_bias.data.data(), l.tp.c_out).template cast<S>();
}

template <typename S>
Layer<S> load_layer(const Model& model, const BlockParams& bp) {
    Layer<S> l;
    load_spatial(l, model.adjacency, bp, model.config.mask);
    load_temporal(l, bp);
    if (l.tp.c_in != l.sp.c_out) throw DimensionError("temporal_weight: input channels differ from graph output");
    l.residual = model.config.residual;
    if (l.residual && bp.residual_weight) {
        l.projection = true;
        expect_shape(*bp.residual_weight,
                     {static_cast<std::size_t>(l.tp.c_out), static_cast<std::size_t>(l.sp.c_in)}, "residual_weight");
        l.residual_w = matrix_view(*bp.residual_weight, 0, l.tp.c_out, l.sp.c_in).template cast<S>();
        l.residual_b = ConstMapVec(bp.residual_bias->data.data(), l.tp.c_out).template cast<S>();
    } else if (l.residual && l.sp.c_in != l.tp.c_out) {
        throw DimensionError("identity residual needs equal input and output channels");
    }
    return l;
}

template <typename S>
std::vector<Layer<S>> load_layers(const Model& model) {
    std::vector<Layer<S>> out;
    out.reserve(model.params.blocks.size());
    for (const auto& bp : model.params.blocks) out.push_back(load_layer<S>(model, bp));
    return out;
}

// z holds x (A_k * M)^T for every k stacked along rows: (K * C_in) x (T * V).
template <typename S>
void spatial_forward(const Layer<S>& l, const Act<S>& x, Mat<S>& z, Mat<S>& y) {
    check_input(x, l.joints, l.sp.c_in, "spatial_graph_conv");
    const Eigen::Index tv = x.values.cols();
    const Eigen::Index rows = static_cast<Eigen::Index>(l.sp.c_in) * x.frames;
    z.resize(static_cast<Eigen::Index>(l.sp.kernel) * l.sp.c_in, tv);
    const Eigen::Map<const Mat<S>> xv(x.values.data(), rows, x.joints);
    for (int k = 0; k < l.sp.kernel; ++k) {
        Eigen::Map<Mat<S>> zk(z.data() + static_cast<Eigen::Index>(k) * l.sp.c_in * tv, rows, x.joints);
        zk.noalias() = xv * l.adj[static_cast<std::size_t>(k)].transpose();
    }
    y = l.graph_b.replicate(1, tv);
    y.noalias() += l.graph_w * z;
}

// Calls fn(tap, t0, n, shift) for every tap with a non-empty valid output
// range [t0, t0 + n) reading input frames [t0 + shift, t0 + shift + n).
template <typename Fn>
void for_each_tap(int taps, int frames, Fn&& fn) {
    const int pad = taps / 2;
    for (int tap = 0; tap < taps; ++tap) {
        const int shift = tap - pad;
        const int t0 = std::max(0, -shift);
        const int t1 = std::min(frames, frames - shift);
        if (t1 > t0) fn(tap, t0, t1 - t0, shift);
    }
}

template <typename S>
void temporal_forward(const Layer<S>& l, const Act<S>& x, Mat<S>& y) {
    check_input(x, x.joints, l.tp.c_in, "temporal_conv");
    const Eigen::Index v = x.joints;
    y = l.temporal_b.replicate(1, x.values.cols());
    for_each_tap(l.tp.taps, x.frames, [&](int tap, int t0, int n, int shift) {
        y.middleCols(t0 * v, n * v).noalias() +=
            l.temporal_w[static_cast<std::size_t>(tap)] * x.values.middleCols((t0 + shift) * v, n * v);
    });
}

template <typename S>
Mat<S> relu(const Mat<S>& m) {
    return m.cwiseMax(S(0));
}

template <typename S>
Mat<S> relu_grad(const Mat<S>& pre, const Mat<S>& upstream) {
    return (pre.array() > S(0)).select(upstream.array(), S(0)).matrix();
}

template <typename S>
struct BlockCache {
    Mat<S> z;
    Mat<S> spatial_pre;
    Act<S> spatial_out;
    Mat<S> temporal_pre;
};

template <typename S>
Act<S> block_forward(const Layer<S>& l, const Act<S>& x, BlockCache<S>* cache) {
    BlockCache<S> local;
    BlockCache<S>& c = cache ? *cache : local;
    spatial_forward(l, x, c.z, c.spatial_pre);
    c.spatial_out = Act<S>{x.frames, x.joints, relu(c.spatial_pre)};
    temporal_forward(l, c.spatial_out, c.temporal_pre);
    if (l.projection) {
        c.temporal_pre.noalias() += l.residual_w * x.values;
        c.temporal_pre.colwise() += l.residual_b;
    } else if (l.residual) {
        c.temporal_pre += x.values;
    }
    return Act<S>{x.frames, x.joints, relu(c.temporal_pre)};
}

// Accumulates parameter gradients of one block into `g`; returns dL/dx when
// `want_input_grad` is set and an empty matrix otherwise.
template <typename S>
Mat<S> block_backward(const Layer<S>& l, const PartitionedAdjacency& pa, bool mask_enabled, const Act<S>& x,
                      const BlockCache<S>& c, const Mat<S>& d_out, BlockParams& g, bool want_input_grad) {
    const int frames = x.frames;
    const Eigen::Index v = x.joints;
    const Eigen::Index tv = x.values.cols();
    const Mat<S> d_u = relu_grad(c.temporal_pre, d_out);

    // Temporal convolution.
    const auto& ts = l.tp;
    MapVec(g.temporal_bias.data.data(), ts.c_out) += d_u.rowwise().sum().template cast<double>();
    Mat<S> d_s = Mat<S>::Zero(ts.c_in, tv);
    Mat<S> gw(ts.c_out, ts.c_in);
    for_each_tap(ts.taps, frames, [&](int tap, int t0, int n, int shift) {
        const std::size_t off = static_cast<std::size_t>(tap) * ts.c_out * ts.c_in;
        const auto& w = l.temporal_w[static_cast<std::size_t>(tap)];
        const auto du = d_u.middleCols(t0 * v, n * v);
        gw.noalias() = du * c.spatial_out.values.middleCols((t0 + shift) * v, n * v).transpose();
        matrix_view(g.temporal_weight, off, ts.c_out, ts.c_in) += gw.template cast<double>();
        d_s.middleCols((t0 + shift) * v, n * v).noalias() += w.transpose() * du;
    });

    // Residual path.
    Mat<S> d_x;
    if (l.projection) {
        const Mat<S> gr = d_u * x.values.transpose();
        matrix_view(*g.residual_weight, 0, d_u.rows(), x.values.rows()) += gr.template cast<double>();
        MapVec(g.residual_bias->data.data(), d_u.rows()) += d_u.rowwise().sum().template cast<double>();
        if (want_input_grad) d_x.noalias() = l.residual_w.transpose() * d_u;
    } else if (l.residual && want_input_grad) {
        d_x = d_u;
    }
    if (want_input_grad && d_x.size() == 0) d_x = Mat<S>::Zero(x.values.rows(), tv);

    // Spatial graph convolution.
    const auto& ss = l.sp;
    const Mat<S> d_spre = relu_grad(c.spatial_pre, d_s);
    MapVec(g.graph_bias.data.data(), ss.c_out) += d_spre.rowwise().sum().template cast<double>();
    const Mat<S> gg = d_spre * c.z.transpose();
    for (int k = 0; k < ss.kernel; ++k) {
        const std::size_t off = static_cast<std::size_t>(k) * ss.c_out * ss.c_in;
        matrix_view(g.graph_weight, off, ss.c_out, ss.c_in) +=
            gg.middleCols(static_cast<Eigen::Index>(k) * ss.c_in, ss.c_in).template cast<double>();
    }
    if (!want_input_grad && !mask_enabled) return d_x;

    const Mat<S> d_z = l.graph_w.transpose() * d_spre;
    const Eigen::Index rows = static_cast<Eigen::Index>(ss.c_in) * frames;
    const Eigen::Map<const Mat<S>> xv(x.values.data(), rows, v);
    for (int k = 0; k < ss.kernel; ++k) {
        const Eigen::Map<const Mat<S>> dzv(d_z.data() + static_cast<Eigen::Index>(k) * ss.c_in * tv, rows, v);
        if (want_input_grad) {
            Eigen::Map<Mat<S>> dxv(d_x.data(), rows, v);
            dxv.noalias() += dzv * l.adj[static_cast<std::size_t>(k)];
        }
        if (mask_enabled) {
            const Mat<S> d_a = dzv.transpose() * xv;
            const ConstMapRow a_k(pa.matrices[static_cast<std::size_t>(k)].data(), v, v);
            matrix_view(*g.mask, 0, v, v).array() += d_a.template cast<double>().array() * a_k.array();
        }
    }
    return d_x;
}

void check_clip(const Model& model, const SkeletonClip& clip) {
    if (clip.channels != model.config.channels.front()) {
        throw DimensionError("clip '" + clip.id + "': channel axis " + std::to_string(clip.channels) +
                             " does not match model input channels " +
                             std::to_string(model.config.channels.front()));
    }
    if (clip.joints != model.adjacency.num_nodes) {
        throw DimensionError("clip '" + clip.id + "': joint axis " + std::to_string(clip.joints) +
                             " does not match graph size " + std::to_string(model.adjacency.num_nodes));
    }
    if (clip.data.size() != static_cast<std::size_t>(clip.persons) * clip.channels * clip.frames * clip.joints) {
        throw DimensionError("clip '" + clip.id + "': data length does not match its shape");
    }
}

std::vector<int> active_slots(const SkeletonClip& clip) {
    std::vector<int> out;
    for (int m = 0; m < clip.persons; ++m) {
        if (!clip.person_slot_empty(m)) out.push_back(m);
    }
    return out;
}

Eigen::VectorXd classify(const Model& model, const Eigen::VectorXd& pooled) {
    const auto& p = model.params;
    const auto classes = static_cast<Eigen::Index>(p.classifier_bias.size());
    Eigen::VectorXd scores = ConstMapVec(p.classifier_bias.data.data(), classes);
    if (pooled.size() > 0) {
        scores.noalias() += matrix_view(p.classifier_weight, 0, classes, pooled.size()) * pooled;
    }
    return scores;
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : t.data) v = dist(rng);
}

template <typename S>
Act<S> slot_input(const SkeletonClip& clip, int person) {
    Act<S> a;
    a.frames = clip.frames;
    a.joints = clip.joints;
    a.values.resize(clip.channels, static_cast<Eigen::Index>(clip.frames) * clip.joints);
    const float* src = clip.data.data() + clip.index(person, 0, 0, 0);
    std::transform(src, src + a.values.size(), a.values.data(), [](float f) { return static_cast<S>(f); });
    return a;
}

template <typename S>
Eigen::VectorXd pooled_mean(const Mat<S>& h) {
    return h.template cast<double>().rowwise().mean();
}

template <typename S>
std::vector<double> forward_impl(const Model& model, const SkeletonClip& clip) {
    check_clip(model, clip);
    const auto slots = active_slots(clip);
    const auto layers = load_layers<S>(model);
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(model.config.channels.back());
    for (int m : slots) {
        Act<S> h = slot_input<S>(clip, m);
        for (const auto& l : layers) h = block_forward<S>(l, h, nullptr);
        pooled += pooled_mean(h.values);
    }
    if (!slots.empty()) pooled /= static_cast<double>(slots.size());
    const Eigen::VectorXd scores = classify(model, pooled);
    return {scores.data(), scores.data() + scores.size()};
}

template <typename S>
BackwardResult backward_impl(const Model& model, const SkeletonClip& clip, int label) {
    check_clip(model, clip);
    const auto slots = active_slots(clip);
    const auto layers = load_layers<S>(model);
    const auto num_blocks = layers.size();

    struct SlotTrace {
        std::vector<Act<S>> inputs;
        std::vector<BlockCache<S>> caches;
    };
    std::vector<SlotTrace> traces(slots.size());
    Eigen::VectorXd pooled = Eigen::VectorXd::Zero(model.config.channels.back());
    Eigen::Index tv = 0;
    for (std::size_t s = 0; s < slots.size(); ++s) {
        auto& tr = traces[s];
        tr.caches.resize(num_blocks);
        Act<S> h = slot_input<S>(clip, slots[s]);
        for (std::size_t b = 0; b < num_blocks; ++b) {
            tr.inputs.push_back(h);
            h = block_forward<S>(layers[b], h, &tr.caches[b]);
        }
        tv = h.values.cols();
        pooled += pooled_mean(h.values);
    }
    if (!slots.empty()) pooled /= static_cast<double>(slots.size());

    BackwardResult res;
    const Eigen::VectorXd scores = classify(model, pooled);
    res.scores.assign(scores.data(), scores.data() + scores.size());
    res.loss = cross_entropy(res.scores, label);
    res.grads = model.params.zeros_like();

    auto d_scores = softmax(res.scores);
    d_scores[static_cast<std::size_t>(label)] -= 1.0;
    const ConstMapVec g(d_scores.data(), static_cast<Eigen::Index>(d_scores.size()));
    MapVec(res.grads.classifier_bias.data.data(), g.size()) += g;
    if (pooled.size() == 0) return res;
    matrix_view(res.grads.classifier_weight, 0, g.size(), pooled.size()).noalias() += g * pooled.transpose();
    if (slots.empty()) return res;

    const Eigen::VectorXd d_pooled =
        matrix_view(model.params.classifier_weight, 0, g.size(), pooled.size()).transpose() * g /
        static_cast<double>(slots.size());
    const Vec<S> d_col = (d_pooled / static_cast<double>(tv)).template cast<S>();
    for (auto& tr : traces) {
        Mat<S> d_h = d_col.replicate(1, tv);
        for (std::size_t b = num_blocks; b-- > 0;) {
            d_h = block_backward<S>(layers[b], model.adjacency, model.config.mask, tr.inputs[b], tr.caches[b], d_h,
                                    res.grads.blocks[b], b > 0);
        }
    }
    return res;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, double fill) : shape(std::move(dims)) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    data.assign(n, fill);
}

ParamSet ParamSet::zeros_like() const {
    ParamSet out = *this;
    out.for_each([](const std::string&, Tensor& t, ParamKind) { std::fill(t.data.begin(), t.data.end(), 0.0); });
    return out;
}

std::size_t ParamSet::parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t, ParamKind) { n += t.size(); });
    return n;
}

ModelConfig ModelConfig::desk(Strategy s, int num_classes, bool mask) {
    ModelConfig c;
    c.strategy = s;
    c.num_classes = num_classes;
    c.mask = mask;
    return c;
}

ModelConfig ModelConfig::paper_like(Strategy s, int num_classes, bool mask) {
    ModelConfig c = desk(s, num_classes, mask);
    c.channels = {kChannels, 64, 64, 64, 64, 128, 128, 128, 256, 256, 256};
    return c;
}

void ModelConfig::validate() const {
    if (channels.empty()) throw ConfigError("model config: channel plan is empty");
    for (int c : channels) {
        if (c < 1) throw ConfigError("model config: channel counts must be positive");
    }
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0) {
        throw ConfigError("model config: temporal kernel size " + std::to_string(temporal_kernel) +
                          " must be odd and positive");
    }
    if (num_classes < 2) throw ConfigError("model config: num_classes must be at least 2");
    if (!(alpha >= 0.0)) throw ConfigError("model config: alpha must be non-negative");
}

Model make_model(const ModelConfig& config, const SkeletonTemplate* tpl, std::uint64_t seed) {
    config.validate();
    Model model;
    model.config = config;
    if (tpl) model.skeleton_template = *tpl;
    const auto g = build_openpose18_graph();
    model.adjacency = normalize_partitions(partitioned_adjacency(g, label_map(g, config.strategy, tpl)), config.alpha);

    std::mt19937_64 rng(seed);
    const auto k = static_cast<std::size_t>(kernel_size(config.strategy));
    const auto kt = static_cast<std::size_t>(config.temporal_kernel);
    const auto v = static_cast<std::size_t>(g.num_nodes);
    for (int b = 0; b < config.num_blocks(); ++b) {
        const auto c_in = static_cast<std::size_t>(config.channels[static_cast<std::size_t>(b)]);
        const auto c_out = static_cast<std::size_t>(config.channels[static_cast<std::size_t>(b) + 1]);
        BlockParams bp;
        bp.graph_weight = Tensor({k, c_out, c_in});
        fill_uniform(bp.graph_weight, std::sqrt(6.0 / static_cast<double>(k * c_in)), rng);
        bp.graph_bias = Tensor({c_out});
        bp.temporal_weight = Tensor({kt, c_out, c_out});
        fill_uniform(bp.temporal_weight, std::sqrt(6.0 / static_cast<double>(kt * c_out)), rng);
        bp.temporal_bias = Tensor({c_out});
        if (config.mask) bp.mask = Tensor({v, v}, 1.0);
        if (config.residual && c_in != c_out) {
            bp.residual_weight = Tensor({c_out, c_in});
            fill_uniform(*bp.residual_weight, std::sqrt(6.0 / static_cast<double>(c_in)), rng);
            bp.residual_bias = Tensor({c_out});
        }
        model.params.blocks.push_back(std::move(bp));
    }
    const auto c_last = static_cast<std::size_t>(config.channels.back());
    const auto classes = static_cast<std::size_t>(config.num_classes);
    model.params.classifier_weight = Tensor({classes, c_last});
    fill_uniform(model.params.classifier_weight, std::sqrt(6.0 / static_cast<double>(c_last + classes)), rng);
    model.params.classifier_bias = Tensor({classes});
    return model;
}

std::string_view precision_name(Precision p) { return p == Precision::Single ? "single" : "double"; }

std::optional<Precision> parse_precision(std::string_view name) {
    if (name == "double") return Precision::Double;
    if (name == "single") return Precision::Single;
    return std::nullopt;
}

FeatureMap person_features(const SkeletonClip& clip, int person) {
    if (person < 0 || person >= clip.persons) {
        throw IndexError("person_features: slot " + std::to_string(person) + " outside [0, " +
                         std::to_string(clip.persons) + ")");
    }
    auto a = slot_input<double>(clip, person);
    return FeatureMap{a.frames, a.joints, std::move(a.values)};
}

FeatureMap spatial_graph_conv(const FeatureMap& x, const PartitionedAdjacency& pa, const BlockParams& bp,
                              bool mask_enabled) {
    Layer<double> l;
    load_spatial(l, pa, bp, mask_enabled);
    const Act<double> in{x.frames, x.joints, x.values};
    RowMatrix z;
    FeatureMap y{x.frames, x.joints, {}};
    spatial_forward(l, in, z, y.values);
    return y;
}

FeatureMap temporal_conv(const FeatureMap& x, const BlockParams& bp) {
    Layer<double> l;
    load_temporal(l, bp);
    FeatureMap y{x.frames, x.joints, {}};
    temporal_forward(l, Act<double>{x.frames, x.joints, x.values}, y.values);
    return y;
}

FeatureMap forward_features(const Model& model, const FeatureMap& x) {
    Act<double> h{x.frames, x.joints, x.values};
    for (const auto& l : load_layers<double>(model)) h = block_forward<double>(l, h, nullptr);
    return FeatureMap{h.frames, h.joints, std::move(h.values)};
}

std::vector<double> forward(const Model& model, const SkeletonClip& clip) {
    return model.config.precision == Precision::Single ? forward_impl<float>(model, clip)
                                                       : forward_impl<double>(model, clip);
}

std::vector<double> softmax(std::span<const double> scores) {
    if (scores.empty()) return {};
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) sum += out[i] = std::exp(scores[i] - mx);
    for (auto& v : out) v /= sum;
    return out;
}

double cross_entropy(std::span<const double> scores, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= scores.size()) {
        throw InputError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                         std::to_string(scores.size()) + ")");
    }
    const double mx = *std::max_element(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += std::exp(s - mx);
    return std::max(0.0, std::log(sum) - (scores[static_cast<std::size_t>(label)] - mx));
}

BackwardResult backward(const Model& model, const SkeletonClip& clip, int label) {
    if (label < 0 || label >= model.config.num_classes) {
        throw InputError("backward: label " + std::to_string(label) + " outside [0, " +
                         std::to_string(model.config.num_classes) + ")");
    }
    return model.config.precision == Precision::Single ? backward_impl<float>(model, clip, label)
                                                       : backward_impl<double>(model, clip, label);
}

namespace {

// Per-row mean and standard deviation accumulated over several matrices.
struct RowMoments {
    Eigen::VectorXd sum;
    Eigen::VectorXd sum_sq;
    double count = 0.0;

    template <typename S>
    void add(const Mat<S>& m) {
        const Mat<double> d = m.template cast<double>();
        if (sum.size() == 0) {
            sum = Eigen::VectorXd::Zero(d.rows());
            sum_sq = Eigen::VectorXd::Zero(d.rows());
        }
        sum += d.rowwise().sum();
        sum_sq += d.array().square().matrix().rowwise().sum();
        count += static_cast<double>(d.cols());
    }
    [[nodiscard]] Eigen::VectorXd mean() const { return sum / count; }
    [[nodiscard]] Eigen::VectorXd scale() const {
        const Eigen::VectorXd m = mean();
        Eigen::VectorXd out = (sum_sq / count - m.cwiseProduct(m)).cwiseMax(0.0).cwiseSqrt();
        for (auto& v : out) v = v > 1e-8 ? v : 1.0;
        return out;
    }
};

// w is (taps_or_K, C_out, C_in): row o of every slice scales by 1/s[o].
void standardize(Tensor& w, Tensor& b, const RowMoments& mom) {
    const Eigen::VectorXd mean = mom.mean();
    const Eigen::VectorXd s = mom.scale();
    const std::size_t slices = w.shape[0];
    const std::size_t c_out = w.shape[1];
    const std::size_t c_in = w.shape[2];
    for (std::size_t k = 0; k < slices; ++k) {
        for (std::size_t o = 0; o < c_out; ++o) {
            for (std::size_t i = 0; i < c_in; ++i) w.data[(k * c_out + o) * c_in + i] /= s[static_cast<Eigen::Index>(o)];
        }
    }
    for (std::size_t o = 0; o < c_out; ++o) {
        const auto oi = static_cast<Eigen::Index>(o);
        b.data[o] = (b.data[o] - mean[oi]) / s[oi];
    }
}

template <typename S>
void data_dependent_init_impl(Model& model, std::span<const SkeletonClip> clips) {
    std::vector<Act<S>> acts;
    for (const auto& clip : clips) {
        check_clip(model, clip);
        for (int m : active_slots(clip)) acts.push_back(slot_input<S>(clip, m));
    }
    if (acts.empty()) throw InputError("data_dependent_init: no non-empty person slot in the calibration clips");
    for (auto& bp : model.params.blocks) {
        RowMoments spatial;
        {
            const auto l = load_layer<S>(model, bp);
            Mat<S> z;
            Mat<S> y;
            for (const auto& a : acts) {
                spatial_forward(l, a, z, y);
                spatial.add(y);
            }
        }
        standardize(bp.graph_weight, bp.graph_bias, spatial);

        RowMoments temporal;
        {
            const auto l = load_layer<S>(model, bp);
            Mat<S> z;
            Mat<S> y;
            Mat<S> t;
            for (const auto& a : acts) {
                spatial_forward(l, a, z, y);
                temporal_forward(l, Act<S>{a.frames, a.joints, relu(y)}, t);
                temporal.add(t);
            }
        }
        standardize(bp.temporal_weight, bp.temporal_bias, temporal);

        const auto l = load_layer<S>(model, bp);
        for (auto& a : acts) a = block_forward<S>(l, a, nullptr);
    }
}

}  // namespace

void data_dependent_init(Model& model, std::span<const SkeletonClip> clips) {
    if (clips.empty()) throw InputError("data_dependent_init: no calibration clips");
    if (model.config.precision == Precision::Single) {
        data_dependent_init_impl<float>(model, clips);
    } else {
        data_dependent_init_impl<double>(model, clips);
    }
}

GradientCheckReport finite_difference_check(const Model& model, const SkeletonClip& clip, int label, double h,
                                            const Gradients& analytic, double abs_floor) {
    if (h == 0.0 || !std::isfinite(h)) throw ConfigError("finite_difference_check: step must be finite and nonzero");
    Model probe = model;
    probe.config.precision = Precision::Double;
    std::vector<std::tuple<std::string, Tensor*>> params;
    probe.params.for_each([&](const std::string& path, Tensor& t, ParamKind) { params.emplace_back(path, &t); });
    std::vector<const Tensor*> grads;
    analytic.for_each([&](const std::string&, const Tensor& t, ParamKind) { grads.push_back(&t); });
    if (grads.size() != params.size()) {
        throw DimensionError("finite_difference_check: gradients hold " + std::to_string(grads.size()) +
                             " tensors, model has " + std::to_string(params.size()));
    }

    auto loss = [&] { return cross_entropy(forward(probe, clip), label); };
    GradientCheckReport rep;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& [path, tensor] = params[p];
        if (grads[p]->shape != tensor->shape) {
            throw DimensionError("finite_difference_check: gradient shape mismatch at " + path);
        }
        for (std::size_t i = 0; i < tensor->size(); ++i) {
            const double saved = tensor->data[i];
            tensor->data[i] = saved + h;
            const double up = loss();
            tensor->data[i] = saved - h;
            const double down = loss();
            tensor->data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = grads[p]->data[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), abs_floor});
            ++rep.checked;
            if (rel > rep.max_relative_error || rep.worst_path.empty()) {
                rep.max_relative_error = rel;
                rep.worst_path = path;
                rep.worst_index = i;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    return rep;
}

GradientCheckReport finite_difference_check(const Model& model, const SkeletonClip& clip, int label, double h,
                                            double abs_floor) {
    Model exact = model;
    exact.config.precision = Precision::Double;
    return finite_difference_check(model, clip, label, h, backward(exact, clip, label).grads, abs_floor);
}

}  // namespace stgcn
