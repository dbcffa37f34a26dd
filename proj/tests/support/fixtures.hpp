#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stgcn/graph.hpp"
#include "stgcn/net.hpp"
#include "stgcn/pipeline.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = fs::temp_directory_path() / ("stgcn_" + tag + "_" + std::to_string(rd()));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const { return path_; }
    [[nodiscard]] std::string str(const std::string& rel = "") const {
        return rel.empty() ? path_.string() : (path_ / rel).string();
    }

private:
    fs::path path_;
};

// Edge list typed in separately from the library.
inline const std::vector<std::pair<int, int>>& openpose_edges() {
    static const std::vector<std::pair<int, int>> e = {
        {0, 1}, {1, 2}, {2, 3}, {3, 4},  {1, 5},   {5, 6},   {6, 7},   {2, 8},  {8, 9},
        {9, 10}, {5, 11}, {11, 12}, {12, 13}, {0, 14}, {0, 15}, {14, 16}, {15, 17}};
    return e;
}

inline std::vector<int> oracle_neighbors(int root) {
    std::vector<int> out;
    for (auto [a, b] : openpose_edges()) {
        if (a == root) out.push_back(b);
        if (b == root) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline int oracle_degree(int node) { return static_cast<int>(oracle_neighbors(node).size()); }

// Labels by direct evaluation of each rule at one root. Ordered strategies
// rank a neighbor by counting neighbors that precede it (key, then index).
inline std::map<int, int> oracle_labels(stgcn::Strategy s, int root, const std::vector<double>& r) {
    using stgcn::Strategy;
    const auto nb = oracle_neighbors(root);
    std::map<int, int> out{{root, 0}};
    auto key = [&](int j) -> double {
        switch (s) {
            case Strategy::FullDistance: return r[static_cast<std::size_t>(j)];
            case Strategy::Connection: return -static_cast<double>(oracle_degree(j));
            default: return static_cast<double>(j);
        }
    };
    for (int j : nb) {
        switch (s) {
            case Strategy::UniLabel: out[j] = 0; break;
            case Strategy::Distance: out[j] = 1; break;
            case Strategy::SpatialConfig: {
                const double rj = r[static_cast<std::size_t>(j)];
                const double ri = r[static_cast<std::size_t>(root)];
                out[j] = rj == ri ? 0 : (rj < ri ? 1 : 2);
                break;
            }
            default: {
                int rank = 1;
                for (int o : nb) {
                    if (o == j) continue;
                    if (key(o) < key(j) || (key(o) == key(j) && o < j)) ++rank;
                }
                out[j] = rank;
            }
        }
    }
    return out;
}

inline stgcn::SkeletonTemplate make_template(const std::vector<double>& r) {
    stgcn::SkeletonTemplate t;
    t.cg = {0.0, 0.0};
    t.r = r;
    t.mean_pos.assign(r.size(), {0.0, 0.0});
    return t;
}

inline stgcn::SkeletonTemplate index_template() {
    std::vector<double> r(stgcn::kNumJoints);
    for (int i = 0; i < stgcn::kNumJoints; ++i) r[static_cast<std::size_t>(i)] = i;
    return make_template(r);
}

// Values drawn from a small grid so that ties occur.
inline stgcn::SkeletonTemplate random_template(std::uint64_t seed, int levels = 5) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, levels - 1);
    std::vector<double> r(stgcn::kNumJoints);
    for (auto& v : r) v = 0.1 * (1 + d(rng));
    return make_template(r);
}

inline stgcn::SkeletonClip random_clip(int frames, std::uint64_t seed, double scale = 1.0,
                                       bool second_person = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto clip = stgcn::SkeletonClip::zeros(2, frames);
    for (int m = 0; m < (second_person ? 2 : 1); ++m) {
        for (int t = 0; t < frames; ++t) {
            for (int v = 0; v < stgcn::kNumJoints; ++v) {
                clip.at(m, 0, t, v) = static_cast<float>(scale * u(rng));
                clip.at(m, 1, t, v) = static_cast<float>(scale * u(rng));
                clip.at(m, 2, t, v) = static_cast<float>(scale * (0.5 + 0.5 * std::abs(u(rng))));
            }
        }
    }
    clip.source_frame_count = frames;
    return clip;
}

// Small random model for finite-difference checks. Every conv bias is moved
// so that each output channel sits entirely on one side of the ReLU kink
// with at least `margin` to spare; a step of h cannot cross a kink, so the
// loss is smooth in every parameter. Masks are drawn around 1 and the
// classifier is rescaled so scores stay O(1).
inline stgcn::Model gradcheck_model(stgcn::Strategy s, bool mask, const stgcn::SkeletonClip& clip,
                                    std::uint64_t seed, double margin = 0.05) {
    using namespace stgcn;
    ModelConfig c;
    c.strategy = s;
    c.mask = mask;
    c.channels = {kChannels, 4, 5};
    c.temporal_kernel = 3;
    c.num_classes = 3;
    std::vector<double> r(kNumJoints);
    for (int i = 0; i < kNumJoints; ++i) r[static_cast<std::size_t>(i)] = 0.1 + 0.013 * i * (i % 3 + 1);
    const auto tpl = make_template(r);
    Model m = make_model(c, &tpl, seed);

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution on(0.75);
    for (auto& b : m.params.blocks) {
        if (b.mask) {
            for (auto& v : b.mask->data) v = 1.0 + 0.3 * u(rng);
        }
    }

    std::vector<FeatureMap> xs;
    for (int p = 0; p < clip.persons; ++p) {
        if (!clip.person_slot_empty(p)) xs.push_back(person_features(clip, p));
    }
    auto place = [&](std::vector<FeatureMap>& maps, Tensor& bias) {
        const auto channels = static_cast<Eigen::Index>(bias.size());
        std::vector<double> reach(bias.size(), 0.0);
        for (const auto& f : maps) {
            for (Eigen::Index ch = 0; ch < channels; ++ch) {
                reach[static_cast<std::size_t>(ch)] =
                    std::max(reach[static_cast<std::size_t>(ch)], f.values.row(ch).cwiseAbs().maxCoeff());
            }
        }
        for (std::size_t ch = 0; ch < bias.size(); ++ch) {
            const double mag = reach[ch] + margin;
            bias.data[ch] = on(rng) ? mag : -mag;
        }
        for (auto& f : maps) {
            for (Eigen::Index ch = 0; ch < channels; ++ch) f.values.row(ch).array() += bias.data[static_cast<std::size_t>(ch)];
            f.values = f.values.cwiseMax(0.0);
        }
    };
    for (auto& b : m.params.blocks) {
        std::fill(b.graph_bias.data.begin(), b.graph_bias.data.end(), 0.0);
        std::fill(b.temporal_bias.data.begin(), b.temporal_bias.data.end(), 0.0);
        std::vector<FeatureMap> ss;
        for (const auto& x : xs) ss.push_back(spatial_graph_conv(x, m.adjacency, b, mask));
        place(ss, b.graph_bias);
        std::vector<FeatureMap> ts;
        for (const auto& x : ss) ts.push_back(temporal_conv(x, b));
        place(ts, b.temporal_bias);
        xs = std::move(ts);
    }

    double peak = 0.0;
    for (double v : forward(m, clip)) peak = std::max(peak, std::abs(v));
    for (auto& v : m.params.classifier_weight.data) v /= std::max(1.0, peak);
    for (auto& v : m.params.classifier_bias.data) v = 0.1 * u(rng);
    return m;
}

}  // namespace fixtures
