#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <set>

#include "stgcn/errors.hpp"
#include "stgcn/net.hpp"
#include "support/fixtures.hpp"

using namespace stgcn;

namespace {

PartitionedAdjacency identity_partition() {
    PartitionedAdjacency pa;
    pa.kernel_size = 1;
    pa.num_nodes = kNumJoints;
    pa.matrices.assign(1, std::vector<double>(kNumJoints * kNumJoints, 0.0));
    for (int i = 0; i < kNumJoints; ++i) pa.matrices[0][static_cast<std::size_t>(i * kNumJoints + i)] = 1.0;
    pa.normalized = true;
    return pa;
}

BlockParams block(std::size_t k, std::size_t c_in, std::size_t c_out, std::size_t kt, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    BlockParams bp;
    bp.graph_weight = Tensor({k, c_out, c_in});
    bp.graph_bias = Tensor({c_out});
    bp.temporal_weight = Tensor({kt, c_out, c_out});
    bp.temporal_bias = Tensor({c_out});
    for (auto* t : {&bp.graph_weight, &bp.graph_bias, &bp.temporal_weight, &bp.temporal_bias}) {
        for (auto& v : t->data) v = u(rng);
    }
    return bp;
}

FeatureMap random_features(int channels, int frames, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMap f{frames, kNumJoints, RowMatrix(channels, static_cast<Eigen::Index>(frames) * kNumJoints)};
    for (Eigen::Index i = 0; i < f.values.size(); ++i) f.values.data()[i] = n(rng);
    return f;
}

bool bit_equal(const RowMatrix& a, const RowMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(double)) == 0;
}

int hop_distance(int from, int to) {
    std::vector<int> dist(kNumJoints, -1);
    std::vector<int> queue{from};
    dist[static_cast<std::size_t>(from)] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
        for (int n : fixtures::oracle_neighbors(queue[q])) {
            if (dist[static_cast<std::size_t>(n)] < 0) {
                dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(queue[q])] + 1;
                queue.push_back(n);
            }
        }
    }
    return dist[static_cast<std::size_t>(to)];
}

const SkeletonTemplate& test_template() {
    static const auto tpl = fixtures::random_template(17, 18);
    return tpl;
}

}  // namespace

TEST_CASE("identity spatial convolution") {
    auto bp = block(1, 3, 3, 1, 1);
    std::fill(bp.graph_weight.data.begin(), bp.graph_weight.data.end(), 0.0);
    for (int c = 0; c < 3; ++c) bp.graph_weight.data[static_cast<std::size_t>(c * 3 + c)] = 1.0;
    std::fill(bp.graph_bias.data.begin(), bp.graph_bias.data.end(), 0.0);
    const auto x = random_features(3, 7, 2);
    const auto y = spatial_graph_conv(x, identity_partition(), bp, false);
    CHECK(bit_equal(y.values, x.values));
}

TEST_CASE("spatial convolution matches a direct sum") {
    const auto g = build_openpose18_graph();
    const auto pa = normalize_partitions(partitioned_adjacency(g, label_map_index(g)));
    auto bp = block(4, 3, 5, 3, 3);
    bp.mask = Tensor({18, 18});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    for (auto& v : bp.mask->data) v = u(rng);
    const auto x = random_features(3, 4, 4);
    const auto y = spatial_graph_conv(x, pa, bp, true);
    for (int o = 0; o < 5; ++o) {
        for (int t = 0; t < 4; ++t) {
            for (int i = 0; i < 18; ++i) {
                double want = bp.graph_bias.data[static_cast<std::size_t>(o)];
                for (int k = 0; k < 4; ++k) {
                    for (int c = 0; c < 3; ++c) {
                        for (int j = 0; j < 18; ++j) {
                            want += bp.graph_weight.data[static_cast<std::size_t>((k * 5 + o) * 3 + c)] *
                                    pa.at(k, i, j) * bp.mask->data[static_cast<std::size_t>(i * 18 + j)] *
                                    x.values(c, t * 18 + j);
                        }
                    }
                }
                CHECK(y.values(o, t * 18 + i) == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("mask of ones is neutral") {
    const auto g = build_openpose18_graph();
    for (auto s : kAllStrategies) {
        const auto pa = normalize_partitions(partitioned_adjacency(g, label_map(g, s, &test_template())));
        auto bp = block(static_cast<std::size_t>(kernel_size(s)), 3, 6, 3, 9);
        bp.mask = Tensor({18, 18}, 1.0);
        const auto x = random_features(3, 5, 10);
        CHECK(bit_equal(spatial_graph_conv(x, pa, bp, true).values, spatial_graph_conv(x, pa, bp, false).values));

        auto cfg = ModelConfig::desk(s, 3, true);
        cfg.channels = {3, 6, 7};
        auto with = make_model(cfg, &test_template(), 4);
        cfg.mask = false;
        auto without = make_model(cfg, &test_template(), 4);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto clip = fixtures::random_clip(12, seed, 1.0, seed == 1);
            const auto a = forward(with, clip);
            const auto b = forward(without, clip);
            CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("detached joint only sees itself") {
    auto pa = identity_partition();
    pa.kernel_size = 2;
    pa.matrices.push_back(std::vector<double>(18 * 18, 0.0));
    // Dense neighbor mixing everywhere except joint 6.
    for (int i = 0; i < 18; ++i) {
        for (int j = 0; j < 18; ++j) {
            if (i != j && i != 6 && j != 6) pa.matrices[1][static_cast<std::size_t>(i * 18 + j)] = 0.05;
        }
    }
    const auto bp = block(2, 3, 4, 1, 12);
    auto x = random_features(3, 3, 13);
    const auto before = spatial_graph_conv(x, pa, bp, false);
    for (int c = 0; c < 3; ++c) {
        for (int t = 0; t < 3; ++t) {
            for (int v = 0; v < 18; ++v) {
                if (v != 6) x.values(c, t * 18 + v) += 3.0;
            }
        }
    }
    const auto after = spatial_graph_conv(x, pa, bp, false);
    for (int o = 0; o < 4; ++o) {
        for (int t = 0; t < 3; ++t) CHECK(after.values(o, t * 18 + 6) == before.values(o, t * 18 + 6));
    }
}

TEST_CASE("stack locality follows graph hops") {
    for (auto s : kAllStrategies) {
        auto cfg = ModelConfig::desk(s, 3, true);
        cfg.channels = {3, 4, 4};
        const auto model = make_model(cfg, &test_template(), 8);
        for (int j : {0, 4, 10, 16}) {
            auto x = random_features(3, 6, static_cast<std::uint64_t>(j));
            for (int v = 0; v < 18; ++v) {
                if (v == j) continue;
                for (int c = 0; c < 3; ++c) {
                    for (int t = 0; t < 6; ++t) x.values(c, t * 18 + v) = 0.0;
                }
            }
            const auto y = forward_features(model, x);
            for (int v = 0; v < 18; ++v) {
                if (hop_distance(j, v) <= 2) continue;
                CHECK(y.values.col(0).size() == 4);
                for (int t = 0; t < 6; ++t) CHECK(y.values.col(t * 18 + v).cwiseAbs().maxCoeff() == 0.0);
            }
        }
    }
}

TEST_CASE("temporal convolution") {
    SUBCASE("identity kernel") {
        auto bp = block(1, 4, 4, 1, 20);
        std::fill(bp.temporal_weight.data.begin(), bp.temporal_weight.data.end(), 0.0);
        for (int c = 0; c < 4; ++c) bp.temporal_weight.data[static_cast<std::size_t>(c * 4 + c)] = 1.0;
        std::fill(bp.temporal_bias.data.begin(), bp.temporal_bias.data.end(), 0.0);
        const auto x = random_features(4, 9, 21);
        CHECK(bit_equal(temporal_conv(x, bp).values, x.values));
    }
    SUBCASE("unit-sum kernel keeps a constant signal") {
        auto bp = block(1, 1, 1, 5, 22);
        const std::vector<double> w = {0.1, 0.2, 0.4, 0.2, 0.1};
        bp.temporal_weight.data = w;
        bp.temporal_bias.data = {0.0};
        FeatureMap x{20, 18, RowMatrix::Constant(1, 20 * 18, 2.5)};
        const auto y = temporal_conv(x, bp);
        for (int t = 2; t < 18; ++t) CHECK(y.values(0, t * 18 + 3) == doctest::Approx(2.5).epsilon(1e-15));
        CHECK(y.values(0, 0) == doctest::Approx(2.5 * 0.7).epsilon(1e-15));
    }
    SUBCASE("single frame uses the center tap") {
        const auto bp = block(1, 2, 2, 9, 23);
        const auto x = random_features(2, 1, 24);
        const auto y = temporal_conv(x, bp);
        for (int o = 0; o < 2; ++o) {
            for (int v = 0; v < 18; ++v) {
                double want = bp.temporal_bias.data[static_cast<std::size_t>(o)];
                for (int c = 0; c < 2; ++c) {
                    want += bp.temporal_weight.data[static_cast<std::size_t>((4 * 2 + o) * 2 + c)] * x.values(c, v);
                }
                CHECK(y.values(o, v) == doctest::Approx(want).epsilon(1e-14));
            }
        }
    }
    SUBCASE("even kernel is rejected") {
        const auto bp = block(1, 2, 2, 4, 25);
        CHECK_THROWS_AS(temporal_conv(random_features(2, 3, 26), bp), ConfigError);
        auto cfg = ModelConfig::desk(Strategy::Index, 3);
        cfg.temporal_kernel = 8;
        CHECK_THROWS_AS(make_model(cfg, nullptr, 0), ConfigError);
    }
}

TEST_CASE("forward contract") {
    auto cfg = ModelConfig::desk(Strategy::SpatialConfig, 5, true);
    cfg.channels = {3, 8, 6};
    const auto model = make_model(cfg, &test_template(), 30);

    const auto zero = SkeletonClip::zeros(2, 16);
    const auto scores_zero = forward(model, zero);
    REQUIRE(scores_zero.size() == 5);
    CHECK(scores_zero == model.params.classifier_bias.data);

    auto clip = fixtures::random_clip(16, 31);
    auto doubled = clip;
    for (int c = 0; c < 3; ++c) {
        for (int t = 0; t < 16; ++t) {
            for (int v = 0; v < 18; ++v) doubled.at(1, c, t, v) = clip.at(0, c, t, v);
        }
    }
    const auto a = forward(model, clip);
    const auto b = forward(model, doubled);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
    CHECK(forward(model, clip) == a);

    const auto p = softmax(a);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-6);

    auto wrong = SkeletonClip::zeros(2, 16, 2);
    CHECK_THROWS_AS(forward(model, wrong), DimensionError);
}

TEST_CASE("cross entropy") {
    CHECK(cross_entropy(std::vector<double>{0.3, 0.3, 0.3, 0.3}, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
    const double big = cross_entropy(std::vector<double>{1000.0, 0.0}, 0);
    CHECK(std::isfinite(big));
    CHECK(big >= 0.0);
    CHECK(big < 1e-300);
    CHECK(cross_entropy(std::vector<double>{1000.0, 0.0}, 1) == doctest::Approx(1000.0));
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 30.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> s = {n(rng), n(rng), n(rng)};
        CHECK(cross_entropy(s, i % 3) >= 0.0);
    }
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1.0, 2.0}, 2), InputError);
    CHECK_THROWS_AS(cross_entropy(std::vector<double>{1.0, 2.0}, -1), InputError);
}

TEST_CASE("backward basics") {
    auto cfg = ModelConfig::desk(Strategy::Connection, 4, true);
    cfg.channels = {3, 5, 6};
    const auto model = make_model(cfg, nullptr, 40);
    const auto clip = fixtures::random_clip(10, 41, 1.0, true);
    const auto res = backward(model, clip, 3);
    const auto p = softmax(res.scores);
    for (std::size_t k = 0; k < p.size(); ++k) {
        CHECK(res.grads.classifier_bias.data[k] == doctest::Approx(p[k] - (k == 3 ? 1.0 : 0.0)).epsilon(1e-15));
    }
    CHECK(res.loss == doctest::Approx(cross_entropy(forward(model, clip), 3)).epsilon(1e-14));

    // Mask gradients vanish where no partition has an edge.
    for (const auto& b : res.grads.blocks) {
        REQUIRE(b.mask.has_value());
        for (int i = 0; i < 18; ++i) {
            for (int j = 0; j < 18; ++j) {
                double structural = 0.0;
                for (int k = 0; k < model.adjacency.kernel_size; ++k) structural += model.adjacency.at(k, i, j);
                if (structural == 0.0) CHECK(b.mask->data[static_cast<std::size_t>(i * 18 + j)] == 0.0);
            }
        }
    }

    cfg.mask = false;
    const auto plain = make_model(cfg, nullptr, 40);
    const auto res2 = backward(plain, clip, 3);
    std::set<std::string> paths;
    res2.grads.for_each([&](const std::string& path, const Tensor&, ParamKind kind) {
        paths.insert(path);
        CHECK(kind != ParamKind::Mask);
    });
    CHECK(paths.count("blocks.0.mask") == 0);
    CHECK(paths.count("blocks.1.graph_weight") == 1);
}

TEST_CASE("gradients match finite differences") {
    for (auto s : kAllStrategies) {
        for (bool mask : {false, true}) {
            for (std::uint64_t seed = 0; seed < 2; ++seed) {
                CAPTURE(strategy_name(s));
                CAPTURE(mask);
                CAPTURE(seed);
                const auto clip = fixtures::random_clip(6, 100 + seed, 0.2, seed == 1);
                const auto model = fixtures::gradcheck_model(s, mask, clip, seed);
                const auto rep = finite_difference_check(model, clip, static_cast<int>(seed % 3), 1e-3);
                CAPTURE(rep.worst_path);
                CHECK(rep.checked == model.params.parameter_count());
                CHECK(rep.max_relative_error < 1e-4);
            }
        }
    }
}

TEST_CASE("gradients with residual connections") {
    for (bool mask : {false, true}) {
        const auto clip = fixtures::random_clip(6, 7, 0.2);
        auto model = fixtures::gradcheck_model(Strategy::SpatialConfig, mask, clip, 3);
        // Same topology with residuals; biases are kept so the kink margins
        // are only approximately preserved, hence the small step.
        auto cfg = model.config;
        cfg.residual = true;
        auto res_model = make_model(cfg, &*model.skeleton_template, 3);
        const auto rep = finite_difference_check(res_model, clip, 1, 1e-6);
        CHECK(rep.max_relative_error < 1e-3);
    }
}

TEST_CASE("finite difference check catches a corrupted gradient") {
    const auto clip = fixtures::random_clip(6, 55, 0.2);
    const auto model = fixtures::gradcheck_model(Strategy::Index, true, clip, 5);
    auto grads = backward(model, clip, 2).grads;
    // Corrupt the largest temporal weight gradient of block 1 by 10%.
    auto& t = grads.blocks[1].temporal_weight.data;
    const auto at = static_cast<std::size_t>(
        std::max_element(t.begin(), t.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) - t.begin());
    t[at] *= 1.1;
    const auto rep = finite_difference_check(model, clip, 2, 1e-3, grads);
    CHECK(rep.max_relative_error > 0.05);
    CHECK(rep.worst_path == "blocks.1.temporal_weight");
    CHECK(rep.worst_index == at);
}

TEST_CASE("finite difference check is symmetric in h") {
    const auto clip = fixtures::random_clip(6, 56, 0.2);
    const auto model = fixtures::gradcheck_model(Strategy::Distance, false, clip, 6);
    const auto a = finite_difference_check(model, clip, 0, 1e-3);
    const auto b = finite_difference_check(model, clip, 0, -1e-3);
    CHECK(a.max_relative_error == b.max_relative_error);
    CHECK(a.worst_path == b.worst_path);
    CHECK(a.worst_index == b.worst_index);
    CHECK(a.worst_numeric == b.worst_numeric);
    CHECK_THROWS_AS(finite_difference_check(model, clip, 0, 0.0), ConfigError);
}

TEST_CASE("linear model gradients are essentially exact") {
    auto cfg = ModelConfig::desk(Strategy::UniLabel, 4, false);
    cfg.channels = {3};
    const auto model = make_model(cfg, nullptr, 60);
    CHECK(model.params.blocks.empty());
    const auto clip = fixtures::random_clip(8, 61, 0.5);
    const auto rep = finite_difference_check(model, clip, 1, 1e-4);
    CHECK(rep.max_relative_error < 1e-8);
}

TEST_CASE("checkpoint round trip") {
    fixtures::TempDir dir("ckpt");
    for (bool mask : {false, true}) {
        auto cfg = ModelConfig::desk(Strategy::FullDistance, 3, mask);
        cfg.channels = {3, 5, 4};
        cfg.residual = true;
        auto model = make_model(cfg, &test_template(), 70);
        const auto path = dir.str(mask ? "m1.stgm" : "m0.stgm");
        save_checkpoint(model, path);
        const auto back = load_checkpoint(path);
        CHECK(back.params == model.params);
        CHECK(back.config.mask == mask);
        CHECK(back.config.channels == cfg.channels);
        CHECK(back.config.temporal_kernel == cfg.temporal_kernel);
        CHECK(back.config.num_classes == 3);
        CHECK(back.config.strategy == Strategy::FullDistance);
        REQUIRE(back.skeleton_template.has_value());
        CHECK(back.skeleton_template->r == test_template().r);
        const auto clip = fixtures::random_clip(9, 71);
        CHECK(forward(back, clip) == forward(model, clip));
        CHECK(encode_checkpoint(back) == encode_checkpoint(model));
    }
    auto bytes = encode_checkpoint(make_model(ModelConfig::desk(Strategy::Index, 2), nullptr, 1));
    CHECK(std::memcmp(bytes.data(), "STGM", 4) == 0);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    auto cut = bytes;
    cut.resize(cut.size() - 8);
    CHECK_THROWS_AS(decode_checkpoint(cut), FormatError);
}

TEST_CASE("precision names") {
    CHECK(parse_precision("single") == Precision::Single);
    CHECK(parse_precision("double") == Precision::Double);
    CHECK_FALSE(parse_precision("half").has_value());
    CHECK(precision_name(Precision::Single) == "single");
    CHECK(ModelConfig{}.precision == Precision::Double);
}

TEST_CASE("single precision tracks double") {
    const auto clip = fixtures::random_clip(24, 80, 0.5, true);
    for (auto s : kAllStrategies) {
        CAPTURE(strategy_name(s));
        auto cfg = ModelConfig::desk(s, 4, true);
        cfg.channels = {3, 8, 8};
        const Model dbl = make_model(cfg, &test_template(), 81);
        Model sgl = dbl;
        sgl.config.precision = Precision::Single;

        const auto a = forward(dbl, clip);
        const auto b = forward(sgl, clip);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-4 * std::max(1.0, std::abs(a[i])));

        const auto ga = backward(dbl, clip, 2);
        const auto gb = backward(sgl, clip, 2);
        CHECK(std::abs(ga.loss - gb.loss) < 1e-5);
        std::vector<const Tensor*> ta;
        std::vector<const Tensor*> tb;
        ga.grads.for_each([&](const std::string&, const Tensor& t, ParamKind) { ta.push_back(&t); });
        gb.grads.for_each([&](const std::string&, const Tensor& t, ParamKind) { tb.push_back(&t); });
        double diff = 0.0;
        double norm = 0.0;
        for (std::size_t p = 0; p < ta.size(); ++p) {
            for (std::size_t i = 0; i < ta[p]->size(); ++i) {
                diff += std::pow(ta[p]->data[i] - tb[p]->data[i], 2);
                norm += std::pow(ta[p]->data[i], 2);
            }
        }
        CHECK(std::sqrt(diff / norm) < 1e-4);

        Model off = sgl;
        off.config.mask = false;
        for (auto& blk : off.params.blocks) blk.mask.reset();
        CHECK(forward(off, clip) == b);
    }
}

TEST_CASE("finite differences of a single precision model run in double") {
    const auto clip = fixtures::random_clip(6, 90, 0.2);
    auto model = fixtures::gradcheck_model(Strategy::SpatialConfig, true, clip, 3);
    model.config.precision = Precision::Single;
    const auto rep = finite_difference_check(model, clip, 1, 1e-3);
    CHECK(rep.max_relative_error < 1e-4);
}

TEST_CASE("checkpoint records precision") {
    auto cfg = ModelConfig::desk(Strategy::Index, 2);
    cfg.channels = {3, 4};
    cfg.precision = Precision::Single;
    const auto back = decode_checkpoint(encode_checkpoint(make_model(cfg, nullptr, 1)));
    CHECK(back.config.precision == Precision::Single);
}

namespace {

struct Moments {
    std::vector<double> mean;
    std::vector<double> var;
};

Moments moments(const std::vector<FeatureMap>& maps) {
    const auto rows = static_cast<std::size_t>(maps.front().channels());
    Moments m{std::vector<double>(rows, 0.0), std::vector<double>(rows, 0.0)};
    double n = 0.0;
    for (const auto& f : maps) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < f.values.cols(); ++c) m.mean[r] += f.values(static_cast<Eigen::Index>(r), c);
        }
        n += static_cast<double>(f.values.cols());
    }
    for (auto& v : m.mean) v /= n;
    for (const auto& f : maps) {
        for (std::size_t r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < f.values.cols(); ++c) {
                m.var[r] += std::pow(f.values(static_cast<Eigen::Index>(r), c) - m.mean[r], 2);
            }
        }
    }
    for (auto& v : m.var) v /= n;
    return m;
}

std::vector<FeatureMap> rectified(std::vector<FeatureMap> maps) {
    for (auto& f : maps) f.values = f.values.cwiseMax(0.0);
    return maps;
}

}  // namespace

TEST_CASE("data-dependent init standardizes every convolution") {
    std::vector<SkeletonClip> clips;
    for (std::uint64_t s = 0; s < 3; ++s) clips.push_back(fixtures::random_clip(12, 200 + s, 0.4, s == 2));
    auto cfg = ModelConfig::desk(Strategy::Distance, 3, true);
    cfg.channels = {3, 6, 5};
    Model model = make_model(cfg, nullptr, 7);
    const auto before = model;
    data_dependent_init(model, clips);

    std::vector<FeatureMap> xs;
    for (const auto& c : clips) {
        for (int p = 0; p < c.persons; ++p) {
            if (!c.person_slot_empty(p)) xs.push_back(person_features(c, p));
        }
    }
    REQUIRE(xs.size() == 4);
    for (const auto& b : model.params.blocks) {
        std::vector<FeatureMap> sp;
        for (const auto& x : xs) sp.push_back(spatial_graph_conv(x, model.adjacency, b, true));
        const auto ms = moments(sp);
        std::vector<FeatureMap> tp;
        for (const auto& x : rectified(sp)) tp.push_back(temporal_conv(x, b));
        const auto mt = moments(tp);
        for (const auto* m : {&ms, &mt}) {
            for (double v : m->mean) CHECK(std::abs(v) < 1e-9);
            for (double v : m->var) CHECK(v == doctest::Approx(1.0).epsilon(1e-9));
        }
        xs = rectified(tp);
    }
    CHECK(model.params.classifier_weight == before.params.classifier_weight);
    CHECK(model.params.classifier_bias == before.params.classifier_bias);
    for (std::size_t b = 0; b < model.params.blocks.size(); ++b) {
        CHECK(model.params.blocks[b].mask == before.params.blocks[b].mask);
    }

    CHECK_THROWS_AS(data_dependent_init(model, std::span<const SkeletonClip>{}), InputError);
    const std::vector<SkeletonClip> blank{SkeletonClip::zeros(2, 4)};
    CHECK_THROWS_AS(data_dependent_init(model, blank), InputError);
}
