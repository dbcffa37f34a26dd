#include "stgcn/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "stgcn/errors.hpp"
#include "stgcn/parallel.hpp"
#include "stgcn/tensor_io.hpp"

namespace stgcn {

namespace fs = std::filesystem;

namespace {

// Rest pose in normalized image coordinates (y grows downward).
constexpr std::array<std::array<double, 2>, kNumJoints> kRestPose = {{
    {0.00, -0.30},  {0.00, -0.20},  {-0.08, -0.20}, {-0.12, -0.08}, {-0.14, 0.03}, {0.08, -0.20},
    {0.12, -0.08},  {0.14, 0.03},   {-0.05, 0.05},  {-0.06, 0.20},  {-0.06, 0.35}, {0.05, 0.05},
    {0.06, 0.20},   {0.06, 0.35},   {-0.02, -0.32}, {0.02, -0.32},  {-0.04, -0.31}, {0.04, -0.31},
}};

// Limb-major joint order; classes take contiguous chunks of it.
constexpr std::array<int, kNumJoints> kJointOrder = {4, 3, 7, 6, 10, 9, 13, 12, 0, 14, 15, 16, 17, 2, 5, 8, 11, 1};

constexpr double kAmplitude = 0.1;
constexpr double kPhaseJitter = 0.5;
constexpr double kAmplitudeJitter = 0.1;
// Class k completes kCyclesStep * (k + 1) cycles over the nominal clip length.
constexpr double kCyclesStep = 3.0;

// Equal-size contiguous chunks of kJointOrder; leftover joints stay at rest.
std::vector<int> moving_joints(int cls, int num_classes) {
    const int per_class = std::max(1, kNumJoints / num_classes);
    std::vector<int> out;
    for (int i = 0; i < per_class; ++i) {
        out.push_back(kJointOrder[static_cast<std::size_t>((cls * per_class + i) % kNumJoints)]);
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train config: epochs must be positive");
    if (!(base_lr > 0.0)) throw ConfigError("train config: base_lr must be positive");
    if (!(decay_factor > 0.0)) throw ConfigError("train config: decay_factor must be positive");
    if (decay_every < 1) throw ConfigError("train config: decay_every must be positive");
    if (decay_start_epoch < 0) throw ConfigError("train config: decay_start_epoch must be non-negative");
    if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be non-negative");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be at least 1");
    if (eval_every < 1) throw ConfigError("train config: eval_every must be positive");
}

std::string TrainHistory::to_csv() const {
    std::string out = "epoch,lr,train_loss,val_top1\n";
    for (const auto& r : epochs) {
        out += std::to_string(r.epoch) + "," + format_double(r.lr) + "," + format_double(r.train_loss) + ",";
        if (r.val_top1) out += format_double(*r.val_top1);
        out += "\n";
    }
    return out;
}

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        if (manifest.entries[i].split == s) out.push_back(i);
    }
    return out;
}

Dataset load_dataset(const std::string& manifest_path) {
    Dataset ds;
    ds.manifest = load_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    ds.clips.reserve(ds.manifest.entries.size());
    for (const auto& e : ds.manifest.entries) {
        const fs::path p = fs::path(e.path).is_absolute() ? fs::path(e.path) : base / e.path;
        SkeletonClip clip = import_tensor(p.string());
        clip.id = e.id;
        clip.label = e.label;
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& out_dir) {
    const fs::path root(out_dir);
    std::error_code ec;
    fs::create_directories(root / "tensors", ec);
    if (ec) throw IoError("cannot create " + (root / "tensors").string() + ": " + ec.message());
    for (std::size_t i = 0; i < ds.clips.size(); ++i) {
        export_tensor(ds.clips[i], (root / ds.manifest.entries[i].path).string());
    }
    save_manifest(ds.manifest, (root / "manifest.json").string());
}

double lr_schedule(const TrainConfig& cfg, int epoch) {
    int decays = 0;
    if (epoch >= cfg.decay_start_epoch) decays = 1 + (epoch - cfg.decay_start_epoch) / cfg.decay_every;
    double lr = cfg.base_lr;
    for (int i = 0; i < decays; ++i) lr *= cfg.decay_factor;
    // Round to 15 significant digits so 0.1 * 0.1 gives the double nearest 0.01.
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "%.15g", lr);
    return std::strtod(buf.data(), nullptr);
}

void sgd_step(ParamSet& params, const Gradients& grads, double lr, double weight_decay) {
    std::vector<const Tensor*> g;
    grads.for_each([&](const std::string&, const Tensor& t, ParamKind) { g.push_back(&t); });
    std::size_t idx = 0;
    params.for_each([&](const std::string& path, Tensor& p, ParamKind kind) {
        if (idx >= g.size() || g[idx]->shape != p.shape) {
            throw InternalError("sgd_step: gradient shape mismatch at " + path);
        }
        const auto& gd = g[idx++]->data;
        const double wd = kind == ParamKind::Weight ? weight_decay : 0.0;
        for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] -= lr * (gd[i] + wd * p.data[i]);
    });
    if (idx != g.size()) throw InternalError("sgd_step: gradient set has extra tensors");
}

BackwardResult batch_gradients(const Model& model, const Dataset& ds, std::span<const std::size_t> samples) {
    if (samples.empty()) throw InputError("batch_gradients: empty batch");
    std::vector<BackwardResult> parts(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto& clip = ds.clips[samples[i]];
        parts[i] = backward(model, clip, ds.manifest.entries[samples[i]].label);
    });
    BackwardResult total;
    total.grads = model.params.zeros_like();
    std::vector<Tensor*> acc;
    total.grads.for_each([&](const std::string&, Tensor& t, ParamKind) { acc.push_back(&t); });
    const double scale = 1.0 / static_cast<double>(samples.size());
    for (const auto& part : parts) {
        total.loss += part.loss;
        std::size_t k = 0;
        part.grads.for_each([&](const std::string&, const Tensor& t, ParamKind) {
            auto& dst = acc[k++]->data;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += t.data[i];
        });
    }
    total.loss *= scale;
    for (auto* t : acc) {
        for (auto& v : t->data) v *= scale;
    }
    return total;
}

TrainResult train(const TrainConfig& cfg, const Dataset& ds, Model model, const EpochCallback& on_epoch) {
    cfg.validate();
    if (cfg.strategy != model.config.strategy || cfg.mask != model.config.mask) {
        throw ConfigError("train: config strategy/mask do not match the initial model");
    }
    if (ds.clips.size() != ds.manifest.entries.size()) {
        throw InputError("train: dataset holds " + std::to_string(ds.clips.size()) + " clips for " +
                         std::to_string(ds.manifest.entries.size()) + " manifest entries");
    }
    for (const auto& e : ds.manifest.entries) {
        if (e.label >= model.config.num_classes) {
            throw ConfigError("train: clip '" + e.id + "' has label " + std::to_string(e.label) +
                              " but the model has " + std::to_string(model.config.num_classes) + " classes");
        }
    }
    auto order = ds.indices(Split::Train);
    if (order.empty()) throw ConfigError("train: the manifest has no training entries");
    const auto val = ds.indices(Split::Val);

    std::mt19937_64 rng(cfg.seed);
    TrainResult result{std::move(model), {}};
    const auto batch = static_cast<std::size_t>(cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr_schedule(cfg, epoch);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const auto n = std::min(batch, order.size() - start);
            const auto g = batch_gradients(result.model, ds, std::span(order).subspan(start, n));
            loss_sum += g.loss * static_cast<double>(n);
            sgd_step(result.model.params, g.grads, rec.lr, cfg.weight_decay);
        }
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        const bool last = epoch + 1 == cfg.epochs;
        if (!val.empty() && ((epoch + 1) % cfg.eval_every == 0 || last)) {
            rec.val_top1 = evaluate(result.model, ds, val).top1;
        }
        result.history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (cfg.target_val_top1 && rec.val_top1 && *rec.val_top1 >= *cfg.target_val_top1) break;
    }
    return result;
}

void calibrate(Model& model, const Dataset& ds, int max_clips) {
    if (max_clips < 0) throw ConfigError("calibrate: clip count must be non-negative");
    if (max_clips == 0) return;
    std::vector<SkeletonClip> clips;
    for (auto i : ds.indices(Split::Train)) {
        if (static_cast<int>(clips.size()) == max_clips) break;
        clips.push_back(ds.clips[i]);
    }
    if (clips.empty()) throw ConfigError("calibrate: dataset has no training clips");
    data_dependent_init(model, clips);
}

EvalResult evaluate(const Model& model, const Dataset& ds, std::span<const std::size_t> samples) {
    if (samples.empty()) throw InputError("evaluate: empty split");
    std::vector<int> predicted(samples.size());
    std::vector<char> tied(samples.size(), 0);
    parallel_for(samples.size(), [&](std::size_t i) {
        const auto scores = forward(model, ds.clips[samples[i]]);
        const auto best = std::max_element(scores.begin(), scores.end());
        predicted[i] = static_cast<int>(best - scores.begin());
        tied[i] = std::count(scores.begin(), scores.end(), *best) > 1 ? 1 : 0;
    });
    EvalResult r;
    r.n = samples.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (predicted[i] == ds.manifest.entries[samples[i]].label) ++correct;
        r.ties += static_cast<std::size_t>(tied[i]);
    }
    r.top1 = static_cast<double>(correct) / static_cast<double>(r.n);
    return r;
}

EvalResult evaluate(const Model& model, const Dataset& ds, Split split) {
    const auto idx = ds.indices(split);
    return evaluate(model, ds, idx);
}

Dataset synthetic_dataset(int num_classes, int samples_per_class, int frames, double noise_sigma,
                          std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("synthetic_dataset: num_classes must be at least 2");
    if (samples_per_class < 1) throw ConfigError("synthetic_dataset: samples_per_class must be positive");
    if (frames < 1) throw ConfigError("synthetic_dataset: frames must be positive");
    if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic_dataset: noise_sigma must be non-negative");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
    Dataset ds;
    for (int k = 0; k < num_classes; ++k) ds.manifest.class_names.push_back("class_" + std::to_string(k));

    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (int k = 0; k < num_classes; ++k) {
        const auto joints = moving_joints(k, num_classes);
        const double cycles = kCyclesStep * (k + 1);
        const double class_phase = std::numbers::pi * k / num_classes;
        for (int s = 0; s < samples_per_class; ++s) {
            const double phase = class_phase + kPhaseJitter * unit(rng);
            const double amp = kAmplitude * (1.0 + kAmplitudeJitter * unit(rng));
            std::vector<SkeletonFrame> seq(static_cast<std::size_t>(frames));
            for (int t = 0; t < frames; ++t) {
                PersonPose pose{};
                const double angle = two_pi * cycles * t / kDefaultFrames + phase;
                for (int v = 0; v < kNumJoints; ++v) {
                    double x = kRestPose[static_cast<std::size_t>(v)][0];
                    double y = kRestPose[static_cast<std::size_t>(v)][1];
                    if (std::find(joints.begin(), joints.end(), v) != joints.end()) {
                        // A circle through the rest position: the joint is lifted on average.
                        x += amp * std::sin(angle);
                        y -= amp * (1.0 - std::cos(angle));
                    }
                    if (noise_sigma > 0.0) {
                        x += noise(rng);
                        y += noise(rng);
                    }
                    pose[static_cast<std::size_t>(v)] = {static_cast<float>(x), static_cast<float>(y), 1.0F};
                }
                seq[static_cast<std::size_t>(t)].persons.push_back(pose);
            }
            const std::string id = "synth_" + std::to_string(k) + "_" + std::to_string(s);
            ds.clips.push_back(assemble_clip(seq, id, k, kDefaultMaxPersons, frames));
            ds.manifest.entries.push_back({id, "tensors/" + id + ".stgt", k, Split::Unassigned});
        }
    }
    ds.manifest = split_dataset(ds.manifest, 3, 1, seed).manifest;
    return ds;
}

}  // namespace stgcn
