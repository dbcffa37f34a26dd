#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stgcn/graph.hpp"
#include "stgcn/net.hpp"
#include "stgcn/pipeline.hpp"

namespace stgcn {

struct TrainConfig {
    int epochs = 80;
    double base_lr = 0.1;
    double decay_factor = 0.1;
    int decay_every = 10;
    int decay_start_epoch = 20;
    double weight_decay = 0.0001;
    int batch_size = 8;
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::SpatialConfig;
    bool mask = true;
    // Validation cadence in epochs; the final epoch is always evaluated.
    int eval_every = 5;
    // Stop after the first validation pass that reaches this top-1.
    std::optional<double> target_val_top1;

    void validate() const;
};

inline constexpr std::array<int, 5> kBatchSizeGrid = {8, 16, 32, 64, 128};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    std::optional<double> val_top1;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;

    // Header "epoch,lr,train_loss,val_top1"; val_top1 empty when not evaluated.
    [[nodiscard]] std::string to_csv() const;
    friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

// In-memory dataset; clips[i] belongs to manifest.entries[i].
struct Dataset {
    DatasetManifest manifest;
    std::vector<SkeletonClip> clips;

    [[nodiscard]] std::vector<std::size_t> indices(Split s) const;
};

// Loads every tensor named in the manifest; relative paths resolve against
// the manifest's directory.
Dataset load_dataset(const std::string& manifest_path);
// Writes tensors under out_dir/tensors and out_dir/manifest.json.
void save_dataset(const Dataset& ds, const std::string& out_dir);

// base_lr * decay_factor^n, n = decay points (start, start + every, ...) <= epoch.
double lr_schedule(const TrainConfig& cfg, int epoch);

// p <- p - lr * (g + weight_decay * p); masks and biases are not decayed.
void sgd_step(ParamSet& params, const Gradients& grads, double lr, double weight_decay);

// Batch-mean loss and gradients over `samples`, accumulated in index order.
BackwardResult batch_gradients(const Model& model, const Dataset& ds, std::span<const std::size_t> samples);

// data_dependent_init on the first `max_clips` training clips in manifest
// order. Does nothing when max_clips is 0.
void calibrate(Model& model, const Dataset& ds, int max_clips = 16);

struct TrainResult {
    Model model;
    TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Called after every epoch with its record.
TrainResult train(const TrainConfig& cfg, const Dataset& ds, Model model, const EpochCallback& on_epoch = {});

struct EvalResult {
    double top1 = 0.0;
    std::size_t n = 0;
    std::size_t ties = 0;  // samples whose best score is shared by several classes
};

EvalResult evaluate(const Model& model, const Dataset& ds, std::span<const std::size_t> samples);
EvalResult evaluate(const Model& model, const Dataset& ds, Split split);

// Class k oscillates its own disjoint group of joints around a rest pose with
// a class-specific frequency and phase; coordinates get N(0, noise_sigma)
// noise and every confidence is 1. Entries are split 3:1 by `seed`.
Dataset synthetic_dataset(int num_classes, int samples_per_class, int frames, double noise_sigma,
                          std::uint64_t seed);

}  // namespace stgcn
