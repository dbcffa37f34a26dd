#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "stgcn/graph.hpp"
#include "stgcn/skeleton_template.hpp"

namespace stgcn {

inline constexpr int kDefaultFrames = 300;
inline constexpr int kDefaultMaxPersons = 2;
inline constexpr int kChannels = 3;  // x, y, confidence

struct Keypoint {
    float x = 0.0F;
    float y = 0.0F;
    float c = 0.0F;

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using PersonPose = std::array<Keypoint, kNumJoints>;

// One OpenPose frame. An undetected joint is (0, 0, 0).
struct SkeletonFrame {
    std::vector<PersonPose> persons;

    friend bool operator==(const SkeletonFrame&, const SkeletonFrame&) = default;
};

// Multi-person clip tensor shaped (M, C, T, V), M outermost, V innermost.
struct SkeletonClip {
    std::string id;
    int label = 0;
    int persons = kDefaultMaxPersons;
    int channels = kChannels;
    int frames = kDefaultFrames;
    int joints = kNumJoints;
    std::vector<float> data;
    // Frames before padding/trimming.
    int source_frame_count = 0;
    // Persons detected in each source frame (before slot selection); used by
    // the quality gates. Empty for clips loaded from tensor files.
    std::vector<std::uint8_t> source_person_counts;

    [[nodiscard]] std::size_t index(int m, int c, int t, int v) const {
        return ((static_cast<std::size_t>(m) * channels + c) * frames + t) * joints + v;
    }
    [[nodiscard]] float& at(int m, int c, int t, int v) { return data[index(m, c, t, v)]; }
    [[nodiscard]] float at(int m, int c, int t, int v) const { return data[index(m, c, t, v)]; }
    [[nodiscard]] bool person_slot_empty(int m) const;

    // Zero-filled clip with the given shape.
    static SkeletonClip zeros(int persons, int frames, int channels = kChannels,
                              int joints = kNumJoints);
};

// Parses {"people": [{"pose_keypoints_2d": [54 numbers]}, ...]}.
SkeletonFrame parse_openpose_frame(std::string_view json_text);
SkeletonFrame openpose_frame_from_json(const nlohmann::json& j);

// Parses a per-clip export {"frames": [frame, ...]}.
std::vector<SkeletonFrame> parse_openpose_clip(std::string_view json_text);

// output[t] = input[t mod n] when n < target, else the first target frames.
std::vector<SkeletonFrame> pad_or_trim(std::span<const SkeletonFrame> frames,
                                       int target_frames = kDefaultFrames);

SkeletonClip assemble_clip(std::span<const SkeletonFrame> frames, std::string id, int label,
                           int max_persons = kDefaultMaxPersons,
                           int target_frames = kDefaultFrames);

// Fraction of detected (c > 0) joints of the slot-0 person over source frames
// that contain at least one person.
double joint_recognition_rate(const SkeletonClip& clip);

struct QualityVerdict {
    bool accepted = false;
    std::string reason;  // "", "low_recognition" or "too_many_persons"
};

QualityVerdict quality_filter(const SkeletonClip& clip, double threshold = 0.5,
                              int max_persons = kDefaultMaxPersons);

// x' = x / width - 0.5, y' = y / height - 0.5 for detected joints.
SkeletonClip normalize_coordinates(const SkeletonClip& clip, double width = 340.0,
                                   double height = 256.0);

// Statistics over detected joints of all source frames and both person slots.
SkeletonTemplate compute_template(std::span<const SkeletonClip> training_clips);

// ---- dataset manifest -------------------------------------------------------

enum class Split { Unassigned, Train, Val };

struct ManifestEntry {
    std::string id;
    std::string path;
    int label = 0;
    Split split = Split::Unassigned;
};

struct DatasetManifest {
    std::vector<std::string> class_names;
    std::vector<ManifestEntry> entries;

    // Throws InputError on duplicate ids or out-of-range labels.
    void validate() const;
    [[nodiscard]] std::vector<ManifestEntry> entries_in(Split s) const;
};

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& m, const std::string& path);

struct SplitResult {
    DatasetManifest manifest;
    std::vector<std::string> warnings;
};

// Seeded per-class shuffle; val count per class is proportional
// (ratio_val / (ratio_train + ratio_val)) with largest-remainder rounding so
// the overall val count is floor(n * ratio_val / total). Classes with fewer
// than ratio_train + ratio_val samples go entirely to train.
SplitResult split_dataset(const DatasetManifest& manifest, int ratio_train = 3, int ratio_val = 1,
                          std::uint64_t seed = 0);

}  // namespace stgcn
