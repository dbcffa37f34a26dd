#include "stgcn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "stgcn/errors.hpp"

namespace stgcn {

namespace {

constexpr int kKeypointValues = kNumJoints * 3;

double mean_confidence(const PersonPose& p) {
    double s = 0.0;
    for (const auto& k : p) s += k.c;
    return s / kNumJoints;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Unassigned: break;
    }
    return "";
}

}  // namespace

bool SkeletonClip::person_slot_empty(int m) const {
    const auto begin = data.begin() + static_cast<std::ptrdiff_t>(index(m, 0, 0, 0));
    const auto end = begin + static_cast<std::ptrdiff_t>(channels) * frames * joints;
    return std::all_of(begin, end, [](float v) { return v == 0.0F; });
}

SkeletonClip SkeletonClip::zeros(int persons, int frames, int channels, int joints) {
    SkeletonClip clip;
    clip.persons = persons;
    clip.frames = frames;
    clip.channels = channels;
    clip.joints = joints;
    clip.data.assign(static_cast<std::size_t>(persons) * channels * frames * joints, 0.0F);
    clip.source_frame_count = frames;
    return clip;
}

SkeletonFrame openpose_frame_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("people") || !j.at("people").is_array()) {
        throw FormatError("OpenPose frame must be an object with a \"people\" array");
    }
    SkeletonFrame frame;
    const auto& people = j.at("people");
    for (std::size_t p = 0; p < people.size(); ++p) {
        const auto& person = people[p];
        if (!person.is_object() || !person.contains("pose_keypoints_2d") ||
            !person.at("pose_keypoints_2d").is_array()) {
            throw FormatError("person " + std::to_string(p) + ": missing pose_keypoints_2d array");
        }
        const auto& kp = person.at("pose_keypoints_2d");
        if (kp.size() != kKeypointValues) {
            throw FormatError("person " + std::to_string(p) + ": pose_keypoints_2d has " +
                              std::to_string(kp.size()) + " values, expected " +
                              std::to_string(kKeypointValues));
        }
        PersonPose pose{};
        for (int v = 0; v < kNumJoints; ++v) {
            for (int c = 0; c < 3; ++c) {
                const auto& val = kp[static_cast<std::size_t>(3 * v + c)];
                if (!val.is_number()) {
                    throw FormatError("person " + std::to_string(p) + ": keypoint value " +
                                      std::to_string(3 * v + c) + " is not a number");
                }
                const auto f = val.get<float>();
                (c == 0 ? pose[v].x : c == 1 ? pose[v].y : pose[v].c) = f;
            }
        }
        frame.persons.push_back(pose);
    }
    return frame;
}

SkeletonFrame parse_openpose_frame(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("OpenPose frame: ") + e.what());
    }
    return openpose_frame_from_json(j);
}

std::vector<SkeletonFrame> parse_openpose_clip(std::string_view json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("OpenPose clip: ") + e.what());
    }
    if (!j.is_object() || !j.contains("frames") || !j.at("frames").is_array()) {
        throw FormatError("OpenPose clip must be an object with a \"frames\" array");
    }
    std::vector<SkeletonFrame> frames;
    const auto& arr = j.at("frames");
    frames.reserve(arr.size());
    for (std::size_t t = 0; t < arr.size(); ++t) {
        try {
            frames.push_back(openpose_frame_from_json(arr[t]));
        } catch (const FormatError& e) {
            throw FormatError("frame " + std::to_string(t) + ": " + e.what());
        }
    }
    return frames;
}

std::vector<SkeletonFrame> pad_or_trim(std::span<const SkeletonFrame> frames, int target_frames) {
    if (frames.empty()) throw InputError("pad_or_trim: empty frame list");
    if (target_frames < 1) throw ConfigError("pad_or_trim: target frame count must be positive");
    const auto target = static_cast<std::size_t>(target_frames);
    std::vector<SkeletonFrame> out;
    out.reserve(target);
    for (std::size_t t = 0; t < target; ++t) out.push_back(frames[t % frames.size()]);
    return out;
}

SkeletonClip assemble_clip(std::span<const SkeletonFrame> frames, std::string id, int label,
                           int max_persons, int target_frames) {
    if (frames.empty()) throw InputError("assemble_clip: clip '" + id + "' has no frames");
    if (max_persons < 1) throw ConfigError("assemble_clip: max_persons must be positive");

    std::vector<SkeletonFrame> selected;
    selected.reserve(frames.size());
    std::vector<std::uint8_t> counts;
    counts.reserve(frames.size());
    for (const auto& f : frames) {
        counts.push_back(static_cast<std::uint8_t>(std::min<std::size_t>(f.persons.size(), 255)));
        SkeletonFrame s = f;
        std::stable_sort(s.persons.begin(), s.persons.end(),
                         [](const PersonPose& a, const PersonPose& b) {
                             return mean_confidence(a) > mean_confidence(b);
                         });
        if (s.persons.size() > static_cast<std::size_t>(max_persons)) {
            s.persons.resize(static_cast<std::size_t>(max_persons));
        }
        selected.push_back(std::move(s));
    }
    const auto fixed = pad_or_trim(selected, target_frames);

    SkeletonClip clip = SkeletonClip::zeros(max_persons, target_frames);
    clip.id = std::move(id);
    clip.label = label;
    clip.source_frame_count = static_cast<int>(frames.size());
    clip.source_person_counts = std::move(counts);
    for (int t = 0; t < target_frames; ++t) {
        const auto& persons = fixed[static_cast<std::size_t>(t)].persons;
        for (std::size_t m = 0; m < persons.size(); ++m) {
            for (int v = 0; v < kNumJoints; ++v) {
                const auto& k = persons[m][v];
                clip.at(static_cast<int>(m), 0, t, v) = k.x;
                clip.at(static_cast<int>(m), 1, t, v) = k.y;
                clip.at(static_cast<int>(m), 2, t, v) = k.c;
            }
        }
    }
    return clip;
}

double joint_recognition_rate(const SkeletonClip& clip) {
    const int usable = std::min(clip.source_frame_count, clip.frames);
    std::size_t detected = 0;
    std::size_t total = 0;
    for (int t = 0; t < usable; ++t) {
        bool present = false;
        if (static_cast<std::size_t>(t) < clip.source_person_counts.size()) {
            present = clip.source_person_counts[static_cast<std::size_t>(t)] > 0;
        } else {
            for (int c = 0; c < clip.channels && !present; ++c) {
                for (int v = 0; v < clip.joints && !present; ++v) present = clip.at(0, c, t, v) != 0.0F;
            }
        }
        if (!present) continue;
        total += static_cast<std::size_t>(clip.joints);
        for (int v = 0; v < clip.joints; ++v) {
            if (clip.at(0, 2, t, v) > 0.0F) ++detected;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(detected) / static_cast<double>(total);
}

QualityVerdict quality_filter(const SkeletonClip& clip, double threshold, int max_persons) {
    for (auto n : clip.source_person_counts) {
        if (n > max_persons) return {false, "too_many_persons"};
    }
    if (joint_recognition_rate(clip) > threshold) return {true, ""};
    return {false, "low_recognition"};
}

SkeletonClip normalize_coordinates(const SkeletonClip& clip, double width, double height) {
    if (!(width > 0.0) || !(height > 0.0)) {
        throw ConfigError("normalize_coordinates: width and height must be positive");
    }
    SkeletonClip out = clip;
    for (int m = 0; m < clip.persons; ++m) {
        for (int t = 0; t < clip.frames; ++t) {
            for (int v = 0; v < clip.joints; ++v) {
                if (clip.at(m, 2, t, v) <= 0.0F) continue;
                out.at(m, 0, t, v) = static_cast<float>(clip.at(m, 0, t, v) / width - 0.5);
                out.at(m, 1, t, v) = static_cast<float>(clip.at(m, 1, t, v) / height - 0.5);
            }
        }
    }
    return out;
}

SkeletonTemplate compute_template(std::span<const SkeletonClip> training_clips) {
    // Accumulate per joint first so the result does not depend on clip order
    // beyond floating-point rounding of the per-joint sums.
    std::array<double, kNumJoints> sum_x{};
    std::array<double, kNumJoints> sum_y{};
    std::array<std::size_t, kNumJoints> count{};
    auto for_each_detected = [&](auto&& fn) {
        for (const auto& clip : training_clips) {
            if (clip.joints != kNumJoints || clip.channels < 3) {
                throw DimensionError("compute_template: clip '" + clip.id + "' has " +
                                     std::to_string(clip.joints) + " joints and " +
                                     std::to_string(clip.channels) + " channels");
            }
            const int usable = std::min(clip.source_frame_count, clip.frames);
            for (int m = 0; m < clip.persons; ++m) {
                for (int t = 0; t < usable; ++t) {
                    for (int v = 0; v < kNumJoints; ++v) {
                        if (clip.at(m, 2, t, v) > 0.0F) {
                            fn(v, static_cast<double>(clip.at(m, 0, t, v)),
                               static_cast<double>(clip.at(m, 1, t, v)));
                        }
                    }
                }
            }
        }
    };
    for_each_detected([&](int v, double x, double y) {
        sum_x[v] += x;
        sum_y[v] += y;
        ++count[v];
    });
    const std::size_t n_total = std::accumulate(count.begin(), count.end(), std::size_t{0});
    if (n_total == 0) throw ConfigError("compute_template: no detected joints in training clips");
    for (int v = 0; v < kNumJoints; ++v) {
        if (count[v] == 0) {
            throw ConfigError("compute_template: joint " + std::to_string(v) +
                              " is never detected in the training clips");
        }
    }

    SkeletonTemplate tpl;
    tpl.cg = {std::accumulate(sum_x.begin(), sum_x.end(), 0.0) / static_cast<double>(n_total),
              std::accumulate(sum_y.begin(), sum_y.end(), 0.0) / static_cast<double>(n_total)};
    std::array<double, kNumJoints> sum_r{};
    for_each_detected([&](int v, double x, double y) {
        sum_r[v] += std::hypot(x - tpl.cg[0], y - tpl.cg[1]);
    });
    tpl.r.resize(kNumJoints);
    tpl.mean_pos.resize(kNumJoints);
    for (int v = 0; v < kNumJoints; ++v) {
        const auto n = static_cast<double>(count[v]);
        tpl.r[v] = sum_r[v] / n;
        tpl.mean_pos[v] = {sum_x[v] / n, sum_y[v] / n};
    }
    tpl.validate();
    return tpl;
}

// ---- manifest ---------------------------------------------------------------

void DatasetManifest::validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries) {
        if (!ids.insert(e.id).second) throw InputError("manifest: duplicate clip id '" + e.id + "'");
        if (e.label < 0 || e.label >= static_cast<int>(class_names.size())) {
            throw InputError("manifest: clip '" + e.id + "' has label " + std::to_string(e.label) +
                             " outside [0, " + std::to_string(class_names.size()) + ")");
        }
    }
}

std::vector<ManifestEntry> DatasetManifest::entries_in(Split s) const {
    std::vector<ManifestEntry> out;
    std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
                 [s](const ManifestEntry& e) { return e.split == s; });
    return out;
}

nlohmann::json to_json(const DatasetManifest& m) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json je = {{"id", e.id}, {"path", e.path}, {"label", e.label}};
        if (e.split != Split::Unassigned) je["split"] = split_name(e.split);
        entries.push_back(std::move(je));
    }
    return {{"classes", m.class_names}, {"entries", entries}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
    DatasetManifest m;
    try {
        m.class_names = j.at("classes").get<std::vector<std::string>>();
        for (const auto& je : j.at("entries")) {
            ManifestEntry e;
            e.id = je.at("id").get<std::string>();
            e.path = je.at("path").get<std::string>();
            e.label = je.at("label").get<int>();
            if (je.contains("split")) {
                const auto s = je.at("split").get<std::string>();
                if (s == "train") {
                    e.split = Split::Train;
                } else if (s == "val") {
                    e.split = Split::Val;
                } else {
                    throw InputError("manifest: clip '" + e.id + "' has unknown split '" + s + "'");
                }
            }
            m.entries.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("manifest: ") + e.what());
    }
    m.validate();
    return m;
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return manifest_from_json(j);
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path);
    out << to_json(m).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

SplitResult split_dataset(const DatasetManifest& manifest, int ratio_train, int ratio_val,
                          std::uint64_t seed) {
    if (ratio_train < 1 || ratio_val < 1) throw ConfigError("split_dataset: ratios must be positive");
    manifest.validate();
    const int ratio_total = ratio_train + ratio_val;
    const auto num_classes = manifest.class_names.size();

    std::vector<std::vector<std::size_t>> by_class(num_classes);
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
        by_class[static_cast<std::size_t>(manifest.entries[i].label)].push_back(i);
    }

    SplitResult result;
    result.manifest = manifest;
    std::mt19937_64 rng(seed);
    for (auto& idx : by_class) std::shuffle(idx.begin(), idx.end(), rng);

    // Largest-remainder apportionment over eligible classes.
    std::size_t eligible_total = 0;
    std::vector<std::size_t> quota(num_classes, 0);
    std::vector<std::size_t> remainder(num_classes, 0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        const auto n = by_class[c].size();
        if (n < static_cast<std::size_t>(ratio_total)) {
            if (n > 0) {
                result.warnings.push_back("class '" + manifest.class_names[c] + "' has " +
                                          std::to_string(n) + " samples (< " +
                                          std::to_string(ratio_total) + "); all assigned to train");
            }
            continue;
        }
        eligible_total += n;
        quota[c] = n * static_cast<std::size_t>(ratio_val) / static_cast<std::size_t>(ratio_total);
        remainder[c] = n * static_cast<std::size_t>(ratio_val) % static_cast<std::size_t>(ratio_total);
    }
    const std::size_t target_val =
        eligible_total * static_cast<std::size_t>(ratio_val) / static_cast<std::size_t>(ratio_total);
    std::size_t assigned = std::accumulate(quota.begin(), quota.end(), std::size_t{0});
    std::vector<std::size_t> order(num_classes);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t c : order) {
        if (assigned >= target_val) break;
        if (remainder[c] == 0) continue;
        ++quota[c];
        ++assigned;
    }

    for (std::size_t c = 0; c < num_classes; ++c) {
        for (std::size_t k = 0; k < by_class[c].size(); ++k) {
            result.manifest.entries[by_class[c][k]].split = k < quota[c] ? Split::Val : Split::Train;
        }
    }
    return result;
}

}  // namespace stgcn
