#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stgcn {

// Training-set skeleton statistics. `r[i]` is the mean Euclidean distance of
// joint i from the center of gravity `cg`, averaged over every frame in which
// the joint was detected.
struct SkeletonTemplate {
    std::array<double, 2> cg{0.0, 0.0};
    std::vector<double> r;
    std::vector<std::array<double, 2>> mean_pos;

    // Throws ConfigError unless r holds 18 finite non-negative values.
    void validate() const;
};

nlohmann::json to_json(const SkeletonTemplate& tpl);
SkeletonTemplate template_from_json(const nlohmann::json& j);

SkeletonTemplate load_template(const std::string& path);
void save_template(const SkeletonTemplate& tpl, const std::string& path);

}  // namespace stgcn
