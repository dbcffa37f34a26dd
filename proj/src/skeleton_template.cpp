#include "stgcn/skeleton_template.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "stgcn/errors.hpp"
#include "stgcn/graph.hpp"

namespace stgcn {

void SkeletonTemplate::validate() const {
    if (r.size() != static_cast<std::size_t>(kNumJoints)) {
        throw ConfigError("skeleton template holds " + std::to_string(r.size()) +
                          " joint distances, expected " + std::to_string(kNumJoints));
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (!std::isfinite(r[i]) || r[i] < 0.0) {
            throw ConfigError("skeleton template: joint " + std::to_string(i) +
                              " has invalid distance " + std::to_string(r[i]));
        }
    }
}

nlohmann::json to_json(const SkeletonTemplate& tpl) {
    nlohmann::json mean = nlohmann::json::array();
    for (const auto& p : tpl.mean_pos) mean.push_back({p[0], p[1]});
    return {{"cg", {tpl.cg[0], tpl.cg[1]}}, {"r", tpl.r}, {"mean_pos", mean}};
}

SkeletonTemplate template_from_json(const nlohmann::json& j) {
    SkeletonTemplate tpl;
    try {
        const auto& cg = j.at("cg");
        tpl.cg = {cg.at(0).get<double>(), cg.at(1).get<double>()};
        tpl.r = j.at("r").get<std::vector<double>>();
        if (j.contains("mean_pos")) {
            for (const auto& p : j.at("mean_pos")) {
                tpl.mean_pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("skeleton template: ") + e.what());
    }
    tpl.validate();
    return tpl;
}

SkeletonTemplate load_template(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open template file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path + ": " + e.what());
    }
    return template_from_json(j);
}

void save_template(const SkeletonTemplate& tpl, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write template file " + path);
    out << to_json(tpl).dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace stgcn
