#include <nlohmann/json.hpp>

#include "stgcn/errors.hpp"
#include "stgcn/net.hpp"
#include "stgcn/tensor_io.hpp"

namespace stgcn {

namespace {

nlohmann::json config_json(const Model& model) {
    const auto& c = model.config;
    nlohmann::json j = {{"strategy", std::string(strategy_name(c.strategy))},
                        {"mask", c.mask},
                        {"residual", c.residual},
                        {"channels", c.channels},
                        {"Kt", c.temporal_kernel},
                        {"num_classes", c.num_classes},
                        {"alpha", c.alpha},
                        {"precision", std::string(precision_name(c.precision))}};
    if (model.skeleton_template) j["template"] = to_json(*model.skeleton_template);
    return j;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model) {
    std::vector<std::uint8_t> out;
    for (char ch : {'S', 'T', 'G', 'M'}) out.push_back(static_cast<std::uint8_t>(ch));
    le::put_u32(out, kCheckpointVersion);
    const std::string cfg = config_json(model).dump();
    le::put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out.insert(out.end(), cfg.begin(), cfg.end());
    model.params.for_each([&](const std::string&, const Tensor& t, ParamKind) {
        le::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) le::put_u32(out, static_cast<std::uint32_t>(d));
        for (double v : t.data) le::put_f64(out, v);
    });
    return out;
}

Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
    le::Reader rd(bytes, origin);
    if (bytes.size() < 4 || rd.bytes(4) != "STGM") throw FormatError(origin + ": bad magic, expected STGM");
    const auto version = rd.u32();
    if (version != kCheckpointVersion) {
        throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
    }
    const auto cfg_len = rd.u32();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(rd.bytes(cfg_len));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(origin + ": config blob: " + e.what());
    }

    ModelConfig cfg;
    std::optional<SkeletonTemplate> tpl;
    try {
        const auto name = j.at("strategy").get<std::string>();
        const auto s = parse_strategy(name);
        if (!s) throw FormatError(origin + ": unknown strategy '" + name + "'");
        cfg.strategy = *s;
        cfg.mask = j.at("mask").get<bool>();
        cfg.residual = j.value("residual", false);
        cfg.channels = j.at("channels").get<std::vector<int>>();
        cfg.temporal_kernel = j.at("Kt").get<int>();
        cfg.num_classes = j.at("num_classes").get<int>();
        cfg.alpha = j.value("alpha", 0.001);
        const auto prec = j.value("precision", std::string("double"));
        const auto p = parse_precision(prec);
        if (!p) throw FormatError(origin + ": unknown precision '" + prec + "'");
        cfg.precision = *p;
        if (j.contains("template")) tpl = template_from_json(j.at("template"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(origin + ": config blob: " + e.what());
    }

    // Shapes come from the config; the stored dims must agree.
    Model model = make_model(cfg, tpl ? &*tpl : nullptr, 0);
    model.params.for_each([&](const std::string& path, Tensor& t, ParamKind) {
        const auto rank = rd.u32();
        std::vector<std::size_t> dims(rank);
        for (auto& d : dims) d = rd.u32();
        if (dims != t.shape) throw FormatError(origin + ": tensor " + path + " has unexpected shape");
        for (auto& v : t.data) v = rd.f64();
    });
    if (rd.remaining() != 0) {
        throw FormatError(origin + ": " + std::to_string(rd.remaining()) + " trailing bytes");
    }
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) { write_file(path, encode_checkpoint(model)); }

Model load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path), path); }

}  // namespace stgcn
