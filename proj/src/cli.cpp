#include "stgcn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "stgcn/errors.hpp"
#include "stgcn/graph.hpp"
#include "stgcn/net.hpp"
#include "stgcn/parallel.hpp"
#include "stgcn/pipeline.hpp"
#include "stgcn/tensor_io.hpp"
#include "stgcn/trainer.hpp"

namespace stgcn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kStrategyNames = {"uni", "distance", "spatial", "full-distance", "connection", "index"};

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + p.string());
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed: " + p.string());
}

void make_dirs(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

void echo_config(std::ostream& err, const std::string& command, json cfg) {
    cfg["command"] = command;
    err << "config: " << cfg.dump() << '\n';
}

json matrices_json(const PartitionedAdjacency& pa) {
    json out = json::array();
    for (int k = 0; k < pa.kernel_size; ++k) {
        json mat = json::array();
        for (int i = 0; i < pa.num_nodes; ++i) {
            json row = json::array();
            for (int j = 0; j < pa.num_nodes; ++j) row.push_back(pa.at(k, i, j));
            mat.push_back(std::move(row));
        }
        out.push_back(std::move(mat));
    }
    return out;
}

// ---- preprocess --------------------------------------------------------------

struct PreprocessOptions {
    std::string input_dir;
    std::string out_dir;
    double min_recognition = 0.5;
    int max_persons = kDefaultMaxPersons;
    int frames = kDefaultFrames;
    double width = 340.0;
    double height = 256.0;
    std::uint64_t seed = 0;
};

struct ClipSource {
    std::string class_name;
    int label = 0;
    std::string stem;
    fs::path path;  // per-clip JSON file or directory of per-frame files
};

std::vector<SkeletonFrame> read_clip_frames(const ClipSource& src) {
    if (fs::is_directory(src.path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(src.path)) {
            if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::vector<SkeletonFrame> frames;
        frames.reserve(files.size());
        for (const auto& f : files) {
            try {
                frames.push_back(parse_openpose_frame(read_text(f)));
            } catch (const Error& e) {
                throw FormatError(f.string() + ": " + e.what());
            }
        }
        return frames;
    }
    try {
        return parse_openpose_clip(read_text(src.path));
    } catch (const IoError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(src.path.string() + ": " + e.what());
    }
}

int cmd_preprocess(const PreprocessOptions& o, std::ostream& out, std::ostream& err) {
    echo_config(err, "preprocess", {{"input_dir", o.input_dir}, {"out_dir", o.out_dir},
                                    {"min_recognition", o.min_recognition}, {"max_persons", o.max_persons},
                                    {"frames", o.frames}, {"width", o.width}, {"height", o.height},
                                    {"seed", o.seed}});
    const fs::path in(o.input_dir);
    if (!fs::is_directory(in)) throw IoError("input directory " + o.input_dir + " is not readable");

    std::vector<std::string> classes;
    for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_directory()) classes.push_back(e.path().filename().string());
    }
    std::sort(classes.begin(), classes.end());
    std::vector<ClipSource> sources;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<ClipSource> in_class;
        for (const auto& e : fs::directory_iterator(in / classes[c])) {
            const bool clip_file = e.is_regular_file() && e.path().extension() == ".json";
            if (clip_file || e.is_directory()) {
                in_class.push_back({classes[c], static_cast<int>(c), e.path().stem().string(), e.path()});
            }
        }
        std::sort(in_class.begin(), in_class.end(),
                  [](const ClipSource& a, const ClipSource& b) { return a.stem < b.stem; });
        sources.insert(sources.end(), in_class.begin(), in_class.end());
    }
    if (sources.empty()) throw InputError("no clips found under " + o.input_dir + " (expected <class>/<clip>.json)");

    std::vector<std::optional<SkeletonClip>> results(sources.size());
    std::vector<std::string> verdicts(sources.size());
    parallel_for(sources.size(), [&](std::size_t i) {
        const auto& src = sources[i];
        const auto frames = read_clip_frames(src);
        if (frames.empty()) {
            verdicts[i] = "empty";
            return;
        }
        SkeletonClip clip = assemble_clip(frames, src.class_name + "/" + src.stem, src.label, o.max_persons, o.frames);
        const auto verdict = quality_filter(clip, o.min_recognition, o.max_persons);
        if (!verdict.accepted) {
            verdicts[i] = verdict.reason;
            return;
        }
        results[i] = normalize_coordinates(clip, o.width, o.height);
    });

    const fs::path root(o.out_dir);
    DatasetManifest manifest;
    manifest.class_names = classes;
    std::vector<SkeletonClip> accepted;
    std::map<std::string, int> rejected{{"low_recognition", 0}, {"too_many_persons", 0}, {"empty", 0}};
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (!results[i]) {
            ++rejected[verdicts[i]];
            continue;
        }
        const auto rel = fs::path("tensors") / sources[i].class_name / (sources[i].stem + ".stgt");
        make_dirs(root / rel.parent_path());
        export_tensor(*results[i], (root / rel).string());
        manifest.entries.push_back({results[i]->id, rel.generic_string(), results[i]->label, Split::Unassigned});
        accepted.push_back(std::move(*results[i]));
    }

    json report = {{"accepted", accepted.size()}, {"rejected", rejected}};
    json warnings = json::array();
    if (!accepted.empty()) {
        auto split = split_dataset(manifest, 3, 1, o.seed);
        for (auto& w : split.warnings) warnings.push_back(w);
        manifest = std::move(split.manifest);
        save_manifest(manifest, (root / "manifest.json").string());
        std::vector<SkeletonClip> train_clips;
        for (std::size_t i = 0; i < accepted.size(); ++i) {
            if (manifest.entries[i].split == Split::Train) train_clips.push_back(accepted[i]);
        }
        try {
            save_template(compute_template(train_clips), (root / "template.json").string());
        } catch (const ConfigError& e) {
            warnings.push_back(std::string("no template written: ") + e.what());
        }
    } else {
        make_dirs(root);
    }
    report["warnings"] = warnings;
    write_text(root / "report.json", report.dump(2) + "\n");
    out << report.dump() << '\n';
    if (accepted.empty()) {
        err << "error: no clip passed the quality gates\n";
        return 1;
    }
    return 0;
}

// ---- inspect-graph -----------------------------------------------------------

int cmd_inspect_graph(const std::string& strategy_flag, const std::string& template_file, double alpha,
                      std::ostream& out, std::ostream& err) {
    echo_config(err, "inspect-graph",
                {{"strategy", strategy_flag}, {"template_file", template_file}, {"alpha", alpha}});
    const auto strategy = parse_strategy(strategy_flag);
    if (!strategy) throw ConfigError("unknown strategy '" + strategy_flag + "'");
    std::optional<SkeletonTemplate> tpl;
    if (!template_file.empty()) tpl = load_template(template_file);
    if (needs_template(*strategy) && !tpl) {
        throw ConfigError("strategy '" + strategy_flag + "' requires --template-file");
    }
    const auto g = build_openpose18_graph();
    const auto mapping = label_map(g, *strategy, tpl ? &*tpl : nullptr);
    const auto raw = partitioned_adjacency(g, mapping);
    const auto norm = normalize_partitions(raw, alpha);

    json roots = json::object();
    json priority = json::object();
    for (int root = 0; root < g.num_nodes; ++root) {
        json members = json::object();
        for (auto [member, label] : mapping.labels[static_cast<std::size_t>(root)]) {
            members[std::to_string(member)] = label;
        }
        roots[std::to_string(root)] = std::move(members);
        priority[std::to_string(root)] = mapping.priority_sets[static_cast<std::size_t>(root)];
    }
    json doc = {{"strategy", std::string(strategy_name(*strategy))},
                {"K", mapping.kernel_size},
                {"roots", roots},
                {"priority_sets", priority},
                {"partitions", matrices_json(raw)},
                {"normalized_partitions", matrices_json(norm)},
                {"alpha", alpha}};
    out << doc.dump() << '\n';
    return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainOptions {
    std::string manifest;
    std::string strategy = "spatial";
    std::string mask = "on";
    std::string out_dir;
    std::string template_file;
    std::string channels = "3,32,64,64";
    int kt = 9;
    bool residual = false;
    std::string precision = "single";
    int calibrate_clips = 16;
    std::optional<double> target_top1;
    TrainConfig cfg;
};

std::vector<int> parse_channels(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError("--channels: '" + item + "' is not an integer");
        }
    }
    if (out.empty()) throw ConfigError("--channels is empty");
    return out;
}

int cmd_train(TrainOptions o, std::ostream& out, std::ostream& err) {
    const auto strategy = parse_strategy(o.strategy);
    if (!strategy) throw ConfigError("unknown strategy '" + o.strategy + "'");
    o.cfg.strategy = *strategy;
    o.cfg.mask = o.mask == "on";
    o.cfg.target_val_top1 = o.target_top1;
    json cfg_echo = {{"manifest", o.manifest},         {"strategy", o.strategy},
                     {"m_mask", o.mask},               {"batch_size", o.cfg.batch_size},
                     {"epochs", o.cfg.epochs},         {"lr", o.cfg.base_lr},
                     {"weight_decay", o.cfg.weight_decay}, {"seed", o.cfg.seed},
                     {"decay_factor", o.cfg.decay_factor}, {"decay_every", o.cfg.decay_every},
                     {"decay_start", o.cfg.decay_start_epoch}, {"eval_every", o.cfg.eval_every},
                     {"channels", o.channels},         {"kt", o.kt},
                     {"residual", o.residual},         {"precision", o.precision},
                     {"calibrate", o.calibrate_clips},
                     {"template_file", o.template_file},
                     {"out", o.out_dir}};
    cfg_echo["target_top1"] = o.target_top1 ? json(*o.target_top1) : json(nullptr);
    echo_config(err, "train", cfg_echo);
    o.cfg.validate();

    const Dataset ds = load_dataset(o.manifest);
    const auto train_idx = ds.indices(Split::Train);
    if (train_idx.empty()) throw InputError("manifest " + o.manifest + " has no training entries");

    ModelConfig mc;
    mc.strategy = *strategy;
    mc.mask = o.cfg.mask;
    mc.residual = o.residual;
    mc.channels = parse_channels(o.channels);
    mc.temporal_kernel = o.kt;
    mc.num_classes = static_cast<int>(ds.manifest.class_names.size());
    mc.precision = *parse_precision(o.precision);

    std::optional<SkeletonTemplate> tpl;
    if (!o.template_file.empty()) {
        tpl = load_template(o.template_file);
    } else if (needs_template(*strategy)) {
        std::vector<SkeletonClip> train_clips;
        for (auto i : train_idx) train_clips.push_back(ds.clips[i]);
        tpl = compute_template(train_clips);
    }
    Model init = make_model(mc, tpl ? &*tpl : nullptr, o.cfg.seed);
    calibrate(init, ds, o.calibrate_clips);
    const auto result = train(o.cfg, ds, std::move(init), [&](const EpochRecord& r) {
        err << "epoch " << r.epoch << " lr " << r.lr << " loss " << r.train_loss;
        if (r.val_top1) err << " val_top1 " << *r.val_top1;
        err << std::endl;
    });

    const fs::path root(o.out_dir);
    make_dirs(root);
    save_checkpoint(result.model, (root / "model.stgm").string());
    write_text(root / "history.csv", result.history.to_csv());
    const auto& last = result.history.epochs.back();
    json summary = {{"checkpoint", (root / "model.stgm").string()},
                    {"history", (root / "history.csv").string()},
                    {"epochs_run", result.history.epochs.size()},
                    {"final_train_loss", last.train_loss}};
    summary["final_val_top1"] = last.val_top1 ? json(*last.val_top1) : json(nullptr);
    out << summary.dump() << '\n';
    return 0;
}

// ---- eval --------------------------------------------------------------------

int cmd_eval(const std::string& manifest, const std::string& checkpoint, const std::string& split,
             std::ostream& out, std::ostream& err) {
    echo_config(err, "eval", {{"manifest", manifest}, {"checkpoint", checkpoint}, {"split", split}});
    const Dataset ds = load_dataset(manifest);
    const Model model = load_checkpoint(checkpoint);
    if (static_cast<int>(ds.manifest.class_names.size()) != model.config.num_classes) {
        throw InputError("manifest has " + std::to_string(ds.manifest.class_names.size()) +
                         " classes, checkpoint expects " + std::to_string(model.config.num_classes));
    }
    std::vector<std::size_t> idx;
    if (split == "all") {
        idx.resize(ds.clips.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
    } else {
        idx = ds.indices(split == "train" ? Split::Train : Split::Val);
    }
    if (idx.empty()) throw InputError("split '" + split + "' is empty");
    const auto r = evaluate(model, ds, idx);
    out << json{{"split", split}, {"n", r.n}, {"top1", r.top1}, {"ties", r.ties}}.dump() << '\n';
    return 0;
}

// ---- gen-synth ---------------------------------------------------------------

int cmd_gen_synth(int classes, int per_class, double sigma, std::uint64_t seed, int frames,
                  const std::string& out_dir, std::ostream& out, std::ostream& err) {
    echo_config(err, "gen-synth", {{"classes", classes}, {"per_class", per_class}, {"sigma", sigma},
                                   {"seed", seed}, {"frames", frames}, {"out_dir", out_dir}});
    const Dataset ds = synthetic_dataset(classes, per_class, frames, sigma, seed);
    save_dataset(ds, out_dir);
    std::vector<SkeletonClip> train_clips;
    for (auto i : ds.indices(Split::Train)) train_clips.push_back(ds.clips[i]);
    const fs::path root(out_dir);
    save_template(compute_template(train_clips), (root / "template.json").string());
    out << json{{"entries", ds.manifest.entries.size()},
                {"manifest", (root / "manifest.json").string()},
                {"template", (root / "template.json").string()}}
               .dump()
        << '\n';
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Skeleton action recognition with spatial-temporal graph convolutions", "stgcn"};
    app.require_subcommand(1);

    PreprocessOptions pre;
    auto* preprocess = app.add_subcommand("preprocess", "Quality-gate OpenPose clips into tensor files");
    preprocess->add_option("--input-dir", pre.input_dir, "Directory of <class>/<clip>.json")->required();
    preprocess->add_option("--out-dir", pre.out_dir, "Output directory")->required();
    preprocess->add_option("--min-recognition", pre.min_recognition, "Joint recognition threshold (strict)")
        ->check(CLI::Range(0.0, 1.0));
    preprocess->add_option("--max-persons", pre.max_persons, "Maximum persons per frame")->check(CLI::PositiveNumber);
    preprocess->add_option("--frames", pre.frames, "Fixed clip length")->check(CLI::PositiveNumber);
    preprocess->add_option("--width", pre.width, "Frame width in pixels")->check(CLI::PositiveNumber);
    preprocess->add_option("--height", pre.height, "Frame height in pixels")->check(CLI::PositiveNumber);
    preprocess->add_option("--seed", pre.seed, "Train/val split seed");

    std::string strategy;
    std::string template_file;
    double alpha = 0.001;
    auto* inspect = app.add_subcommand("inspect-graph", "Print label maps and partition matrices as JSON");
    inspect->add_option("--strategy", strategy, "Partition strategy")->required()->check(CLI::IsMember(kStrategyNames));
    inspect->add_option("--template-file", template_file, "Skeleton template JSON");
    inspect->add_option("--alpha", alpha, "Normalization stabilizer")->check(CLI::NonNegativeNumber);

    TrainOptions tr;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a manifest");
    train_cmd->add_option("--manifest", tr.manifest, "Manifest JSON")->required();
    train_cmd->add_option("--strategy", tr.strategy, "Partition strategy")->check(CLI::IsMember(kStrategyNames));
    train_cmd->add_option("--m-mask", tr.mask, "Learnable edge mask")->check(CLI::IsMember({"on", "off"}));
    train_cmd->add_option("--batch-size", tr.cfg.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
    train_cmd->add_option("--epochs", tr.cfg.epochs, "Training epochs")->check(CLI::PositiveNumber);
    train_cmd->add_option("--lr", tr.cfg.base_lr, "Initial learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--weight-decay", tr.cfg.weight_decay, "Weight decay")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--seed", tr.cfg.seed, "Initialization and shuffling seed");
    train_cmd->add_option("--decay-factor", tr.cfg.decay_factor, "Learning-rate decay factor")->check(CLI::PositiveNumber);
    train_cmd->add_option("--decay-every", tr.cfg.decay_every, "Epochs between decays")->check(CLI::PositiveNumber);
    train_cmd->add_option("--decay-start", tr.cfg.decay_start_epoch, "First decay epoch")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--eval-every", tr.cfg.eval_every, "Validation cadence")->check(CLI::PositiveNumber);
    train_cmd->add_option("--target-top1", tr.target_top1, "Stop once validation top-1 reaches this")
        ->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--channels", tr.channels, "Channel plan, input first");
    train_cmd->add_option("--kt", tr.kt, "Temporal kernel size (odd)")->check(CLI::PositiveNumber);
    train_cmd->add_flag("--residual", tr.residual, "Residual connections");
    train_cmd->add_option("--calibrate", tr.calibrate_clips, "Training clips for data-dependent init, 0 for none")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--precision", tr.precision, "Block arithmetic")->check(CLI::IsMember({"single", "double"}));
    train_cmd->add_option("--template-file", tr.template_file, "Skeleton template JSON");
    train_cmd->add_option("--out", tr.out_dir, "Output directory")->required();

    std::string eval_manifest;
    std::string checkpoint;
    std::string split = "val";
    auto* eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a checkpoint");
    eval_cmd->add_option("--manifest", eval_manifest, "Manifest JSON")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
    eval_cmd->add_option("--split", split, "train, val or all")->check(CLI::IsMember({"train", "val", "all"}));

    int classes = 4;
    int per_class = 32;
    double sigma = 0.02;
    std::uint64_t synth_seed = 0;
    int synth_frames = kDefaultFrames;
    std::string synth_out;
    auto* gen = app.add_subcommand("gen-synth", "Write a synthetic skeleton dataset");
    gen->add_option("--classes", classes, "Number of classes")->check(CLI::Range(2, 1000));
    gen->add_option("--per-class", per_class, "Clips per class")->check(CLI::PositiveNumber);
    gen->add_option("--sigma", sigma, "Coordinate noise")->check(CLI::NonNegativeNumber);
    gen->add_option("--seed", synth_seed, "Generator seed");
    gen->add_option("--frames", synth_frames, "Frames per clip")->check(CLI::PositiveNumber);
    gen->add_option("--out-dir", synth_out, "Output directory")->required();

    std::vector<const char*> argv{"stgcn"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*preprocess) return cmd_preprocess(pre, out, err);
        if (*inspect) return cmd_inspect_graph(strategy, template_file, alpha, out, err);
        if (*train_cmd) return cmd_train(tr, out, err);
        if (*eval_cmd) return cmd_eval(eval_manifest, checkpoint, split, out, err);
        if (*gen) return cmd_gen_synth(classes, per_class, sigma, synth_seed, synth_frames, synth_out, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace stgcn::cli
