#include "fgpan/cli.hpp"

#include "fgpan/checkpoint.hpp"
#include "fgpan/metrics.hpp"
#include "fgpan/prototypes.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fgpan {

namespace fs = std::filesystem;

std::string_view to_string(Command command) {
    switch (command) {
        case Command::gen: return "gen";
        case Command::train: return "train";
        case Command::infer: return "infer";
        case Command::eval: return "eval";
        case Command::gradcheck: return "gradcheck";
        case Command::proto_dist: return "proto-dist";
    }
    return "gradcheck";
}

namespace {

constexpr int kUsageError = 2;

bool on_off(const std::string& value) { return value == "on"; }

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
    RunConfig cfg;
    CLI::App app{"Zero-shot whole-slide classification over precomputed patch embeddings", "fgpan"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option values; flags take precedence");
    app.allow_config_extras(false);

    std::string select = "all";
    std::string pos_mode = "sin";
    std::string lwa_gff = "on";
    std::string fine_grained = "on";
    std::string profile = "desk";
    double lr = 0.0;
    double weight_decay = 0.0;
    int batch_size = 0;
    int iterations = 0;
    std::string data_dir;
    std::string prototype_file;
    std::string checkpoint;
    std::string out;
    std::string predictions;
    SyntheticConfig& syn = cfg.synthetic;

    app.add_option("--seed", cfg.seed, "Random seed")->envname("FGPAN_SEED");
    app.add_option("--data", data_dir, "Directory of .slide files");
    app.add_option("--prototypes", prototype_file, "Prototype file (default: <data>/prototypes.jsonl)");
    app.add_option("--checkpoint", checkpoint, "Model checkpoint to load");
    app.add_option("--out", out, "Output directory (gen) or file (train, infer)");
    app.add_option("--predictions", predictions, "Prediction file to evaluate");

    auto* dim_opt = app.add_option("--dim", cfg.dim, "Embedding dimension d")->check(CLI::PositiveNumber);
    auto* window_opt = app.add_option("--window", cfg.window_size, "Window size S")->check(CLI::PositiveNumber);
    auto* heads_opt = app.add_option("--heads", cfg.heads, "Attention heads L")->check(CLI::PositiveNumber);

    app.add_option("--select", select, "Patch selection strategy")->check(CLI::IsMember({"all", "fps", "topk"}));
    app.add_option("--m-max", cfg.selection.m_max, "Patches kept per slide")->check(CLI::PositiveNumber);
    app.add_option("--pos-mode", pos_mode, "Positional encoding")->check(CLI::IsMember({"sin", "table"}));
    app.add_option("--lambda-slide", cfg.lambda_slide, "Weight of the slide-level loss")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--lwa-gff", lwa_gff, "Window attention and gated fusion")->check(CLI::IsMember({"on", "off"}));
    app.add_option("--fine-grained-prototypes", fine_grained, "Fine-grained (on) or name-only (off) prototypes")
        ->check(CLI::IsMember({"on", "off"}));
    app.add_option("--tau-init", cfg.initial_tau, "Initial temperature")->check(CLI::PositiveNumber);

    app.add_option("--profile", profile, "Optimizer profile")->check(CLI::IsMember({"desk", "paper"}));
    auto* lr_opt = app.add_option("--lr", lr, "Learning rate (overrides profile)")->check(CLI::NonNegativeNumber);
    auto* wd_opt = app.add_option("--weight-decay", weight_decay, "Weight decay (overrides profile)")
                       ->check(CLI::NonNegativeNumber);
    auto* batch_opt = app.add_option("--batch-size", batch_size, "Slides per step (overrides profile)")
                          ->check(CLI::PositiveNumber);
    auto* iter_opt = app.add_option("--iterations", iterations, "Optimizer steps (overrides profile)")
                         ->check(CLI::NonNegativeNumber);

    auto* classes_opt = app.add_option("--classes", syn.classes, "Classes")->check(CLI::PositiveNumber);
    app.add_option("--slides-per-class", syn.slides_per_class, "Slides per class")->check(CLI::PositiveNumber);
    auto* patches_opt = app.add_option("--patches", syn.patches_per_slide, "Patches per slide M")
                            ->check(CLI::PositiveNumber);
    app.add_option("--signal-fraction", syn.signal_fraction, "Fraction of signal patches")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--noise", syn.noise_sigma, "Embedding noise sigma")->check(CLI::NonNegativeNumber);
    app.add_option("--grid-rows", syn.grid_rows, "Grid rows")->check(CLI::PositiveNumber);
    app.add_option("--grid-cols", syn.grid_cols, "Grid columns")->check(CLI::PositiveNumber);
    app.add_option("--name-only-blur", cfg.name_only_blur, "Offset size of name-only prototypes")
        ->check(CLI::NonNegativeNumber);

    app.add_option("--step", cfg.gradcheck_step, "Finite-difference step")->check(CLI::PositiveNumber);
    app.add_option("--tolerance", cfg.gradcheck_tolerance, "Maximum relative gradient error")
        ->check(CLI::PositiveNumber);

    std::map<std::string, Command> commands{{"gen", Command::gen},           {"train", Command::train},
                                            {"infer", Command::infer},       {"eval", Command::eval},
                                            {"gradcheck", Command::gradcheck}, {"proto-dist", Command::proto_dist}};
    app.add_subcommand("gen", "Write a synthetic corpus and its prototype file");
    app.add_subcommand("train", "Train on labeled slides and write a checkpoint");
    app.add_subcommand("infer", "Predict slide-level distributions");
    app.add_subcommand("eval", "Score predictions against slide labels");
    app.add_subcommand("gradcheck", "Compare analytic gradients with central differences");
    app.add_subcommand("proto-dist", "Mean pairwise distance between class prototypes");

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        std::ostringstream o;
        std::ostringstream er;
        const int code = app.exit(e, o, er);
        throw CliError(o.str() + er.str(), code == 0 ? 0 : kUsageError);
    }

    cfg.command = commands.at(app.get_subcommands().front()->get_name());
    cfg.data_dir = data_dir;
    cfg.prototype_file = prototype_file;
    if (cfg.prototype_file.empty() && !cfg.data_dir.empty()) {
        cfg.prototype_file = cfg.data_dir / "prototypes.jsonl";
    }
    cfg.checkpoint = checkpoint;
    cfg.out = out;
    cfg.predictions = predictions;
    cfg.selection.kind = parse_selection_kind(select);
    cfg.pos_mode = parse_positional_mode(pos_mode);
    cfg.lwa_gff = on_off(lwa_gff);
    cfg.fine_grained_prototypes = on_off(fine_grained);

    cfg.profile = profile;
    cfg.train = profile_by_name(profile);
    if (lr_opt->count() > 0) cfg.train.learning_rate = lr;
    if (wd_opt->count() > 0) cfg.train.weight_decay = weight_decay;
    if (batch_opt->count() > 0) cfg.train.batch_size = batch_size;
    if (iter_opt->count() > 0) cfg.train.iterations = iterations;
    cfg.train.lambda_slide = cfg.lambda_slide;
    cfg.train.seed = cfg.seed;

    syn.dim = cfg.dim;
    syn.seed = cfg.seed;

    if (cfg.command == Command::gradcheck) {
        // Small instance unless the caller sized it explicitly.
        if (dim_opt->count() == 0) cfg.dim = 8;
        if (window_opt->count() == 0) cfg.window_size = 2;
        if (heads_opt->count() == 0) cfg.heads = 2;
        cfg.gradcheck_classes = classes_opt->count() > 0 ? syn.classes : 3;
        cfg.gradcheck_patches = patches_opt->count() > 0 ? syn.patches_per_slide : 6;
    }

    auto require = [&](const fs::path& p, const char* flag) {
        if (p.empty()) {
            throw CliError(std::string(to_string(cfg.command)) + ": missing required path " + flag, kUsageError);
        }
    };
    switch (cfg.command) {
        case Command::gen: require(cfg.out, "--out"); break;
        case Command::train:
            require(cfg.data_dir, "--data");
            require(cfg.out, "--out");
            break;
        case Command::infer:
            require(cfg.data_dir, "--data");
            require(cfg.out, "--out");
            break;
        case Command::eval:
            require(cfg.predictions, "--predictions");
            require(cfg.data_dir, "--data");
            break;
        case Command::proto_dist: require(cfg.prototype_file, "--prototypes"); break;
        case Command::gradcheck: break;
    }

    std::ostringstream echo;
    echo << "command=" << to_string(cfg.command) << '\n' << app.config_to_str(true, false);
    cfg.echo = echo.str();
    return cfg;
}

std::string config_digest(const RunConfig& cfg) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : cfg.echo) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    std::ostringstream o;
    o << std::hex << std::setw(16) << std::setfill('0') << h;
    return o.str();
}

std::vector<SlideRecord> load_slide_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("data directory not found: '" + dir.string() + "'");
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".slide") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
        throw std::runtime_error("no .slide files in '" + dir.string() + "'");
    }
    std::vector<SlideRecord> slides;
    slides.reserve(files.size());
    for (const auto& f : files) {
        slides.push_back(load_slide(f));
    }
    return slides;
}

std::string format_prediction(const std::string& slide_id, const SlidePrediction& prediction) {
    std::string line = "{\"slide_id\":" + nlohmann::json(slide_id).dump();
    line += ",\"predicted\":" + std::to_string(prediction.predicted);
    line += ",\"P\":[";
    for (Eigen::Index c = 0; c < prediction.probs.size(); ++c) {
        if (c > 0) line += ',';
        line += format_double(prediction.probs[c]);
    }
    line += "]}";
    return line;
}

std::vector<PredictionLine> load_predictions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open predictions '" + path.string() + "'");
    }
    std::vector<PredictionLine> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto obj = nlohmann::json::parse(line);
            PredictionLine p;
            p.slide_id = obj.at("slide_id").get<std::string>();
            p.predicted = obj.at("predicted").get<int>();
            const auto probs = obj.at("P").get<std::vector<double>>();
            p.probs = Eigen::Map<const Vector>(probs.data(), static_cast<Eigen::Index>(probs.size()));
            lines.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("malformed prediction line: " + std::string(e.what()));
        }
    }
    return lines;
}

namespace {

std::vector<SlideRecord> prepared_slides(const RunConfig& cfg) {
    std::vector<SlideRecord> slides = load_slide_dir(cfg.data_dir);
    for (auto& s : slides) {
        s = select_patches(s, cfg.selection);
    }
    return slides;
}

ModelShape shape_for(const RunConfig& cfg, const std::vector<SlideRecord>& slides) {
    ModelShape shape;
    shape.dim = slides.front().dim;
    shape.window_size = cfg.window_size;
    shape.heads = cfg.heads;
    shape.pos_mode = cfg.pos_mode;
    shape.grid_rows = 1;
    shape.grid_cols = 1;
    for (const auto& s : slides) {
        shape.grid_rows = std::max(shape.grid_rows, s.grid_rows);
        shape.grid_cols = std::max(shape.grid_cols, s.grid_cols);
        for (const auto& p : s.patches) {
            shape.grid_rows = std::max(shape.grid_rows, p.coord.row + 1);
            shape.grid_cols = std::max(shape.grid_cols, p.coord.col + 1);
        }
    }
    return shape;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream o(path, std::ios::binary | std::ios::trunc);
    if (!o) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    o << text;
}

int run_gen(const RunConfig& cfg, std::ostream& out) {
    const SyntheticCorpus corpus = gen_synthetic(cfg.synthetic);
    fs::create_directories(cfg.out);
    for (const auto& s : corpus.slides) {
        save_slide(s, cfg.out / (s.slide_id + ".slide"));
    }
    const PrototypeSet set = cfg.fine_grained_prototypes
                                 ? corpus.prototypes
                                 : make_name_only_prototypes(corpus.prototypes, cfg.name_only_blur, cfg.seed);
    save_prototypes(set, cfg.out / "prototypes.jsonl");
    out << "wrote " << corpus.slides.size() << " slides and 1 prototype file ("
        << (cfg.fine_grained_prototypes ? "fine-grained" : "name-only") << ") to " << cfg.out.string() << '\n';
    return 0;
}

int run_train(const RunConfig& cfg, std::ostream& out) {
    const auto slides = prepared_slides(cfg);
    const PrototypeSet set = normalize_prototypes(load_prototypes(cfg.prototype_file));
    ModelParams initial = cfg.checkpoint.empty() ? init_params(shape_for(cfg, slides), cfg.seed, cfg.initial_tau)
                                                 : load_checkpoint(cfg.checkpoint, slides.front().dim);
    const TrainResult result = train(slides, cfg.train, set, std::move(initial), ForwardOptions{cfg.lwa_gff});
    save_checkpoint(result.params, cfg.out);

    std::string losses;
    for (double l : result.losses) {
        losses += format_double(l);
        losses += '\n';
    }
    fs::path loss_path = cfg.out;
    loss_path += ".losses";
    write_text(loss_path, losses);

    out << "trained " << result.losses.size() << " steps on " << slides.size() << " slides";
    if (!result.losses.empty()) {
        out << "; loss " << format_double(result.losses.front()) << " -> " << format_double(result.losses.back());
    }
    out << "\ncheckpoint " << cfg.out.string() << '\n';
    return 0;
}

int run_infer(const RunConfig& cfg, std::ostream& out) {
    auto slides = prepared_slides(cfg);
    std::sort(slides.begin(), slides.end(),
              [](const SlideRecord& a, const SlideRecord& b) { return a.slide_id < b.slide_id; });
    const PrototypeSet set = normalize_prototypes(load_prototypes(cfg.prototype_file));
    const ModelParams params = cfg.checkpoint.empty()
                                   ? init_params(shape_for(cfg, slides), cfg.seed, cfg.initial_tau)
                                   : load_checkpoint(cfg.checkpoint, slides.front().dim);
    std::string text;
    for (const auto& s : slides) {
        const SlideForward f = forward_slide(s, params, set, ForwardOptions{cfg.lwa_gff});
        text += format_prediction(s.slide_id, f.slide);
        text += '\n';
    }
    write_text(cfg.out, text);
    out << "wrote " << slides.size() << " predictions to " << cfg.out.string() << '\n';
    return 0;
}

int run_eval(const RunConfig& cfg, std::ostream& out) {
    const auto predictions = load_predictions(cfg.predictions);
    std::map<std::string, int> labels;
    for (const auto& s : load_slide_dir(cfg.data_dir)) {
        if (s.label) labels[s.slide_id] = *s.label;
    }
    std::vector<EvalRecord> records;
    for (const auto& p : predictions) {
        const auto it = labels.find(p.slide_id);
        if (it == labels.end()) {
            throw std::runtime_error("no labeled slide for prediction '" + p.slide_id + "'");
        }
        records.push_back({p.slide_id, it->second, p.predicted, p.probs});
    }
    const double bacc = balanced_accuracy(records);
    const F1Scores f1 = f1_scores(records);
    double auroc = std::numeric_limits<double>::quiet_NaN();
    try {
        auroc = auroc_ovr(records);
    } catch (const std::invalid_argument&) {
        // A class without positives or negatives leaves AUROC undefined.
    }
    char line[160];
    std::snprintf(line, sizeof line, "bacc=%.4f f1_macro=%.4f f1_weighted=%.4f auroc=%.4f\n", bacc, f1.macro,
                  f1.weighted, auroc);
    out << line;
    return 0;
}

int run_gradcheck(const RunConfig& cfg, std::ostream& out) {
    ModelShape shape;
    shape.dim = cfg.dim;
    shape.window_size = cfg.window_size;
    shape.heads = cfg.heads;
    shape.pos_mode = cfg.pos_mode;
    shape.grid_rows = 4;
    shape.grid_cols = 4;
    while (shape.grid_rows * shape.grid_cols < cfg.gradcheck_patches) {
        ++shape.grid_rows;
        ++shape.grid_cols;
    }
    const GradCheckInstance inst =
        make_gradcheck_instance(shape, cfg.gradcheck_classes, cfg.gradcheck_patches, 2, cfg.seed);
    const double err = finite_diff_check(inst.slides, inst.params, inst.prototypes, cfg.lambda_slide,
                                         cfg.gradcheck_step, ForwardOptions{cfg.lwa_gff});
    char line[160];
    std::snprintf(line, sizeof line, "max_rel_error=%.3e tolerance=%.3e scalars=%zu\n", err, cfg.gradcheck_tolerance,
                  scalar_count(inst.params));
    out << line;
    return err <= cfg.gradcheck_tolerance ? 0 : 1;
}

int run_proto_dist(const RunConfig& cfg, std::ostream& out) {
    const PrototypeSet set = normalize_prototypes(load_prototypes(cfg.prototype_file));
    out << format_double(interclass_distance(set)) << '\n';
    return 0;
}

}  // namespace

int dispatch(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    out << "seed=" << cfg.seed << " config_digest=" << config_digest(cfg) << '\n';
    out << cfg.echo;
    if (!cfg.echo.empty() && cfg.echo.back() != '\n') out << '\n';
    try {
        switch (cfg.command) {
            case Command::gen: return run_gen(cfg, out);
            case Command::train: return run_train(cfg, out);
            case Command::infer: return run_infer(cfg, out);
            case Command::eval: return run_eval(cfg, out);
            case Command::gradcheck: return run_gradcheck(cfg, out);
            case Command::proto_dist: return run_proto_dist(cfg, out);
        }
    } catch (const std::exception& e) {
        err << to_string(cfg.command) << ": " << e.what() << '\n';
        return 1;
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    try {
        cfg = parse_config(args);
    } catch (const CliError& e) {
        (e.exit_code() == 0 ? out : err) << e.what();
        return e.exit_code();
    } catch (const std::exception& e) {
        err << e.what() << '\n';
        return kUsageError;
    }
    return dispatch(cfg, out, err);
}

}  // namespace fgpan
