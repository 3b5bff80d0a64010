#include "repspace/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "repspace/calibration.hpp"
#include "repspace/conetest.hpp"
#include "repspace/dumpfmt.hpp"
#include "repspace/error.hpp"
#include "repspace/parallel.hpp"
#include "repspace/raster.hpp"
#include "repspace/robustness.hpp"
#include "repspace/stats.hpp"
#include "repspace/synthlab.hpp"

namespace repspace::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(config.dump())));
    return buf;
}

namespace {

json matrix_json(const Matrix<double>& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

Matrix<double> matrix_from_json(const json& j, const char* what) {
    require(j.is_array() && !j.empty(), ErrorKind::format, std::string(what) + " must be a non-empty array of rows");
    const std::size_t cols = j[0].size();
    Matrix<double> m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        require(j[r].is_array() && j[r].size() == cols, ErrorKind::format, std::string(what) + " rows differ in length");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json centers_to_json(const ClassCenterSet& c) {
    json classes = json::array();
    for (std::size_t k = 0; k < c.num_classes(); ++k)
        classes.push_back({{"class", k},
                           {"converged", static_cast<bool>(c.converged[k])},
                           {"final_loss", c.final_loss[k]},
                           {"iterations", c.iterations[k]},
                           {"has_class_mean", static_cast<bool>(c.has_class_mean[k])}});
    return {{"smoothing", c.smoothing},
            {"min_loss_point", matrix_json(c.min_loss_point)},
            {"class_mean", matrix_json(c.class_mean)},
            {"weight_vector", matrix_json(c.weight_vector)},
            {"classes", classes}};
}

ClassCenterSet centers_from_json(const json& j) {
    try {
        ClassCenterSet c;
        c.smoothing = j.at("smoothing").get<double>();
        c.min_loss_point = matrix_from_json(j.at("min_loss_point"), "min_loss_point");
        c.class_mean = matrix_from_json(j.at("class_mean"), "class_mean");
        c.weight_vector = matrix_from_json(j.at("weight_vector"), "weight_vector");
        const auto& classes = j.at("classes");
        const std::size_t n = c.min_loss_point.rows();
        require(classes.size() == n && c.class_mean.rows() == n && c.weight_vector.rows() == n,
                ErrorKind::format, "centers file class counts disagree");
        for (const auto& e : classes) {
            c.converged.push_back(e.at("converged").get<bool>());
            c.final_loss.push_back(e.at("final_loss").get<double>());
            c.iterations.push_back(e.at("iterations").get<int>());
            c.has_class_mean.push_back(e.at("has_class_mean").get<bool>());
        }
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, std::string("malformed centers JSON: ") + e.what());
    }
}

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::format, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
    out << text;
    out.close();
    require(static_cast<bool>(out), ErrorKind::io, "failed writing " + path.string());
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ClassCenterSet read_centers(const fs::path& path) { return centers_from_json(read_json(path)); }

namespace {

ClassCenterSet checked_centers(const FeatureDump& dump, const ClassCenterSet& c) {
    require(c.num_classes() == dump.num_classes() && c.min_loss_point.cols() == dump.dim(), ErrorKind::dimension,
            "centers file does not match the dump's head shape");
    return c;
}

json summary_json(const SummaryStats& s) { return {{"mean", s.mean}, {"std", s.std}, {"max", s.max}}; }
json mean_std_json(const MeanStd& s) { return {{"mean", s.mean}, {"std", s.std}}; }

json cone_json(const FeatureDump& dump, int steps) {
    const auto r = cone_test(dump, steps);
    const auto b = bias_dependence(dump);
    json table = json::array();
    for (std::size_t c = 0; c < dump.num_classes(); ++c)
        table.push_back({{"class", c},
                         {"bias", static_cast<double>(dump.bias[c])},
                         {"n_c", b.n_c[c]},
                         {"n_prime_c", b.n_prime_c[c]},
                         {"ratio", optional_json(b.ratio[c])}});
    return {{"steps", r.steps},
            {"accuracy", r.accuracy},
            {"num_samples", r.num_samples},
            {"evaluated", r.indices.size()},
            {"mean", r.mean},
            {"std", r.std},
            {"histogram", r.histogram()},
            {"bias_table", table},
            {"bias_abs", summary_json(b.bias_abs)},
            {"ratio_summary", summary_json(b.ratio_summary)}};
}

json comparison_json(const FeatureDump& dump, const ClassCenterSet& centers) {
    try {
        const auto r = compare_candidates(dump, centers);
        return {{"weight_vector", r.weight_vector},
                {"class_mean", r.class_mean},
                {"min_loss_point", r.min_loss_point},
                {"num_samples", r.num_samples}};
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::undefined && e.kind() != ErrorKind::degenerate) throw;
        return {{"undefined", e.what()}};
    }
}

json calibration_json(const CalibrationReport& r) {
    json bins = json::array();
    for (const auto& b : r.bins)
        bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
    return {{"ece", r.ece},
            {"signed_gap", r.signed_gap},
            {"overconfident", r.overconfident},
            {"num_samples", r.num_samples},
            {"bins", bins}};
}

json fit_json(const ScalingFit& f) {
    json curve = json::array();
    for (const auto& [t, nll] : f.curve) curve.push_back({t, nll});
    return {{"mode", f.mode == ScalingMode::temperature ? "temperature" : "feature"},
            {"t", f.t},
            {"nll_before", f.nll_before},
            {"nll_after", f.nll_after},
            {"accuracy_before", f.accuracy_before},
            {"accuracy_after", f.accuracy_after},
            {"ece_before", f.ece_before},
            {"ece_after", f.ece_after},
            {"changed_predictions", f.changed_predictions},
            {"curve", curve}};
}

json attack_json(const AttackBinReport& r) {
    json rates = json::array();
    for (const auto& s : r.success_rate) rates.push_back(optional_json(s));
    return {{"attack", r.attack},
            {"epsilon", optional_json(r.epsilon)},
            {"bin_edges", r.bin_edges},
            {"counts", r.counts},
            {"successes", r.successes},
            {"success_rate", rates},
            {"overall_success_rate", r.overall_success_rate},
            {"clean_correct", r.clean_correct},
            {"num_samples", r.num_samples}};
}

// A dump ready for the attack report: stored perturbations unless a feature
// epsilon was requested explicitly or none are stored.
FeatureDump attacked(const FeatureDump& dump, std::optional<double> explicit_eps, double default_eps) {
    if (dump.perturbed_features && !explicit_eps) return dump;
    return with_feature_attack(dump, explicit_eps.value_or(default_eps));
}

struct Outputs {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

void emit(const json& j, const std::string& path, std::ostream& out, Outputs& io) {
    if (path.empty()) {
        out << pretty(j);
    } else {
        write_text(path, pretty(j));
        io.outputs.push_back(path);
    }
}

int regularizer_rank(const std::string& name) {
    static const char* order[] = {"none", "label_smoothing", "mixup", "coordmix"};
    for (int k = 0; k < 4; ++k)
        if (name == order[k]) return k;
    return 4;
}

json report_row(const FeatureDump& dump, const std::string& name, double feature_eps) {
    const auto centers = compute_class_centers(dump);
    const auto fs = feature_stats(dump, centers);
    const auto cal = ece(dump);
    const auto hit = attacked(dump, std::nullopt, feature_eps);
    const auto atk = attack_success_by_cosine_bin(hit, centers);
    auto meta = [&](const char* key) {
        auto it = dump.meta.find(key);
        return it == dump.meta.end() ? std::string() : it->second;
    };
    return {{"name", name},
            {"regularizer", meta("regularizer").empty() ? "unknown" : meta("regularizer")},
            {"init_scheme", meta("init_scheme")},
            {"seed", meta("seed")},
            {"epoch", meta("epoch")},
            {"accuracy", fs.accuracy},
            {"rms", fs.rms_summary.mean},
            {"cosine", fs.cos_summary.mean},
            {"ece", cal.ece},
            {"attack_success", atk.overall_success_rate},
            {"attack", atk.attack},
            {"attack_epsilon", optional_json(atk.epsilon)}};
}

}  // namespace

json report(const fs::path& dir, double feature_epsilon) {
    require(fs::is_directory(dir), ErrorKind::io, dir.string() + " is not a directory");
    std::vector<std::pair<std::string, fs::path>> entries;
    std::vector<fs::path> children;
    for (const auto& e : fs::directory_iterator(dir)) children.push_back(e.path());
    std::sort(children.begin(), children.end());
    for (const auto& p : children) {
        if (fs::is_directory(p) && fs::exists(p / "manifest.json")) {
            const auto manifest = read_json(p / "manifest.json");
            const auto& snaps = manifest.at("snapshots");
            require(!snaps.empty(), ErrorKind::format, (p / "manifest.json").string() + " lists no snapshots");
            entries.emplace_back(p.filename().string(), p / snaps.back().at("path").get<std::string>());
        } else if (p.extension() == ".rsd") {
            entries.emplace_back(p.stem().string(), p);
        }
    }
    require(!entries.empty(), ErrorKind::usage, "no runs or dumps found under " + dir.string());

    std::vector<json> rows;
    for (const auto& [name, path] : entries) {
        auto row = report_row(read_dump(path), name, feature_epsilon);
        row["dump"] = path.lexically_relative(dir).generic_string();
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
        return regularizer_rank(a["regularizer"]) < regularizer_rank(b["regularizer"]);
    });
    return {{"columns", {"accuracy", "rms", "cosine", "ece", "attack_success"}},
            {"feature_epsilon", feature_epsilon},
            {"rows", rows}};
}

namespace {

json error_line(std::string_view kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

unsigned threads_from_env() {
    const char* env = std::getenv("REPSPACE_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(*end == '\0' && v >= 1, ErrorKind::usage, std::string("REPSPACE_THREADS must be a positive integer, got '") + env + "'");
    return static_cast<unsigned>(v);
}

Box3 padded_box(const FeatureDump& dump) {
    Box3 box;
    for (std::size_t j = 0; j < 3; ++j) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t i = 0; i < dump.num_samples(); ++i) {
            lo = std::min(lo, static_cast<double>(dump.features(i, j)));
            hi = std::max(hi, static_cast<double>(dump.features(i, j)));
        }
        const double pad = hi > lo ? 0.1 * (hi - lo) : 1.0;
        box.lo[j] = lo - pad;
        box.hi[j] = hi + pad;
    }
    return box;
}

Region parse_region(const std::vector<double>& v) {
    require(v.size() == 4, ErrorKind::usage, "--region takes x_min x_max y_min y_max");
    Region r{v[0], v[1], v[2], v[3]};
    r.validate();
    return r;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Representation-space analysis of classifier penultimate features", "repspace"};
    app.require_subcommand(1);
    app.fallthrough();  // --threads and --manifest may follow the subcommand
    app.set_version_flag("--version", std::string(kToolVersion));

    unsigned threads = 0;
    std::string manifest_path;
    app.add_option("--threads", threads, "Worker threads (REPSPACE_THREADS when unset)")->check(CLI::PositiveNumber);
    app.add_option("--manifest", manifest_path, "Write a run manifest listing inputs and outputs");

    // flag values, collected for the config hash
    std::map<std::string, std::string> flags;
    Outputs io;
    std::string dump_path, json_path, csv_path, svg_path, centers_path;

    auto add_dump = [&](CLI::App* sub) {
        sub->add_option("--dump", dump_path, "RSDUMP01 file")->required()->check(CLI::ExistingFile);
    };

    // train-synthetic
    auto* train = app.add_subcommand("train-synthetic", "Train a synthetic-lab model and write snapshots");
    std::string config_path, out_dir, preset_reg, preset_init = "default";
    std::uint64_t preset_seed = 1;
    std::size_t preset_d = 0;
    auto* config_opt = train->add_option("--config", config_path, "Run config JSON")->check(CLI::ExistingFile);
    auto* preset_opt = train->add_option("--preset", preset_reg, "Preset regularizer instead of a config file");
    train->add_option("--init", preset_init, "Preset init scheme")->needs(preset_opt);
    train->add_option("--seed", preset_seed, "Preset seed")->needs(preset_opt);
    train->add_option("--bottleneck", preset_d, "Preset bottleneck width")->needs(preset_opt);
    config_opt->excludes(preset_opt);
    train->add_option("--out", out_dir, "Run directory")->required();

    // cone-test
    auto* cone = app.add_subcommand("cone-test", "Sweep correct features toward the origin");
    int steps = 100;
    add_dump(cone);
    cone->add_option("--steps", steps, "Sweep steps")->check(CLI::Range(2, 1000000));
    cone->add_option("--json", json_path, "Output JSON (stdout when omitted)");

    // centers
    auto* centers = app.add_subcommand("centers", "Locate per-class minimum-loss points");
    CenterOptions copts;
    bool embed = false;
    add_dump(centers);
    centers->add_option("--smoothing", copts.smoothing, "Label smoothing of the search target")->check(CLI::Range(0.0, 1.0));
    centers->add_option("--max-iters", copts.max_iters, "Iteration cap per class")->check(CLI::PositiveNumber);
    centers->add_option("--json", json_path, "Output JSON (stdout when omitted)");
    centers->add_flag("--embed", embed, "Store the min-loss points in the dump's class_centers array");

    // stats
    auto* stats = app.add_subcommand("stats", "Per-sample feature magnitude and alignment");
    bool include_incorrect = false;
    add_dump(stats);
    stats->add_option("--centers", centers_path, "Centers JSON (computed when omitted)")->check(CLI::ExistingFile);
    stats->add_option("--csv", csv_path, "Per-sample CSV");
    stats->add_option("--json", json_path, "Summary JSON (stdout when omitted)");
    stats->add_flag("--include-incorrect", include_incorrect, "Summarize misclassified samples too");

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "ECE and temperature / feature scaling fits");
    std::size_t bins = 15;
    std::string fit = "both";
    add_dump(calibrate);
    calibrate->add_option("--bins", bins, "Confidence bins")->check(CLI::PositiveNumber);
    calibrate->add_option("--fit", fit, "Scaling fit")->check(CLI::IsMember({"none", "temperature", "feature", "both"}));
    calibrate->add_option("--json", json_path, "Output JSON (stdout when omitted)");

    // attack
    auto* attack = app.add_subcommand("attack", "Attack success by cosine-to-center bin");
    double feature_eps = 0.05;
    std::size_t attack_bins = 20;
    std::string attacked_out;
    add_dump(attack);
    attack->add_option("--centers", centers_path, "Centers JSON (computed when omitted)")->check(CLI::ExistingFile);
    auto* eps_opt = attack->add_option("--feature-eps", feature_eps,
                                       "Feature-space sign step; stored perturbations are used when omitted")
                        ->check(CLI::NonNegativeNumber);
    attack->add_option("--bins", attack_bins, "Cosine bins")->check(CLI::PositiveNumber);
    attack->add_option("--json", json_path, "Output JSON (stdout when omitted)");
    attack->add_option("--write-dump", attacked_out, "Write the dump with its perturbed features");

    // raster
    auto* raster = app.add_subcommand("raster", "Decision-region maps of 2D (or 3D) heads");
    int res = 512;
    bool no_bias = false;
    std::vector<double> region_v;
    std::vector<double> contour_levels;
    std::string contour_path;
    add_dump(raster);
    auto* res_opt = raster->add_option("--res", res, "Lattice resolution")->check(CLI::Range(2, 8192));
    raster->add_flag("--no-bias", no_bias, "Drop the head bias");
    raster->add_option("--region", region_v, "x_min x_max y_min y_max")->expected(4);
    raster->add_option("--svg", svg_path, "Region map SVG");
    raster->add_option("--csv", csv_path, "Lattice CSV (a cube for 3D heads)");
    raster->add_option("--centers", centers_path, "Centers JSON to overlay and to align against")->check(CLI::ExistingFile);
    raster->add_option("--contour", contour_levels, "Confidence levels to trace");
    raster->add_option("--contour-json", contour_path, "Contour polylines JSON");
    raster->add_option("--json", json_path, "Summary JSON (stdout when omitted)");

    // gradient-field
    auto* grad = app.add_subcommand("gradient-field", "Loss and its gradient over a 2D lattice");
    std::size_t cls = 0;
    double smoothing = 0.0;
    int grad_res = 64;
    add_dump(grad);
    grad->add_option("--class", cls, "Target class")->required();
    grad->add_option("--smoothing", smoothing, "Label smoothing of the target")->check(CLI::Range(0.0, 1.0));
    grad->add_option("--res", grad_res, "Lattice resolution")->check(CLI::Range(2, 8192));
    grad->add_option("--region", region_v, "x_min x_max y_min y_max")->expected(4);
    grad->add_option("--csv", csv_path, "x,y,loss,gx,gy rows")->required();

    // report
    auto* rep = app.add_subcommand("report", "Compare baseline and regularized runs");
    std::string run_dir;
    rep->add_option("--run", run_dir, "Directory of runs or dumps")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--feature-eps", feature_eps, "Feature sign step for dumps without perturbations")
        ->check(CLI::NonNegativeNumber);
    rep->add_option("--json", json_path, "Output JSON (stdout when omitted)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try {
            app.parse(reversed);
        } catch (const CLI::CallForHelp&) {
            out << app.help();
            return 0;
        } catch (const CLI::CallForAllHelp&) {
            out << app.help("", CLI::AppFormatMode::All);
            return 0;
        } catch (const CLI::CallForVersion&) {
            out << "repspace " << kToolVersion << "\n";
            return 0;
        } catch (const CLI::ParseError& e) {
            err << error_line("usage", e.what()).dump() << "\n";
            return 2;
        }

        if (threads == 0) threads = threads_from_env();
        set_thread_count(threads == 0 ? 1 : threads);

        CLI::App* sub = app.get_subcommands().front();
        for (const auto* opt : sub->get_options())
            if (opt->count() > 0 && opt->get_name() != "--help") flags[opt->get_name()] = CLI::detail::join(opt->results(), " ");
        json hashed = {{"command", sub->get_name()}, {"flags", flags}};
        if (!dump_path.empty()) io.inputs.push_back(dump_path);
        if (!centers_path.empty()) io.inputs.push_back(centers_path);

        if (sub == train) {
            synth::RunConfig cfg;
            if (!config_path.empty()) {
                cfg = synth::run_config_from_json(read_json(config_path));
                io.inputs.push_back(config_path);
            } else {
                require(!preset_reg.empty(), ErrorKind::usage, "train-synthetic needs --config or --preset");
                std::optional<std::size_t> d;
                if (preset_d > 0) d = preset_d;
                cfg = synth::preset(synth::parse_regularizer(preset_reg), synth::parse_init_scheme(preset_init),
                                    preset_seed, d);
            }
            const json cfg_json = synth::to_json(cfg);
            const auto result = synth::run(cfg);
            const fs::path dir(out_dir);
            fs::create_directories(dir);
            write_text(dir / "config.json", pretty(cfg_json));
            json snaps = json::array();
            std::vector<std::string> outputs{"config.json"};
            for (const auto& s : result.snapshots) {
                const std::string name = std::to_string(s.epoch) + ".rsd";
                write_dump(s.dump, dir / name);
                outputs.push_back(name);
                snaps.push_back({{"epoch", s.epoch}, {"path", name}});
            }
            json log = json::array();
            for (const auto& e : result.log)
                log.push_back({{"epoch", e.epoch},
                               {"loss", e.loss},
                               {"train_accuracy", e.train_accuracy},
                               {"learning_rate", e.learning_rate}});
            outputs.push_back("manifest.json");
            const json manifest = {{"command", "train-synthetic"},
                                   {"tool_version", kToolVersion},
                                   {"config_hash", config_hash(cfg_json)},
                                   {"config", cfg_json},
                                   {"inputs", io.inputs},
                                   {"outputs", outputs},
                                   {"snapshots", snaps},
                                   {"final", {{"train_accuracy", result.train_accuracy},
                                              {"eval_accuracy", result.eval_accuracy}}},
                                   {"log", log}};
            write_text(dir / "manifest.json", pretty(manifest));
            for (const auto& o : outputs) io.outputs.push_back((dir / o).string());
            hashed = cfg_json;
            out << pretty({{"run", cfg.name},
                           {"out", dir.string()},
                           {"train_accuracy", result.train_accuracy},
                           {"eval_accuracy", result.eval_accuracy},
                           {"snapshots", snaps.size()}});
        } else if (sub == cone) {
            emit(cone_json(read_dump(dump_path), steps), json_path, out, io);
        } else if (sub == centers) {
            auto dump = read_dump(dump_path);
            const auto c = compute_class_centers(dump, copts);
            auto j = centers_to_json(c);
            j["comparison"] = comparison_json(dump, c);
            emit(j, json_path, out, io);
            if (embed) {
                dump.class_centers = c.min_loss_point.cast<float>();
                write_dump(dump, dump_path);
                io.outputs.push_back(dump_path);
            }
        } else if (sub == stats) {
            const auto dump = read_dump(dump_path);
            const auto c = centers_path.empty() ? compute_class_centers(dump)
                                                : checked_centers(dump, read_centers(centers_path));
            const auto s = feature_stats(dump, c, include_incorrect);
            json j = {{"accuracy", s.accuracy},
                      {"rms", mean_std_json(s.rms_summary)},
                      {"cos_to_center", mean_std_json(s.cos_summary)},
                      {"summary_count", s.summary_count},
                      {"include_incorrect", s.include_incorrect},
                      {"num_samples", dump.num_samples()}};
            if (dump.perturbed_features) {
                const auto p = perturbation_stats(dump);
                j["perturbation"] = {{"mean_feature_rms", p.mean_feature_rms},
                                     {"mean_perturbation_rms", p.mean_perturbation_rms},
                                     {"pearson_r", optional_json(p.pearson_r)}};
            }
            if (!csv_path.empty()) {
                std::ostringstream csv;
                csv << "row,label,predicted,correct,confidence,rms,cos_to_center\n";
                for (std::size_t i = 0; i < dump.num_samples(); ++i)
                    csv << i << ',' << dump.labels[i] << ',' << s.predicted[i] << ',' << int(s.correct[i]) << ','
                        << num(s.confidence[i]) << ',' << num(s.rms[i]) << ',' << num(s.cos_to_center[i]) << '\n';
                write_text(csv_path, csv.str());
                io.outputs.push_back(csv_path);
            }
            emit(j, json_path, out, io);
        } else if (sub == calibrate) {
            const auto dump = read_dump(dump_path);
            json j = {{"calibration", calibration_json(ece(dump, bins))}};
            json fits = json::object();
            if (fit == "temperature" || fit == "both") fits["temperature"] = fit_json(fit_temperature(dump, {}, bins));
            if (fit == "feature" || fit == "both") fits["feature"] = fit_json(fit_feature_scale(dump, {}, bins));
            j["fits"] = fits;
            emit(j, json_path, out, io);
        } else if (sub == attack) {
            const auto dump = read_dump(dump_path);
            const auto c = centers_path.empty() ? compute_class_centers(dump)
                                                : checked_centers(dump, read_centers(centers_path));
            std::optional<double> eps;
            if (eps_opt->count() > 0) eps = feature_eps;
            const auto hit = attacked(dump, eps, feature_eps);
            if (!attacked_out.empty()) {
                write_dump(hit, attacked_out);
                io.outputs.push_back(attacked_out);
            }
            emit(attack_json(attack_success_by_cosine_bin(hit, c, attack_bins)), json_path, out, io);
        } else if (sub == raster) {
            const auto dump = read_dump(dump_path);
            const auto head = no_bias ? dump.head().without_bias() : dump.head();
            if (dump.dim() == 3) {
                require(svg_path.empty() && contour_levels.empty(), ErrorKind::dimension,
                        "3D heads support only --csv cube exports");
                require(!csv_path.empty(), ErrorKind::usage, "raster on a 3D dump needs --csv");
                const int r = res_opt->count() > 0 ? res : 64;
                export_cube_csv(head, padded_box(dump), r, true, csv_path);
                io.outputs.push_back(csv_path);
                emit({{"dim", 3}, {"resolution", r}, {"use_bias", !no_bias}}, json_path, out, io);
            } else {
                require(dump.dim() == 2, ErrorKind::dimension,
                        "raster needs a 2D (or 3D) representation, got D = " + std::to_string(dump.dim()));
                const Region region = region_v.empty() ? default_region(dump) : parse_region(region_v);
                const auto grid = rasterize(head, region, res, !no_bias);
                std::vector<std::size_t> area(dump.num_classes(), 0);
                for (auto c : grid.predicted_class) ++area[c];
                json fractions = json::array();
                for (auto a : area) fractions.push_back(static_cast<double>(a) / static_cast<double>(grid.predicted_class.size()));
                json j = {{"dim", 2},
                          {"resolution", res},
                          {"use_bias", !no_bias},
                          {"region", {region.x_min, region.x_max, region.y_min, region.y_max}},
                          {"class_area_fraction", fractions}};
                std::vector<Point2> center_points;
                if (!centers_path.empty()) {
                    const auto c = checked_centers(dump, read_centers(centers_path));
                    for (std::size_t k = 0; k < c.num_classes(); ++k)
                        center_points.push_back({c.min_loss_point(k, 0), c.min_loss_point(k, 1)});
                    json ext = json::array();
                    for (const auto& e : worst_aligned_high_confidence(dump, c)) {
                        ext.push_back({{"class", e.cls},
                                       {"count_above", e.count_above},
                                       {"ccw_angle", e.ccw_angle},
                                       {"cw_angle", e.cw_angle},
                                       {"spanned_angle", e.spanned_angle}});
                    }
                    j["worst_aligned"] = ext;
                }
                if (!contour_levels.empty()) {
                    json lines = json::array();
                    for (double level : contour_levels)
                        for (const auto& l : confidence_contour(grid, level)) {
                            json pts = json::array();
                            for (const auto& p : l.points) pts.push_back({p.x, p.y});
                            lines.push_back({{"level", level}, {"closed", l.closed}, {"points", pts}});
                        }
                    if (contour_path.empty()) {
                        j["contours"] = lines;
                    } else {
                        write_text(contour_path, pretty(lines));
                        io.outputs.push_back(contour_path);
                    }
                }
                if (!svg_path.empty()) {
                    std::vector<ScatterPoint> pts;
                    for (std::size_t i = 0; i < dump.num_samples(); ++i)
                        pts.push_back({dump.features(i, 0), dump.features(i, 1), dump.labels[i]});
                    export_svg(grid, pts, center_points, svg_path);
                    io.outputs.push_back(svg_path);
                }
                if (!csv_path.empty()) {
                    export_grid_csv(grid, csv_path);
                    io.outputs.push_back(csv_path);
                }
                emit(j, json_path, out, io);
            }
        } else if (sub == grad) {
            const auto dump = read_dump(dump_path);
            require(dump.dim() == 2, ErrorKind::dimension, "gradient-field needs a 2D representation");
            const Region region = region_v.empty() ? default_region(dump) : parse_region(region_v);
            const auto field = gradient_field(dump.head(), region, grad_res, cls, smoothing);
            std::ostringstream csv;
            csv << "x,y,loss,gx,gy\n";
            for (const auto& r : field.records)
                csv << num(r.x) << ',' << num(r.y) << ',' << num(r.loss) << ',' << num(r.gx) << ',' << num(r.gy) << '\n';
            write_text(csv_path, csv.str());
            io.outputs.push_back(csv_path);
        } else if (sub == rep) {
            emit(report(run_dir, feature_eps), json_path, out, io);
        }

        if (!manifest_path.empty()) {
            io.outputs.push_back(manifest_path);
            write_text(manifest_path, pretty({{"command", sub->get_name()},
                                              {"tool_version", kToolVersion},
                                              {"config_hash", config_hash(hashed)},
                                              {"inputs", io.inputs},
                                              {"outputs", io.outputs}}));
        }
        return 0;
    } catch (const Error& e) {
        err << error_line(to_string(e.kind()), e.what()).dump() << "\n";
        return e.kind() == ErrorKind::usage ? 2 : 1;
    } catch (const std::exception& e) {
        err << error_line("internal", e.what()).dump() << "\n";
        return 1;
    }
}

}  // namespace repspace::cli
