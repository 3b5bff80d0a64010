#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "repspace/cli.hpp"
#include "repspace/dumpfmt.hpp"
#include "repspace/synthlab.hpp"

using namespace repspace;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / "repspace_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

bool keys_sorted(const std::string& text) {
    // nlohmann's default object type is an ordered map, so a re-dump that
    // matches the original text proves the keys were emitted sorted
    return json::parse(text).dump(2) + "\n" == text;
}

fs::path write_random_dump(const fs::path& dir, std::uint64_t seed, std::size_t c, std::size_t d, bool zero_bias) {
    Rng rng(seed);
    auto head = testing::random_head(rng, c, d, 0.5);
    if (zero_bias) head = head.without_bias();
    auto dump = testing::self_labelled_dump(testing::random_features(rng, 300, d, 2.0), head);
    // a few mistakes so calibration has something to fit
    for (std::size_t i = 0; i < dump.num_samples(); i += 9) dump.labels[i] = (dump.labels[i] + 1) % c;
    const auto path = dir / ("d" + std::to_string(seed) + ".rsd");
    write_dump(dump, path);
    return path;
}

std::string small_config(const fs::path& dir, synth::RegularizerKind kind) {
    auto cfg = synth::preset(kind, synth::InitScheme::default_init, 1, 2);
    cfg.data.samples_per_class = 40;
    cfg.eval_samples_per_class = 20;
    cfg.train.epochs = 4;
    cfg.train.warmup_epochs = 1;
    cfg.train.snapshot_epochs = {0, 4};
    const auto path = dir / (synth::to_string(kind) + ".json");
    std::ofstream(path) << synth::to_json(cfg).dump(2);
    return path.string();
}

}  // namespace

TEST_CASE("fnv-1a reference values") {
    CHECK(cli::fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(cli::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(cli::fnv1a64("foobar") == 0x85944171f73967e8ull);
    CHECK(cli::config_hash(json{{"b", 1}, {"a", 2}}) == cli::config_hash(json{{"a", 2}, {"b", 1}}));
}

TEST_CASE("cone-test on a zero-bias dump never leaves the cone") {
    auto dir = scratch("cone");
    auto dump = write_random_dump(dir, 1, 5, 3, true);
    auto r = invoke({"cone-test", "--dump", dump.string(), "--json", (dir / "cone.json").string()});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "cone.json");
    CHECK(keys_sorted(text));
    auto j = json::parse(text);
    CHECK(j["mean"].get<double>() == 100.0);
    CHECK(j["std"].get<double>() == 0.0);
    CHECK(j["bias_table"].size() == 5);
    for (const auto& row : j["bias_table"])
        if (!row["ratio"].is_null()) CHECK(row["ratio"].get<double>() == 0.0);
    // idempotent
    REQUIRE(invoke({"cone-test", "--dump", dump.string(), "--json", (dir / "cone.json").string()}).code == 0);
    CHECK(slurp(dir / "cone.json") == text);
}

TEST_CASE("calibrate --fit both agrees without bias") {
    auto dir = scratch("calibrate");
    auto dump = write_random_dump(dir, 2, 4, 3, true);
    auto r = invoke({"calibrate", "--dump", dump.string(), "--fit", "both"});
    REQUIRE(r.code == 0);
    CHECK(keys_sorted(r.out));
    auto j = json::parse(r.out);
    const double tt = j["fits"]["temperature"]["t"];
    const double tf = j["fits"]["feature"]["t"];
    CHECK(std::abs(tt - tf) < 1e-6);
    CHECK(j["calibration"]["bins"].size() == 15);
}

TEST_CASE("centers, stats and attack chain through files") {
    auto dir = scratch("chain");
    auto dump = write_random_dump(dir, 3, 4, 2, false);
    const auto centers = (dir / "centers.json").string();
    REQUIRE(invoke({"centers", "--dump", dump.string(), "--json", centers, "--embed"}).code == 0);
    auto cj = json::parse(slurp(centers));
    CHECK(cj.contains("comparison"));
    auto set = cli::read_centers(centers);
    CHECK(set.num_classes() == 4);
    CHECK(cli::centers_to_json(set)["min_loss_point"] == cj["min_loss_point"]);
    auto embedded = read_dump(dump);
    REQUIRE(embedded.class_centers.has_value());
    CHECK(embedded.class_centers->rows() == 4);

    const auto csv = dir / "per_sample.csv";
    REQUIRE(invoke({"stats", "--dump", dump.string(), "--centers", centers, "--csv", csv.string(), "--json",
                 (dir / "stats.json").string()}).code == 0);
    std::ifstream in(csv);
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 301);

    auto a = invoke({"attack", "--dump", dump.string(), "--centers", centers, "--feature-eps", "0.05", "--write-dump",
                  (dir / "attacked.rsd").string()});
    REQUIRE(a.code == 0);
    auto aj = json::parse(a.out);
    CHECK(aj["attack"] == "feature_sign");
    CHECK(aj["counts"].size() == 20);
    // stored perturbations are reused when no epsilon is given
    auto b = invoke({"attack", "--dump", (dir / "attacked.rsd").string(), "--centers", centers});
    REQUIRE(b.code == 0);
    CHECK(json::parse(b.out)["overall_success_rate"] == aj["overall_success_rate"]);
    auto s = invoke({"stats", "--dump", (dir / "attacked.rsd").string()});
    REQUIRE(s.code == 0);
    CHECK(json::parse(s.out).contains("perturbation"));
}

TEST_CASE("raster and gradient-field exports") {
    auto dir = scratch("raster");
    auto dump2 = write_random_dump(dir, 4, 5, 2, false);
    auto r = invoke({"raster", "--dump", dump2.string(), "--res", "64", "--svg", (dir / "map.svg").string(), "--csv",
                  (dir / "grid.csv").string(), "--contour", "0.9"});
    REQUIRE(r.code == 0);
    CHECK(fs::file_size(dir / "map.svg") > 0);
    auto j = json::parse(r.out);
    double total = 0;
    for (double f : j["class_area_fraction"]) total += f;
    CHECK(total == doctest::Approx(1.0));
    CHECK(j.contains("contours"));

    auto dump3 = write_random_dump(dir, 5, 4, 3, false);
    REQUIRE(invoke({"raster", "--dump", dump3.string(), "--res", "8", "--csv", (dir / "cube.csv").string()}).code == 0);
    auto bad = invoke({"raster", "--dump", write_random_dump(dir, 6, 4, 5, false).string(), "--svg",
                    (dir / "x.svg").string()});
    CHECK(bad.code != 0);
    CHECK(bad.err.find('\n') == bad.err.size() - 1);
    CHECK(json::parse(bad.err)["error"]["kind"] == "dimension");
    CHECK_FALSE(fs::exists(dir / "x.svg"));

    REQUIRE(invoke({"gradient-field", "--dump", dump2.string(), "--class", "1", "--smoothing", "0.1", "--res", "16",
                 "--csv", (dir / "grad.csv").string()}).code == 0);
    std::ifstream in(dir / "grad.csv");
    std::size_t lines = 0;
    for (std::string l; std::getline(in, l);) ++lines;
    CHECK(lines == 16 * 16 + 1);
}

TEST_CASE("usage errors are single-line JSON") {
    auto r = invoke({"cone-test", "--bogus"});
    CHECK(r.code == 2);
    CHECK(json::parse(r.err)["error"]["kind"] == "usage");
    CHECK(invoke({}).code == 2);
    auto missing = invoke({"cone-test", "--dump", "/nonexistent/file.rsd"});
    CHECK(missing.code != 0);
    CHECK(invoke({"--version"}).out.find(std::string(cli::kToolVersion)) != std::string::npos);

    auto dir = scratch("corrupt");
    std::ofstream(dir / "bad.rsd") << "NOTADUMP";
    auto corrupt = invoke({"cone-test", "--dump", (dir / "bad.rsd").string()});
    CHECK(corrupt.code == 1);
    CHECK(json::parse(corrupt.err)["error"]["kind"] == "format");
}

TEST_CASE("train-synthetic and report") {
    auto dir = scratch("runs");
    auto cfg_dir = scratch("configs");
    const auto base_cfg = small_config(cfg_dir, synth::RegularizerKind::none);
    const auto ls_cfg = small_config(cfg_dir, synth::RegularizerKind::label_smoothing);
    // smoothing written first so ordering cannot come from creation order
    REQUIRE(invoke({"train-synthetic", "--config", ls_cfg, "--out", (dir / "a_smooth").string()}).code == 0);
    REQUIRE(invoke({"train-synthetic", "--config", base_cfg, "--out", (dir / "b_base").string()}).code == 0);

    const auto manifest = json::parse(slurp(dir / "b_base" / "manifest.json"));
    for (const auto& o : manifest["outputs"]) CHECK(fs::exists(dir / "b_base" / o.get<std::string>()));
    CHECK(manifest["snapshots"].size() == 2);
    CHECK(manifest["config_hash"] == cli::config_hash(manifest["config"]));
    CHECK(manifest["tool_version"] == std::string(cli::kToolVersion));
    const auto snap = read_dump(dir / "b_base" / "4.rsd");
    CHECK(snap.meta.at("epoch") == "4");

    // rerun is byte-identical
    const auto before = slurp(dir / "b_base" / "4.rsd");
    REQUIRE(invoke({"train-synthetic", "--config", base_cfg, "--out", (dir / "b_base").string()}).code == 0);
    CHECK(slurp(dir / "b_base" / "4.rsd") == before);

    auto r = invoke({"report", "--run", dir.string(), "--json", (dir / "report.json").string(), "--manifest",
                  (dir / "report.manifest.json").string()});
    REQUIRE(r.code == 0);
    const auto text = slurp(dir / "report.json");
    CHECK(keys_sorted(text));
    auto j = json::parse(text);
    REQUIRE(j["rows"].size() == 2);
    CHECK(j["rows"][0]["regularizer"] == "none");
    CHECK(j["rows"][1]["regularizer"] == "label_smoothing");
    for (const auto& row : j["rows"])
        for (const char* col : {"accuracy", "rms", "cosine", "ece", "attack_success"}) CHECK(row[col].is_number());
    auto m = json::parse(slurp(dir / "report.manifest.json"));
    CHECK(m["command"] == "report");
    CHECK(m["outputs"].size() == 2);

    REQUIRE(invoke({"--threads", "3", "report", "--run", dir.string(), "--json", (dir / "report3.json").string()}).code == 0);
    CHECK(slurp(dir / "report3.json") == text);

    auto preset = invoke({"train-synthetic", "--preset", "mixup", "--init", "head_far", "--bottleneck", "8", "--out",
                       (dir / "bad").string()});
    CHECK(preset.code == 2);
    CHECK(json::parse(preset.err)["error"]["kind"] == "usage");
}
