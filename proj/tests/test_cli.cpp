#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deva/cli.hpp"
#include "deva/image_io.hpp"
#include "deva/mapping.hpp"
#include "deva/resampler.hpp"
#include "deva/rng.hpp"
#include "deva/trajectory.hpp"
#include "deva/tum.hpp"

using namespace deva;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"deva"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(int(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "deva_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Two frames of perfectly flat depth: no window variance anywhere, so the
// dynamic masks must come out empty.
void write_flat_sequence(const fs::path& dir) {
    fs::create_directories(dir / "rgb");
    fs::create_directories(dir / "depth");
    std::ofstream rgb_idx(dir / "rgb.txt"), depth_idx(dir / "depth.txt");
    for (int i = 0; i < 2; ++i) {
        const std::string ts = i == 0 ? "0.000000" : "0.100000";
        RgbImage rgb(48, 36);
        Rng rng(uint64_t(400 + i));
        for (auto& v : rgb.data) v = uint8_t(rng.next_u64() % 256);
        Raw16Image raw(48, 36);
        for (auto& v : raw.data) v = 10000;  // 2 m at the default scale
        write_rgb((dir / "rgb" / (ts + ".png")).string(), rgb);
        write_raw16((dir / "depth" / (ts + ".png")).string(), raw);
        rgb_idx << ts << " rgb/" << ts << ".png\n";
        depth_idx << ts << " depth/" << ts << ".png\n";
    }
    std::ofstream(dir / "intrinsics.txt") << "60 60 23.5 17.5\n";
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json load_json(const fs::path& path) { return json::parse(slurp(path)); }

size_t line_count(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in);
    size_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_CASE("usage errors exit with 1, data errors with 2") {
    CHECK(run({}) == 1);                                       // missing subcommand
    CHECK(run({"--bogus"}) == 1);                              // unknown flag
    CHECK(run({"mask", "--seq", "x"}) == 1);                   // missing required --out
    CHECK(run({"eval", "/nonexistent/a.txt", "/nonexistent/b.txt"}) == 2);
    CHECK(run({"--help"}) == 0);
}

TEST_CASE("synth writes a loadable TUM-format sequence") {
    const fs::path dir = fresh_dir("synth");
    REQUIRE(run({"synth", "--out", dir.string(), "--frames", "3"}) == 0);
    for (const char* name :
         {"rgb.txt", "depth.txt", "groundtruth.txt", "intrinsics.txt", "run_config.json"})
        CHECK(fs::exists(dir / name));
    CHECK(fs::exists(dir / "masks_gt"));

    SequenceData seq = load_sequence(dir.string());
    CHECK(seq.frames.size() == 3);
    REQUIRE(seq.groundtruth);
    CHECK(seq.groundtruth->size() == 3);
}

TEST_CASE("mask on flat depth produces empty masks") {
    const fs::path seq = fresh_dir("flat_seq");
    write_flat_sequence(seq);
    const fs::path out = fresh_dir("flat_masks");
    REQUIRE(run({"mask", "--seq", seq.string(), "--out", out.string()}) == 0);

    for (const char* suffix : {"_depth.png", "_broad.png", "_combined.png"}) {
        const fs::path path = out / ("0.000000" + std::string(suffix));
        REQUIRE(fs::exists(path));
        CHECK(read_mask(path.string()).popcount() == 0);
    }
    CHECK(fs::exists(out / "run_config.json"));
}

TEST_CASE("hist covers every variance decade plus the two tails") {
    const fs::path seq = fresh_dir("hist_seq");
    write_flat_sequence(seq);
    const fs::path csv = fresh_dir("hist_out") / "hist.csv";
    REQUIRE(run({"hist", "--seq", seq.string(), "--out", csv.string()}) == 0);
    CHECK(line_count(csv) == 1 + 1 + 120 + 1);  // header, below, bins, above

    // Flat depth: every window variance is zero, all mass in the low tail.
    std::ifstream in(csv);
    std::string header, below;
    std::getline(in, header);
    std::getline(in, below);
    const size_t windows = ((48 - 3) / 3 + 1) * ((36 - 3) / 3 + 1) * 2;
    CHECK(below == "0,1e-12," + std::to_string(windows));
}

TEST_CASE("resample writes the kept subset, an overlay, and a config record") {
    const fs::path dir = fresh_dir("resample");
    std::vector<Keypoint> kps;
    Rng rng(8);
    for (int i = 0; i < 40; ++i) {  // dense clump
        Keypoint k;
        k.x = 100.0 + rng.uniform(-3.0, 3.0);
        k.y = 80.0 + rng.uniform(-3.0, 3.0);
        k.d = 7.0;
        k.theta = 90.0;
        k.sigma = 10.0 + rng.uniform(0.0, 0.5);
        kps.push_back(k);
    }
    for (int i = 0; i < 20; ++i) {  // scatter
        Keypoint k;
        k.x = rng.uniform(0.0, 300.0);
        k.y = rng.uniform(0.0, 200.0);
        k.d = 7.0;
        k.theta = rng.uniform(0.0, 360.0);
        k.sigma = rng.uniform(1.0, 60.0);
        kps.push_back(k);
    }
    const fs::path in_csv = dir / "in.csv";
    write_keypoints_csv(in_csv.string(), kps);

    const fs::path out_csv = dir / "kept.csv";
    REQUIRE(run({"resample", "--in", in_csv.string(), "--out", out_csv.string()}) == 0);
    auto kept = read_keypoints_csv(out_csv.string());
    CHECK(!kept.empty());
    CHECK(kept.size() <= kps.size());
    CHECK(fs::exists(dir / "kept_overlay.png"));
    CHECK(load_json(dir / "run_config.json")["subcommand"] == "resample");

    const std::string first = slurp(out_csv);
    REQUIRE(run({"resample", "--in", in_csv.string(), "--out", out_csv.string()}) == 0);
    CHECK(slurp(out_csv) == first);
}

TEST_CASE("eval reports zero error for a trajectory against itself") {
    const fs::path dir = fresh_dir("eval");
    Trajectory traj;
    for (int i = 0; i < 20; ++i) {
        TrajectorySample s;
        s.timestamp = 0.1 * i;
        s.pose.t = Eigen::Vector3d(0.05 * i, std::sin(0.2 * i), 0.0);
        traj.push_back(s);
    }
    const fs::path file = dir / "traj.txt";
    write_tum_trajectory(file.string(), traj);

    const fs::path report = dir / "report.json";
    const fs::path errors = dir / "errors.csv";
    REQUIRE(run({"eval", file.string(), file.string(), "--json", report.string(),
                 "--errors-csv", errors.string(), "--delta", "0.5"}) == 0);
    const json rep = load_json(report);
    CHECK(rep["ate_rmse_m"].get<double>() < 1e-9);
    CHECK(rep["rpe_rot_rmse_deg_per_s"].get<double>() == 0.0);
    CHECK(rep["pairs_used"] == 20);
    CHECK(line_count(errors) == 21);
}

TEST_CASE("track and map run end to end on the synthetic fixture") {
    const fs::path seq = fresh_dir("trackmap_seq");
    REQUIRE(run({"synth", "--out", seq.string(), "--frames", "4", "--static"}) == 0);

    const fs::path traj = fresh_dir("trackmap_out") / "traj.txt";
    REQUIRE(run({"track", "--seq", seq.string(), "--out", traj.string(), "--mask", "none",
                 "--threads", "2"}) == 0);
    CHECK(read_tum_trajectory(traj.string()).size() == 4);

    const fs::path ply = traj.parent_path() / "map.ply";
    REQUIRE(run({"map", "--seq", seq.string(), "--traj",
                 (seq / "groundtruth.txt").string(), "--out", ply.string(), "--voxel",
                 "0.05", "--mask", "none"}) == 0);
    CHECK(import_ply(ply.string()).size() > 1000);
}

TEST_CASE("pipeline runs are byte-identical") {
    const fs::path seq = fresh_dir("pipe_seq");
    REQUIRE(run({"synth", "--out", seq.string(), "--frames", "6"}) == 0);

    auto run_once = [&](const std::string& name) {
        const fs::path out = fresh_dir(name);
        REQUIRE(run({"pipeline", "--seq", seq.string(), "--out", out.string(), "--rpe-delta",
                     "0.2"}) == 0);
        return out;
    };
    const fs::path a = run_once("pipe_a");
    const fs::path b = run_once("pipe_b");

    for (const char* name : {"trajectory.txt", "cloud.ply", "report.json"}) {
        CAPTURE(name);
        CHECK(slurp(a / name) == slurp(b / name));
    }
    REQUIRE(fs::exists(a / "masks"));
    size_t masks = 0;
    for (const auto& entry : fs::directory_iterator(a / "masks")) {
        CHECK(slurp(entry.path()) == slurp(b / "masks" / entry.path().filename()));
        ++masks;
    }
    CHECK(masks == 6);
    CHECK(load_json(a / "report.json")["ate_rmse_m"].get<double>() < 0.05);
}

TEST_CASE("config file values apply beneath command-line flags") {
    const fs::path seq = fresh_dir("cfg_seq");
    write_flat_sequence(seq);
    const fs::path dir = fresh_dir("cfg_out");
    const fs::path cfg = dir / "run.toml";
    std::ofstream(cfg) << "[mask]\ntau-a=1e-7\ndilate=9\n";

    REQUIRE(run({"--config", cfg.string(), "mask", "--seq", seq.string(), "--out",
                 dir.string(), "--tau-a", "2e-6"}) == 0);
    const json recorded = load_json(dir / "run_config.json");
    CHECK(recorded["tau_a"].get<double>() == 2e-6);  // flag beats config
    CHECK(recorded["dilate"].get<int>() == 9);       // config beats default
}
