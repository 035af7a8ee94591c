#include "deva/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deva/dynamic_mask.hpp"
#include "deva/error.hpp"
#include "deva/evaluation.hpp"
#include "deva/image_io.hpp"
#include "deva/mapping.hpp"
#include "deva/parallel.hpp"
#include "deva/resampler.hpp"
#include "deva/synthetic.hpp"
#include "deva/tracking.hpp"
#include "deva/trajectory.hpp"
#include "deva/tum.hpp"

namespace deva {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string timestamp_name(double t) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", t);
    return buf;
}

void ensure_parent_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

void write_run_config(const std::string& dir, const std::string& subcommand, json values) {
    values["subcommand"] = subcommand;
    fs::create_directories(dir.empty() ? "." : dir);
    const fs::path path = fs::path(dir.empty() ? "." : dir) / "run_config.json";
    std::ofstream out(path.string());
    if (!out) throw Error("cannot write " + path.string());
    out << values.dump(2) << "\n";
}

std::string dir_of(const std::string& file) {
    const std::string d = fs::path(file).parent_path().string();
    return d.empty() ? "." : d;
}

// Shared masking knobs. mode: none (no filtering) or predicted (depth-driven
// masks, merged with external masks when a directory is supplied).
struct MaskParams {
    VarianceThresholds th;
    double pixel_eps = 9.0;
    int pixel_minpts = 4;
    std::string mode = "predicted";
    std::string ext_mask_dir;
};

void add_mask_options(CLI::App* cmd, MaskParams& p) {
    cmd->add_option("--tau-a", p.th.tau_a, "lower window-variance bound, m^2")
        ->capture_default_str();
    cmd->add_option("--tau-b", p.th.tau_b, "upper window-variance bound, m^2")
        ->capture_default_str();
    cmd->add_option("--tau-c", p.th.tau_c, "minimum depth for local medians, m")
        ->capture_default_str();
    cmd->add_option("--tau-d", p.th.tau_d, "depth band half-width around medians, m")
        ->capture_default_str();
    cmd->add_option("--pixel-eps", p.pixel_eps, "pixel clustering radius")
        ->capture_default_str();
    cmd->add_option("--pixel-minpts", p.pixel_minpts, "pixel clustering core threshold")
        ->capture_default_str();
    cmd->add_option("--mask", p.mode, "mask source: none or predicted")
        ->check(CLI::IsMember({"none", "predicted"}))
        ->capture_default_str();
    cmd->add_option("--ext-mask-dir", p.ext_mask_dir,
                    "directory of <timestamp>.png masks merged into the prediction");
}

json mask_params_json(const MaskParams& p) {
    return {{"tau_a", p.th.tau_a},         {"tau_b", p.th.tau_b},
            {"tau_c", p.th.tau_c},         {"tau_d", p.th.tau_d},
            {"pixel_eps", p.pixel_eps},    {"pixel_minpts", p.pixel_minpts},
            {"mask", p.mode},              {"ext_mask_dir", p.ext_mask_dir}};
}

void add_resample_options(CLI::App* cmd, ResampleConfig& cfg) {
    cmd->add_option("--epochs", cfg.epochs, "compression training epochs")
        ->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "root seed for all randomness")
        ->capture_default_str();
}

json resample_config_json(const ResampleConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"seed", cfg.seed},
            {"initial_quantile", cfg.initial_quantile},
            {"quantile_step", cfg.quantile_step},
            {"quantile_cap", cfg.quantile_cap},
            {"learning_rate", cfg.learning_rate},
            {"ga_population", cfg.ga_population},
            {"ga_generations", cfg.ga_generations},
            {"selection_ratio", cfg.selection_ratio}};
}

struct LoadedFrame {
    double timestamp = 0;
    RgbImage rgb;
    DepthImage depth;
};

// FrameRecord paths are already resolved against the sequence directory.
LoadedFrame load_frame(const FrameRecord& rec, double depth_scale) {
    LoadedFrame f;
    f.timestamp = rec.timestamp;
    f.rgb = read_rgb(rec.rgb_path);
    Raw16Image raw = read_raw16(rec.depth_path);
    f.depth = decode_depth(raw, depth_scale);
    return f;
}

// Returns true when a mask was produced (mode != none).
bool compute_combined_mask(const DepthImage& depth, const MaskParams& p,
                           const std::string& seq_dir, double timestamp, BinaryMask* out) {
    BinaryMask ext;
    const BinaryMask* ext_ptr = nullptr;
    if (!p.ext_mask_dir.empty()) {
        fs::path path = fs::path(p.ext_mask_dir) / (timestamp_name(timestamp) + ".png");
        if (!fs::exists(path))
            path = fs::path(seq_dir) / p.ext_mask_dir / (timestamp_name(timestamp) + ".png");
        ext = read_mask(path.string());
        if (!ext.same_size(depth.width, depth.height))
            throw Error("external mask dimensions differ: " + path.string());
        ext_ptr = &ext;
    }
    if (p.mode == "none" && !ext_ptr) return false;
    if (p.mode == "none") {
        *out = ext;
        return true;
    }
    const DynamicPixelSet pk = extract_dynamic_pixels(depth, p.th);
    const BinaryMask md = depth_mask(depth, pk, p.th, p.pixel_eps, p.pixel_minpts);
    const BinaryMask mb = broad_mask(depth, pk);
    *out = merge_masks(ext_ptr, md, mb);
    return true;
}

CameraIntrinsics sequence_intrinsics(const std::string& seq_dir, const std::string& flag) {
    const std::string path =
        flag.empty() ? (fs::path(seq_dir) / "intrinsics.txt").string() : flag;
    return read_intrinsics(path);
}

// ---------------------------------------------------------------------------
// Subcommand parameter blocks
// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string out;
    SyntheticOptions opts;
    double depth_scale = 5000.0;
    bool static_scene = false;
};

struct MaskArgs {
    std::string seq, out;
    MaskParams mask;
    double depth_scale = 5000.0;
    int dilate_radius = 0;
};

struct HistArgs {
    std::string seq, out;
    double depth_scale = 5000.0;
};

struct ResampleArgs {
    std::string in, out, image;
    ResampleConfig cfg;
};

struct TrackArgs {
    std::string seq, out, intrinsics;
    MaskParams mask;
    double depth_scale = 5000.0;
    bool resample = false;
    bool no_robust = false;
    int max_keypoints = 800;
    ResampleConfig rcfg;
};

struct EvalArgs {
    std::string est, gt, json_out, errors_csv;
    double delta = 1.0;
    double max_diff = 0.02;
};

struct MapArgs {
    std::string seq, traj, out, intrinsics;
    MaskParams mask;
    double depth_scale = 5000.0;
    int dilate_radius = 3;
    double voxel = 0.01;
    int stride = 2;
    double max_range = kDefaultMaxRange;
    bool ascii = false;
};

struct PipelineArgs {
    std::string seq, out, intrinsics;
    MaskParams mask;
    double depth_scale = 5000.0;
    bool resample = false;
    bool no_robust = false;
    int max_keypoints = 800;
    ResampleConfig rcfg;
    int dilate_radius = 3;
    double voxel = 0.01;
    int stride = 2;
    double max_range = kDefaultMaxRange;
    double rpe_delta = 1.0;
};

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

void run_synth(const SynthArgs& a) {
    SyntheticOptions opts = a.opts;
    opts.with_box = !a.static_scene;
    SyntheticScene scene(opts);
    write_tum_sequence(scene, a.out, a.depth_scale);
    write_run_config(a.out, "synth",
                     {{"out", a.out},
                      {"frames", opts.frames},
                      {"seed", opts.seed},
                      {"fps", opts.fps},
                      {"with_box", opts.with_box},
                      {"camera_step", opts.camera_step},
                      {"box_step", opts.box_step},
                      {"depth_scale", a.depth_scale}});
    std::cout << "wrote " << opts.frames << " frames to " << a.out << "\n";
}

void run_mask(const MaskArgs& a) {
    SequenceData seq = load_sequence(a.seq);
    fs::create_directories(a.out);
    int written = 0;
    for (const auto& rec : seq.frames) {
        Raw16Image raw = read_raw16(rec.depth_path);
        DepthImage depth = decode_depth(raw, a.depth_scale);
        const DynamicPixelSet pk = extract_dynamic_pixels(depth, a.mask.th);
        const BinaryMask md = depth_mask(depth, pk, a.mask.th, a.mask.pixel_eps,
                                         a.mask.pixel_minpts);
        const BinaryMask mb = broad_mask(depth, pk);
        BinaryMask ext;
        const BinaryMask* ext_ptr = nullptr;
        if (!a.mask.ext_mask_dir.empty()) {
            MaskParams ext_only = a.mask;
            ext_only.mode = "none";
            if (compute_combined_mask(depth, ext_only, a.seq, rec.timestamp, &ext))
                ext_ptr = &ext;
        }
        BinaryMask mc = merge_masks(ext_ptr, md, mb);
        if (a.dilate_radius > 0) mc = dilate(mc, a.dilate_radius);
        const std::string ts = timestamp_name(rec.timestamp);
        write_mask((fs::path(a.out) / (ts + "_depth.png")).string(), md);
        write_mask((fs::path(a.out) / (ts + "_broad.png")).string(), mb);
        write_mask((fs::path(a.out) / (ts + "_combined.png")).string(), mc);
        ++written;
    }
    json cfg = mask_params_json(a.mask);
    cfg["seq"] = a.seq;
    cfg["out"] = a.out;
    cfg["depth_scale"] = a.depth_scale;
    cfg["dilate"] = a.dilate_radius;
    write_run_config(a.out, "mask", cfg);
    std::cout << "wrote masks for " << written << " frames to " << a.out << "\n";
}

void run_hist(const HistArgs& a) {
    SequenceData seq = load_sequence(a.seq);
    constexpr int kBins = 120;  // 0.1-decade bins covering [1e-12, 1)
    std::vector<long long> counts(kBins, 0);
    long long below = 0, above = 0;
    for (const auto& rec : seq.frames) {
        Raw16Image raw = read_raw16(rec.depth_path);
        DepthImage depth = decode_depth(raw, a.depth_scale);
        for (double v : window_variances(depth)) {
            if (v < 1e-12) {
                ++below;
            } else if (v >= 1.0) {
                ++above;
            } else {
                int bin = int(std::floor((std::log10(v) + 12.0) * 10.0));
                bin = std::clamp(bin, 0, kBins - 1);
                ++counts[size_t(bin)];
            }
        }
    }
    ensure_parent_dir(a.out);
    std::ofstream out(a.out);
    if (!out) throw Error("cannot write " + a.out);
    out << "variance_lo_m2,variance_hi_m2,count\n";
    char line[128];
    std::snprintf(line, sizeof(line), "0,1e-12,%lld\n", below);
    out << line;
    for (int b = 0; b < kBins; ++b) {
        const double lo = std::pow(10.0, -12.0 + 0.1 * b);
        const double hi = std::pow(10.0, -12.0 + 0.1 * (b + 1));
        std::snprintf(line, sizeof(line), "%.6e,%.6e,%lld\n", lo, hi, counts[size_t(b)]);
        out << line;
    }
    std::snprintf(line, sizeof(line), "1,inf,%lld\n", above);
    out << line;
    write_run_config(dir_of(a.out), "hist",
                     {{"seq", a.seq}, {"out", a.out}, {"depth_scale", a.depth_scale}});
    std::cout << "wrote variance histogram to " << a.out << "\n";
}

void draw_marker(RgbImage& img, double x, double y, uint8_t r, uint8_t g, uint8_t b) {
    const int cx = int(std::lround(x)), cy = int(std::lround(y));
    for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
            if (dx * dx + dy * dy > 5) continue;
            const int px = cx + dx, py = cy + dy;
            if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
            uint8_t* p = img.px(px, py);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
}

// Green = kept noise (already uniform), blue = kept cluster member,
// red = removed.
RgbImage render_overlay(const RgbImage& base, const std::vector<Keypoint>& kps,
                        const ResampleResult& res) {
    RgbImage img = base;
    for (size_t i = 0; i < kps.size(); ++i) {
        const bool kept = res.kept_flags[i];
        const bool clustered = i < res.labels.size() && res.labels[i] >= 0;
        if (!kept)
            draw_marker(img, kps[i].x, kps[i].y, 220, 40, 40);
        else if (clustered)
            draw_marker(img, kps[i].x, kps[i].y, 50, 90, 230);
        else
            draw_marker(img, kps[i].x, kps[i].y, 40, 200, 60);
    }
    return img;
}

std::string overlay_path(const std::string& csv_out) {
    fs::path p(csv_out);
    p.replace_extension();
    return p.string() + "_overlay.png";
}

void run_resample(const ResampleArgs& a) {
    std::vector<Keypoint> kps = read_keypoints_csv(a.in);
    ResampleResult res = resample_keypoints(kps, a.cfg);
    ensure_parent_dir(a.out);
    write_keypoints_csv(a.out, res.kept);

    RgbImage base;
    if (!a.image.empty()) {
        base = read_rgb(a.image);
    } else {
        int w = 64, h = 64;
        for (const auto& k : kps) {
            w = std::max(w, int(std::lround(k.x)) + 8);
            h = std::max(h, int(std::lround(k.y)) + 8);
        }
        base = RgbImage(w, h);
    }
    write_rgb(overlay_path(a.out), render_overlay(base, kps, res));

    json cfg = resample_config_json(a.cfg);
    cfg["in"] = a.in;
    cfg["out"] = a.out;
    if (!a.image.empty()) cfg["image"] = a.image;
    write_run_config(dir_of(a.out), "resample", cfg);
    std::cout << "kept " << res.kept.size() << " of " << kps.size() << " keypoints ("
              << (res.resampled ? "resampled" : "identity passthrough") << ", clusters "
              << res.cluster_count << ", radius " << res.radius << ")\n";
}

Trajectory track_sequence(const std::string& seq_dir, const SequenceData& seq,
                          const CameraIntrinsics& intr, const MaskParams& mask_params,
                          double depth_scale, const TrackerConfig& tcfg,
                          std::vector<BinaryMask>* masks_out, int* lost_out) {
    Tracker tracker(intr, tcfg);
    Trajectory traj;
    int lost = 0;
    for (const auto& rec : seq.frames) {
        LoadedFrame f = load_frame(rec, depth_scale);
        BinaryMask mask;
        const bool have_mask =
            compute_combined_mask(f.depth, mask_params, seq_dir, rec.timestamp, &mask);
        FrameResult r = tracker.process(f.rgb, f.depth, have_mask ? &mask : nullptr);
        lost += r.lost ? 1 : 0;
        traj.push_back({rec.timestamp, r.pose_wc});
        if (masks_out) masks_out->push_back(have_mask ? mask : BinaryMask());
    }
    if (lost_out) *lost_out = lost;
    return traj;
}

TrackerConfig make_tracker_config(bool resample, bool no_robust, int max_keypoints,
                                  const ResampleConfig& rcfg) {
    TrackerConfig cfg;
    cfg.max_keypoints = max_keypoints;
    cfg.resample = resample;
    cfg.resample_cfg = rcfg;
    cfg.pose.robust = !no_robust;
    return cfg;
}

void run_track(const TrackArgs& a) {
    SequenceData seq = load_sequence(a.seq);
    const CameraIntrinsics intr = sequence_intrinsics(a.seq, a.intrinsics);
    int lost = 0;
    Trajectory traj = track_sequence(a.seq, seq, intr, a.mask, a.depth_scale,
                                     make_tracker_config(a.resample, a.no_robust,
                                                         a.max_keypoints, a.rcfg),
                                     nullptr, &lost);
    ensure_parent_dir(a.out);
    write_tum_trajectory(a.out, traj);
    json cfg = mask_params_json(a.mask);
    cfg["seq"] = a.seq;
    cfg["out"] = a.out;
    cfg["intrinsics"] = a.intrinsics;
    cfg["depth_scale"] = a.depth_scale;
    cfg["resample"] = a.resample;
    cfg["no_robust_loss"] = a.no_robust;
    cfg["max_keypoints"] = a.max_keypoints;
    cfg["resample_config"] = resample_config_json(a.rcfg);
    write_run_config(dir_of(a.out), "track", cfg);
    std::cout << "tracked " << traj.size() << " frames (" << lost << " lost) -> " << a.out
              << "\n";
}

void print_report(const MetricReport& rep) {
    char line[128];
    std::snprintf(line, sizeof(line), "pairs        %d\n", rep.pairs_used);
    std::cout << line;
    std::snprintf(line, sizeof(line), "ate_rmse     %.9f m\n", rep.ate_rmse);
    std::cout << line;
    std::snprintf(line, sizeof(line), "rpe_trans    %.9f m/s\n", rep.rpe_trans_rmse);
    std::cout << line;
    std::snprintf(line, sizeof(line), "rpe_rot      %.9f deg/s\n", rep.rpe_rot_rmse);
    std::cout << line;
}

json report_json(const MetricReport& rep) {
    return {{"ate_rmse_m", rep.ate_rmse},
            {"rpe_trans_rmse_m_per_s", rep.rpe_trans_rmse},
            {"rpe_rot_rmse_deg_per_s", rep.rpe_rot_rmse},
            {"pairs_used", rep.pairs_used}};
}

void run_eval(const EvalArgs& a) {
    Trajectory est = read_tum_trajectory(a.est);
    Trajectory gt = read_tum_trajectory(a.gt);
    MetricReport rep = evaluate_trajectories(est, gt, a.delta, a.max_diff);
    print_report(rep);
    if (!a.json_out.empty()) {
        ensure_parent_dir(a.json_out);
        std::ofstream out(a.json_out);
        if (!out) throw Error("cannot write " + a.json_out);
        out << report_json(rep).dump(2) << "\n";
        write_run_config(dir_of(a.json_out), "eval",
                         {{"est", a.est},
                          {"gt", a.gt},
                          {"json", a.json_out},
                          {"errors_csv", a.errors_csv},
                          {"delta", a.delta},
                          {"max_diff", a.max_diff}});
    }
    if (!a.errors_csv.empty()) {
        std::vector<double> errs = per_pair_ate_errors(est, gt, a.max_diff);
        std::vector<PosePair> pairs = associate_trajectories(est, gt, a.max_diff);
        ensure_parent_dir(a.errors_csv);
        std::ofstream out(a.errors_csv);
        if (!out) throw Error("cannot write " + a.errors_csv);
        out << "timestamp,ate_error_m\n";
        char line[96];
        for (size_t i = 0; i < errs.size(); ++i) {
            std::snprintf(line, sizeof(line), "%.6f,%.9f\n", pairs[i].t_est, errs[i]);
            out << line;
        }
    }
}

ColoredPointCloud map_sequence(const std::string& seq_dir, const SequenceData& seq,
                               const CameraIntrinsics& intr, const Trajectory& traj,
                               const MaskParams& mask_params, double depth_scale,
                               int dilate_radius, int stride, double max_range,
                               double voxel) {
    std::vector<double> frame_ts, traj_ts;
    for (const auto& rec : seq.frames) frame_ts.push_back(rec.timestamp);
    for (const auto& s : traj) traj_ts.push_back(s.timestamp);
    const auto pairs = associate_timestamps(frame_ts, traj_ts, 0.02);
    if (pairs.empty()) throw Error("map: no frames match the trajectory timestamps");

    std::vector<ColoredPointCloud> clouds;
    clouds.reserve(pairs.size());
    for (const auto& [fi, ti] : pairs) {
        const auto& rec = seq.frames[size_t(fi)];
        LoadedFrame f = load_frame(rec, depth_scale);
        BinaryMask mask;
        const bool have_mask =
            compute_combined_mask(f.depth, mask_params, seq_dir, rec.timestamp, &mask);
        if (have_mask && dilate_radius > 0) mask = dilate(mask, dilate_radius);
        clouds.push_back(frame_to_cloud(f.rgb, f.depth, have_mask ? &mask : nullptr, intr,
                                        traj[size_t(ti)].pose, stride, max_range));
    }
    return stitch(clouds, voxel);
}

void run_map(const MapArgs& a) {
    SequenceData seq = load_sequence(a.seq);
    const CameraIntrinsics intr = sequence_intrinsics(a.seq, a.intrinsics);
    Trajectory traj = read_tum_trajectory(a.traj);
    ColoredPointCloud cloud =
        map_sequence(a.seq, seq, intr, traj, a.mask, a.depth_scale, a.dilate_radius,
                     a.stride, a.max_range, a.voxel);
    ensure_parent_dir(a.out);
    export_ply(cloud, a.out, !a.ascii);
    json cfg = mask_params_json(a.mask);
    cfg["seq"] = a.seq;
    cfg["traj"] = a.traj;
    cfg["out"] = a.out;
    cfg["intrinsics"] = a.intrinsics;
    cfg["depth_scale"] = a.depth_scale;
    cfg["dilate"] = a.dilate_radius;
    cfg["voxel"] = a.voxel;
    cfg["stride"] = a.stride;
    cfg["max_range"] = a.max_range;
    cfg["ascii"] = a.ascii;
    write_run_config(dir_of(a.out), "map", cfg);
    std::cout << "wrote " << cloud.size() << " points to " << a.out << "\n";
}

void run_pipeline(const PipelineArgs& a) {
    SequenceData seq = load_sequence(a.seq);
    const CameraIntrinsics intr = sequence_intrinsics(a.seq, a.intrinsics);
    fs::create_directories(a.out);

    std::vector<BinaryMask> masks;
    int lost = 0;
    Trajectory traj = track_sequence(a.seq, seq, intr, a.mask, a.depth_scale,
                                     make_tracker_config(a.resample, a.no_robust,
                                                         a.max_keypoints, a.rcfg),
                                     &masks, &lost);
    write_tum_trajectory((fs::path(a.out) / "trajectory.txt").string(), traj);

    bool wrote_masks = false;
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        if (masks[i].width == 0) continue;
        if (!wrote_masks) fs::create_directories(fs::path(a.out) / "masks");
        wrote_masks = true;
        const std::string ts = timestamp_name(seq.frames[i].timestamp);
        write_mask((fs::path(a.out) / "masks" / (ts + ".png")).string(), masks[i]);
    }

    // Rebuild per-frame clouds from the stored masks (dilated copy).
    std::vector<ColoredPointCloud> clouds;
    clouds.reserve(seq.frames.size());
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        const auto& rec = seq.frames[i];
        LoadedFrame f = load_frame(rec, a.depth_scale);
        const bool have_mask = masks[i].width != 0;
        BinaryMask mask;
        if (have_mask)
            mask = a.dilate_radius > 0 ? dilate(masks[i], a.dilate_radius) : masks[i];
        clouds.push_back(frame_to_cloud(f.rgb, f.depth, have_mask ? &mask : nullptr, intr,
                                        traj[i].pose, a.stride, a.max_range));
    }
    ColoredPointCloud cloud = stitch(clouds, a.voxel);
    export_ply(cloud, (fs::path(a.out) / "cloud.ply").string(), true);

    std::cout << "tracked " << traj.size() << " frames (" << lost << " lost), cloud "
              << cloud.size() << " points\n";
    if (seq.groundtruth) {
        MetricReport rep = evaluate_trajectories(traj, *seq.groundtruth, a.rpe_delta);
        print_report(rep);
        std::ofstream out((fs::path(a.out) / "report.json").string());
        if (!out) throw Error("cannot write report.json");
        out << report_json(rep).dump(2) << "\n";
    } else {
        std::cout << "no groundtruth.txt in sequence, skipping evaluation\n";
    }

    json cfg = mask_params_json(a.mask);
    cfg["seq"] = a.seq;
    cfg["out"] = a.out;
    cfg["intrinsics"] = a.intrinsics;
    cfg["depth_scale"] = a.depth_scale;
    cfg["resample"] = a.resample;
    cfg["no_robust_loss"] = a.no_robust;
    cfg["max_keypoints"] = a.max_keypoints;
    cfg["resample_config"] = resample_config_json(a.rcfg);
    cfg["dilate"] = a.dilate_radius;
    cfg["voxel"] = a.voxel;
    cfg["stride"] = a.stride;
    cfg["max_range"] = a.max_range;
    cfg["rpe_delta"] = a.rpe_delta;
    write_run_config(a.out, "pipeline", cfg);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"depth-variance masking, keypoint resampling, RGB-D odometry, "
                 "trajectory metrics, and dynamic-free mapping"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; flags take precedence");
    app.fallthrough();
    int threads = 0;
    app.add_option("--threads", threads, "cap worker thread count (0 = hardware default)");

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate the synthetic RGB-D fixture");
    synth_cmd->add_option("--out", synth.out, "output sequence directory")->required();
    synth_cmd->add_option("--frames", synth.opts.frames, "frame count")->capture_default_str();
    synth_cmd->add_option("--seed", synth.opts.seed, "texture seed")->capture_default_str();
    synth_cmd->add_option("--fps", synth.opts.fps, "frames per second")->capture_default_str();
    synth_cmd->add_option("--camera-step", synth.opts.camera_step, "camera x step, m/frame")
        ->capture_default_str();
    synth_cmd->add_option("--box-step", synth.opts.box_step, "box x step, m/frame")
        ->capture_default_str();
    synth_cmd->add_option("--depth-scale", synth.depth_scale, "depth PNG quantization")
        ->capture_default_str();
    synth_cmd->add_flag("--static", synth.static_scene, "omit the moving box");

    MaskArgs mask_args;
    CLI::App* mask_cmd = app.add_subcommand("mask", "emit per-frame dynamic-region masks");
    mask_cmd->add_option("--seq", mask_args.seq, "TUM-format sequence directory")->required();
    mask_cmd->add_option("--out", mask_args.out, "output directory")->required();
    mask_cmd->add_option("--depth-scale", mask_args.depth_scale, "depth PNG quantization")
        ->capture_default_str();
    mask_cmd->add_option("--dilate", mask_args.dilate_radius, "dilate combined mask, px")
        ->capture_default_str();
    add_mask_options(mask_cmd, mask_args.mask);

    HistArgs hist_args;
    CLI::App* hist_cmd = app.add_subcommand("hist", "window-variance histogram CSV");
    hist_cmd->add_option("--seq", hist_args.seq, "TUM-format sequence directory")->required();
    hist_cmd->add_option("--out", hist_args.out, "output CSV path")->required();
    hist_cmd->add_option("--depth-scale", hist_args.depth_scale, "depth PNG quantization")
        ->capture_default_str();

    ResampleArgs resample_args;
    CLI::App* resample_cmd =
        app.add_subcommand("resample", "compress, cluster, and resample keypoints");
    resample_cmd->add_option("--in", resample_args.in, "input keypoint CSV")->required();
    resample_cmd->add_option("--out", resample_args.out, "output keypoint CSV")->required();
    resample_cmd->add_option("--image", resample_args.image,
                             "optional background image for the overlay PNG");
    add_resample_options(resample_cmd, resample_args.cfg);

    TrackArgs track_args;
    CLI::App* track_cmd = app.add_subcommand("track", "RGB-D visual odometry");
    track_cmd->add_option("--seq", track_args.seq, "TUM-format sequence directory")
        ->required();
    track_cmd->add_option("--out", track_args.out, "output trajectory file")->required();
    track_cmd->add_option("--intrinsics", track_args.intrinsics,
                          "fx fy cx cy file (default <seq>/intrinsics.txt)");
    track_cmd->add_option("--depth-scale", track_args.depth_scale, "depth PNG quantization")
        ->capture_default_str();
    track_cmd->add_option("--max-keypoints", track_args.max_keypoints, "detector budget")
        ->capture_default_str();
    track_cmd->add_flag("--resample", track_args.resample,
                        "resample correspondences before pose refinement");
    track_cmd->add_flag("--no-robust-loss", track_args.no_robust,
                        "plain least squares instead of Huber");
    add_mask_options(track_cmd, track_args.mask);
    add_resample_options(track_cmd, track_args.rcfg);

    EvalArgs eval_args;
    CLI::App* eval_cmd = app.add_subcommand("eval", "trajectory metrics against ground truth");
    eval_cmd->add_option("est", eval_args.est, "estimated trajectory (TUM format)")
        ->required();
    eval_cmd->add_option("gt", eval_args.gt, "ground-truth trajectory (TUM format)")
        ->required();
    eval_cmd->add_option("--json", eval_args.json_out, "write the report as JSON");
    eval_cmd->add_option("--errors-csv", eval_args.errors_csv, "write per-pair errors");
    eval_cmd->add_option("--delta", eval_args.delta, "relative-error interval, s")
        ->capture_default_str();
    eval_cmd->add_option("--max-diff", eval_args.max_diff, "association tolerance, s")
        ->capture_default_str();

    MapArgs map_args;
    CLI::App* map_cmd = app.add_subcommand("map", "build a colored point-cloud map");
    map_cmd->add_option("--seq", map_args.seq, "TUM-format sequence directory")->required();
    map_cmd->add_option("--traj", map_args.traj, "trajectory file (TUM format)")->required();
    map_cmd->add_option("--out", map_args.out, "output PLY path")->required();
    map_cmd->add_option("--intrinsics", map_args.intrinsics,
                        "fx fy cx cy file (default <seq>/intrinsics.txt)");
    map_cmd->add_option("--depth-scale", map_args.depth_scale, "depth PNG quantization")
        ->capture_default_str();
    map_cmd->add_option("--dilate", map_args.dilate_radius, "mask dilation radius, px")
        ->capture_default_str();
    map_cmd->add_option("--voxel", map_args.voxel, "voxel size, m (0 = keep all points)")
        ->capture_default_str();
    map_cmd->add_option("--stride", map_args.stride, "pixel stride")->capture_default_str();
    map_cmd->add_option("--max-range", map_args.max_range, "depth cutoff, m")
        ->capture_default_str();
    map_cmd->add_flag("--ascii", map_args.ascii, "ascii PLY instead of binary");
    add_mask_options(map_cmd, map_args.mask);

    PipelineArgs pipe_args;
    CLI::App* pipe_cmd = app.add_subcommand("pipeline", "track, map, and evaluate");
    pipe_cmd->add_option("--seq", pipe_args.seq, "TUM-format sequence directory")->required();
    pipe_cmd->add_option("--out", pipe_args.out, "output directory")->required();
    pipe_cmd->add_option("--intrinsics", pipe_args.intrinsics,
                         "fx fy cx cy file (default <seq>/intrinsics.txt)");
    pipe_cmd->add_option("--depth-scale", pipe_args.depth_scale, "depth PNG quantization")
        ->capture_default_str();
    pipe_cmd->add_option("--max-keypoints", pipe_args.max_keypoints, "detector budget")
        ->capture_default_str();
    pipe_cmd->add_flag("--resample", pipe_args.resample,
                       "resample correspondences before pose refinement");
    pipe_cmd->add_flag("--no-robust-loss", pipe_args.no_robust,
                       "plain least squares instead of Huber");
    pipe_cmd->add_option("--dilate", pipe_args.dilate_radius, "mask dilation radius, px")
        ->capture_default_str();
    pipe_cmd->add_option("--voxel", pipe_args.voxel, "voxel size, m")->capture_default_str();
    pipe_cmd->add_option("--stride", pipe_args.stride, "pixel stride")->capture_default_str();
    pipe_cmd->add_option("--max-range", pipe_args.max_range, "depth cutoff, m")
        ->capture_default_str();
    pipe_cmd->add_option("--rpe-delta", pipe_args.rpe_delta, "relative-error interval, s")
        ->capture_default_str();
    add_mask_options(pipe_cmd, pipe_args.mask);
    add_resample_options(pipe_cmd, pipe_args.rcfg);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (threads > 0) set_thread_cap(threads);
        if (*synth_cmd) run_synth(synth);
        if (*mask_cmd) run_mask(mask_args);
        if (*hist_cmd) run_hist(hist_args);
        if (*resample_cmd) run_resample(resample_args);
        if (*track_cmd) run_track(track_args);
        if (*eval_cmd) run_eval(eval_args);
        if (*map_cmd) run_map(map_args);
        if (*pipe_cmd) run_pipeline(pipe_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace deva
