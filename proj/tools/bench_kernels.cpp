// Timing comparison between the parallel kernels and their serial reference
// implementations on rendered frames. Build and run:
//   cmake --build build --target deva_bench && ./build/deva_bench [frames]

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "deva/dynamic_mask.hpp"
#include "deva/image.hpp"
#include "deva/mapping.hpp"
#include "deva/parallel.hpp"
#include "deva/resampler.hpp"
#include "deva/synthetic.hpp"
#include "deva/tracking.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        fn();
        const auto t1 = Clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void row(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-24s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

}  // namespace

int main(int argc, char** argv) {
    const int frames = argc > 1 ? std::max(1, std::atoi(argv[1])) : 4;
    const int reps = 3;

    deva::SyntheticOptions opts;
    opts.width = 640;
    opts.height = 480;
    opts.frames = frames + 1;
    deva::SyntheticScene scene(opts);
    std::vector<deva::SyntheticFrame> rendered;
    for (int i = 0; i <= frames; ++i) rendered.push_back(scene.render(i));

    std::printf("threads: %d, frame: %dx%d, frames per rep: %d\n", deva::thread_count(),
                opts.width, opts.height, frames);
    std::printf("%-24s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    const deva::VarianceThresholds th;
    row("extract_dynamic_pixels",
        best_of(reps,
                [&] {
                    for (int i = 0; i < frames; ++i)
                        deva::reference::extract_dynamic_pixels(rendered[size_t(i)].depth, th);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < frames; ++i)
                deva::extract_dynamic_pixels(rendered[size_t(i)].depth, th);
        }));

    std::vector<deva::DynamicPixelSet> pks;
    for (int i = 0; i < frames; ++i)
        pks.push_back(deva::extract_dynamic_pixels(rendered[size_t(i)].depth, th));
    row("broad_mask",
        best_of(reps,
                [&] {
                    for (int i = 0; i < frames; ++i)
                        deva::reference::broad_mask(rendered[size_t(i)].depth, pks[size_t(i)]);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < frames; ++i)
                deva::broad_mask(rendered[size_t(i)].depth, pks[size_t(i)]);
        }));

    row("dilate r=5",
        best_of(reps,
                [&] {
                    for (int i = 0; i < frames; ++i)
                        deva::reference::dilate(rendered[size_t(i)].box_mask, 5);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < frames; ++i) deva::dilate(rendered[size_t(i)].box_mask, 5);
        }));

    std::vector<deva::GrayImage> gray;
    for (auto& f : rendered) gray.push_back(deva::to_gray(f.rgb));
    auto pts = std::vector<std::vector<Eigen::Vector2d>>(size_t(frames));
    for (int i = 0; i < frames; ++i) {
        for (const auto& kp : deva::detect_keypoints(gray[size_t(i)], 800))
            pts[size_t(i)].emplace_back(kp.x, kp.y);
    }
    row("track_flow",
        best_of(reps,
                [&] {
                    for (int i = 0; i < frames; ++i)
                        deva::reference::track_flow(gray[size_t(i)], gray[size_t(i) + 1],
                                                    pts[size_t(i)]);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < frames; ++i)
                deva::track_flow(gray[size_t(i)], gray[size_t(i) + 1], pts[size_t(i)]);
        }));

    row("frame_to_cloud",
        best_of(reps,
                [&] {
                    for (int i = 0; i < frames; ++i)
                        deva::reference::frame_to_cloud(rendered[size_t(i)].rgb,
                                                        rendered[size_t(i)].depth, nullptr,
                                                        scene.intrinsics(),
                                                        rendered[size_t(i)].pose_wc, 1);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < frames; ++i)
                deva::frame_to_cloud(rendered[size_t(i)].rgb, rendered[size_t(i)].depth,
                                     nullptr, scene.intrinsics(),
                                     rendered[size_t(i)].pose_wc, 1);
        }));

    std::vector<deva::Keypoint> kps = deva::detect_keypoints(gray[0], 2000);
    deva::ResampleConfig rcfg;
    deva::AutoencoderParams params = deva::AutoencoderParams::init(rcfg.seed);
    Eigen::MatrixXd batch = deva::normalize_keypoints(kps);
    const int cap = deva::thread_count();
    row("reconstruction_gradient",
        best_of(reps,
                [&] {
                    deva::set_thread_cap(1);
                    for (int i = 0; i < 50; ++i) deva::reconstruction_gradient(params, batch);
                    deva::set_thread_cap(cap);
                }),
        best_of(reps, [&] {
            for (int i = 0; i < 50; ++i) deva::reconstruction_gradient(params, batch);
        }));

    return 0;
}
