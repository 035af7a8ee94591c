#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace deva {

// Six-attribute keypoint: position, diameter, main direction (degrees,
// -1 when unset), detector response and pyramid level.
struct Keypoint {
    double x = 0;
    double y = 0;
    double d = 1;
    double theta = -1;
    double sigma = 0;
    int lambda = 0;
};

constexpr int kKeypointDim = 6;
// DBSCAN min_pts for latent clustering: attribute dimension + 1.
constexpr int kMinClusterPoints = kKeypointDim + 1;

struct ResampleConfig {
    int epochs = 100;
    double initial_quantile = 0.05;
    double quantile_step = 0.05;
    double quantile_cap = 0.9;
    double learning_rate = 0.01;
    uint64_t seed = 42;
    int ga_population = 32;
    int ga_generations = 50;
    double selection_ratio = 0.5;

    void validate() const;
};

// 6-4-2-4-6 fully connected autoencoder, tanh hidden units, linear output.
// Inputs are min-max normalized per attribute before training.
struct AutoencoderParams {
    std::array<Eigen::MatrixXd, 4> weights;
    std::array<Eigen::VectorXd, 4> biases;
    Eigen::Matrix<double, kKeypointDim, 1> feat_min = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, kKeypointDim, 1> feat_range = Eigen::Matrix<double, 6, 1>::Ones();

    static AutoencoderParams init(uint64_t seed);

    Eigen::Vector2d encode(const Eigen::Matrix<double, kKeypointDim, 1>& normalized) const;

    int parameter_count() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);
};

// Column-wise normalized attribute matrix (6 x n); theta = -1 maps to 0
// before the per-attribute min-max scaling.
Eigen::MatrixXd normalize_keypoints(const std::vector<Keypoint>& keypoints,
                                    Eigen::Matrix<double, 6, 1>* feat_min = nullptr,
                                    Eigen::Matrix<double, 6, 1>* feat_range = nullptr);

// Sum over samples of the squared reconstruction error.
double reconstruction_loss(const AutoencoderParams& params, const Eigen::MatrixXd& batch);

// Analytic gradient of reconstruction_loss w.r.t. the flattened parameters.
Eigen::VectorXd reconstruction_gradient(const AutoencoderParams& params,
                                        const Eigen::MatrixXd& batch);

struct TrainResult {
    AutoencoderParams params;
    std::vector<Eigen::Vector2d> latents;  // one per input keypoint
    double initial_loss = 0;
    double final_loss = 0;
};

// Full-batch gradient descent for cfg.epochs epochs (step = lr * grad / n).
// Deterministic given cfg.seed. Requires at least 2 keypoints.
TrainResult train_autoencoder(const std::vector<Keypoint>& keypoints,
                              const ResampleConfig& cfg);

// Quantile-adaptive DBSCAN radius over 2-D latents: sort all pairwise squared
// distances, start at the initial quantile and advance by quantile_step while
// the picked entry is still 0 and the quantile does not exceed the cap.
// Returns 0 when every pairwise distance is 0.
double adaptive_radius(const std::vector<Eigen::Vector2d>& latents, const ResampleConfig& cfg);

// Selects max(1, ceil(selection_ratio * n)) members maximizing the minimum
// pairwise image distance (ties broken by total response). Returns selected
// indices into `cluster`, ascending. Deterministic given the seed.
std::vector<int> ga_resample_cluster(const std::vector<Keypoint>& cluster,
                                     const ResampleConfig& cfg, uint64_t seed);

struct ResampleResult {
    std::vector<Keypoint> kept;       // subset of the input, original order
    std::vector<uint8_t> kept_flags;  // per input keypoint
    std::vector<int> labels;          // latent DBSCAN labels (-1 = noise)
    int cluster_count = 0;
    double radius = 0;
    bool resampled = false;  // false when an identity guard was hit
};

// Autoencoder -> adaptive radius -> latent DBSCAN -> per-cluster GA.
// Noise-labeled keypoints are kept verbatim. Identity when the input has
// fewer than kMinClusterPoints + 1 points, the radius degenerates to 0, or
// no cluster forms.
ResampleResult resample_keypoints(const std::vector<Keypoint>& keypoints,
                                  const ResampleConfig& cfg);

// CSV with header "x,y,d,theta,sigma,lambda".
std::vector<Keypoint> read_keypoints_csv(const std::string& path);
void write_keypoints_csv(const std::string& path, const std::vector<Keypoint>& keypoints);

}  // namespace deva
