#include "deva/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "deva/dbscan.hpp"
#include "deva/error.hpp"
#include "deva/rng.hpp"

namespace deva {
namespace {

constexpr int kLayerSizes[5] = {6, 4, 2, 4, 6};

using Vec6 = Eigen::Matrix<double, 6, 1>;

Vec6 attribute_vector(const Keypoint& k) {
    Vec6 v;
    v << k.x, k.y, k.d, (k.theta < 0 ? 0.0 : k.theta), k.sigma, double(k.lambda);
    return v;
}

// Per-sample forward pass keeping activations for backprop.
struct Activations {
    Eigen::VectorXd a[5];  // a[0] = input, a[4] = reconstruction
};

Activations forward(const AutoencoderParams& p, const Eigen::VectorXd& x) {
    Activations act;
    act.a[0] = x;
    for (int l = 0; l < 4; ++l) {
        Eigen::VectorXd z = p.weights[size_t(l)] * act.a[size_t(l)] + p.biases[size_t(l)];
        act.a[size_t(l) + 1] = (l < 3) ? z.array().tanh().matrix() : z;
    }
    return act;
}

// Gradient of ||a4 - x||^2 for one sample, appended into flat layout
// (W0,b0,W1,b1,...) with row-major weight blocks.
void backward(const AutoencoderParams& p, const Activations& act, double* flat) {
    Eigen::VectorXd delta = 2.0 * (act.a[4] - act.a[0]);
    // Walk layers backwards, writing each block at its flat offset.
    int offsets[4];
    int off = 0;
    for (int l = 0; l < 4; ++l) {
        offsets[l] = off;
        off += kLayerSizes[l + 1] * kLayerSizes[l] + kLayerSizes[l + 1];
    }
    for (int l = 3; l >= 0; --l) {
        const int rows = kLayerSizes[l + 1], cols = kLayerSizes[l];
        double* wgrad = flat + offsets[l];
        double* bgrad = wgrad + rows * cols;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) wgrad[r * cols + c] = delta[r] * act.a[size_t(l)][c];
            bgrad[r] = delta[r];
        }
        if (l > 0) {
            Eigen::VectorXd up = p.weights[size_t(l)].transpose() * delta;
            const auto& a = act.a[size_t(l)];
            delta = (up.array() * (1.0 - a.array().square())).matrix();
        }
    }
}

struct Fitness {
    double min_dist;
    double total_sigma;
    bool operator>(const Fitness& o) const {
        if (min_dist != o.min_dist) return min_dist > o.min_dist;
        return total_sigma > o.total_sigma;
    }
};

Fitness genome_fitness(const std::vector<uint8_t>& genome,
                       const std::vector<Eigen::Vector2d>& pos,
                       const std::vector<double>& sigma) {
    Fitness f{std::numeric_limits<double>::infinity(), 0.0};
    std::vector<int> sel;
    for (int i = 0; i < int(genome.size()); ++i)
        if (genome[size_t(i)]) {
            sel.push_back(i);
            f.total_sigma += sigma[size_t(i)];
        }
    for (size_t a = 0; a < sel.size(); ++a)
        for (size_t b = a + 1; b < sel.size(); ++b) {
            double d = (pos[size_t(sel[a])] - pos[size_t(sel[b])]).norm();
            f.min_dist = std::min(f.min_dist, d);
        }
    return f;
}

// Enforce exactly m set bits, adding/removing at seeded random positions.
void repair_cardinality(std::vector<uint8_t>& genome, int m, Rng& rng) {
    std::vector<int> ones, zeros;
    for (int i = 0; i < int(genome.size()); ++i)
        (genome[size_t(i)] ? ones : zeros).push_back(i);
    while (int(ones.size()) > m) {
        size_t pick = size_t(rng.next_below(ones.size()));
        genome[size_t(ones[pick])] = 0;
        zeros.push_back(ones[pick]);
        ones.erase(ones.begin() + long(pick));
    }
    while (int(ones.size()) < m) {
        size_t pick = size_t(rng.next_below(zeros.size()));
        genome[size_t(zeros[pick])] = 1;
        ones.push_back(zeros[pick]);
        zeros.erase(zeros.begin() + long(pick));
    }
}

}  // namespace

void ResampleConfig::validate() const {
    if (epochs < 1) throw Error("resample config: epochs must be >= 1");
    if (!(initial_quantile > 0) || !(initial_quantile <= quantile_cap) || !(quantile_cap <= 1))
        throw Error("resample config: need 0 < initial quantile <= cap <= 1");
    if (!(quantile_step > 0)) throw Error("resample config: quantile step must be > 0");
    if (!(learning_rate > 0)) throw Error("resample config: learning rate must be > 0");
    if (ga_population < 2 || ga_generations < 1)
        throw Error("resample config: GA population/generations too small");
    if (!(selection_ratio > 0) || !(selection_ratio <= 1))
        throw Error("resample config: selection ratio must be in (0, 1]");
}

AutoencoderParams AutoencoderParams::init(uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x6165696e6974ULL));  // independent of data order
    AutoencoderParams p;
    for (int l = 0; l < 4; ++l) {
        const int rows = kLayerSizes[l + 1], cols = kLayerSizes[l];
        p.weights[size_t(l)].resize(rows, cols);
        const double scale = 1.0 / std::sqrt(double(cols));
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                p.weights[size_t(l)](r, c) = rng.uniform(-0.5, 0.5) * scale;
        p.biases[size_t(l)] = Eigen::VectorXd::Zero(rows);
    }
    return p;
}

Eigen::Vector2d AutoencoderParams::encode(const Vec6& normalized) const {
    Eigen::VectorXd a = normalized;
    for (int l = 0; l < 2; ++l)
        a = ((weights[size_t(l)] * a + biases[size_t(l)]).array().tanh()).matrix();
    return a.head<2>();
}

int AutoencoderParams::parameter_count() const {
    int n = 0;
    for (int l = 0; l < 4; ++l) n += kLayerSizes[l + 1] * (kLayerSizes[l] + 1);
    return n;
}

Eigen::VectorXd AutoencoderParams::flatten() const {
    Eigen::VectorXd theta(parameter_count());
    int off = 0;
    for (int l = 0; l < 4; ++l) {
        const auto& W = weights[size_t(l)];
        for (int r = 0; r < W.rows(); ++r)
            for (int c = 0; c < W.cols(); ++c) theta[off++] = W(r, c);
        for (int r = 0; r < W.rows(); ++r) theta[off++] = biases[size_t(l)][r];
    }
    return theta;
}

void AutoencoderParams::unflatten(const Eigen::VectorXd& theta) {
    int off = 0;
    for (int l = 0; l < 4; ++l) {
        const int rows = kLayerSizes[l + 1], cols = kLayerSizes[l];
        weights[size_t(l)].resize(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) weights[size_t(l)](r, c) = theta[off++];
        biases[size_t(l)].resize(rows);
        for (int r = 0; r < rows; ++r) biases[size_t(l)][r] = theta[off++];
    }
}

Eigen::MatrixXd normalize_keypoints(const std::vector<Keypoint>& keypoints,
                                    Eigen::Matrix<double, 6, 1>* feat_min_out,
                                    Eigen::Matrix<double, 6, 1>* feat_range_out) {
    const int n = int(keypoints.size());
    Eigen::MatrixXd X(kKeypointDim, n);
    for (int i = 0; i < n; ++i) X.col(i) = attribute_vector(keypoints[size_t(i)]);
    Vec6 lo = X.rowwise().minCoeff();
    Vec6 hi = X.rowwise().maxCoeff();
    Vec6 range = hi - lo;
    for (int k = 0; k < kKeypointDim; ++k)
        if (range[k] <= 0) range[k] = 1;  // constant attribute maps to 0
    X = (X.colwise() - lo).array().colwise() / range.array();
    if (feat_min_out) *feat_min_out = lo;
    if (feat_range_out) *feat_range_out = range;
    return X;
}

double reconstruction_loss(const AutoencoderParams& params, const Eigen::MatrixXd& batch) {
    double loss = 0;
    for (int i = 0; i < batch.cols(); ++i) {
        Activations act = forward(params, batch.col(i));
        loss += (act.a[4] - act.a[0]).squaredNorm();
    }
    return loss;
}

Eigen::VectorXd reconstruction_gradient(const AutoencoderParams& params,
                                        const Eigen::MatrixXd& batch) {
    const int n = int(batch.cols());
    const int pc = params.parameter_count();
    // Per-sample gradients into slots, then a fixed-order reduction; the
    // result does not depend on the thread count.
    Eigen::MatrixXd per_sample(pc, n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        Activations act = forward(params, batch.col(i));
        backward(params, act, per_sample.col(i).data());
    }
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(pc);
    for (int i = 0; i < n; ++i) grad += per_sample.col(i);
    return grad;
}

TrainResult train_autoencoder(const std::vector<Keypoint>& keypoints,
                              const ResampleConfig& cfg) {
    cfg.validate();
    if (keypoints.size() < 2) throw Error("train_autoencoder: need at least 2 keypoints");

    TrainResult res;
    res.params = AutoencoderParams::init(cfg.seed);
    Eigen::MatrixXd X =
        normalize_keypoints(keypoints, &res.params.feat_min, &res.params.feat_range);
    const double n = double(X.cols());

    res.initial_loss = reconstruction_loss(res.params, X);
    Eigen::VectorXd theta = res.params.flatten();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Eigen::VectorXd grad = reconstruction_gradient(res.params, X);
        theta -= (cfg.learning_rate / n) * grad;
        res.params.unflatten(theta);
    }
    res.final_loss = reconstruction_loss(res.params, X);
    if (!std::isfinite(res.final_loss))
        throw Error("train_autoencoder: loss diverged (lr = " +
                    std::to_string(cfg.learning_rate) + ", n = " + std::to_string(int(n)) + ")");

    res.latents.resize(size_t(X.cols()));
    for (int i = 0; i < X.cols(); ++i)
        res.latents[size_t(i)] = res.params.encode(X.col(i));
    return res;
}

double adaptive_radius(const std::vector<Eigen::Vector2d>& latents, const ResampleConfig& cfg) {
    const int n = int(latents.size());
    if (n < 2) throw Error("adaptive_radius: need at least 2 latent points");
    const size_t count = size_t(n) * (n - 1) / 2;
    std::vector<double> dists(count);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n - 1; ++i) {
        size_t base = size_t(i) * size_t(2 * n - i - 1) / 2;
        for (int j = i + 1; j < n; ++j)
            dists[base + size_t(j - i - 1)] =
                (latents[size_t(i)] - latents[size_t(j)]).squaredNorm();
    }
    std::sort(dists.begin(), dists.end());

    const double len = double(count);
    double q = cfg.initial_quantile;
    auto pick = [&](double quantile) {
        size_t idx = size_t(std::floor(len * quantile));
        return dists[std::min(idx, count - 1)];
    };
    double r = pick(q);
    while (r == 0 && q <= cfg.quantile_cap) {
        q += cfg.quantile_step;
        r = pick(q);
    }
    return r;
}

std::vector<int> ga_resample_cluster(const std::vector<Keypoint>& cluster,
                                     const ResampleConfig& cfg, uint64_t seed) {
    cfg.validate();
    const int n = int(cluster.size());
    if (n < 2) throw Error("ga_resample_cluster: need at least 2 points");
    const int m = std::max(1, int(std::ceil(cfg.selection_ratio * n)));
    auto all = std::vector<int>(size_t(n));
    for (int i = 0; i < n; ++i) all[size_t(i)] = i;
    if (m >= n) return all;

    auto pos = std::vector<Eigen::Vector2d>(size_t(n));
    auto sigma = std::vector<double>(size_t(n));
    for (int i = 0; i < n; ++i) {
        pos[size_t(i)] = {cluster[size_t(i)].x, cluster[size_t(i)].y};
        sigma[size_t(i)] = cluster[size_t(i)].sigma;
    }

    Rng rng(seed);
    const int pop_size = cfg.ga_population;
    auto pop = std::vector<std::vector<uint8_t>>(size_t(pop_size));
    auto fit = std::vector<Fitness>(size_t(pop_size));
    for (auto& genome : pop) {
        std::vector<int> order = all;
        rng.shuffle(order);
        genome.assign(size_t(n), 0);
        for (int i = 0; i < m; ++i) genome[size_t(order[size_t(i)])] = 1;
    }
    for (int i = 0; i < pop_size; ++i) fit[size_t(i)] = genome_fitness(pop[size_t(i)], pos, sigma);

    auto tournament = [&]() -> int {
        int best = int(rng.next_below(uint64_t(pop_size)));
        for (int k = 1; k < 3; ++k) {
            int cand = int(rng.next_below(uint64_t(pop_size)));
            if (fit[size_t(cand)] > fit[size_t(best)]) best = cand;
        }
        return best;
    };
    auto rank = [&](int a, int b) {
        if (fit[size_t(a)] > fit[size_t(b)]) return true;
        if (fit[size_t(b)] > fit[size_t(a)]) return false;
        return a < b;
    };

    auto order = std::vector<int>(size_t(pop_size));
    for (int gen = 0; gen < cfg.ga_generations; ++gen) {
        for (int i = 0; i < pop_size; ++i) order[size_t(i)] = i;
        std::sort(order.begin(), order.end(), rank);

        std::vector<std::vector<uint8_t>> next;
        next.reserve(size_t(pop_size));
        next.push_back(pop[size_t(order[0])]);  // elitism
        next.push_back(pop[size_t(order[1])]);
        while (int(next.size()) < pop_size) {
            const auto& pa = pop[size_t(tournament())];
            const auto& pb = pop[size_t(tournament())];
            auto child = std::vector<uint8_t>(size_t(n));
            for (int g = 0; g < n; ++g)
                child[size_t(g)] = (rng.next_u64() & 1) ? pa[size_t(g)] : pb[size_t(g)];
            repair_cardinality(child, m, rng);
            if (rng.next_double() < 0.1) {  // swap mutation
                std::vector<int> ones, zeros;
                for (int g = 0; g < n; ++g) (child[size_t(g)] ? ones : zeros).push_back(g);
                if (!ones.empty() && !zeros.empty()) {
                    child[size_t(ones[size_t(rng.next_below(ones.size()))])] = 0;
                    child[size_t(zeros[size_t(rng.next_below(zeros.size()))])] = 1;
                }
            }
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        for (int i = 0; i < pop_size; ++i)
            fit[size_t(i)] = genome_fitness(pop[size_t(i)], pos, sigma);
    }

    int best = 0;
    for (int i = 1; i < pop_size; ++i)
        if (fit[size_t(i)] > fit[size_t(best)]) best = i;
    std::vector<int> selected;
    for (int i = 0; i < n; ++i)
        if (pop[size_t(best)][size_t(i)]) selected.push_back(i);
    return selected;
}

ResampleResult resample_keypoints(const std::vector<Keypoint>& keypoints,
                                  const ResampleConfig& cfg) {
    cfg.validate();
    ResampleResult res;
    res.kept = keypoints;
    res.kept_flags.assign(keypoints.size(), 1);
    if (int(keypoints.size()) < kMinClusterPoints + 1) return res;

    TrainResult trained = train_autoencoder(keypoints, cfg);
    res.radius = adaptive_radius(trained.latents, cfg);
    if (res.radius == 0) return res;

    std::vector<double> flat;
    flat.reserve(trained.latents.size() * 2);
    for (const auto& z : trained.latents) {
        flat.push_back(z.x());
        flat.push_back(z.y());
    }
    // The radius is a squared distance; the neighborhood test is
    // ||z_i - z_j||^2 <= r, so the linear eps is sqrt(r).
    ClusterLabeling labeling = dbscan(flat, 2, std::sqrt(res.radius), kMinClusterPoints);
    res.labels = labeling.labels;
    res.cluster_count = labeling.cluster_count;
    if (labeling.cluster_count == 0) return res;

    res.resampled = true;
    std::fill(res.kept_flags.begin(), res.kept_flags.end(), 0);
    for (size_t i = 0; i < keypoints.size(); ++i)
        if (labeling.labels[i] == -1) res.kept_flags[i] = 1;  // K_s kept verbatim

    auto groups = labeling.groups();
    // Clusters are independent; GA seeds derive from (seed, cluster id).
#pragma omp parallel for schedule(dynamic)
    for (int c = 0; c < int(groups.size()); ++c) {
        const auto& members = groups[size_t(c)];
        if (members.size() < 2) {
            for (int idx : members) res.kept_flags[size_t(idx)] = 1;
            continue;
        }
        std::vector<Keypoint> cluster;
        cluster.reserve(members.size());
        for (int idx : members) cluster.push_back(keypoints[size_t(idx)]);
        std::vector<int> sel =
            ga_resample_cluster(cluster, cfg, Rng::mix(cfg.seed, uint64_t(c) + 1));
        for (int s : sel) res.kept_flags[size_t(members[size_t(s)])] = 1;
    }

    res.kept.clear();
    for (size_t i = 0; i < keypoints.size(); ++i)
        if (res.kept_flags[i]) res.kept.push_back(keypoints[i]);
    return res;
}

std::vector<Keypoint> read_keypoints_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open keypoint csv: " + path);
    std::vector<Keypoint> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first && line.find("x") != std::string::npos &&
            line.find_first_of("0123456789") == std::string::npos) {
            first = false;
            continue;  // header row
        }
        first = false;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream iss(line);
        Keypoint k;
        double lambda;
        if (!(iss >> k.x >> k.y >> k.d >> k.theta >> k.sigma >> lambda))
            throw Error("bad keypoint csv line: " + line);
        k.lambda = int(lambda);
        out.push_back(k);
    }
    return out;
}

void write_keypoints_csv(const std::string& path, const std::vector<Keypoint>& keypoints) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write keypoint csv: " + path);
    out << "x,y,d,theta,sigma,lambda\n";
    char buf[256];
    for (const auto& k : keypoints) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.9g,%d\n", k.x, k.y, k.d, k.theta,
                      k.sigma, k.lambda);
        out << buf;
    }
}

}  // namespace deva
