#include "deva/dbscan.hpp"

#include <cmath>
#include <cstdint>
#include <deque>

#include "deva/error.hpp"

namespace deva {
namespace {

constexpr int kUnvisited = -2;

void check_input(const std::vector<double>& points, int dim, double eps, int min_pts) {
    if (dim <= 0) throw Error("dbscan: dim must be > 0");
    if (points.size() % size_t(dim) != 0) throw Error("dbscan: point dimension mismatch");
    if (!std::isfinite(eps) || eps < 0) throw Error("dbscan: eps must be finite and >= 0");
    if (min_pts < 1) throw Error("dbscan: min_pts must be >= 1");
}

// Expansion over precomputed inclusive eps-neighbor lists. The core loop is
// sequential by nature; all determinism lives in the index-ordered lists.
ClusterLabeling expand(const std::vector<std::vector<int>>& neighbors, int min_pts) {
    const int n = int(neighbors.size());
    ClusterLabeling out;
    out.labels.assign(size_t(n), kUnvisited);
    int cluster = 0;
    std::deque<int> queue;
    for (int i = 0; i < n; ++i) {
        if (out.labels[size_t(i)] != kUnvisited) continue;
        if (int(neighbors[size_t(i)].size()) < min_pts) {
            out.labels[size_t(i)] = -1;
            continue;
        }
        out.labels[size_t(i)] = cluster;
        queue.assign(neighbors[size_t(i)].begin(), neighbors[size_t(i)].end());
        while (!queue.empty()) {
            int j = queue.front();
            queue.pop_front();
            int& lj = out.labels[size_t(j)];
            if (lj == -1) lj = cluster;  // border point claimed by first cluster
            if (lj != kUnvisited) continue;
            lj = cluster;
            if (int(neighbors[size_t(j)].size()) >= min_pts)
                queue.insert(queue.end(), neighbors[size_t(j)].begin(),
                             neighbors[size_t(j)].end());
        }
        ++cluster;
    }
    out.cluster_count = cluster;
    return out;
}

std::vector<int> neighbors_of(const std::vector<double>& points, int dim, double eps2, int i,
                              int n) {
    std::vector<int> nb;
    const double* pi = points.data() + size_t(i) * dim;
    for (int j = 0; j < n; ++j) {
        const double* pj = points.data() + size_t(j) * dim;
        double d2 = 0;
        for (int k = 0; k < dim; ++k) {
            double d = pi[k] - pj[k];
            d2 += d * d;
        }
        if (d2 <= eps2) nb.push_back(j);
    }
    return nb;
}

}  // namespace

std::vector<std::vector<int>> ClusterLabeling::groups() const {
    auto g = std::vector<std::vector<int>>(size_t(cluster_count));
    for (int i = 0; i < int(labels.size()); ++i)
        if (labels[size_t(i)] >= 0) g[size_t(labels[size_t(i)])].push_back(i);
    return g;
}

ClusterLabeling dbscan(const std::vector<double>& points, int dim, double eps, int min_pts) {
    check_input(points, dim, eps, min_pts);
    const int n = int(points.size() / size_t(dim));
    const double eps2 = eps * eps;
    auto neighbors = std::vector<std::vector<int>>(size_t(n));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) neighbors[size_t(i)] = neighbors_of(points, dim, eps2, i, n);
    return expand(neighbors, min_pts);
}

namespace reference {

ClusterLabeling dbscan(const std::vector<double>& points, int dim, double eps, int min_pts) {
    check_input(points, dim, eps, min_pts);
    const int n = int(points.size() / size_t(dim));
    const double eps2 = eps * eps;
    auto neighbors = std::vector<std::vector<int>>(size_t(n));
    for (int i = 0; i < n; ++i) neighbors[size_t(i)] = neighbors_of(points, dim, eps2, i, n);
    return expand(neighbors, min_pts);
}

}  // namespace reference
}  // namespace deva
