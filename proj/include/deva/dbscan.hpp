#pragma once

#include <vector>

namespace deva {

// labels: -1 = noise, 0..cluster_count-1 = cluster id.
struct ClusterLabeling {
    std::vector<int> labels;
    int cluster_count = 0;

    // Point indices per cluster, in input order.
    std::vector<std::vector<int>> groups() const;
};

// Euclidean DBSCAN over `n = points.size()/dim` points stored row-major.
// eps-neighborhoods are inclusive (distance <= eps) and contain the point
// itself. Labeling is deterministic for a fixed input order: clusters are
// numbered by the first core point encountered in scan order, and border
// points go to the first cluster that reaches them.
ClusterLabeling dbscan(const std::vector<double>& points, int dim, double eps, int min_pts);

namespace reference {
// Serial version, identical output; kept for testing the parallel kernel.
ClusterLabeling dbscan(const std::vector<double>& points, int dim, double eps, int min_pts);
}

}  // namespace deva
