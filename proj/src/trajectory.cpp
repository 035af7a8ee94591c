#include "deva/trajectory.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "deva/error.hpp"

namespace deva {

Trajectory read_tum_trajectory(const std::string& path, int* skipped) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory file: " + path);
    Trajectory traj;
    int bad = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream iss(line);
        double ts, tx, ty, tz, qx, qy, qz, qw;
        if (!(iss >> ts >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
            ++bad;
            continue;
        }
        TrajectorySample s;
        s.timestamp = ts;
        s.pose.t = {tx, ty, tz};
        s.pose.q = Eigen::Quaterniond(qw, qx, qy, qz);
        if (s.pose.q.norm() <= 0) {
            ++bad;
            continue;
        }
        s.pose.normalize();
        traj.push_back(s);
    }
    if (skipped) *skipped = bad;
    std::sort(traj.begin(), traj.end(),
              [](const TrajectorySample& a, const TrajectorySample& b) {
                  return a.timestamp < b.timestamp;
              });
    return traj;
}

void write_tum_trajectory(const std::string& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write trajectory file: " + path);
    out << "# timestamp tx ty tz qx qy qz qw\n";
    char buf[256];
    for (const auto& s : traj) {
        std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n",
                      s.timestamp, s.pose.t.x(), s.pose.t.y(), s.pose.t.z(),
                      s.pose.q.x(), s.pose.q.y(), s.pose.q.z(), s.pose.q.w());
        out << buf;
    }
}

std::vector<std::pair<int, int>> associate_timestamps(const std::vector<double>& a,
                                                      const std::vector<double>& b,
                                                      double max_diff) {
    struct Candidate {
        double diff;
        int i, j;
    };
    std::vector<Candidate> cands;
    for (int i = 0; i < int(a.size()); ++i) {
        for (int j = 0; j < int(b.size()); ++j) {
            double d = std::abs(a[i] - b[j]);
            if (d <= max_diff) cands.push_back({d, i, j});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
        if (x.diff != y.diff) return x.diff < y.diff;
        if (x.i != y.i) return x.i < y.i;
        return x.j < y.j;
    });
    std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
    std::vector<std::pair<int, int>> pairs;
    for (const auto& c : cands) {
        if (used_a[c.i] || used_b[c.j]) continue;
        used_a[c.i] = used_b[c.j] = 1;
        pairs.emplace_back(c.i, c.j);
    }
    std::sort(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) {
        return a[x.first] < a[y.first];
    });
    return pairs;
}

}  // namespace deva
