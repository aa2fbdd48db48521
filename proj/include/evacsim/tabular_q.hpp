#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evacsim/building_graph.hpp"
#include "evacsim/pretrain_env.hpp"
#include "evacsim/rng.hpp"

namespace evacsim {

/// n x n state-action table for the pretraining instance;
/// entry (i, j) is the value of moving from room i to room j.
struct QMatrix {
    int n = 0;
    std::vector<double> values;  // row-major, row = source room

    static QMatrix zeros(int n) { return {n, std::vector<double>(static_cast<size_t>(n) * n, 0.0)}; }
    double& at(int i, int j) { return values[static_cast<size_t>(i) * n + j]; }
    double at(int i, int j) const { return values[static_cast<size_t>(i) * n + j]; }

    int argmax_row(int i) const {
        int best = 0;
        for (int j = 1; j < n; ++j)
            if (at(i, j) > at(i, best)) best = j;  // ties -> lowest index
        return best;
    }
    double max_row(int i) const { return at(i, argmax_row(i)); }
};

struct QLearnHyper {
    double eta0 = 0.5;              // initial learning rate; decays per (s,a) visit
    double gamma = 0.9;
    double epsilon0 = 1.0;
    double epsilon_decay = 0.995;   // per episode
    double epsilon_min = 0.05;
    int episodes = 1000;
    // stop once every reachable (s,a) pair has been updated and the most
    // recent update of each moved it by less than this
    double early_stop_tol = 1e-6;
    int early_stop_min_episodes = 200;
    int step_cap_per_room = 50;     // episode cap = 50*n steps
};

/// One Q-learning update; the bootstrap term is dropped on terminal transitions.
inline void q_update(QMatrix& q, int s, int a, double r, int s_next, bool terminal, double eta,
                     double gamma) {
    const double boot = terminal ? 0.0 : gamma * q.max_row(s_next);
    q.at(s, a) += eta * (r + boot - q.at(s, a));
}

struct QTrainResult {
    QMatrix q;
    int episodes_run = 0;
    bool early_stopped = false;
    bool policy_matches_bfs = true;  // greedy path lengths vs BFS distances
};

struct GreedyPath {
    std::vector<int> rooms;   // start room first; exit last when reached
    bool reached_exit = false;
};

/// Follow argmax_j Q[row][j] from start until an exit, a revisited room, or n
/// steps. Ties break to the lowest index.
inline GreedyPath greedy_path(const QMatrix& q, const BuildingGraph& g, int start) {
    if (start < 0 || start >= g.n || g.is_exit(start))
        throw std::invalid_argument("greedy_path: start must be a non-exit room");
    GreedyPath p;
    p.rooms.push_back(start);
    std::vector<char> seen(g.n, 0);
    seen[start] = 1;
    int cur = start;
    for (int steps = 0; steps < g.n; ++steps) {
        const int nxt = q.argmax_row(cur);
        p.rooms.push_back(nxt);
        if (g.is_exit(nxt)) {
            p.reached_exit = true;
            return p;
        }
        if (seen[nxt]) return p;  // cycle: non-optimal policy
        seen[nxt] = 1;
        cur = nxt;
    }
    return p;
}

/// Tabular Q-learning on the pretraining instance: epsilon-greedy with random
/// episodic starts, per-(s,a) decaying learning rate, early stop on a small
/// max-abs change over a full episode.
inline QTrainResult train_qmatrix(const BuildingGraph& g, const QLearnHyper& h, uint64_t seed) {
    QMatrix q = QMatrix::zeros(g.n);
    std::vector<uint32_t> visits(static_cast<size_t>(g.n) * g.n, 0);
    // last-update magnitude per pair; rows of non-exit rooms are the reachable
    // states, everything else stays out of the stop check
    const double kUnvisited = std::numeric_limits<double>::infinity();
    std::vector<double> last_change(static_cast<size_t>(g.n) * g.n, 0.0);
    for (int i = 0; i < g.n; ++i)
        if (!g.is_exit(i))
            for (int j = 0; j < g.n; ++j)
                last_change[static_cast<size_t>(i) * g.n + j] = kUnvisited;
    PretrainEnv env(g);
    Rng rng(split_seed(seed, 0x51));
    const int step_cap = h.step_cap_per_room * g.n;

    QTrainResult res;
    double eps = h.epsilon0;
    for (int ep = 0; ep < h.episodes; ++ep) {
        int s = env.reset(split_seed(seed, 0x100 + static_cast<uint64_t>(ep)));
        for (int t = 0; t < step_cap && !env.done(); ++t) {
            int a;
            if (uniform01(rng) < eps) a = uniform_int(rng, 0, g.n - 1);
            else a = q.argmax_row(s);
            const auto st = env.step(a);
            auto& count = visits[static_cast<size_t>(s) * g.n + a];
            const double eta = h.eta0 / (1.0 + 1e-3 * count);
            ++count;
            const double before = q.at(s, a);
            q_update(q, s, a, st.reward, st.next, st.exited, eta, h.gamma);
            last_change[static_cast<size_t>(s) * g.n + a] = std::abs(q.at(s, a) - before);
            s = st.next;
        }
        eps = std::max(h.epsilon_min, eps * h.epsilon_decay);
        res.episodes_run = ep + 1;
        if (ep + 1 >= h.early_stop_min_episodes &&
            *std::max_element(last_change.begin(), last_change.end()) < h.early_stop_tol) {
            res.early_stopped = true;
            break;
        }
    }

    const auto dist = exit_distances(g);
    for (int i = 0; i < g.n && res.policy_matches_bfs; ++i) {
        if (g.is_exit(i)) continue;
        const auto p = greedy_path(q, g, i);
        if (!p.reached_exit || static_cast<int>(p.rooms.size()) - 1 != dist[i])
            res.policy_matches_bfs = false;
    }
    res.q = std::move(q);
    return res;
}

/// Sign-conditional offset: entries <= 0 move up by sigma, entries > 0 move
/// down by sigma.
inline QMatrix apply_noise(const QMatrix& q, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("apply_noise: sigma must be non-negative");
    QMatrix out = q;
    for (double& v : out.values) v = (v <= 0.0) ? v + sigma : v - sigma;
    return out;
}

inline void write_qmatrix_csv(const QMatrix& q, std::ostream& out) {
    char buf[64];
    for (int i = 0; i < q.n; ++i) {
        for (int j = 0; j < q.n; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", q.at(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

inline void write_qmatrix_csv(const QMatrix& q, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open qmatrix output " + path);
    write_qmatrix_csv(q, out);
}

inline QMatrix read_qmatrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    QMatrix q;
    q.n = static_cast<int>(rows.size());
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != q.n)
            throw std::runtime_error("qmatrix csv: not square");
        q.values.insert(q.values.end(), r.begin(), r.end());
    }
    return q;
}

inline QMatrix read_qmatrix_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open qmatrix file " + path);
    return read_qmatrix_csv(in);
}

}  // namespace evacsim
