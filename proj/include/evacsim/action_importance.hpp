#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evacsim/building_graph.hpp"
#include "evacsim/pretrain_env.hpp"

namespace evacsim {

constexpr double kMaskPenalty = -9999.0;

/// Additive action mask: 0 for the k best one-step actions per source room,
/// kMaskPenalty for the rest. Built once per building config.
struct ActionImportance {
    int n = 0;
    int k = 0;
    std::vector<double> mask;  // length n*n, indexed by a = dest*n + source

    int retained() const { return static_cast<int>(std::count(mask.begin(), mask.end(), 0.0)); }
    double reduction_pct() const {
        return 100.0 * (1.0 - static_cast<double>(retained()) / static_cast<double>(mask.size()));
    }
};

/// One-step pretraining reward of moving room -> dest: +1 exit edge, -10 no
/// edge, -1 otherwise.
inline double one_step_reward(const BuildingGraph& g, int room, int dest) {
    if (g.adj(room, dest) && g.is_exit(dest)) return 1.0;
    if (!g.adj(room, dest)) return -10.0;
    return -1.0;
}

/// The k highest one-step-reward destinations from a room, ties broken by
/// lowest destination index.
inline std::vector<int> one_step_sim(const BuildingGraph& g, int room, int k) {
    if (room < 0 || room >= g.n)
        throw std::out_of_range("one_step_sim: room " + std::to_string(room) + " out of range");
    if (k < 1 || k > g.n)
        throw std::out_of_range("one_step_sim: k=" + std::to_string(k) + " out of range [1," +
                                std::to_string(g.n) + "]");
    std::vector<int> dests(g.n);
    for (int d = 0; d < g.n; ++d) dests[d] = d;
    std::stable_sort(dests.begin(), dests.end(), [&](int a, int b) {
        return one_step_reward(g, room, a) > one_step_reward(g, room, b);
    });
    dests.resize(k);
    return dests;
}

/// Same ranking, but obtained by actually stepping the pretraining instance;
/// must agree with the analytic route exactly.
inline std::vector<int> one_step_sim_replay(const BuildingGraph& g, int room, int k) {
    if (k < 1 || k > g.n)
        throw std::out_of_range("one_step_sim_replay: k out of range");
    std::vector<double> rewards(g.n);
    for (int d = 0; d < g.n; ++d) {
        PretrainEnv env(g);
        env.force_position(room);
        rewards[d] = env.step(d).reward;
    }
    std::vector<int> dests(g.n);
    for (int d = 0; d < g.n; ++d) dests[d] = d;
    std::stable_sort(dests.begin(), dests.end(),
                     [&](int a, int b) { return rewards[a] > rewards[b]; });
    dests.resize(k);
    return dests;
}

inline ActionImportance build_importance(const BuildingGraph& g, int k) {
    ActionImportance ai;
    ai.n = g.n;
    ai.k = k;
    ai.mask.assign(static_cast<size_t>(g.n) * g.n, kMaskPenalty);
    for (int room = 0; room < g.n; ++room) {
        // exit sources rank like any other room; their edge-less ties keep k slots
        for (int d : one_step_sim(g, room, k))
            ai.mask[static_cast<size_t>(d) * g.n + room] = 0.0;
    }
    return ai;
}

/// Elementwise Q + mask; retained actions unchanged, masked ones pushed far
/// negative.
inline std::vector<double> apply_importance(const std::vector<double>& qvals,
                                            const ActionImportance& ai) {
    if (qvals.size() != ai.mask.size())
        throw std::invalid_argument("apply_importance: length mismatch");
    std::vector<double> out(qvals.size());
    for (size_t i = 0; i < qvals.size(); ++i) out[i] = qvals[i] + ai.mask[i];
    return out;
}

inline void write_mask_csv(const ActionImportance& ai, std::ostream& out) {
    out << "# action index a = dest*n + source; n=" << ai.n << " k=" << ai.k
        << "; 0 = retained, " << kMaskPenalty << " = masked\n";
    for (size_t i = 0; i < ai.mask.size(); ++i) out << ai.mask[i] << '\n';
}

inline void write_mask_csv(const ActionImportance& ai, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open mask output " + path);
    write_mask_csv(ai, out);
}

}  // namespace evacsim
