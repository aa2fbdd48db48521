#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "evacsim/building_graph.hpp"
#include "evacsim/rng.hpp"

namespace evacsim {

constexpr double kRewardFloor = 1e6;   // negative rewards clamp at -kRewardFloor
constexpr double kExitReward = 10.0;

/// a = dest*n + source; returns (source, dest).
inline std::pair<int, int> decode_action(int a, int n) {
    if (a < 0 || a >= n * n)
        throw std::out_of_range("action " + std::to_string(a) + " out of range for n=" + std::to_string(n));
    return {a % n, a / n};
}

inline int encode_action(int source, int dest, int n) { return dest * n + source; }

/// -(d^t), clamped below at the reward floor. Evaluated as exp(t*ln d) so the
/// clamp absorbs overflow instead of producing inf.
inline double reward_decay(double d, int t) {
    if (d <= 0.0) return 0.0;
    const double mag = std::exp(static_cast<double>(t) * std::log(d));
    return -std::min(mag, kRewardFloor);
}

struct EvacState {
    std::vector<int> occupancy;
    int clock = 0;
    std::vector<double> degrees;
};

struct StepOutcome {
    EvacState next_state;
    double reward = 0.0;
    bool terminal = false;
    // extra bookkeeping for trajectory dumps
    int branch = 0;      // 1=ignored 2=exit 3=illegal/empty 4=bottleneck 5=move
    int source = 0;
    int dest = 0;
    int t = 0;
};

/// The fire-evacuation instance: occupancy vector state, n^2 move actions,
/// exponentially decaying fire penalties, bottleneck cap, action uncertainty.
class EvacEnv {
public:
    explicit EvacEnv(BuildingGraph graph) : g_(std::move(graph)) { reset(0); }

    const BuildingGraph& graph() const { return g_; }
    int num_actions() const { return g_.n * g_.n; }

    /// Override the config's uncertainty p (used by experiment presets).
    void set_uncertainty(double p) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("uncertainty must lie in [0,1)");
        p_ = p;
    }
    double uncertainty() const { return p_; }

    EvacState reset(uint64_t seed) {
        state_.occupancy = g_.occupancy0;
        state_.clock = 0;
        state_.degrees = g_.degree0;
        rng_.seed(seed);
        terminal_ = total_occupancy() == 0;
        return state_;
    }

    const EvacState& render() const { return state_; }
    bool terminal() const { return terminal_; }

    int total_occupancy() const {
        return std::accumulate(state_.occupancy.begin(), state_.occupancy.end(), 0);
    }

    StepOutcome step(int action) {
        if (terminal_) throw std::logic_error("step called on terminal environment");
        const int n = g_.n;
        auto [src, dst] = decode_action(action, n);
        const int t = state_.clock + 1;

        StepOutcome out;
        out.source = src;
        out.dest = dst;
        out.t = t;

        const double u = uniform01(rng_);
        if (p_ >= u) {
            out.branch = 1;  // action ignored, reward charged as if performed
            out.reward = reward_decay(state_.degrees[dst], t);
        } else if (g_.adj(src, dst) && g_.is_exit(dst) && state_.occupancy[src] > 0) {
            out.branch = 2;
            out.reward = kExitReward;
            state_.occupancy[src] -= 1;  // exit occupancy stays 0
        } else if (!g_.adj(src, dst) || state_.occupancy[src] == 0) {
            out.branch = 3;
            out.reward = scaled_penalty(2.0, t);
        } else if (state_.occupancy[dst] >= g_.bottleneck) {
            out.branch = 4;
            out.reward = scaled_penalty(0.5, t);
        } else {
            out.branch = 5;
            out.reward = reward_decay(state_.degrees[dst], t);
            state_.occupancy[src] -= 1;
            state_.occupancy[dst] += 1;
        }

        for (int j = 0; j < n; ++j) state_.degrees[j] += g_.delta[j];
        state_.clock = t;
        terminal_ = total_occupancy() == 0;
        out.terminal = terminal_;
        out.next_state = state_;
        return out;
    }

private:
    double scaled_penalty(double coeff, int t) const {
        const double dmax = *std::max_element(state_.degrees.begin(), state_.degrees.end());
        if (dmax <= 0.0) return 0.0;
        const double mag = coeff * std::exp(static_cast<double>(t) * std::log(dmax));
        return -std::min(mag, kRewardFloor);
    }

    BuildingGraph g_;
    EvacState state_;
    bool terminal_ = false;
    double p_ = g_.uncertainty;
    Rng rng_;
};

struct TrajectoryRow {
    int t;
    int action;
    int source;
    int dest;
    int branch;
    double reward;
    bool terminal;
};

inline void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, std::ostream& out) {
    out << "t,action,source,dest,branch,reward,terminal\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.reward);
        out << r.t << ',' << r.action << ',' << r.source << ',' << r.dest << ',' << r.branch << ','
            << buf << ',' << (r.terminal ? 1 : 0) << '\n';
    }
}

inline void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open trajectory output " + path);
    write_trajectory_csv(rows, out);
}

}  // namespace evacsim
