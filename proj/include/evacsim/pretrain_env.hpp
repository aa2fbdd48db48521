#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "evacsim/building_graph.hpp"
#include "evacsim/rng.hpp"

namespace evacsim {

/// Shortest-path pretraining instance: state is a single room, actions are the
/// n destination rooms, rewards are the static {+1, -10, -1} triple.
class PretrainEnv {
public:
    explicit PretrainEnv(const BuildingGraph& g) : g_(&g) {
        for (int i = 0; i < g.n; ++i)
            if (!g.is_exit(i)) non_exits_.push_back(i);
    }

    struct Step {
        int next = 0;
        double reward = 0.0;
        bool exited = false;
    };

    int reset(uint64_t seed) {
        if (non_exits_.empty())
            throw std::logic_error("pretrain reset: graph has no non-exit rooms");
        rng_.seed(seed);
        pos_ = non_exits_[uniform_int(rng_, 0, static_cast<int>(non_exits_.size()) - 1)];
        done_ = false;
        return pos_;
    }

    int position() const { return pos_; }
    bool done() const { return done_; }
    const std::vector<int>& non_exit_rooms() const { return non_exits_; }

    // replay/test hook: place the walker without consuming randomness. Exit
    // rooms are allowed here so one-step evaluation can rank their (all
    // edge-less) moves like any other source.
    void force_position(int room) {
        if (room < 0 || room >= g_->n)
            throw std::invalid_argument("force_position: room " + std::to_string(room) +
                                        " out of range");
        pos_ = room;
        done_ = false;
    }

    Step step(int dest) {
        if (done_) throw std::logic_error("pretrain step called after exit");
        if (dest < 0 || dest >= g_->n)
            throw std::out_of_range("pretrain step: destination " + std::to_string(dest) +
                                    " out of range");
        Step s;
        if (g_->adj(pos_, dest) && g_->is_exit(dest)) {
            s = {dest, +1.0, true};
            done_ = true;
        } else if (!g_->adj(pos_, dest)) {
            s = {pos_, -10.0, false};
        } else {
            s = {dest, -1.0, false};
            pos_ = dest;
        }
        return s;
    }

private:
    const BuildingGraph* g_;
    std::vector<int> non_exits_;
    int pos_ = 0;
    bool done_ = false;
    Rng rng_;
};

}  // namespace evacsim
