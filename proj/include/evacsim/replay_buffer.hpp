#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "evacsim/rng.hpp"

namespace evacsim {

struct Transition {
    std::vector<double> state;       // network input encoding
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;
};

/// Bounded FIFO of transitions with uniform minibatch sampling; a draw returns
/// distinct slots.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
        slots_.reserve(capacity);
    }

    size_t size() const { return slots_.size(); }
    size_t capacity() const { return capacity_; }
    const Transition& slot(size_t logical) const {  // 0 = oldest
        return slots_[(head_ + logical) % slots_.size()];
    }

    void push(Transition t) {
        if (slots_.size() < capacity_) {
            slots_.push_back(std::move(t));
        } else {
            slots_[head_] = std::move(t);  // overwrite oldest
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// Sample `count` distinct slots (partial Fisher-Yates over slot indices).
    std::vector<const Transition*> sample(size_t count, Rng& rng) {
        if (count > slots_.size())
            throw std::logic_error("replay sample: not enough transitions");
        idx_.resize(slots_.size());
        for (size_t i = 0; i < idx_.size(); ++i) idx_[i] = i;
        std::vector<const Transition*> out(count);
        for (size_t i = 0; i < count; ++i) {
            const size_t j =
                i + static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(idx_.size() - i - 1)));
            std::swap(idx_[i], idx_[j]);
            out[i] = &slots_[idx_[i]];
        }
        return out;
    }

private:
    size_t capacity_;
    size_t head_ = 0;  // oldest slot once full
    std::vector<Transition> slots_;
    std::vector<size_t> idx_;
};

}  // namespace evacsim
