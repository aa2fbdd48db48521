#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "evacsim/action_importance.hpp"
#include "evacsim/building_graph.hpp"
#include "evacsim/evac_env.hpp"
#include "evacsim/network.hpp"
#include "evacsim/replay_buffer.hpp"
#include "evacsim/rng.hpp"
#include "evacsim/tabular_q.hpp"

namespace evacsim {

enum class AgentVariant { Dqn, Ddqn, Dueling };

inline const char* variant_name(AgentVariant v) {
    switch (v) {
        case AgentVariant::Dqn: return "dqn";
        case AgentVariant::Ddqn: return "ddqn";
        default: return "dueling";
    }
}

struct AgentConfig {
    AgentVariant variant = AgentVariant::Dueling;
    double gamma = 0.9;
    double eps0 = 1.0;
    double eps_decay = 0.995;    // per episode
    double eps_min = 0.01;
    size_t replay_capacity = 2000;
    int minibatch = 32;
    int target_sync = 100;       // online->target copy period, in gradient steps
    int episodes = 500;
    int step_cap = 1000;
    double lr = 0.001;
    std::vector<int> trunk = {128, 256, 256, 256};
    Network::Dueling dueling_mode = Network::Dueling::Mean;
    bool normalize_input = true;   // divide occupancy by the bottleneck
    bool reward_clip = false;      // optional stability clip, off by default
    double clip_lo = -100.0, clip_hi = 10.0;
    bool use_replay = true;        // false = update on the current transition only
    int pretrain_epochs = 20000;
    double pretrain_tol = 5e-4;    // target MSE for the Q-matrix overfit
    double pretrain_lr = 0.01;
    int pretrain_patience = 2000;  // epochs without improvement -> stall flag
};

struct EpisodeStat {
    int steps = 0;
    double total_reward = 0.0;
    double epsilon = 0.0;
    long wall_ms = 0;
};

struct RunRecord {
    std::vector<EpisodeStat> episodes;
    bool diverged = false;
    std::string note;
};

inline double mean_steps(const RunRecord& r) {
    if (r.episodes.empty()) return 0.0;
    double s = 0.0;
    for (const auto& e : r.episodes) s += e.steps;
    return s / r.episodes.size();
}

inline int min_steps(const RunRecord& r) {
    int best = std::numeric_limits<int>::max();
    for (const auto& e : r.episodes) best = std::min(best, e.steps);
    return r.episodes.empty() ? 0 : best;
}

/// Mean episode length over the last `count` episodes (all if fewer).
inline double trailing_mean_steps(const RunRecord& r, size_t count) {
    if (r.episodes.empty()) return 0.0;
    const size_t start = r.episodes.size() > count ? r.episodes.size() - count : 0;
    double s = 0.0;
    for (size_t i = start; i < r.episodes.size(); ++i) s += r.episodes[i].steps;
    return s / (r.episodes.size() - start);
}

/// Bootstrapped target for one transition. DQN/Dueling take the max of the
/// target net over the next state; DDQN evaluates the target net at the online
/// argmax. Terminal transitions contribute the bare reward.
inline double compute_target(double r, bool terminal, double gamma, const double* q_target_next,
                             int n_actions, const double* q_online_next = nullptr,
                             const double* mask = nullptr) {
    if (terminal) return r;
    auto val = [&](const double* q, int j) { return q[j] + (mask ? mask[j] : 0.0); };
    int best = 0;
    const double* sel = q_online_next ? q_online_next : q_target_next;
    for (int j = 1; j < n_actions; ++j)
        if (val(sel, j) > val(sel, best)) best = j;
    return r + gamma * val(q_target_next, best);
}

struct PretrainReport {
    int epochs_run = 0;
    double final_loss = 0.0;
    bool reached_tol = false;
    bool stalled = false;  // loss stopped improving before the epoch cap
};

/// DQN-family agent: online + target network, experience replay, epsilon-greedy
/// selection, optional Q-matrix pretraining and action-importance masking.
class DqnAgent {
public:
    DqnAgent(const BuildingGraph& g, AgentConfig cfg, uint64_t seed)
        : g_(&g),
          cfg_(std::move(cfg)),
          online_(g.n, cfg_.trunk, g.n * g.n,
                  cfg_.variant == AgentVariant::Dueling ? cfg_.dueling_mode
                                                        : Network::Dueling::None,
                  split_seed(seed, 0xA0)),
          target_(online_),
          replay_(cfg_.replay_capacity) {}

    const AgentConfig& config() const { return cfg_; }
    Network& online() { return online_; }
    const Network& online() const { return online_; }
    const Network& target() const { return target_; }

    void set_mask(ActionImportance mask) {
        if (static_cast<int>(mask.mask.size()) != g_->n * g_->n)
            throw std::invalid_argument("mask length mismatch");
        mask_ = std::move(mask);
        retained_.clear();
        for (size_t i = 0; i < mask_->mask.size(); ++i)
            if (mask_->mask[i] == 0.0) retained_.push_back(static_cast<int>(i));
    }
    const std::optional<ActionImportance>& mask() const { return mask_; }

    std::vector<double> encode(const std::vector<int>& occupancy) const {
        std::vector<double> x(occupancy.size());
        const double scale = cfg_.normalize_input ? 1.0 / g_->bottleneck : 1.0;
        for (size_t i = 0; i < occupancy.size(); ++i) x[i] = occupancy[i] * scale;
        return x;
    }

    /// Overfit the online net to the flattened noisy Q-matrix at the fixed
    /// empty-state input; the target layout matches decode_action
    /// (flat index a = dest*n + source).
    PretrainReport pretrain(const QMatrix& qnoisy) {
        ScopedFlushDenormals ftz;
        const int n = g_->n;
        if (qnoisy.n != n) throw std::invalid_argument("pretrain: q-matrix size mismatch");
        Mat X(1, n);  // empty state: all-zero occupancy
        Mat T(1, n * n);
        for (int a = 0; a < n * n; ++a) T.a[a] = qnoisy.at(a % n, a / n);

        AdamOpt opt;
        opt.lr = cfg_.pretrain_lr;
        opt.init(online_);
        auto grads = make_grads(online_);
        Network::Cache cache;

        PretrainReport rep;
        double best = std::numeric_limits<double>::infinity();
        int best_epoch = 0;
        for (int epoch = 0; epoch < cfg_.pretrain_epochs; ++epoch) {
            zero_grads(grads);
            const double loss = full_loss(online_, X, T, &grads, cache);
            rep.epochs_run = epoch + 1;
            rep.final_loss = loss;
            if (loss < best) {
                best = loss;
                best_epoch = epoch;
            } else if (epoch - best_epoch > cfg_.pretrain_patience) {
                rep.stalled = true;  // keep going to the cap, just flag it
                best_epoch = epoch;
            }
            if (loss < cfg_.pretrain_tol) {
                rep.reached_tol = true;
                break;
            }
            opt.step(online_, grads);
        }
        target_ = online_;
        return rep;
    }

    /// Epsilon-greedy over the (masked) online Q-output; greedy ties break to
    /// the lowest action index. With a mask, random draws stay inside the
    /// retained action set.
    int select_action(const std::vector<double>& s_enc, double eps, Rng& rng) {
        if (uniform01(rng) < eps) {
            if (mask_) return retained_[uniform_int(rng, 0, static_cast<int>(retained_.size()) - 1)];
            return uniform_int(rng, 0, g_->n * g_->n - 1);
        }
        q_values(s_enc, qscratch_);
        int best = 0;
        for (size_t j = 1; j < qscratch_.size(); ++j)
            if (qscratch_[j] > qscratch_[best]) best = static_cast<int>(j);
        return best;
    }

    /// Online Q-values with the importance mask folded in.
    void q_values(const std::vector<double>& s_enc, std::vector<double>& out) {
        if (x1_.rows != 1) x1_.resize(1, g_->n);
        std::copy(s_enc.begin(), s_enc.end(), x1_.a.begin());
        online_.forward_batch(x1_, q1_, cache_);
        out.assign(q1_.a.begin(), q1_.a.end());
        if (mask_)
            for (size_t j = 0; j < out.size(); ++j) out[j] += mask_->mask[j];
    }

    RunRecord train(EvacEnv& env, uint64_t seed) {
        ScopedFlushDenormals ftz;
        RunRecord rec;
        Rng act_rng(split_seed(seed, 0xB0));
        Rng replay_rng(split_seed(seed, 0xB1));
        target_ = online_;
        opt_.lr = cfg_.lr;
        opt_.init(online_);
        grads_ = make_grads(online_);
        updates_ = 0;

        for (int ep = 0; ep < cfg_.episodes; ++ep) {
            const double eps =
                std::max(cfg_.eps_min, cfg_.eps0 * std::pow(cfg_.eps_decay, ep));
            const auto t0 = std::chrono::steady_clock::now();
            env.reset(split_seed(seed, 0x9000 + static_cast<uint64_t>(ep)));
            EpisodeStat st;
            st.epsilon = eps;
            std::vector<double> s_enc = encode(env.render().occupancy);
            while (!env.terminal() && st.steps < cfg_.step_cap) {
                const int a = select_action(s_enc, eps, act_rng);
                const auto out = env.step(a);
                double r = out.reward;
                if (cfg_.reward_clip) r = std::clamp(r, cfg_.clip_lo, cfg_.clip_hi);
                std::vector<double> next_enc = encode(out.next_state.occupancy);
                st.total_reward += out.reward;
                ++st.steps;
                if (cfg_.use_replay) {
                    replay_.push({s_enc, a, r, next_enc, out.terminal});
                    if (replay_.size() >= static_cast<size_t>(cfg_.minibatch))
                        train_minibatch(replay_rng);
                } else {
                    train_single(s_enc, a, r, next_enc, out.terminal);
                }
                s_enc = std::move(next_enc);
            }
            st.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                               std::chrono::steady_clock::now() - t0)
                                               .count());
            rec.episodes.push_back(st);
            if (!online_.all_finite()) {
                rec.diverged = true;
                rec.note = "non-finite parameter after episode " + std::to_string(ep);
                return rec;
            }
        }
        return rec;
    }

private:
    void train_minibatch(Rng& rng) {
        const auto batch = replay_.sample(static_cast<size_t>(cfg_.minibatch), rng);
        const int B = static_cast<int>(batch.size());
        const int n = g_->n, nact = n * n;
        bx_.resize(B, n);
        bxn_.resize(B, n);
        actions_.resize(B);
        targets_.resize(B);
        for (int r = 0; r < B; ++r) {
            std::copy(batch[r]->state.begin(), batch[r]->state.end(), bx_.row(r));
            std::copy(batch[r]->next_state.begin(), batch[r]->next_state.end(), bxn_.row(r));
            actions_[r] = batch[r]->action;
        }
        target_.forward_batch(bxn_, qt_, tcache_);
        const bool ddqn = cfg_.variant == AgentVariant::Ddqn;
        if (ddqn) online_.forward_batch(bxn_, qo_, cache_);
        const double* mask = mask_ ? mask_->mask.data() : nullptr;
        for (int r = 0; r < B; ++r)
            targets_[r] = compute_target(batch[r]->reward, batch[r]->terminal, cfg_.gamma,
                                         qt_.row(r), nact, ddqn ? qo_.row(r) : nullptr, mask);
        zero_grads(grads_);
        masked_loss(online_, bx_, actions_, targets_, &grads_, cache_);
        opt_.step(online_, grads_);
        if (++updates_ % cfg_.target_sync == 0) target_ = online_;
    }

    void train_single(const std::vector<double>& s, int a, double r,
                      const std::vector<double>& sn, bool terminal) {
        const int n = g_->n;
        bx_.resize(1, n);
        bxn_.resize(1, n);
        std::copy(s.begin(), s.end(), bx_.a.begin());
        std::copy(sn.begin(), sn.end(), bxn_.a.begin());
        target_.forward_batch(bxn_, qt_, tcache_);
        const bool ddqn = cfg_.variant == AgentVariant::Ddqn;
        if (ddqn) online_.forward_batch(bxn_, qo_, cache_);
        const double* mask = mask_ ? mask_->mask.data() : nullptr;
        actions_.assign(1, a);
        targets_.assign(1, compute_target(r, terminal, cfg_.gamma, qt_.row(0), n * n,
                                          ddqn ? qo_.row(0) : nullptr, mask));
        zero_grads(grads_);
        masked_loss(online_, bx_, actions_, targets_, &grads_, cache_);
        opt_.step(online_, grads_);
        if (++updates_ % cfg_.target_sync == 0) target_ = online_;
    }

    const BuildingGraph* g_;
    AgentConfig cfg_;
    Network online_;
    Network target_;
    ReplayBuffer replay_;
    std::optional<ActionImportance> mask_;
    std::vector<int> retained_;
    AdamOpt opt_;
    std::vector<Mat> grads_;
    long updates_ = 0;

    // scratch
    Network::Cache cache_, tcache_;
    Mat x1_, q1_, bx_, bxn_, qt_, qo_;
    std::vector<double> qscratch_;
    std::vector<int> actions_;
    std::vector<double> targets_;
};

/// Greedy rollout of a fixed action ranking (e.g. the pretrained net's output
/// at the empty state), restricted to actions whose source room is occupied.
/// Returns the episode length (capped).
inline int rollout_static_ranking(EvacEnv& env, const std::vector<double>& ranking, int step_cap) {
    const int n = env.graph().n;
    if (static_cast<int>(ranking.size()) != n * n)
        throw std::invalid_argument("rollout: ranking length mismatch");
    int steps = 0;
    while (!env.terminal() && steps < step_cap) {
        const auto& occ = env.render().occupancy;
        int best = -1;
        for (int a = 0; a < n * n; ++a) {
            if (occ[a % n] == 0) continue;
            if (best < 0 || ranking[a] > ranking[best]) best = a;
        }
        if (best < 0) break;  // no occupied source; terminal anyway
        env.step(best);
        ++steps;
    }
    return steps;
}

/// Uniform-random baseline: no learning, same step cap and metrics.
inline RunRecord random_agent(EvacEnv& env, int episodes, int step_cap, uint64_t seed) {
    RunRecord rec;
    Rng rng(split_seed(seed, 0xC0));
    const int nact = env.graph().n * env.graph().n;
    for (int ep = 0; ep < episodes; ++ep) {
        const auto t0 = std::chrono::steady_clock::now();
        env.reset(split_seed(seed, 0x9000 + static_cast<uint64_t>(ep)));
        EpisodeStat st;
        st.epsilon = 1.0;
        while (!env.terminal() && st.steps < step_cap) {
            env.step(uniform_int(rng, 0, nact - 1));
            ++st.steps;
        }
        st.wall_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                           std::chrono::steady_clock::now() - t0)
                                           .count());
        rec.episodes.push_back(st);
    }
    return rec;
}

}  // namespace evacsim
