#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "evacsim/action_importance.hpp"
#include "evacsim/agents.hpp"
#include "evacsim/building_graph.hpp"
#include "evacsim/evac_env.hpp"
#include "evacsim/tabular_q.hpp"

namespace evacsim {

struct ExperimentSpec {
    std::string config_path;
    AgentVariant variant = AgentVariant::Dueling;
    bool pretrain = true;
    double sigma = 10.0;
    std::optional<int> k;          // mask: value, or 0 = auto (max degree); nullopt = off
    std::vector<uint64_t> seeds = {1};
    int episodes = 500;
    std::optional<double> p_override;
    std::string out_dir;           // empty = no files written

    // optional overrides, mostly for large-config CI presets
    std::optional<std::vector<int>> trunk_override;
    std::optional<int> minibatch;
    std::optional<double> eps0, eps_decay, eps_min;
    bool no_replay = false;
    bool reward_clip = false;
    std::optional<int> pretrain_epochs;
    std::optional<double> pretrain_tol;
    std::optional<int> tabular_episodes;
};

struct SeedMetrics {
    uint64_t seed = 0;
    double avg_steps = 0.0;
    int min_steps = 0;
    double trailing100_avg = 0.0;
    double wall_ms_per_episode = 0.0;
};

struct MaskStats {
    int retained = 0;
    int total = 0;
    double reduction_pct = 0.0;
};

struct MetricsSummary {
    double avg_steps = 0.0;        // over all episodes of all seeds
    int min_steps = 0;
    double trailing100_avg = 0.0;  // mean of per-seed trailing-100 means
    double wall_ms_per_episode = 0.0;
    std::vector<SeedMetrics> per_seed;
    std::optional<MaskStats> mask_stats;
};

struct SeedRun {
    uint64_t seed = 0;
    RunRecord record;
    PretrainReport pretrain;
    bool qmatrix_policy_optimal = true;
};

struct ExperimentResult {
    MetricsSummary summary;
    std::vector<SeedRun> runs;
};

inline int worker_count(size_t jobs) {
    int cap = static_cast<int>(std::thread::hardware_concurrency());
    if (cap <= 0) cap = 1;
    if (const char* env = std::getenv("EVACSIM_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) cap = v;
    }
    return static_cast<int>(std::min<size_t>(cap, jobs));
}

/// Run `jobs` indexed tasks across worker threads; results land by index, so
/// output order is independent of scheduling.
template <typename Fn>
inline void parallel_for(size_t jobs, Fn&& fn) {
    const int workers = worker_count(jobs);
    if (workers <= 1) {
        for (size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline QLearnHyper tabular_hyper_for(const BuildingGraph& g, const ExperimentSpec& spec) {
    QLearnHyper h;
    if (g.n > 30) {  // large configs explore longer with a slower epsilon decay
        h.epsilon_decay = 0.999;
        h.epsilon_min = 0.1;
        h.episodes = 3000;
    }
    if (spec.tabular_episodes) h.episodes = *spec.tabular_episodes;
    return h;
}

inline AgentConfig agent_config_for(const BuildingGraph& g, const ExperimentSpec& spec) {
    AgentConfig cfg;
    cfg.variant = spec.variant;
    cfg.episodes = spec.episodes;
    cfg.trunk = spec.trunk_override
                    ? *spec.trunk_override
                    : (g.n > 30 ? std::vector<int>{512, 1024, 1024, 1024}
                                : std::vector<int>{128, 256, 256, 256});
    if (spec.pretrain) {
        // a pretrained net replaces the exploration burn-in
        cfg.eps0 = 0.15;
        cfg.eps_decay = 0.99;
    }
    if (spec.eps0) cfg.eps0 = *spec.eps0;
    if (spec.eps_decay) cfg.eps_decay = *spec.eps_decay;
    if (spec.eps_min) cfg.eps_min = *spec.eps_min;
    if (spec.minibatch) cfg.minibatch = *spec.minibatch;
    if (spec.pretrain_epochs) cfg.pretrain_epochs = *spec.pretrain_epochs;
    if (spec.pretrain_tol) cfg.pretrain_tol = *spec.pretrain_tol;
    cfg.use_replay = !spec.no_replay;
    cfg.reward_clip = spec.reward_clip;
    return cfg;
}

inline int effective_k(const BuildingGraph& g, const ExperimentSpec& spec) {
    if (!spec.k) return 0;
    return *spec.k == 0 ? max_degree(g) : *spec.k;
}

/// Train one seed end to end: tabular pretraining -> noise offset -> network
/// overfit (when enabled), optional mask, then environment training.
inline SeedRun run_seed(const BuildingGraph& g, const ExperimentSpec& spec, uint64_t seed) {
    SeedRun out;
    out.seed = seed;
    AgentConfig cfg = agent_config_for(g, spec);
    DqnAgent agent(g, cfg, seed);
    if (spec.pretrain) {
        const auto tq = train_qmatrix(g, tabular_hyper_for(g, spec), split_seed(seed, 0xD0));
        out.qmatrix_policy_optimal = tq.policy_matches_bfs;
        out.pretrain = agent.pretrain(apply_noise(tq.q, spec.sigma));
    }
    if (spec.k) agent.set_mask(build_importance(g, effective_k(g, spec)));
    EvacEnv env(g);
    if (spec.p_override) env.set_uncertainty(*spec.p_override);
    out.record = agent.train(env, seed);
    return out;
}

inline MetricsSummary summarize(const std::vector<SeedRun>& runs) {
    MetricsSummary s;
    s.min_steps = std::numeric_limits<int>::max();
    double total_steps = 0, total_eps = 0, total_wall = 0, trailing_sum = 0;
    for (const auto& r : runs) {
        SeedMetrics m;
        m.seed = r.seed;
        m.avg_steps = mean_steps(r.record);
        m.min_steps = min_steps(r.record);
        m.trailing100_avg = trailing_mean_steps(r.record, 100);
        double wall = 0;
        for (const auto& e : r.record.episodes) {
            total_steps += e.steps;
            wall += e.wall_ms;
        }
        m.wall_ms_per_episode =
            r.record.episodes.empty() ? 0.0 : wall / r.record.episodes.size();
        total_eps += static_cast<double>(r.record.episodes.size());
        total_wall += wall;
        trailing_sum += m.trailing100_avg;
        s.min_steps = std::min(s.min_steps, m.min_steps);
        s.per_seed.push_back(m);
    }
    if (total_eps > 0) {
        s.avg_steps = total_steps / total_eps;
        s.wall_ms_per_episode = total_wall / total_eps;
    }
    if (!runs.empty()) s.trailing100_avg = trailing_sum / runs.size();
    if (s.min_steps == std::numeric_limits<int>::max()) s.min_steps = 0;
    return s;
}

inline void write_run_csv(const RunRecord& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open run output " + path);
    out << "episode,time_steps,total_reward,epsilon,wall_ms\n";
    for (size_t i = 0; i < rec.episodes.size(); ++i) {
        const auto& e = rec.episodes[i];
        out << i << ',' << e.steps << ',' << detail::fmt_double(e.total_reward) << ','
            << detail::fmt_double(e.epsilon) << ',' << e.wall_ms << '\n';
    }
    if (rec.diverged) out << "# FAILED: " << rec.note << '\n';
}

inline void write_summary_csv(const MetricsSummary& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open summary output " + path);
    out << "seed,avg_steps,min_steps,trailing100_avg,wall_ms_per_episode\n";
    for (const auto& m : s.per_seed)
        out << m.seed << ',' << detail::fmt_double(m.avg_steps) << ',' << m.min_steps << ','
            << detail::fmt_double(m.trailing100_avg) << ','
            << detail::fmt_double(m.wall_ms_per_episode) << '\n';
    out << "all," << detail::fmt_double(s.avg_steps) << ',' << s.min_steps << ','
        << detail::fmt_double(s.trailing100_avg) << ','
        << detail::fmt_double(s.wall_ms_per_episode) << '\n';
    if (s.mask_stats) {
        char pct[32];
        std::snprintf(pct, sizeof(pct), "%.1f", s.mask_stats->reduction_pct);
        out << "mask," << s.mask_stats->retained << ',' << s.mask_stats->total << ',' << pct
            << ",\n";
    }
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.seeds.empty()) throw std::invalid_argument("experiment: at least one seed required");
    if (spec.episodes < 1) throw std::invalid_argument("experiment: episodes must be >= 1");
    const BuildingGraph g = load_config_file(spec.config_path);

    ExperimentResult res;
    res.runs.resize(spec.seeds.size());
    parallel_for(spec.seeds.size(),
                 [&](size_t i) { res.runs[i] = run_seed(g, spec, spec.seeds[i]); });
    res.summary = summarize(res.runs);
    if (spec.k) {
        const auto ai = build_importance(g, effective_k(g, spec));
        res.summary.mask_stats =
            MaskStats{ai.retained(), static_cast<int>(ai.mask.size()), ai.reduction_pct()};
    }

    if (!spec.out_dir.empty()) {
        std::filesystem::create_directories(spec.out_dir);
        for (const auto& r : res.runs)
            write_run_csv(r.record,
                          spec.out_dir + "/episodes_seed" + std::to_string(r.seed) + ".csv");
        write_summary_csv(res.summary, spec.out_dir + "/summary.csv");
    }
    return res;
}

struct CompareResult {
    std::vector<std::string> labels;                  // plain, qmp, random
    std::vector<std::vector<SeedRun>> runs;           // [label][seed]
    std::vector<MetricsSummary> summaries;            // per label
};

/// Run plain vs pretrained vs random under identical seeds and emit aligned
/// per-episode columns.
inline CompareResult compare(const ExperimentSpec& base) {
    const BuildingGraph g = load_config_file(base.config_path);
    CompareResult res;
    const std::string backbone = variant_name(base.variant);
    res.labels = {backbone, std::string("qmp-") + backbone, "random"};

    struct Job {
        int label = 0;
        uint64_t seed = 0;
    };
    std::vector<Job> jobs;
    for (int l = 0; l < 3; ++l)
        for (uint64_t s : base.seeds) jobs.push_back({l, s});
    res.runs.assign(3, std::vector<SeedRun>(base.seeds.size()));

    parallel_for(jobs.size(), [&](size_t i) {
        const Job j = jobs[i];
        const size_t seed_idx = i % base.seeds.size();
        if (j.label == 2) {
            EvacEnv env(g);
            if (base.p_override) env.set_uncertainty(*base.p_override);
            SeedRun r;
            r.seed = j.seed;
            r.record = random_agent(env, base.episodes, 1000, j.seed);
            res.runs[2][seed_idx] = std::move(r);
        } else {
            ExperimentSpec spec = base;
            spec.pretrain = (j.label == 1);
            spec.out_dir.clear();
            res.runs[j.label][seed_idx] = run_seed(g, spec, j.seed);
        }
    });
    for (int l = 0; l < 3; ++l) res.summaries.push_back(summarize(res.runs[l]));

    if (!base.out_dir.empty()) {
        std::filesystem::create_directories(base.out_dir);
        std::ofstream out(base.out_dir + "/compare.csv");
        if (!out) throw std::runtime_error("cannot open compare output");
        out << "episode";
        for (int l = 0; l < 3; ++l)
            for (uint64_t s : base.seeds) out << ',' << res.labels[l] << "_s" << s;
        out << '\n';
        for (int ep = 0; ep < base.episodes; ++ep) {
            out << ep;
            for (int l = 0; l < 3; ++l)
                for (size_t si = 0; si < base.seeds.size(); ++si) {
                    const auto& eps = res.runs[l][si].record.episodes;
                    out << ',';
                    if (ep < static_cast<int>(eps.size())) out << eps[ep].steps;
                }
            out << '\n';
        }
        for (int l = 0; l < 3; ++l)
            write_summary_csv(res.summaries[l],
                              base.out_dir + "/summary_" + res.labels[l] + ".csv");
    }
    return res;
}

/// Parse an episodes CSV back into stats (wall clock included); used to check
/// that summaries are recomputable from the emitted artifacts.
inline std::vector<EpisodeStat> read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run csv " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<EpisodeStat> out;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        EpisodeStat e;
        std::getline(ss, cell, ',');  // episode index
        std::getline(ss, cell, ',');
        e.steps = std::atoi(cell.c_str());
        std::getline(ss, cell, ',');
        e.total_reward = std::strtod(cell.c_str(), nullptr);
        std::getline(ss, cell, ',');
        e.epsilon = std::strtod(cell.c_str(), nullptr);
        std::getline(ss, cell, ',');
        e.wall_ms = std::atol(cell.c_str());
        out.push_back(e);
    }
    return out;
}

}  // namespace evacsim
