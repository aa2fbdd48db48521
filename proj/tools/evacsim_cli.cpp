// evacsim command line: validate configs, run the pretraining pipeline, build
// action masks, train agents, and emit CSV experiment artifacts.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evacsim/agents.hpp"
#include "evacsim/harness.hpp"

using namespace evacsim;

namespace {

struct CommonOpts {
    std::string config;
    std::string agent = "dueling";
    bool pretrain = true;
    double sigma = 10.0;
    int k = -1;  // -1 = mask off, 0 = auto
    std::vector<uint64_t> seeds = {1};
    int episodes = 500;
    double p_override = -1.0;
    std::string out = "out";
    std::vector<int> trunk;
    int minibatch = 0;
    double eps0 = -1.0;
    bool no_replay = false;
    bool reward_clip = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_agent = true) {
    cmd->add_option("--config", o.config, "building config JSON")->required();
    if (needs_agent)
        cmd->add_option("--agent", o.agent, "dqn|ddqn|dueling")
            ->check(CLI::IsMember({"dqn", "ddqn", "dueling"}));
    cmd->add_flag("--pretrain,!--no-pretrain", o.pretrain, "Q-matrix pretraining (default on)");
    cmd->add_option("--sigma", o.sigma, "Q-matrix noise offset");
    cmd->add_option("--k", o.k, "action-importance k (0 = max graph degree)");
    cmd->add_option("--seed", o.seeds, "seed(s); repeat for multiple");
    cmd->add_option("--episodes", o.episodes, "training episodes");
    cmd->add_option("--p-override", o.p_override, "override config uncertainty p");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--trunk", o.trunk, "hidden layer sizes override");
    cmd->add_option("--minibatch", o.minibatch, "replay minibatch size");
    cmd->add_option("--eps0", o.eps0, "initial epsilon override");
    cmd->add_flag("--no-replay", o.no_replay, "update on the live transition only");
    cmd->add_flag("--reward-clip", o.reward_clip, "clip rewards to [-100,10] for training");
}

AgentVariant parse_variant(const std::string& s) {
    if (s == "dqn") return AgentVariant::Dqn;
    if (s == "ddqn") return AgentVariant::Ddqn;
    return AgentVariant::Dueling;
}

ExperimentSpec to_spec(const CommonOpts& o) {
    ExperimentSpec spec;
    spec.config_path = o.config;
    spec.variant = parse_variant(o.agent);
    spec.pretrain = o.pretrain;
    spec.sigma = o.sigma;
    if (o.k >= 0) spec.k = o.k;
    spec.seeds = o.seeds;
    spec.episodes = o.episodes;
    if (o.p_override >= 0.0) spec.p_override = o.p_override;
    spec.out_dir = o.out;
    if (!o.trunk.empty()) spec.trunk_override = o.trunk;
    if (o.minibatch > 0) spec.minibatch = o.minibatch;
    if (o.eps0 >= 0.0) spec.eps0 = o.eps0;
    spec.no_replay = o.no_replay;
    spec.reward_clip = o.reward_clip;
    return spec;
}

void print_summary(const MetricsSummary& s) {
    std::printf("seed        avg_steps   min   trailing100   wall_ms/ep\n");
    for (const auto& m : s.per_seed)
        std::printf("%-10llu  %9.3f  %4d  %11.3f  %10.2f\n",
                    static_cast<unsigned long long>(m.seed), m.avg_steps, m.min_steps,
                    m.trailing100_avg, m.wall_ms_per_episode);
    std::printf("all         %9.3f  %4d  %11.3f  %10.2f\n", s.avg_steps, s.min_steps,
                s.trailing100_avg, s.wall_ms_per_episode);
    if (s.mask_stats)
        std::printf("mask: %d of %d actions retained (%.1f%% reduction)\n",
                    s.mask_stats->retained, s.mask_stats->total, s.mask_stats->reduction_pct);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evacsim: graph fire-evacuation RL experiments"};
    app.require_subcommand(1);

    // validate-config
    std::string vc_config;
    auto* vc = app.add_subcommand("validate-config", "parse and validate a building config");
    vc->add_option("--config", vc_config, "building config JSON")->required();

    // pretrain
    CommonOpts po;
    auto* pt = app.add_subcommand("pretrain", "tabular Q-learning; emits the Q-matrix CSV");
    pt->add_option("--config", po.config, "building config JSON")->required();
    pt->add_option("--seed", po.seeds, "seed");
    pt->add_option("--episodes", po.episodes, "Q-learning episodes")->capture_default_str();
    pt->add_option("--sigma", po.sigma, "also emit the sigma-offset matrix");
    pt->add_option("--out", po.out, "output directory");

    // build-mask
    CommonOpts mo;
    auto* bm = app.add_subcommand("build-mask", "one-step-simulation action importance mask");
    bm->add_option("--config", mo.config, "building config JSON")->required();
    bm->add_option("--k", mo.k, "retained actions per room (0 = max graph degree)");
    bm->add_option("--out", mo.out, "output directory");

    // train
    CommonOpts to;
    auto* tr = app.add_subcommand("train", "train an agent; emits per-episode and summary CSVs");
    add_common(tr, to);
    std::string checkpoint_out, trajectory_out;
    tr->add_option("--checkpoint-out", checkpoint_out, "save the trained network");
    tr->add_option("--trajectory-out", trajectory_out, "dump a greedy rollout trajectory CSV");

    // compare
    CommonOpts co;
    auto* cp = app.add_subcommand("compare", "plain vs pretrained vs random under shared seeds");
    add_common(cp, co);

    // random-baseline
    CommonOpts ro;
    auto* rb = app.add_subcommand("random-baseline", "uniform random agent");
    rb->add_option("--config", ro.config, "building config JSON")->required();
    rb->add_option("--seed", ro.seeds, "seed(s)");
    rb->add_option("--episodes", ro.episodes, "episodes")->capture_default_str();
    rb->add_option("--p-override", ro.p_override, "override config uncertainty p");
    rb->add_option("--out", ro.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (vc->parsed()) {
            const auto g = load_config_file(vc_config);
            std::printf("valid: %d rooms, %zu exits, %zu fires, max degree %d\n", g.n,
                        g.exits.size(), g.fires.size(), max_degree(g));
            return 0;
        }
        if (pt->parsed()) {
            const auto g = load_config_file(po.config);
            QLearnHyper h;
            h.episodes = po.episodes;
            if (g.n > 30) {
                h.epsilon_decay = 0.999;
                h.epsilon_min = 0.1;
            }
            const auto res = train_qmatrix(g, h, po.seeds.empty() ? 1 : po.seeds[0]);
            std::filesystem::create_directories(po.out);
            write_qmatrix_csv(res.q, po.out + "/qmatrix.csv");
            write_qmatrix_csv(apply_noise(res.q, po.sigma), po.out + "/qmatrix_noisy.csv");
            std::printf("episodes=%d early_stop=%d policy_matches_bfs=%d -> %s/qmatrix.csv\n",
                        res.episodes_run, res.early_stopped ? 1 : 0,
                        res.policy_matches_bfs ? 1 : 0, po.out.c_str());
            if (!res.policy_matches_bfs)
                std::fprintf(stderr, "warning: greedy policy differs from BFS distances\n");
            return 0;
        }
        if (bm->parsed()) {
            const auto g = load_config_file(mo.config);
            const int k = mo.k <= 0 ? max_degree(g) : mo.k;
            const auto ai = build_importance(g, k);
            std::filesystem::create_directories(mo.out);
            write_mask_csv(ai, mo.out + "/mask.csv");
            std::printf("mask: k=%d retained=%d of %d (%.1f%% reduction) -> %s/mask.csv\n", k,
                        ai.retained(), static_cast<int>(ai.mask.size()), ai.reduction_pct(),
                        mo.out.c_str());
            return 0;
        }
        if (tr->parsed()) {
            const auto spec = to_spec(to);
            const auto res = run_experiment(spec);
            print_summary(res.summary);
            for (const auto& r : res.runs)
                if (r.record.diverged)
                    std::fprintf(stderr, "seed %llu diverged: %s\n",
                                 static_cast<unsigned long long>(r.seed), r.record.note.c_str());
            if (!checkpoint_out.empty() || !trajectory_out.empty()) {
                // retrain the first seed in-process to capture net/trajectory
                const auto g = load_config_file(spec.config_path);
                AgentConfig cfg = agent_config_for(g, spec);
                DqnAgent agent(g, cfg, spec.seeds[0]);
                if (spec.pretrain) {
                    const auto tq =
                        train_qmatrix(g, tabular_hyper_for(g, spec), split_seed(spec.seeds[0], 0xD0));
                    agent.pretrain(apply_noise(tq.q, spec.sigma));
                }
                if (spec.k) agent.set_mask(build_importance(g, effective_k(g, spec)));
                EvacEnv env(g);
                if (spec.p_override) env.set_uncertainty(*spec.p_override);
                agent.train(env, spec.seeds[0]);
                if (!checkpoint_out.empty()) save_network(agent.online(), checkpoint_out);
                if (!trajectory_out.empty()) {
                    env.reset(split_seed(spec.seeds[0], 0xE0));
                    std::vector<TrajectoryRow> rows;
                    Rng rng(split_seed(spec.seeds[0], 0xE1));
                    std::vector<double> q;
                    while (!env.terminal() && rows.size() < 10000) {
                        agent.q_values(agent.encode(env.render().occupancy), q);
                        int best = 0;
                        for (size_t j = 1; j < q.size(); ++j)
                            if (q[j] > q[best]) best = static_cast<int>(j);
                        const auto out = env.step(best);
                        rows.push_back({out.t, best, out.source, out.dest, out.branch, out.reward,
                                        out.terminal});
                    }
                    write_trajectory_csv(rows, trajectory_out);
                }
            }
            return 0;
        }
        if (cp->parsed()) {
            auto spec = to_spec(co);
            const auto res = compare(spec);
            for (size_t l = 0; l < res.labels.size(); ++l) {
                std::printf("== %s ==\n", res.labels[l].c_str());
                print_summary(res.summaries[l]);
            }
            return 0;
        }
        if (rb->parsed()) {
            const auto g = load_config_file(ro.config);
            EvacEnv env(g);
            if (ro.p_override >= 0.0) env.set_uncertainty(ro.p_override);
            std::vector<SeedRun> runs;
            for (uint64_t s : ro.seeds) {
                SeedRun r;
                r.seed = s;
                r.record = random_agent(env, ro.episodes, 1000, s);
                runs.push_back(std::move(r));
            }
            const auto summary = summarize(runs);
            print_summary(summary);
            if (!ro.out.empty()) {
                std::filesystem::create_directories(ro.out);
                for (const auto& r : runs)
                    write_run_csv(r.record,
                                  ro.out + "/episodes_random_seed" + std::to_string(r.seed) + ".csv");
                write_summary_csv(summary, ro.out + "/summary_random.csv");
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
