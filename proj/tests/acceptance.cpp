// Acceptance gate: runs every criterion end to end and prints one PASS/FAIL
// line each. Exit code = number of failed criteria.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "evacsim/agents.hpp"
#include "evacsim/harness.hpp"
#include "oracles.hpp"

using namespace evacsim;

namespace {

struct Gate {
    int id;
    bool pass;
    std::string name;
    std::string detail;
    double secs;
};

std::vector<Gate> gates;

double now_secs() {
    using clock = std::chrono::steady_clock;
    static const auto t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

void report(int id, bool pass, const std::string& name, const std::string& detail, double secs) {
    gates.push_back({id, pass, name, detail, secs});
    std::printf("[%s] %2d  %-38s %s (%.1fs)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), secs);
    std::fflush(stdout);
}

std::string cfg(const char* name) {
    return std::string(EVACSIM_CONFIG_DIR) + "/" + name;
}

// ---------------------------------------------------------------- criterion 1
void criterion_shortest_path_oracle() {
    const double t0 = now_secs();
    bool pass = true;
    std::string detail;
    int graphs = 0, rooms_checked = 0;

    auto check_graph = [&](const BuildingGraph& g, const std::string& label, uint64_t seed) {
        QLearnHyper h;
        const auto res = train_qmatrix(g, h, seed);
        ++graphs;
        for (int room = 0; room < g.n && pass; ++room) {
            if (g.is_exit(room)) continue;
            const auto p = greedy_path(res.q, g, room);
            const int want = oracle::bfs_distance(g, room);
            ++rooms_checked;
            if (!p.reached_exit || static_cast<int>(p.rooms.size()) - 1 != want) {
                pass = false;
                detail = label + " room " + std::to_string(room) + ": greedy " +
                         (p.reached_exit ? std::to_string(p.rooms.size() - 1) : "cycle") +
                         " vs bfs " + std::to_string(want);
            }
        }
    };

    check_graph(load_config_file(cfg("fig2.json")), "fig2", 7);
    check_graph(load_config_file(cfg("fig12.json")), "fig12", 7);
    for (unsigned s = 0; s < 20 && pass; ++s) {
        const int n = 5 + static_cast<int>((s * 7) % 26);
        check_graph(oracle::random_connected_graph(n, 100 + s), "rand" + std::to_string(s),
                    1000 + s);
    }
    const double secs = now_secs() - t0;
    if (secs >= 30.0) {
        pass = false;
        detail += " exceeded 30s budget";
    }
    if (pass)
        detail = std::to_string(graphs) + " graphs, " + std::to_string(rooms_checked) +
                 " rooms, greedy = bfs everywhere";
    report(1, pass, "shortest-path oracle equivalence", detail, secs);
}

// ---------------------------------------------------------------- criterion 2
void criterion_bellman_fixed_point() {
    const double t0 = now_secs();
    const auto g = load_config_file(cfg("fig2.json"));
    QLearnHyper h;
    h.episodes = 2000;
    const auto res = train_qmatrix(g, h, 7);
    const auto vi = oracle::value_iteration(g, h.gamma);
    bool pass = true;
    double worst = 0.0;
    for (int i = 0; i < g.n; ++i) {
        if (g.is_exit(i)) continue;
        for (int j = 0; j < g.n; ++j) {
            if (!g.adj(i, j)) continue;
            const double err = std::abs(res.q.at(i, j) - vi.at(i, j));
            worst = std::max(worst, err);
            if (err > 1e-4) pass = false;
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |Q - VI| at legal pairs = %.2e (tol 1e-4)", worst);
    report(2, pass, "bellman fixed point vs value iteration", buf, now_secs() - t0);
}

// ---------------------------------------------------------------- criterion 3
void criterion_minimum_episode_oracle() {
    const double t0 = now_secs();
    const auto g = load_config_file(cfg("fig2.json"));
    const long weighted = oracle::occupancy_weighted_distance(g);
    bool pass = weighted == 60;
    std::string detail = "occupancy-weighted bfs = " + std::to_string(weighted);

    if (pass) {
        QLearnHyper h;
        h.episodes = 2000;
        const auto tq = train_qmatrix(g, h, 7);
        AgentConfig ac;
        ac.pretrain_tol = 1e-4;
        DqnAgent agent(g, ac, 7);
        agent.pretrain(tq.q);  // sigma = 0: the perfect matrix
        const auto ranking = agent.online().forward(agent.encode(std::vector<int>(g.n, 0)));
        EvacEnv env(g);
        env.set_uncertainty(0.0);
        env.reset(3);
        const int steps = rollout_static_ranking(env, ranking, 1000);
        pass = steps == 60 && env.terminal();
        detail += "; perfect-Q rollout = " + std::to_string(steps) + " steps";
    }
    report(3, pass, "minimum-episode oracle (60 steps)", detail, now_secs() - t0);
}

// ---------------------------------------------------------------- criterion 4
void criterion_action_reduction() {
    const double t0 = now_secs();
    const auto g = load_config_file(cfg("uia91.json"));
    const auto ai = build_importance(g, 9);
    const double secs = now_secs() - t0;
    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.1f", ai.reduction_pct());
    const bool pass = max_degree(g) == 9 && ai.retained() == 819 &&
                      static_cast<int>(ai.mask.size()) == 8281 && std::string(pct) == "90.1" &&
                      secs < 1.0;
    report(4, pass, "action reduction 8281 -> 819 (90.1%)",
           "retained " + std::to_string(ai.retained()) + " of 8281, " + pct + "% reduction",
           secs);
}

// ---------------------------------------------------------------- criterion 5
ExperimentResult g_c5_noisy;  // reused by criterion 7

void criterion_qmp_dueling_fig2() {
    const double t0 = now_secs();
    ExperimentSpec spec;
    spec.config_path = cfg("fig2.json");
    spec.variant = AgentVariant::Dueling;
    spec.pretrain = true;
    spec.seeds = {101, 102, 103};
    spec.episodes = 500;

    auto p0 = spec;
    p0.p_override = 0.0;
    const auto det = run_experiment(p0);
    int det_hits = 0;
    std::string detail = "p=0 min:";
    for (const auto& m : det.summary.per_seed) {
        if (m.min_steps == 60) ++det_hits;
        detail += " " + std::to_string(m.min_steps);
    }

    g_c5_noisy = run_experiment(spec);  // config default p = 0.1
    int noisy_hits = 0;
    detail += "; p=0.1 (min, trail100):";
    for (const auto& m : g_c5_noisy.summary.per_seed) {
        if (m.min_steps <= 62 && m.trailing100_avg <= 100.0) ++noisy_hits;
        char buf[48];
        std::snprintf(buf, sizeof(buf), " (%d, %.1f)", m.min_steps, m.trailing100_avg);
        detail += buf;
    }
    const double secs = now_secs() - t0;
    bool pass = det_hits >= 2 && noisy_hits >= 2;
    if (secs > 600.0) {
        pass = false;
        detail += " exceeded 10min budget";
    }
    report(5, pass, "qmp-dueling fig2 (min 60; noisy <=62/<=100)", detail, secs);
}

// ---------------------------------------------------------------- criterion 6
void criterion_pretraining_direction() {
    const double t0 = now_secs();
    // direction check: pretrained and plain agents share seeds; plain keeps the
    // exploratory schedule it needs, the pretrained nets start exploiting
    const std::vector<uint64_t> seeds = {201, 202, 203};
    const int episodes = 60;
    bool pass = true;
    std::string detail;
    for (AgentVariant backbone : {AgentVariant::Dqn, AgentVariant::Dueling}) {
        ExperimentSpec spec;
        spec.config_path = cfg("fig2.json");
        spec.variant = backbone;
        spec.seeds = seeds;
        spec.episodes = episodes;
        spec.out_dir.clear();
        spec.pretrain = false;
        const auto plain = run_experiment(spec);
        spec.pretrain = true;
        const auto qmp = run_experiment(spec);
        for (size_t i = 0; i < seeds.size(); ++i) {
            const double pm = plain.summary.per_seed[i].avg_steps;
            const double qm = qmp.summary.per_seed[i].avg_steps;
            if (!(qm < pm)) pass = false;
            char buf[96];
            std::snprintf(buf, sizeof(buf), "%s s%llu: qmp %.0f vs plain %.0f; ",
                          variant_name(backbone),
                          static_cast<unsigned long long>(seeds[i]), qm, pm);
            detail += buf;
        }
    }
    report(6, pass, "pretraining direction (qmp < plain)", detail, now_secs() - t0);
}

// ---------------------------------------------------------------- criterion 7
void criterion_random_baseline() {
    const double t0 = now_secs();
    const auto g = load_config_file(cfg("fig2.json"));
    EvacEnv env(g);
    const auto rec = random_agent(env, 100, 1000, 55);
    const double rand_mean = mean_steps(rec);
    const double qmp_mean = g_c5_noisy.summary.avg_steps;
    const bool pass = rand_mean >= 500.0 && qmp_mean > 0.0 && rand_mean >= 5.0 * qmp_mean;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "random mean %.1f (>=500), qmp-dueling mean %.1f, ratio %.1fx",
                  rand_mean, qmp_mean, qmp_mean > 0 ? rand_mean / qmp_mean : 0.0);
    report(7, pass, "random baseline direction (>=5x)", buf, now_secs() - t0);
}

// ---------------------------------------------------------------- criterion 8
void criterion_multi_fire_fig12() {
    const double t0 = now_secs();
    ExperimentSpec spec;
    spec.config_path = cfg("fig12.json");
    spec.variant = AgentVariant::Dueling;
    spec.pretrain = true;
    spec.seeds = {301, 302, 303};
    spec.episodes = 500;
    const auto res = run_experiment(spec);
    int hits = 0;
    std::string detail = "(min, trail100):";
    for (const auto& m : res.summary.per_seed) {
        const bool band = std::abs(m.trailing100_avg - 119.244) <= 0.15 * 119.244;
        if (m.min_steps <= 115 && band) ++hits;
        char buf[48];
        std::snprintf(buf, sizeof(buf), " (%d, %.1f)", m.min_steps, m.trailing100_avg);
        detail += buf;
    }
    const double secs = now_secs() - t0;
    bool pass = hits >= 2;
    if (secs > 1200.0) {
        pass = false;
        detail += " exceeded 20min budget";
    }
    report(8, pass, "multi-fire fig12 (trail100 ~119.244, min <=115)", detail, secs);
}

// ---------------------------------------------------------------- criterion 9
void criterion_numerical_core() {
    const double t0 = now_secs();
    bool pass = true;
    std::string detail;
    double worst = 0.0;
    Rng arch_rng(4242);
    const double h = 1e-5;
    for (int trial = 0; trial < 10; ++trial) {
        const int input = 2 + uniform_int(arch_rng, 0, 4);
        const int output = 2 + uniform_int(arch_rng, 0, 5);
        std::vector<int> trunk;
        for (int l = uniform_int(arch_rng, 1, 2); l > 0; --l)
            trunk.push_back(4 + uniform_int(arch_rng, 0, 8));
        const auto mode = trial % 3 == 0   ? Network::Dueling::None
                          : trial % 3 == 1 ? Network::Dueling::Mean
                                           : Network::Dueling::Max;
        Network net(input, trunk, output, mode, 9000 + trial);
        const int B = 2;
        Mat X(B, input);
        for (double& v : X.a) v = uniform01(arch_rng) * 2 - 1;
        std::vector<int> actions = {uniform_int(arch_rng, 0, output - 1),
                                    uniform_int(arch_rng, 0, output - 1)};
        std::vector<double> targets = {uniform01(arch_rng) * 2 - 1, uniform01(arch_rng) * 2 - 1};
        auto grads = make_grads(net);
        Network::Cache c;
        masked_loss(net, X, actions, targets, &grads, c);
        for (size_t t = 0; t < net.params().size(); ++t) {
            auto& p = net.params()[t];
            for (size_t i = 0; i < p.a.size(); ++i) {
                const double keep = p.a[i];
                Network::Cache cc;
                p.a[i] = keep + h;
                const double up = masked_loss(net, X, actions, targets, nullptr, cc);
                p.a[i] = keep - h;
                const double dn = masked_loss(net, X, actions, targets, nullptr, cc);
                p.a[i] = keep;
                const double numeric = (up - dn) / (2 * h);
                const double a = grads[t].a[i];
                const double err =
                    std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
                worst = std::max(worst, err);
            }
        }
    }
    if (worst >= 1e-4) {
        pass = false;
        detail = "gradient check failed";
    }

    // dueling identities
    double worst_mean_dev = 0.0;
    bool max_identity = true;
    for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        Network mean_net(5, {12, 9}, 7, Network::Dueling::Mean, seed);
        Network max_net(5, {12, 9}, 7, Network::Dueling::Max, seed);
        Mat X(3, 5);
        Rng rng(seed);
        for (double& v : X.a) v = uniform01(rng) * 2 - 1;
        Network::Cache c;
        Mat Q;
        mean_net.forward_batch(X, Q, c);
        for (int r = 0; r < 3; ++r) {
            double s = 0.0;
            for (int j = 0; j < 7; ++j) s += Q.at(r, j) - c.value.at(r, 0);
            worst_mean_dev = std::max(worst_mean_dev, std::abs(s / 7.0));
        }
        max_net.forward_batch(X, Q, c);
        for (int r = 0; r < 3; ++r) {
            int am = 0;
            for (int j = 1; j < 7; ++j)
                if (c.adv.at(r, j) > c.adv.at(r, am)) am = j;
            if (Q.at(r, am) != c.value.at(r, 0)) max_identity = false;
        }
    }
    if (worst_mean_dev > 1e-12 || !max_identity) pass = false;
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "grad rel err %.2e (tol 1e-4); mean-mode dev %.1e; max-mode exact %s", worst,
                  worst_mean_dev, max_identity ? "yes" : "no");
    report(9, pass, "numerical core (gradcheck + dueling)", detail.empty() ? buf : detail,
           now_secs() - t0);
}

// --------------------------------------------------------------- criterion 10
void criterion_qmatrix_overfit() {
    const double t0 = now_secs();
    const auto g = load_config_file(cfg("fig2.json"));
    QLearnHyper h;
    h.episodes = 2000;
    const auto tq = train_qmatrix(g, h, 13);
    const auto noisy = apply_noise(tq.q, 10.0);
    AgentConfig ac;  // table-1 trunk
    DqnAgent agent(g, ac, 13);
    const auto rep = agent.pretrain(noisy);

    const auto out = agent.online().forward(agent.encode(std::vector<int>(g.n, 0)));
    int agree = 0;
    for (int src = 0; src < g.n; ++src) {
        int best = src;
        for (int d = 1; d < g.n; ++d)
            if (out[d * g.n + src] > out[best]) best = d * g.n + src;
        double row_max = noisy.at(src, 0);
        for (int d = 1; d < g.n; ++d) row_max = std::max(row_max, noisy.at(src, d));
        // agreement: the chosen destination is a within-tolerance row maximum
        if (noisy.at(src, best / g.n) >= row_max - 1e-3) ++agree;
    }
    const bool pass = rep.final_loss < 1e-3 && agree == g.n;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "mse %.2e (tol 1e-3), argmax agreement %d/%d, %d epochs",
                  rep.final_loss, agree, g.n, rep.epochs_run);
    report(10, pass, "q-matrix overfit + argmax agreement", buf, now_secs() - t0);
}

// --------------------------------------------------------------- criterion 11
void criterion_large_building_property() {
    const double t0 = now_secs();
    ExperimentSpec spec;
    spec.config_path = cfg("uia91.json");
    spec.variant = AgentVariant::Dueling;
    spec.pretrain = true;
    spec.k = 0;  // auto -> max degree 9
    spec.seeds = {401};
    spec.episodes = 500;
    spec.p_override = 0.0;
    spec.trunk_override = std::vector<int>{128, 256};  // ci-scale network
    spec.minibatch = 8;
    spec.eps0 = 0.05;
    spec.pretrain_tol = 1e-2;
    const auto res = run_experiment(spec);

    const auto& rec = res.runs[0].record;
    const double trail200 = trailing_mean_steps(rec, 200);
    const int best = min_steps(rec);
    const bool pass = !rec.diverged && best > 0 && trail200 <= 1.05 * best &&
                      res.summary.mask_stats && res.summary.mask_stats->retained == 819;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "trail200 %.1f vs min %d (within 5%%: %s); mask 819/8281; "
                  "real UiA floor plan, wall-clock figures, and non-DQN baselines stay out of scope",
                  trail200, best, trail200 <= 1.05 * best ? "yes" : "no");
    report(11, pass, "large-building self-consistency (uia91)", buf, now_secs() - t0);
}

}  // namespace

int main() {
    std::printf("evacsim acceptance suite\n");
    criterion_shortest_path_oracle();
    criterion_bellman_fixed_point();
    criterion_minimum_episode_oracle();
    criterion_action_reduction();
    criterion_qmp_dueling_fig2();
    criterion_pretraining_direction();
    criterion_random_baseline();
    criterion_multi_fire_fig12();
    criterion_numerical_core();
    criterion_qmatrix_overfit();
    criterion_large_building_property();

    int fails = 0;
    for (const auto& g : gates)
        if (!g.pass) ++fails;
    std::printf("%d/%zu criteria passed\n", static_cast<int>(gates.size()) - fails, gates.size());
    return fails;
}
