#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "evacsim/action_importance.hpp"
#include "evacsim/rng.hpp"
#include "oracles.hpp"

using namespace evacsim;

static BuildingGraph fig2() {
    return load_config_file(std::string(EVACSIM_CONFIG_DIR) + "/fig2.json");
}

TEST_CASE("one_step_sim ranks destinations by one-step reward") {
    const auto g = fig2();
    REQUIRE(one_step_sim(g, 2, 2) == std::vector<int>{4, 0});
    REQUIRE(one_step_sim(g, 0, 3) == std::vector<int>{1, 2, 3});
    // k = n: exhaustive, ordered by reward then index
    REQUIRE(one_step_sim(g, 2, 5) == std::vector<int>{4, 0, 1, 2, 3});
    REQUIRE_THROWS_AS(one_step_sim(g, 0, 0), std::out_of_range);
    REQUIRE_THROWS_AS(one_step_sim(g, 0, 6), std::out_of_range);
    REQUIRE_THROWS_AS(one_step_sim(g, 9, 1), std::out_of_range);
}

TEST_CASE("analytic and env-replay rankings agree exactly") {
    const auto configs = {std::string("/fig2.json"), std::string("/fig12.json"),
                          std::string("/uia91.json")};
    for (const auto& name : configs) {
        const auto g = load_config_file(std::string(EVACSIM_CONFIG_DIR) + name);
        for (int k : {1, max_degree(g), g.n}) {
            for (int room = 0; room < g.n; ++room)
                REQUIRE(one_step_sim(g, room, k) == one_step_sim_replay(g, room, k));
        }
    }
}

TEST_CASE("build_importance marks k slots per source room") {
    const auto g = fig2();
    const auto ai = build_importance(g, 2);
    REQUIRE(ai.retained() == 10);  // k*n
    REQUIRE(ai.mask.size() == 25);
    REQUIRE(ai.mask[22] == 0.0);  // 2 -> exit retained
    const std::set<int> expect = {5, 10, 1, 11, 22, 2, 23, 3, 4, 9};
    for (int a = 0; a < 25; ++a) {
        if (expect.count(a)) REQUIRE(ai.mask[a] == 0.0);
        else REQUIRE(ai.mask[a] == kMaskPenalty);
    }
    REQUIRE_THAT(ai.reduction_pct(), Catch::Matchers::WithinAbs(60.0, 1e-12));
}

TEST_CASE("k = n retains everything") {
    const auto g = fig2();
    const auto ai = build_importance(g, 5);
    REQUIRE(ai.retained() == 25);
    std::vector<double> q = {1, 2, 3};
    q.resize(25, -1.0);
    REQUIRE(apply_importance(q, ai) == q);
}

TEST_CASE("91-room mask keeps 819 of 8281 actions") {
    const auto g = load_config_file(std::string(EVACSIM_CONFIG_DIR) + "/uia91.json");
    const auto ai = build_importance(g, 9);
    REQUIRE(ai.mask.size() == 8281);
    REQUIRE(ai.retained() == 819);
    char pct[16];
    std::snprintf(pct, sizeof(pct), "%.1f", ai.reduction_pct());
    REQUIRE(std::string(pct) == "90.1");
}

TEST_CASE("apply_importance adds elementwise") {
    ActionImportance ai;
    ai.n = 0;
    ai.k = 0;
    ai.mask = {0.0, -9999.0, 0.0};
    REQUIRE(apply_importance({5.0, -3.0, 2.0}, ai) == std::vector<double>{5.0, -10002.0, 2.0});
    REQUIRE_THROWS_AS(apply_importance({1.0}, ai), std::invalid_argument);
}

TEST_CASE("masked actions never win the argmax for bounded q-values") {
    const auto g = fig2();
    const auto ai = build_importance(g, max_degree(g));
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> q(25);
        for (double& v : q) v = (uniform01(rng) * 2 - 1) * 1000.0;
        const auto masked = apply_importance(q, ai);
        int best = 0;
        for (int a = 1; a < 25; ++a)
            if (masked[a] > masked[best]) best = a;
        REQUIRE(ai.mask[best] == 0.0);
    }
}

TEST_CASE("exit moves survive masking for every room with an exit edge") {
    for (const auto& name : {std::string("/fig2.json"), std::string("/uia91.json")}) {
        const auto g = load_config_file(std::string(EVACSIM_CONFIG_DIR) + name);
        const auto ai = build_importance(g, max_degree(g));
        for (int room = 0; room < g.n; ++room)
            for (int e : g.exits)
                if (g.adj(room, e))
                    REQUIRE(ai.mask[static_cast<size_t>(e) * g.n + room] == 0.0);
    }
}

TEST_CASE("mask csv carries the encoding in a header comment") {
    const auto ai = build_importance(fig2(), 2);
    std::ostringstream ss;
    write_mask_csv(ai, ss);
    const auto text = ss.str();
    REQUIRE(text.rfind("# action index a = dest*n + source", 0) == 0);
    REQUIRE(std::count(text.begin(), text.end(), '\n') == 26);  // header + 25 values
}
