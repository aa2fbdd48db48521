#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace evacsim {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Static building model: rooms, directed 0/1 adjacency, exits, fire rooms,
/// fire-spread degrees and rates, per-room occupancy cap and initial occupancy.
/// Immutable after load; shared read-only across threads.
struct BuildingGraph {
    int n = 0;
    std::vector<uint8_t> adjacency;       // n*n row-major, row = source room
    std::vector<int> exits;               // sorted
    std::vector<int> fires;               // sorted
    std::vector<double> degree0;          // fire-spread degree at t=0
    std::vector<double> delta;            // per-step degree increment, in [0,1]
    int bottleneck = 0;
    std::vector<int> occupancy0;
    double uncertainty = 0.0;             // p in [0,1)

    uint8_t adj(int i, int j) const { return adjacency[static_cast<size_t>(i) * n + j]; }
    bool is_exit(int room) const { return std::binary_search(exits.begin(), exits.end(), room); }
};

inline std::vector<int> neighbors(const BuildingGraph& g, int room) {
    if (room < 0 || room >= g.n)
        throw std::out_of_range("neighbors: room " + std::to_string(room) + " out of range");
    std::vector<int> out;
    for (int j = 0; j < g.n; ++j)
        if (g.adj(room, j)) out.push_back(j);
    return out;
}

/// Maximum out-degree over non-exit rooms; the default k for action reduction.
inline int max_degree(const BuildingGraph& g) {
    int best = 0;
    for (int i = 0; i < g.n; ++i) {
        if (g.is_exit(i)) continue;
        int deg = 0;
        for (int j = 0; j < g.n; ++j) deg += g.adj(i, j);
        best = std::max(best, deg);
    }
    return best;
}

/// BFS hop count from each room to its nearest exit (0 for exits,
/// -1 for rooms that cannot reach any exit).
inline std::vector<int> exit_distances(const BuildingGraph& g) {
    std::vector<int> dist(g.n, -1);
    std::queue<int> q;
    for (int e : g.exits) { dist[e] = 0; q.push(e); }
    // walk edges backwards: dist[i] = 1 + min over successors j
    while (!q.empty()) {
        int j = q.front(); q.pop();
        for (int i = 0; i < g.n; ++i) {
            if (dist[i] < 0 && g.adj(i, j)) { dist[i] = dist[j] + 1; q.push(i); }
        }
    }
    return dist;
}

inline void validate(const BuildingGraph& g) {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (g.n <= 0) fail("rooms: must be positive");
    const size_t nn = static_cast<size_t>(g.n) * g.n;
    if (g.adjacency.size() != nn) fail("adjacency: wrong size");
    if (g.degree0.size() != static_cast<size_t>(g.n)) fail("degree0: length must equal rooms");
    if (g.delta.size() != static_cast<size_t>(g.n)) fail("delta: length must equal rooms");
    if (g.occupancy0.size() != static_cast<size_t>(g.n)) fail("occupancy0: length must equal rooms");
    if (g.bottleneck <= 0) fail("bottleneck: must be positive");
    if (g.uncertainty < 0.0 || g.uncertainty >= 1.0) fail("uncertainty: must lie in [0,1)");
    if (g.exits.empty()) fail("exits: at least one exit required");

    for (size_t i = 0; i < nn; ++i)
        if (g.adjacency[i] != 0 && g.adjacency[i] != 1) fail("adjacency: entries must be 0 or 1");
    for (int i = 0; i < g.n; ++i)
        if (g.adj(i, i)) fail("adjacency: diagonal must be zero (room " + std::to_string(i) + ")");

    for (int e : g.exits) {
        if (e < 0 || e >= g.n) fail("exits: index " + std::to_string(e) + " out of range");
        for (int j = 0; j < g.n; ++j)
            if (g.adj(e, j)) fail("exits: exit row must be zero (exit " + std::to_string(e) + ")");
        if (g.occupancy0[e] != 0) fail("occupancy0: exit " + std::to_string(e) + " must start empty");
        if (g.degree0[e] != 0.0) fail("degree0: exit " + std::to_string(e) + " must be zero");
        if (g.delta[e] != 0.0) fail("delta: exit " + std::to_string(e) + " must be zero");
    }

    bool edge_into_exit = false;
    for (int i = 0; i < g.n; ++i) {
        if (g.is_exit(i)) continue;
        for (int e : g.exits) edge_into_exit |= (g.adj(i, e) != 0);
    }
    if (!edge_into_exit) fail("exits: no room has an edge into any exit");

    for (int i = 0; i < g.n; ++i) {
        if (g.occupancy0[i] < 0) fail("occupancy0: negative count in room " + std::to_string(i));
        if (g.occupancy0[i] > g.bottleneck)
            fail("occupancy0: occupancy exceeds bottleneck in room " + std::to_string(i));
        if (g.degree0[i] < 0.0) fail("degree0: negative value in room " + std::to_string(i));
        if (g.delta[i] < 0.0 || g.delta[i] > 1.0)
            fail("delta: value outside [0,1] in room " + std::to_string(i));
    }

    const double dmax = *std::max_element(g.degree0.begin(), g.degree0.end());
    for (int f : g.fires) {
        if (f < 0 || f >= g.n) fail("fires: index " + std::to_string(f) + " out of range");
        if (g.is_exit(f)) fail("fires: fire room " + std::to_string(f) + " is an exit");
        if (g.degree0[f] != dmax)
            fail("degree0: fire room " + std::to_string(f) + " must have the maximum degree");
    }

    const auto dist = exit_distances(g);
    for (int i = 0; i < g.n; ++i)
        if (!g.is_exit(i) && dist[i] < 0)
            fail("adjacency: room " + std::to_string(i) + " cannot reach any exit");
}

/// Parse the JSON config document. Undirected "edges" pairs are expanded
/// symmetrically, except edges touching an exit, which point into the exit.
inline BuildingGraph parse_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    auto require = [&](const char* key) {
        if (!doc.contains(key)) throw ConfigError(std::string("config: missing field '") + key + "'");
        return doc.at(key);
    };
    BuildingGraph g;
    try {
        g.n = require("rooms").get<int>();
        g.exits = require("exits").get<std::vector<int>>();
        g.fires = require("fires").get<std::vector<int>>();
        g.degree0 = require("degree0").get<std::vector<double>>();
        g.delta = require("delta").get<std::vector<double>>();
        g.bottleneck = require("bottleneck").get<int>();
        g.occupancy0 = require("occupancy0").get<std::vector<int>>();
        g.uncertainty = require("uncertainty").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    std::sort(g.exits.begin(), g.exits.end());
    g.exits.erase(std::unique(g.exits.begin(), g.exits.end()), g.exits.end());
    std::sort(g.fires.begin(), g.fires.end());
    g.fires.erase(std::unique(g.fires.begin(), g.fires.end()), g.fires.end());

    if (g.n <= 0) throw ConfigError("rooms: must be positive");
    g.adjacency.assign(static_cast<size_t>(g.n) * g.n, 0);
    for (const auto& e : require("edges")) {
        if (!e.is_array() || e.size() != 2) throw ConfigError("edges: each edge must be a pair [i,j]");
        const int i = e[0].get<int>(), j = e[1].get<int>();
        if (i < 0 || i >= g.n || j < 0 || j >= g.n)
            throw ConfigError("edges: endpoint out of range in [" + std::to_string(i) + "," +
                              std::to_string(j) + "]");
        if (i == j) throw ConfigError("edges: self-loop at room " + std::to_string(i));
        const bool iexit = std::find(g.exits.begin(), g.exits.end(), i) != g.exits.end();
        const bool jexit = std::find(g.exits.begin(), g.exits.end(), j) != g.exits.end();
        if (iexit && jexit) throw ConfigError("edges: edge between two exits [" + std::to_string(i) +
                                              "," + std::to_string(j) + "]");
        if (jexit) g.adjacency[static_cast<size_t>(i) * g.n + j] = 1;
        else if (iexit) g.adjacency[static_cast<size_t>(j) * g.n + i] = 1;
        else {
            g.adjacency[static_cast<size_t>(i) * g.n + j] = 1;
            g.adjacency[static_cast<size_t>(j) * g.n + i] = 1;
        }
    }
    validate(g);
    return g;
}

inline BuildingGraph load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace detail {
inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace detail

/// Canonical serialization; parse_config(to_config_json(g)) reproduces g exactly.
inline std::string to_config_json(const BuildingGraph& g) {
    std::ostringstream out;
    out << "{\n  \"rooms\": " << g.n << ",\n  \"edges\": [";
    // emit each undirected pair once (i<j); directed exit edges come out of the pair rule
    bool first = true;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            if (!g.adj(i, j)) continue;
            if (g.adj(j, i) && i > j) continue;  // symmetric pair already emitted
            out << (first ? "" : ", ") << "[" << std::min(i, j) << "," << std::max(i, j) << "]";
            first = false;
        }
    auto ints = [&](const std::vector<int>& v) {
        std::string s = "[";
        for (size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
        return s + "]";
    };
    auto reals = [&](const std::vector<double>& v) {
        std::string s = "[";
        for (size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + detail::num(v[k]);
        return s + "]";
    };
    out << "],\n  \"exits\": " << ints(g.exits) << ",\n  \"fires\": " << ints(g.fires)
        << ",\n  \"degree0\": " << reals(g.degree0) << ",\n  \"delta\": " << reals(g.delta)
        << ",\n  \"bottleneck\": " << g.bottleneck << ",\n  \"occupancy0\": " << ints(g.occupancy0)
        << ",\n  \"uncertainty\": " << detail::num(g.uncertainty) << "\n}\n";
    return out.str();
}

}  // namespace evacsim
