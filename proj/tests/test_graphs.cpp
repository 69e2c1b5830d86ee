#include <gtest/gtest.h>

#include <random>

#include "febi/assembler.hpp"
#include "febi/boundary.hpp"
#include "febi/corpus.hpp"
#include "febi/evm.hpp"
#include "febi/graphs.hpp"

using namespace febi;

namespace {

// Independent recursive oracle: backedge removal by DFS plus plain
// simple-path enumeration, sharing no code with the library.
struct Oracle {
    std::map<std::size_t, std::set<std::size_t>> adj;

    void dfs_back(std::size_t u, std::map<std::size_t, int>& color,
                  std::set<graphs::Edge>& back) const {
        color[u] = 1;
        auto it = adj.find(u);
        if (it != adj.end()) {
            for (std::size_t v : it->second) {
                if (color.count(v) && color.at(v) == 1)
                    back.insert({u, v});
                else if (!color.count(v) || color.at(v) == 0)
                    dfs_back(v, color, back);
            }
        }
        color[u] = 2;
    }

    std::set<std::vector<std::size_t>> paths(std::size_t source,
                                             std::size_t sink) const {
        std::set<std::vector<std::size_t>> out;
        std::vector<std::size_t> path{source};
        std::set<std::size_t> seen{source};
        enumerate(source, sink, path, seen, out);
        return out;
    }

    void enumerate(std::size_t u, std::size_t sink,
                   std::vector<std::size_t>& path, std::set<std::size_t>& seen,
                   std::set<std::vector<std::size_t>>& out) const {
        if (u == sink) {
            out.insert(path);
            return;
        }
        auto it = adj.find(u);
        if (it == adj.end()) return;
        for (std::size_t v : it->second) {
            if (seen.count(v)) continue;
            path.push_back(v);
            seen.insert(v);
            enumerate(v, sink, path, seen, out);
            seen.erase(v);
            path.pop_back();
        }
    }
};

std::set<std::vector<std::size_t>> oracle_acyclic_paths(const graphs::IntraCfg& cfg) {
    Oracle g;
    for (const auto& [u, v] : cfg.edges) g.adj[u].insert(v);
    std::map<std::size_t, int> color;
    std::set<graphs::Edge> back;
    g.dfs_back(cfg.entry, color, back);
    if (!back.empty()) {
        Oracle h;
        for (const auto& [u, v] : cfg.edges)
            if (!back.count({u, v})) h.adj[u].insert(v);
        for (const auto& [w, v] : back) {
            if (v != cfg.entry) h.adj[cfg.entry].insert(v);
            h.adj[w].insert(graphs::kExit);
        }
        g = std::move(h);
    }
    return g.paths(cfg.entry, graphs::kExit);
}

graphs::IntraCfg random_cfg(std::mt19937_64& rng, std::size_t nodes,
                            double edge_p, bool dag_only) {
    graphs::IntraCfg cfg;
    cfg.entry = 0;
    std::set<graphs::Edge> edges;
    for (std::size_t u = 0; u < nodes; ++u) {
        for (std::size_t v = 0; v < nodes; ++v) {
            if (u == v && dag_only) continue;
            if (dag_only && v < u) continue;
            if (double(rng() % 1000) / 1000.0 < edge_p) edges.insert({u, v});
        }
        if (double(rng() % 1000) / 1000.0 < 0.4) edges.insert({u, graphs::kExit});
    }
    edges.insert({nodes - 1, graphs::kExit});
    std::set<std::size_t> ns{graphs::kExit};
    for (const auto& [u, v] : edges) {
        ns.insert(u);
        ns.insert(v);
    }
    ns.insert(0);
    cfg.nodes.assign(ns.begin(), ns.end());
    cfg.edges.assign(edges.begin(), edges.end());
    return cfg;
}

}  // namespace

TEST(Graphs, SingleBlockFunction) {
    evm::Program p = evm::decode("5b600150905600");  // JUMPDEST ... JUMP
    boundary::FunctionRecord rec;
    rec.entry = 0;
    for (std::size_t off : {0, 1, 3, 4, 5}) rec.bytes.insert(off);
    graphs::IntraCfg cfg = graphs::intra_cfg(p, rec);
    EXPECT_EQ(cfg.edges,
              (std::vector<graphs::Edge>{{0, graphs::kExit}}));
    auto ps = graphs::acyclic_paths(cfg);
    EXPECT_EQ(ps.paths.size(), 1u);
    EXPECT_FALSE(ps.truncated);
}

TEST(Graphs, DiamondHasTwoPaths) {
    // entry branches to two blocks that both return
    assembler::Assembler a;
    auto left = a.new_label(), right = a.new_label();
    a.jumpdest();
    a.push(u256(1));
    a.push_label(right);
    a.op(evm::JUMPI);
    std::size_t lo = a.current_offset();
    a.push_label(left);
    a.op(evm::JUMP);
    a.bind(left);
    a.jumpdest();
    a.op(evm::JUMP);
    a.bind(right);
    a.jumpdest();
    a.op(evm::JUMP);
    evm::Program p = evm::decode_bytes(a.assemble());
    boundary::FunctionRecord rec;
    rec.entry = 0;
    for (const auto& ins : p.instructions) rec.bytes.insert(ins.offset);
    graphs::IntraCfg cfg = graphs::intra_cfg(p, rec);
    auto ps = graphs::acyclic_paths(cfg);
    EXPECT_EQ(ps.paths.size(), 2u);
    EXPECT_TRUE(cfg.nodes.size() >= 4);
    EXPECT_NE(lo, 0u);
}

TEST(Graphs, SelfLoopAtEntryIsRewritten) {
    graphs::IntraCfg cfg;
    cfg.entry = 0;
    cfg.nodes = {0, graphs::kExit};
    cfg.edges = {{0, 0}, {0, graphs::kExit}};
    auto ps = graphs::acyclic_paths(cfg);
    ASSERT_EQ(ps.paths.size(), 1u);
    EXPECT_EQ(*ps.paths.begin(),
              (std::vector<std::size_t>{0, graphs::kExit}));
}

TEST(Graphs, LoopSurrogateHandCase) {
    // 0 -> 1, 1 -> 2, 2 -> 1 (backedge), 1 -> EXIT
    graphs::IntraCfg cfg;
    cfg.entry = 0;
    cfg.nodes = {0, 1, 2, graphs::kExit};
    cfg.edges = {{0, 1}, {1, 2}, {2, 1}, {1, graphs::kExit}};
    auto ps = graphs::acyclic_paths(cfg);
    // rewritten: 0->1, 1->2, 1->EXIT, 0->1 surrogate (dup), 2->EXIT
    std::set<std::vector<std::size_t>> want{
        {0, 1, graphs::kExit}, {0, 1, 2, graphs::kExit}};
    EXPECT_EQ(ps.paths, want);
}

TEST(Graphs, AcyclicInputsMatchPlainEnumeration) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        graphs::IntraCfg cfg = random_cfg(rng, 2 + rng() % 7, 0.3, true);
        Oracle g;
        for (const auto& [u, v] : cfg.edges) g.adj[u].insert(v);
        auto ps = graphs::acyclic_paths(cfg);
        EXPECT_FALSE(ps.truncated);
        EXPECT_EQ(ps.paths, g.paths(cfg.entry, graphs::kExit));
    }
}

TEST(Graphs, RandomGraphsMatchIndependentOracle) {
    std::mt19937_64 rng(32);
    for (int trial = 0; trial < 100; ++trial) {
        graphs::IntraCfg cfg = random_cfg(rng, 2 + rng() % 7, 0.35, false);
        auto ps = graphs::acyclic_paths(cfg);
        EXPECT_FALSE(ps.truncated);
        EXPECT_EQ(ps.paths, oracle_acyclic_paths(cfg)) << "trial " << trial;
    }
}

TEST(Graphs, PathCapSetsTruncation) {
    // complete DAG on 12 nodes has many paths
    graphs::IntraCfg cfg;
    cfg.entry = 0;
    std::set<graphs::Edge> edges;
    for (std::size_t u = 0; u < 12; ++u) {
        for (std::size_t v = u + 1; v < 12; ++v) edges.insert({u, v});
        edges.insert({u, graphs::kExit});
    }
    cfg.edges.assign(edges.begin(), edges.end());
    cfg.nodes = {graphs::kExit};
    for (std::size_t u = 0; u < 12; ++u) cfg.nodes.push_back(u);
    auto ps = graphs::acyclic_paths(cfg, 50);
    EXPECT_TRUE(ps.truncated);
    EXPECT_EQ(ps.paths.size(), 50u);
}

TEST(Graphs, CallGraphStar) {
    std::vector<boundary::FunctionRecord> records(3);
    records[0].entry = 10;
    records[1].entry = 20;
    records[2].entry = 30;
    graphs::CallGraph cg = graphs::call_graph(records, {10, 20, 30});
    EXPECT_EQ(cg.nodes.front(), graphs::kDispatcher);
    EXPECT_EQ(cg.edges.size(), 3u);
    for (const auto& e : cg.edges) {
        EXPECT_EQ(e.caller, graphs::kDispatcher);
        EXPECT_FALSE(e.surrogate);
    }
    auto paths = graphs::callgraph_paths(cg);
    for (std::size_t n : {10u, 20u, 30u}) {
        ASSERT_EQ(paths[n].paths.size(), 1u);
        EXPECT_EQ(*paths[n].paths.begin(), std::vector<std::size_t>{n});
    }
}

TEST(Graphs, SelfRecursionBecomesSurrogate) {
    std::vector<boundary::FunctionRecord> records(1);
    records[0].entry = 10;
    boundary::CallEdge c;
    c.caller_entry = 10;
    c.callee = 10;
    c.call_site_pc = 99;
    records[0].calls.push_back(c);
    graphs::CallGraph cg = graphs::call_graph(records, {10});
    bool has_surrogate = false;
    for (const auto& e : cg.edges) {
        EXPECT_NE(e.caller, e.callee);
        if (e.surrogate) {
            has_surrogate = true;
            EXPECT_EQ(e.caller, graphs::kDispatcher);
            EXPECT_EQ(e.callee, 10u);
        }
    }
    EXPECT_TRUE(has_surrogate);
    auto paths = graphs::callgraph_paths(cg);  // asserts acyclicity inside
    EXPECT_EQ(paths[10].paths.size(), 1u);
}

TEST(Graphs, MutualRecursionIsBrokenIteratively) {
    std::vector<boundary::FunctionRecord> records(2);
    records[0].entry = 10;
    records[1].entry = 20;
    boundary::CallEdge ab, ba;
    ab.caller_entry = 10;
    ab.callee = 20;
    ab.call_site_pc = 1;
    ba.caller_entry = 20;
    ba.callee = 10;
    ba.call_site_pc = 2;
    records[0].calls.push_back(ab);
    records[1].calls.push_back(ba);
    graphs::CallGraph cg = graphs::call_graph(records, {10});
    auto paths = graphs::callgraph_paths(cg);
    EXPECT_FALSE(paths[10].paths.empty());
    EXPECT_FALSE(paths[20].paths.empty());
}

TEST(Graphs, RandomRecursiveCallGraphsEndUpAcyclic) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + rng() % 6;
        std::vector<boundary::FunctionRecord> records(n);
        std::set<std::size_t> pubs;
        for (std::size_t i = 0; i < n; ++i) {
            records[i].entry = (i + 1) * 10;
            if (rng() % 2) pubs.insert(records[i].entry);
        }
        pubs.insert(10);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (rng() % 3 == 0) {
                    boundary::CallEdge c;
                    c.caller_entry = (i + 1) * 10;
                    c.callee = (j + 1) * 10;
                    c.call_site_pc = i * 100 + j;
                    records[i].calls.push_back(c);
                }
        graphs::CallGraph cg = graphs::call_graph(records, pubs);
        std::vector<graphs::Edge> plain;
        for (const auto& e : cg.edges) plain.push_back({e.caller, e.callee});
        EXPECT_TRUE(graphs::detail::is_acyclic(graphs::detail::adjacency(plain)));
        graphs::callgraph_paths(cg);  // must not assert or hang
    }
}

TEST(Graphs, CallGraphPathsMatchOracleOnRandomDags) {
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + rng() % 5;
        std::vector<boundary::FunctionRecord> records(n);
        std::set<std::size_t> pubs{10};
        for (std::size_t i = 0; i < n; ++i) {
            records[i].entry = (i + 1) * 10;
            if (rng() % 2) pubs.insert(records[i].entry);
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (rng() % 3 == 0) {
                    boundary::CallEdge c;
                    c.caller_entry = (i + 1) * 10;
                    c.callee = (j + 1) * 10;
                    records[i].calls.push_back(c);
                }
        graphs::CallGraph cg = graphs::call_graph(records, pubs);
        Oracle g;
        for (const auto& e : cg.edges) g.adj[e.caller].insert(e.callee);
        auto got = graphs::callgraph_paths(cg);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t node = (i + 1) * 10;
            auto want = g.paths(graphs::kDispatcher, node);
            std::set<std::vector<std::size_t>> trimmed;
            for (auto path : want) {
                path.erase(path.begin());  // drop the implicit dispatcher
                trimmed.insert(std::move(path));
            }
            EXPECT_EQ(got[node].paths, trimmed);
        }
    }
}

TEST(Graphs, IntraCfgCallSiteEdgesToReturnSite) {
    assembler::Assembler a;
    auto callee = a.new_label(), ret = a.new_label();
    a.jumpdest();
    a.push_label(ret);
    a.push_label(callee);
    std::size_t call_pc = a.current_offset();
    a.op(evm::JUMP);
    a.bind(ret);
    a.jumpdest();
    a.op(evm::JUMP);
    a.bind(callee);
    a.jumpdest();
    a.op(evm::JUMP);
    evm::Program p = evm::decode_bytes(a.assemble());
    std::size_t ce = a.offset_of(callee);

    auto blocks = seg::basic_blocks(p);
    auto jumps = boundary::JumpTable::build(p, blocks);
    auto tr = boundary::traverse_entry(p, jumps, 0, {0, ce}, {});
    boundary::FunctionRecord rec;
    rec.entry = 0;
    rec.bytes = tr.bytes;
    rec.calls = tr.calls;
    graphs::IntraCfg cfg = graphs::intra_cfg(p, rec);
    bool call_edge = false;
    for (const auto& [u, v] : cfg.edges) {
        EXPECT_NE(v, ce);  // never into the callee
        if (u == 0 && v == a.offset_of(ret)) call_edge = true;
    }
    EXPECT_TRUE(call_edge);
    EXPECT_NE(call_pc, 0u);
}

TEST(Graphs, ExportFormats) {
    graphs::IntraCfg cfg;
    cfg.entry = 4;
    cfg.nodes = {4, graphs::kExit};
    cfg.edges = {{4, graphs::kExit}};
    nlohmann::json j = graphs::to_json(cfg);
    EXPECT_EQ(j["entry"], 4);
    EXPECT_EQ(j["nodes"].size(), 2u);
    std::string dot = graphs::to_dot(cfg, "f4");
    EXPECT_NE(dot.find("digraph"), std::string::npos);
    EXPECT_NE(dot.find("EXIT"), std::string::npos);

    std::vector<boundary::FunctionRecord> records(1);
    records[0].entry = 4;
    graphs::CallGraph cg = graphs::call_graph(records, {4});
    nlohmann::json cj = graphs::to_json(cg);
    EXPECT_EQ(cj["nodes"][0], "dispatcher");
    std::string cdot = graphs::to_dot(cg);
    EXPECT_NE(cdot.find("dispatcher"), std::string::npos);
}
