#pragma once

// Per-function intra-procedural CFGs, the whole-contract call graph, and the
// acyclic path sets compared during evaluation. Backedges are rewritten with
// surrogate edges so path enumeration terminates.

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <functional>
#include <tuple>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "febi/boundary.hpp"
#include "febi/evm.hpp"
#include "febi/segment.hpp"

namespace febi::graphs {

// Sentinel node ids, outside any realistic code offset.
constexpr std::size_t kExit = std::size_t(-1);
constexpr std::size_t kDispatcher = std::size_t(-2);

using Edge = std::pair<std::size_t, std::size_t>;

struct IntraCfg {
    std::size_t entry = 0;
    std::vector<std::size_t> nodes;  // sorted; includes kExit
    std::vector<Edge> edges;         // sorted, unique
};

inline IntraCfg intra_cfg(const evm::Program& p,
                          const boundary::FunctionRecord& rec) {
    IntraCfg cfg;
    cfg.entry = rec.entry;

    std::vector<seg::BasicBlock> blocks = seg::basic_blocks(p);
    std::map<std::size_t, const seg::BasicBlock*> mine;  // entry offset -> block
    for (const auto& b : blocks)
        if (rec.bytes.count(b.entry_offset)) mine[b.entry_offset] = &b;

    std::map<std::size_t, const boundary::CallEdge*> call_at;
    for (const auto& c : rec.calls) call_at[c.call_site_pc] = &c;

    std::set<Edge> edges;
    auto link = [&](std::size_t from, std::size_t to) {
        if (to != kExit && !mine.count(to)) to = kExit;
        edges.insert({from, to});
    };

    for (const auto& [off, bp] : mine) {
        const seg::BasicBlock& b = *bp;
        std::size_t term_pc = p.instructions[b.last].offset;
        std::size_t after = term_pc + p.instructions[b.last].width;
        auto call = call_at.find(term_pc);

        auto jump_edge = [&]() {
            if (call != call_at.end()) {
                // call-site block edges to the return site, not the callee
                if (call->second->return_to)
                    link(off, *call->second->return_to);
                else
                    link(off, kExit);  // tail call, no return address pushed
                return;
            }
            seg::JumpKind jk = seg::classify_jump(p, b);
            switch (jk.kind) {
                case seg::JumpKind::Direct: link(off, jk.target); break;
                case seg::JumpKind::Indirect: link(off, kExit); break;  // return
                case seg::JumpKind::Dead: link(off, kExit); break;      // revert
            }
        };

        switch (b.terminator) {
            case seg::Terminator::Jump:
                jump_edge();
                break;
            case seg::Terminator::CondJump:
                jump_edge();
                link(off, after);
                break;
            case seg::Terminator::Halt:
                link(off, kExit);
                break;
            case seg::Terminator::FallThrough:
                if (call != call_at.end())
                    link(off, kExit);  // fall-through into another entry
                else if (b.last + 1 < p.instructions.size())
                    link(off, p.instructions[b.last + 1].offset);
                else
                    link(off, kExit);
                break;
        }
    }

    std::set<std::size_t> node_set{kExit};
    for (const auto& [off, _] : mine) node_set.insert(off);
    node_set.insert(cfg.entry);
    // drop edges whose source fell outside the record (shouldn't happen, but
    // keep the node/edge invariant airtight)
    for (const auto& e : edges)
        if (node_set.count(e.first)) cfg.edges.push_back(e);
    cfg.nodes.assign(node_set.begin(), node_set.end());
    return cfg;
}

struct AcyclicPathSet {
    std::set<std::vector<std::size_t>> paths;
    bool truncated = false;
};

namespace detail {

using Adjacency = std::map<std::size_t, std::vector<std::size_t>>;

inline Adjacency adjacency(const std::vector<Edge>& edges) {
    Adjacency adj;
    for (const auto& [u, v] : edges) adj[u].push_back(v);
    for (auto& [u, vs] : adj) {
        std::sort(vs.begin(), vs.end());
        vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    }
    return adj;
}

// Backedges found by DFS in canonical (ascending successor) order.
inline std::set<Edge> find_backedges(const Adjacency& adj,
                                     const std::vector<std::size_t>& roots) {
    std::set<Edge> back;
    std::map<std::size_t, int> color;  // 0 white, 1 gray, 2 black
    struct Frame {
        std::size_t node;
        std::size_t next = 0;
    };
    for (std::size_t root : roots) {
        if (color[root]) continue;
        std::vector<Frame> stack{{root}};
        color[root] = 1;
        while (!stack.empty()) {
            Frame& f = stack.back();
            auto it = adj.find(f.node);
            const std::vector<std::size_t>* succ =
                it == adj.end() ? nullptr : &it->second;
            if (!succ || f.next >= succ->size()) {
                color[f.node] = 2;
                stack.pop_back();
                continue;
            }
            std::size_t v = (*succ)[f.next++];
            if (color[v] == 1)
                back.insert({f.node, v});
            else if (color[v] == 0) {
                color[v] = 1;
                stack.push_back({v});
            }
        }
    }
    return back;
}

inline bool is_acyclic(const Adjacency& adj) {
    std::vector<std::size_t> roots;
    for (const auto& [u, _] : adj) roots.push_back(u);
    return find_backedges(adj, roots).empty();
}

// All simple source->sink paths in ascending-successor DFS order, capped.
inline AcyclicPathSet simple_paths(const Adjacency& adj, std::size_t source,
                                   std::size_t sink, std::size_t cap) {
    AcyclicPathSet out;
    std::vector<std::size_t> path{source};
    std::set<std::size_t> on_path{source};
    std::function<void(std::size_t)> dfs = [&](std::size_t u) {
        if (out.truncated) return;
        if (u == sink) {
            if (out.paths.size() >= cap) {
                out.truncated = true;
                return;
            }
            out.paths.insert(path);
            return;
        }
        auto it = adj.find(u);
        if (it == adj.end()) return;
        for (std::size_t v : it->second) {
            if (on_path.count(v)) continue;
            path.push_back(v);
            on_path.insert(v);
            dfs(v);
            on_path.erase(v);
            path.pop_back();
        }
    };
    dfs(source);
    return out;
}

}  // namespace detail

// Replaces every backedge w->v with surrogate edges entry->v and w->EXIT,
// then enumerates all entry->EXIT simple paths.
inline AcyclicPathSet acyclic_paths(const IntraCfg& cfg,
                                    std::size_t path_cap = 10000) {
    detail::Adjacency adj = detail::adjacency(cfg.edges);
    std::set<Edge> back = detail::find_backedges(adj, {cfg.entry});
    if (!back.empty()) {
        std::vector<Edge> rewritten;
        for (const auto& e : cfg.edges)
            if (!back.count(e)) rewritten.push_back(e);
        for (const auto& [w, v] : back) {
            if (v != cfg.entry) rewritten.push_back({cfg.entry, v});
            rewritten.push_back({w, kExit});
        }
        adj = detail::adjacency(rewritten);
    }
    assert(detail::find_backedges(adj, {cfg.entry}).empty());
    return detail::simple_paths(adj, cfg.entry, kExit, path_cap);
}

struct CallGraphEdge {
    std::size_t caller = 0;
    std::size_t callee = 0;
    std::size_t call_site_pc = 0;
    bool surrogate = false;  // recursion rewritten through the dispatcher

    bool operator<(const CallGraphEdge& o) const {
        return std::tie(caller, callee, call_site_pc) <
               std::tie(o.caller, o.callee, o.call_site_pc);
    }
};

struct CallGraph {
    std::vector<std::size_t> nodes;  // kDispatcher first, then entries sorted
    std::vector<CallGraphEdge> edges;
};

inline CallGraph call_graph(const std::vector<boundary::FunctionRecord>& records,
                            const std::set<std::size_t>& public_entries) {
    CallGraph cg;
    std::set<std::size_t> nodes;
    std::set<CallGraphEdge> edges;
    for (const auto& r : records) nodes.insert(r.entry);
    for (std::size_t e : public_entries) {
        nodes.insert(e);
        edges.insert({kDispatcher, e, 0, false});
    }
    for (const auto& r : records)
        for (const auto& c : r.calls)
            if (nodes.count(c.callee))
                edges.insert({c.caller_entry, c.callee, c.call_site_pc, false});

    // recursive call-sites become dispatcher->callee surrogates
    for (int pass = 0; pass < 64; ++pass) {
        std::vector<Edge> plain;
        for (const auto& e : edges) plain.push_back({e.caller, e.callee});
        detail::Adjacency adj = detail::adjacency(plain);
        std::vector<std::size_t> roots{kDispatcher};
        roots.insert(roots.end(), nodes.begin(), nodes.end());
        std::set<Edge> back = detail::find_backedges(adj, roots);
        if (back.empty()) break;
        std::set<CallGraphEdge> next;
        for (const auto& e : edges) {
            if (back.count({e.caller, e.callee}))
                next.insert({kDispatcher, e.callee, e.call_site_pc, true});
            else
                next.insert(e);
        }
        edges = std::move(next);
    }

    cg.nodes.push_back(kDispatcher);
    cg.nodes.insert(cg.nodes.end(), nodes.begin(), nodes.end());
    cg.edges.assign(edges.begin(), edges.end());
    return cg;
}

// Dispatcher->node path sets; paths list entries only, the dispatcher root is
// implicit. Requires an acyclic call graph.
inline std::map<std::size_t, AcyclicPathSet> callgraph_paths(
    const CallGraph& cg, std::size_t path_cap = 10000) {
    std::vector<Edge> plain;
    for (const auto& e : cg.edges) plain.push_back({e.caller, e.callee});
    detail::Adjacency adj = detail::adjacency(plain);
    assert(detail::is_acyclic(adj));

    std::map<std::size_t, AcyclicPathSet> out;
    for (std::size_t n : cg.nodes)
        if (n != kDispatcher) out[n];  // every node gets a (possibly empty) set

    std::vector<std::size_t> path;
    bool truncated = false;
    std::size_t total = 0;
    std::function<void(std::size_t)> dfs = [&](std::size_t u) {
        if (truncated) return;
        if (u != kDispatcher) {
            if (total >= path_cap) {
                truncated = true;
                return;
            }
            out[u].paths.insert(path);
            ++total;
        }
        auto it = adj.find(u);
        if (it == adj.end()) return;
        for (std::size_t v : it->second) {
            path.push_back(v);
            dfs(v);
            path.pop_back();
        }
    };
    dfs(kDispatcher);
    if (truncated)
        for (auto& [n, ps] : out) ps.truncated = true;
    return out;
}

// ---------------------------------------------------------------------------
// Export

inline std::string node_name(std::size_t n) {
    if (n == kExit) return "EXIT";
    if (n == kDispatcher) return "dispatcher";
    std::ostringstream os;
    os << "0x" << std::hex << n;
    return os.str();
}

inline nlohmann::json to_json(const IntraCfg& cfg) {
    nlohmann::json j;
    j["entry"] = cfg.entry;
    j["nodes"] = nlohmann::json::array();
    for (std::size_t n : cfg.nodes) j["nodes"].push_back(node_name(n));
    j["edges"] = nlohmann::json::array();
    for (const auto& [u, v] : cfg.edges)
        j["edges"].push_back({node_name(u), node_name(v)});
    return j;
}

inline nlohmann::json to_json(const CallGraph& cg) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (std::size_t n : cg.nodes) j["nodes"].push_back(node_name(n));
    j["edges"] = nlohmann::json::array();
    for (const auto& e : cg.edges)
        j["edges"].push_back({{"caller", node_name(e.caller)},
                              {"callee", node_name(e.callee)},
                              {"call_site", e.call_site_pc},
                              {"surrogate", e.surrogate}});
    return j;
}

inline std::string to_dot(const IntraCfg& cfg, const std::string& name = "cfg") {
    std::ostringstream os;
    os << "digraph \"" << name << "\" {\n";
    for (std::size_t n : cfg.nodes) os << "  \"" << node_name(n) << "\";\n";
    for (const auto& [u, v] : cfg.edges)
        os << "  \"" << node_name(u) << "\" -> \"" << node_name(v) << "\";\n";
    os << "}\n";
    return os.str();
}

inline std::string to_dot(const CallGraph& cg) {
    std::ostringstream os;
    os << "digraph callgraph {\n";
    for (std::size_t n : cg.nodes) os << "  \"" << node_name(n) << "\";\n";
    for (const auto& e : cg.edges)
        os << "  \"" << node_name(e.caller) << "\" -> \"" << node_name(e.callee)
           << "\"" << (e.surrogate ? " [style=dashed]" : "") << ";\n";
    os << "}\n";
    return os.str();
}

}  // namespace febi::graphs
