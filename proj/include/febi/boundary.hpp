#pragma once

// Function boundary identification: path-sensitive worklist traversal over a
// symbolic operand stack and a context stack of call frames. Offsets reached
// with an empty context belong to the entry being traversed. Return-site
// validation raises spurious-call / missing-call signals which the
// refinement loop turns into call-site blacklisting or threshold lowering.

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "febi/evm.hpp"
#include "febi/segment.hpp"

namespace febi::boundary {

enum class ValueKind { Const, Param, Unknown };

struct SymValue {
    ValueKind kind = ValueKind::Unknown;
    u256 value = 0;

    static SymValue constant(const u256& v) { return {ValueKind::Const, v}; }
    static SymValue param() { return {ValueKind::Param, 0}; }
    static SymValue unknown() { return {ValueKind::Unknown, 0}; }
};

// Operand stack with bottomless PARAM semantics: popping below the explicit
// frame yields caller-prepared data.
class OpStack {
public:
    SymValue pop() {
        if (items_.empty()) return SymValue::param();
        SymValue v = items_.back();
        items_.pop_back();
        return v;
    }
    void push(SymValue v) { items_.push_back(v); }
    SymValue& peek(std::size_t depth) {  // 0 = top; materializes params
        while (items_.size() <= depth)
            items_.insert(items_.begin(), SymValue::param());
        return items_[items_.size() - 1 - depth];
    }
    std::size_t depth() const { return items_.size(); }
    const std::vector<SymValue>& items() const { return items_; }

    // The merge key: jump-destination-valued constants, in stack order.
    std::vector<std::size_t> tag_stack(const evm::Program& p) const {
        std::vector<std::size_t> tags;
        for (const auto& v : items_)
            if (v.kind == ValueKind::Const && p.is_jumpdest(v.value))
                tags.push_back(to_offset(v.value));
        return tags;
    }

private:
    std::vector<SymValue> items_;
};

struct CtxFrame {
    std::size_t callee_entry = 0;
    std::size_t call_site_pc = 0;
};

struct ValidationSignal {
    enum Kind { SpuriousCall, MissingCall } kind = SpuriousCall;
    std::size_t entry = 0;        // entry under analysis
    std::size_t pc = 0;           // spurious: call-site pc; missing: jump pc
    std::optional<std::size_t> suggested_entry;  // missing: likely entry
};

// Return-site rule: PARAM consumed with a call frame open means the frame
// should not be there (spurious call); a constant consumed with no frame
// open means a call was never recognized (missing call).
inline std::optional<ValidationSignal> validate_return(
    ValueKind consumed, bool ctx_empty, std::size_t entry, std::size_t jump_pc,
    std::optional<std::size_t> top_call_site,
    std::optional<std::size_t> suggested_entry = std::nullopt) {
    if (consumed == ValueKind::Param && !ctx_empty)
        return ValidationSignal{ValidationSignal::SpuriousCall, entry,
                                top_call_site.value_or(jump_pc), std::nullopt};
    if (consumed == ValueKind::Const && ctx_empty)
        return ValidationSignal{ValidationSignal::MissingCall, entry, jump_pc,
                                suggested_entry};
    return std::nullopt;
}

struct CallEdge {
    std::size_t call_site_pc = 0;
    std::size_t caller_entry = 0;  // function whose body contains the site
    std::size_t callee = 0;
    std::optional<std::size_t> return_to;
    bool via_fallthrough = false;
};

struct TraversalConfig {
    std::size_t max_states = 100000;
    double max_seconds = 60.0;
    int max_call_depth = 16;
    std::size_t max_stack_depth = 1024;  // EVM operand stack limit
};

struct TraversalResult {
    std::size_t entry = 0;
    std::set<std::size_t> bytes;          // offsets reached with empty ctx
    std::vector<ValidationSignal> signals;
    std::vector<CallEdge> calls;
    std::set<std::size_t> visited_pcs;    // any context
    std::set<std::size_t> exit_pcs;       // clean function exits
    std::size_t unresolved_jumps = 0;
    std::size_t invalid_targets = 0;
    std::size_t abandoned_depth = 0;
    bool budget_exceeded = false;
};

// Precomputed block-local jump classification, indexed by terminator pc.
struct JumpTable {
    std::map<std::size_t, seg::JumpKind> jumps;  // JUMP/JUMPI pcs only

    static JumpTable build(const evm::Program& p,
                           const std::vector<seg::BasicBlock>& blocks) {
        JumpTable t;
        for (const auto& b : blocks) {
            if (b.terminator == seg::Terminator::Jump ||
                b.terminator == seg::Terminator::CondJump)
                t.jumps[p.instructions[b.last].offset] = seg::classify_jump(p, b);
        }
        return t;
    }
    const seg::JumpKind* find(std::size_t pc) const {
        auto it = jumps.find(pc);
        return it == jumps.end() ? nullptr : &it->second;
    }
};

// Call/return site inference from block-local analysis alone.
struct CallReturnSites {
    std::set<std::size_t> call_sites;
    std::set<std::size_t> return_sites;
};

inline CallReturnSites infer_call_return_sites(
    const evm::Program& p, const std::vector<seg::BasicBlock>& blocks,
    const std::set<std::size_t>& entries) {
    CallReturnSites out;
    for (const auto& b : blocks) {
        std::size_t term_pc = p.instructions[b.last].offset;
        if (b.terminator == seg::Terminator::Jump ||
            b.terminator == seg::Terminator::CondJump) {
            seg::JumpKind jk = seg::classify_jump(p, b);
            if (jk.kind == seg::JumpKind::Direct && entries.count(jk.target))
                out.call_sites.insert(term_pc);
            else if (jk.kind == seg::JumpKind::Indirect)
                out.return_sites.insert(term_pc);
        }
        // fall-through edge into an entry
        if (b.terminator == seg::Terminator::FallThrough ||
            b.terminator == seg::Terminator::CondJump) {
            const auto& last = p.instructions[b.last];
            std::size_t next = last.offset + last.width;
            if (b.terminator == seg::Terminator::FallThrough &&
                entries.count(next))
                out.call_sites.insert(term_pc);
        }
    }
    return out;
}

namespace detail {

struct State {
    std::size_t pc = 0;
    std::vector<CtxFrame> ctx;
    OpStack stack;
    std::size_t last_entered = 0;  // last jump target taken with empty ctx
};

inline std::optional<std::size_t> surviving_return_address(
    const evm::Program& p, const OpStack& st) {
    for (auto it = st.items().rbegin(); it != st.items().rend(); ++it)
        if (it->kind == ValueKind::Const && p.is_jumpdest(it->value))
            return to_offset(it->value);
    return std::nullopt;
}

}  // namespace detail

inline TraversalResult traverse_entry(
    const evm::Program& p, const JumpTable& jumps, std::size_t entry,
    const std::set<std::size_t>& entries,
    const std::set<std::size_t>& call_site_blacklist,
    const TraversalConfig& cfg = {}) {
    TraversalResult res;
    res.entry = entry;
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(cfg.max_seconds));

    std::set<std::pair<std::size_t, std::vector<std::size_t>>> visited;
    std::vector<detail::State> work;
    {
        detail::State s;
        s.pc = entry;
        s.last_entered = entry;
        work.push_back(std::move(s));
    }
    std::size_t steps = 0;

    auto caller_of = [&](const detail::State& s) {
        return s.ctx.empty() ? entry : s.ctx.back().callee_entry;
    };

    while (!work.empty()) {
        if (++steps > cfg.max_states ||
            (steps % 512 == 0 && std::chrono::steady_clock::now() > deadline)) {
            res.budget_exceeded = true;
            break;
        }
        detail::State s = std::move(work.back());
        work.pop_back();

        auto key = std::make_pair(s.pc, s.stack.tag_stack(p));
        if (!visited.insert(std::move(key)).second) continue;

        std::size_t idx = p.index_of(s.pc);
        if (idx == std::size_t(-1)) continue;  // jump into a push operand
        const evm::Instruction& ins = p.instructions[idx];

        res.visited_pcs.insert(s.pc);
        if (s.ctx.empty()) res.bytes.insert(s.pc);

        std::uint8_t op = ins.opcode;
        if (ins.halting()) continue;

        if (op == evm::JUMP || op == evm::JUMPI) {
            SymValue target = s.stack.pop();
            if (op == evm::JUMPI) s.stack.pop();  // condition
            const seg::JumpKind* jk = jumps.find(s.pc);
            bool block_direct = jk && jk->kind == seg::JumpKind::Direct;
            bool block_dead = jk && jk->kind == seg::JumpKind::Dead;

            // conditional fall-through continues in the current context
            if (op == evm::JUMPI) {
                detail::State ft = s;
                ft.pc = ins.offset + ins.width;
                work.push_back(std::move(ft));
            }

            if (block_dead) {
                ++res.invalid_targets;
                continue;
            }
            if (block_direct) {
                std::size_t t = jk->target;
                bool is_call = entries.count(t) && t != entry &&
                               !call_site_blacklist.count(s.pc);
                // a direct self-jump (loop head) is intra-procedural; a call
                // to the entry being traversed would also be recursion and is
                // handled by the depth cap via the generic path below
                if (entries.count(t) && t == entry && !s.ctx.empty())
                    is_call = !call_site_blacklist.count(s.pc);
                detail::State nx = std::move(s);
                if (is_call) {
                    CallEdge edge;
                    edge.call_site_pc = nx.pc;
                    edge.caller_entry = caller_of(nx);
                    edge.callee = t;
                    edge.return_to = detail::surviving_return_address(p, nx.stack);
                    res.calls.push_back(edge);
                    if (nx.ctx.size() >= std::size_t(cfg.max_call_depth)) {
                        ++res.abandoned_depth;
                        continue;
                    }
                    nx.ctx.push_back({t, nx.pc});
                } else if (nx.ctx.empty()) {
                    nx.last_entered = t;
                }
                nx.pc = t;
                work.push_back(std::move(nx));
                continue;
            }

            // block-locally indirect: a return instruction
            std::optional<std::size_t> top_site;
            if (!s.ctx.empty()) top_site = s.ctx.back().call_site_pc;
            auto sig = validate_return(target.kind, s.ctx.empty(), entry, s.pc,
                                       top_site, s.last_entered);
            if (sig) {
                res.signals.push_back(*sig);
                continue;  // path abandoned; refinement resolves the signal
            }
            if (target.kind == ValueKind::Param) {
                res.exit_pcs.insert(s.pc);  // clean exit, ctx empty
                continue;
            }
            if (target.kind == ValueKind::Unknown) {
                ++res.unresolved_jumps;
                continue;
            }
            // constant return address with a frame open: legitimate return
            if (!p.is_jumpdest(target.value)) {
                ++res.invalid_targets;
                continue;
            }
            detail::State nx = std::move(s);
            nx.ctx.pop_back();
            nx.pc = to_offset(target.value);
            work.push_back(std::move(nx));
            continue;
        }

        // non-control instruction: symbolic stack update
        if (evm::is_push(op)) {
            s.stack.push(SymValue::constant(*ins.push_operand));
        } else if (op == evm::AND && ins.known) {
            SymValue a = s.stack.pop();
            SymValue b = s.stack.pop();
            if (a.kind == ValueKind::Const && b.kind == ValueKind::Const)
                s.stack.push(SymValue::constant(a.value & b.value));
            else
                s.stack.push(SymValue::unknown());
        } else if (evm::is_dup(op)) {
            SymValue v = s.stack.peek(op - 0x80);
            s.stack.push(v);
        } else if (evm::is_swap(op)) {
            std::swap(s.stack.peek(0), s.stack.peek(op - 0x8f));
        } else {
            auto [pops, pushes] = evm::stack_arity(op);
            for (int k = 0; k < pops; ++k) s.stack.pop();
            for (int k = 0; k < pushes; ++k) s.stack.push(SymValue::unknown());
        }
        if (s.stack.depth() > cfg.max_stack_depth) continue;

        std::size_t next = ins.offset + ins.width;
        if (entries.count(next) && next != entry) {
            // fall-through into a known entry: a call with no pushed return
            // address; the caller's attribution ends here
            CallEdge edge;
            edge.call_site_pc = s.pc;
            edge.caller_entry = caller_of(s);
            edge.callee = next;
            edge.via_fallthrough = true;
            res.calls.push_back(edge);
            continue;
        }
        s.pc = next;
        work.push_back(std::move(s));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Refinement loop

enum class FunctionKind { PublicBody, Internal };

struct FunctionRecord {
    std::size_t entry = 0;
    FunctionKind kind = FunctionKind::Internal;
    std::set<std::size_t> bytes;
    std::set<std::size_t> callers;  // call-site pcs
    std::vector<CallEdge> calls;    // outgoing, with empty-context callers
    std::set<std::size_t> exit_pcs;
};

struct BoundaryConfig {
    double rho0 = 0.5;
    double delta = 0.1;
    double rho_min = 0.1;
    int max_lowerings = 5;
    int max_iterations = 64;
    bool register_missing_entries = false;
    TraversalConfig traversal;
};

struct BoundaryResult {
    std::vector<FunctionRecord> records;
    std::set<std::size_t> blacklist;
    double final_rho = 0;
    bool budget_exceeded = false;
    std::size_t unresolved_jumps = 0;
    std::vector<std::string> diagnostics;
};

// Candidate supplier for a given threshold; oracle mode ignores the
// threshold, the learned pipeline calls into fsi::predict.
using CandidateFn = std::function<std::set<std::size_t>(double rho)>;

inline BoundaryResult identify_boundaries(
    const evm::Program& p, const std::set<std::size_t>& public_bodies,
    const CandidateFn& candidates_at, const BoundaryConfig& cfg = {}) {
    BoundaryResult out;
    std::vector<seg::BasicBlock> blocks = seg::basic_blocks(p);
    JumpTable jumps = JumpTable::build(p, blocks);

    double rho = cfg.rho0;
    int lowerings = 0;
    std::set<std::size_t> extra;  // entries registered from missing-call sites
    std::map<std::size_t, TraversalResult> cache;
    std::set<std::size_t> entries;

    auto rebuild_entries = [&]() {
        std::set<std::size_t> cand = candidates_at(rho);
        cand.insert(extra.begin(), extra.end());
        std::set<std::size_t> all = public_bodies;
        for (std::size_t c : cand)
            if (c == 0 || p.is_jumpdest(c)) all.insert(c);
        if (all != entries) {
            entries = std::move(all);
            cache.clear();  // entry set changed, call classification changed
        }
    };
    rebuild_entries();

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        for (std::size_t e : entries) {
            if (!cache.count(e))
                cache[e] = traverse_entry(p, jumps, e, entries, out.blacklist,
                                          cfg.traversal);
        }

        bool changed = false;
        std::set<std::size_t> new_blacklist;
        std::set<std::size_t> new_entries;
        bool want_lower = false;
        for (const auto& [e, r] : cache) {
            for (const auto& sig : r.signals) {
                if (sig.kind == ValidationSignal::SpuriousCall) {
                    if (!out.blacklist.count(sig.pc)) new_blacklist.insert(sig.pc);
                } else {
                    if (cfg.register_missing_entries && sig.suggested_entry &&
                        !entries.count(*sig.suggested_entry))
                        new_entries.insert(*sig.suggested_entry);
                    else if (!cfg.register_missing_entries)
                        want_lower = true;
                }
            }
        }

        if (!new_blacklist.empty()) {
            out.blacklist.insert(new_blacklist.begin(), new_blacklist.end());
            // re-traverse entries whose recorded paths crossed a newly
            // blacklisted call-site
            for (auto it = cache.begin(); it != cache.end();) {
                bool crossed = false;
                for (std::size_t pc : new_blacklist)
                    crossed = crossed || it->second.visited_pcs.count(pc);
                it = crossed ? cache.erase(it) : std::next(it);
            }
            changed = true;
        }
        if (!new_entries.empty()) {
            extra.insert(new_entries.begin(), new_entries.end());
            rebuild_entries();
            changed = true;
        }
        if (!changed && want_lower && lowerings < cfg.max_lowerings &&
            rho - cfg.delta >= cfg.rho_min - 1e-12) {
            rho -= cfg.delta;
            ++lowerings;
            rebuild_entries();
            changed = true;
        }
        if (!changed) break;
        if (iter + 1 == cfg.max_iterations)
            out.diagnostics.push_back("refinement budget exceeded");
    }
    out.final_rho = rho;

    // assemble records; drop internal candidates that are never called
    std::map<std::size_t, std::set<std::size_t>> inbound;
    for (const auto& [e, r] : cache) {
        out.budget_exceeded = out.budget_exceeded || r.budget_exceeded;
        out.unresolved_jumps += r.unresolved_jumps;
        for (const auto& c : r.calls) inbound[c.callee].insert(c.call_site_pc);
    }
    for (const auto& [e, r] : cache) {
        bool is_public = public_bodies.count(e) != 0;
        if (!is_public && inbound[e].empty()) continue;
        FunctionRecord rec;
        rec.entry = e;
        rec.kind = is_public ? FunctionKind::PublicBody : FunctionKind::Internal;
        rec.bytes = r.bytes;
        rec.callers = inbound[e];
        rec.exit_pcs = r.exit_pcs;
        for (const auto& c : r.calls)
            if (c.caller_entry == e) rec.calls.push_back(c);
        out.records.push_back(std::move(rec));
    }
    return out;
}

}  // namespace febi::boundary
