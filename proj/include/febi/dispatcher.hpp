#pragma once

// Public function discovery: walks the dispatcher control flow at the start
// of the contract, matching selector comparisons (EQ chains as well as LT/GT
// binary-search splits) against directly resolved conditional jumps.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "febi/evm.hpp"
#include "febi/keccak.hpp"
#include "febi/segment.hpp"

namespace febi::dispatch {

struct MalformedAbi : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PublicFunction {
    std::uint32_t selector = 0;
    std::size_t interface_entry = 0;
    std::optional<std::size_t> body_entry;
    bool fallback = false;
    std::string name;  // filled in by match_abi, else empty
};

struct PublicFunctions {
    std::vector<PublicFunction> functions;  // selector-dispatched entries
    std::optional<std::size_t> fallback_entry;
    bool dispatcher_found = false;
    std::string diagnostic;
};

namespace detail {

// What a dispatcher block compares the selector against, found by local
// simulation: an EQ against a 4-byte constant selects an entry, LT/GT
// against a pivot splits a binary-search dispatcher.
struct BlockCompare {
    std::optional<std::uint32_t> eq_const;
    bool has_split = false;
};

inline BlockCompare scan_compares(const evm::Program& p,
                                  const seg::BasicBlock& b) {
    BlockCompare out;
    seg::detail::LocalStack st;
    for (std::size_t i = b.first; i <= b.last; ++i) {
        const auto& ins = p.instructions[i];
        std::uint8_t op = ins.opcode;
        if (evm::is_push(op)) {
            st.push({true, *ins.push_operand});
        } else if (op == evm::EQ || op == evm::LT || op == evm::GT) {
            auto a = st.pop();
            auto c = st.pop();
            const seg::detail::LocalValue* cv =
                a.is_const ? &a : (c.is_const ? &c : nullptr);
            if (cv && cv->value <= u256(0xffffffffu)) {
                if (op == evm::EQ)
                    out.eq_const = std::uint32_t(cv->value);
                else
                    out.has_split = true;
            }
            st.push({});
        } else if (op == evm::AND && ins.known) {
            auto a = st.pop();
            auto c = st.pop();
            if (a.is_const && c.is_const)
                st.push({true, a.value & c.value});
            else
                st.push({});
        } else if (evm::is_dup(op)) {
            st.push(st.peek(op - 0x80));
        } else if (evm::is_swap(op)) {
            std::swap(st.peek(0), st.peek(op - 0x8f));
        } else {
            auto [pops, pushes] = evm::stack_arity(op);
            for (int k = 0; k < pops; ++k) st.pop();
            for (int k = 0; k < pushes; ++k) st.push({});
        }
    }
    return out;
}

}  // namespace detail

inline PublicFunctions public_entries(const evm::Program& p,
                                      const std::vector<seg::BasicBlock>& blocks) {
    PublicFunctions out;
    if (blocks.empty()) {
        out.diagnostic = "empty program";
        return out;
    }
    std::map<std::size_t, std::size_t> by_offset;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        by_offset[blocks[i].entry_offset] = i;

    std::set<std::uint32_t> seen_selectors;
    std::set<std::size_t> visited;
    std::vector<std::size_t> work{0};  // block index at offset 0
    constexpr std::size_t kBlockBudget = 4096;

    while (!work.empty() && visited.size() < kBlockBudget) {
        std::size_t bi = work.back();
        work.pop_back();
        if (!visited.insert(bi).second) continue;
        const seg::BasicBlock& b = blocks[bi];
        detail::BlockCompare cmp = detail::scan_compares(p, b);

        auto push_offset = [&](std::size_t off) {
            auto it = by_offset.find(off);
            if (it != by_offset.end()) work.push_back(it->second);
        };

        switch (b.terminator) {
            case seg::Terminator::CondJump: {
                seg::JumpKind jk = seg::classify_jump(p, b);
                if (jk.kind == seg::JumpKind::Direct && cmp.eq_const &&
                    !seen_selectors.count(*cmp.eq_const)) {
                    PublicFunction f;
                    f.selector = *cmp.eq_const;
                    f.interface_entry = jk.target;
                    out.functions.push_back(f);
                    seen_selectors.insert(f.selector);
                    push_offset(*jk.fallthrough);  // rest of the chain
                } else if (jk.kind == seg::JumpKind::Direct) {
                    // split node or plumbing (calldatasize checks etc.)
                    push_offset(jk.target);
                    push_offset(*jk.fallthrough);
                } else {
                    push_offset(*jk.fallthrough);
                }
                break;
            }
            case seg::Terminator::Jump: {
                seg::JumpKind jk = seg::classify_jump(p, b);
                if (jk.kind == seg::JumpKind::Direct) push_offset(jk.target);
                break;
            }
            case seg::Terminator::Halt: {
                // end of a chain; a reverting tail with no compares is the
                // default (fallback) path
                if (!out.fallback_entry && p.is_jumpdest(b.entry_offset))
                    out.fallback_entry = b.entry_offset;
                break;
            }
            case seg::Terminator::FallThrough: {
                if (b.last + 1 < p.instructions.size())
                    push_offset(p.instructions[b.last + 1].offset);
                break;
            }
        }
    }

    out.dispatcher_found = !out.functions.empty();
    if (!out.dispatcher_found)
        out.diagnostic = "no selector comparison pattern found at offset 0";
    return out;
}

// Follows the argument-decoding prologue from an interface entry to the
// DIRECT jump that calls into the shared body. The call jump is recognized
// by a return address (another JUMPDEST constant) surviving on the local
// stack under the target. Absent when the body is inlined at the interface.
inline std::optional<std::size_t> body_entry(
    const evm::Program& p, const std::vector<seg::BasicBlock>& blocks,
    std::size_t interface_entry) {
    std::map<std::size_t, std::size_t> by_offset;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        by_offset[blocks[i].entry_offset] = i;

    auto reverts_immediately = [&](std::size_t off) {
        auto it = by_offset.find(off);
        if (it == by_offset.end()) return false;
        const seg::BasicBlock& b = blocks[it->second];
        if (b.terminator != seg::Terminator::Halt) return false;
        std::uint8_t op = p.instructions[b.last].opcode;
        return op == evm::REVERT || op == evm::INVALID ||
               !p.instructions[b.last].known;
    };

    std::size_t cur = interface_entry;
    for (int steps = 0; steps < 64; ++steps) {
        auto it = by_offset.find(cur);
        if (it == by_offset.end()) return std::nullopt;
        const seg::BasicBlock& b = blocks[it->second];
        switch (b.terminator) {
            case seg::Terminator::Jump: {
                seg::JumpKind jk = seg::classify_jump(p, b);
                if (jk.kind != seg::JumpKind::Direct) return std::nullopt;
                for (const u256& c : seg::surviving_constants(p, b)) {
                    if (p.is_jumpdest(c) && jk.target != interface_entry)
                        return jk.target;  // call into the body
                }
                cur = jk.target;  // prologue tail jump, keep walking
                break;
            }
            case seg::Terminator::CondJump: {
                seg::JumpKind jk = seg::classify_jump(p, b);
                if (jk.kind != seg::JumpKind::Direct) return std::nullopt;
                // value checks branch over a revert; follow the live side
                if (reverts_immediately(jk.target))
                    cur = *jk.fallthrough;
                else
                    cur = jk.target;
                break;
            }
            case seg::Terminator::Halt:
                return std::nullopt;  // fully inlined body
            case seg::Terminator::FallThrough:
                if (b.last + 1 >= p.instructions.size()) return std::nullopt;
                cur = p.instructions[b.last + 1].offset;
                break;
        }
    }
    return std::nullopt;
}

inline std::string canonical_signature(const nlohmann::json& entry) {
    std::string sig = entry.at("name").get<std::string>() + "(";
    bool first = true;
    if (entry.contains("inputs")) {
        for (const auto& in : entry.at("inputs")) {
            if (!first) sig += ",";
            sig += in.at("type").get<std::string>();
            first = false;
        }
    }
    sig += ")";
    return sig;
}

struct AbiMatch {
    std::map<std::uint32_t, std::string> names;  // selector -> signature
    std::vector<std::string> unmatched_abi;      // signatures with no bytecode entry
};

inline AbiMatch match_abi(std::vector<PublicFunction>& publics,
                          const nlohmann::json& abi) {
    if (!abi.is_array()) throw MalformedAbi("ABI document must be a JSON array");
    AbiMatch out;
    std::map<std::uint32_t, std::string> by_selector;
    for (const auto& entry : abi) {
        try {
            if (!entry.is_object()) throw MalformedAbi("ABI entry not an object");
            if (entry.value("type", "function") != "function") continue;
            by_selector[keccak::selector(canonical_signature(entry))] =
                canonical_signature(entry);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedAbi(std::string("bad ABI entry: ") + e.what());
        }
    }
    std::set<std::uint32_t> present;
    for (auto& f : publics) {
        present.insert(f.selector);
        auto it = by_selector.find(f.selector);
        if (it != by_selector.end()) {
            f.name = it->second;
            out.names[f.selector] = it->second;
        } else {
            std::ostringstream os;
            os << "0x" << std::hex << f.selector;
            f.name = os.str();  // unmatched selectors keep hex names
        }
    }
    for (const auto& [sel, sig] : by_selector)
        if (!present.count(sel)) out.unmatched_abi.push_back(sig);
    return out;
}

}  // namespace febi::dispatch
