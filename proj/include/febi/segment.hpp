#pragma once

// Partitioning of an instruction stream into basic blocks and reachable
// blocks, plus block-local jump classification.
//
// Basic block: starts at code start, at a JUMPDEST, or right after a
// control-altering instruction; ends at the first control-altering
// instruction or right before a JUMPDEST.
//
// Reachable block: starts at code start or at a JUMPDEST and runs to the
// next JUMPDEST; JUMP/JUMPI may appear in the middle. Execution leaves the
// block at its first halting instruction, anything after that up to the next
// JUMPDEST is dead and stays attached to the block so the blocks tile the
// stream.

#include <cstddef>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "febi/evm.hpp"

namespace febi::seg {

enum class Terminator { Jump, CondJump, Halt, FallThrough };

struct BasicBlock {
    std::size_t entry_offset = 0;
    std::size_t first = 0;  // instruction index range [first, last]
    std::size_t last = 0;
    Terminator terminator = Terminator::FallThrough;
};

struct ReachableBlock {
    std::size_t entry_offset = 0;
    std::size_t first = 0;
    std::size_t last = 0;
    // Index of the first halting instruction inside the block, if any;
    // instructions past it are dead until the next JUMPDEST.
    std::optional<std::size_t> halt_at;
    int label = -1;  // 0/1 ground-truth entry label, -1 when unattached
};

struct JumpKind {
    enum Kind { Direct, Indirect, Dead } kind = Indirect;
    std::size_t target = 0;       // valid for Direct
    u256 raw_target = 0;          // resolved constant (Direct and Dead)
    std::optional<std::size_t> fallthrough;  // set for conditional jumps
};

inline std::vector<BasicBlock> basic_blocks(const evm::Program& p) {
    std::vector<BasicBlock> blocks;
    const auto& ins = p.instructions;
    std::size_t i = 0;
    while (i < ins.size()) {
        BasicBlock b;
        b.first = i;
        b.entry_offset = ins[i].offset;
        std::size_t j = i;
        while (true) {
            const auto& cur = ins[j];
            if (evm::alters_control(cur.opcode, cur.known)) {
                b.terminator = cur.opcode == evm::JUMP    ? Terminator::Jump
                               : cur.opcode == evm::JUMPI ? Terminator::CondJump
                                                          : Terminator::Halt;
                break;
            }
            if (j + 1 >= ins.size()) {
                b.terminator = Terminator::FallThrough;
                break;
            }
            if (ins[j + 1].opcode == evm::JUMPDEST && ins[j + 1].known) {
                b.terminator = Terminator::FallThrough;
                break;
            }
            ++j;
        }
        b.last = j;
        blocks.push_back(b);
        i = j + 1;
    }
    return blocks;
}

inline std::vector<ReachableBlock> reachable_blocks(const evm::Program& p) {
    std::vector<ReachableBlock> blocks;
    const auto& ins = p.instructions;
    std::size_t i = 0;
    while (i < ins.size()) {
        ReachableBlock b;
        b.first = i;
        b.entry_offset = ins[i].offset;
        std::size_t j = i;
        while (j + 1 < ins.size() &&
               !(ins[j + 1].opcode == evm::JUMPDEST && ins[j + 1].known)) {
            ++j;
        }
        b.last = j;
        for (std::size_t k = b.first; k <= b.last; ++k) {
            if (ins[k].halting()) {
                b.halt_at = k;
                break;
            }
        }
        blocks.push_back(b);
        i = j + 1;
    }
    return blocks;
}

namespace detail {

// Block-local symbolic stack: PUSH constants tracked exactly, PUSH/AND/DUP/
// SWAP modeled, everything else produces unknowns. Values popped from below
// the block's own frame are unknown to the local analysis.
struct LocalValue {
    bool is_const = false;
    u256 value = 0;
};

class LocalStack {
public:
    void push(LocalValue v) { stack_.push_back(v); }
    LocalValue pop() {
        if (stack_.empty()) return {};
        LocalValue v = stack_.back();
        stack_.pop_back();
        return v;
    }
    LocalValue& peek(std::size_t depth) {  // 0 = top
        while (stack_.size() <= depth) stack_.insert(stack_.begin(), LocalValue{});
        return stack_[stack_.size() - 1 - depth];
    }
    const std::vector<LocalValue>& values() const { return stack_; }

private:
    std::vector<LocalValue> stack_;
};

// Runs the local simulation over [first, last) and returns the stack.
inline LocalStack simulate(const evm::Program& p, std::size_t first,
                           std::size_t last) {
    LocalStack st;
    for (std::size_t i = first; i < last; ++i) {
        const auto& ins = p.instructions[i];
        std::uint8_t op = ins.opcode;
        if (evm::is_push(op)) {
            st.push({true, *ins.push_operand});
        } else if (op == evm::AND && ins.known) {
            LocalValue a = st.pop(), b = st.pop();
            if (a.is_const && b.is_const)
                st.push({true, a.value & b.value});
            else
                st.push({});
        } else if (evm::is_dup(op)) {
            std::size_t n = op - 0x80;  // DUP1 duplicates depth 0
            LocalValue v = st.peek(n);
            st.push(v);
        } else if (evm::is_swap(op)) {
            std::size_t n = op - 0x8f;  // SWAP1 swaps depth 0 and 1
            std::swap(st.peek(0), st.peek(n));
        } else {
            auto [pops, pushes] = evm::stack_arity(op);
            for (int k = 0; k < pops; ++k) st.pop();
            for (int k = 0; k < pushes; ++k) st.push({});
        }
    }
    return st;
}

}  // namespace detail

// Classifies the terminating JUMP/JUMPI of a basic block by local stack
// simulation. A resolved constant targeting a non-JUMPDEST offset is a dead
// (reverting) jump, not Direct.
inline JumpKind classify_jump(const evm::Program& p, const BasicBlock& block) {
    const auto& term = p.instructions[block.last];
    JumpKind jk;
    if (term.opcode == evm::JUMPI)
        jk.fallthrough = term.offset + term.width;
    detail::LocalStack st = detail::simulate(p, block.first, block.last);
    detail::LocalValue target = st.pop();
    if (!target.is_const) {
        jk.kind = JumpKind::Indirect;
        return jk;
    }
    jk.raw_target = target.value;
    if (p.is_jumpdest(target.value)) {
        jk.kind = JumpKind::Direct;
        jk.target = to_offset(target.value);
    } else {
        jk.kind = JumpKind::Dead;
    }
    return jk;
}

// Constants pushed in a basic block that survive on the local stack right
// before the terminator (used by the baseline call-site heuristic).
inline std::vector<u256> surviving_constants(const evm::Program& p,
                                             const BasicBlock& block) {
    detail::LocalStack st = detail::simulate(p, block.first, block.last);
    // skip the values the terminator itself consumes (jump target, condition)
    const auto& term = p.instructions[block.last];
    for (int k = 0; k < evm::stack_arity(term.opcode).pops; ++k) st.pop();
    std::vector<u256> out;
    for (const auto& v : st.values())
        if (v.is_const) out.push_back(v.value);
    return out;
}

}  // namespace febi::seg
