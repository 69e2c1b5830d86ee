#pragma once

// Small two-pass assembler for building runtime bytecode with labels. All
// label references are emitted as PUSH2, so instruction widths are fixed and
// a single fixup pass resolves everything. Each emitted instruction records
// the set of owner ids active at emission time, which is how the corpus
// generator produces exact per-function byte labels.

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "febi/evm.hpp"
#include "febi/u256.hpp"

namespace febi::assembler {

class Assembler {
public:
    using Label = int;

    Label new_label() {
        labels_.push_back(kUnbound);
        return Label(labels_.size() - 1);
    }

    void bind(Label l) {
        if (labels_.at(l) != kUnbound)
            throw std::logic_error("label bound twice");
        labels_[l] = code_.size();
    }

    void op(std::uint8_t opcode) {
        record_instruction();
        code_.push_back(opcode);
    }

    void jumpdest() { op(evm::JUMPDEST); }

    // PUSH with the minimal width for the value (at least 1 byte).
    void push(const u256& v) {
        int width = 1;
        u256 t = v >> 8;
        while (t != 0) {
            ++width;
            t >>= 8;
        }
        push(v, width);
    }

    void push(const u256& v, int width) {
        record_instruction();
        code_.push_back(std::uint8_t(0x5f + width));
        for (int i = width - 1; i >= 0; --i)
            code_.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
    }

    void push_label(Label l) {
        record_instruction();
        fixups_.emplace_back(code_.size() + 1, l);
        code_.push_back(0x61);  // PUSH2
        code_.push_back(0);
        code_.push_back(0);
    }

    // Fill with INVALID up to the given offset (dead padding).
    void pad_to(std::size_t offset) {
        if (offset < code_.size())
            throw std::logic_error("pad_to target already passed");
        while (code_.size() < offset) op(evm::INVALID);
    }

    std::size_t current_offset() const { return code_.size(); }

    std::size_t offset_of(Label l) const {
        std::size_t off = labels_.at(l);
        if (off == kUnbound) throw std::logic_error("unbound label");
        return off;
    }

    void set_owners(std::set<int> owners) { owners_ = std::move(owners); }
    void clear_owners() { owners_.clear(); }

    const std::map<std::size_t, std::set<int>>& owner_map() const {
        return owner_map_;
    }

    std::vector<std::uint8_t> assemble() const {
        std::vector<std::uint8_t> out = code_;
        for (auto [at, label] : fixups_) {
            std::size_t target = offset_of(label);
            if (target > 0xffff)
                throw std::logic_error("label offset exceeds PUSH2 range");
            out[at] = std::uint8_t(target >> 8);
            out[at + 1] = std::uint8_t(target & 0xff);
        }
        return out;
    }

private:
    static constexpr std::size_t kUnbound = std::size_t(-1);

    void record_instruction() {
        if (!owners_.empty()) owner_map_[code_.size()] = owners_;
    }

    std::vector<std::uint8_t> code_;
    std::vector<std::size_t> labels_;
    std::vector<std::pair<std::size_t, Label>> fixups_;
    std::set<int> owners_;
    std::map<std::size_t, std::set<int>> owner_map_;
};

}  // namespace febi::assembler
