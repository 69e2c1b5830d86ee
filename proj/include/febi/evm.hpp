#pragma once

// Decoding of raw EVM bytecode into an instruction stream with exact byte
// offsets. Unknown bytes decode as INVALID so adversarial or data-suffixed
// input (metadata trailers) still yields a total instruction covering.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "febi/u256.hpp"

namespace febi::evm {

struct MalformedHex : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OpcodeInfo {
    const char* name;
    std::uint8_t pops;
    std::uint8_t pushes;
    bool known;
};

// Opcodes by byte value.
enum Op : std::uint8_t {
    STOP = 0x00, ADD = 0x01, MUL = 0x02, SUB = 0x03, DIV = 0x04,
    SDIV = 0x05, MOD = 0x06, SMOD = 0x07, ADDMOD = 0x08, MULMOD = 0x09,
    EXP = 0x0a, SIGNEXTEND = 0x0b,
    LT = 0x10, GT = 0x11, SLT = 0x12, SGT = 0x13, EQ = 0x14, ISZERO = 0x15,
    AND = 0x16, OR = 0x17, XOR = 0x18, NOT = 0x19, BYTE = 0x1a,
    SHL = 0x1b, SHR = 0x1c, SAR = 0x1d,
    KECCAK256 = 0x20,
    ADDRESS = 0x30, BALANCE = 0x31, ORIGIN = 0x32, CALLER = 0x33,
    CALLVALUE = 0x34, CALLDATALOAD = 0x35, CALLDATASIZE = 0x36,
    CALLDATACOPY = 0x37, CODESIZE = 0x38, CODECOPY = 0x39, GASPRICE = 0x3a,
    EXTCODESIZE = 0x3b, EXTCODECOPY = 0x3c, RETURNDATASIZE = 0x3d,
    RETURNDATACOPY = 0x3e, EXTCODEHASH = 0x3f,
    BLOCKHASH = 0x40, COINBASE = 0x41, TIMESTAMP = 0x42, NUMBER = 0x43,
    PREVRANDAO = 0x44, GASLIMIT = 0x45, CHAINID = 0x46, SELFBALANCE = 0x47,
    BASEFEE = 0x48,
    POP = 0x50, MLOAD = 0x51, MSTORE = 0x52, MSTORE8 = 0x53, SLOAD = 0x54,
    SSTORE = 0x55, JUMP = 0x56, JUMPI = 0x57, PC = 0x58, MSIZE = 0x59,
    GAS = 0x5a, JUMPDEST = 0x5b,
    PUSH1 = 0x60, PUSH2 = 0x61, PUSH4 = 0x63, PUSH32 = 0x7f,
    DUP1 = 0x80, DUP16 = 0x8f,
    SWAP1 = 0x90, SWAP16 = 0x9f,
    LOG0 = 0xa0, LOG4 = 0xa4,
    CREATE = 0xf0, CALL = 0xf1, CALLCODE = 0xf2, RETURN = 0xf3,
    DELEGATECALL = 0xf4, CREATE2 = 0xf5, STATICCALL = 0xfa, REVERT = 0xfd,
    INVALID = 0xfe, SELFDESTRUCT = 0xff,
};

namespace detail {

inline std::array<OpcodeInfo, 256> build_table() {
    std::array<OpcodeInfo, 256> t{};
    for (auto& e : t) e = {"INVALID", 0, 0, false};
    auto set = [&](std::uint8_t op, const char* name, std::uint8_t pops,
                   std::uint8_t pushes) { t[op] = {name, pops, pushes, true}; };
    set(STOP, "STOP", 0, 0);
    set(ADD, "ADD", 2, 1);
    set(MUL, "MUL", 2, 1);
    set(SUB, "SUB", 2, 1);
    set(DIV, "DIV", 2, 1);
    set(SDIV, "SDIV", 2, 1);
    set(MOD, "MOD", 2, 1);
    set(SMOD, "SMOD", 2, 1);
    set(ADDMOD, "ADDMOD", 3, 1);
    set(MULMOD, "MULMOD", 3, 1);
    set(EXP, "EXP", 2, 1);
    set(SIGNEXTEND, "SIGNEXTEND", 2, 1);
    set(LT, "LT", 2, 1);
    set(GT, "GT", 2, 1);
    set(SLT, "SLT", 2, 1);
    set(SGT, "SGT", 2, 1);
    set(EQ, "EQ", 2, 1);
    set(ISZERO, "ISZERO", 1, 1);
    set(AND, "AND", 2, 1);
    set(OR, "OR", 2, 1);
    set(XOR, "XOR", 2, 1);
    set(NOT, "NOT", 1, 1);
    set(BYTE, "BYTE", 2, 1);
    set(SHL, "SHL", 2, 1);
    set(SHR, "SHR", 2, 1);
    set(SAR, "SAR", 2, 1);
    set(KECCAK256, "KECCAK256", 2, 1);
    set(ADDRESS, "ADDRESS", 0, 1);
    set(BALANCE, "BALANCE", 1, 1);
    set(ORIGIN, "ORIGIN", 0, 1);
    set(CALLER, "CALLER", 0, 1);
    set(CALLVALUE, "CALLVALUE", 0, 1);
    set(CALLDATALOAD, "CALLDATALOAD", 1, 1);
    set(CALLDATASIZE, "CALLDATASIZE", 0, 1);
    set(CALLDATACOPY, "CALLDATACOPY", 3, 0);
    set(CODESIZE, "CODESIZE", 0, 1);
    set(CODECOPY, "CODECOPY", 3, 0);
    set(GASPRICE, "GASPRICE", 0, 1);
    set(EXTCODESIZE, "EXTCODESIZE", 1, 1);
    set(EXTCODECOPY, "EXTCODECOPY", 4, 0);
    set(RETURNDATASIZE, "RETURNDATASIZE", 0, 1);
    set(RETURNDATACOPY, "RETURNDATACOPY", 3, 0);
    set(EXTCODEHASH, "EXTCODEHASH", 1, 1);
    set(BLOCKHASH, "BLOCKHASH", 1, 1);
    set(COINBASE, "COINBASE", 0, 1);
    set(TIMESTAMP, "TIMESTAMP", 0, 1);
    set(NUMBER, "NUMBER", 0, 1);
    set(PREVRANDAO, "PREVRANDAO", 0, 1);
    set(GASLIMIT, "GASLIMIT", 0, 1);
    set(CHAINID, "CHAINID", 0, 1);
    set(SELFBALANCE, "SELFBALANCE", 0, 1);
    set(BASEFEE, "BASEFEE", 0, 1);
    set(POP, "POP", 1, 0);
    set(MLOAD, "MLOAD", 1, 1);
    set(MSTORE, "MSTORE", 2, 0);
    set(MSTORE8, "MSTORE8", 2, 0);
    set(SLOAD, "SLOAD", 1, 1);
    set(SSTORE, "SSTORE", 2, 0);
    set(JUMP, "JUMP", 1, 0);
    set(JUMPI, "JUMPI", 2, 0);
    set(PC, "PC", 0, 1);
    set(MSIZE, "MSIZE", 0, 1);
    set(GAS, "GAS", 0, 1);
    set(JUMPDEST, "JUMPDEST", 0, 0);
    static const char* push_names[32] = {
        "PUSH1",  "PUSH2",  "PUSH3",  "PUSH4",  "PUSH5",  "PUSH6",  "PUSH7",
        "PUSH8",  "PUSH9",  "PUSH10", "PUSH11", "PUSH12", "PUSH13", "PUSH14",
        "PUSH15", "PUSH16", "PUSH17", "PUSH18", "PUSH19", "PUSH20", "PUSH21",
        "PUSH22", "PUSH23", "PUSH24", "PUSH25", "PUSH26", "PUSH27", "PUSH28",
        "PUSH29", "PUSH30", "PUSH31", "PUSH32"};
    static const char* dup_names[16] = {
        "DUP1", "DUP2",  "DUP3",  "DUP4",  "DUP5",  "DUP6",  "DUP7",  "DUP8",
        "DUP9", "DUP10", "DUP11", "DUP12", "DUP13", "DUP14", "DUP15", "DUP16"};
    static const char* swap_names[16] = {
        "SWAP1", "SWAP2",  "SWAP3",  "SWAP4",  "SWAP5",  "SWAP6",
        "SWAP7", "SWAP8",  "SWAP9",  "SWAP10", "SWAP11", "SWAP12",
        "SWAP13", "SWAP14", "SWAP15", "SWAP16"};
    static const char* log_names[5] = {"LOG0", "LOG1", "LOG2", "LOG3", "LOG4"};
    for (int i = 0; i < 32; ++i)
        set(std::uint8_t(0x60 + i), push_names[i], 0, 1);
    for (int i = 0; i < 16; ++i)
        set(std::uint8_t(0x80 + i), dup_names[i], std::uint8_t(i + 1),
            std::uint8_t(i + 2));
    for (int i = 0; i < 16; ++i)
        set(std::uint8_t(0x90 + i), swap_names[i], std::uint8_t(i + 2),
            std::uint8_t(i + 2));
    for (int i = 0; i < 5; ++i)
        set(std::uint8_t(0xa0 + i), log_names[i], std::uint8_t(i + 2), 0);
    set(CREATE, "CREATE", 3, 1);
    set(CALL, "CALL", 7, 1);
    set(CALLCODE, "CALLCODE", 7, 1);
    set(RETURN, "RETURN", 2, 0);
    set(DELEGATECALL, "DELEGATECALL", 6, 1);
    set(CREATE2, "CREATE2", 4, 1);
    set(STATICCALL, "STATICCALL", 6, 1);
    set(REVERT, "REVERT", 2, 0);
    set(INVALID, "INVALID", 0, 0);
    set(SELFDESTRUCT, "SELFDESTRUCT", 1, 0);
    return t;
}

}  // namespace detail

inline const OpcodeInfo& info(std::uint8_t op) {
    static const std::array<OpcodeInfo, 256> table = detail::build_table();
    return table[op];
}

inline bool is_push(std::uint8_t op) { return op >= 0x60 && op <= 0x7f; }
inline std::size_t push_width(std::uint8_t op) { return op - 0x5f; }
inline bool is_dup(std::uint8_t op) { return op >= 0x80 && op <= 0x8f; }
inline bool is_swap(std::uint8_t op) { return op >= 0x90 && op <= 0x9f; }

// STOP/RETURN/REVERT/SELFDESTRUCT plus INVALID (and any unknown byte, which
// decodes to INVALID) terminate execution.
inline bool is_halting(std::uint8_t op, bool known = true) {
    if (!known) return true;
    return op == STOP || op == RETURN || op == REVERT || op == INVALID ||
           op == SELFDESTRUCT;
}

inline bool alters_control(std::uint8_t op, bool known = true) {
    return op == JUMP || op == JUMPI || is_halting(op, known);
}

struct Instruction {
    std::size_t offset = 0;        // byte index from 0x00
    std::uint8_t opcode = INVALID;
    bool known = false;            // false: undefined byte decoded as INVALID
    std::optional<u256> push_operand;
    std::size_t width = 1;         // 1 + operand bytes for PUSH
    bool truncated = false;        // trailing PUSH ran past end of code

    const char* mnemonic() const { return info(opcode).name; }
    bool halting() const { return is_halting(opcode, known); }
};

struct Program {
    std::vector<std::uint8_t> code;
    std::vector<Instruction> instructions;
    std::set<std::size_t> jumpdests;

    bool is_jumpdest(std::size_t offset) const {
        return jumpdests.count(offset) != 0;
    }
    bool is_jumpdest(const u256& v) const {
        return fits_offset(v) && is_jumpdest(to_offset(v));
    }
    // Index into instructions by byte offset, or npos.
    std::size_t index_of(std::size_t offset) const {
        auto it = std::lower_bound(
            instructions.begin(), instructions.end(), offset,
            [](const Instruction& i, std::size_t o) { return i.offset < o; });
        if (it == instructions.end() || it->offset != offset)
            return std::size_t(-1);
        return std::size_t(it - instructions.begin());
    }
};

inline std::vector<std::uint8_t> parse_hex(std::string_view text) {
    // tolerate surrounding whitespace and an optional 0x prefix
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
        text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
        text.remove_suffix(1);
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
        text.remove_prefix(2);
    if (text.size() % 2 != 0)
        throw MalformedHex("odd number of hex digits");
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        int hi = nibble(text[i]), lo = nibble(text[i + 1]);
        if (hi < 0 || lo < 0)
            throw MalformedHex(std::string("bad hex character at index ") +
                               std::to_string(i));
        out.push_back(std::uint8_t(hi << 4 | lo));
    }
    return out;
}

inline Program decode_bytes(std::vector<std::uint8_t> code) {
    Program p;
    p.code = std::move(code);
    std::size_t off = 0;
    while (off < p.code.size()) {
        Instruction ins;
        ins.offset = off;
        std::uint8_t b = p.code[off];
        const OpcodeInfo& oi = info(b);
        ins.opcode = b;
        ins.known = oi.known;
        if (is_push(b)) {
            std::size_t w = push_width(b);
            u256 v = 0;
            for (std::size_t i = 0; i < w; ++i) {
                v <<= 8;
                std::size_t at = off + 1 + i;
                if (at < p.code.size())
                    v |= p.code[at];
                else
                    ins.truncated = true;  // zero-padded past end of code
            }
            ins.push_operand = v;
            ins.width = 1 + w;
            off += 1 + w;
            if (off > p.code.size()) off = p.code.size();
        } else {
            ins.width = 1;
            if (b == JUMPDEST && oi.known) p.jumpdests.insert(ins.offset);
            off += 1;
        }
        p.instructions.push_back(ins);
    }
    return p;
}

inline Program decode(std::string_view hex_text) {
    return decode_bytes(parse_hex(hex_text));
}

// Re-encodes the instruction stream; a decoded Program round-trips exactly
// except for zero-padding introduced by a truncated trailing PUSH.
inline std::vector<std::uint8_t> encode(const Program& p) {
    std::vector<std::uint8_t> out;
    for (const auto& ins : p.instructions) {
        out.push_back(ins.opcode);
        if (ins.push_operand) {
            std::size_t w = push_width(ins.opcode);
            u256 v = *ins.push_operand;
            std::vector<std::uint8_t> bytes(w);
            for (std::size_t i = 0; i < w; ++i) {
                bytes[w - 1 - i] = std::uint8_t(v & 0xff);
                v >>= 8;
            }
            std::size_t emit = w;
            if (ins.truncated) emit = p.code.size() - ins.offset - 1;
            out.insert(out.end(), bytes.begin(), bytes.begin() + emit);
        }
    }
    return out;
}

struct StackArity {
    int pops;
    int pushes;
};

inline StackArity stack_arity(std::uint8_t op) {
    const OpcodeInfo& oi = info(op);
    return {oi.pops, oi.pushes};
}

inline std::string to_hex_string(const std::vector<std::uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

// One instruction per line: hex offset, mnemonic, operand.
inline std::string disassembly(const Program& p) {
    std::ostringstream os;
    for (const auto& ins : p.instructions) {
        os << "0x" << std::hex << ins.offset << ": " << ins.mnemonic();
        if (ins.push_operand)
            os << " 0x" << std::hex << *ins.push_operand
               << (ins.truncated ? " (truncated)" : "");
        os << "\n";
    }
    return os.str();
}

}  // namespace febi::evm
