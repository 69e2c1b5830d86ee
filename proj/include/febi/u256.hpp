#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <sstream>
#include <string>

namespace febi {

// 256-bit unsigned word, the native value type of the EVM operand stack.
using u256 = boost::multiprecision::uint256_t;

inline std::string to_hex(const u256& v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

inline bool fits_offset(const u256& v) {
    return v <= u256(0xffffffffu);
}

inline std::size_t to_offset(const u256& v) {
    return static_cast<std::size_t>(static_cast<std::uint64_t>(v));
}

}  // namespace febi
