#pragma once

// Keccak-256 (the original pre-NIST padding, as used for contract function
// selectors). Self-contained; no external crypto dependency.

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace febi::keccak {

namespace detail {

constexpr std::array<std::uint64_t, 24> kRoundConstants = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
    0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};

constexpr std::array<int, 24> kRotations = {1,  3,  6,  10, 15, 21, 28, 36,
                                            45, 55, 2,  14, 27, 41, 56, 8,
                                            25, 43, 62, 18, 39, 61, 20, 44};

constexpr std::array<int, 24> kPiLane = {10, 7,  11, 17, 18, 3,  5,  16,
                                         8,  21, 24, 4,  15, 23, 19, 13,
                                         12, 2,  20, 14, 22, 9,  6,  1};

inline std::uint64_t rotl(std::uint64_t x, int s) {
    return (x << s) | (x >> (64 - s));
}

inline void permute(std::array<std::uint64_t, 25>& a) {
    for (int round = 0; round < 24; ++round) {
        // theta
        std::uint64_t c[5];
        for (int x = 0; x < 5; ++x)
            c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
        for (int x = 0; x < 5; ++x) {
            std::uint64_t d = c[(x + 4) % 5] ^ rotl(c[(x + 1) % 5], 1);
            for (int y = 0; y < 25; y += 5) a[x + y] ^= d;
        }
        // rho + pi
        std::uint64_t t = a[1];
        for (int i = 0; i < 24; ++i) {
            int j = kPiLane[i];
            std::uint64_t tmp = a[j];
            a[j] = rotl(t, kRotations[i]);
            t = tmp;
        }
        // chi
        for (int y = 0; y < 25; y += 5) {
            std::uint64_t row[5];
            for (int x = 0; x < 5; ++x) row[x] = a[y + x];
            for (int x = 0; x < 5; ++x)
                a[y + x] = row[x] ^ (~row[(x + 1) % 5] & row[(x + 2) % 5]);
        }
        a[0] ^= kRoundConstants[round];
    }
}

}  // namespace detail

inline std::array<std::uint8_t, 32> hash256(std::string_view data) {
    constexpr std::size_t kRate = 136;  // 1088-bit rate for a 256-bit digest
    std::array<std::uint64_t, 25> state{};
    auto absorb_block = [&](const std::uint8_t* block) {
        for (std::size_t i = 0; i < kRate / 8; ++i) {
            std::uint64_t lane = 0;
            std::memcpy(&lane, block + i * 8, 8);  // little-endian hosts only
            state[i] ^= lane;
        }
        detail::permute(state);
    };

    const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
    std::size_t n = data.size();
    while (n >= kRate) {
        absorb_block(p);
        p += kRate;
        n -= kRate;
    }
    std::array<std::uint8_t, kRate> last{};
    std::memcpy(last.data(), p, n);
    last[n] = 0x01;  // Keccak padding, not the SHA-3 0x06
    last[kRate - 1] |= 0x80;
    absorb_block(last.data());

    std::array<std::uint8_t, 32> out{};
    std::memcpy(out.data(), state.data(), 32);
    return out;
}

// First four digest bytes as a big-endian word: the contract selector of a
// canonical signature string like "transfer(address,uint256)".
inline std::uint32_t selector(std::string_view signature) {
    auto d = hash256(signature);
    return (std::uint32_t(d[0]) << 24) | (std::uint32_t(d[1]) << 16) |
           (std::uint32_t(d[2]) << 8) | std::uint32_t(d[3]);
}

}  // namespace febi::keccak
