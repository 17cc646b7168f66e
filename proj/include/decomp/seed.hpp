#pragma once

#include <cstdint>

namespace decomp {

// splitmix64 finalizer
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic child seed for stream `stream` (and optional sub-index) of
/// a root seed. Distinct (stream, index) pairs give unrelated streams.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::int64_t stream,
                                    std::int64_t index = 0) noexcept {
  std::uint64_t s = mix_seed(root ^ 0x6a09e667f3bcc909ULL);
  s = mix_seed(s ^ static_cast<std::uint64_t>(stream));
  return mix_seed(s ^ (static_cast<std::uint64_t>(index) * 0xff51afd7ed558ccdULL));
}

}  // namespace decomp
