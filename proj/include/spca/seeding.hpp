#pragma once

#include <cstdint>

namespace spca {

/// Independent random streams used by the simulation and solver.
enum class Stream : std::uint64_t { data = 1, mask = 2, solver_restart = 3, theta = 4, pilot = 5 };

/// splitmix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/**
 * Seed for one (cell, replicate, stream) triple:
 *
 *   mix64(mix64(mix64(mix64(root) ^ cell) ^ replicate) ^ stream)
 *
 * Each coordinate passes through a full mixing round before the next is folded in,
 * so neighbouring cells, replicates and streams get unrelated 64-bit seeds.
 */
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t cell, std::uint64_t replicate,
                                    Stream stream) noexcept {
  std::uint64_t h = mix64(root);
  h = mix64(h ^ cell);
  h = mix64(h ^ replicate);
  return mix64(h ^ static_cast<std::uint64_t>(stream));
}

}  // namespace spca
