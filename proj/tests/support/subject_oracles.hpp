#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

// Reference models of the shipped subjects, written against their source
// comments rather than the VM. Frozen outputs live next to each function.

namespace wcfuzz::testing {

/// Jump count of the insertion sort subject: 8 block entries per element
/// minus one, 3 per shift, and 2 fewer for each element that ends up at
/// the front of the sorted prefix.
inline std::uint64_t insertion_sort_jumps(std::span<const std::uint8_t> a) {
  const std::size_t n = a.size();
  std::uint64_t inversions = 0, front = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) inversions += a[i] > a[j];
  for (std::size_t i = 1; i < n; ++i) front += *std::min_element(a.begin(), a.begin() + i) > a[i];
  return 8 * n - 1 + 3 * inversions - 2 * front;
}

inline constexpr std::uint64_t kInsertionSort3Sorted = 23;  // [0,1,2]
inline constexpr std::uint64_t kInsertionSort8Worst = 133;  // [8,7,...,1]

/// Gas charged for one item of the gas contract.
inline std::int64_t gas_item(std::int64_t v) {
  std::int64_t gas = 3;
  if (v > 0) {
    if (v == 7) gas += 20 * v;
    gas += 5 * v + 2;
  } else if (v < 0) {
    gas += 7;
  }
  return gas;
}

/// Maximum total gas over every assignment of `n` items in [lo, hi].
inline std::int64_t gas_bruteforce_max(std::size_t n, std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> v(n, lo);
  std::int64_t best = 0;
  for (;;) {
    std::int64_t total = 0;
    for (auto x : v) total += gas_item(x);
    best = std::max(best, total);
    std::size_t i = 0;
    while (i < n && v[i] == hi) v[i++] = lo;
    if (i == n) return best;
    ++v[i];
  }
}

inline constexpr std::int64_t kGas5Max = 900;

/// Bucket of an 8-byte key in the hash table subject.
inline std::int64_t times33_bucket(std::span<const std::uint8_t> key) {
  std::int64_t h = 5381;
  for (auto c : key) h = h * 33 + c;
  return h % 64;
}

/// `keys` distinct 8-byte keys that all land in bucket 0.
inline std::vector<std::uint8_t> one_bucket_input(std::size_t keys) {
  std::vector<std::uint8_t> out;
  for (std::size_t k = 0; k < keys; ++k) {
    std::uint8_t key[8] = {'c', 'o', 'l', 'l', 'i', 'd', static_cast<std::uint8_t>(k), 0};
    key[7] = static_cast<std::uint8_t>((64 - times33_bucket(key)) % 64);
    out.insert(out.end(), key, key + 8);
  }
  return out;
}

}  // namespace wcfuzz::testing
