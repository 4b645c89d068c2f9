#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace cfaso {

// Sorted set of AP indices. Kept as a plain vector because sets are tiny
// (tens of entries) and ordering doubles as the deterministic tie-break.
struct ActiveSet {
  std::vector<int> aps;

  ActiveSet() = default;
  explicit ActiveSet(std::vector<int> ids) : aps(std::move(ids)) {
    std::sort(aps.begin(), aps.end());
    aps.erase(std::unique(aps.begin(), aps.end()), aps.end());
  }
  ActiveSet(std::initializer_list<int> ids) : ActiveSet(std::vector<int>(ids)) {}

  static ActiveSet full(int num_aps) {
    std::vector<int> ids(static_cast<std::size_t>(num_aps));
    for (int l = 0; l < num_aps; ++l) ids[static_cast<std::size_t>(l)] = l;
    return ActiveSet(std::move(ids));
  }

  int size() const { return static_cast<int>(aps.size()); }
  bool empty() const { return aps.empty(); }

  bool contains(int l) const {
    return std::binary_search(aps.begin(), aps.end(), l);
  }

  void add(int l) {
    auto it = std::lower_bound(aps.begin(), aps.end(), l);
    if (it == aps.end() || *it != l) aps.insert(it, l);
  }

  void remove(int l) {
    auto it = std::lower_bound(aps.begin(), aps.end(), l);
    if (it != aps.end() && *it == l) aps.erase(it);
  }

  // Bitmask over global AP indices; valid for networks of up to 64 APs.
  std::uint64_t mask() const {
    std::uint64_t m = 0;
    for (int l : aps) m |= (1ULL << static_cast<unsigned>(l));
    return m;
  }

  void validate(int num_aps) const {
    int prev = -1;
    for (int l : aps) {
      if (l < 0 || l >= num_aps) throw std::invalid_argument("ActiveSet: AP index out of range");
      if (l <= prev) throw std::invalid_argument("ActiveSet: indices must be strictly increasing");
      prev = l;
    }
  }

  bool operator==(const ActiveSet& o) const { return aps == o.aps; }
};

}  // namespace cfaso
