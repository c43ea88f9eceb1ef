#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <vector>

namespace stackcompat {

/// Result of a one-to-one matching between a left set of size L and a right
/// set of size R. left_partner[i] is the right index matched to i.
struct Matching {
  std::vector<std::optional<std::size_t>> left_partner;
  std::vector<std::optional<std::size_t>> right_partner;
};

/// Gale-Shapley stable matching with cost-derived preferences on both sides.
///
/// Every pair is acceptable. Left element i ranks right elements by
/// (cost(i, j), right_tiebreak(j)) ascending, right element j ranks left
/// elements by (cost(i, j), left_tiebreak(i)) ascending. Left proposes. With
/// unequal set sizes the surplus on the larger side stays unmatched.
///
/// `Cost` is callable as cost(i, j) returning an ordered value;
/// tiebreakers are callable as tiebreak(index) returning an ordered value.
template <class Cost, class LeftTie, class RightTie>
Matching stable_match(std::size_t left_size, std::size_t right_size, Cost&& cost,
                      LeftTie&& left_tiebreak, RightTie&& right_tiebreak) {
  Matching m;
  m.left_partner.assign(left_size, std::nullopt);
  m.right_partner.assign(right_size, std::nullopt);
  if (left_size == 0 || right_size == 0) return m;

  std::vector<std::vector<std::size_t>> prefs(left_size);
  for (std::size_t i = 0; i < left_size; ++i) {
    auto& p = prefs[i];
    p.resize(right_size);
    for (std::size_t j = 0; j < right_size; ++j) p[j] = j;
    std::stable_sort(p.begin(), p.end(), [&](std::size_t a, std::size_t b) {
      auto ca = cost(i, a), cb = cost(i, b);
      if (ca != cb) return ca < cb;
      return right_tiebreak(a) < right_tiebreak(b);
    });
  }
  auto right_prefers = [&](std::size_t j, std::size_t a, std::size_t b) {
    auto ca = cost(a, j), cb = cost(b, j);
    if (ca != cb) return ca < cb;
    return left_tiebreak(a) < left_tiebreak(b);
  };

  std::vector<std::size_t> next(left_size, 0);
  std::vector<std::size_t> free;
  for (std::size_t i = left_size; i-- > 0;) free.push_back(i);
  while (!free.empty()) {
    const auto i = free.back();
    if (next[i] == right_size) {
      free.pop_back();  // exhausted; stays single
      continue;
    }
    const auto j = prefs[i][next[i]++];
    auto& holder = m.right_partner[j];
    if (!holder) {
      holder = i;
      m.left_partner[i] = j;
      free.pop_back();
    } else if (right_prefers(j, i, *holder)) {
      m.left_partner[*holder].reset();
      free.back() = *holder;
      holder = i;
      m.left_partner[i] = j;
    }
  }
  return m;
}

/// True when no pair (i, j) outside the matching would both strictly prefer
/// each other to their current assignment (being single counts as worst).
template <class Cost, class LeftTie, class RightTie>
bool is_stable(const Matching& m, Cost&& cost, LeftTie&& left_tiebreak, RightTie&& right_tiebreak) {
  const auto L = m.left_partner.size(), R = m.right_partner.size();
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < R; ++j) {
      if (m.left_partner[i] == j) continue;
      bool left_wants = !m.left_partner[i];
      if (!left_wants) {
        auto cur = *m.left_partner[i];
        auto c_new = cost(i, j), c_cur = cost(i, cur);
        left_wants = c_new < c_cur || (c_new == c_cur && right_tiebreak(j) < right_tiebreak(cur));
      }
      bool right_wants = !m.right_partner[j];
      if (!right_wants) {
        auto cur = *m.right_partner[j];
        auto c_new = cost(i, j), c_cur = cost(cur, j);
        right_wants = c_new < c_cur || (c_new == c_cur && left_tiebreak(i) < left_tiebreak(cur));
      }
      if (left_wants && right_wants) return false;
    }
  }
  return true;
}

}  // namespace stackcompat
