#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace pointpred::detail {

// Nodes reachable from `from` in one or more steps.
inline std::vector<char> reachable_from(const std::vector<std::vector<std::size_t>>& adj, std::size_t from) {
  std::vector<char> seen(adj.size(), 0);
  std::vector<std::size_t> stack(adj[from].begin(), adj[from].end());
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (seen[v]) continue;
    seen[v] = 1;
    for (auto w : adj[v])
      if (!seen[w]) stack.push_back(w);
  }
  return seen;
}

/// Closed communicating classes whose members can revisit themselves, each
/// sorted ascending, ordered by smallest member.
inline std::vector<std::vector<std::size_t>> recurrent_classes(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  std::vector<std::vector<char>> reach(n);
  for (std::size_t i = 0; i < n; ++i) reach[i] = reachable_from(adj, i);
  std::vector<char> assigned(n, 0);
  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < n; ++i) {
    if (assigned[i] || !reach[i][i]) continue;
    bool closed = true;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < n; ++j) {
      if (!reach[i][j]) continue;
      if (!reach[j][i]) {
        closed = false;
        break;
      }
      members.push_back(j);
    }
    if (!closed) continue;
    for (auto m : members) assigned[m] = 1;
    classes.push_back(std::move(members));
  }
  return classes;
}

}  // namespace pointpred::detail
