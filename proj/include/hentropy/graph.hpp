#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace hentropy {

/// Compressed adjacency: targets of v are targets[offsets[v] .. offsets[v+1]).
struct Csr {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> targets;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> out(std::size_t v) const {
    return {targets.data() + offsets[v], targets.data() + offsets[v + 1]};
  }

  Csr transposed() const {
    Csr t;
    std::size_t n = size();
    t.offsets.assign(n + 1, 0);
    for (auto w : targets) ++t.offsets[w + 1];
    for (std::size_t v = 0; v < n; ++v) t.offsets[v + 1] += t.offsets[v];
    t.targets.resize(targets.size());
    std::vector<std::uint32_t> fill(t.offsets.begin(), t.offsets.end() - 1);
    for (std::size_t v = 0; v < n; ++v)
      for (auto w : out(v)) t.targets[fill[w]++] = static_cast<std::uint32_t>(v);
    return t;
  }
};

struct SccPartition {
  std::vector<std::uint32_t> component;               // vertex -> component index
  std::vector<std::vector<std::uint32_t>> members;    // sorted vertex lists
  std::vector<bool> cyclic;                           // has an internal edge
};

/// Tarjan's algorithm with an explicit stack. Components are numbered by
/// their smallest vertex so the result does not depend on traversal order.
inline SccPartition strongly_connected_components(const Csr& g) {
  const std::uint32_t n = static_cast<std::uint32_t>(g.size());
  constexpr std::uint32_t kUnset = UINT32_MAX;
  std::vector<std::uint32_t> index(n, kUnset), low(n, 0), raw(n, kUnset);
  std::vector<bool> on_stack(n, false);
  std::vector<std::uint32_t> stack;
  struct Frame {
    std::uint32_t v, next;
  };
  std::vector<Frame> call;
  std::uint32_t counter = 0, ncomp = 0;

  for (std::uint32_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    call.push_back({root, g.offsets[root]});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      std::uint32_t v = f.v;
      if (f.next < g.offsets[v + 1]) {
        std::uint32_t w = g.targets[f.next++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, g.offsets[w]});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
        continue;
      }
      if (low[v] == index[v]) {
        std::uint32_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          raw[w] = ncomp;
        } while (w != v);
        ++ncomp;
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }

  // Renumber by smallest member.
  std::vector<std::uint32_t> relabel(ncomp, kUnset);
  std::uint32_t next = 0;
  for (std::uint32_t v = 0; v < n; ++v)
    if (relabel[raw[v]] == kUnset) relabel[raw[v]] = next++;
  SccPartition out;
  out.component.resize(n);
  out.members.resize(ncomp);
  out.cyclic.assign(ncomp, false);
  for (std::uint32_t v = 0; v < n; ++v) {
    out.component[v] = relabel[raw[v]];
    out.members[out.component[v]].push_back(v);
  }
  for (std::uint32_t v = 0; v < n; ++v)
    for (auto w : g.out(v))
      if (out.component[w] == out.component[v]) out.cyclic[out.component[v]] = true;
  return out;
}

}  // namespace hentropy
