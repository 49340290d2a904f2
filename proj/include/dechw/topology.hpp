#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dechw/errors.hpp"
#include "dechw/rng.hpp"

namespace dechw {

// Static undirected communication graph; no self-loops.
struct Topology {
  int n_nodes = 0;
  std::vector<std::vector<int>> adj;  // sorted neighbor lists
  std::string model;                  // "erdos-renyi" or "edge-list"
  double p = 0.0;
  std::uint64_t seed = 0;

  bool adjacent(int i, int j) const {
    check(i);
    check(j);
    return std::binary_search(adj[i].begin(), adj[i].end(), j);
  }

  const std::vector<int>& neighborhood(int i) const {
    check(i);
    return adj[i];
  }

  long edge_count() const {
    long deg_sum = 0;
    for (const auto& n : adj) deg_sum += static_cast<long>(n.size());
    return deg_sum / 2;
  }

  void check(int i) const {
    if (i < 0 || i >= n_nodes)
      throw IndexError("node id " + std::to_string(i) + " outside [0," + std::to_string(n_nodes) + ")");
  }
};

inline Topology from_edge_list(int n, const std::vector<std::pair<int, int>>& edges,
                               std::string model = "edge-list") {
  if (n < 1) throw ConfigError("topology needs n >= 1");
  Topology t;
  t.n_nodes = n;
  t.model = std::move(model);
  t.adj.assign(n, {});
  for (auto [i, j] : edges) {
    if (i == j) throw ConfigError("self-loop " + std::to_string(i) + " rejected");
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw ConfigError("edge (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    t.adj[i].push_back(j);
    t.adj[j].push_back(i);
  }
  for (auto& nb : t.adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return t;
}

// Every unordered pair is an edge independently with probability p.
inline Topology gen_erdos_renyi(int n, double p, std::uint64_t seed) {
  if (n < 1) throw ConfigError("topology needs n >= 1");
  if (p < 0.0 || p > 1.0) throw ConfigError("edge probability p must lie in [0,1]");
  std::mt19937_64 rng = make_rng({seed, stream::kTopology});
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng)) edges.emplace_back(i, j);
  Topology t = from_edge_list(n, edges, "erdos-renyi");
  t.p = p;
  t.seed = seed;
  return t;
}

// Text format: one "i j" pair per line, 0-based, i < j; blank lines and
// #-comments allowed.
inline Topology load_edge_list(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open edge list " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string trimmed = line;
    if (auto hash = trimmed.find('#'); hash != std::string::npos) trimmed.resize(hash);
    std::istringstream ss(trimmed);
    int i, j;
    if (!(ss >> i)) continue;  // blank or comment-only line
    if (!(ss >> j))
      throw IngestError(path + ":" + std::to_string(lineno) + ": expected 'i j' pair");
    if (i >= j)
      throw IngestError(path + ":" + std::to_string(lineno) + ": edges must satisfy i < j");
    edges.emplace_back(i, j);
  }
  return from_edge_list(n, edges);
}

inline bool is_connected(const Topology& t) {
  if (t.n_nodes <= 1) return true;
  std::vector<char> seen(t.n_nodes, 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  int reached = 1;
  while (!queue.empty()) {
    int i = queue.front();
    queue.pop_front();
    for (int j : t.adj[i]) {
      if (!seen[j]) {
        seen[j] = 1;
        ++reached;
        queue.push_back(j);
      }
    }
  }
  return reached == t.n_nodes;
}

}  // namespace dechw
