// Copyright 2026 The ClickSeg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Exact s-t max flow (Dinic) and the induced minimum cut.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <vector>

#include "clickseg/error.hpp"

namespace clickseg::graphcut {

class FlowNetwork {
 public:
  FlowNetwork(std::size_t nodes, std::size_t source, std::size_t sink)
      : source_(source), sink_(sink), head_(nodes) {
    require(source < nodes && sink < nodes && source != sink, "flow network: invalid terminals");
  }

  std::size_t node_count() const { return head_.size(); }
  std::size_t source() const { return source_; }
  std::size_t sink() const { return sink_; }

  /// Arc u->v with `capacity`, plus the reverse arc v->u with `reverse_capacity`.
  /// Capacities may be +infinity.
  void add_edge(std::size_t u, std::size_t v, double capacity, double reverse_capacity = 0.0) {
    require(u < node_count() && v < node_count() && u != v, "flow network: invalid arc endpoints");
    require(capacity >= 0.0 && reverse_capacity >= 0.0, "flow network: capacities must be >= 0");
    require(!(v == source_ && capacity > 0.0) && !(u == source_ && reverse_capacity > 0.0),
            "flow network: arc into the source");
    require(!(u == sink_ && capacity > 0.0) && !(v == sink_ && reverse_capacity > 0.0),
            "flow network: arc out of the sink");
    head_[u].push_back(arcs_.size());
    arcs_.push_back({v, capacity});
    head_[v].push_back(arcs_.size());
    arcs_.push_back({u, reverse_capacity});
  }

  /// Runs to completion; the residual network is kept for min_cut_source_side().
  double max_flow() {
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    level_.assign(node_count(), -1);
    next_.assign(node_count(), 0);
    while (bfs()) {
      std::fill(next_.begin(), next_.end(), 0);
      while (true) {
        const double f = augment();
        if (f <= 0.0) break;
        if (f == inf) return inf;
        total += f;
      }
    }
    return total;
  }

  /// Nodes reachable from the source in the residual network.
  std::vector<bool> min_cut_source_side() const {
    std::vector<bool> seen(node_count(), false);
    std::vector<std::size_t> stack{source_};
    seen[source_] = true;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t a : head_[u]) {
        const Arc& arc = arcs_[a];
        if (arc.residual > 0.0 && !seen[arc.to]) {
          seen[arc.to] = true;
          stack.push_back(arc.to);
        }
      }
    }
    return seen;
  }

 private:
  struct Arc {
    std::size_t to;
    double residual;
  };

  bool bfs() {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[source_] = 0;
    q.push(source_);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t a : head_[u]) {
        const Arc& arc = arcs_[a];
        if (arc.residual > 0.0 && level_[arc.to] < 0) {
          level_[arc.to] = level_[u] + 1;
          q.push(arc.to);
        }
      }
    }
    return level_[sink_] >= 0;
  }

  // One blocking-flow augmenting path along the level graph, found iteratively.
  double augment() {
    path_.clear();
    std::size_t u = source_;
    while (u != sink_) {
      bool advanced = false;
      for (std::size_t& i = next_[u]; i < head_[u].size(); ++i) {
        const std::size_t a = head_[u][i];
        const Arc& arc = arcs_[a];
        if (arc.residual > 0.0 && level_[arc.to] == level_[u] + 1) {
          path_.push_back(a);
          u = arc.to;
          advanced = true;
          break;
        }
      }
      if (advanced) continue;
      if (u == source_) return 0.0;
      level_[u] = -1;  // dead end
      path_.pop_back();
      u = path_.empty() ? source_ : arcs_[path_.back()].to;
      ++next_[u];
    }
    double f = std::numeric_limits<double>::infinity();
    for (std::size_t a : path_) f = std::min(f, arcs_[a].residual);
    if (std::isinf(f)) return f;
    for (std::size_t a : path_) {
      arcs_[a].residual -= f;
      arcs_[a ^ 1].residual += f;
    }
    return f;
  }

  std::size_t source_;
  std::size_t sink_;
  std::vector<std::vector<std::size_t>> head_;
  std::vector<Arc> arcs_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
  std::vector<std::size_t> path_;
};

struct MinCut {
  double flow = 0.0;
  std::vector<bool> source_side;
};

inline MinCut max_flow_min_cut(FlowNetwork net) {
  MinCut out;
  out.flow = net.max_flow();
  out.source_side = net.min_cut_source_side();
  return out;
}

}  // namespace clickseg::graphcut
