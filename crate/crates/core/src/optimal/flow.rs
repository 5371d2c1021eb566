//! Min-cost flow by successive shortest paths.
//!
//! Negative edge costs are allowed as long as the network has no negative
//! cycle. Initial potentials come from Bellman-Ford passes in node order, which
//! settle in a single pass when nodes are numbered topologically; after that
//! every augmentation runs Dijkstra on reduced costs.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone, Default)]
pub struct MinCostFlow {
    adj: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

/// Outcome of [`MinCostFlow::run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowResult {
    pub flow: i64,
    pub cost: i64,
}

const INF: i64 = i64::MAX / 4;

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self { adj: vec![Vec::new(); nodes], edges: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Adds `from -> to` and returns its id; the reverse residual edge is `id ^ 1`.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently on edge `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.edges[id ^ 1].cap
    }

    fn initial_potentials(&self, source: usize) -> Vec<i64> {
        let n = self.node_count();
        let mut dist = vec![INF; n];
        dist[source] = 0;
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == INF {
                    continue;
                }
                for &id in &self.adj[u] {
                    let e = self.edges[id];
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] {
                        dist[e.to] = dist[u] + e.cost;
                        changed = true;
                    }
                }
            }
            if !changed {
                return dist;
            }
        }
        panic!("network has a negative cycle");
    }

    /// Sends up to `limit` units from `source` to `sink` at minimum cost.
    pub fn run(&mut self, source: usize, sink: usize, limit: i64) -> FlowResult {
        let n = self.node_count();
        let mut potential = self.initial_potentials(source);
        let mut total = FlowResult { flow: 0, cost: 0 };
        let mut dist = vec![INF; n];
        let mut parent = vec![usize::MAX; n];

        while total.flow < limit {
            dist.fill(INF);
            parent.fill(usize::MAX);
            dist[source] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, source)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &id in &self.adj[u] {
                    let e = self.edges[id];
                    if e.cap <= 0 || potential[e.to] == INF {
                        continue;
                    }
                    let reduced = e.cost + potential[u] - potential[e.to];
                    debug_assert!(reduced >= 0, "negative reduced cost {reduced}");
                    let nd = d + reduced;
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        parent[e.to] = id;
                        heap.push(Reverse((nd, e.to)));
                    }
                }
            }
            if dist[sink] == INF {
                break;
            }
            for v in 0..n {
                if dist[v] < INF {
                    potential[v] += dist[v];
                }
            }

            let mut push = limit - total.flow;
            let mut v = sink;
            while v != source {
                let id = parent[v];
                push = push.min(self.edges[id].cap);
                v = self.edges[id ^ 1].to;
            }
            let mut v = sink;
            while v != source {
                let id = parent[v];
                self.edges[id].cap -= push;
                self.edges[id ^ 1].cap += push;
                total.cost += push * self.edges[id].cost;
                v = self.edges[id ^ 1].to;
            }
            total.flow += push;
        }
        total
    }
}
