//! Maximum-weight bipartite matching by successive shortest paths.
//!
//! Left nodes may stay unmatched at zero gain. The flow network is
//! `S → left → {right → T, T}` with unit capacities; every left node carries
//! one unit, either through a right node (cost `−gain`) or directly to `T`
//! (cost 0). Dijkstra runs on reduced costs; potentials start from the
//! acyclic shortest-path labels of the initial network.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy)]
struct Edge {
    to: usize,
    rev: usize,
    cap: u8,
    cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `mate[i]` is the right node assigned to left node `i`.
    pub mate: Vec<Option<usize>>,
    pub value: f64,
    /// Gain from adding one more copy of each left node to the solved
    /// instance (0 when the copy would stay unmatched).
    pub marginal_gain: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn add(&mut self, from: usize, to: usize, cost: f64) {
        let (rf, rt) = (self.adj[to].len(), self.adj[from].len());
        self.adj[from].push(Edge { to, rev: rf, cap: 1, cost });
        self.adj[to].push(Edge { to: from, rev: rt, cap: 0, cost: -cost });
    }
}

/// `edges` are `(left, right, gain)`; duplicate pairs keep the first.
pub fn max_weight_matching(n_left: usize, n_right: usize, edges: &[(usize, usize, f64)]) -> Matching {
    // Left nodes without edges stay unmatched at zero marginal gain, so
    // only the others enter the flow network.
    let mut active = vec![usize::MAX; n_left];
    for &(i, _, _) in edges {
        assert!(i < n_left, "bad matching edge left index {i}");
        active[i] = 0;
    }
    let mut ids = Vec::new();
    for (i, a) in active.iter_mut().enumerate() {
        if *a == 0 {
            *a = ids.len();
            ids.push(i);
        }
    }
    let local: Vec<(usize, usize, f64)> = edges.iter().map(|&(i, j, w)| (active[i], j, w)).collect();
    let m = solve(ids.len(), n_right, &local);
    let mut mate = vec![None; n_left];
    let mut marginal_gain = vec![0.0; n_left];
    for (k, &i) in ids.iter().enumerate() {
        mate[i] = m.mate[k];
        marginal_gain[i] = m.marginal_gain[k];
    }
    Matching { mate, value: m.value, marginal_gain }
}

fn solve(n_left: usize, n_right: usize, edges: &[(usize, usize, f64)]) -> Matching {
    let s = 0;
    let left = |i: usize| 1 + i;
    let right = |j: usize| 1 + n_left + j;
    let t = 1 + n_left + n_right;
    let n = t + 1;
    let mut g = Graph { adj: vec![Vec::new(); n] };
    let mut gains = vec![Vec::new(); n_left];
    for i in 0..n_left {
        g.add(s, left(i), 0.0);
        g.add(left(i), t, 0.0);
    }
    let mut seen = std::collections::HashSet::new();
    for &(i, j, w) in edges {
        assert!(i < n_left && j < n_right && w.is_finite(), "bad matching edge ({i}, {j}, {w})");
        if seen.insert((i, j)) {
            g.add(left(i), right(j), -w);
            gains[i].push((j, w));
        }
    }
    for j in 0..n_right {
        g.add(right(j), t, 0.0);
    }

    // Initial potentials: shortest distances in the layered network.
    let mut pot = vec![0.0; n];
    for j in 0..n_right {
        pot[right(j)] = f64::INFINITY;
    }
    for &(_, j, w) in edges {
        pot[right(j)] = f64::min(pot[right(j)], -w);
    }
    for j in 0..n_right {
        if pot[right(j)].is_finite() {
            pot[t] = f64::min(pot[t], pot[right(j)]);
        } else {
            pot[right(j)] = 0.0;
        }
    }

    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; n];
    for _ in 0..n_left {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = None);
        dist[s] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(Item(0.0, s));
        while let Some(Item(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for (k, e) in g.adj[u].iter().enumerate() {
                if e.cap == 0 {
                    continue;
                }
                let rc = (e.cost + pot[u] - pot[e.to]).max(0.0);
                let nd = d + rc;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = Some((u, k));
                    heap.push(Item(nd, e.to));
                }
            }
        }
        if !dist[t].is_finite() {
            break;
        }
        for v in 0..n {
            if dist[v].is_finite() {
                pot[v] += dist[v];
            }
        }
        let mut v = t;
        while let Some((u, k)) = prev[v] {
            let rev = g.adj[u][k].rev;
            g.adj[u][k].cap -= 1;
            g.adj[v][rev].cap += 1;
            v = u;
        }
    }

    let mut mate = vec![None; n_left];
    let mut value = 0.0;
    for i in 0..n_left {
        for e in &g.adj[left(i)] {
            if e.cap == 0 && e.to != s && e.to != t && e.to >= right(0) {
                mate[i] = Some(e.to - right(0));
                value += -e.cost;
            }
        }
    }

    // Residual distances to T (Bellman-Ford backwards; no negative cycles at optimum).
    let mut to_t = vec![f64::INFINITY; n];
    to_t[t] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for u in 1..t {
            for e in &g.adj[u] {
                if e.cap > 0 && e.to != s && to_t[e.to].is_finite() {
                    let c = e.cost + to_t[e.to];
                    if c < to_t[u] - 1e-15 {
                        to_t[u] = c;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let marginal_gain = gains
        .iter()
        .map(|row| row.iter().map(|&(j, w)| w - to_t[right(j)]).fold(0.0, f64::max))
        .collect();
    Matching { mate, value, marginal_gain }
}
