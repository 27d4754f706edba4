//! Two-label MRF smoothing of the posterior field, solved exactly by min-cut.
//!
//! Energy: `Σ_p U_p(l_p) + λ · #{4-adjacent (p, q) : l_p ≠ l_q}` with
//! `U_p(bg) = −ln max(P(bg), ε)` and `U_p(fg) = −ln max(1 − P(bg), ε)`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::maps::{LabelMask, PosteriorMap};

const EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrfConfig {
    pub lambda: f64,
}

impl Default for MrfConfig {
    fn default() -> Self {
        MrfConfig { lambda: 1.0 }
    }
}

impl MrfConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(MrfConfig { lambda })
    }
}

/// `(U(bg), U(fg))` for one posterior value.
pub fn unary_costs(p_bg: f64) -> (f64, f64) {
    (-(p_bg.max(EPSILON)).ln(), -((1.0 - p_bg).max(EPSILON)).ln())
}

/// Energy of a labeling under the posterior field.
pub fn energy(posterior: &PosteriorMap, labels: &LabelMask, lambda: f64) -> f64 {
    assert!(posterior.width() == labels.width() && posterior.height() == labels.height());
    let (w, h) = (posterior.width(), posterior.height());
    let mut e = 0.0;
    for y in 0..h {
        for x in 0..w {
            let (bg, fg) = unary_costs(posterior.get(x, y));
            let l = labels.is_foreground(x, y);
            e += if l { fg } else { bg };
            if x + 1 < w && labels.is_foreground(x + 1, y) != l {
                e += lambda;
            }
            if y + 1 < h && labels.is_foreground(x, y + 1) != l {
                e += lambda;
            }
        }
    }
    e
}

/// Exact minimizer of the MRF energy. Pixels left on the source side of the
/// minimum cut are background; ties resolve to foreground.
pub fn mrf_smooth(posterior: &PosteriorMap, cfg: &MrfConfig) -> LabelMask {
    let (w, h) = (posterior.width() as usize, posterior.height() as usize);
    let n = w * h;
    let source = n;
    let sink = n + 1;
    let mut graph = FlowGraph::new(n + 2);
    for (i, &p) in posterior.values().iter().enumerate() {
        let (bg, fg) = unary_costs(p);
        // Cutting source->i labels i foreground; cutting i->sink labels it background.
        if fg > bg {
            graph.add_edge(source, i, fg - bg, 0.0);
        } else if bg > fg {
            graph.add_edge(i, sink, bg - fg, 0.0);
        }
    }
    if cfg.lambda > 0.0 {
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if x + 1 < w {
                    graph.add_edge(i, i + 1, cfg.lambda, cfg.lambda);
                }
                if y + 1 < h {
                    graph.add_edge(i, i + w, cfg.lambda, cfg.lambda);
                }
            }
        }
    }
    graph.max_flow(source, sink);
    let reachable = graph.reachable_from(source);
    LabelMask::new(
        posterior.width(),
        posterior.height(),
        reachable[..n].iter().map(|&r| !r).collect(),
    )
    .expect("sizes match")
}

/// Dinic's max-flow over a residual graph with paired edges.
struct FlowGraph {
    adjacency: Vec<Vec<usize>>,
    to: Vec<usize>,
    residual: Vec<f64>,
    level: Vec<i32>,
    cursor: Vec<usize>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph {
            adjacency: vec![Vec::new(); nodes],
            to: Vec::new(),
            residual: Vec::new(),
            level: vec![0; nodes],
            cursor: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, forward: f64, backward: f64) {
        self.adjacency[u].push(self.to.len());
        self.to.push(v);
        self.residual.push(forward);
        self.adjacency[v].push(self.to.len());
        self.to.push(u);
        self.residual.push(backward);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.fill(-1);
        self.level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adjacency[u] {
                let v = self.to[e];
                if self.residual[e] > 0.0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    // Iterative blocking-flow DFS; recursion depth would follow path length.
    fn augment(&mut self, s: usize, t: usize) -> f64 {
        let mut pushed = 0.0;
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let f = path.iter().map(|&e| self.residual[e]).fold(f64::INFINITY, f64::min);
                for &e in &path {
                    self.residual[e] -= f;
                    self.residual[e ^ 1] += f;
                }
                pushed += f;
                // Restart from the tail of the first saturated edge.
                let cut = path.iter().position(|&e| self.residual[e] <= 0.0).unwrap_or(0);
                path.truncate(cut);
                u = if cut == 0 { s } else { self.to[path[cut - 1]] };
                continue;
            }
            let mut advanced = false;
            while self.cursor[u] < self.adjacency[u].len() {
                let e = self.adjacency[u][self.cursor[u]];
                let v = self.to[e];
                if self.residual[e] > 0.0 && self.level[v] == self.level[u] + 1 {
                    path.push(e);
                    u = v;
                    advanced = true;
                    break;
                }
                self.cursor[u] += 1;
            }
            if !advanced {
                if u == s {
                    return pushed;
                }
                // Dead end: retreat and skip the edge that led here.
                self.level[u] = -1;
                let e = path.pop().expect("non-source node has an incoming path edge");
                u = self.to[e ^ 1];
                self.cursor[u] += 1;
            }
        }
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.cursor.fill(0);
            flow += self.augment(s, t);
        }
        flow
    }

    fn reachable_from(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adjacency.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adjacency[u] {
                let v = self.to[e];
                if self.residual[e] > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}
