//! Trail network as a graph of key points (trail ends, junction vertices,
//! entry points) with walking distance to the nearest exit.

use crate::world::{AreaConfig, TrailId};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const KEY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub trail: TrailId,
    pub arclength: f64,
    pub exit: bool,
    /// Co-located nodes on other trails.
    pub siblings: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TrailGraph {
    pub nodes: Vec<Node>,
    /// Per trail, node indices sorted by arclength.
    keys: Vec<Vec<usize>>,
    /// Walking distance from each node to the nearest exit.
    exit_distance: Vec<f64>,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl TrailGraph {
    pub fn new(area: &AreaConfig) -> Self {
        let mut nodes: Vec<Node> = Vec::new();
        let mut keys = Vec::with_capacity(area.trails.len());
        for trail in &area.trails {
            let cum = trail.polyline.cumulative_arclength();
            let mut ss = vec![0.0, trail.polyline.length()];
            ss.extend(trail.entry_points.iter().copied());
            ss.extend(
                area.junctions
                    .iter()
                    .filter(|j| j.trail == trail.id)
                    .map(|j| cum[j.vertex]),
            );
            ss.sort_by(f64::total_cmp);
            ss.dedup_by(|a, b| (*a - *b).abs() < KEY_EPS);
            let mut idx = Vec::with_capacity(ss.len());
            for s in ss {
                idx.push(nodes.len());
                nodes.push(Node {
                    trail: trail.id,
                    arclength: s,
                    exit: trail.entry_points.iter().any(|e| (e - s).abs() < KEY_EPS),
                    siblings: Vec::new(),
                });
            }
            keys.push(idx);
        }
        let find = |nodes: &[Node], keys: &[Vec<usize>], t: TrailId, s: f64| {
            keys[t.0 as usize]
                .iter()
                .copied()
                .find(|&n| (nodes[n].arclength - s).abs() < KEY_EPS)
                .expect("junction vertex is a key point")
        };
        for j in &area.junctions {
            let a = find(
                &nodes,
                &keys,
                j.trail,
                area.trail(j.trail).polyline.cumulative_arclength()[j.vertex],
            );
            let b = find(
                &nodes,
                &keys,
                j.other_trail,
                area.trail(j.other_trail).polyline.cumulative_arclength()[j.other_vertex],
            );
            if !nodes[a].siblings.contains(&b) {
                nodes[a].siblings.push(b);
            }
            if !nodes[b].siblings.contains(&a) {
                nodes[b].siblings.push(a);
            }
        }
        let mut g = Self {
            exit_distance: vec![f64::INFINITY; nodes.len()],
            nodes,
            keys,
        };
        g.compute_exit_distances();
        g
    }

    fn neighbors(&self, n: usize) -> Vec<(usize, f64)> {
        let node = &self.nodes[n];
        let keys = &self.keys[node.trail.0 as usize];
        let pos = keys
            .iter()
            .position(|&k| k == n)
            .expect("node on its trail");
        let mut out: Vec<(usize, f64)> = node.siblings.iter().map(|&s| (s, 0.0)).collect();
        if pos > 0 {
            let m = keys[pos - 1];
            out.push((m, node.arclength - self.nodes[m].arclength));
        }
        if let Some(&m) = keys.get(pos + 1) {
            out.push((m, self.nodes[m].arclength - node.arclength));
        }
        out
    }

    fn compute_exit_distances(&mut self) {
        let mut heap = BinaryHeap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.exit {
                self.exit_distance[i] = 0.0;
                heap.push(Item(0.0, i));
            }
        }
        while let Some(Item(d, n)) = heap.pop() {
            if d > self.exit_distance[n] {
                continue;
            }
            for (m, w) in self.neighbors(n) {
                let nd = d + w;
                if nd < self.exit_distance[m] {
                    self.exit_distance[m] = nd;
                    heap.push(Item(nd, m));
                }
            }
        }
    }

    pub fn node_exit_distance(&self, n: usize) -> f64 {
        self.exit_distance[n]
    }

    /// Node at exactly `s` on `trail`, if any.
    pub fn node_at(&self, trail: TrailId, s: f64) -> Option<usize> {
        self.keys[trail.0 as usize]
            .iter()
            .copied()
            .find(|&n| (self.nodes[n].arclength - s).abs() < KEY_EPS)
    }

    /// First key point strictly beyond `s` in `direction`.
    pub fn next_key(&self, trail: TrailId, s: f64, direction: f64) -> Option<usize> {
        let keys = &self.keys[trail.0 as usize];
        if direction > 0.0 {
            keys.iter()
                .copied()
                .find(|&n| self.nodes[n].arclength > s + KEY_EPS)
        } else {
            keys.iter()
                .rev()
                .copied()
                .find(|&n| self.nodes[n].arclength < s - KEY_EPS)
        }
    }

    /// Shortest walking distance to an exit from `(trail, s)` and the
    /// direction to take. Ties prefer moving forward.
    pub fn exit_route(&self, trail: TrailId, s: f64) -> (f64, f64) {
        if let Some(n) = self.node_at(trail, s) {
            if self.nodes[n].exit {
                return (0.0, 1.0);
            }
        }
        let cost = |dir: f64| {
            self.next_key(trail, s, dir).map_or(f64::INFINITY, |n| {
                (self.nodes[n].arclength - s).abs() + self.exit_distance[n]
            })
        };
        let (fwd, back) = (cost(1.0), cost(-1.0));
        if fwd <= back {
            (fwd, 1.0)
        } else {
            (back, -1.0)
        }
    }

    /// Best continuation from node `n` towards an exit, over the node and its
    /// siblings: `(trail, arclength, direction)`.
    pub fn exit_continuation(&self, n: usize) -> (TrailId, f64, f64) {
        std::iter::once(n)
            .chain(self.nodes[n].siblings.iter().copied())
            .map(|m| {
                let node = &self.nodes[m];
                let (d, dir) = self.exit_route(node.trail, node.arclength);
                (d, node.trail, node.arclength, dir)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, t, s, dir)| (t, s, dir))
            .expect("at least the node itself")
    }
}
