//! Max-flow / min-cut on sparse graphs with terminal links, using the
//! Boykov–Kolmogorov search-tree algorithm.

use std::collections::VecDeque;

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Parent {
    Free,
    Terminal,
    Orphan,
    Arc(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Tree {
    Free,
    Source,
    Sink,
}

#[derive(Clone, Debug)]
struct Arc {
    head: usize,
    next: usize,
    residual: f64,
}

/// Directed graph over `n` non-terminal nodes plus implicit source and sink.
/// Arcs are stored in pairs; arc `a ^ 1` is the reverse of arc `a`.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    first: Vec<usize>,
    arcs: Vec<Arc>,
    /// Residual terminal capacity: positive towards the source tree,
    /// negative towards the sink.
    terminal: Vec<f64>,
    flow: f64,
    parent: Vec<Parent>,
    tree: Vec<Tree>,
    stamp: Vec<u64>,
    dist: Vec<u32>,
    solved: bool,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            first: vec![NONE; nodes],
            arcs: Vec::new(),
            terminal: vec![0.0; nodes],
            flow: 0.0,
            parent: vec![Parent::Free; nodes],
            tree: vec![Tree::Free; nodes],
            stamp: vec![0; nodes],
            dist: vec![0; nodes],
            solved: false,
        }
    }

    pub fn node_count(&self) -> usize {
        self.first.len()
    }

    /// Add capacities from the source to `i` and from `i` to the sink. The
    /// common part `min(source, sink)` is cut in any case and is counted in
    /// the flow straight away; negative values are allowed.
    pub fn add_terminal(&mut self, i: usize, source: f64, sink: f64) {
        assert!(source.is_finite() && sink.is_finite());
        let (s, t) = (self.terminal[i].max(0.0) + source, (-self.terminal[i]).max(0.0) + sink);
        let common = s.min(t);
        self.flow += common;
        self.terminal[i] = s - t;
        self.solved = false;
    }

    /// Add an arc `i → j` with capacity `cap` and the reverse with `rev`.
    pub fn add_edge(&mut self, i: usize, j: usize, cap: f64, rev: f64) {
        assert!(i != j, "self loops are not allowed");
        assert!(cap >= 0.0 && rev >= 0.0, "capacities must be non-negative");
        let a = self.arcs.len();
        self.arcs.push(Arc {
            head: j,
            next: self.first[i],
            residual: cap,
        });
        self.arcs.push(Arc {
            head: i,
            next: self.first[j],
            residual: rev,
        });
        self.first[i] = a;
        self.first[j] = a + 1;
        self.solved = false;
    }

    fn arcs_of(&self, i: usize) -> ArcIter<'_> {
        ArcIter {
            arcs: &self.arcs,
            cur: self.first[i],
        }
    }

    /// Run the solver and return the max-flow value, which equals the
    /// capacity of the minimum cut.
    pub fn max_flow(&mut self) -> f64 {
        if self.solved {
            return self.flow;
        }
        let n = self.node_count();
        let mut active: VecDeque<usize> = VecDeque::new();
        let mut queued = vec![false; n];
        let mut orphans: Vec<usize> = Vec::new();
        let mut time: u64 = 0;
        for i in 0..n {
            self.parent[i] = Parent::Free;
            self.tree[i] = Tree::Free;
            self.stamp[i] = 0;
            self.dist[i] = 0;
            if self.terminal[i] != 0.0 {
                self.tree[i] = if self.terminal[i] > 0.0 {
                    Tree::Source
                } else {
                    Tree::Sink
                };
                self.parent[i] = Parent::Terminal;
                self.dist[i] = 1;
                active.push_back(i);
                queued[i] = true;
            }
        }

        while let Some(&i) = active.front() {
            if self.parent[i] == Parent::Free {
                active.pop_front();
                queued[i] = false;
                continue;
            }
            let meeting = self.grow(i, &mut active, &mut queued);
            let Some(a) = meeting else {
                active.pop_front();
                queued[i] = false;
                continue;
            };
            time += 1;
            self.augment(a, &mut orphans);
            while let Some(o) = orphans.pop() {
                self.adopt(o, time, &mut orphans, &mut active, &mut queued);
            }
        }
        self.solved = true;
        self.flow
    }

    /// Expand the tree of `i` through residual arcs. Returns an arc from the
    /// source tree to the sink tree when the trees touch.
    fn grow(&mut self, i: usize, active: &mut VecDeque<usize>, queued: &mut [bool]) -> Option<usize> {
        let from_source = self.tree[i] == Tree::Source;
        let mut a = self.first[i];
        while a != NONE {
            let usable = if from_source {
                self.arcs[a].residual
            } else {
                self.arcs[a ^ 1].residual
            };
            if usable > 0.0 {
                let j = self.arcs[a].head;
                let own = if from_source { Tree::Source } else { Tree::Sink };
                if self.tree[j] == Tree::Free {
                    self.tree[j] = own;
                    self.parent[j] = Parent::Arc(a ^ 1);
                    self.stamp[j] = self.stamp[i];
                    self.dist[j] = self.dist[i] + 1;
                    if !queued[j] {
                        active.push_back(j);
                        queued[j] = true;
                    }
                } else if self.tree[j] != own {
                    return Some(if from_source { a } else { a ^ 1 });
                } else if self.stamp[j] <= self.stamp[i] && self.dist[j] > self.dist[i] {
                    // shorter path to the root through i
                    self.parent[j] = Parent::Arc(a ^ 1);
                    self.stamp[j] = self.stamp[i];
                    self.dist[j] = self.dist[i] + 1;
                }
            }
            a = self.arcs[a].next;
        }
        None
    }

    /// Push the bottleneck along the path through arc `a` (source tree to
    /// sink tree) and collect the nodes that lose their parent.
    fn augment(&mut self, a: usize, orphans: &mut Vec<usize>) {
        let mut bottleneck = self.arcs[a].residual;
        let mut i = self.arcs[a ^ 1].head;
        while let Parent::Arc(p) = self.parent[i] {
            bottleneck = bottleneck.min(self.arcs[p ^ 1].residual);
            i = self.arcs[p].head;
        }
        bottleneck = bottleneck.min(self.terminal[i]);
        let mut i = self.arcs[a].head;
        while let Parent::Arc(p) = self.parent[i] {
            bottleneck = bottleneck.min(self.arcs[p].residual);
            i = self.arcs[p].head;
        }
        bottleneck = bottleneck.min(-self.terminal[i]);

        self.arcs[a ^ 1].residual += bottleneck;
        self.arcs[a].residual -= bottleneck;
        let mut i = self.arcs[a ^ 1].head;
        while let Parent::Arc(p) = self.parent[i] {
            self.arcs[p].residual += bottleneck;
            self.arcs[p ^ 1].residual -= bottleneck;
            if self.arcs[p ^ 1].residual <= 0.0 {
                self.parent[i] = Parent::Orphan;
                orphans.push(i);
            }
            i = self.arcs[p].head;
        }
        self.terminal[i] -= bottleneck;
        if self.terminal[i] <= 0.0 {
            self.terminal[i] = 0.0;
            self.parent[i] = Parent::Orphan;
            orphans.push(i);
        }
        let mut i = self.arcs[a].head;
        while let Parent::Arc(p) = self.parent[i] {
            self.arcs[p ^ 1].residual += bottleneck;
            self.arcs[p].residual -= bottleneck;
            if self.arcs[p].residual <= 0.0 {
                self.parent[i] = Parent::Orphan;
                orphans.push(i);
            }
            i = self.arcs[p].head;
        }
        self.terminal[i] += bottleneck;
        if self.terminal[i] >= 0.0 {
            self.terminal[i] = 0.0;
            self.parent[i] = Parent::Orphan;
            orphans.push(i);
        }
        self.flow += bottleneck;
    }

    /// Distance from `j` to its tree root, or `None` when the path runs into
    /// an orphan. Nodes on a valid path are stamped with `time`.
    fn root_distance(&mut self, j: usize, time: u64) -> Option<u32> {
        let mut d = 0u32;
        let mut k = j;
        loop {
            if self.stamp[k] == time {
                d += self.dist[k];
                break;
            }
            match self.parent[k] {
                Parent::Terminal => {
                    self.stamp[k] = time;
                    self.dist[k] = 1;
                    d += 1;
                    break;
                }
                Parent::Arc(p) => {
                    d += 1;
                    k = self.arcs[p].head;
                }
                Parent::Orphan | Parent::Free => return None,
            }
        }
        let mut k = j;
        let mut dk = d;
        while self.stamp[k] != time {
            self.stamp[k] = time;
            self.dist[k] = dk;
            dk -= 1;
            match self.parent[k] {
                Parent::Arc(p) => k = self.arcs[p].head,
                _ => break,
            }
        }
        Some(d)
    }

    fn adopt(
        &mut self,
        i: usize,
        time: u64,
        orphans: &mut Vec<usize>,
        active: &mut VecDeque<usize>,
        queued: &mut [bool],
    ) {
        let in_source = self.tree[i] == Tree::Source;
        let mut best: Option<(usize, u32)> = None;
        let arcs: Vec<usize> = self.arcs_of(i).collect();
        for &a in &arcs {
            // flow must be able to reach i from the new parent's side
            let usable = if in_source {
                self.arcs[a ^ 1].residual
            } else {
                self.arcs[a].residual
            };
            let j = self.arcs[a].head;
            if usable > 0.0 && self.tree[j] == self.tree[i] && self.parent[j] != Parent::Free {
                if let Some(d) = self.root_distance(j, time) {
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((a, d));
                    }
                }
            }
        }
        if let Some((a, d)) = best {
            self.parent[i] = Parent::Arc(a);
            self.stamp[i] = time;
            self.dist[i] = d + 1;
            return;
        }
        for &a in &arcs {
            let j = self.arcs[a].head;
            if self.tree[j] != self.tree[i] || self.parent[j] == Parent::Free {
                continue;
            }
            let usable = if in_source {
                self.arcs[a ^ 1].residual
            } else {
                self.arcs[a].residual
            };
            if usable > 0.0 && !queued[j] {
                active.push_back(j);
                queued[j] = true;
            }
            if let Parent::Arc(p) = self.parent[j] {
                if self.arcs[p].head == i {
                    self.parent[j] = Parent::Orphan;
                    orphans.push(j);
                }
            }
        }
        self.tree[i] = Tree::Free;
        self.parent[i] = Parent::Free;
    }

    /// Whether `i` ends on the source side of the minimum cut: the nodes
    /// reachable from the source in the residual graph.
    pub fn is_source_side(&mut self, i: usize) -> bool {
        self.max_flow();
        self.tree[i] == Tree::Source
    }

    /// Source-side flags for all nodes.
    pub fn source_side(&mut self) -> Vec<bool> {
        self.max_flow();
        self.tree.iter().map(|&t| t == Tree::Source).collect()
    }
}

struct ArcIter<'a> {
    arcs: &'a [Arc],
    cur: usize,
}

impl Iterator for ArcIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.cur == NONE {
            return None;
        }
        let a = self.cur;
        self.cur = self.arcs[a].next;
        Some(a)
    }
}
