//! Text fixture formats for generated scenarios.
//!
//! Topology (`safe-topology 1`): one directive per line, `#` comments.
//!
//! ```text
//! safe-topology 1
//! alloc 10.0.0.0/8 branching 8 depth 4
//! nodes 4096
//! edge 0 17
//! edge 3 4095
//! ```
//!
//! `nodes` must equal `branching^depth`: AS `i` holds the `i`-th leaf
//! prefix of the allocation tree. Edges are undirected.
//!
//! Naming tree (`safe-names 1`): one leaf pathname per line; interior
//! directories are implied by the paths.
//!
//! ```text
//! safe-names 1
//! path n0/n0/n1
//! path n0/n1
//! ```

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use safe_core::logic::Ipv4Prefix;

use crate::AppError;

/// Shape of the prefix allocation tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AllocTree {
    pub base: Ipv4Prefix,
    pub branching: u32,
    pub depth: u32,
}

impl AllocTree {
    fn bits(&self) -> u8 {
        (32 - (self.branching.max(2) - 1).leading_zeros()) as u8
    }

    pub fn leaves(&self) -> usize {
        (self.branching as usize).pow(self.depth)
    }

    /// Prefix of the node reached by `path` (child indexes from the root).
    pub fn prefix(&self, path: &[u32]) -> Ipv4Prefix {
        path.iter().fold(self.base, |p, &i| p.subprefix(p.len() + self.bits(), i).expect("tree fits in the base prefix"))
    }

    /// Child indexes of leaf `i`, root first.
    pub fn leaf_path(&self, mut i: usize) -> Vec<u32> {
        let mut out = vec![0; self.depth as usize];
        for slot in out.iter_mut().rev() {
            *slot = (i % self.branching as usize) as u32;
            i /= self.branching as usize;
        }
        out
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.branching < 2 || self.depth == 0 {
            return Err(AppError::Fixture("allocation tree needs branching >= 2 and depth >= 1".into()));
        }
        if self.base.len() as u32 + self.bits() as u32 * self.depth > 32 {
            return Err(AppError::Fixture(format!("{} cannot be split {} levels deep", self.base, self.depth)));
        }
        Ok(())
    }
}

/// An AS-level topology over the leaves of an allocation tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub alloc: AllocTree,
    pub adj: Vec<Vec<usize>>,
}

impl Topology {
    /// A connected random graph: a random recursive tree plus `extra`
    /// random edges per node.
    pub fn generate(alloc: AllocTree, extra: f64, rng: &mut impl Rng) -> Self {
        let n = alloc.leaves();
        let mut edges = BTreeSet::new();
        for i in 1..n {
            let j = rng.random_range(0..i);
            edges.insert((j, i));
        }
        let want = (n as f64 * extra) as usize;
        let mut tries = 0;
        while edges.len() < n - 1 + want && tries < want * 10 {
            tries += 1;
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
        Self::from_edges(alloc, n, edges)
    }

    fn from_edges(alloc: AllocTree, n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adj = vec![Vec::new(); n];
        for (a, b) in edges {
            if !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        adj.iter_mut().for_each(|v| v.sort_unstable());
        Topology { alloc, adj }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// BFS parents towards `origin` (`parent[origin] == None`, as for
    /// unreachable nodes) and hop distances.
    pub fn shortest_paths(&self, origin: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let mut parent = vec![None; self.len()];
        let mut dist = vec![None; self.len()];
        dist[origin] = Some(0);
        let mut q = VecDeque::from([origin]);
        while let Some(u) = q.pop_front() {
            for &v in &self.adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(dist[u].unwrap() + 1);
                    parent[v] = Some(u);
                    q.push_back(v);
                }
            }
        }
        (parent, dist)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("safe-topology 1\n");
        let a = &self.alloc;
        writeln!(s, "alloc {} branching {} depth {}", a.base, a.branching, a.depth).unwrap();
        writeln!(s, "nodes {}", self.len()).unwrap();
        for (a, ns) in self.adj.iter().enumerate() {
            for &b in ns.iter().filter(|&&b| b > a) {
                writeln!(s, "edge {a} {b}").unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let bad = |line: usize, msg: &str| AppError::Fixture(format!("topology line {line}: {msg}"));
        let mut lines = meaningful(text);
        match lines.next() {
            Some((_, "safe-topology 1")) => {}
            _ => return Err(bad(1, "expected `safe-topology 1`")),
        }
        let (mut alloc, mut nodes, mut edges) = (None, None, Vec::new());
        for (no, line) in lines {
            let w: Vec<&str> = line.split_whitespace().collect();
            match w.as_slice() {
                ["alloc", base, "branching", b, "depth", d] => {
                    let t = AllocTree {
                        base: base.parse().map_err(|e| bad(no, &format!("{e}")))?,
                        branching: b.parse().map_err(|_| bad(no, "branching is not a number"))?,
                        depth: d.parse().map_err(|_| bad(no, "depth is not a number"))?,
                    };
                    t.validate()?;
                    alloc = Some(t);
                }
                ["nodes", n] => nodes = Some(n.parse::<usize>().map_err(|_| bad(no, "node count is not a number"))?),
                ["edge", a, b] => {
                    let a: usize = a.parse().map_err(|_| bad(no, "bad node"))?;
                    let b: usize = b.parse().map_err(|_| bad(no, "bad node"))?;
                    if a == b {
                        return Err(bad(no, "self-loop"));
                    }
                    edges.push((a.min(b), a.max(b)));
                }
                _ => return Err(bad(no, &format!("unknown directive `{line}`"))),
            }
        }
        let alloc = alloc.ok_or_else(|| AppError::Fixture("topology has no alloc line".into()))?;
        let n = nodes.ok_or_else(|| AppError::Fixture("topology has no nodes line".into()))?;
        if n != alloc.leaves() {
            return Err(AppError::Fixture(format!("{n} nodes, but the allocation tree has {} leaves", alloc.leaves())));
        }
        if let Some(&(_, b)) = edges.iter().find(|&&(_, b)| b >= n) {
            return Err(AppError::Fixture(format!("edge names node {b}, but there are {n}")));
        }
        Ok(Self::from_edges(alloc, n, edges))
    }
}

/// A naming tree given by its leaf pathnames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NameTree {
    pub leaves: Vec<String>,
}

impl NameTree {
    /// Every path of exactly `height` components with `branching` choices
    /// at each level, named `n0`, `n1`, ...
    pub fn balanced(height: usize, branching: usize) -> Self {
        let mut paths = vec![String::new()];
        for _ in 0..height {
            paths = paths
                .iter()
                .flat_map(|p| (0..branching).map(move |i| if p.is_empty() { format!("n{i}") } else { format!("{p}/n{i}") }))
                .collect();
        }
        NameTree { leaves: paths }
    }

    /// Interior directories, parents before children.
    pub fn directories(&self) -> Vec<String> {
        let mut dirs = BTreeSet::new();
        for l in &self.leaves {
            let parts: Vec<&str> = l.split('/').collect();
            for k in 1..parts.len() {
                dirs.insert(parts[..k].join("/"));
            }
        }
        let mut v: Vec<String> = dirs.into_iter().collect();
        v.sort_by_key(|d| (d.matches('/').count(), d.clone()));
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("safe-names 1\n");
        for l in &self.leaves {
            writeln!(s, "path {l}").unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut lines = meaningful(text);
        match lines.next() {
            Some((_, "safe-names 1")) => {}
            _ => return Err(AppError::Fixture("names line 1: expected `safe-names 1`".into())),
        }
        let mut leaves = Vec::new();
        for (no, line) in lines {
            let path = line
                .strip_prefix("path ")
                .map(str::trim)
                .ok_or_else(|| AppError::Fixture(format!("names line {no}: expected `path <a/b/c>`")))?;
            if path.split('/').any(|c| c.is_empty() || c.contains(':') || c.contains(char::is_whitespace)) {
                return Err(AppError::Fixture(format!("names line {no}: malformed path `{path}`")));
            }
            leaves.push(path.to_string());
        }
        let t = NameTree { leaves };
        let dirs: BTreeSet<String> = t.directories().into_iter().collect();
        if let Some(l) = t.leaves.iter().find(|l| dirs.contains(*l)) {
            return Err(AppError::Fixture(format!("`{l}` is both a leaf and a directory")));
        }
        Ok(t)
    }
}

fn meaningful(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}
