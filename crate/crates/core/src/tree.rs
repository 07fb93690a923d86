//! Finite rooted trees.
//!
//! Vertices are dense `usize` ids. The tree order is the ancestor order:
//! `a <= b` iff `a` lies on the path from the root to `b`. The level of a
//! vertex is its graph distance to the root.
//!
//! Trees produced by [`generate_h_tree`] and [`random_tree`] are labelled in
//! breadth-first order, so every parent id is smaller than its children's
//! ids and any matrix indexed by "ancestor-or-self" pairs is lower
//! triangular.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slow::{eval_h, SlowFactor};

pub type VertexId = usize;

/// Hard cap on the number of vertices a generator will emit.
pub const MAX_GENERATED_VERTICES: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    parent: Vec<Option<VertexId>>,
    children: Vec<Vec<VertexId>>,
    level: Vec<usize>,
    root: VertexId,
}

impl RootedTree {
    /// A tree with a single vertex.
    pub fn singleton() -> Self {
        RootedTree {
            parent: vec![None],
            children: vec![Vec::new()],
            level: vec![0],
            root: 0,
        }
    }

    /// Builds a tree from a parent table; `parents[v]` is the parent of `v`
    /// and exactly one entry must be `None`. Children are ordered by id.
    pub fn from_parents(parents: &[Option<VertexId>]) -> Result<Self> {
        let entries: Vec<(VertexId, Option<VertexId>)> =
            parents.iter().copied().enumerate().collect();
        Self::from_entries(&entries)
    }

    /// Builds a tree from `(vertex, parent)` pairs. Every id in `0..len` must
    /// appear exactly once; children lists follow the order of `entries`.
    pub fn from_entries(entries: &[(VertexId, Option<VertexId>)]) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::Input("a tree needs at least one vertex".into()));
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut root = None;
        for &(v, p) in entries {
            if v >= n {
                return Err(Error::Input(format!("vertex id {v} out of range 0..{n}")));
            }
            if seen[v] {
                return Err(Error::Input(format!("vertex {v} listed twice")));
            }
            seen[v] = true;
            match p {
                None => {
                    if root.is_some() {
                        return Err(Error::Input("more than one root".into()));
                    }
                    root = Some(v);
                }
                Some(p) if p >= n => {
                    return Err(Error::Input(format!("parent {p} of vertex {v} out of range")))
                }
                Some(p) if p == v => {
                    return Err(Error::Input(format!("vertex {v} is its own parent")))
                }
                Some(_) => {}
            }
            parent[v] = p;
        }
        let root = root.ok_or_else(|| Error::Input("no root vertex".into()))?;
        let mut children = vec![Vec::new(); n];
        for &(v, p) in entries {
            if let Some(p) = p {
                children[p].push(v);
            }
        }
        // Levels by BFS from the root; unreachable vertices mean a cycle.
        let mut level = vec![usize::MAX; n];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                level[c] = level[v] + 1;
                reached += 1;
                queue.push_back(c);
            }
        }
        if reached != n {
            return Err(Error::Input(format!(
                "parent links contain a cycle ({} of {n} vertices reachable from root)",
                reached
            )));
        }
        Ok(RootedTree {
            parent,
            children,
            level,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<VertexId>] {
        &self.parent
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    pub fn level(&self, v: VertexId) -> usize {
        self.level[v]
    }

    pub fn levels(&self) -> &[usize] {
        &self.level
    }

    pub fn depth(&self) -> usize {
        self.level.iter().copied().max().unwrap_or(0)
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.len()
    }

    fn check(&self, v: VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::Input(format!(
                "unknown vertex {v} (tree has {} vertices)",
                self.len()
            )))
        }
    }

    /// Largest number of children of any vertex.
    pub fn max_branching(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of vertices at each level, starting from the root level.
    pub fn level_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.depth() + 1];
        for &l in &self.level {
            sizes[l] += 1;
        }
        sizes
    }

    /// `a <= b` in the tree order.
    pub fn precedes(&self, a: VertexId, b: VertexId) -> bool {
        if self.level[a] > self.level[b] {
            return false;
        }
        let mut x = b;
        while self.level[x] > self.level[a] {
            x = self.parent[x].expect("non-root vertex has a parent");
        }
        x == a
    }

    /// Vertices in breadth-first order, children visited in list order.
    pub fn bfs_order(&self) -> Vec<VertexId> {
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            queue.extend(self.children[v].iter().copied());
        }
        order
    }

    /// True when ids coincide with breadth-first positions.
    pub fn is_bfs_labelled(&self) -> bool {
        self.bfs_order().iter().enumerate().all(|(i, &v)| i == v)
    }

    /// The subtree `T_xi` in breadth-first order (starting with `xi`).
    pub fn subtree(&self, xi: VertexId) -> Result<Vec<VertexId>> {
        self.check(xi)?;
        let mut out = Vec::new();
        let mut queue = VecDeque::from([xi]);
        while let Some(v) = queue.pop_front() {
            out.push(v);
            queue.extend(self.children[v].iter().copied());
        }
        Ok(out)
    }

    /// `V_j(xi)`: descendants of `xi` at distance exactly `j`.
    pub fn level_set(&self, xi: VertexId, j: usize) -> Result<Vec<VertexId>> {
        self.check(xi)?;
        let mut frontier = vec![xi];
        for _ in 0..j {
            frontier = frontier
                .iter()
                .flat_map(|&v| self.children[v].iter().copied())
                .collect();
            if frontier.is_empty() {
                break;
            }
        }
        Ok(frontier)
    }

    /// Relabels vertices in breadth-first order. Returns the new tree and
    /// `new_id[old_id]`.
    pub fn relabel_bfs(&self) -> (RootedTree, Vec<VertexId>) {
        let order = self.bfs_order();
        let mut new_id = vec![0; self.len()];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i;
        }
        let entries: Vec<_> = order
            .iter()
            .map(|&v| (new_id[v], self.parent[v].map(|p| new_id[p])))
            .collect();
        let tree = RootedTree::from_entries(&entries).expect("relabelling preserves validity");
        (tree, new_id)
    }

    /// Induced subtree on a vertex set that is connected and contains its
    /// own minimal vertex. Returns the subtree (BFS-labelled) and the
    /// original id of each new vertex.
    pub fn induced(&self, vertices: &[VertexId]) -> Result<(RootedTree, Vec<VertexId>)> {
        if vertices.is_empty() {
            return Err(Error::Input("empty vertex set".into()));
        }
        let mut local = std::collections::HashMap::with_capacity(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            self.check(v)?;
            local.insert(v, i);
        }
        let mut entries = Vec::with_capacity(vertices.len());
        for (i, &v) in vertices.iter().enumerate() {
            let p = self.parent[v].and_then(|p| local.get(&p).copied());
            entries.push((i, p));
        }
        let tree = RootedTree::from_entries(&entries)
            .map_err(|e| Error::Structure(format!("vertex set is not a subtree: {e}")))?;
        let (tree2, new_id) = tree.relabel_bfs();
        let mut original = vec![0; vertices.len()];
        for (i, &v) in vertices.iter().enumerate() {
            original[new_id[i]] = v;
        }
        Ok((tree2, original))
    }
}

// ---------------------------------------------------------------------------
// Text format: one `id parent_id` line per vertex in breadth-first order,
// with parent_id = -1 for the root.

pub fn write_tree(tree: &RootedTree) -> String {
    let mut out = String::new();
    for v in tree.bfs_order() {
        match tree.parent(v) {
            Some(p) => writeln!(out, "{v} {p}"),
            None => writeln!(out, "{v} -1"),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// Parses the leading `id parent` columns of each non-empty line. Extra
/// columns are returned untouched for formats layered on the tree file.
pub(crate) fn parse_tree_lines(text: &str) -> Result<(RootedTree, Vec<Vec<String>>)> {
    let mut entries = Vec::new();
    let mut extra = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| Error::Input(format!("line {}: bad vertex id", lineno + 1)))?;
        let parent = fields
            .next()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| Error::Input(format!("line {}: bad parent id", lineno + 1)))?;
        let parent = match parent {
            -1 => None,
            p if p >= 0 => Some(p as usize),
            p => return Err(Error::Input(format!("line {}: parent {p}", lineno + 1))),
        };
        entries.push((id, parent));
        extra.push(fields.map(str::to_owned).collect());
    }
    let tree = RootedTree::from_entries(&entries)?;
    // Reorder the extra columns by vertex id.
    let mut by_id = vec![Vec::new(); tree.len()];
    for ((id, _), cols) in entries.into_iter().zip(extra) {
        by_id[id] = cols;
    }
    Ok((tree, by_id))
}

pub fn parse_tree(text: &str) -> Result<RootedTree> {
    let (tree, extra) = parse_tree_lines(text)?;
    if let Some(v) = extra.iter().position(|cols| !cols.is_empty()) {
        return Err(Error::Input(format!("vertex {v}: unexpected extra columns")));
    }
    Ok(tree)
}

// ---------------------------------------------------------------------------
// Generators

/// Parameters of an h-regular tree: level `k` should hold about
/// `1 / h(2^{-m_star k})` vertices with `h(t) = t^theta * lambda(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HTreeSpec {
    pub theta: f64,
    pub m_star: u32,
    pub depth: usize,
    #[serde(default = "SlowFactor::one")]
    pub lambda: SlowFactor,
    #[serde(default)]
    pub seed: u64,
}

impl HTreeSpec {
    pub fn new(theta: f64, m_star: u32, depth: usize) -> Self {
        HTreeSpec {
            theta,
            m_star,
            depth,
            lambda: SlowFactor::one(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Input(format!("theta must be >= 0, got {}", self.theta)));
        }
        if self.m_star == 0 {
            return Err(Error::Input("m_star must be positive".into()));
        }
        if self.depth == 0 {
            return Err(Error::Input("depth must be at least 1".into()));
        }
        Ok(())
    }

    /// `h(2^{-m_star k})`.
    pub fn h_at_level(&self, k: usize) -> f64 {
        let t = (-(self.m_star as f64) * k as f64).exp2();
        eval_h(self.theta, &self.lambda, t).expect("t is in (0, 1]")
    }

    /// Ideal level size `h(1) / h(2^{-m_star k})`, normalised so the root
    /// level holds one vertex.
    pub fn target_level_size(&self, k: usize) -> f64 {
        self.h_at_level(0) / self.h_at_level(k)
    }
}

/// Generates an h-regular tree.
///
/// Level totals are `N_k = max(1, round(target_level_size(k)))`. The
/// `N_{k+1}` children are handed out to the `N_k` parents with a running
/// fractional accumulator (budget `N_{k+1}/N_k` per parent, remainder
/// carried to the next sibling); the seed only picks the initial
/// accumulator phase on each level.
pub fn generate_h_tree(spec: &HTreeSpec) -> Result<RootedTree> {
    spec.validate()?;
    let mut sizes = Vec::with_capacity(spec.depth + 1);
    let mut total = 0usize;
    for k in 0..=spec.depth {
        let target = spec.target_level_size(k);
        if !target.is_finite() || target > MAX_GENERATED_VERTICES as f64 {
            return Err(Error::Capacity(format!(
                "level {k} would need {target:.3e} vertices"
            )));
        }
        let n_k = (target.round() as usize).max(1);
        total += n_k;
        if total > MAX_GENERATED_VERTICES {
            return Err(Error::Capacity(format!(
                "tree would exceed {MAX_GENERATED_VERTICES} vertices"
            )));
        }
        sizes.push(n_k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut parents: Vec<Option<VertexId>> = Vec::with_capacity(total);
    parents.push(None);
    let mut level_start = 0;
    for k in 0..spec.depth {
        let (n_k, n_next) = (sizes[k], sizes[k + 1]);
        let budget = n_next as f64 / n_k as f64;
        let phase: f64 = rng.random();
        let mut emitted = 0usize;
        for i in 0..n_k {
            // floor((i+1) b + phase) - floor(i b + phase), last parent takes the rest
            let upto = if i + 1 == n_k {
                n_next
            } else {
                (((i + 1) as f64 * budget + phase).floor() as usize).min(n_next)
            };
            for _ in emitted..upto {
                parents.push(Some(level_start + i));
            }
            emitted = emitted.max(upto);
        }
        level_start += n_k;
    }
    RootedTree::from_parents(&parents)
}

/// Uniform-ish random tree with at most `max_children` children per vertex,
/// labelled in breadth-first order.
pub fn random_tree(vertex_count: usize, max_children: usize, seed: u64) -> Result<RootedTree> {
    if vertex_count == 0 {
        return Err(Error::Input("vertex_count must be positive".into()));
    }
    if max_children == 0 && vertex_count > 1 {
        return Err(Error::Input("max_children must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parents = vec![None];
    let mut child_count = vec![0usize];
    let mut open: Vec<VertexId> = vec![0];
    while parents.len() < vertex_count {
        let slot = rng.random_range(0..open.len());
        let p = open[slot];
        let v = parents.len();
        parents.push(Some(p));
        child_count.push(0);
        child_count[p] += 1;
        if child_count[p] == max_children {
            open.swap_remove(slot);
        }
        open.push(v);
    }
    let tree = RootedTree::from_parents(&parents)?;
    Ok(tree.relabel_bfs().0)
}

/// A path `0 - 1 - ... - (n-1)` rooted at 0.
pub fn path(n: usize) -> RootedTree {
    let parents: Vec<_> = (0..n).map(|v| v.checked_sub(1)).collect();
    RootedTree::from_parents(&parents).expect("path is a tree")
}

/// Complete binary tree of the given depth (levels 0..=depth).
pub fn binary_tree(depth: usize) -> RootedTree {
    let n = (1usize << (depth + 1)) - 1;
    let parents: Vec<_> = (0..n).map(|v| v.checked_sub(1).map(|x| x / 2)).collect();
    RootedTree::from_parents(&parents).expect("heap layout is a tree")
}

/// Star: root 0 with `leaves` children.
pub fn star(leaves: usize) -> RootedTree {
    let parents: Vec<_> = (0..=leaves).map(|v| if v == 0 { None } else { Some(0) }).collect();
    RootedTree::from_parents(&parents).expect("star is a tree")
}
