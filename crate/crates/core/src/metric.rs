//! Metric trees: a rooted skeleton whose edges are real segments.
//!
//! Edges are indexed by their deeper endpoint, so edge `v` joins
//! `parent(v)` to `v` and carries the local coordinate `t ∈ [0, len(v)]`
//! with `t = 0` at the parent end. The root vertex carries no edge; the
//! point `x₀` is `(root, 0)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::balls::conjugate;
use crate::error::{Error, Result};
use crate::hardy::WeightedTreeOperator;
use crate::linalg::{power_norm, singular_values};
use crate::slow::SlowFactor;
use crate::tree::{parse_tree_lines, RootedTree, VertexId};

/// Step function on `[0, len]`: `values[i]` on `[breaks[i-1], breaks[i])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn constant(value: f64) -> Self {
        PiecewiseConstant {
            breaks: Vec::new(),
            values: vec![value],
        }
    }

    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::Input("a step function needs one more value than breaks".into()));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Input("breakpoints must be positive and increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Input("step values must be finite and non-negative".into()));
        }
        Ok(PiecewiseConstant { breaks, values })
    }

    fn check_within(&self, len: f64) -> Result<()> {
        if self.breaks.last().is_some_and(|&b| b >= len) {
            return Err(Error::Input(format!("breakpoint beyond edge length {len}")));
        }
        Ok(())
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b <= t)]
    }

    /// Pieces `(start, end, value)` clipped to `[a, b]`.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        let mut lo = f64::NEG_INFINITY;
        for (i, &val) in self.values.iter().enumerate() {
            let hi = self.breaks.get(i).copied().unwrap_or(f64::INFINITY);
            let (s, e) = (lo.max(a), hi.min(b));
            if e > s {
                out.push((s, e, val));
            }
            lo = hi;
        }
        out
    }

    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.pieces(a, b).iter().map(|(s, e, v)| (e - s) * v).sum()
    }

    /// `‖f‖_{L_r[a,b]}`, `r = ∞` allowed.
    pub fn norm(&self, a: f64, b: f64, r: f64) -> f64 {
        let pieces = self.pieces(a, b);
        if r.is_infinite() {
            return pieces.iter().fold(0.0, |m, p| m.max(p.2.abs()));
        }
        pieces
            .iter()
            .map(|(s, e, v)| (e - s) * v.abs().powf(r))
            .sum::<f64>()
            .powf(1.0 / r)
    }

    fn combine(&self, other: &PiecewiseConstant, op: impl Fn(f64, f64) -> f64) -> PiecewiseConstant {
        let mut breaks: Vec<f64> = self.breaks.iter().chain(&other.breaks).copied().collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let mut values = Vec::with_capacity(breaks.len() + 1);
        let mut left = 0.0;
        for i in 0..=breaks.len() {
            // Sample inside each piece.
            let right = breaks.get(i).copied().unwrap_or(left + 2.0);
            let mid = 0.5 * (left + right);
            values.push(op(self.eval(mid), other.eval(mid)));
            left = right;
        }
        PiecewiseConstant { breaks, values }
    }

    pub fn product(&self, other: &PiecewiseConstant) -> PiecewiseConstant {
        self.combine(other, |a, b| a * b)
    }

    pub fn sum(&self, other: &PiecewiseConstant) -> PiecewiseConstant {
        self.combine(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> PiecewiseConstant {
        PiecewiseConstant {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Smallest `t ∈ [0, len]` with `∫_0^t f ≥ target`.
    pub fn inverse_cumulative(&self, target: f64, len: f64) -> f64 {
        let mut acc = 0.0;
        for (s, e, v) in self.pieces(0.0, len) {
            let mass = (e - s) * v;
            if acc + mass >= target && v > 0.0 {
                return (s + (target - acc) / v).clamp(s, e);
            }
            acc += mass;
        }
        len
    }

    /// Text token: a constant, or `v0|b1|v1|...`.
    pub fn to_token(&self) -> String {
        let mut s = format!("{}", self.values[0]);
        for (b, v) in self.breaks.iter().zip(&self.values[1..]) {
            write!(s, "|{b}|{v}").expect("writing to a String");
        }
        s
    }

    pub fn parse_token(token: &str) -> Result<Self> {
        let nums: Vec<f64> = token
            .split('|')
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad density token '{token}'")))
            })
            .collect::<Result<_>>()?;
        if nums.len() % 2 == 0 {
            return Err(Error::Input(format!("density token '{token}' needs v0|b1|v1|...")));
        }
        let values = nums.iter().step_by(2).copied().collect();
        let breaks = nums.iter().skip(1).step_by(2).copied().collect();
        PiecewiseConstant::new(breaks, values)
    }
}

/// One step function per edge, indexed by the edge's deeper vertex. The
/// root entry is unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricFunction {
    pub edges: Vec<PiecewiseConstant>,
}

impl MetricFunction {
    pub fn constant(vertex_count: usize, value: f64) -> Self {
        MetricFunction {
            edges: vec![PiecewiseConstant::constant(value); vertex_count],
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        MetricFunction {
            edges: self.edges.iter().map(|e| e.scale(s)).collect(),
        }
    }

    pub fn product(&self, other: &MetricFunction) -> Self {
        MetricFunction {
            edges: self
                .edges
                .iter()
                .zip(&other.edges)
                .map(|(a, b)| a.product(b))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub edge: VertexId,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTree {
    pub skeleton: RootedTree,
    /// `lengths[v]` is the length of the edge into `v`; zero at the root.
    pub lengths: Vec<f64>,
    pub g: MetricFunction,
    pub v: MetricFunction,
}

impl MetricTree {
    pub fn new(
        skeleton: RootedTree,
        lengths: Vec<f64>,
        g: MetricFunction,
        v: MetricFunction,
    ) -> Result<Self> {
        let n = skeleton.len();
        if lengths.len() != n || g.edges.len() != n || v.edges.len() != n {
            return Err(Error::Input("per-edge data must have one entry per vertex".into()));
        }
        let root = skeleton.root();
        for e in 0..n {
            if e == root {
                continue;
            }
            if !(lengths[e] > 0.0 && lengths[e].is_finite()) {
                return Err(Error::Input(format!("edge {e} needs a positive length")));
            }
            g.edges[e].check_within(lengths[e])?;
            v.edges[e].check_within(lengths[e])?;
        }
        let mut lengths = lengths;
        lengths[root] = 0.0;
        Ok(MetricTree {
            skeleton,
            lengths,
            g,
            v,
        })
    }

    /// Skeleton with unit densities.
    pub fn uniform(skeleton: RootedTree, lengths: Vec<f64>) -> Result<Self> {
        let n = skeleton.len();
        Self::new(
            skeleton,
            lengths,
            MetricFunction::constant(n, 1.0),
            MetricFunction::constant(n, 1.0),
        )
    }

    pub fn root_point(&self) -> MetricPoint {
        MetricPoint {
            edge: self.skeleton.root(),
            t: 0.0,
        }
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = VertexId> + '_ {
        let root = self.skeleton.root();
        self.skeleton.bfs_order().into_iter().filter(move |&e| e != root)
    }

    fn check_point(&self, x: MetricPoint) -> Result<()> {
        if x.edge >= self.skeleton.len() {
            return Err(Error::Input(format!("unknown edge {}", x.edge)));
        }
        if !(x.t >= 0.0 && x.t <= self.lengths[x.edge]) {
            return Err(Error::Input(format!(
                "coordinate {} outside edge {} of length {}",
                x.t, x.edge, self.lengths[x.edge]
            )));
        }
        Ok(())
    }

    /// `a ≤ b` in the tree order.
    pub fn precedes(&self, a: MetricPoint, b: MetricPoint) -> bool {
        if a.edge == b.edge {
            return a.t <= b.t;
        }
        if a.edge == self.skeleton.root() {
            return true;
        }
        // A point at the far end of its edge coincides with the start of
        // every child edge.
        self.skeleton.precedes(a.edge, b.edge)
    }
}

/// `∫_{[a,b]} f` along the path from `a` to `b`.
pub fn integrate_path(
    mtree: &MetricTree,
    f: &MetricFunction,
    a: MetricPoint,
    b: MetricPoint,
) -> Result<f64> {
    mtree.check_point(a)?;
    mtree.check_point(b)?;
    if !mtree.precedes(a, b) {
        return Err(Error::Order(format!(
            "points ({}, {}) and ({}, {}) are not ordered along a path",
            a.edge, a.t, b.edge, b.t
        )));
    }
    if a.edge == b.edge {
        return Ok(f.edges[a.edge].integral(a.t, b.t));
    }
    let tree = &mtree.skeleton;
    let mut total = f.edges[b.edge].integral(0.0, b.t);
    let mut e = tree.parent(b.edge);
    while let Some(cur) = e {
        if cur == a.edge {
            total += f.edges[cur].integral(a.t, mtree.lengths[cur]);
            break;
        }
        if cur != tree.root() {
            total += f.edges[cur].integral(0.0, mtree.lengths[cur]);
        }
        e = tree.parent(cur);
    }
    Ok(total)
}

/// `v(x) ∫_{[x₀, x]} g f`.
pub fn apply_hardy(mtree: &MetricTree, f: &MetricFunction, x: MetricPoint) -> Result<f64> {
    let gf = mtree.g.product(f);
    let integral = integrate_path(mtree, &gf, mtree.root_point(), x)?;
    Ok(mtree.v.edges[x.edge].eval(x.t) * integral)
}

// ---------------------------------------------------------------------------
// Tilings and the reduction to a summation operator

/// A partition of the edges into connected tiles with level labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Tiling {
    pub tiles: Vec<Vec<VertexId>>,
    pub labels: Vec<usize>,
    /// Tile tree: tile `i` is the parent of tile `j` when the top vertex of
    /// `j` is the deeper end of an edge in `i`.
    pub tile_tree: RootedTree,
}

impl Tiling {
    /// One tile per internal vertex, holding its child edges, labelled by
    /// the level of the deeper endpoints.
    pub fn by_level(mtree: &MetricTree) -> Result<Self> {
        let tree = &mtree.skeleton;
        let mut tiles = Vec::new();
        let mut labels = Vec::new();
        for v in tree.bfs_order() {
            if !tree.children(v).is_empty() {
                tiles.push(tree.children(v).to_vec());
                labels.push(tree.level(v) + 1);
            }
        }
        Self::from_tiles(mtree, tiles, labels)
    }

    /// Validates a user tiling: tiles must partition the edges, each tile
    /// must hang from a single top vertex and be connected, and labels must
    /// increase by exactly one from a tile to each successor.
    pub fn from_tiles(
        mtree: &MetricTree,
        tiles: Vec<Vec<VertexId>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let tree = &mtree.skeleton;
        if tiles.len() != labels.len() {
            return Err(Error::Structure("one label per tile is required".into()));
        }
        let mut tile_of = vec![usize::MAX; tree.len()];
        for (i, tile) in tiles.iter().enumerate() {
            if tile.is_empty() {
                return Err(Error::Structure(format!("tile {i} is empty")));
            }
            for &e in tile {
                if e >= tree.len() || e == tree.root() {
                    return Err(Error::Structure(format!("tile {i} names a non-edge {e}")));
                }
                if tile_of[e] != usize::MAX {
                    return Err(Error::Structure(format!("edge {e} lies in two tiles")));
                }
                tile_of[e] = i;
            }
        }
        if mtree.edges().any(|e| tile_of[e] == usize::MAX) {
            return Err(Error::Structure("some edge is not covered by a tile".into()));
        }
        let mut parents = vec![None; tiles.len()];
        for (i, tile) in tiles.iter().enumerate() {
            let mut top = None;
            for &e in tile {
                let p = tree.parent(e).expect("edges have a parent vertex");
                if p != tree.root() && tile_of[p] == i {
                    continue;
                }
                match top {
                    None => top = Some(p),
                    Some(t) if t == p => {}
                    Some(_) => {
                        return Err(Error::Structure(format!("tile {i} is not connected")))
                    }
                }
            }
            let top = top.ok_or_else(|| Error::Structure(format!("tile {i} has no top")))?;
            if top != tree.root() {
                let parent_tile = tile_of[top];
                parents[i] = Some(parent_tile);
                if labels[i] != labels[parent_tile] + 1 {
                    return Err(Error::Structure(format!(
                        "tile {i} has label {} but its predecessor has {}",
                        labels[i], labels[parent_tile]
                    )));
                }
            }
        }
        let tile_tree = RootedTree::from_parents(&parents)
            .map_err(|e| Error::Structure(format!("tiles do not form a tree: {e}")))?;
        Ok(Tiling {
            tiles,
            labels,
            tile_tree,
        })
    }
}

/// Reference law for tile norms:
/// `u_k ≍ 2^{(β_g - 1/p')k} Ψ_g(2^{-k})` and `w_k ≍ 2^{(β_v - 1/q)k} Ψ_v(2^{-k})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileLaw {
    pub beta_g: f64,
    pub beta_v: f64,
    #[serde(default)]
    pub psi_g: SlowFactor,
    #[serde(default)]
    pub psi_v: SlowFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileNorms {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub labels: Vec<usize>,
    /// Largest ratio of a tile norm to the reference law.
    pub c_star: Option<f64>,
    /// Least-squares slope of the log2 of the largest ratio per level.
    pub drift: Option<f64>,
    pub violation: bool,
}

fn recip(r: f64) -> f64 {
    if r.is_infinite() {
        0.0
    } else {
        1.0 / r
    }
}

/// Per-tile norms `u = ‖g‖_{L_{p'}}` and `w = ‖v‖_{L_q}` and the summation
/// operator they define on the tile tree.
pub fn discretize_to_summation(
    mtree: &MetricTree,
    tiling: &Tiling,
    p: f64,
    q: f64,
    law: Option<&TileLaw>,
) -> Result<(WeightedTreeOperator, TileNorms)> {
    let pc = conjugate(p);
    let tile_norm = |f: &MetricFunction, tile: &[VertexId], r: f64| -> f64 {
        if r.is_infinite() {
            tile.iter()
                .map(|&e| f.edges[e].norm(0.0, mtree.lengths[e], r))
                .fold(0.0, f64::max)
        } else {
            tile.iter()
                .map(|&e| f.edges[e].norm(0.0, mtree.lengths[e], r).powf(r))
                .sum::<f64>()
                .powf(1.0 / r)
        }
    };
    let u: Vec<f64> = tiling.tiles.iter().map(|t| tile_norm(&mtree.g, t, pc)).collect();
    let w: Vec<f64> = tiling.tiles.iter().map(|t| tile_norm(&mtree.v, t, q)).collect();
    let mut op = WeightedTreeOperator::new(tiling.tile_tree.clone(), u.clone(), w.clone())?;
    op.layer_of = tiling.labels.clone();

    let (mut c_star, mut drift, mut violation) = (None, None, false);
    if let Some(law) = law {
        let mut per_level: std::collections::BTreeMap<usize, f64> = Default::default();
        for i in 0..u.len() {
            let k = tiling.labels[i] as f64;
            let t = (-k).exp2();
            let ref_u = ((law.beta_g - recip(pc)) * k).exp2() * law.psi_g.eval(t);
            let ref_w = ((law.beta_v - recip(q)) * k).exp2() * law.psi_v.eval(t);
            let r = (u[i] / ref_u).max(w[i] / ref_w);
            let e = per_level.entry(tiling.labels[i]).or_insert(0.0);
            *e = e.max(r);
        }
        c_star = per_level.values().copied().reduce(f64::max);
        if per_level.len() >= 2 {
            let pts: Vec<(f64, f64)> = per_level.iter().map(|(&k, &r)| (k as f64, r.log2())).collect();
            let slope = least_squares_slope(&pts);
            violation = slope > 0.05;
            drift = Some(slope);
        }
    }
    Ok((
        op,
        TileNorms {
            u,
            w,
            labels: tiling.labels.clone(),
            c_star,
            drift,
            violation,
        },
    ))
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

// ---------------------------------------------------------------------------
// Hilbert-corner norm of the integral operator

/// Smallest admissible number of cells per edge.
pub const MIN_RESOLUTION: usize = 16;

/// Largest singular value of the Galerkin compression of `I_{g,v,x₀}` onto
/// step functions with `resolution` cells per edge (refined at density
/// breakpoints). The compression converges to the norm from below.
pub fn volterra_norm_l2(mtree: &MetricTree, resolution: usize) -> Result<f64> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Precision(format!(
            "resolution {resolution} is below {MIN_RESOLUTION} cells per edge"
        )));
    }
    let tree = &mtree.skeleton;
    // Cell tree: a virtual root, then each edge's cells in order.
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut a = vec![0.0];
    let mut b = vec![0.0];
    let mut last_cell = vec![0usize; tree.len()];
    for e in tree.bfs_order() {
        if e == tree.root() {
            continue;
        }
        let len = mtree.lengths[e];
        let mut cuts: Vec<f64> = (0..=resolution).map(|i| len * i as f64 / resolution as f64).collect();
        cuts.extend(mtree.g.edges[e].breaks.iter().copied());
        cuts.extend(mtree.v.edges[e].breaks.iter().copied());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * len);
        let mut prev = last_cell[tree.parent(e).expect("edge has a parent")];
        for w in cuts.windows(2) {
            let h = w[1] - w[0];
            if h <= 0.0 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let id = parent.len();
            parent.push(Some(prev));
            a.push(mtree.v.edges[e].eval(mid) * h.sqrt());
            b.push(mtree.g.edges[e].eval(mid) * h.sqrt());
            prev = id;
        }
        last_cell[e] = prev;
    }
    let cells = RootedTree::from_parents(&parent)?;
    let n = cells.len();
    // Strictly-earlier part is S_{b,a} without its diagonal; the diagonal
    // block of a cell contributes a_i b_i / 2.
    let op = WeightedTreeOperator::new(cells, b.clone(), a.clone())?;
    let diag: Vec<f64> = (0..n).map(|i| -0.5 * a[i] * b[i]).collect();
    if n <= 1024 {
        let mut m = op.assemble_matrix()?;
        for i in 0..n {
            m[(i, i)] += diag[i];
        }
        return Ok(singular_values(&m)?[0]);
    }
    let apply = |x: &[f64]| {
        let mut y = op.apply(x);
        y.iter_mut().zip(&diag).zip(x).for_each(|((yi, d), xi)| *yi += d * xi);
        y
    };
    let apply_t = |x: &[f64]| {
        let mut y = op.apply_transpose(x);
        y.iter_mut().zip(&diag).zip(x).for_each(|((yi, d), xi)| *yi += d * xi);
        y
    };
    Ok(power_norm(n, apply, apply_t))
}

// ---------------------------------------------------------------------------
// File format: `0 -1` for the root, then `id parent length g v` per edge.

pub fn write_metric_tree(mtree: &MetricTree) -> String {
    let tree = &mtree.skeleton;
    let mut out = String::new();
    for v in tree.bfs_order() {
        match tree.parent(v) {
            None => writeln!(out, "{v} -1"),
            Some(p) => writeln!(
                out,
                "{v} {p} {} {} {}",
                mtree.lengths[v],
                mtree.g.edges[v].to_token(),
                mtree.v.edges[v].to_token()
            ),
        }
        .expect("writing to a String");
    }
    out
}

pub fn parse_metric_tree(text: &str) -> Result<MetricTree> {
    let (tree, extra) = parse_tree_lines(text)?;
    let n = tree.len();
    let mut lengths = vec![0.0; n];
    let mut g = MetricFunction::constant(n, 1.0);
    let mut v = MetricFunction::constant(n, 1.0);
    for (id, cols) in extra.iter().enumerate() {
        if id == tree.root() {
            if !cols.is_empty() {
                return Err(Error::Input("the root line takes no edge data".into()));
            }
            continue;
        }
        if cols.len() != 3 {
            return Err(Error::Input(format!("edge {id}: expected `length g v`")));
        }
        lengths[id] = cols[0]
            .parse()
            .map_err(|_| Error::Input(format!("edge {id}: bad length '{}'", cols[0])))?;
        g.edges[id] = PiecewiseConstant::parse_token(&cols[1])?;
        v.edges[id] = PiecewiseConstant::parse_token(&cols[2])?;
    }
    MetricTree::new(tree, lengths, g, v)
}
