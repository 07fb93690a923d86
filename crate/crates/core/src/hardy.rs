//! The weighted summation operator on a tree,
//! `S f(ξ) = w(ξ) Σ_{ξ' ≤ ξ} u(ξ') f(ξ')`, with norms, widths, an explicit
//! low-rank approximation scheme and a disjoint-support lower bound.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::balls::{conjugate, diag_width, gap_plus, order_by_kind, DiagonalSpec, WidthKind};
use crate::error::{Error, Result};
use crate::linalg::{lp_norm, power_norm, singular_values};
use crate::partition::{partition_tree, VertexCost};
use crate::slow::SlowFactor;
use crate::tree::{parse_tree_lines, RootedTree, VertexId};

/// Default row cap for dense assembly.
pub const DENSE_LIMIT: usize = 8192;

/// Blocks up to this size use a dense SVD; larger ones use power iteration.
const DENSE_BLOCK: usize = 256;

const TIE: f64 = 1e-12;

/// Level-dependent weights `u_j = 2^{-κ_u m j} Ψ_g(2^{-m j})` and
/// `w_j = 2^{-κ_w m j} Ψ_v(2^{-m j})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightLaw {
    pub kappa_u: f64,
    pub kappa_w: f64,
    pub m_star: u32,
    #[serde(default)]
    pub psi_g: SlowFactor,
    #[serde(default)]
    pub psi_v: SlowFactor,
}

impl WeightLaw {
    pub fn new(kappa_u: f64, kappa_w: f64, m_star: u32) -> Self {
        WeightLaw {
            kappa_u,
            kappa_w,
            m_star,
            psi_g: SlowFactor::one(),
            psi_v: SlowFactor::one(),
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa_u + self.kappa_w
    }

    fn scale(&self, j: usize) -> f64 {
        (-(self.m_star as f64) * j as f64).exp2()
    }

    pub fn u_at(&self, j: usize) -> f64 {
        let t = self.scale(j);
        t.powf(self.kappa_u) * self.psi_g.eval(t)
    }

    pub fn w_at(&self, j: usize) -> f64 {
        let t = self.scale(j);
        t.powf(self.kappa_w) * self.psi_v.eval(t)
    }

    /// `Ψ = Ψ_g Ψ_v` at `2^{-m j}`.
    pub fn psi_at(&self, j: usize) -> f64 {
        let t = self.scale(j);
        self.psi_g.eval(t) * self.psi_v.eval(t)
    }
}

/// Extra data for the boundary case `κ = -θ(1/q - 1/p)_+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalFactors {
    /// `α = α_g + α_v`.
    pub alpha: f64,
    pub gamma: f64,
    /// `ρ = ρ_g ρ_v`.
    #[serde(default)]
    pub rho: SlowFactor,
}

/// `S_{u,w}` on a concrete tree.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTreeOperator {
    pub tree: RootedTree,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub layer_of: Vec<usize>,
    pub law: Option<WeightLaw>,
    order: Vec<VertexId>,
}

impl WeightedTreeOperator {
    pub fn new(tree: RootedTree, u: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n = tree.len();
        if u.len() != n || w.len() != n {
            return Err(Error::Input(format!(
                "weights have lengths {} and {} for {n} vertices",
                u.len(),
                w.len()
            )));
        }
        if u.iter().chain(&w).any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::Input("weights must be finite and non-negative".into()));
        }
        let layer_of = tree.levels().to_vec();
        let order = tree.bfs_order();
        Ok(WeightedTreeOperator {
            tree,
            u,
            w,
            layer_of,
            law: None,
            order,
        })
    }

    pub fn from_law(tree: RootedTree, law: &WeightLaw) -> Result<Self> {
        let u = tree.levels().iter().map(|&j| law.u_at(j)).collect();
        let w = tree.levels().iter().map(|&j| law.w_at(j)).collect();
        let mut op = Self::new(tree, u, w)?;
        op.law = Some(law.clone());
        Ok(op)
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// `S f`.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.len()];
        for &v in &self.order {
            let up = self.tree.parent(v).map_or(0.0, |p| s[p]);
            s[v] = up + self.u[v] * f[v];
        }
        s.iter().zip(&self.w).map(|(a, b)| a * b).collect()
    }

    /// `Sᵀ g`: `u(ξ') Σ_{ξ ≥ ξ'} w(ξ) g(ξ)`.
    pub fn apply_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut s: Vec<f64> = g.iter().zip(&self.w).map(|(a, b)| a * b).collect();
        for &v in self.order.iter().rev() {
            if let Some(p) = self.tree.parent(v) {
                s[p] += s[v];
            }
        }
        s.iter().zip(&self.u).map(|(a, b)| a * b).collect()
    }

    pub fn assemble_matrix(&self) -> Result<DMatrix<f64>> {
        self.assemble_matrix_with_cap(DENSE_LIMIT)
    }

    pub fn assemble_matrix_with_cap(&self, cap: usize) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n > cap {
            return Err(Error::Capacity(format!(
                "{n} vertices exceed the dense limit {cap}; use a norm-only mode"
            )));
        }
        let mut m = DMatrix::zeros(n, n);
        for xi in 0..n {
            let mut a = Some(xi);
            while let Some(v) = a {
                m[(xi, v)] = self.w[xi] * self.u[v];
                a = self.tree.parent(v);
            }
        }
        Ok(m)
    }

    /// Operator norm `l_p → l_q` at the computable corners, without forming
    /// the dense matrix.
    pub fn norm(&self, p: f64, q: f64) -> Result<f64> {
        if p == 1.0 {
            // Column ξ' is u(ξ') times w on the subtree of ξ'.
            let mut acc: Vec<f64> = self.w.iter().map(|&w| pow_q(w, q)).collect();
            for &v in self.order.iter().rev() {
                if let Some(p) = self.tree.parent(v) {
                    acc[p] = combine_q(acc[p], acc[v], q);
                }
            }
            return Ok((0..self.len())
                .map(|v| self.u[v] * root_q(acc[v], q))
                .fold(0.0, f64::max));
        }
        if q.is_infinite() {
            let pc = conjugate(p);
            let mut acc = vec![0.0; self.len()];
            for &v in &self.order {
                let up = self.tree.parent(v).map_or(0.0, |p| acc[p]);
                acc[v] = combine_q(up, pow_q(self.u[v], pc), pc);
            }
            return Ok((0..self.len())
                .map(|v| self.w[v] * root_q(acc[v], pc))
                .fold(0.0, f64::max));
        }
        if p == 2.0 && q == 2.0 {
            if self.len() <= DENSE_BLOCK {
                return Ok(singular_values(&self.assemble_matrix()?)?[0]);
            }
            return Ok(power_norm(
                self.len(),
                |x| self.apply(x),
                |y| self.apply_transpose(y),
            ));
        }
        Err(Error::UnsupportedCorner { p, q })
    }

    /// The same operator with `u` zeroed on the given vertices.
    fn with_u_cleared(&self, vertices: &[VertexId]) -> WeightedTreeOperator {
        let mut op = self.clone();
        for &v in vertices {
            op.u[v] = 0.0;
        }
        op
    }

    /// Restriction to an induced subtree.
    pub fn restrict(&self, vertices: &[VertexId]) -> Result<WeightedTreeOperator> {
        let (sub, orig) = self.tree.induced(vertices)?;
        let u = orig.iter().map(|&v| self.u[v]).collect();
        let w = orig.iter().map(|&v| self.w[v]).collect();
        let mut op = WeightedTreeOperator::new(sub, u, w)?;
        op.layer_of = orig.iter().map(|&v| self.layer_of[v]).collect();
        op.law = self.law.clone();
        Ok(op)
    }
}

// Accumulators store Σ x^q, or the running max when q = ∞.
fn pow_q(x: f64, q: f64) -> f64 {
    if q.is_infinite() {
        x
    } else {
        x.powf(q)
    }
}

fn combine_q(a: f64, b: f64, q: f64) -> f64 {
    if q.is_infinite() {
        a.max(b)
    } else {
        a + b
    }
}

fn root_q(a: f64, q: f64) -> f64 {
    if q.is_infinite() {
        a
    } else {
        a.powf(1.0 / q)
    }
}

// ---------------------------------------------------------------------------
// Operator file: `id parent u w` per vertex.

pub fn write_operator(op: &WeightedTreeOperator) -> String {
    let mut out = String::new();
    for v in op.tree.bfs_order() {
        let p = op.tree.parent(v).map_or(-1, |p| p as i64);
        writeln!(out, "{v} {p} {} {}", op.u[v], op.w[v]).expect("writing to a String");
    }
    out
}

pub fn parse_operator(text: &str) -> Result<WeightedTreeOperator> {
    let (tree, extra) = parse_tree_lines(text)?;
    let mut u = Vec::with_capacity(tree.len());
    let mut w = Vec::with_capacity(tree.len());
    for (v, cols) in extra.iter().enumerate() {
        if cols.len() != 2 {
            return Err(Error::Input(format!("vertex {v}: expected `u w` columns")));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Input(format!("vertex {v}: bad weight '{s}'")))
        };
        u.push(parse(&cols[0])?);
        w.push(parse(&cols[1])?);
    }
    WeightedTreeOperator::new(tree, u, w)
}

// ---------------------------------------------------------------------------

/// Upper bound constant `C(j₀)` for the operator restricted to a subtree
/// whose root sits at level `j₀`.
pub fn hardy_constant(
    law: &WeightLaw,
    p: f64,
    q: f64,
    j0: usize,
    theta: f64,
    critical: Option<&CriticalFactors>,
) -> Result<f64> {
    let gap = gap_plus(p, q);
    let kappa = law.kappa();
    let threshold = -theta * gap;
    if kappa < threshold - TIE {
        return Err(Error::Domain(format!(
            "kappa = {kappa} is below the threshold {threshold}"
        )));
    }
    let m = law.m_star as f64;
    let j = j0 as f64;
    if kappa > threshold + TIE {
        return Ok((-kappa * m * j).exp2() * law.psi_at(j0));
    }
    let cf = critical.ok_or_else(|| {
        Error::Domain("the boundary case needs alpha, gamma and rho".into())
    })?;
    if !(cf.alpha > (1.0 - cf.gamma) * gap) {
        return Err(Error::Domain(format!(
            "alpha = {} must exceed (1 - gamma)(1/q - 1/p)_+ = {}",
            cf.alpha,
            (1.0 - cf.gamma) * gap
        )));
    }
    if theta == 0.0 && !(cf.gamma < 0.0) {
        return Err(Error::Domain("gamma must be negative when theta = 0".into()));
    }
    // The printed formula has j0^{...}; j0 = 0 is read as 1.
    let jj = j.max(1.0);
    Ok((-m * theta * gap * j).exp2() * jj.powf(-cf.alpha + gap) * cf.rho.eval(jj))
}

/// Exact norm of a dense matrix at the computable corners.
pub fn operator_norm_corner(m: &DMatrix<f64>, p: f64, q: f64) -> Result<f64> {
    if p == 1.0 {
        return Ok(m
            .column_iter()
            .map(|c| lp_norm(c.iter().copied(), q))
            .fold(0.0, f64::max));
    }
    if q.is_infinite() {
        let pc = conjugate(p);
        return Ok(m
            .row_iter()
            .map(|r| lp_norm(r.iter().copied(), pc))
            .fold(0.0, f64::max));
    }
    if p == 2.0 && q == 2.0 {
        return Ok(singular_values(m)?.first().copied().unwrap_or(0.0));
    }
    Err(Error::UnsupportedCorner { p, q })
}

/// Singular values, which are the linear widths at `p = q = 2`.
pub fn linear_widths_l2(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    singular_values(m)
}

// ---------------------------------------------------------------------------
// Budget plan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    /// Smallest admissible `n`.
    pub n_min: usize,
    /// Damping exponent when `δ* = ∞`.
    pub eps0: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            n_min: 16,
            eps0: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLayer {
    pub t: usize,
    /// `ν̄_t = 2^{k γ t} ψ(2^{k t})`.
    pub nu_bar: f64,
    pub n_t: u64,
    pub m_t_star: u32,
    /// `ν̄_t n_t 2^{-m_t*}`.
    pub allocation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetPlan {
    pub n: usize,
    pub t_star: usize,
    pub t_hat: usize,
    pub epsilon: f64,
    pub layers: Vec<BudgetLayer>,
    pub rank_total: u64,
    /// `rank_total / n`.
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    pub k_star: f64,
    pub gamma_star: f64,
    #[serde(default)]
    pub psi_star: SlowFactor,
    /// `f64::INFINITY` selects the discrete case.
    pub delta_star: f64,
    pub lambda_star: f64,
    pub beta_star: f64,
}

pub fn make_budget_plan(n: usize, params: &BudgetParams) -> Result<BudgetPlan> {
    make_budget_plan_with(n, params, &BudgetConfig::default())
}

pub fn make_budget_plan_with(
    n: usize,
    params: &BudgetParams,
    config: &BudgetConfig,
) -> Result<BudgetPlan> {
    if n < config.n_min.max(1) {
        return Err(Error::Domain(format!("n = {n} is below the minimum {}", config.n_min)));
    }
    let BudgetParams {
        k_star,
        gamma_star,
        delta_star,
        lambda_star,
        beta_star,
        ..
    } = *params;
    if !(k_star > 0.0 && gamma_star > 0.0) {
        return Err(Error::Domain("k_star and gamma_star must be positive".into()));
    }
    if !(delta_star > 0.0) {
        return Err(Error::Domain("delta_star must be positive or infinite".into()));
    }
    let psi = &params.psi_star;
    let nu_bar = |t: usize| {
        let s = k_star * t as f64;
        (gamma_star * s).exp2() * psi.eval(s.exp2())
    };
    let nf = n as f64;
    let mut t_star = 1;
    while nu_bar(t_star) < nf {
        t_star += 1;
        if t_star > 100_000 {
            return Err(Error::Numeric("layer cut not reached".into()));
        }
    }
    let discrete = delta_star.is_infinite();
    let t_hat = if !discrete && delta_star < lambda_star * beta_star {
        1
    } else {
        t_star
    };
    let epsilon = if discrete {
        config.eps0
    } else {
        (-lambda_star + delta_star * gamma_star).abs() / (2.0 * delta_star)
    };
    if !(epsilon > 0.0) {
        return Err(Error::Domain("damping exponent vanishes for these parameters".into()));
    }
    let big_n = nf.log2();
    // Past this layer every allocation is below 2^{-N-1}.
    let t_max = t_star.max(t_hat) + ((big_n + 1.0) / epsilon).ceil() as usize + 1;
    let mut layers = Vec::with_capacity(t_max);
    let mut total = 0.0;
    for t in 1..=t_max {
        let s = k_star * t as f64;
        let psi_t = psi.eval(s.exp2());
        let e = big_n - gamma_star * s - epsilon * (t as f64 - t_hat as f64).abs();
        let n_t = ((e.exp2() / psi_t).ceil() as u64).max(1);
        let m_t_star = (psi_t.log2() - e).ceil().max(0.0) as u32;
        // In log form: ν̄_t alone overflows for deep layers.
        let allocation = (gamma_star * s + psi_t.log2() + (n_t as f64).log2() - m_t_star as f64).exp2();
        total += allocation;
        layers.push(BudgetLayer {
            t,
            nu_bar: nu_bar(t),
            n_t,
            m_t_star,
            allocation,
        });
    }
    let rank_total = total.ceil() as u64;
    Ok(BudgetPlan {
        n,
        t_star,
        t_hat,
        epsilon,
        layers,
        rank_total,
        c1: rank_total as f64 / nf,
    })
}

// ---------------------------------------------------------------------------
// Upper scheme

/// Layered approximant: rows of `S` at `exact` vertices are reproduced;
/// on each part `E` the approximation is `w|_E (S f)(root_E) / w(root_E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayeredApproximant {
    pub exact: Vec<VertexId>,
    pub parts: Vec<Vec<VertexId>>,
}

impl LayeredApproximant {
    pub fn rank(&self) -> usize {
        self.exact.len() + self.parts.len()
    }

    pub fn apply(&self, op: &WeightedTreeOperator, f: &[f64]) -> Vec<f64> {
        let sf = op.apply(f);
        let mut out = vec![0.0; op.len()];
        for &v in &self.exact {
            out[v] = sf[v];
        }
        for part in &self.parts {
            let r = part[0];
            // S f(r) / w(r) is the prefix sum up to the root.
            let prefix = if op.w[r] > 0.0 { sf[r] / op.w[r] } else { 0.0 };
            for &v in part {
                out[v] = op.w[v] * prefix;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AchievedError {
    /// Exact residual norm.
    Exact(f64),
    /// Upper estimate from the Hardy constants of the parts.
    Bound(f64),
    Unavailable,
}

impl AchievedError {
    pub fn value(&self) -> Option<f64> {
        match self {
            AchievedError::Exact(v) | AchievedError::Bound(v) => Some(*v),
            AchievedError::Unavailable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub approximant: LayeredApproximant,
    pub rank: usize,
    /// Deepest level reproduced exactly, `None` if no level is.
    pub cut_level: Option<usize>,
    pub error: AchievedError,
}

/// Builds the layered approximant with rank at most `n` and measures the
/// residual. Levels `0..=t` are reproduced, the subtrees hanging below are
/// parts, and remaining budget splits those subtrees further with
/// [`partition_tree`].
pub fn discrete_upper_scheme(
    op: &WeightedTreeOperator,
    p: f64,
    q: f64,
    n: usize,
) -> Result<SchemeResult> {
    if n < 1 {
        return Err(Error::Domain("rank budget must be at least 1".into()));
    }
    let tree = &op.tree;
    let sizes = tree.level_sizes();
    if n >= tree.len() {
        let exact = tree.bfs_order();
        return Ok(SchemeResult {
            rank: exact.len(),
            approximant: LayeredApproximant {
                exact,
                parts: Vec::new(),
            },
            cut_level: Some(tree.depth()),
            error: AchievedError::Exact(0.0),
        });
    }
    // Largest t with Σ_{s≤t} ν_s + ν_{t+1} ≤ n.
    let mut cut = None;
    let mut used = 0;
    for t in 0..sizes.len() - 1 {
        if used + sizes[t] + sizes[t + 1] <= n {
            used += sizes[t];
            cut = Some(t);
        } else {
            break;
        }
    }
    let (exact, roots): (Vec<VertexId>, Vec<VertexId>) = match cut {
        None => (Vec::new(), vec![tree.root()]),
        Some(t) => {
            let order = tree.bfs_order();
            let exact = order.iter().copied().filter(|&v| tree.level(v) <= t).collect();
            let roots = order.into_iter().filter(|&v| tree.level(v) == t + 1).collect();
            (exact, roots)
        }
    };
    let parts = refine_tails(tree, &roots, n - exact.len())?;
    let approximant = LayeredApproximant { exact, parts };
    let error = residual_error(op, &approximant, p, q)?;
    Ok(SchemeResult {
        rank: approximant.rank(),
        approximant,
        cut_level: cut,
        error,
    })
}

fn refine_tails(
    tree: &RootedTree,
    roots: &[VertexId],
    budget: usize,
) -> Result<Vec<Vec<VertexId>>> {
    let subtrees: Vec<Vec<VertexId>> = roots
        .iter()
        .map(|&r| tree.subtree(r))
        .collect::<Result<_>>()?;
    let total: usize = subtrees.iter().map(Vec::len).sum();
    let split = |scale: usize| -> Result<Vec<Vec<VertexId>>> {
        let mut parts = Vec::new();
        for sub in &subtrees {
            let share = (scale * sub.len()) / total.max(1);
            if share <= 1 || sub.len() == 1 {
                parts.push(sub.clone());
                continue;
            }
            let (local, orig) = tree.induced(sub)?;
            let k = local.max_branching().max(1);
            let part = partition_tree(&local, &VertexCost::unit(local.len()), share, k)?;
            for pv in part.parts {
                parts.push(pv.into_iter().map(|v| orig[v]).collect());
            }
        }
        Ok(parts)
    };
    let mut best = split(0)?;
    debug_assert!(best.len() <= budget);
    // Part counts grow roughly with the scale; keep the largest that fits.
    let mut scale = roots.len() + 1;
    while scale <= 4 * budget.max(1) {
        let parts = split(scale)?;
        if parts.len() <= budget {
            best = parts;
        }
        scale += (scale / 8).max(1);
    }
    Ok(best)
}

fn residual_error(
    op: &WeightedTreeOperator,
    approx: &LayeredApproximant,
    p: f64,
    q: f64,
) -> Result<AchievedError> {
    let exact_corner = p == 1.0 || q.is_infinite() || (p == 2.0 && q == 2.0);
    if !exact_corner {
        // The residual on a part rooted at level j is bounded by C(j) up to
        // a constant. Only the strict case κ > 0 is handled without θ.
        let Some(law) = &op.law else {
            return Ok(AchievedError::Unavailable);
        };
        if law.kappa() <= 0.0 {
            return Ok(AchievedError::Unavailable);
        }
        let mut worst: f64 = 0.0;
        for part in approx.parts.iter().filter(|p| p.len() > 1) {
            let j = op.tree.level(part[0]);
            worst = worst.max(hardy_constant(law, p, q, j, 0.0, None)?);
        }
        return Ok(AchievedError::Bound(worst));
    }
    // The residual is block diagonal over the parts, and for q ≥ p (which
    // covers every exact corner) a block-diagonal norm is the largest block
    // norm. On a part the residual is S with u cleared at the part root.
    if p > q {
        return Ok(AchievedError::Unavailable);
    }
    let mut worst: f64 = 0.0;
    for part in approx.parts.iter().filter(|p| p.len() > 1) {
        let block = op.restrict(part)?.with_u_cleared(&[0]);
        worst = worst.max(block.norm(p, q)?);
    }
    Ok(AchievedError::Exact(worst))
}

// ---------------------------------------------------------------------------
// Lower bound

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub feasible: bool,
    /// Level whose subtrees gave the bound.
    pub level: Option<usize>,
    /// Number of disjoint subtrees at that level.
    pub m: usize,
}

/// Disjoint-support lower bound: the unit vectors at the roots of the
/// level-`k` subtrees are mapped onto a diagonal ball with entries
/// `M_j = u(root) ‖w on the subtree‖_q`. The best level with at least
/// `2n` subtrees is returned.
pub fn lower_bound_disjoint(
    op: &WeightedTreeOperator,
    p: f64,
    q: f64,
    kind: WidthKind,
    n: usize,
) -> Result<LowerBound> {
    let tree = &op.tree;
    let need = (2 * n).max(1);
    // ‖w‖_q^q on every subtree.
    let mut acc: Vec<f64> = op.w.iter().map(|&w| pow_q(w, q)).collect();
    for v in tree.bfs_order().into_iter().rev() {
        if let Some(par) = tree.parent(v) {
            acc[par] = combine_q(acc[par], acc[v], q);
        }
    }
    let mut by_level: Vec<Vec<VertexId>> = vec![Vec::new(); tree.depth() + 1];
    for v in 0..tree.len() {
        by_level[tree.level(v)].push(v);
    }
    let mut best = LowerBound {
        value: 0.0,
        feasible: false,
        level: None,
        m: 0,
    };
    for (level, roots) in by_level.iter().enumerate() {
        if roots.len() < need {
            continue;
        }
        let mut ms: Vec<f64> = roots.iter().map(|&r| op.u[r] * root_q(acc[r], q)).collect();
        ms.sort_by(|a, b| b.total_cmp(a));
        let value = if ms[0] <= 0.0 {
            0.0
        } else if p >= q {
            let positive: Vec<f64> = ms.iter().copied().filter(|&m| m > 0.0).collect();
            if n >= positive.len() {
                0.0
            } else {
                diag_width(&DiagonalSpec { c: positive, p, q }, n)?
            }
        } else {
            // Common-M form on the top m' entries.
            let mut v: f64 = 0.0;
            for mm in (n + 1)..=ms.len() {
                if ms[mm - 1] <= 0.0 {
                    break;
                }
                v = v.max(ms[mm - 1] * order_by_kind(kind, n, mm, p, q)?);
            }
            v
        };
        if !best.feasible || value > best.value {
            best = LowerBound {
                value,
                feasible: true,
                level: Some(level),
                m: roots.len(),
            };
        }
    }
    Ok(best)
}
