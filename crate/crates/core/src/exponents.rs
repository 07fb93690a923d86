//! Decay exponents of widths for weighted Sobolev classes, for cubes, for
//! metric trees and for summation operators on trees.
//!
//! Every calculator returns an [`ExponentReport`]: the active exponent list,
//! a description of the slowly varying correction `σ_j` attached to each
//! exponent, the selected index (or a degenerate tie), and the truth value
//! of every standing condition.

use serde::{Deserialize, Serialize};

use crate::balls::{conjugate, gap_plus, recip, WidthKind};
use crate::error::{Error, Result};
use crate::slow::{ImplicitInverse, SlowFactor};

/// Two exponents closer than this are treated as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Parameters of a weighted Sobolev embedding.
///
/// `lambda`, `psi_g` and `psi_v` are functions of a small argument `t`;
/// `tau`, `rho_g` and `rho_v` are functions of a large argument. In the
/// boundary case only `gamma`, `alpha_*`, `tau` and `rho_*` are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub p: f64,
    pub q: f64,
    pub r: u32,
    pub d: u32,
    pub theta: f64,
    pub beta_g: f64,
    pub beta_v: f64,
    pub kind: WidthKind,
    #[serde(default)]
    pub lambda: SlowFactor,
    #[serde(default)]
    pub psi_g: SlowFactor,
    #[serde(default)]
    pub psi_v: SlowFactor,
    #[serde(default)]
    pub alpha_g: f64,
    #[serde(default)]
    pub alpha_v: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub tau: SlowFactor,
    #[serde(default)]
    pub rho_g: SlowFactor,
    #[serde(default)]
    pub rho_v: SlowFactor,
}

impl RegimeParams {
    /// Plain parameters with trivial slowly varying factors.
    pub fn basic(p: f64, q: f64, r: u32, d: u32, theta: f64, beta_g: f64, beta_v: f64, kind: WidthKind) -> Self {
        RegimeParams {
            p,
            q,
            r,
            d,
            theta,
            beta_g,
            beta_v,
            kind,
            lambda: SlowFactor::one(),
            psi_g: SlowFactor::one(),
            psi_v: SlowFactor::one(),
            alpha_g: 0.0,
            alpha_v: 0.0,
            gamma: 0.0,
            tau: SlowFactor::one(),
            rho_g: SlowFactor::one(),
            rho_v: SlowFactor::one(),
        }
    }

    pub fn delta(&self) -> f64 {
        let d = self.d as f64;
        self.r as f64 + d * recip(self.q) - d * recip(self.p)
    }

    pub fn beta(&self) -> f64 {
        self.beta_g + self.beta_v
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_g + self.alpha_v
    }

    /// `δ - θ(1/q - 1/p)_+`.
    pub fn threshold(&self) -> f64 {
        self.delta() - self.theta * gap_plus(self.p, self.q)
    }

    pub fn q_hat(&self) -> f64 {
        self.kind.q_hat(self.p, self.q)
    }

    fn psi(&self) -> SlowFactor {
        SlowFactor::product(vec![self.psi_g.clone(), self.psi_v.clone()])
    }

    fn rho(&self) -> SlowFactor {
        SlowFactor::product(vec![self.rho_g.clone(), self.rho_v.clone()])
    }
}

/// The slowly varying factor `σ_j(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SigmaDescriptor {
    One,
    /// `Ψ(N^{-1/θ} φ^{-1}(N)) φ^{power}(N)` with `φ = φ_{θ,ψ_Λ}` and
    /// `N = n^{argument_power}`.
    PsiInverse {
        theta: f64,
        psi_lambda: SlowFactor,
        psi: SlowFactor,
        power: f64,
        argument_power: f64,
    },
    /// `ρ(N^{1/(1-γ)} φ(N)) φ^{-α}(N)` with `φ = φ_{1-γ,1/τ}` and
    /// `N = n^{argument_power}`.
    RhoInverse {
        one_minus_gamma: f64,
        tau_inv: SlowFactor,
        rho: SlowFactor,
        alpha: f64,
        argument_power: f64,
    },
}

impl SigmaDescriptor {
    fn with_argument_power(&self, a: f64) -> SigmaDescriptor {
        let mut out = self.clone();
        match &mut out {
            SigmaDescriptor::One => {}
            SigmaDescriptor::PsiInverse { argument_power, .. }
            | SigmaDescriptor::RhoInverse { argument_power, .. } => *argument_power = a,
        }
        out
    }

    pub fn eval(&self, n: f64) -> Result<f64> {
        match self {
            SigmaDescriptor::One => Ok(1.0),
            SigmaDescriptor::PsiInverse {
                theta,
                psi_lambda,
                psi,
                power,
                argument_power,
            } => {
                let x = n.powf(*argument_power);
                let inv = ImplicitInverse::new(*theta, psi_lambda.clone())?;
                let (y, phi) = inv.invert(x)?;
                // N^{-1/θ} φ^{-1}(N) = 1/y
                Ok(psi.eval(1.0 / y) * phi.powf(*power))
            }
            SigmaDescriptor::RhoInverse {
                one_minus_gamma,
                tau_inv,
                rho,
                alpha,
                argument_power,
            } => {
                let x = n.powf(*argument_power);
                let inv = ImplicitInverse::new(*one_minus_gamma, tau_inv.clone())?;
                let (y, phi) = inv.invert(x)?;
                Ok(rho.eval(y) * phi.powf(-alpha))
            }
        }
    }
}

/// `(log n)^{power} ρ(log n) τ^{tau_power}(log n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRate {
    pub power: f64,
    pub rho: SlowFactor,
    pub tau: SlowFactor,
    pub tau_power: f64,
}

impl LogRate {
    pub fn eval(&self, n: f64) -> f64 {
        let l = n.log2();
        l.powf(self.power) * self.rho.eval(l) * self.tau.eval(l).powf(self.tau_power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `p ≥ q`, or `p < q` with `q̂ ≤ 2`.
    Low,
    /// `p < q` with `q̂ > 2`.
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum Selection {
    Index(usize),
    /// No strict minimiser among the active exponents.
    Degenerate,
    Logarithmic,
    /// Widths decay faster than any power.
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

fn cond(name: &str, holds: bool, detail: String) -> Condition {
    Condition {
        name: name.to_string(),
        holds,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedExponent {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexedSigma {
    pub index: usize,
    pub sigma: SigmaDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub case: u8,
    pub branch: Branch,
    pub q_hat: f64,
    pub thetas: Vec<IndexedExponent>,
    pub sigmas: Vec<IndexedSigma>,
    pub selection: Selection,
    pub log_rate: Option<LogRate>,
    pub conditions: Vec<Condition>,
    pub warnings: Vec<String>,
}

impl ExponentReport {
    pub fn theta(&self, index: usize) -> Option<f64> {
        self.thetas.iter().find(|t| t.index == index).map(|t| t.value)
    }

    pub fn sigma(&self, index: usize) -> Option<&SigmaDescriptor> {
        self.sigmas.iter().find(|s| s.index == index).map(|s| &s.sigma)
    }

    /// Exponent of the selected law, if a power law was selected.
    pub fn selected_exponent(&self) -> Option<f64> {
        match self.selection {
            Selection::Index(j) => self.theta(j),
            _ => None,
        }
    }

    pub fn selected_sigma(&self) -> Option<&SigmaDescriptor> {
        match self.selection {
            Selection::Index(j) => self.sigma(j),
            _ => None,
        }
    }

    pub fn condition(&self, name: &str) -> Option<bool> {
        self.conditions.iter().find(|c| c.name == name).map(|c| c.holds)
    }

    /// `n^{-θ_{j*}} σ_{j*}(n)`, or the logarithmic law.
    pub fn rate(&self, n: f64) -> Result<f64> {
        match self.selection {
            Selection::Index(j) => {
                let theta = self.theta(j).expect("selected index is active");
                let sigma = self.sigma(j).map_or(Ok(1.0), |s| s.eval(n))?;
                Ok(n.powf(-theta) * sigma)
            }
            Selection::Logarithmic => Ok(self
                .log_rate
                .as_ref()
                .expect("logarithmic selection carries its law")
                .eval(n)),
            Selection::Degenerate => Err(Error::Regime(
                "no strict minimiser among the exponents; the rate is not determined".into(),
            )),
            Selection::Geometric => Err(Error::Regime(
                "widths decay geometrically; there is no power rate".into(),
            )),
        }
    }
}

/// Strict argmin with ties reported as degenerate.
pub fn select(thetas: &[IndexedExponent]) -> Selection {
    let Some(best) = thetas.iter().min_by(|a, b| a.value.total_cmp(&b.value)) else {
        return Selection::Degenerate;
    };
    let ties = thetas
        .iter()
        .filter(|t| (t.value - best.value).abs() <= TIE_TOLERANCE)
        .count();
    if ties > 1 {
        Selection::Degenerate
    } else {
        Selection::Index(best.index)
    }
}

fn exps(values: &[(usize, f64)]) -> Vec<IndexedExponent> {
    values
        .iter()
        .map(|&(index, value)| IndexedExponent { index, value })
        .collect()
}

fn sigmas(values: Vec<(usize, SigmaDescriptor)>) -> Vec<IndexedSigma> {
    values
        .into_iter()
        .map(|(index, sigma)| IndexedSigma { index, sigma })
        .collect()
}

fn high_branch(p: f64, q: f64, q_hat: f64) -> bool {
    p < q && q_hat > 2.0
}

/// `min{1/p - 1/q, 1/2 - 1/q̂}`.
fn high_gain(p: f64, q: f64, q_hat: f64) -> f64 {
    (recip(p) - recip(q)).min(0.5 - recip(q_hat))
}

fn check_pq(p: f64, q: f64) -> Vec<Condition> {
    vec![
        cond("p_range", p > 1.0, format!("1 < p <= inf (p = {p})")),
        cond("q_range", (1.0..f64::INFINITY).contains(&q), format!("1 <= q < inf (q = {q})")),
    ]
}

fn fail_on(conditions: &[Condition]) -> Result<()> {
    let failed: Vec<_> = conditions
        .iter()
        .filter(|c| !c.holds)
        .map(|c| format!("{}: {}", c.name, c.detail))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Regime(failed.join("; ")))
    }
}

// ---------------------------------------------------------------------------

/// Exponent of widths of the unweighted Sobolev class on a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeExponent {
    pub value: f64,
    pub branch: Branch,
    pub degenerate: bool,
}

pub fn cube_exponent(p: f64, q: f64, r: u32, d: u32, kind: WidthKind) -> Result<CubeExponent> {
    if q.is_infinite() {
        return Err(Error::Domain("q = inf is excluded; need q < inf".into()));
    }
    if !(p > 1.0 && q >= 1.0) {
        return Err(Error::Domain(format!("need 1 < p <= inf and 1 <= q < inf (p={p}, q={q})")));
    }
    if r == 0 || d == 0 {
        return Err(Error::Domain("r and d must be positive".into()));
    }
    let df = d as f64;
    let delta = r as f64 + df * recip(q) - df * recip(p);
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    let q_hat = kind.q_hat(p, q);
    if !high_branch(p, q, q_hat) {
        return Ok(CubeExponent {
            value: delta / df - gap_plus(p, q),
            branch: Branch::Low,
            degenerate: false,
        });
    }
    let a = delta / df + high_gain(p, q, q_hat);
    let b = q_hat * delta / (2.0 * df);
    Ok(CubeExponent {
        value: a.min(b),
        branch: Branch::High,
        degenerate: (a - b).abs() <= TIE_TOLERANCE,
    })
}

// ---------------------------------------------------------------------------

fn sobolev_conditions(params: &RegimeParams) -> Vec<Condition> {
    let RegimeParams {
        p, q, theta, beta_v, ..
    } = *params;
    let d = params.d as f64;
    let delta = params.delta();
    let mut c = check_pq(p, q);
    c.push(cond("r_positive", params.r >= 1, format!("r = {}", params.r)));
    c.push(cond("d_positive", params.d >= 1, format!("d = {}", params.d)));
    c.push(cond(
        "theta_range",
        theta >= 0.0 && theta < d,
        format!("0 <= theta < d (theta = {theta}, d = {d})"),
    ));
    c.push(cond("delta_positive", delta > 0.0, format!("delta = r + d/q - d/p = {delta}")));
    let integrable = -beta_v * q + d - theta;
    c.push(cond("weight_integrable", integrable > 0.0, format!("-beta_v q + d - theta = {integrable}")));
    c
}

fn boundary_conditions(theta: f64, alpha: f64, gamma: f64, gap: f64) -> Vec<Condition> {
    let mut c = vec![cond(
        "alpha_condition",
        alpha > (1.0 - gamma) * gap,
        format!("alpha = {alpha} > (1 - gamma)(1/q - 1/p)_+ = {}", (1.0 - gamma) * gap),
    )];
    if theta == 0.0 {
        c.push(cond("gamma_negative", gamma < 0.0, format!("gamma = {gamma} < 0 when theta = 0")));
    }
    c
}

/// Exponents for the weighted Sobolev embedding.
pub fn sobolev_exponent(params: &RegimeParams) -> Result<ExponentReport> {
    let mut conditions = sobolev_conditions(params);
    fail_on(&conditions)?;
    let RegimeParams { p, q, theta, .. } = *params;
    let d = params.d as f64;
    let delta = params.delta();
    let beta = params.beta();
    let gap = gap_plus(p, q);
    let threshold = params.threshold();
    let case_b = (beta - threshold).abs() <= TIE_TOLERANCE;
    let case_a = !case_b && beta < threshold;
    conditions.push(cond(
        "case_a",
        case_a,
        format!("beta = {beta} < delta - theta(1/q - 1/p)_+ = {threshold}"),
    ));
    conditions.push(cond(
        "case_b",
        case_b,
        format!("beta = {beta} = delta - theta(1/q - 1/p)_+ = {threshold}"),
    ));
    if !case_a && !case_b {
        return Err(Error::Regime(format!(
            "beta = {beta} exceeds delta - theta(1/q - 1/p)_+ = {threshold}"
        )));
    }
    let alpha = params.alpha();
    let gamma = params.gamma;
    if case_b {
        let extra = boundary_conditions(theta, alpha, gamma, gap);
        fail_on(&extra)?;
        conditions.extend(extra);
    }
    let q_hat = params.q_hat();
    let branch = if high_branch(p, q, q_hat) {
        Branch::High
    } else {
        Branch::Low
    };
    let gain = high_gain(p, q, q_hat);
    let psi_lambda = params.lambda.clone().at_infinity();
    let psi_sigma = |power: f64| SigmaDescriptor::PsiInverse {
        theta,
        psi_lambda: psi_lambda.clone(),
        psi: params.psi(),
        power,
        argument_power: 1.0,
    };
    let rho_sigma = || SigmaDescriptor::RhoInverse {
        one_minus_gamma: 1.0 - gamma,
        tau_inv: params.tau.clone().reciprocal(),
        rho: params.rho(),
        alpha,
        argument_power: 1.0,
    };
    let base = delta / d;
    let mut report = ExponentReport {
        case: 0,
        branch,
        q_hat,
        thetas: Vec::new(),
        sigmas: Vec::new(),
        selection: Selection::Degenerate,
        log_rate: None,
        conditions,
        warnings: Vec::new(),
    };
    match (theta > 0.0, case_a, branch) {
        (true, true, Branch::Low) => {
            report.case = 1;
            report.thetas = exps(&[(1, base - gap), (2, (delta - beta) / theta - gap)]);
            report.sigmas = sigmas(vec![(1, SigmaDescriptor::One), (2, psi_sigma(beta - delta))]);
        }
        (true, true, Branch::High) => {
            report.case = 1;
            let s3 = psi_sigma(beta - delta);
            report.thetas = exps(&[
                (1, base + gain),
                (2, q_hat * delta / (2.0 * d)),
                (3, (delta - beta) / theta + gain),
                (4, q_hat * (delta - beta) / (2.0 * theta)),
            ]);
            report.sigmas = sigmas(vec![
                (1, SigmaDescriptor::One),
                (2, SigmaDescriptor::One),
                (4, s3.with_argument_power(q_hat / 2.0)),
                (3, s3),
            ]);
        }
        (true, false, _) => {
            report.case = 2;
            report.log_rate = Some(LogRate {
                power: -alpha + (1.0 - gamma) * gap,
                rho: params.rho(),
                tau: params.tau.clone(),
                tau_power: -gap,
            });
        }
        (false, false, Branch::Low) => {
            report.case = 3;
            report.thetas = exps(&[(1, base - gap), (2, alpha / (1.0 - gamma) - gap)]);
            report.sigmas = sigmas(vec![(1, SigmaDescriptor::One), (2, rho_sigma())]);
        }
        (false, false, Branch::High) => {
            report.case = 3;
            let s3 = rho_sigma();
            report.thetas = exps(&[
                (1, base + gain),
                (2, q_hat * delta / (2.0 * d)),
                (3, alpha / (1.0 - gamma) + gain),
                (4, q_hat * alpha / (2.0 * (1.0 - gamma))),
            ]);
            report.sigmas = sigmas(vec![
                (1, SigmaDescriptor::One),
                (2, SigmaDescriptor::One),
                (4, s3.with_argument_power(q_hat / 2.0)),
                (3, s3),
            ]);
        }
        (false, true, Branch::Low) => {
            report.case = 4;
            report.thetas = exps(&[(1, base - gap)]);
            report.sigmas = sigmas(vec![(1, SigmaDescriptor::One)]);
        }
        (false, true, Branch::High) => {
            report.case = 4;
            report.thetas = exps(&[(1, base + gain), (2, q_hat * delta / (2.0 * d))]);
            report.sigmas = sigmas(vec![(1, SigmaDescriptor::One), (2, SigmaDescriptor::One)]);
        }
    }
    report.sigmas.sort_by_key(|s| s.index);
    finish(&mut report);
    Ok(report)
}

fn finish(report: &mut ExponentReport) {
    report.selection = if report.log_rate.is_some() {
        Selection::Logarithmic
    } else {
        select(&report.thetas)
    };
    if let Some(e) = report.selected_exponent() {
        if e <= 0.0 {
            report.warnings.push(format!(
                "selected exponent {e} is not positive: the bound does not decay"
            ));
        }
    }
}

/// Exponents for the weighted Sobolev class on a metric tree: `d = r = 1`,
/// and in the high branch only the exponents 1, 3 and 4 compete.
pub fn metric_exponent(params: &RegimeParams) -> Result<ExponentReport> {
    let mut local = params.clone();
    local.r = 1;
    local.d = 1;
    let mut report = sobolev_exponent(&local)?;
    if report.branch == Branch::High && matches!(report.case, 1 | 3) {
        report.thetas.retain(|t| t.index != 2);
        report.sigmas.retain(|s| s.index != 2);
        report.warnings.clear();
        finish(&mut report);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------

/// Parameters of a summation operator on an h-regular tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub p: f64,
    pub q: f64,
    pub kappa: f64,
    pub theta: f64,
    pub kind: WidthKind,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub alpha: f64,
    /// `Λ` as a function of small `t`.
    #[serde(default)]
    pub lambda: SlowFactor,
    /// `Ψ = Ψ_g Ψ_v` as a function of small `t`.
    #[serde(default)]
    pub psi: SlowFactor,
    #[serde(default)]
    pub tau: SlowFactor,
    /// `ρ = ρ_g ρ_v`.
    #[serde(default)]
    pub rho: SlowFactor,
}

impl TreeParams {
    pub fn basic(p: f64, q: f64, kappa: f64, theta: f64, kind: WidthKind) -> Self {
        TreeParams {
            p,
            q,
            kappa,
            theta,
            kind,
            gamma: 0.0,
            alpha: 0.0,
            lambda: SlowFactor::one(),
            psi: SlowFactor::one(),
            tau: SlowFactor::one(),
            rho: SlowFactor::one(),
        }
    }
}

/// Exponents for `S_{u,w}` on an h-regular tree.
pub fn tree_exponent(params: &TreeParams) -> Result<ExponentReport> {
    let TreeParams {
        p,
        q,
        kappa,
        theta,
        kind,
        gamma,
        alpha,
        ..
    } = *params;
    let mut conditions = check_pq(p, q);
    conditions.push(cond("theta_range", theta >= 0.0, format!("theta = {theta} >= 0")));
    fail_on(&conditions)?;
    let gap = gap_plus(p, q);
    let threshold = -theta * gap;
    let strict = kappa > threshold + TIE_TOLERANCE;
    let critical = (kappa - threshold).abs() <= TIE_TOLERANCE;
    conditions.push(cond(
        "kappa_admissible",
        strict || critical,
        format!("kappa = {kappa} >= -theta(1/q - 1/p)_+ = {threshold}"),
    ));
    fail_on(&conditions)?;
    let q_hat = kind.q_hat(p, q);
    let branch = if high_branch(p, q, q_hat) {
        Branch::High
    } else {
        Branch::Low
    };
    let gain = high_gain(p, q, q_hat);
    let mut report = ExponentReport {
        case: 0,
        branch,
        q_hat,
        thetas: Vec::new(),
        sigmas: Vec::new(),
        selection: Selection::Degenerate,
        log_rate: None,
        conditions,
        warnings: Vec::new(),
    };
    if theta > 0.0 {
        if critical {
            let extra = boundary_conditions(theta, alpha, gamma, gap);
            fail_on(&extra)?;
            report.conditions.extend(extra);
            report.case = 2;
            report.log_rate = Some(LogRate {
                power: -alpha + (1.0 - gamma) * gap,
                rho: params.rho.clone(),
                tau: params.tau.clone(),
                tau_power: -gap,
            });
        } else {
            report.case = 1;
            let s1 = SigmaDescriptor::PsiInverse {
                theta,
                psi_lambda: params.lambda.clone().at_infinity(),
                psi: params.psi.clone(),
                power: -kappa,
                argument_power: 1.0,
            };
            match branch {
                Branch::Low => {
                    report.thetas = exps(&[(1, kappa / theta - gap)]);
                    report.sigmas = sigmas(vec![(1, s1)]);
                }
                Branch::High => {
                    report.thetas = exps(&[(1, kappa / theta + gain), (2, q_hat * kappa / (2.0 * theta))]);
                    let s2 = s1.with_argument_power(q_hat / 2.0);
                    report.sigmas = sigmas(vec![(1, s1), (2, s2)]);
                }
            }
        }
    } else if kappa > TIE_TOLERANCE {
        report.case = 4;
        report.selection = Selection::Geometric;
        report
            .warnings
            .push("theta = 0 and kappa > 0: widths are bounded by a geometric progression".into());
        return Ok(report);
    } else {
        let extra = boundary_conditions(theta, alpha, gamma, gap);
        fail_on(&extra)?;
        report.conditions.extend(extra);
        report.case = 3;
        let s1 = SigmaDescriptor::RhoInverse {
            one_minus_gamma: 1.0 - gamma,
            tau_inv: params.tau.clone().reciprocal(),
            rho: params.rho.clone(),
            alpha,
            argument_power: 1.0,
        };
        match branch {
            Branch::Low => {
                report.thetas = exps(&[(1, alpha / (1.0 - gamma) - gap)]);
                report.sigmas = sigmas(vec![(1, s1)]);
            }
            Branch::High => {
                report.thetas = exps(&[
                    (1, alpha / (1.0 - gamma) + gain),
                    (2, q_hat * alpha / (2.0 * (1.0 - gamma))),
                ]);
                let s2 = s1.with_argument_power(q_hat / 2.0);
                report.sigmas = sigmas(vec![(1, s1), (2, s2)]);
            }
        }
    }
    finish(&mut report);
    Ok(report)
}

/// `q̂` used by a report for kind `kind` at `(p, q)`; exposed so dual
/// reports can be compared.
pub fn q_hat_of(kind: WidthKind, p: f64, q: f64) -> f64 {
    kind.q_hat(p, q)
}

/// Conjugate pair `(q', p')` used when comparing Gelfand and Kolmogorov
/// reports.
pub fn dual_pair(p: f64, q: f64) -> (f64, f64) {
    (conjugate(q), conjugate(p))
}
