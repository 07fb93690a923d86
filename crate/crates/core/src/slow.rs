//! Slowly varying scale factors and the implicit inverse of `y^γ ψ(y)`.
//!
//! All logarithms are base 2. A factor written with natural logs, such as
//! `ln y`, is expressed as `ln 2 · log2 y`; see [`SlowFactor::ln_power`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A positive function on `(0, ∞)` that is expected to vary slowly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowFactor {
    Constant {
        #[serde(default = "one")]
        value: f64,
    },
    /// `max(|log2 y|, 1)^exponent`. The clamp keeps the value positive and
    /// finite near `y = 1`; it does not affect asymptotics.
    PowerOfLog { exponent: f64 },
    Product { factors: Vec<SlowFactor> },
    /// `base(y)^exponent`.
    Pow { base: Box<SlowFactor>, exponent: f64 },
    /// `inner(1/y)`.
    Reflect { inner: Box<SlowFactor> },
    /// Sampled `(y, value)` pairs sorted by `y`; log-log interpolation
    /// between samples, constant outside.
    UserTable { points: Vec<[f64; 2]> },
}

fn one() -> f64 {
    1.0
}

impl Default for SlowFactor {
    fn default() -> Self {
        SlowFactor::one()
    }
}

impl SlowFactor {
    pub fn one() -> Self {
        SlowFactor::Constant { value: 1.0 }
    }

    pub fn constant(value: f64) -> Self {
        SlowFactor::Constant { value }
    }

    pub fn log_power(exponent: f64) -> Self {
        SlowFactor::PowerOfLog { exponent }
    }

    /// `(ln y)^exponent` for `y ≥ 2`, i.e. `(ln 2)^e · log2(y)^e`.
    pub fn ln_power(exponent: f64) -> Self {
        SlowFactor::Product {
            factors: vec![
                SlowFactor::constant(std::f64::consts::LN_2.powf(exponent)),
                SlowFactor::log_power(exponent),
            ],
        }
    }

    pub fn product(factors: Vec<SlowFactor>) -> Self {
        SlowFactor::Product { factors }
    }

    pub fn pow(self, exponent: f64) -> Self {
        SlowFactor::Pow {
            base: Box::new(self),
            exponent,
        }
    }

    pub fn reciprocal(self) -> Self {
        self.pow(-1.0)
    }

    /// `y ↦ self(1/y)`.
    pub fn reflect(self) -> Self {
        SlowFactor::Reflect {
            inner: Box::new(self),
        }
    }

    /// `y ↦ 1 / self(1/y)`, the map taking a factor of `t → 0` to one of
    /// `y → ∞`.
    pub fn at_infinity(self) -> Self {
        self.reflect().reciprocal()
    }

    pub fn is_trivial(&self) -> bool {
        match self {
            SlowFactor::Constant { value } => *value == 1.0,
            SlowFactor::Product { factors } => factors.iter().all(SlowFactor::is_trivial),
            SlowFactor::Pow { base, exponent } => *exponent == 0.0 || base.is_trivial(),
            SlowFactor::Reflect { inner } => inner.is_trivial(),
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SlowFactor::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::Input(format!("constant factor must be positive, got {value}")));
                }
            }
            SlowFactor::PowerOfLog { exponent } => {
                if !exponent.is_finite() {
                    return Err(Error::Input("log exponent must be finite".into()));
                }
            }
            SlowFactor::Product { factors } => {
                for f in factors {
                    f.validate()?;
                }
            }
            SlowFactor::Pow { base, exponent } => {
                if !exponent.is_finite() {
                    return Err(Error::Input("power exponent must be finite".into()));
                }
                base.validate()?;
            }
            SlowFactor::Reflect { inner } => inner.validate()?,
            SlowFactor::UserTable { points } => {
                if points.is_empty() {
                    return Err(Error::Input("user table needs at least one point".into()));
                }
                for w in points.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::Input("user table abscissae must increase".into()));
                    }
                }
                for p in points {
                    if !(p[0] > 0.0 && p[1] > 0.0 && p[0].is_finite() && p[1].is_finite()) {
                        return Err(Error::Input(format!("user table point {p:?} must be positive")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates at `y > 0`.
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            SlowFactor::Constant { value } => *value,
            SlowFactor::PowerOfLog { exponent } => y.log2().abs().max(1.0).powf(*exponent),
            SlowFactor::Product { factors } => factors.iter().map(|f| f.eval(y)).product(),
            SlowFactor::Pow { base, exponent } => base.eval(y).powf(*exponent),
            SlowFactor::Reflect { inner } => inner.eval(1.0 / y),
            SlowFactor::UserTable { points } => table_eval(points, y),
        }
    }

    /// `y ψ'(y) / ψ(y)` by a central difference in `ln y`.
    pub fn derivative_ratio(&self, y: f64) -> f64 {
        let h: f64 = 1e-4;
        let up = self.eval(y * h.exp()).ln();
        let down = self.eval(y * (-h).exp()).ln();
        (up - down) / (2.0 * h)
    }
}

fn table_eval(points: &[[f64; 2]], y: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if y <= first[0] {
        return first[1];
    }
    if y >= last[0] {
        return last[1];
    }
    let i = points.partition_point(|p| p[0] <= y);
    let (a, b) = (points[i - 1], points[i]);
    let s = (y.ln() - a[0].ln()) / (b[0].ln() - a[0].ln());
    (a[1].ln() + s * (b[1].ln() - a[1].ln())).exp()
}

/// `h(t) = t^θ Λ(t)` for `0 < t ≤ 1`.
pub fn eval_h(theta: f64, lambda: &SlowFactor, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("h is evaluated on (0, 1], got t = {t}")));
    }
    Ok(t.powf(theta) * lambda.eval(t))
}

// ---------------------------------------------------------------------------

/// Per-base summary of a slow-variation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowVariationSample {
    pub base: f64,
    /// `+1` samples `y·2^k`, `-1` samples `y·2^{-k}`.
    pub direction: i8,
    /// Smallest `C` with `2^{-kε}/C ≤ f(2^{±k} y)/f(y) ≤ C 2^{kε}` for all k.
    pub constant: f64,
    /// Largest per-doubling log2 increment over the upper half of `k`.
    pub tail_exponent: f64,
    /// Same quantity over the third quarter, used to check the trend.
    pub mid_exponent: f64,
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowVariationReport {
    pub epsilon: f64,
    pub k_max: u32,
    pub samples: Vec<SlowVariationSample>,
    pub constant: f64,
    pub violation: bool,
}

pub const DEFAULT_SLOW_BASES: [f64; 4] = [16.0, 256.0, 1.0 / 16.0, 1.0 / 256.0];

/// Samples `f(2^{±k} y) / f(y)` for `k = 1..=k_max` at the default bases.
pub fn check_slow_variation(f: &SlowFactor, epsilon: f64, k_max: u32) -> SlowVariationReport {
    check_slow_variation_at(f, epsilon, k_max, &DEFAULT_SLOW_BASES, &[1, -1])
}

/// A sample is flagged when `f` is not positive and finite, when the
/// per-doubling exponent on the upper half of `k` exceeds `ε`, or when that
/// exponent fails to shrink between the third and the last quarter (a
/// power law keeps a constant local exponent; slowly varying factors do
/// not).
pub fn check_slow_variation_at(
    f: &SlowFactor,
    epsilon: f64,
    k_max: u32,
    bases: &[f64],
    directions: &[i8],
) -> SlowVariationReport {
    let k_max = k_max.max(4);
    let mut samples = Vec::new();
    for &base in bases {
        for &dir in directions {
            let f0 = f.eval(base);
            let mut bad = !(f0 > 0.0 && f0.is_finite());
            let mut constant: f64 = 1.0;
            let mut logs = vec![f0.log2()];
            for k in 1..=k_max {
                let y = base * (dir as f64 * k as f64).exp2();
                let v = f.eval(y);
                if !(v > 0.0 && v.is_finite()) {
                    bad = true;
                    logs.push(f64::NAN);
                    continue;
                }
                let r = v / f0;
                let slack = (-(k as f64) * epsilon).exp2();
                constant = constant.max(r * slack).max(slack / r);
                logs.push(v.log2());
            }
            let inc = |k: usize| (logs[k] - logs[k - 1]).abs();
            let k_max = k_max as usize;
            let tail = (k_max / 2 + 1..=k_max).map(inc).fold(0.0, f64::max);
            let late = (3 * k_max / 4 + 1..=k_max).map(inc).fold(0.0, f64::max);
            let mid = (k_max / 2 + 1..=3 * k_max / 4).map(inc).fold(0.0, f64::max);
            let shrinking = late <= 0.9 * mid + 1e-9;
            let violation = bad || tail.is_nan() || tail > epsilon || !shrinking;
            samples.push(SlowVariationSample {
                base,
                direction: dir,
                constant,
                tail_exponent: tail,
                mid_exponent: mid,
                violation,
            });
        }
    }
    let constant = samples.iter().map(|s| s.constant).fold(1.0, f64::max);
    let violation = samples.iter().any(|s| s.violation);
    SlowVariationReport {
        epsilon,
        k_max,
        samples,
        constant,
        violation,
    }
}

// ---------------------------------------------------------------------------

/// Solver for `y^γ ψ(y) = x` at large `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplicitInverse {
    pub gamma_star: f64,
    pub psi_star: SlowFactor,
    /// Smallest power of two from which the solution is well defined.
    pub x_threshold: f64,
    pub beta_star: f64,
    /// log2 of the lowest `y` admitted in the bracket.
    pub s_floor: f64,
}

const S_SCAN_MAX: f64 = 1000.0;
const S_STEP: f64 = 0.25;

impl ImplicitInverse {
    pub fn new(gamma_star: f64, psi_star: SlowFactor) -> Result<Self> {
        if !(gamma_star > 0.0 && gamma_star.is_finite()) {
            return Err(Error::Domain(format!("gamma_star must be positive, got {gamma_star}")));
        }
        psi_star.validate()?;
        let mut inv = ImplicitInverse {
            gamma_star,
            psi_star,
            x_threshold: 1.0,
            beta_star: 1.0 / gamma_star,
            s_floor: 0.0,
        };
        // Walk down from the far end while the log-derivative stays positive.
        let mut s = S_SCAN_MAX;
        while s - S_STEP >= 0.0 && inv.log_slope(s - S_STEP) > 0.0 {
            s -= S_STEP;
        }
        if inv.log_slope(s) <= 0.0 {
            return Err(Error::Numeric(
                "y^gamma psi(y) is not increasing at large y; psi is not slowly varying".into(),
            ));
        }
        inv.s_floor = s.ceil();
        let lx = inv.log_f(inv.s_floor) / std::f64::consts::LN_2;
        inv.x_threshold = lx.ceil().exp2().max(1.0);
        Ok(inv)
    }

    /// `ln(y^γ ψ(y))` at `y = 2^s`.
    fn log_f(&self, s: f64) -> f64 {
        self.gamma_star * s * std::f64::consts::LN_2 + self.psi_star.eval(s.exp2()).ln()
    }

    fn log_slope(&self, s: f64) -> f64 {
        let h = 1e-3;
        (self.log_f(s + h) - self.log_f(s - h)) / (2.0 * h)
    }

    /// `F(y) = y^γ ψ(y)`.
    pub fn forward(&self, y: f64) -> f64 {
        y.powf(self.gamma_star) * self.psi_star.eval(y)
    }

    /// Returns `(y, φ)` with `y^γ ψ(y) = x` and `φ = y x^{-β}`.
    pub fn invert(&self, x: f64) -> Result<(f64, f64)> {
        if !(x >= self.x_threshold) || !x.is_finite() {
            return Err(Error::Domain(format!(
                "x = {x} is below the inversion threshold {}",
                self.x_threshold
            )));
        }
        let target = x.ln();
        let mut lo = self.s_floor;
        if self.log_f(lo) > target {
            // Only reachable through rounding at the threshold itself.
            lo = self.s_floor - 1.0;
        }
        let guess = (self.beta_star * x.log2()).max(lo + 1.0);
        let mut hi = guess;
        let mut step = 1.0;
        while self.log_f(hi) < target {
            lo = hi;
            hi += step;
            step *= 2.0;
            if hi > 1e6 {
                return Err(Error::Numeric(format!("could not bracket the solution for x = {x}")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.log_f(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..3 {
            let slope = self.log_slope(s);
            if slope <= 0.0 {
                break;
            }
            let next = s - (self.log_f(s) - target) / slope;
            if next.is_finite() && (lo - 1e-9..=hi + 1e-9).contains(&next) {
                s = next;
            }
        }
        let y = s.exp2();
        Ok((y, y * x.powf(-self.beta_star)))
    }
}

/// `invert_scale` in operation form.
pub fn invert_scale(inv: &ImplicitInverse, x: f64) -> Result<(f64, f64)> {
    inv.invert(x)
}

/// The closed form `(log x)^{-α/γ} ρ(log x)^{-1/γ}` expected for
/// `ψ(y) = |log y|^α ρ(|log y|)`.
pub fn log_closed_form(x: f64, gamma_star: f64, alpha_star: f64, rho_star: &SlowFactor) -> f64 {
    let l = x.log2();
    l.powf(-alpha_star / gamma_star) * rho_star.eval(l).powf(-1.0 / gamma_star)
}
