//! Widths of finite-dimensional balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which n-width is being measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthKind {
    Kolmogorov,
    Gelfand,
    Linear,
}

impl WidthKind {
    pub const ALL: [WidthKind; 3] = [WidthKind::Kolmogorov, WidthKind::Gelfand, WidthKind::Linear];

    /// Effective target exponent: `q`, `p'` or `min(q, p')`.
    pub fn q_hat(self, p: f64, q: f64) -> f64 {
        match self {
            WidthKind::Kolmogorov => q,
            WidthKind::Gelfand => conjugate(p),
            WidthKind::Linear => q.min(conjugate(p)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WidthKind::Kolmogorov => "kolmogorov",
            WidthKind::Gelfand => "gelfand",
            WidthKind::Linear => "linear",
        }
    }
}

impl std::str::FromStr for WidthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kolmogorov" | "k" => Ok(WidthKind::Kolmogorov),
            "gelfand" | "g" => Ok(WidthKind::Gelfand),
            "linear" | "l" => Ok(WidthKind::Linear),
            other => Err(Error::Input(format!("unknown width kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for WidthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hölder conjugate `p/(p-1)`, with `1 ↔ ∞`.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// `1/p`, with `1/∞ = 0`.
pub fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// `(1/q - 1/p)_+`.
pub fn gap_plus(p: f64, q: f64) -> f64 {
    (recip(q) - recip(p)).max(0.0)
}

/// A weighted ball `{x : Σ |x_j / c_j|^p ≤ 1}` measured in `l_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSpec {
    pub c: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

impl DiagonalSpec {
    pub fn new(c: Vec<f64>, p: f64, q: f64) -> Result<Self> {
        let spec = DiagonalSpec { c, p, q };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for r in [self.p, self.q] {
            if !(r >= 1.0) {
                return Err(Error::Input(format!("norm index {r} must lie in [1, inf]")));
            }
        }
        if self.c.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::Input("diagonal entries must be positive and finite".into()));
        }
        if self.c.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Input("diagonal entries must be non-increasing".into()));
        }
        Ok(())
    }

    pub fn nu(&self) -> usize {
        self.c.len()
    }
}

/// Width of a diagonal operator from `l_p^ν` to `l_q^ν` for `p ≥ q`.
pub fn diag_width(spec: &DiagonalSpec, n: usize) -> Result<f64> {
    spec.validate()?;
    let (p, q) = (spec.p, spec.q);
    if p < q {
        return Err(Error::UnsupportedRegime(format!(
            "exact diagonal widths need p >= q (p={p}, q={q}); use order_phi"
        )));
    }
    if n > spec.nu() {
        return Err(Error::Input(format!("n = {n} exceeds dimension {}", spec.nu())));
    }
    if n == spec.nu() {
        return Ok(0.0);
    }
    if p == q {
        return Ok(spec.c[n]);
    }
    let tail = &spec.c[n..];
    if q.is_infinite() {
        unreachable!("p > q = inf is impossible");
    }
    // Exponent pq/(p-q) tends to q as p → ∞.
    let s = if p.is_infinite() { q } else { p * q / (p - q) };
    let outer = recip(q) - recip(p);
    // Scale by the leading entry to keep the power sum in range.
    let top = tail[0];
    let sum: f64 = tail.iter().map(|&c| (c / top).powf(s)).sum();
    Ok(top * sum.powf(outer))
}

fn check_glus(n: usize, nu: usize, p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && p < q && q.is_finite()) {
        return Err(Error::Domain(format!(
            "order functions need 1 < p < q < inf (p={p}, q={q})"
        )));
    }
    if n > nu || nu == 0 {
        return Err(Error::Domain(format!("need 0 <= n <= nu, nu >= 1 (n={n}, nu={nu})")));
    }
    Ok(())
}

/// Order of the Kolmogorov width of `B_p^ν` in `l_q^ν`, `1 < p < q < ∞`,
/// normalised so the implied constant is 1.
pub fn order_phi(n: usize, nu: usize, p: f64, q: f64) -> Result<f64> {
    check_glus(n, nu, p, q)?;
    let (nf, nuf) = (n as f64, nu as f64);
    let gap = 1.0 / q - 1.0 / p;
    // ν^{1/q} n^{-1/2}, infinite at n = 0
    let ratio = if n == 0 {
        f64::INFINITY
    } else {
        nuf.powf(1.0 / q) / nf.sqrt()
    };
    let val = if p >= 2.0 {
        let expo = (1.0 / p - 1.0 / q) / (0.5 - 1.0 / q);
        1f64.min(ratio.powf(expo))
    } else if q > 2.0 {
        let tail = (1.0 - nf / nuf).sqrt();
        nuf.powf(gap).max(1f64.min(ratio) * tail)
    } else {
        let expo = gap / (1.0 - 2.0 / p);
        let base = 1.0 - nf / nuf;
        // base = 0 with a positive exponent gives 0; the max keeps ν^{gap}.
        nuf.powf(gap).max(base.powf(expo))
    };
    Ok(val)
}

/// Order of the Gelfand-type width: `Φ(n,ν,p,q)` if `q ≤ p'`, else the dual
/// `Φ(n,ν,q',p')`.
pub fn order_psi(n: usize, nu: usize, p: f64, q: f64) -> Result<f64> {
    check_glus(n, nu, p, q)?;
    let pc = conjugate(p);
    if q <= pc {
        order_phi(n, nu, p, q)
    } else {
        order_phi(n, nu, conjugate(q), pc)
    }
}

/// Order of `ϑ_n(B_p^ν, l_q^ν)` for `p < q` by width kind.
pub fn order_by_kind(kind: WidthKind, n: usize, nu: usize, p: f64, q: f64) -> Result<f64> {
    match kind {
        WidthKind::Kolmogorov => order_phi(n, nu, p, q),
        WidthKind::Linear => order_psi(n, nu, p, q),
        WidthKind::Gelfand => order_phi(n, nu, conjugate(q), conjugate(p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_hat_table() {
        assert_eq!(WidthKind::Kolmogorov.q_hat(1.5, 4.0), 4.0);
        assert_eq!(WidthKind::Gelfand.q_hat(1.5, 4.0), 3.0);
        assert_eq!(WidthKind::Linear.q_hat(1.5, 4.0), 3.0);
        assert_eq!(WidthKind::Gelfand.q_hat(f64::INFINITY, 2.0), 1.0);
        assert_eq!(WidthKind::Gelfand.q_hat(1.0, 2.0), f64::INFINITY);
    }

    #[test]
    fn pietsch_stesin_equal_entries() {
        let s = DiagonalSpec::new(vec![1.0; 4], 2.0, 1.0).unwrap();
        assert_relative_eq!(diag_width(&s, 2).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn equal_norms_pick_next_entry() {
        let s = DiagonalSpec::new(vec![3.0, 2.0, 1.0], 3.0, 3.0).unwrap();
        assert_eq!(diag_width(&s, 1).unwrap(), 2.0);
        assert_eq!(diag_width(&s, 3).unwrap(), 0.0);
        let s = DiagonalSpec::new(vec![5.0, 4.0, 3.0, 2.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!(diag_width(&s, 2).unwrap(), 3.0);
    }

    #[test]
    fn p_infinite_limit() {
        // exponent pq/(p-q) -> q = 1, outer exponent 1: plain tail sum.
        let s = DiagonalSpec::new(vec![4.0, 2.0, 1.0], f64::INFINITY, 1.0).unwrap();
        assert_relative_eq!(diag_width(&s, 1).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn p_below_q_is_unsupported() {
        let s = DiagonalSpec::new(vec![1.0; 3], 1.0, 2.0).unwrap();
        assert!(matches!(diag_width(&s, 0), Err(Error::UnsupportedRegime(_))));
    }

    #[test]
    fn rejects_increasing_entries() {
        assert!(DiagonalSpec::new(vec![1.0, 2.0], 2.0, 2.0).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_relative_eq!(order_phi(64, 256, 2.0, 4.0).unwrap(), 0.5, epsilon = 1e-14);
        let v = order_phi(8, 16, 1.5, 2.0).unwrap();
        assert_relative_eq!(v, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(16f64.powf(-1.0 / 6.0) < v);
        for (p, q) in [(2.0, 4.0), (1.5, 3.0), (1.2, 1.8)] {
            assert_eq!(order_phi(0, 10, p, q).unwrap(), 1.0);
        }
        assert!(matches!(order_phi(1, 4, 2.0, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn psi_branches() {
        for n in [0, 3, 8, 16] {
            assert_eq!(order_psi(n, 16, 1.5, 2.0).unwrap(), order_phi(n, 16, 1.5, 2.0).unwrap());
        }
        assert_eq!(
            order_psi(64, 256, 2.0, 4.0).unwrap(),
            order_phi(64, 256, 4.0 / 3.0, 2.0).unwrap()
        );
        assert_eq!(
            order_psi(5, 20, 2.0, 2.5).unwrap(),
            order_phi(5, 20, 2.5 / 1.5, 2.0).unwrap()
        );
    }

    #[test]
    fn max_branches_hit_floor_at_full_rank() {
        for (p, q) in [(1.5, 3.0), (1.2, 1.8)] {
            let nu = 32;
            let v = order_phi(nu, nu, p, q).unwrap();
            assert_relative_eq!(v, (nu as f64).powf(1.0 / q - 1.0 / p), epsilon = 1e-14);
        }
    }
}
