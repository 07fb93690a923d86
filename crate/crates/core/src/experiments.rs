//! Width sweeps over a dyadic grid and log-log decay fits.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balls::WidthKind;
use crate::error::{Error, Result};
use crate::exponents::{tree_exponent, ExponentReport, TreeParams};
use crate::hardy::{
    discrete_upper_scheme, linear_widths_l2, lower_bound_disjoint, WeightLaw, WeightedTreeOperator,
    DENSE_LIMIT,
};
use crate::metric::{discretize_to_summation, parse_metric_tree, Tiling};
use crate::slow::SlowFactor;
use crate::tree::{generate_h_tree, HTreeSpec};

pub const DEFAULT_TOLERANCE: f64 = 0.15;
pub const DEFAULT_WINDOW: f64 = 0.5;

/// `1, 2, 4, ..., 256`.
pub fn default_grid() -> Vec<usize> {
    (0..=8).map(|k| 1usize << k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InstanceSpec {
    HTree(HTreeSpec),
    /// A metric tree file, discretised one tile per vertex.
    MetricTree { path: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    /// Singular values of the assembled matrix; needs `p = q = 2`.
    #[default]
    Exact,
    /// Bounds only, no matrix assembly.
    OrderOnly,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub report: Option<PathBuf>,
}

fn default_window() -> f64 {
    DEFAULT_WINDOW
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    /// Level weights for h-tree instances.
    #[serde(default)]
    pub weights: Option<WeightLaw>,
    pub p: f64,
    pub q: f64,
    pub kind: WidthKind,
    #[serde(default = "default_grid")]
    pub grid: Vec<usize>,
    /// Fraction of the grid, centred, used by the fit.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Overrides the h-tree seed when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode: SweepMode,
    /// Exponent regime for the `predicted` column; derived from the h-tree
    /// and weight law when absent.
    #[serde(default)]
    pub predicted: Option<TreeParams>,
    #[serde(default)]
    pub outputs: OutputPaths,
}

impl ExperimentConfig {
    pub fn h_tree(spec: HTreeSpec, weights: WeightLaw, p: f64, q: f64, kind: WidthKind) -> Self {
        ExperimentConfig {
            instance: InstanceSpec::HTree(spec),
            weights: Some(weights),
            p,
            q,
            kind,
            grid: default_grid(),
            window: DEFAULT_WINDOW,
            tolerance: DEFAULT_TOLERANCE,
            seed: None,
            mode: SweepMode::Exact,
            predicted: None,
            outputs: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Input("n-grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("n-grid must be strictly increasing".into()));
        }
        if self.grid[0] == 0 {
            return Err(Error::Input("n-grid entries must be positive".into()));
        }
        if !(self.window > 0.0 && self.window <= 1.0) {
            return Err(Error::Input(format!("fit window {} is not in (0, 1]", self.window)));
        }
        if !(self.p >= 1.0 && self.q >= 1.0) {
            return Err(Error::Input(format!("need p, q >= 1 (p={}, q={})", self.p, self.q)));
        }
        if self.mode == SweepMode::Exact && !(self.p == 2.0 && self.q == 2.0) {
            return Err(Error::Input(format!(
                "exact widths need p = q = 2 (got p={}, q={}); select order_only mode",
                self.p, self.q
            )));
        }
        match &self.instance {
            InstanceSpec::HTree(spec) => {
                spec.validate()?;
                if self.weights.is_none() {
                    return Err(Error::Input("an h-tree instance needs a weight law".into()));
                }
            }
            InstanceSpec::MetricTree { .. } => {}
        }
        Ok(())
    }

    pub fn build_operator(&self) -> Result<WeightedTreeOperator> {
        match &self.instance {
            InstanceSpec::HTree(spec) => {
                let mut spec = spec.clone();
                if let Some(seed) = self.seed {
                    spec.seed = seed;
                }
                let tree = generate_h_tree(&spec)?;
                let law = self
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::Input("an h-tree instance needs a weight law".into()))?;
                WeightedTreeOperator::from_law(tree, law)
            }
            InstanceSpec::MetricTree { path } => {
                let text = std::fs::read_to_string(path)?;
                let mtree = parse_metric_tree(&text)?;
                let tiling = Tiling::by_level(&mtree)?;
                Ok(discretize_to_summation(&mtree, &tiling, self.p, self.q, None)?.0)
            }
        }
    }

    /// Regime used for the `predicted` column, if one is known.
    pub fn tree_params(&self) -> Option<TreeParams> {
        if let Some(t) = &self.predicted {
            return Some(t.clone());
        }
        let (InstanceSpec::HTree(spec), Some(law)) = (&self.instance, &self.weights) else {
            return None;
        };
        let mut t = TreeParams::basic(self.p, self.q, law.kappa(), spec.theta, self.kind);
        t.lambda = spec.lambda.clone();
        t.psi = SlowFactor::product(vec![law.psi_g.clone(), law.psi_v.clone()]);
        Some(t)
    }

    pub fn prediction(&self) -> Result<Option<ExponentReport>> {
        self.tree_params().map(|t| tree_exponent(&t)).transpose()
    }
}

/// One CSV row. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub width: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub kind: WidthKind,
    pub predicted: Option<f64>,
}

/// Widths, bounds and the predicted rate at every grid point.
pub fn run_width_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let op = config.build_operator()?;
    let widths = match config.mode {
        SweepMode::Exact => {
            if op.len() > DENSE_LIMIT {
                return Err(Error::Capacity(format!(
                    "{} vertices exceed the dense limit {DENSE_LIMIT}; use order_only mode",
                    op.len()
                )));
            }
            Some(linear_widths_l2(&op.assemble_matrix()?)?)
        }
        SweepMode::OrderOnly => None,
    };
    let prediction = config.prediction()?;
    let (p, q, kind) = (config.p, config.q, config.kind);
    config
        .grid
        .par_iter()
        .map(|&n| {
            let width = widths.as_ref().map(|s| s.get(n).copied().unwrap_or(0.0));
            let lower = lower_bound_disjoint(&op, p, q, kind, n)?;
            let upper = discrete_upper_scheme(&op, p, q, n)?.error.value();
            let predicted = prediction.as_ref().and_then(|r| r.rate(n as f64).ok());
            Ok(SweepRow {
                n,
                width,
                lower_bound: lower.feasible.then_some(lower.value),
                upper_bound: upper,
                kind,
                predicted,
            })
        })
        .collect()
}

pub fn write_rows(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["n", "width", "lower_bound", "upper_bound", "kind", "predicted"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

pub fn read_rows(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub predicted_exponent: f64,
    /// Whether widths were divided by a non-trivial `σ(n)` before fitting.
    pub sigma_corrected: bool,
    pub tolerance: f64,
    pub pass: bool,
    /// Grid points used.
    pub ns: Vec<usize>,
}

/// Rows kept by a centred window covering `window` of the grid.
pub fn window_rows(rows: &[SweepRow], window: f64) -> &[SweepRow] {
    let drop = ((rows.len() as f64) * (1.0 - window) / 2.0).floor() as usize;
    if 2 * drop >= rows.len() {
        return &[];
    }
    &rows[drop..rows.len() - drop]
}

/// Least-squares fit of `log2(width / σ(n))` against `log2 n`.
pub fn fit_decay(
    rows: &[SweepRow],
    window: f64,
    predicted: &ExponentReport,
    tolerance: f64,
) -> Result<FitResult> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Fit(format!("fit window {window} is not in (0, 1]")));
    }
    let exponent = predicted
        .selected_exponent()
        .ok_or_else(|| Error::Fit("the prediction has no single power-law exponent".into()))?;
    let sigma = predicted.selected_sigma();
    let used = window_rows(rows, window);
    if used.len() < 5 {
        return Err(Error::Fit(format!(
            "{} rows in the fit window, need at least 5",
            used.len()
        )));
    }
    let mut pts = Vec::with_capacity(used.len());
    for row in used {
        let w = row
            .width
            .ok_or_else(|| Error::Fit(format!("row n={} has no width", row.n)))?;
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Fit(format!("row n={} has non-positive width {w}", row.n)));
        }
        let s = match sigma {
            Some(s) => s.eval(row.n as f64)?,
            None => 1.0,
        };
        pts.push(((row.n as f64).log2(), (w / s).log2()));
    }
    let (slope, intercept, r2) = least_squares(&pts)?;
    let sigma_corrected = sigma.is_some_and(|s| !matches!(s, crate::exponents::SigmaDescriptor::One));
    Ok(FitResult {
        slope,
        intercept,
        r2,
        predicted_exponent: exponent,
        sigma_corrected,
        tolerance,
        pass: (slope + exponent).abs() <= tolerance,
        ns: used.iter().map(|r| r.n).collect(),
    })
}

fn least_squares(pts: &[(f64, f64)]) -> Result<(f64, f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all grid points coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}
