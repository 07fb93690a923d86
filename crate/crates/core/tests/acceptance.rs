//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use hwidths_core::balls::{diag_width, DiagonalSpec, WidthKind};
use hwidths_core::experiments::{fit_decay, run_width_sweep, ExperimentConfig};
use hwidths_core::exponents::{sobolev_exponent, RegimeParams, Selection};
use hwidths_core::hardy::{hardy_constant, operator_norm_corner, WeightLaw, WeightedTreeOperator};
use hwidths_core::linalg::singular_values;
use hwidths_core::metric::{discretize_to_summation, volterra_norm_l2, MetricTree, Tiling};
use hwidths_core::partition::{check_partition, check_refinement, partition_constant, partition_tree, VertexCost};
use hwidths_core::slow::{invert_scale, log_closed_form, ImplicitInverse, SlowFactor};
use hwidths_core::tree::{generate_h_tree, path, random_tree, HTreeSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} {}: {name}: {} [{:.2}s of {}s]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn binary_h_tree(depth: usize) -> HTreeSpec {
    HTreeSpec::new(1.0, 1, depth)
}

fn diag_vs_svd() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nu = rng.random_range(1..=64);
        let mut c: Vec<f64> = (0..nu).map(|_| rng.random_range(1e-3..10.0)).collect();
        c.sort_by(|a, b| b.total_cmp(a));
        let spec = DiagonalSpec::new(c.clone(), 2.0, 2.0).unwrap();
        // shuffle the diagonal so the SVD has to sort
        let mut shuffled = c.clone();
        shuffled.rotate_left(rng.random_range(0..nu));
        let s = singular_values(&DMatrix::from_diagonal(&DVector::from_vec(shuffled))).unwrap();
        for n in 0..nu {
            worst = worst.max((diag_width(&spec, n).unwrap() - s[n]).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn prefix_sum_values() -> Outcome {
    let m = DMatrix::from_fn(3, 3, |i, j| if j <= i { 1.0 } else { 0.0 });
    let s = singular_values(&m).unwrap();
    let expected = [2.2470, 0.8019, 0.5550];
    let closed: Vec<f64> = (1..=3)
        .map(|k| 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / 14.0).sin()))
        .collect();
    let dev = s
        .iter()
        .zip(&expected)
        .chain(s.iter().zip(&closed))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(dev <= 1e-3, format!("values {:.4?}, deviation {dev:.1e}", s))
}

fn partition_suite() -> Outcome {
    let mut worst_count = [0.0f64; 5];
    let mut worst_overlap = [0usize; 5];
    let mut violations = 0;
    let mut failures = Vec::new();
    for seed in 0..200u64 {
        let k = 1 + (seed % 4) as usize;
        let size = 2 + (seed as usize * 7919) % 1999;
        let tree = random_tree(size, k, seed).unwrap();
        let cost = if seed % 2 == 0 {
            VertexCost::unit(size)
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            VertexCost::new((0..size).map(|_| rng.random_range(0.0f64..1.0).powi(3) * 100.0 + 0.01).collect())
                .unwrap()
        };
        let c = partition_constant(k);
        for n in [2, 4, 8, 16] {
            let part = partition_tree(&tree, &cost, n, k).unwrap();
            let check = check_partition(&tree, &cost, &part, n, k).unwrap();
            violations += check.weight_violations;
            worst_count[k] = worst_count[k].max(check.count_ratio);
            if check.count_ratio > c {
                failures.push(format!("count seed={seed} n={n}"));
            }
            for m in n..=2 * n {
                let r = check_refinement(&tree, &cost, n, m, k).unwrap();
                worst_overlap[k] = worst_overlap[k].max(r.max_overlap);
                if !r.within_bound {
                    failures.push(format!("overlap seed={seed} n={n} m={m}"));
                }
            }
        }
    }
    let pass = violations == 0 && failures.is_empty();
    outcome(
        pass,
        format!(
            "C(k)=2k+6; count/n by k {:?}; overlap by k {:?}; weight violations {violations}; other failures {}",
            &worst_count[1..],
            &worst_overlap[1..],
            failures.len()
        ),
    )
}

fn hardy_uniformity() -> Outcome {
    let law = WeightLaw::new(0.5, 0.5, 1);
    let c = hardy_constant(&law, 2.0, 2.0, 0, 1.0, None).unwrap();
    let mut ratios = Vec::new();
    for depth in 6..=12 {
        let tree = generate_h_tree(&binary_h_tree(depth)).unwrap();
        let op = WeightedTreeOperator::from_law(tree, &law).unwrap();
        ratios.push(op.norm(2.0, 2.0).unwrap() / c);
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(hi / lo <= 4.0, format!("ratios {:.4?}, band {:.3}", ratios, hi / lo))
}

fn sweep_config(depth: usize) -> ExperimentConfig {
    ExperimentConfig::h_tree(
        binary_h_tree(depth),
        WeightLaw::new(0.5, 0.5, 1),
        2.0,
        2.0,
        WidthKind::Linear,
    )
}

fn decay_fit() -> Outcome {
    let cfg = sweep_config(10);
    let rows = run_width_sweep(&cfg).unwrap();
    let predicted = cfg.prediction().unwrap().unwrap();
    let fit = fit_decay(&rows, cfg.window, &predicted, cfg.tolerance).unwrap();
    outcome(
        (-1.15..=-0.85).contains(&fit.slope),
        format!("slope {:.4} over n={:?}, r2 {:.4}", fit.slope, fit.ns, fit.r2),
    )
}

fn sandwich() -> Outcome {
    let mut lower_violations = 0;
    let mut upper_violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for depth in 6..=10 {
        let rows = run_width_sweep(&sweep_config(depth)).unwrap();
        for r in &rows {
            let w = r.width.unwrap();
            if let Some(lb) = r.lower_bound {
                if lb > w * (1.0 + 1e-12) {
                    lower_violations += 1;
                }
            }
            let ub = r.upper_bound.unwrap();
            if ub < w * (1.0 - 1e-12) {
                upper_violations += 1;
            }
            if w > 1e-14 {
                worst_ratio = worst_ratio.max(ub / w);
            }
        }
    }
    outcome(
        lower_violations == 0 && upper_violations == 0 && worst_ratio <= 32.0,
        format!(
            "lower violations {lower_violations}, upper violations {upper_violations}, max upper/width {worst_ratio:.3}"
        ),
    )
}

/// Independent re-evaluation of the exponent tables. Returns the active
/// exponents in index order, or `None` for the logarithmic case.
fn oracle_exponents(p: f64, q: f64, r: f64, d: f64, theta: f64, beta: f64, alpha: f64, gamma: f64, qh: f64) -> Option<Vec<f64>> {
    let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
    let iq = 1.0 / q;
    let gap = (iq - ip).max(0.0);
    let delta = r + d * iq - d * ip;
    let boundary = (beta - (delta - theta * gap)).abs() <= 1e-12;
    let high = p < q && qh > 2.0;
    let mn = (ip - iq).min(0.5 - 1.0 / qh);
    if theta > 0.0 && boundary {
        return None;
    }
    Some(match (theta > 0.0, boundary, high) {
        (true, false, false) => vec![delta / d - gap, (delta - beta) / theta - gap],
        (true, false, true) => vec![
            delta / d + mn,
            qh * delta / (2.0 * d),
            (delta - beta) / theta + mn,
            qh * (delta - beta) / (2.0 * theta),
        ],
        (false, true, false) => vec![delta / d - gap, alpha / (1.0 - gamma) - gap],
        (false, true, true) => vec![
            delta / d + mn,
            qh * delta / (2.0 * d),
            alpha / (1.0 - gamma) + mn,
            qh * alpha / (2.0 * (1.0 - gamma)),
        ],
        (false, false, false) => vec![delta / d - gap],
        (false, false, true) => vec![delta / d + mn, qh * delta / (2.0 * d)],
        (true, true, _) => unreachable!(),
    })
}

fn brute_argmin(values: &[f64]) -> Option<usize> {
    let best = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hits: Vec<usize> = (0..values.len()).filter(|&i| (values[i] - best).abs() <= 1e-12).collect();
    (hits.len() == 1).then(|| hits[0] + 1)
}

fn exponent_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let kinds = WidthKind::ALL;
    let mut checked = 0;
    let mut mismatches = 0;
    let mut ties = 0;
    let mut attempts = 0;
    while checked < 1000 {
        attempts += 1;
        let p = if rng.random_bool(0.1) { f64::INFINITY } else { rng.random_range(1.1..8.0) };
        let q = rng.random_range(1.0..8.0);
        let d = rng.random_range(1..=4u32);
        let r = rng.random_range(1..=4u32);
        let kind = kinds[rng.random_range(0..3)];
        let theta = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.05..d as f64 - 0.05) };
        let df = d as f64;
        let ip = if p.is_infinite() { 0.0 } else { 1.0 / p };
        let delta = r as f64 + df / q - df * ip;
        let gap = (1.0 / q - ip).max(0.0);
        let threshold = delta - theta * gap;
        let mut params = RegimeParams::basic(p, q, r, d, theta, 0.0, 0.0, kind);
        let qh = params.q_hat();
        let boundary = rng.random_bool(0.25);
        let force_tie = rng.random_bool(0.1);
        if boundary {
            params.beta_g = threshold;
            params.gamma = if theta == 0.0 { -rng.random_range(0.1..2.0) } else { rng.random_range(-1.0..0.9) };
            params.alpha_g = (1.0 - params.gamma) * gap + rng.random_range(0.05..2.0);
            if force_tie && theta == 0.0 {
                // α/(1-γ) chosen to equal δ/d
                params.alpha_g = (1.0 - params.gamma) * delta / df;
            }
        } else {
            params.beta_g = threshold - rng.random_range(0.01..threshold.max(0.02) + 2.0);
            if force_tie && theta > 0.0 {
                // (δ - β)/θ = δ/d
                params.beta_g = delta - theta * delta / df;
            }
        }
        if !(threshold > 0.0 || boundary) {
            continue;
        }
        let report = match sobolev_exponent(&params) {
            Ok(rep) => rep,
            Err(_) => continue,
        };
        let oracle = oracle_exponents(p, q, r as f64, df, theta, params.beta(), params.alpha(), params.gamma, qh);
        let expected = match &oracle {
            None => Selection::Logarithmic,
            Some(values) => match brute_argmin(values) {
                Some(j) => Selection::Index(j),
                None => Selection::Degenerate,
            },
        };
        if expected == Selection::Degenerate {
            ties += 1;
        }
        let values_match = oracle.as_ref().is_none_or(|v| {
            v.len() == report.thetas.len()
                && v.iter().enumerate().all(|(i, x)| (report.theta(i + 1).unwrap() - x).abs() <= 1e-12)
        });
        if report.selection != expected || !values_match {
            mismatches += 1;
        }
        checked += 1;
    }
    outcome(
        mismatches == 0,
        format!("{checked} reports ({attempts} draws), {ties} degenerate ties, {mismatches} mismatches"),
    )
}

fn random_psi(rng: &mut ChaCha8Rng) -> SlowFactor {
    match rng.random_range(0..4) {
        0 => SlowFactor::log_power(rng.random_range(-2.0..2.0)),
        1 => SlowFactor::ln_power(rng.random_range(-2.0..2.0)),
        2 => SlowFactor::product(vec![
            SlowFactor::constant(rng.random_range(0.1..10.0)),
            SlowFactor::log_power(rng.random_range(-1.0..1.0)),
        ]),
        _ => SlowFactor::product(vec![
            SlowFactor::log_power(rng.random_range(-1.0..1.0)),
            SlowFactor::log_power(rng.random_range(-1.0..1.0)).pow(0.5),
        ]),
    }
}

fn inversion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let gamma = rng.random_range(0.25..3.0);
        let inv = ImplicitInverse::new(gamma, random_psi(&mut rng)).unwrap();
        let x = 10f64.powf(rng.random_range(3.0..12.0)).max(inv.x_threshold);
        let (y, _) = invert_scale(&inv, x).unwrap();
        worst = worst.max(((inv.forward(y) - x) / x).abs());
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &alpha in &[-1.0, 1.0, 2.0] {
        for &gamma in &[1.0, 1.5, 2.0] {
            let inv = ImplicitInverse::new(gamma, SlowFactor::log_power(alpha)).unwrap();
            for i in 0..=90 {
                let x = 10f64.powf(3.0 + i as f64 * 0.1);
                let (_, phi) = invert_scale(&inv, x).unwrap();
                let ratio = phi / log_closed_form(x, gamma, alpha, &SlowFactor::one());
                lo = lo.min(ratio);
                hi = hi.max(ratio);
            }
        }
    }
    outcome(
        worst <= 1e-9 && lo >= 0.25 && hi <= 4.0,
        format!("round trip {worst:.2e}; log-form ratio in [{lo:.3}, {hi:.3}]"),
    )
}

fn volterra() -> Outcome {
    let unit = MetricTree::uniform(path(2), vec![0.0, 1.0]).unwrap();
    let target = 2.0 / PI;
    let values: Vec<f64> = [16, 32, 64, 128, 256]
        .iter()
        .map(|&r| volterra_norm_l2(&unit, r).unwrap())
        .collect();
    let errors: Vec<f64> = values.iter().map(|v| (v - target).abs() / target).collect();
    let converging = errors.windows(2).all(|w| w[1] <= w[0]);
    let final_ok = *errors.last().unwrap() <= 0.01;

    let mut worst: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for depth in 1..=10 {
        let mut lengths = vec![0.0];
        lengths.extend((0..depth).map(|_| rng.random_range(0.25..2.0)));
        let mt = MetricTree::uniform(path(depth + 1), lengths).unwrap();
        let cont = volterra_norm_l2(&mt, 64).unwrap();
        let tiling = Tiling::by_level(&mt).unwrap();
        let (op, _) = discretize_to_summation(&mt, &tiling, 2.0, 2.0, None).unwrap();
        let disc = operator_norm_corner(&op.assemble_matrix().unwrap(), 2.0, 2.0).unwrap();
        let factor = (cont / disc).max(disc / cont);
        worst = worst.max(factor);
    }
    outcome(
        converging && final_ok && worst <= 4.0,
        format!(
            "unit edge {:.6} vs {target:.6} (rel. error {:.1e}); path consistency factor {worst:.3}",
            values.last().unwrap(),
            errors.last().unwrap()
        ),
    )
}

fn main() {
    let results = [
        run(1, "diagonal widths vs SVD", Duration::from_secs(5), diag_vs_svd),
        run(2, "prefix-sum singular values", Duration::from_secs(1), prefix_sum_values),
        run(3, "tree partition suite", Duration::from_secs(30), partition_suite),
        run(4, "Hardy bound uniformity", Duration::from_secs(120), hardy_uniformity),
        run(5, "decay exponent reproduction", Duration::from_secs(180), decay_fit),
        run(6, "sandwich bounds", Duration::from_secs(180), sandwich),
        run(7, "exponent calculator oracle", Duration::from_secs(5), exponent_oracle),
        run(8, "implicit inversion", Duration::from_secs(10), inversion),
        run(9, "Volterra corner and discretisation", Duration::from_secs(60), volterra),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
