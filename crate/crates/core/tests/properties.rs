use hwidths_core::balls::{diag_width, order_phi, DiagonalSpec, WidthKind};
use hwidths_core::experiments::{fit_decay, read_rows, write_rows, SweepRow};
use hwidths_core::exponents::{
    select, sobolev_exponent, tree_exponent, IndexedExponent, RegimeParams, Selection, TreeParams,
};
use hwidths_core::hardy::{make_budget_plan, BudgetParams, WeightedTreeOperator};
use hwidths_core::linalg::singular_values;
use hwidths_core::metric::{integrate_path, MetricFunction, MetricPoint, MetricTree, PiecewiseConstant};
use hwidths_core::partition::{partition_tree, VertexCost};
use hwidths_core::slow::{check_slow_variation_at, ImplicitInverse, SlowFactor};
use hwidths_core::tree::{generate_h_tree, random_tree, HTreeSpec, RootedTree};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn tree_strategy(max_vertices: usize) -> impl Strategy<Value = RootedTree> {
    (1..=max_vertices, 1usize..=4, any::<u64>())
        .prop_map(|(n, k, seed)| random_tree(n, k, seed).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn levels_match_parent_chains(tree in tree_strategy(300)) {
        for v in 0..tree.len() {
            let mut depth = 0;
            let mut cur = v;
            while let Some(p) = tree.parent(cur) {
                depth += 1;
                cur = p;
            }
            prop_assert_eq!(cur, tree.root());
            prop_assert_eq!(depth, tree.level(v));
        }
    }

    #[test]
    fn level_sets_partition_subtrees(tree in tree_strategy(200), pick in any::<prop::sample::Index>()) {
        let xi = pick.index(tree.len());
        let mut sub = tree.subtree(xi).unwrap();
        let mut union = Vec::new();
        for j in 0..=tree.depth() {
            union.extend(tree.level_set(xi, j).unwrap());
        }
        let before = union.len();
        union.sort_unstable();
        union.dedup();
        prop_assert_eq!(before, union.len());
        sub.sort_unstable();
        prop_assert_eq!(union, sub);
    }

    #[test]
    fn h_tree_level_sizes_track_h(theta in 0.3f64..2.0, depth in 4usize..=12, seed in any::<u64>(), log_exp in -1.0f64..1.0) {
        let mut spec = HTreeSpec::new(theta, 1, depth);
        spec.lambda = SlowFactor::log_power(log_exp);
        spec.seed = seed;
        let tree = match generate_h_tree(&spec) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        let sizes = tree.level_sizes();
        for (k, &nk) in sizes.iter().enumerate() {
            let ratio = nk as f64 / spec.target_level_size(k);
            prop_assert!((0.5..=2.0).contains(&ratio), "level {} ratio {}", k, ratio);
        }
    }

    #[test]
    fn inversion_round_trip(gamma in 0.25f64..3.0, alpha in -2.0f64..2.0, lx in 3.0f64..12.0) {
        let inv = ImplicitInverse::new(gamma, SlowFactor::log_power(alpha)).unwrap();
        let x = 10f64.powf(lx).max(inv.x_threshold);
        let (y, _) = inv.invert(x).unwrap();
        let back = inv.forward(y);
        prop_assert!(((back - x) / x).abs() <= 1e-9, "x={} back={}", x, back);
    }

    #[test]
    fn inverse_scale_is_slowly_varying(gamma in 1.0f64..3.0, alpha_frac in -1.0f64..1.0) {
        // Log powers with |α| ≤ γ; φ sampled on [10^3, 10^12] and checked
        // with the library's slow-variation test.
        let alpha = alpha_frac * gamma;
        let inv = ImplicitInverse::new(gamma, SlowFactor::log_power(alpha)).unwrap();
        let k_max = 29u32;
        let points: Vec<[f64; 2]> = (0..=k_max)
            .map(|k| {
                let x = 1e3 * (k as f64).exp2();
                [x, inv.invert(x).unwrap().1]
            })
            .collect();
        let table = SlowFactor::UserTable { points };
        let report = check_slow_variation_at(&table, 0.1, k_max, &[1e3], &[1]);
        prop_assert!(!report.violation, "{:?}", report.samples);
    }

    #[test]
    fn diag_width_monotone_and_homogeneous(
        c in prop::collection::vec(0.01f64..10.0, 1..40),
        p in 1.0f64..8.0,
        dq in 0.0f64..4.0,
        s in 0.1f64..10.0,
    ) {
        let q = (p - dq).max(1.0);
        let mut c = c;
        c.sort_by(|a, b| b.total_cmp(a));
        let spec = DiagonalSpec::new(c.clone(), p, q).unwrap();
        let scaled = DiagonalSpec::new(c.iter().map(|x| x * s).collect(), p, q).unwrap();
        let mut prev = f64::INFINITY;
        for n in 0..=c.len() {
            let w = diag_width(&spec, n).unwrap();
            prop_assert!(w <= prev * (1.0 + 1e-12));
            prev = w;
            let ws = diag_width(&scaled, n).unwrap();
            prop_assert!((ws - s * w).abs() <= 1e-12 * (1.0 + ws.abs()));
        }
    }

    #[test]
    fn diag_width_hilbert_is_svd(c in prop::collection::vec(0.001f64..10.0, 1..30)) {
        let mut c = c;
        c.sort_by(|a, b| b.total_cmp(a));
        let spec = DiagonalSpec::new(c.clone(), 2.0, 2.0).unwrap();
        let s = singular_values(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(c.clone()))).unwrap();
        for n in 0..c.len() {
            prop_assert!((diag_width(&spec, n).unwrap() - s[n]).abs() <= 1e-12);
        }
    }

    #[test]
    fn order_phi_bounds(nu in 1usize..200, frac in 0.0f64..1.0, p in 1.01f64..4.0, dq in 0.01f64..6.0) {
        let q = p + dq;
        let n = ((nu as f64) * frac) as usize;
        let v = order_phi(n, nu, p, q).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12, "{}", v);
    }

    #[test]
    fn partitions_are_connected_covers(tree in tree_strategy(400), n in 1usize..20, skew in 0.0f64..2.0) {
        let k = tree.max_branching().max(1);
        let cost = VertexCost::new((0..tree.len()).map(|i| 1.0 + ((i * 7919) % 13) as f64 * skew).collect()).unwrap();
        let part = partition_tree(&tree, &cost, n, k).unwrap();
        part.validate(&tree).unwrap();
        let mut seen = vec![false; tree.len()];
        for p in &part.parts {
            for &v in p {
                prop_assert!(!seen[v]);
                seen[v] = true;
            }
            // connected: every non-root member has its parent inside the part
            for &v in &p[1..] {
                let par = tree.parent(v).unwrap();
                prop_assert!(p.contains(&par));
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        prop_assert_eq!(part, partition_tree(&tree, &cost, n, k).unwrap());
    }

    #[test]
    fn relabelling_keeps_singular_values(tree in tree_strategy(60), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let n = tree.len();
        let u: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let w: Vec<f64> = (0..n).map(|i| 0.5 + (i % 3) as f64).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let entries: Vec<_> = (0..n).map(|v| (perm[v], tree.parent(v).map(|p| perm[p]))).collect();
        let relabelled = RootedTree::from_entries(&entries).unwrap();
        let mut u2 = vec![0.0; n];
        let mut w2 = vec![0.0; n];
        for v in 0..n {
            u2[perm[v]] = u[v];
            w2[perm[v]] = w[v];
        }
        let a = WeightedTreeOperator::new(tree, u, w).unwrap().assemble_matrix().unwrap();
        let b = WeightedTreeOperator::new(relabelled, u2, w2).unwrap().assemble_matrix().unwrap();
        let (sa, sb) = (singular_values(&a).unwrap(), singular_values(&b).unwrap());
        for (x, y) in sa.iter().zip(&sb) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x));
        }
    }

    #[test]
    fn budget_rank_grows_linearly(n in 16usize..4096, gamma in 0.5f64..2.0, delta in prop::sample::select(vec![0.25, 0.5, 1.0, f64::INFINITY])) {
        // The damping exponent |δγ - λ|/(2δ) must stay away from zero.
        prop_assume!(delta.is_infinite() || (delta * gamma - 1.0).abs() / (2.0 * delta) >= 0.05);
        let params = BudgetParams {
            k_star: 1.0,
            gamma_star: gamma,
            psi_star: SlowFactor::one(),
            delta_star: delta,
            lambda_star: 1.0,
            beta_star: 1.0,
        };
        let a = make_budget_plan(n, &params).unwrap().rank_total as f64;
        let b = make_budget_plan(2 * n, &params).unwrap().rank_total as f64;
        prop_assert!((1.5..=3.0).contains(&(b / a)), "ratio {}", b / a);
    }

    #[test]
    fn path_integrals_add(
        lens in prop::collection::vec(0.1f64..3.0, 2..8),
        vals in prop::collection::vec(0.0f64..5.0, 2..8),
        a_frac in 0.0f64..1.0,
        m_frac in 0.0f64..1.0,
        b_frac in 0.0f64..1.0,
    ) {
        let n = lens.len().min(vals.len());
        let skeleton = hwidths_core::tree::path(n + 1);
        let mut lengths = vec![0.0];
        lengths.extend_from_slice(&lens[..n]);
        let f = MetricFunction {
            edges: std::iter::once(PiecewiseConstant::constant(0.0))
                .chain(vals[..n].iter().map(|&v| PiecewiseConstant::constant(v)))
                .collect(),
        };
        let mt = MetricTree::uniform(skeleton, lengths.clone()).unwrap();
        // three ordered points on the path
        let mut pts: Vec<f64> = vec![a_frac, m_frac, b_frac];
        pts.sort_by(f64::total_cmp);
        let total: f64 = lengths.iter().sum();
        let locate = |s: f64| {
            let mut rem = s * total;
            for (e, &l) in lengths.iter().enumerate().skip(1) {
                if rem <= l {
                    return MetricPoint { edge: e, t: rem };
                }
                rem -= l;
            }
            MetricPoint { edge: n, t: lengths[n] }
        };
        let (a, m, b) = (locate(pts[0]), locate(pts[1]), locate(pts[2]));
        let whole = integrate_path(&mt, &f, a, b).unwrap();
        let split = integrate_path(&mt, &f, a, m).unwrap() + integrate_path(&mt, &f, m, b).unwrap();
        prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
    }

    #[test]
    fn argmin_ignores_order(values in prop::collection::vec(-3.0f64..3.0, 1..6), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let list: Vec<IndexedExponent> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| IndexedExponent { index: i + 1, value: v })
            .collect();
        let mut shuffled = list.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let sel = select(&list);
        prop_assert_eq!(sel, select(&shuffled));
        if let Selection::Index(j) = sel {
            let best = values[j - 1];
            prop_assert!(values.iter().enumerate().all(|(i, &v)| i == j - 1 || v > best));
        }
    }

    #[test]
    fn dual_q_hat(p in 1.05f64..10.0, q in 1.05f64..10.0) {
        let gel = RegimeParams::basic(p, q, 3, 1, 0.0, 0.0, 0.0, WidthKind::Gelfand);
        let kol = RegimeParams::basic(
            hwidths_core::conjugate(q),
            hwidths_core::conjugate(p),
            3,
            1,
            0.0,
            0.0,
            0.0,
            WidthKind::Kolmogorov,
        );
        let (g, k) = (sobolev_exponent(&gel).unwrap(), sobolev_exponent(&kol).unwrap());
        prop_assert!((g.q_hat - hwidths_core::conjugate(p)).abs() <= 1e-12);
        prop_assert!((k.q_hat - hwidths_core::conjugate(p)).abs() <= 1e-12);
    }

    #[test]
    fn exact_power_law_fit(e in 0.1f64..3.0, c in 0.01f64..100.0) {
        let rows: Vec<SweepRow> = (0..9)
            .map(|k| {
                let n = 1usize << k;
                SweepRow {
                    n,
                    width: Some(c * (n as f64).powf(-e)),
                    lower_bound: None,
                    upper_bound: None,
                    kind: WidthKind::Linear,
                    predicted: None,
                }
            })
            .collect();
        let rep = tree_exponent(&TreeParams::basic(2.0, 2.0, e, 1.0, WidthKind::Linear)).unwrap();
        let fit = fit_decay(&rows, 0.5, &rep, 0.15).unwrap();
        prop_assert!((fit.slope + e).abs() <= 1e-12);
        prop_assert!(fit.pass);
    }

    #[test]
    fn csv_rows_round_trip(
        vals in prop::collection::vec((prop::option::of(0.0f64..1e6), prop::option::of(-1e-300f64..1e300)), 0..12)
    ) {
        let rows: Vec<SweepRow> = vals
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| SweepRow {
                n: i + 1,
                width: a,
                lower_bound: b,
                upper_bound: a,
                kind: WidthKind::ALL[i % 3],
                predicted: b,
            })
            .collect();
        let text = write_rows(&rows).unwrap();
        prop_assert!(text.starts_with("n,width,lower_bound,upper_bound,kind,predicted"));
        prop_assert_eq!(read_rows(&text).unwrap(), rows);
    }
}
