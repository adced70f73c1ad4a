use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;

use tvpsvd::banded::BandedSpd;
use tvpsvd::bench::{scaling_fit, Axis, Sampler, TimingRow};
use tvpsvd::design::{assemble_static, thin_svd, StateMode};
use tvpsvd::dist::{log_sum_exp, sample_dirichlet_log, std_normal};
use tvpsvd::forecast::{cumulative_log_bf, dm_test};
use tvpsvd::ingest::{read_table, write_table, SeriesTable};
use tvpsvd::mixture::{apply_permutation, count_groups, counts, log_joint, MixtureState};
use tvpsvd::priors::{MixturePrior, Psi};
use tvpsvd::rng::Rng;
use tvpsvd::samplers::{coefficient_paths, posterior_moments};

fn mode_of(lower: bool) -> StateMode {
    if lower {
        StateMode::LowerTriangular
    } else {
        StateMode::BlockDiagonal
    }
}

fn dense_z(x: &DMatrix<f64>, mode: StateMode) -> DMatrix<f64> {
    let (t, k) = (x.nrows(), x.ncols());
    DMatrix::from_fn(t, t * k, |r, c| {
        let s = c / k;
        let on = match mode {
            StateMode::BlockDiagonal => s == r,
            StateMode::LowerTriangular => s <= r,
        };
        if on {
            x[(r, c % k)]
        } else {
            0.0
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn structured_products_match_dense(t in 1usize..10, k in 1usize..6, lower in any::<bool>(), seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, k, |_, _| std_normal(&mut r));
        let mode = mode_of(lower);
        let sys = assemble_static(&x, mode).unwrap();
        let z = dense_z(&x, mode);
        let b: Vec<f64> = (0..t * k).map(|_| std_normal(&mut r)).collect();
        let y: Vec<f64> = (0..t).map(|_| std_normal(&mut r)).collect();
        let zb = &z * DVector::from_column_slice(&b);
        let zty = z.transpose() * DVector::from_column_slice(&y);
        prop_assert!((sys.mul(&b) - zb).norm() < 1e-10);
        prop_assert!((DVector::from_vec(sys.tmul(&y)) - zty).norm() < 1e-10);
    }

    #[test]
    fn singular_values_match_dense(t in 1usize..9, k in 1usize..5, lower in any::<bool>(), seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, k, |_, _| 0.5 + std_normal(&mut r));
        let mode = mode_of(lower);
        let svd = thin_svd(&assemble_static(&x, mode).unwrap(), false).unwrap();
        let mut got = svd.singular_values();
        got.sort_by(|a, b| b.total_cmp(a));
        let mut want: Vec<f64> = dense_z(&x, mode).singular_values().iter().copied().collect();
        want.sort_by(|a, b| b.total_cmp(a));
        want.truncate(got.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * want[0].max(1.0));
        }
    }

    #[test]
    fn posterior_mean_solves_normal_equations(t in 1usize..9, k in 1usize..5, lower in any::<bool>(), seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(t, k, |_, _| std_normal(&mut r));
        let mode = mode_of(lower);
        let svd = thin_svd(&assemble_static(&x, mode).unwrap(), false).unwrap();
        let d: Vec<f64> = (0..k).map(|j| 0.1 + j as f64 * 0.3).collect();
        let d0: Vec<f64> = match mode {
            StateMode::BlockDiagonal => (0..t * k).map(|i| d[i % k]).collect(),
            StateMode::LowerTriangular => vec![d[0]; t * k],
        };
        let y: Vec<f64> = (0..t).map(|_| std_normal(&mut r)).collect();
        let m = posterior_moments(&svd, &d0, &vec![0.0; t * k], &y).unwrap();
        // (Z'Z + D0⁻¹) mean = Z'y
        let z = dense_z(&x, mode);
        let lhs = (z.transpose() * &z + DMatrix::from_fn(t * k, t * k, |i, j| if i == j { 1.0 / d0[i] } else { 0.0 }))
            * DVector::from_column_slice(&m.mean);
        let rhs = z.transpose() * DVector::from_column_slice(&y);
        prop_assert!((lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
    }

    #[test]
    fn random_walk_paths_difference_back(t in 1usize..20, k in 1usize..4, seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let gamma: Vec<f64> = (0..k).map(|_| std_normal(&mut r)).collect();
        let bt: Vec<f64> = (0..t * k).map(|_| std_normal(&mut r)).collect();
        let paths = coefficient_paths(StateMode::LowerTriangular, &gamma, &bt);
        for j in 0..k {
            prop_assert!((paths[j] - gamma[j] - bt[j]).abs() < 1e-12);
            for s in 1..t {
                prop_assert!((paths[s * k + j] - paths[(s - 1) * k + j] - bt[s * k + j]).abs() < 1e-10);
            }
        }
        let white = coefficient_paths(StateMode::BlockDiagonal, &gamma, &bt);
        for i in 0..t * k {
            prop_assert!((white[i] - gamma[i % k] - bt[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn banded_cholesky_solves_like_dense(n in 1usize..30, bw in 0usize..4, seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let mut q = BandedSpd::zeros(n, bw);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(bw)..i {
                let v = 0.3 * std_normal(&mut r);
                q.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
            let d = 2.0 * (bw as f64) + 1.0;
            q.add(i, i, d);
            dense[(i, i)] = d;
        }
        let b: Vec<f64> = (0..n).map(|_| std_normal(&mut r)).collect();
        let mut x = b.clone();
        let chol = q.cholesky().unwrap();
        chol.solve(&mut x);
        let want = dense.clone().cholesky().unwrap().solve(&DVector::from_column_slice(&b));
        prop_assert!((DVector::from_vec(x) - &want).norm() < 1e-9 * want.norm().max(1.0));
        let ln_det = dense.determinant().ln();
        prop_assert!((chol.ln_det() - ln_det).abs() < 1e-8 * ln_det.abs().max(1.0));
    }

    #[test]
    fn relabelling_leaves_the_joint_unchanged(t in 2usize..30, g in 1usize..6, seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let prior = MixturePrior { groups: g, ..MixturePrior::default() };
        let bt: Vec<f64> = (0..t).map(|_| std_normal(&mut r)).collect();
        let mut state = MixtureState::initial(&prior, t, 1, &mut r).unwrap();
        for (i, m) in state.means.iter_mut().enumerate() {
            m[0] = i as f64 - 1.0;
        }
        let sigma: Vec<f64> = (0..t).map(|s| 0.5 + 0.1 * s as f64).collect();
        let psi = Psi(vec![0.7]);
        let before = log_joint(&state, &bt, &sigma, &psi);
        let c_before = counts(&state.indicators, g);
        let perm: Vec<usize> = (0..g).rev().collect();
        apply_permutation(&mut state, &perm);
        let after = log_joint(&state, &bt, &sigma, &psi);
        prop_assert!((before - after).abs() < 1e-9 * before.abs().max(1.0));
        let mut c_after = counts(&state.indicators, g);
        let mut c_sorted = c_before.clone();
        c_after.sort();
        c_sorted.sort();
        prop_assert_eq!(c_after, c_sorted);
        prop_assert_eq!(c_before.iter().sum::<usize>(), t);
        prop_assert!(count_groups(&state.indicators, g) <= g.min(t));
    }

    #[test]
    fn dirichlet_weights_are_a_simplex(alpha in proptest::collection::vec(1e-3f64..20.0, 1..12), seed in any::<u64>()) {
        let mut r = Rng::seed_from_u64(seed);
        let lw = sample_dirichlet_log(&mut r, &alpha).unwrap();
        prop_assert!(lw.iter().all(|v| v.is_finite() && *v <= 1e-12));
        prop_assert!(log_sum_exp(&lw).abs() < 1e-10);
    }

    #[test]
    fn log_sum_exp_is_shift_equivariant(xs in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -500.0f64..500.0) {
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        prop_assert!((log_sum_exp(&shifted) - log_sum_exp(&xs) - c).abs() < 1e-9);
        let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(log_sum_exp(&xs) >= max);
    }

    #[test]
    fn dm_statistic_is_antisymmetric(a in proptest::collection::vec(0.0f64..5.0, 3..40), shift in -1.0f64..1.0, h in 1usize..4) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v + shift + 0.1 * (i as f64).sin()).collect();
        let ab = dm_test(&a, &b, h, false).unwrap();
        let ba = dm_test(&b, &a, h, false).unwrap();
        prop_assert!((ab.statistic + ba.statistic).abs() < 1e-9);
        prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn cumulative_bf_ends_at_total(a in proptest::collection::vec(-5.0f64..5.0, 1..30)) {
        let b: Vec<f64> = a.iter().map(|v| 0.5 * v - 1.0).collect();
        let c = cumulative_log_bf(&a, &b).unwrap();
        let total: f64 = a.iter().zip(&b).map(|(x, y)| x - y).sum();
        prop_assert!((c[c.len() - 1] - total).abs() < 1e-9);
    }

    #[test]
    fn power_law_exponent_is_recovered(p in 0.5f64..3.5, c in 1e-7f64..1e-3) {
        let rows: Vec<TimingRow> = [25usize, 50, 75, 100, 125, 150]
            .iter()
            .map(|&k| TimingRow { sampler: Sampler::Ffbs, k, t: 200, reps: 5, seconds: c * (k as f64).powf(p) })
            .collect();
        let fit = &scaling_fit(&rows, Axis::K).unwrap()[0];
        prop_assert!((fit.exponent - p).abs() < 1e-9);
        prop_assert!(fit.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn table_round_trips_through_csv(
        cols in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 5), 1..5),
        codes in any::<bool>(),
    ) {
        let names: Vec<String> = (0..cols.len()).map(|j| format!("S{j}")).collect();
        let dates: Vec<String> = (0..5).map(|t| format!("2000-0{}", t + 1)).collect();
        let mut table = SeriesTable::new(dates, names, cols).unwrap();
        if codes {
            table.codes = (0..table.names.len()).map(|j| if j % 2 == 0 { 1 } else { 5 }).collect();
        }
        let mut buf = Vec::new();
        write_table(&table, &mut buf, codes).unwrap();
        let back = read_table(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.names, &table.names);
        prop_assert_eq!(&back.dates, &table.dates);
        prop_assert_eq!(&back.columns, &table.columns);
        if codes {
            prop_assert_eq!(&back.codes, &table.codes);
        }
    }
}
