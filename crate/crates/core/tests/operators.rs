use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stratshear::multipliers::eval_bl;
use stratshear::weights::{log_m, WeightSet};
use stratshear::{
    build_profile, sample_spectrum, FrequencyGrid, ProfileKind, ProfileSpectrum, SolverSettings, SpectralField,
    SpectralOperators,
};

type CMat = DMatrix<Complex64>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Operators for a bump of amplitude `a`, width 4, on the acceptance grid.
fn near_couette(a: f64, beta: f64) -> (FrequencyGrid, ProfileSpectrum, SpectralOperators, f64) {
    let profile = build_profile(ProfileKind::Perturbed, a, 4.0, 0.0).unwrap();
    let grid = FrequencyGrid::new(1, 8.0, 256).unwrap();
    let spec = sample_spectrum(&profile, &grid).unwrap();
    let ops = SpectralOperators::new(grid.clone(), &spec, beta, SolverSettings::default());
    (grid, spec, ops, profile.epsilon())
}

fn gaussian(grid: &FrequencyGrid) -> SpectralField {
    grid.field_from(|e| c((-e * e).exp(), 0.3 * e * (-e * e / 2.0).exp()))
}

fn random_field(grid: &FrequencyGrid, rng: &mut ChaCha8Rng) -> SpectralField {
    SpectralField(
        (0..grid.len())
            .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect(),
    )
}

fn to_vec(u: &SpectralField) -> DVector<Complex64> {
    DVector::from_column_slice(u.values())
}

/// Dense matrix of the linear convolution with a lag array.
fn conv_matrix(lags: &[Complex64], grid: &FrequencyGrid) -> CMat {
    let n = grid.len();
    let scale = grid.deta() / (2.0 * std::f64::consts::PI);
    CMat::from_fn(n, n, |i, j| lags[i + n - 1 - j] * scale)
}

fn diag(grid: &FrequencyGrid, f: impl Fn(f64) -> Complex64) -> CMat {
    CMat::from_diagonal(&DVector::from_iterator(grid.len(), grid.etas().iter().map(|&e| f(e))))
}

struct Dense {
    tl: CMat,
    tb: CMat,
    bl: CMat,
    inv_p: CMat,
}

/// Independent dense assembly of `T_L` and `T_B` by LU inversion.
fn dense_resolvents(grid: &FrequencyGrid, spec: &ProfileSpectrum, beta: f64, t: f64) -> Dense {
    let n = grid.len();
    let k = grid.kf();
    let id = CMat::identity(n, n);
    let a = |e: f64| e - k * t;
    let p = |e: f64| k * k + a(e) * a(e);
    let g1 = conv_matrix(spec.g_minus_one(), grid);
    let g2 = conv_matrix(spec.g2_minus_one(), grid);
    let bb = conv_matrix(spec.b(), grid);
    let t_eps = &g2 * diag(grid, |e| c(-a(e) * a(e) / p(e), 0.0)) + &bb * diag(grid, |e| c(0.0, a(e) / p(e)));
    let tl = (&id - t_eps).lu().try_inverse().unwrap();
    let d = diag(grid, |e| c(0.0, -a(e) / p(e)));
    let bl = diag(grid, |e| {
        eval_bl(t, stratshear::Frequency::new(grid.k(), e).unwrap(), beta)
    });
    let b_eps = (&bl * (&g1 * &d * &tl + &d * (&tl - &id))) * c(beta, 0.0);
    let tb = (&id - b_eps).lu().try_inverse().unwrap();
    let inv_p = diag(grid, |e| c(-1.0 / p(e), 0.0));
    Dense { tl, tb, bl, inv_p }
}

fn max_diff(a: &SpectralField, b: &DVector<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn neumann_solves_agree_with_dense_elimination() {
    let tol = SolverSettings::default().tol;
    for (a, sigma, eta_max) in [(0.02, 4.0, 8.0), (0.05, 2.0, 12.0)] {
        let profile = build_profile(ProfileKind::Perturbed, a, sigma, 0.0).unwrap();
        let grid = FrequencyGrid::new(1, eta_max, 256).unwrap();
        let spec = sample_spectrum(&profile, &grid).unwrap();
        let ops = SpectralOperators::new(grid.clone(), &spec, 1.0, SolverSettings::default());
        let f = gaussian(&grid);
        for t in [0.0, 2.5, 17.0] {
            let dense = dense_resolvents(&grid, &spec, 1.0, t);
            let fv = to_vec(&f);
            let (tl, _) = ops.solve_tl(t, &f).unwrap();
            let (tb, _) = ops.solve_tb(t, &f).unwrap();
            let (bt, _) = ops.apply_bt(t, &f).unwrap();
            let (inv, _) = ops.apply_inv_delta_t(t, &f).unwrap();
            assert!(max_diff(&tl, &(&dense.tl * &fv)) <= 10.0 * tol, "T_L a={a} t={t}");
            assert!(max_diff(&tb, &(&dense.tb * &fv)) <= 10.0 * tol, "T_B a={a} t={t}");
            assert!(
                max_diff(&bt, &(&dense.tb * &dense.bl * &fv)) <= 10.0 * tol,
                "B_t a={a} t={t}"
            );
            assert!(
                max_diff(&inv, &(&dense.inv_p * &dense.tl * &fv)) <= 10.0 * tol,
                "inv a={a} t={t}"
            );
        }
    }
}

#[test]
fn converged_solves_meet_their_residual_contract() {
    let (grid, _, ops, _) = near_couette(0.02, 1.0);
    let tol = ops.settings().tol;
    let f = gaussian(&grid);
    for t in [0.0, 1.0, 9.0, 40.0] {
        let (u, stats) = ops.solve_tl(t, &f).unwrap();
        let residual = u.sub(&ops.apply_t_eps(t, &u)).sub(&f).l2_norm(&grid);
        assert!(residual <= tol * f.l2_norm(&grid) * 1.01);
        assert!(stats.max_contraction < 0.5);
        let (v, stats) = ops.solve_tb(t, &f).unwrap();
        let (bv, _) = ops.apply_b_eps(t, &v).unwrap();
        assert!(v.sub(&bv).sub(&f).l2_norm(&grid) <= tol * f.l2_norm(&grid) * 1.01);
        assert!(stats.max_contraction < 0.5);
        assert!(v.l2_norm(&grid) <= 2.0 * f.l2_norm(&grid));
    }
}

#[test]
fn forward_laplacian_inverts_the_solve() {
    let (grid, _, ops, _) = near_couette(0.02, 1.0);
    let u = gaussian(&grid);
    for t in [0.0, 3.0, 30.0] {
        let (inv, _) = ops.apply_inv_delta_t(t, &u).unwrap();
        let back = ops.apply_delta_t(t, &inv);
        let scale = u.max_abs();
        for j in 0..grid.len() {
            if !grid.is_outer(j, 0.1) {
                assert!((back[j] - u[j]).norm() <= 1e-6 * scale, "t={t} j={j}");
            }
        }
    }
}

#[test]
fn couette_operators_are_multipliers() {
    let grid = FrequencyGrid::new(2, 10.0, 128).unwrap();
    let ops = SpectralOperators::couette(grid.clone(), 1.3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = random_field(&grid, &mut rng);
    let t = 2.2;
    let (inv, _) = ops.apply_inv_delta_t(t, &u).unwrap();
    let (bt, _) = ops.apply_bt(t, &u).unwrap();
    let (b_eps, _) = ops.apply_b_eps(t, &u).unwrap();
    for (j, &eta) in grid.etas().iter().enumerate() {
        let f = grid.frequency(j);
        let p = 4.0 + (eta - 2.0 * t).powi(2);
        assert_eq!(inv[j], -u[j] / p);
        assert_eq!(bt[j], u[j] * eval_bl(t, f, 1.3));
        assert_eq!(b_eps[j], c(0.0, 0.0));
    }
    assert_eq!(ops.apply_t_eps(t, &u), SpectralField::zeros(grid.len()));
    assert_eq!(
        ops.apply_delta_t(t, &u),
        u.map_indexed(|j, z| -z * (4.0 + (grid.etas()[j] - 2.0 * t).powi(2)))
    );
}

/// Largest singular value by power iteration on `M^H M`.
fn power_norm(m: &CMat) -> f64 {
    let mh = m.adjoint();
    let mut v = DVector::from_element(m.ncols(), c(1.0, 0.0));
    let mut sigma2 = 0.0;
    for _ in 0..200 {
        let w = &mh * (m * &v);
        sigma2 = w.norm() / v.norm();
        v = &w / c(w.norm(), 0.0);
    }
    sigma2.sqrt()
}

#[test]
fn t_eps_norm_scales_with_amplitude() {
    let t = 1.5;
    let norms: Vec<f64> = [0.01, 0.02]
        .iter()
        .map(|&a| {
            let (grid, _, ops, _) = near_couette(a, 0.0);
            let n = grid.len();
            let cols: Vec<DVector<Complex64>> = (0..n)
                .map(|j| {
                    let mut e = SpectralField::zeros(n);
                    e[j] = c(1.0, 0.0);
                    to_vec(&ops.apply_t_eps(t, &e))
                })
                .collect();
            power_norm(&CMat::from_columns(&cols)) / a
        })
        .collect();
    assert!((norms[0] / norms[1] - 1.0).abs() <= 0.1, "{norms:?}");
    // The pre-convolution multiplier (eta - kt)^2 / p never exceeds one.
    assert!(norms[1] * 0.02 < 1.0);
}

#[test]
fn b_eps_is_order_beta_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let ratio = |a: f64, beta: f64, rng: &mut ChaCha8Rng| {
        let (grid, _, ops, eps) = near_couette(a, beta);
        (0..8)
            .map(|i| {
                let u = random_field(&grid, rng);
                let (bu, _) = ops.apply_b_eps(i as f64 * 3.0, &u).unwrap();
                bu.l2_norm(&grid) / (beta * eps * u.l2_norm(&grid))
            })
            .fold(0.0, f64::max)
    };
    let calibrated = ratio(0.01, 1.0, &mut rng);
    assert!(calibrated.is_finite() && calibrated > 0.0);
    for (a, beta) in [(0.02, 1.0), (0.02, 0.5), (0.01, 3.0)] {
        let r = ratio(a, beta, &mut rng);
        assert!(r <= 2.0 * calibrated, "a={a} beta={beta}: {r} vs {calibrated}");
    }
    let (grid, _, ops, _) = near_couette(0.02, 0.0);
    let u = gaussian(&grid);
    assert_eq!(ops.apply_b_eps(1.0, &u).unwrap().0, SpectralField::zeros(grid.len()));
}

#[test]
fn bt_round_trip() {
    let (grid, _, ops, _) = near_couette(0.02, 1.0);
    let theta = gaussian(&grid);
    for t in [0.0, 4.0, 25.0] {
        let (omega, _) = ops.apply_bt(t, &theta).unwrap();
        let (back, _) = ops.apply_bt_inverse(t, &omega).unwrap();
        assert!(back.sub(&theta).max_abs() <= 1e-8 * theta.max_abs());
    }
}

/// `ln` of `sqrt(m1'/m1) p^{-1/4} m^{-1}` on the grid, shifted to max zero.
fn commutation_weight(grid: &FrequencyGrid, ws: &WeightSet, t: f64) -> Vec<f64> {
    let k = grid.kf();
    let logs: Vec<f64> = (0..grid.len())
        .map(|j| {
            let f = grid.frequency(j);
            let p = k * k + f.sheared(t).powi(2);
            0.5 * (ws.c_beta * k * k / p).ln() - 0.25 * p.ln() - log_m(t, f, ws)
        })
        .collect();
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|l| (l - peak).exp()).collect()
}

fn weighted_norm(w: &[f64], u: &SpectralField) -> f64 {
    w.iter()
        .zip(u.iter())
        .map(|(w, z)| (w * z.norm()).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn weighted_commutation_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut constants = Vec::new();
    for a in [0.01, 0.02] {
        let (grid, _, ops, eps) = near_couette(a, 1.0);
        let ws = WeightSet::new(1.0, 1.0, 64.0, eps).unwrap();
        let mut worst_t_eps: f64 = 0.0;
        for t in [0.5, 2.0, 6.0] {
            let w = commutation_weight(&grid, &ws, t);
            for _ in 0..4 {
                let u = random_field(&grid, &mut rng);
                let base = weighted_norm(&w, &u);
                worst_t_eps = worst_t_eps.max(weighted_norm(&w, &ops.apply_t_eps(t, &u)) / (eps * base));
                assert!(weighted_norm(&w, &ops.solve_tl(t, &u).unwrap().0) <= 2.0 * base);
                assert!(weighted_norm(&w, &ops.solve_tb(t, &u).unwrap().0) <= 2.0 * base);
            }
        }
        constants.push(worst_t_eps);
    }
    assert!(constants.iter().all(|c| c.is_finite()));
    assert!(constants[1] <= 2.0 * constants[0], "{constants:?}");
}
