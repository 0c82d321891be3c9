use num_complex::Complex64;

use stratshear::evolution::{evolve, CouetteDynamics, Integration, RawState};
use stratshear::observables::{
    reconstruct_vorticity, running_max_envelope, series_norms, velocity_components, ENVELOPE_WIDTH,
};
use stratshear::{build_profile, sample_spectrum, FrequencyGrid, ProfileKind, SolverSettings, SpectralOperators};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn generic_data(grid: &FrequencyGrid) -> RawState {
    RawState::new(
        0.0,
        grid.field_from(|e| c((-e * e).exp(), 0.0)),
        grid.field_from(|e| c((-(e - 1.0) * (e - 1.0) / 2.0).exp(), 0.0)),
    )
}

#[test]
fn q_norm_obeys_plancherel_against_physical_quadrature() {
    let grid = FrequencyGrid::new(1, 12.0, 512).unwrap();
    let ops = SpectralOperators::couette(grid.clone(), 1.0);
    let state = generic_data(&grid);
    let (series, _) = series_norms(&ops, std::slice::from_ref(&state)).unwrap();
    // Q(Y) = (1 / 2 pi) int Q^(eta) e^{i eta Y} d eta, by quadrature on the grid.
    let h = 0.02;
    let physical: f64 = (0..3001)
        .map(|i| {
            let y = -30.0 + i as f64 * h;
            let q: Complex64 = grid
                .etas()
                .iter()
                .zip(state.q.iter())
                .map(|(&e, z)| z * Complex64::from_polar(grid.deta(), e * y))
                .sum::<Complex64>()
                / (2.0 * std::f64::consts::PI);
            q.norm_sqr() * h
        })
        .sum();
    let spectral = series.q_norm[0].powi(2) / (2.0 * std::f64::consts::PI);
    assert!(
        (spectral - physical).abs() <= 1e-6 * physical,
        "{spectral} vs {physical}"
    );
}

#[test]
fn vorticity_lies_in_the_bl_sandwich() {
    let grid = FrequencyGrid::new(1, 10.0, 128).unwrap();
    let theta = grid.field_from(|e| c((-e * e / 4.0).exp(), 0.5 * e.sin()));
    for beta in [0.0, 0.5, 3.0] {
        let ops = SpectralOperators::couette(grid.clone(), beta);
        for t in [0.0, 1.0, 6.0] {
            let (omega, _) = reconstruct_vorticity(&ops, t, &theta).unwrap();
            for j in 0..grid.len() {
                let (o, th) = (omega[j].norm(), theta[j].norm());
                assert!(o <= th * (1.0 + 1e-12));
                assert!(o >= th / (1.0 + beta * beta).sqrt() * (1.0 - 1e-12));
                if beta == 0.0 {
                    assert_eq!(omega[j], theta[j]);
                }
            }
        }
    }
}

#[test]
fn couette_velocity_multipliers() {
    let grid = FrequencyGrid::new(2, 8.0, 64).unwrap();
    let ops = SpectralOperators::couette(grid.clone(), 1.0);
    let omega = grid.field_from(|e| c(e.cos(), (-e * e).exp()));
    let t = 1.3;
    let (vx, vy, _) = velocity_components(&ops, t, &omega).unwrap();
    for (j, &eta) in grid.etas().iter().enumerate() {
        let a = eta - 2.0 * t;
        let p = 4.0 + a * a;
        assert!((vx[j] - c(0.0, a / p) * omega[j]).norm() <= 1e-15);
        assert!((vy[j] - c(0.0, -2.0 / p) * omega[j]).norm() <= 1e-15);
        assert!(vy[j].norm() <= omega[j].norm() / p.sqrt() * (1.0 + 1e-12));
    }
}

#[test]
fn near_couette_velocity_reduces_smoothly() {
    let grid = FrequencyGrid::new(1, 8.0, 256).unwrap();
    let omega = grid.field_from(|e| c((-e * e).exp(), 0.0));
    let couette = SpectralOperators::couette(grid.clone(), 1.0);
    let (vx0, vy0, _) = velocity_components(&couette, 2.0, &omega).unwrap();
    let mut prev = 0.0;
    for a in [0.005, 0.01, 0.02] {
        let profile = build_profile(ProfileKind::Perturbed, a, 4.0, 0.0).unwrap();
        let spec = sample_spectrum(&profile, &grid).unwrap();
        let ops = SpectralOperators::new(grid.clone(), &spec, 1.0, SolverSettings::default());
        let (vx, vy, _) = velocity_components(&ops, 2.0, &omega).unwrap();
        let gap = vx.sub(&vx0).l2_norm(&grid) + vy.sub(&vy0).l2_norm(&grid);
        assert!(gap > prev);
        assert!(gap <= 10.0 * profile.epsilon() * omega.l2_norm(&grid));
        prev = gap;
    }
}

#[test]
fn couette_vy_decays_at_three_halves() {
    let grid = FrequencyGrid::new(1, 20.0, 512).unwrap();
    let mut dynamics = CouetteDynamics {
        k: 1,
        etas: grid.etas().to_vec(),
        beta: 1.0,
        r: 1.0,
    };
    let history = evolve(
        generic_data(&grid),
        &mut dynamics,
        Integration {
            t_max: 100.0,
            dt: 0.01,
            record_every: 10,
        },
    )
    .unwrap();
    let ops = SpectralOperators::couette(grid, 1.0);
    let (series, _) = series_norms(&ops, &history).unwrap();
    // t^{3/2} ||v^y|| carries a log-periodic factor with period 2 pi / sqrt(R - 1/4)
    // in ln t, so it must stay in a bounded band and turn around inside the window.
    let window: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.vy_norm)
        .filter(|(t, _)| **t >= 10.0)
        .map(|(t, v)| (*t, v * t.powf(1.5)))
        .collect();
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), (_, v)| (l.min(*v), h.max(*v)));
    assert!(hi / lo <= 2.0, "band {lo}..{hi}");
    let t_min = window.iter().find(|(_, v)| *v == lo).unwrap().0;
    assert!(t_min > 20.0 && t_min < 100.0, "minimum at {t_min}");
    let env = running_max_envelope(&series.times, &series.vy_norm, ENVELOPE_WIDTH);
    assert!(env.iter().zip(&series.vy_norm).all(|(e, v)| e >= v));
}
