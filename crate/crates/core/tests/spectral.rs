//! Eigenbasis integration suite: orthonormality in the band-averaged sense,
//! completeness round trips, free propagation, and the weighted-norm decay
//! probes that distinguish the odd and even continuum edges.

use breather_core::basis::{
    analyze, bound_basis, fit_power_law, local_decay_probe, propagate_free, psi_d, synthesize,
    BasisContext, SpectralGrid,
};
use breather_core::c64;
use breather_core::dressing::DiscreteData;
use breather_core::grid::{inner, SpatialGrid, WaveField};
use breather_core::two_soliton::{Parity, TwoSoliton, TwoSolitonParams};
use breather_core::Complex64;

fn ts(r1: f64, r2: f64) -> TwoSoliton {
    TwoSoliton::new(TwoSolitonParams::new(r1, r2, 0.0, 0.0).unwrap())
}

fn ctx(r1: f64, r2: f64, parity: Parity) -> BasisContext {
    BasisContext::two_soliton(ts(r1, r2), parity)
}

fn bound_field(s: &TwoSoliton, parity: Parity, grid: SpatialGrid, t: f64) -> WaveField {
    let cache = s.x_cache(&grid.points());
    let rows = s.fields_row(&cache, t);
    WaveField::new(grid, rows.iter().map(|f| s.psi_b_from_fields(parity, f)).collect(), t)
        .unwrap()
}

#[test]
fn analyze_pure_bound_state() {
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let s = ts(0.25, 0.75);
    let sgrid = SpectralGrid::half_line_graded(4.0, 24, 16);
    for parity in [Parity::Even, Parity::Odd] {
        let field = bound_field(&s, parity, grid, 0.0);
        let amps = analyze(&ctx(0.25, 0.75, parity), &field, &sgrid).unwrap();
        assert!((amps.bound[0] - c64(1.0, 0.0)).norm() < 1e-9);
        let cont_mass: f64 = amps
            .continuum
            .iter()
            .zip(&sgrid.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum();
        assert!(cont_mass.sqrt() < 1e-6, "continuum leakage {}", cont_mass.sqrt());
    }
}

#[test]
fn completeness_round_trip_even_gaussian() {
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let c = ctx(0.25, 0.75, Parity::Even);
    let sgrid = SpectralGrid::half_line_graded(8.0, 48, 16);
    let field = WaveField::from_fn(grid, 0.0, |x| c64((-x * x).exp(), 0.0));
    let amps = analyze(&c, &field, &sgrid).unwrap();
    // Parseval
    let parseval = amps.parseval_sum();
    let norm2 = field.norm_sqr();
    assert!((parseval - norm2).abs() < 1e-6 * norm2, "parseval {parseval} vs {norm2}");
    // round trip
    let back = synthesize(&c, &amps, &grid, 0.0).unwrap();
    let dx = grid.dx();
    let err = (dx
        * back
            .samples
            .iter()
            .zip(&field.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>())
    .sqrt()
        / field.norm();
    assert!(err < 1e-5, "round trip error {err}");
}

#[test]
fn completeness_round_trip_random_smooth() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let sgrid = SpectralGrid::half_line_graded(8.0, 56, 16);
    for trial in 0..10 {
        let parity = if trial % 2 == 0 { Parity::Even } else { Parity::Odd };
        let c = ctx(0.25, 0.75, parity);
        // random smooth localized field of definite parity: Gaussian bumps
        // mirrored, supported well inside the grid center
        let mut gens: Vec<(f64, f64, f64, f64)> = Vec::new();
        for _ in 0..4 {
            gens.push((
                rng.gen_range(0.3..1.0),
                rng.gen_range(0.0..10.0),
                rng.gen_range(0.8..2.0),
                rng.gen_range(-1.5..1.5),
            ));
        }
        let field = WaveField::from_fn(grid, 0.0, |x| {
            let mut v = Complex64::new(0.0, 0.0);
            for &(a, x0, w, ph) in &gens {
                let bump = |y: f64| {
                    Complex64::from_polar(a * (-(y - x0) * (y - x0) / (w * w)).exp(), ph * y)
                };
                match parity {
                    Parity::Even => v += bump(x) + bump(-x),
                    Parity::Odd => v += bump(x) - bump(-x),
                }
            }
            v
        });
        let amps = analyze(&c, &field, &sgrid).unwrap();
        let back = synthesize(&c, &amps, &grid, 0.0).unwrap();
        let dx = grid.dx();
        let err = (dx
            * back
                .samples
                .iter()
                .zip(&field.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>())
        .sqrt()
            / field.norm();
        assert!(err < 1e-5, "trial {trial} ({parity:?}): round trip error {err}");
    }
}

#[test]
fn band_averaged_orthonormality() {
    // a smooth λ-packet g = ∫ φ(λ) Ψ_d(λ) dλ must satisfy ‖g‖ = ‖φ‖ and
    // stay orthogonal to the bound state
    let grid = SpatialGrid::symmetric(80.0, 2048).unwrap();
    let s = ts(0.25, 0.75);
    let sgrid = SpectralGrid::half_line_graded(4.0, 40, 16);
    for parity in [Parity::Even, Parity::Odd] {
        let c = ctx(0.25, 0.75, parity);
        let phi = |l: f64| (-((l - 1.1) / 0.25).powi(2)).exp();
        let states = c.continuum_states(&grid, 0.0, &sgrid).unwrap();
        let mut packet = vec![Complex64::new(0.0, 0.0); grid.n_points];
        for (j, st) in states.iter().enumerate() {
            let w = sgrid.weights[j] * phi(sgrid.nodes[j]);
            for (p, v) in packet.iter_mut().zip(st) {
                *p += w * v;
            }
        }
        let dx = grid.dx();
        let norm2 = dx * packet.iter().map(|z| z.norm_sqr()).sum::<f64>();
        let phi2: f64 = sgrid
            .nodes
            .iter()
            .zip(&sgrid.weights)
            .map(|(&l, &w)| w * phi(l) * phi(l))
            .sum();
        assert!(
            (norm2 - phi2).abs() < 1e-5 * phi2,
            "{parity:?}: packet norm² {norm2} vs ‖φ‖² {phi2}"
        );
        let b = bound_field(&s, parity, grid, 0.0);
        let overlap = inner(dx, &b.samples, &packet).norm();
        assert!(overlap < 1e-8, "{parity:?}: bound/continuum overlap {overlap}");
    }
    // the two bound states are orthonormal across parities by symmetry and
    // within each sector by normalization
    let dx = grid.dx();
    let be = bound_field(&s, Parity::Even, grid, 0.3);
    let bo = bound_field(&s, Parity::Odd, grid, 0.3);
    assert!((inner(dx, &be.samples, &be.samples).re - 1.0).abs() < 1e-8);
    assert!((inner(dx, &bo.samples, &bo.samples).re - 1.0).abs() < 1e-8);
    assert!(inner(dx, &be.samples, &bo.samples).norm() < 1e-12);
}

#[test]
fn windowed_continuum_mode_peaks_at_its_lambda() {
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let c = ctx(0.25, 0.75, Parity::Even);
    let s = ts(0.25, 0.75);
    let sgrid = SpectralGrid::half_line_graded(4.0, 48, 16);
    let l0 = 0.9;
    // windowed snapshot of Ψ_d(·, 0, λ0)
    let cache = s.x_cache(&grid.points());
    let rows = s.fields_row(&cache, 0.0);
    let field = WaveField::new(
        grid,
        grid.points()
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                s.psi_d_from_fields(Parity::Even, &rows[i], x, 0.0, l0)
                    * (-(x / 30.0) * (x / 30.0)).exp()
            })
            .collect(),
        0.0,
    )
    .unwrap();
    let amps = analyze(&c, &field, &sgrid).unwrap();
    let (peak_j, _) = amps
        .continuum
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .unwrap();
    assert!(
        (sgrid.nodes[peak_j] - l0).abs() < 0.1,
        "peak at λ={} instead of {l0}",
        sgrid.nodes[peak_j]
    );
}

#[test]
fn free_propagation_phases_and_unitarity() {
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let c = ctx(0.25, 0.75, Parity::Odd);
    let s = ts(0.25, 0.75);
    let sgrid = SpectralGrid::half_line(4.0, 24, 16);
    let field = bound_field(&s, Parity::Odd, grid, 0.0);
    let amps = analyze(&c, &field, &sgrid).unwrap().to_floquet();
    // dt = 0 is the identity
    let same = propagate_free(&amps, 0.0);
    assert_eq!(same.bound[0], amps.bound[0]);
    // one period multiplies the bound amplitude by the Floquet multiplier
    let l = s.params.period();
    let prop = propagate_free(&amps, l);
    let mult = s.params.floquet_multiplier();
    assert!((prop.bound[0] - mult * amps.bound[0]).norm() < 1e-12);
    // Parseval sum is preserved to rounding
    assert!((prop.parseval_sum() - amps.parseval_sum()).abs() < 1e-14 * amps.parseval_sum());
    // synthesized field after dt = L equals the Bloch-advanced bound state
    let back = synthesize(&c, &prop, &grid, 0.0).unwrap();
    let expect = bound_field(&s, Parity::Odd, grid, 0.0);
    let mut worst: f64 = 0.0;
    for (a, b) in back.samples.iter().zip(&expect.samples) {
        worst = worst.max((a - mult * b).norm());
    }
    assert!(worst < 1e-6, "propagated field error {worst}");
}

#[test]
fn floquet_multiplier_is_unity_at_resonant_family() {
    let p = TwoSolitonParams::new(1.0 / 2.0f64.sqrt(), 1.0, 0.0, 0.0).unwrap();
    assert!((p.floquet_multiplier() - c64(1.0, 0.0)).norm() < 1e-12);
    // a bound amplitude returns to itself after one period
    let grid = SpatialGrid::symmetric(40.0, 1024).unwrap();
    let s = TwoSoliton::new(p);
    let c = BasisContext::two_soliton(s, Parity::Even);
    let sgrid = SpectralGrid::half_line(5.0, 24, 16);
    let field = bound_field(&s, Parity::Even, grid, 0.0);
    let amps = analyze(&c, &field, &sgrid).unwrap().to_floquet();
    let prop = propagate_free(&amps, p.period());
    assert!((prop.bound[0] - amps.bound[0]).norm() < 1e-12);
}

#[test]
fn parity_channels_do_not_mix() {
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let sgrid = SpectralGrid::half_line(4.0, 24, 16);
    let even_field = WaveField::from_fn(grid, 0.0, |x| c64((-x * x / 4.0).exp(), 0.0));
    let amps = analyze(&ctx(0.25, 0.75, Parity::Odd), &even_field, &sgrid).unwrap();
    assert!(amps.bound[0].norm() < 1e-13);
    let mass: f64 = amps
        .continuum
        .iter()
        .zip(&sgrid.weights)
        .map(|(z, w)| w * z.norm_sqr())
        .sum();
    assert!(mass.sqrt() < 1e-12, "odd-channel content {}", mass.sqrt());
}

#[test]
fn general_data_round_trip_single_soliton() {
    // M = 1 general path: sech bound state plus full-line continuum
    let data = DiscreteData::single(0.5, c64(1.0, 0.0)).unwrap();
    let grid = SpatialGrid::symmetric(60.0, 1024).unwrap();
    let c = BasisContext::General { data: data.clone() };
    let sgrid = SpectralGrid::full_line(4.0, 48, 16);
    let field = WaveField::from_fn(grid, 0.0, |x| {
        c64((-(x - 1.0) * (x - 1.0) / 4.0).exp(), 0.0)
    });
    let amps = analyze(&c, &field, &sgrid).unwrap();
    let back = synthesize(&c, &amps, &grid, 0.0).unwrap();
    let dx = grid.dx();
    let err = (dx
        * back
            .samples
            .iter()
            .zip(&field.samples)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>())
    .sqrt()
        / field.norm();
    assert!(err < 1e-5, "M=1 round trip error {err}");
    // the bound state is the normalized sech profile (up to phase)
    let basis = bound_basis(&data, &grid, 0.0).unwrap();
    let rho: f64 = 0.5;
    let mut worst: f64 = 0.0;
    let phase = basis.states[0][512] / c64(0.0, -rho.sqrt()); // value at x=0
    for (j, &x) in grid.points().iter().enumerate() {
        let expect = c64(0.0, -rho.sqrt() / (2.0 * rho * x).cosh()) * phase;
        worst = worst.max((basis.states[0][j] - expect).norm());
    }
    assert!(worst < 1e-9, "sech bound state error {worst}");
}

#[test]
fn gram_schmidt_transform_time_independent() {
    let p = TwoSolitonParams::new(0.25, 0.75, 0.0, 0.0).unwrap();
    let data = p.to_discrete_data().unwrap();
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let l = p.period();
    let b0 = bound_basis(&data, &grid, 0.0).unwrap();
    let b1 = bound_basis(&data, &grid, l / 3.0).unwrap();
    for k in 0..2 {
        for i in 0..2 {
            let dev = (b0.transform[k][i] - b1.transform[k][i]).norm();
            assert!(
                dev < 1e-8 * b0.transform[k][k].norm(),
                "GS transform drift {dev} at ({k},{i})"
            );
        }
    }
    // orthonormality of the result
    let dx = grid.dx();
    for i in 0..2 {
        for j in 0..2 {
            let q = inner(dx, &b0.states[i], &b0.states[j]);
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((q - c64(want, 0.0)).norm() < 1e-10);
        }
    }
}

#[test]
fn gram_schmidt_span_matches_parity_states() {
    // span{GS basis} = span{Ψ_b^(e), Ψ_b^(o)}: projecting the parity states
    // onto the GS pair loses nothing
    let p = TwoSolitonParams::new(0.25, 0.75, 0.0, 0.0).unwrap();
    let data = p.to_discrete_data().unwrap();
    let s = TwoSoliton::new(p);
    let grid = SpatialGrid::symmetric(80.0, 1024).unwrap();
    let basis = bound_basis(&data, &grid, 0.0).unwrap();
    let dx = grid.dx();
    for parity in [Parity::Even, Parity::Odd] {
        let f = bound_field(&s, parity, grid, 0.0);
        let mut resid = f.samples.clone();
        for q in &basis.states {
            let c = inner(dx, q, &f.samples);
            for (r, v) in resid.iter_mut().zip(q) {
                *r -= c * v;
            }
        }
        let loss = (dx * resid.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
        assert!(loss < 1e-8, "{parity:?} not in GS span: residual {loss}");
    }
}

#[test]
fn general_psi_d_matches_parity_combination() {
    // Ψ_d^{(e,o)} = (Ψ_d(λ) ± Ψ_d(-λ))/√2 for the two-soliton data
    let p = TwoSolitonParams::new(0.25, 0.75, 0.0, 0.0).unwrap();
    let data = p.to_discrete_data().unwrap();
    let s = TwoSoliton::new(p);
    for &(x, t, lam) in &[(0.7, 0.2, 0.8), (-2.0, 1.0, 1.7)] {
        let plus = psi_d(&data, x, t, lam).unwrap();
        let minus = psi_d(&data, x, t, -lam).unwrap();
        let even = (plus + minus) / 2.0f64.sqrt();
        let odd = (plus - minus) / 2.0f64.sqrt();
        assert!((even - s.psi_d(Parity::Even, x, t, lam)).norm() < 1e-9);
        assert!((odd - s.psi_d(Parity::Odd, x, t, lam)).norm() < 1e-9);
    }
}

fn probe_times(l: f64) -> Vec<f64> {
    // log-spaced through [5L, 50L]
    (0..24)
        .map(|i| 5.0 * l * (10.0f64).powf(i as f64 / 23.0))
        .collect()
}

#[test]
fn local_decay_odd_three_halves() {
    let grid = SpatialGrid::symmetric(40.0, 512).unwrap();
    let c = ctx(0.25, 0.75, Parity::Odd);
    let l = ts(0.25, 0.75).params.period();
    let sgrid = SpectralGrid::half_line_for_times(7.0, 50.0 * l, 3.5);
    let field = WaveField::from_fn(grid, 0.0, |x| c64(x * (-x * x / 4.0).exp(), 0.0));
    let times = probe_times(l);
    let norms = local_decay_probe(&c, &field, 3.5, &times, &sgrid).unwrap();
    let (exp, stderr) = fit_power_law(&times, &norms);
    assert!(
        (exp + 1.5).abs() < 0.2,
        "odd decay exponent {exp} ± {stderr} (want -1.5 ± 0.2)"
    );
}

#[test]
fn local_decay_even_one_half() {
    let grid = SpatialGrid::symmetric(40.0, 512).unwrap();
    let c = ctx(0.25, 0.75, Parity::Even);
    let l = ts(0.25, 0.75).params.period();
    let sgrid = SpectralGrid::half_line_for_times(7.0, 50.0 * l, 3.5);
    let field = WaveField::from_fn(grid, 0.0, |x| c64((-x * x / 4.0).exp(), 0.0));
    let times = probe_times(l);
    let norms = local_decay_probe(&c, &field, 3.5, &times, &sgrid).unwrap();
    let (exp, stderr) = fit_power_law(&times, &norms);
    assert!(
        (exp + 0.5).abs() < 0.2,
        "even decay exponent {exp} ± {stderr} (want -0.5 ± 0.2)"
    );
}

#[test]
fn local_decay_of_pure_bound_state_vanishes() {
    let grid = SpatialGrid::symmetric(40.0, 512).unwrap();
    let c = ctx(0.25, 0.75, Parity::Odd);
    let s = ts(0.25, 0.75);
    let l = s.params.period();
    let sgrid = SpectralGrid::half_line_for_times(7.0, 10.0 * l, 3.5);
    let field = bound_field(&s, Parity::Odd, grid, 0.0);
    let times = [5.0 * l, 8.0 * l];
    let norms = local_decay_probe(&c, &field, 3.5, &times, &sgrid).unwrap();
    for n in norms {
        assert!(n < 1e-6, "bound state should project away, got {n}");
    }
}

#[test]
fn probe_rejects_clipped_spectrum() {
    let grid = SpatialGrid::symmetric(40.0, 512).unwrap();
    let c = ctx(0.25, 0.75, Parity::Even);
    // λ_max far too low for a sharp field
    let sgrid = SpectralGrid::half_line(0.9, 12, 16);
    let field = WaveField::from_fn(grid, 0.0, |x| c64((-x * x * 4.0).exp(), 0.0));
    let err = local_decay_probe(&c, &field, 3.5, &[1.0], &sgrid);
    assert!(matches!(
        err,
        Err(breather_core::basis::SpectralError::InsufficientLambdaResolution { .. })
    ));
}
