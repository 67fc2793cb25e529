//! Coupled-mode data for a perturbed two-soliton potential: the matrix
//! elements M(t), N⁽ᵖ⁾(t,λ), K⁽ᵖ⁾(t,η,λ), their temporal Fourier
//! coefficients, and the derived decay rate Γ, Lamb shift Λ, and mean shift
//! M̄ of the bound-state amplitude.
//!
//! Conventions: within one parity sector, with β_b the bound Floquet
//! exponent and L the period,
//!
//! ```text
//!   N⁽ᵖ⁾(t,λ) = ⟨Ψ_b(·,t), W(·,t) Ψ_d(·,t,λ)⟩ e^{2i(λ²+β_b)t}
//!             = Σ_k N_k(λ) e^{2πikt/L}
//!   σ_n = πn/L - β_b,        n₀ = min{n : σ_n > 0}
//!   Γ   = (π/4) Σ_{n≥n₀} |N_n(√σ_n)|² / √σ_n
//!   Λ   = Σ_n  (P.V.) ∫₀^∞ |N_n(λ)|² dλ / (2(λ² - σ_n))
//! ```
//!
//! The Λ sum runs over all harmonics; the integral needs a principal value
//! only where σ_n > 0. The phases here make the bound amplitude behave as
//! `A_b(t) ≈ A_b(0) e^{2iβ_b t} e^{-Γ|t|} e^{iΛt} e^{-i∫₀ᵗ M}`.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::basis::SpectralGrid;
use crate::fftutil::fourier_coefficients;
use crate::grid::SpatialGrid;
use crate::par;
use crate::quad::{adaptive_quad_c, Rule};
use crate::two_soliton::{Parity, TwoSoliton, XCache};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("spatial quadrature tail holds {tail:.3e} of the integrand mass; widen the x grid")]
    QuadratureDivergence { tail: f64 },
    #[error("temporal sampling is aliased: top-octave Fourier energy fraction {fraction:.3e}")]
    AliasingSuspected { fraction: f64 },
    #[error("need at least 4·k_max time samples, got {n_t} for k_max={k_max}")]
    FourierSampling { n_t: usize, k_max: usize },
    #[error("diagonal element M(t) acquired imaginary part {imbalance:.3e}")]
    NonRealDiagonal { imbalance: f64 },
    #[error(
        "parametric zero-energy resonance: σ_{n} = {sigma:.3e} lies inside the guard floor; \
         the even-sector Γ/Λ formulas are invalid here (drop the zero term to proceed)"
    )]
    NearZeroResonance { n: i64, sigma: f64 },
    #[error("on-resonance Fourier coefficient disagrees with adaptive quadrature: rel {rel:.3e}")]
    OracleMismatch { rel: f64 },
}

/// Even-parity guard: a resonance σ_n below this floor is treated as a
/// parametric zero-energy resonance.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// A time-periodic, even-in-x perturbation of the potential.
#[derive(Clone)]
pub enum Perturbation {
    /// W = (1+ε) V0(x/√(1+ε), t) - V0(x, t): frequency detuning of the
    /// waveguide family, exact at finite ε.
    Detuning { epsilon: f64 },
    /// The ε→0 shape of the detuning family, W₁ = (1 - x/2 ∂_x) V0.
    DetuningLeading,
    /// ε² coefficient of the detuning family, W₂ = (x² ∂_x² V0 - x ∂_x V0)/8.
    DetuningSecond,
    /// W ≡ 0.
    Zero,
    /// Arbitrary sampler; must be real, even in x, L-periodic in t.
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Perturbation {
    pub fn description(&self) -> String {
        match self {
            Perturbation::Detuning { epsilon } => format!("detuning eps={epsilon}"),
            Perturbation::DetuningLeading => "detuning leading order".into(),
            Perturbation::DetuningSecond => "detuning second order".into(),
            Perturbation::Zero => "zero".into(),
            Perturbation::Custom(_) => "custom".into(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Perturbation::Zero)
    }
}

/// Exact detuned difference W(x,t;ε) = (1+ε)V0(x/√(1+ε),t) - V0(x,t).
pub fn detuning_w(ts: &TwoSoliton, epsilon: f64, x: f64, t: f64) -> f64 {
    assert!(epsilon > -1.0, "detuning needs ε > -1");
    if epsilon == 0.0 {
        return 0.0;
    }
    let scale = (1.0 + epsilon).sqrt();
    (1.0 + epsilon) * ts.v0(x / scale, t) - ts.v0(x, t)
}

/// Leading-order detuning shape W₁ = (1 - x/2 ∂_x) V0 (dispersionless case).
pub fn detuning_w1(ts: &TwoSoliton, x: f64, t: f64) -> f64 {
    let h = 1e-3 / ts.params.rho2.max(0.5);
    let d1 = (8.0 * (ts.v0(x + h, t) - ts.v0(x - h, t))
        - (ts.v0(x + 2.0 * h, t) - ts.v0(x - 2.0 * h, t)))
        / (12.0 * h);
    ts.v0(x, t) - 0.5 * x * d1
}

/// Second-order detuning shape W₂ = (x² V0'' - x V0')/8.
pub fn detuning_w2(ts: &TwoSoliton, x: f64, t: f64) -> f64 {
    let h = 1e-3 / ts.params.rho2.max(0.5);
    let vm2 = ts.v0(x - 2.0 * h, t);
    let vm1 = ts.v0(x - h, t);
    let v0 = ts.v0(x, t);
    let vp1 = ts.v0(x + h, t);
    let vp2 = ts.v0(x + 2.0 * h, t);
    let d1 = (8.0 * (vp1 - vm1) - (vp2 - vm2)) / (12.0 * h);
    let d2 = (-30.0 * v0 + 16.0 * (vp1 + vm1) - (vp2 + vm2)) / (12.0 * h * h);
    (x * x * d2 - x * d1) / 8.0
}

/// Grid/sampling controls for the coupled-mode assembly.
#[derive(Debug, Clone)]
pub struct CouplingConfig {
    /// spatial quadrature grid (should cover the potential support widely)
    pub x_grid: SpatialGrid,
    /// uniform time samples per period (power of two, ≥ 4·k_max)
    pub n_time: usize,
    /// harmonics |k| ≤ k_max retained in Fourier data
    pub k_max: usize,
    /// resonant harmonics beyond n₀ examined for Γ
    pub n_extend: usize,
    /// λ truncation; None picks max(4ρ₂, 1.5√σ_{n₀+n_extend})
    pub lambda_max: Option<f64>,
    /// minimum number of λ panels between resonance splits
    pub n_panels: usize,
    pub nodes_per_panel: usize,
}

impl CouplingConfig {
    pub fn with_grid(x_grid: SpatialGrid) -> Self {
        CouplingConfig {
            x_grid,
            n_time: 256,
            k_max: 32,
            n_extend: 16,
            lambda_max: None,
            n_panels: 24,
            nodes_per_panel: 16,
        }
    }

    /// Doubled resolution in every controllable direction, for the
    /// grid-independence gate.
    pub fn refined(&self) -> Self {
        let g = self.x_grid;
        CouplingConfig {
            x_grid: SpatialGrid::new(g.x_min, g.x_max, g.n_points * 2).expect("refinable grid"),
            n_time: self.n_time * 2,
            k_max: self.k_max * 2,
            n_extend: self.n_extend + 4,
            lambda_max: self.lambda_max,
            n_panels: self.n_panels * 2,
            nodes_per_panel: self.nodes_per_panel,
        }
    }
}

/// Matrix elements of one perturbed parity sector, sampled over a period,
/// plus their Fourier data.
pub struct CouplingData {
    pub parity: Parity,
    pub period: f64,
    pub beta_b: f64,
    /// M(t_i), real
    pub m_series: Vec<f64>,
    /// Fourier coefficients of M in FFT index order
    pub m_coeffs: Vec<Complex64>,
    /// N⁽ᵖ⁾(t_i, λ_j)
    pub n_series: Vec<Vec<Complex64>>,
    /// N_k(λ_j), outer index k in FFT order
    pub n_coeffs: Vec<Vec<Complex64>>,
    pub sgrid: SpectralGrid,
    pub k_max: usize,
}

impl CouplingData {
    pub fn mbar(&self) -> f64 {
        self.m_coeffs[0].re
    }

    /// N_k(λ_j) by harmonic index (runs over the FFT ring).
    pub fn n_coeff(&self, k: i64, j: usize) -> Complex64 {
        let n_t = self.n_coeffs.len() as i64;
        self.n_coeffs[(k.rem_euclid(n_t)) as usize][j]
    }

    pub fn m_coeff(&self, k: i64) -> Complex64 {
        let n_t = self.m_coeffs.len() as i64;
        self.m_coeffs[(k.rem_euclid(n_t)) as usize]
    }

    /// C = ∫₀^∞ |N⁽ᵖ⁾(0,λ)|² dλ, the short-time decay curvature:
    /// |A_b(t)|² = |A_b(0)|²(1 - C t² + O(t³)).
    pub fn small_time_coefficient(&self) -> f64 {
        self.n_series[0]
            .iter()
            .zip(&self.sgrid.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum()
    }
}

/// Evaluates matrix elements over cached period samples; the expensive
/// object behind both the bulk assembly and the fresh on-resonance values.
pub struct CouplingEngine {
    pub ts: TwoSoliton,
    pub w: Perturbation,
    pub parity: Parity,
    pub cfg: CouplingConfig,
    xs: Vec<f64>,
    dx: f64,
    xcache: XCache,
    w_eval: WEvaluator,
    /// per time sample: g = conj(Ψ_b)·W·dx, and g·a0, g·a1
    g_rows: Vec<Vec<Complex64>>,
    ga0_rows: Vec<Vec<Complex64>>,
    ga1_rows: Vec<Vec<Complex64>>,
    m_series: Vec<f64>,
    w_rows: Vec<Vec<f64>>,
}

/// Row evaluator for W(·, t) with the x-dependent hyperbolics prebuilt once.
enum WEvaluator {
    Zero,
    /// exact detuning: caches for x/√(1+ε) and x
    Detuning { epsilon: f64, plain: XCache, scaled: XCache },
    /// five-point stencil caches at x, x±h, x±2h for the ε-expansion shapes
    Stencil { order: StencilOrder, h: f64, caches: [XCache; 5] },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

#[derive(Clone, Copy)]
enum StencilOrder {
    Leading,
    Second,
}

impl WEvaluator {
    fn build(ts: &TwoSoliton, w: &Perturbation, xs: &[f64]) -> WEvaluator {
        match w {
            Perturbation::Zero => WEvaluator::Zero,
            Perturbation::Custom(f) => WEvaluator::Custom(f.clone()),
            Perturbation::Detuning { epsilon } => {
                let scale = (1.0 + epsilon).sqrt();
                let scaled_pts: Vec<f64> = xs.iter().map(|&x| x / scale).collect();
                WEvaluator::Detuning {
                    epsilon: *epsilon,
                    plain: ts.x_cache(xs),
                    scaled: ts.x_cache(&scaled_pts),
                }
            }
            Perturbation::DetuningLeading | Perturbation::DetuningSecond => {
                let order = if matches!(w, Perturbation::DetuningLeading) {
                    StencilOrder::Leading
                } else {
                    StencilOrder::Second
                };
                let h = 1e-3 / ts.params.rho2.max(0.5);
                let offsets = [-2.0 * h, -h, 0.0, h, 2.0 * h];
                let caches = offsets.map(|o| {
                    let pts: Vec<f64> = xs.iter().map(|&x| x + o).collect();
                    ts.x_cache(&pts)
                });
                WEvaluator::Stencil { order, h, caches }
            }
        }
    }

    fn row(&self, ts: &TwoSoliton, xs: &[f64], t: f64) -> Vec<f64> {
        match self {
            WEvaluator::Zero => vec![0.0; xs.len()],
            WEvaluator::Custom(f) => xs.iter().map(|&x| f(x, t)).collect(),
            WEvaluator::Detuning { epsilon, plain, scaled } => {
                let n = xs.len();
                let mut vp = vec![0.0; n];
                let mut vs = vec![0.0; n];
                ts.v0_row(plain, t, &mut vp);
                ts.v0_row(scaled, t, &mut vs);
                (0..n).map(|i| (1.0 + epsilon) * vs[i] - vp[i]).collect()
            }
            WEvaluator::Stencil { order, h, caches } => {
                let n = xs.len();
                let mut rows = [(); 5].map(|_| vec![0.0; n]);
                for (r, c) in rows.iter_mut().zip(caches.iter()) {
                    ts.v0_row(c, t, r);
                }
                (0..n)
                    .map(|i| {
                        let d1 = (8.0 * (rows[3][i] - rows[1][i]) - (rows[4][i] - rows[0][i]))
                            / (12.0 * h);
                        match order {
                            StencilOrder::Leading => rows[2][i] - 0.5 * xs[i] * d1,
                            StencilOrder::Second => {
                                let d2 = (-30.0 * rows[2][i]
                                    + 16.0 * (rows[3][i] + rows[1][i])
                                    - (rows[4][i] + rows[0][i]))
                                    / (12.0 * h * h);
                                (xs[i] * xs[i] * d2 - xs[i] * d1) / 8.0
                            }
                        }
                    })
                    .collect()
            }
        }
    }
}

struct RowData {
    g: Vec<Complex64>,
    ga0: Vec<Complex64>,
    ga1: Vec<Complex64>,
    m: f64,
    m_imbalance: f64,
    w_row: Vec<f64>,
}

impl CouplingEngine {
    pub fn new(
        ts: TwoSoliton,
        w: Perturbation,
        parity: Parity,
        cfg: CouplingConfig,
    ) -> Result<Self, CouplingError> {
        if cfg.n_time < 4 * cfg.k_max {
            return Err(CouplingError::FourierSampling { n_t: cfg.n_time, k_max: cfg.k_max });
        }
        let xs = cfg.x_grid.points();
        let dx = cfg.x_grid.dx();
        let xcache = ts.x_cache(&xs);
        let w_eval = WEvaluator::build(&ts, &w, &xs);
        let period = ts.params.period();
        let n_t = cfg.n_time;
        let rows: Vec<RowData> = par::map_indexed(n_t, |i| {
            let t = period * i as f64 / n_t as f64;
            Self::row_at(&ts, &w_eval, parity, &xs, dx, &xcache, t)
        });
        let worst_imbalance = rows.iter().map(|r| r.m_imbalance).fold(0.0, f64::max);
        if worst_imbalance > 1e-10 {
            return Err(CouplingError::NonRealDiagonal { imbalance: worst_imbalance });
        }
        let engine = CouplingEngine {
            ts,
            w,
            parity,
            cfg,
            xs,
            dx,
            xcache,
            w_eval,
            g_rows: rows.iter().map(|r| r.g.clone()).collect(),
            ga0_rows: rows.iter().map(|r| r.ga0.clone()).collect(),
            ga1_rows: rows.iter().map(|r| r.ga1.clone()).collect(),
            m_series: rows.iter().map(|r| r.m).collect(),
            w_rows: rows.iter().map(|r| r.w_row.clone()).collect(),
        };
        engine.check_tail()?;
        Ok(engine)
    }

    fn row_at(
        ts: &TwoSoliton,
        w_eval: &WEvaluator,
        parity: Parity,
        xs: &[f64],
        dx: f64,
        xcache: &XCache,
        t: f64,
    ) -> RowData {
        let fields = ts.fields_row(xcache, t);
        let w_row = w_eval.row(ts, xs, t);
        let n = xs.len();
        let mut g = Vec::with_capacity(n);
        let mut ga0 = Vec::with_capacity(n);
        let mut ga1 = Vec::with_capacity(n);
        let mut m_acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let pb = ts.psi_b_from_fields(parity, &fields[i]);
            let gi = pb.conj() * w_row[i] * dx;
            m_acc += gi * pb;
            ga0.push(gi * fields[i].a0);
            ga1.push(gi * fields[i].a1);
            g.push(gi);
        }
        let m_scale = m_acc.norm().max(1e-30);
        RowData {
            g,
            ga0,
            ga1,
            m: m_acc.re,
            m_imbalance: m_acc.im.abs() / m_scale.max(1.0),
            w_row,
        }
    }

    fn check_tail(&self) -> Result<(), CouplingError> {
        // mass of |g| in the outer 5% of nodes vs total, worst over samples
        let n = self.xs.len();
        let edge = (n / 20).max(1);
        let mut worst: f64 = 0.0;
        for g in &self.g_rows {
            let total: f64 = g.iter().map(|z| z.norm()).sum();
            if total == 0.0 {
                continue;
            }
            let tail: f64 = g[..edge].iter().chain(&g[n - edge..]).map(|z| z.norm()).sum();
            worst = worst.max(tail / total);
        }
        if worst > 1e-8 {
            return Err(CouplingError::QuadratureDivergence { tail: worst });
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.ts.params.period()
    }

    pub fn beta_b(&self) -> f64 {
        self.ts.params.floquet_exponent()
    }

    /// N⁽ᵖ⁾(t_i, λ) across the cached time samples.
    ///
    /// The e^{±2iλ²t} phases of Ψ_d and of the (p)-dressing cancel exactly,
    /// so only e^{2iβ_b t} remains; the integrand reduces to three real-trig
    /// dot products against the cached g-rows.
    pub fn n_series_at(&self, lambda: f64) -> Vec<Complex64> {
        let (cosl, sinl) = self.trig_row(lambda);
        let n_t = self.g_rows.len();
        (0..n_t).map(|i| self.n_value(i, lambda, &cosl, &sinl)).collect()
    }

    fn trig_row(&self, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut c = Vec::with_capacity(self.xs.len());
        let mut s = Vec::with_capacity(self.xs.len());
        for &x in &self.xs {
            let (sv, cv) = (2.0 * lambda * x).sin_cos();
            c.push(cv);
            s.push(sv);
        }
        (c, s)
    }

    fn n_value(&self, i: usize, lambda: f64, cosl: &[f64], sinl: &[f64]) -> Complex64 {
        let p = &self.ts.params;
        let l2 = lambda * lambda;
        let nrm = 1.0
            / (2.0 * std::f64::consts::PI * (l2 + p.rho1 * p.rho1) * (l2 + p.rho2 * p.rho2))
                .sqrt();
        let g = &self.g_rows[i];
        let ga0 = &self.ga0_rows[i];
        let ga1 = &self.ga1_rows[i];
        let mut dot_gc = Complex64::new(0.0, 0.0);
        let mut dot_gs = Complex64::new(0.0, 0.0);
        let mut dot_a0 = Complex64::new(0.0, 0.0);
        let mut dot_a1 = Complex64::new(0.0, 0.0);
        match self.parity {
            Parity::Even => {
                for j in 0..g.len() {
                    dot_gc += g[j] * cosl[j];
                    dot_a0 += ga0[j] * cosl[j];
                    dot_a1 += ga1[j] * sinl[j];
                }
            }
            Parity::Odd => {
                for j in 0..g.len() {
                    dot_a1 += ga1[j] * cosl[j];
                    dot_gs += g[j] * sinl[j];
                    dot_a0 += ga0[j] * sinl[j];
                }
            }
        }
        let body = match self.parity {
            Parity::Even => {
                (dot_gc * l2 + dot_a0) * 2.0 - Complex64::i() * dot_a1 * (2.0 * lambda)
            }
            Parity::Odd => {
                dot_a1 * (2.0 * lambda) - Complex64::i() * (dot_gs * l2 + dot_a0) * 2.0
            }
        };
        let t = self.period() * i as f64 / self.g_rows.len() as f64;
        body * Complex64::from_polar(nrm, 2.0 * self.beta_b() * t)
    }

    /// N⁽ᵖ⁾(t, λ) at arbitrary t by a fresh spatial quadrature.
    pub fn n_fresh(&self, t: f64, lambda: f64) -> Complex64 {
        let fields = self.ts.fields_row(&self.xcache, t);
        let w_row = self.w_eval.row(&self.ts, &self.xs, t);
        let p = &self.ts.params;
        let l2 = lambda * lambda;
        let nrm = 1.0
            / (2.0 * std::f64::consts::PI * (l2 + p.rho1 * p.rho1) * (l2 + p.rho2 * p.rho2))
                .sqrt();
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &x) in self.xs.iter().enumerate() {
            let pb = self.ts.psi_b_from_fields(self.parity, &fields[j]);
            let gi = pb.conj() * w_row[j];
            let (sv, cv) = (2.0 * lambda * x).sin_cos();
            let body = match self.parity {
                Parity::Even => {
                    (fields[j].a0 + l2) * (2.0 * cv) - Complex64::i() * fields[j].a1 * (2.0 * lambda * sv)
                }
                Parity::Odd => {
                    fields[j].a1 * (2.0 * lambda * cv) - Complex64::i() * (fields[j].a0 + l2) * (2.0 * sv)
                }
            };
            acc += gi * body;
        }
        acc * self.dx * Complex64::from_polar(nrm, 2.0 * self.beta_b() * t)
    }

    /// n-th Fourier coefficient of N⁽ᵖ⁾(·,λ) by adaptive time quadrature,
    /// independent of the uniform sampling used by the FFT route.
    pub fn n_coeff_adaptive(&self, lambda: f64, n: i64, tol: f64) -> Complex64 {
        let l = self.period();
        let f = |t: f64| {
            self.n_fresh(t, lambda)
                * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * n as f64 * t / l)
        };
        adaptive_quad_c(f, 0.0, l, tol) / l
    }

    /// n-th Fourier coefficient at λ from the cached uniform samples (FFT route).
    pub fn n_coeff_fft(&self, lambda: f64, n: i64) -> Complex64 {
        let series = self.n_series_at(lambda);
        let coeffs = fourier_coefficients(&series);
        let n_t = coeffs.len() as i64;
        coeffs[n.rem_euclid(n_t) as usize]
    }

    /// Resonance grid value σ_n = πn/L - β_b.
    pub fn sigma(&self, n: i64) -> f64 {
        std::f64::consts::PI * n as f64 / self.period() - self.beta_b()
    }

    /// Smallest n with σ_n > floor.
    pub fn n0(&self, floor: f64) -> i64 {
        let mut n = (self.beta_b() * self.period() / std::f64::consts::PI).floor() as i64;
        while self.sigma(n) <= floor {
            n += 1;
        }
        n
    }

    pub fn auto_lambda_max(&self) -> f64 {
        match self.cfg.lambda_max {
            Some(l) => l,
            None => {
                let n_hi = self.n0(0.0) + self.cfg.n_extend as i64;
                (4.0 * self.ts.params.rho2).max(1.5 * self.sigma(n_hi).max(0.0).sqrt())
            }
        }
    }

    /// λ quadrature with panel boundaries on every resonance √σ_n, so the
    /// principal-value integrands stay analytic panel by panel.
    pub fn resonance_grid(&self) -> SpectralGrid {
        let lam_max = self.auto_lambda_max();
        let mut breaks = vec![0.0];
        let mut n = self.n0(0.0);
        loop {
            let s = self.sigma(n);
            if s <= 0.0 {
                n += 1;
                continue;
            }
            let l = s.sqrt();
            if l >= lam_max {
                break;
            }
            breaks.push(l);
            n += 1;
        }
        breaks.push(lam_max);
        // refine long stretches so at least cfg.n_panels panels span [0, λmax];
        // the first segment is graded toward 0 where the continuum
        // normalization varies on the scale of ρ₁
        let target = lam_max / self.cfg.n_panels as f64;
        let mut refined = vec![breaks[0]];
        for (seg, w) in breaks.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let k = ((b - a) / target).ceil().max(1.0) as usize;
            for i in 1..=k {
                let u = i as f64 / k as f64;
                let u = if seg == 0 { u.powf(1.5) } else { u };
                refined.push(a + (b - a) * u);
            }
        }
        let rule = Rule::composite(&refined, self.cfg.nodes_per_panel);
        SpectralGrid {
            nodes: rule.nodes,
            weights: rule.weights,
            lambda_max: lam_max,
            full_line: false,
        }
    }

    /// Bulk assembly: series and Fourier data over the resonance-aware grid.
    pub fn assemble(&self) -> Result<CouplingData, CouplingError> {
        let sgrid = self.resonance_grid();
        let n_t = self.g_rows.len();
        let columns: Vec<Vec<Complex64>> =
            par::map_slice(&sgrid.nodes, |&lam| self.n_series_at(lam));
        // reshape to [time][lambda]
        let mut n_series = vec![vec![Complex64::new(0.0, 0.0); sgrid.len()]; n_t];
        for (j, col) in columns.iter().enumerate() {
            for i in 0..n_t {
                n_series[i][j] = col[i];
            }
        }
        let mut n_coeffs = vec![vec![Complex64::new(0.0, 0.0); sgrid.len()]; n_t];
        for (j, col) in columns.iter().enumerate() {
            let c = fourier_coefficients(col);
            for i in 0..n_t {
                n_coeffs[i][j] = c[i];
            }
        }
        let m_series = self.m_series.clone();
        let m_coeffs = fourier_coefficients(
            &m_series.iter().map(|&m| Complex64::new(m, 0.0)).collect::<Vec<_>>(),
        );
        // reality of M: M_{-k} = M_k*
        let mscale = m_coeffs.iter().map(|c| c.norm()).fold(1e-300, f64::max);
        for k in 1..n_t / 2 {
            let dev = (m_coeffs[n_t - k] - m_coeffs[k].conj()).norm();
            if dev > 1e-12 * mscale.max(1.0) {
                return Err(CouplingError::NonRealDiagonal { imbalance: dev });
            }
        }
        // aliasing: energy in the top octave of retained harmonics
        let alias = alias_fraction(&m_coeffs).max(
            (0..sgrid.len())
                .map(|j| {
                    let col: Vec<Complex64> = (0..n_t).map(|i| n_coeffs[i][j]).collect();
                    alias_fraction(&col)
                })
                .fold(0.0, f64::max),
        );
        if alias > 1e-10 {
            return Err(CouplingError::AliasingSuspected { fraction: alias });
        }
        Ok(CouplingData {
            parity: self.parity,
            period: self.period(),
            beta_b: self.beta_b(),
            m_series,
            m_coeffs,
            n_series,
            n_coeffs,
            sgrid,
            k_max: self.cfg.k_max,
        })
    }

    /// K⁽ᵖ⁾(t, η_i, λ_j) at one time, on sample node pairs.
    pub fn kernel_at(&self, t: f64, etas: &[f64], lams: &[f64]) -> Vec<Vec<Complex64>> {
        let fields = self.ts.fields_row(&self.xcache, t);
        let w_row = self.w_eval.row(&self.ts, &self.xs, t);
        let body = |lam: f64| -> Vec<Complex64> {
            let p = &self.ts.params;
            let l2 = lam * lam;
            let nrm = 1.0
                / (2.0 * std::f64::consts::PI * (l2 + p.rho1 * p.rho1) * (l2 + p.rho2 * p.rho2))
                    .sqrt();
            self.xs
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let (sv, cv) = (2.0 * lam * x).sin_cos();
                    let b = match self.parity {
                        Parity::Even => {
                            (fields[j].a0 + l2) * (2.0 * cv)
                                - Complex64::i() * fields[j].a1 * (2.0 * lam * sv)
                        }
                        Parity::Odd => {
                            fields[j].a1 * (2.0 * lam * cv)
                                - Complex64::i() * (fields[j].a0 + l2) * (2.0 * sv)
                        }
                    };
                    b * nrm
                })
                .collect()
        };
        let eta_rows: Vec<Vec<Complex64>> = etas.iter().map(|&e| body(e)).collect();
        let lam_rows: Vec<Vec<Complex64>> = lams.iter().map(|&l| body(l)).collect();
        eta_rows
            .iter()
            .map(|er| {
                lam_rows
                    .iter()
                    .map(|lr| {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..self.xs.len() {
                            acc += er[j].conj() * w_row[j] * lr[j];
                        }
                        acc * self.dx
                    })
                    .collect()
            })
            .collect()
    }

    /// M(t) by fresh quadrature (diagnostics/tests).
    pub fn m_fresh(&self, t: f64) -> f64 {
        let fields = self.ts.fields_row(&self.xcache, t);
        let w_row = self.w_eval.row(&self.ts, &self.xs, t);
        let mut acc = 0.0;
        for (j, f) in fields.iter().enumerate() {
            acc += self.ts.psi_b_from_fields(self.parity, f).norm_sqr() * w_row[j];
        }
        acc * self.dx
    }

    pub fn m_series(&self) -> &[f64] {
        &self.m_series
    }

    pub fn w_rows(&self) -> &[Vec<f64>] {
        &self.w_rows
    }
}

fn alias_fraction(coeffs: &[Complex64]) -> f64 {
    let n = coeffs.len();
    let total: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    // top octave of the symmetric spectrum: |k| in [n/4, n/2]
    let top: f64 = (n / 4..=n / 2)
        .flat_map(|k| [k, n - k.min(n - 1)])
        .map(|k| coeffs[k.min(n - 1)].norm_sqr())
        .sum();
    top / total
}

/// Standalone Fourier analysis of one periodic sample set with the sampling
/// and aliasing guards; returns coefficients for k in [-k_max, k_max]
/// (index offset k_max).
pub fn fourier_coeffs(
    samples: &[Complex64],
    k_max: usize,
) -> Result<Vec<Complex64>, CouplingError> {
    let n_t = samples.len();
    if n_t < 4 * k_max {
        return Err(CouplingError::FourierSampling { n_t, k_max });
    }
    let c = fourier_coefficients(samples);
    let frac = alias_fraction(&c);
    if frac > 1e-10 {
        return Err(CouplingError::AliasingSuspected { fraction: frac });
    }
    let mut out = Vec::with_capacity(2 * k_max + 1);
    for k in -(k_max as i64)..=(k_max as i64) {
        out.push(c[k.rem_euclid(n_t as i64) as usize]);
    }
    Ok(out)
}

/// Real-input variant: additionally checks and enforces c_{-k} = c_k*.
pub fn fourier_coeffs_real(samples: &[f64], k_max: usize) -> Result<Vec<Complex64>, CouplingError> {
    let cx: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut out = fourier_coeffs(&cx, k_max)?;
    let scale = out.iter().map(|c| c.norm()).fold(1e-300, f64::max);
    for k in 1..=k_max {
        let dev = (out[k_max - k] - out[k_max + k].conj()).norm();
        if dev > 1e-12 * scale.max(1.0) {
            return Err(CouplingError::NonRealDiagonal { imbalance: dev });
        }
        let sym = 0.5 * (out[k_max + k] + out[k_max - k].conj());
        out[k_max + k] = sym;
        out[k_max - k] = sym.conj();
    }
    out[k_max] = Complex64::new(out[k_max].re, 0.0);
    Ok(out)
}

/// One retained resonance and its contribution to Γ.
#[derive(Debug, Clone)]
pub struct Resonance {
    pub n: i64,
    pub sigma: f64,
    /// √σ_n (0 when σ_n ≤ 0 guard-dropped)
    pub lambda: f64,
    /// |N_n(√σ_n)| from the adaptive route
    pub n_abs: f64,
    /// (π/4)|N_n|²/√σ_n
    pub contribution: f64,
    /// relative disagreement between FFT and adaptive coefficient routes
    pub oracle_rel: f64,
    pub dropped: bool,
}

/// Γ, Λ, M̄ and the resonance table for one perturbed sector.
#[derive(Debug, Clone)]
pub struct DecayPrediction {
    pub parity: Parity,
    pub period: f64,
    pub beta_b: f64,
    pub mbar: f64,
    pub gamma: f64,
    pub lambda_shift: f64,
    pub small_time_c: f64,
    pub n0: i64,
    pub resonances: Vec<Resonance>,
}

#[derive(Debug, Clone, Copy)]
pub struct PredictOptions {
    /// drop any σ_n inside the guard floor instead of erroring (the
    /// "renormalized" even-sector prediction)
    pub drop_zero_resonance: bool,
    pub sigma_floor: f64,
    /// relative agreement demanded between coefficient routes
    pub oracle_gate: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions { drop_zero_resonance: false, sigma_floor: SIGMA_FLOOR, oracle_gate: 1e-6 }
    }
}

/// Golden-rule decay rate from on-resonance coefficients.
///
/// Terms are accumulated from n₀ upward until they fall below 1e-14 of the
/// running sum. Odd sectors pass through σ_n = 0 with a zero contribution
/// (the numerator vanishes quadratically); even sectors error out unless
/// the drop toggle is set.
pub fn golden_rule(
    engine: &CouplingEngine,
    opts: &PredictOptions,
) -> Result<(f64, Vec<Resonance>), CouplingError> {
    if engine.w.is_zero() {
        return Ok((0.0, Vec::new()));
    }
    let mut resonances = Vec::new();
    let mut gamma = 0.0;
    // walk from the first nonnegative resonance upward
    let mut n = engine.n0(0.0);
    if engine.sigma(n - 1).abs() <= opts.sigma_floor {
        n -= 1; // include the guarded zero resonance in the table
    }
    let n_stop = engine.n0(0.0) + engine.cfg.n_extend as i64;
    let mut small_run = 0;
    while n <= n_stop {
        let sigma = engine.sigma(n);
        if sigma.abs() <= opts.sigma_floor {
            match engine.parity {
                Parity::Even if !opts.drop_zero_resonance => {
                    return Err(CouplingError::NearZeroResonance { n, sigma });
                }
                _ => {
                    // odd sector: N_n(λ) ~ λ near zero, so |N_n|²/√σ → 0;
                    // even sector with the toggle: term dropped by request
                    resonances.push(Resonance {
                        n,
                        sigma,
                        lambda: 0.0,
                        n_abs: 0.0,
                        contribution: 0.0,
                        oracle_rel: 0.0,
                        dropped: true,
                    });
                    n += 1;
                    continue;
                }
            }
        }
        let lam = sigma.sqrt();
        let adaptive = engine.n_coeff_adaptive(lam, n, 1e-13);
        let fft = engine.n_coeff_fft(lam, n);
        let scale = adaptive.norm().max(fft.norm());
        let oracle_rel =
            if scale > 0.0 { (adaptive - fft).norm() / scale } else { 0.0 };
        let contribution = std::f64::consts::FRAC_PI_4 * adaptive.norm_sqr() / lam;
        if contribution > 1e-10 * (gamma + contribution) && oracle_rel > opts.oracle_gate {
            return Err(CouplingError::OracleMismatch { rel: oracle_rel });
        }
        gamma += contribution;
        resonances.push(Resonance {
            n,
            sigma,
            lambda: lam,
            n_abs: adaptive.norm(),
            contribution,
            oracle_rel,
            dropped: false,
        });
        if contribution < 1e-14 * gamma.max(1e-300) {
            small_run += 1;
            if small_run >= 2 {
                break;
            }
        } else {
            small_run = 0;
        }
        n += 1;
    }
    Ok((gamma, resonances))
}

/// Lamb shift: Λ = Σ_n (P.V.) ∫ |N_n(λ)|² dλ / (2(λ²-σ_n)).
///
/// In λ the n < n₀ integrals are proper (σ_n < 0, and at σ_n = 0 the odd
/// numerator supplies λ²); resonant integrals are regularized by
/// subtracting the on-resonance value, with the explicit log remainder.
pub fn lamb_shift(
    engine: &CouplingEngine,
    data: &CouplingData,
    resonances: &[Resonance],
    opts: &PredictOptions,
) -> Result<f64, CouplingError> {
    if engine.w.is_zero() {
        return Ok(0.0);
    }
    let sgrid = &data.sgrid;
    let lam_max = sgrid.lambda_max;
    let n_lo = engine.n0(0.0) - data.k_max as i64;
    let n_hi = engine.n0(0.0) + engine.cfg.n_extend as i64;
    let mut shift_terms: Vec<(i64, f64)> = Vec::new();
    let resonant: std::collections::HashMap<i64, &Resonance> =
        resonances.iter().map(|r| (r.n, r)).collect();
    let total_mass: f64 = (n_lo..=n_hi)
        .map(|n| {
            (0..sgrid.len())
                .map(|j| sgrid.weights[j] * data.n_coeff(n, j).norm_sqr())
                .sum::<f64>()
        })
        .sum();
    for n in n_lo..=n_hi {
        let sigma = engine.sigma(n);
        let mass: f64 = (0..sgrid.len())
            .map(|j| sgrid.weights[j] * data.n_coeff(n, j).norm_sqr())
            .sum();
        if mass < 1e-15 * total_mass {
            continue;
        }
        let term = if sigma.abs() <= opts.sigma_floor {
            match engine.parity {
                Parity::Even if !opts.drop_zero_resonance => {
                    return Err(CouplingError::NearZeroResonance { n, sigma });
                }
                Parity::Even => continue, // dropped with the toggle
                Parity::Odd => {
                    // |N_n|² ~ λ² cancels the pole: proper integral
                    (0..sgrid.len())
                        .map(|j| {
                            let l = sgrid.nodes[j];
                            sgrid.weights[j] * data.n_coeff(n, j).norm_sqr()
                                / (2.0 * (l * l - sigma))
                        })
                        .sum()
                }
            }
        } else if sigma < 0.0 {
            (0..sgrid.len())
                .map(|j| {
                    let l = sgrid.nodes[j];
                    sgrid.weights[j] * data.n_coeff(n, j).norm_sqr() / (2.0 * (l * l - sigma))
                })
                .sum()
        } else {
            // P.V. over a grid whose panels split at λ_n
            let lam_n = sigma.sqrt();
            let g_n = match resonant.get(&n) {
                Some(r) => 0.5 * r.n_abs * r.n_abs,
                None => 0.5 * engine.n_coeff_fft(lam_n, n).norm_sqr(),
            };
            let mut acc = 0.0;
            for j in 0..sgrid.len() {
                let l = sgrid.nodes[j];
                let g = 0.5 * data.n_coeff(n, j).norm_sqr();
                acc += sgrid.weights[j] * (g - g_n) / (l * l - sigma);
            }
            if lam_n < lam_max {
                acc += g_n / (2.0 * lam_n) * ((lam_max - lam_n) / (lam_max + lam_n)).ln();
            }
            acc
        };
        shift_terms.push((n, term));
    }
    Ok(shift_terms.iter().map(|(_, t)| t).sum())
}

/// Full prediction for one engine: M̄, Γ, Λ, resonance table, small-time C.
pub fn predict(
    engine: &CouplingEngine,
    opts: &PredictOptions,
) -> Result<(DecayPrediction, CouplingData), CouplingError> {
    let data = engine.assemble()?;
    let (gamma, resonances) = golden_rule(engine, opts)?;
    let lambda_shift = lamb_shift(engine, &data, &resonances, opts)?;
    let pred = DecayPrediction {
        parity: engine.parity,
        period: engine.period(),
        beta_b: engine.beta_b(),
        mbar: data.mbar(),
        gamma,
        lambda_shift,
        small_time_c: data.small_time_coefficient(),
        n0: engine.n0(0.0),
        resonances,
    };
    Ok((pred, data))
}

/// ∫₀ᵗ M(s) ds from the Fourier data: M̄ t plus the bounded periodic part.
pub fn m_integral(data: &CouplingData, t: f64) -> f64 {
    let n_t = data.m_coeffs.len();
    let l = data.period;
    let mut acc = data.mbar() * t;
    let omega = 2.0 * std::f64::consts::PI / l;
    for k in 1..=(data.k_max.min(n_t / 2 - 1)) {
        let ck = data.m_coeff(k as i64);
        let w = omega * k as f64;
        // ∫ (c e^{iwt} + c* e^{-iwt}) = 2 Re[c (e^{iwt}-1)/(iw)]
        let phase = Complex64::from_polar(1.0, w * t) - Complex64::new(1.0, 0.0);
        acc += 2.0 * (ck * phase / Complex64::new(0.0, w)).re;
    }
    acc
}

/// Closed-form amplitude predictor:
/// A_b(t) = A_b(0) e^{2iβ_b t} e^{-Γ|t|} e^{iΛt} e^{-i∫₀ᵗM}.
pub fn predict_amplitude(
    pred: &DecayPrediction,
    data: &CouplingData,
    a0: Complex64,
    t: f64,
) -> Complex64 {
    let phase = 2.0 * pred.beta_b * t + pred.lambda_shift * t - m_integral(data, t);
    a0 * Complex64::from_polar((-pred.gamma * t.abs()).exp(), phase)
}
