//! The exact eigenbasis of the unperturbed problem and the maps between
//! fields and mode amplitudes.
//!
//! For two-soliton potentials the basis splits by spatial parity: one bound
//! state and a half-line continuum per sector. For general discrete data the
//! bound space comes from Gram–Schmidt over the M decaying generators and the
//! continuum lives on the full real λ-line.

use num_complex::Complex64;
use thiserror::Error;

use crate::dressing::{self, DiscreteData, SeparableError};
use crate::grid::{inner, SpatialGrid, WaveField};
use crate::par;
use crate::quad::Rule;
use crate::two_soliton::{Parity, TwoSoliton};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("field grid does not match the requested evaluation grid")]
    GridMismatch,
    #[error("bound generators are numerically rank-deficient (ratio {0:.3e})")]
    RankDeficient(f64),
    #[error(
        "spectral grid truncation too low: top λ octave holds {frac:.3e} of the continuum norm"
    )]
    InsufficientLambdaResolution { frac: f64 },
    #[error(transparent)]
    Separable(#[from] SeparableError),
}

/// Quadrature grid over the continuum spectral parameter.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    /// false: λ ∈ [0, λ_max] (parity bases); true: λ ∈ [-λ_max, λ_max]
    pub full_line: bool,
}

impl SpectralGrid {
    /// Composite Gauss–Legendre panels on [0, λ_max].
    pub fn half_line(lambda_max: f64, n_panels: usize, nodes_per_panel: usize) -> Self {
        let rule = Rule::uniform(0.0, lambda_max, n_panels, nodes_per_panel);
        SpectralGrid { nodes: rule.nodes, weights: rule.weights, lambda_max, full_line: false }
    }

    /// Panels graded toward λ = 0, where the continuum normalization varies
    /// on the scale of the smallest ρ: edges at λ_max (j/P)^1.5.
    pub fn half_line_graded(lambda_max: f64, n_panels: usize, nodes_per_panel: usize) -> Self {
        let breaks: Vec<f64> = (0..=n_panels)
            .map(|j| lambda_max * ((j as f64) / n_panels as f64).powf(1.5))
            .collect();
        let rule = Rule::composite(&breaks, nodes_per_panel);
        SpectralGrid { nodes: rule.nodes, weights: rule.weights, lambda_max, full_line: false }
    }

    /// Composite Gauss–Legendre panels on [-λ_max, λ_max].
    pub fn full_line(lambda_max: f64, n_panels: usize, nodes_per_panel: usize) -> Self {
        let rule = Rule::uniform(-lambda_max, lambda_max, n_panels, nodes_per_panel);
        SpectralGrid { nodes: rule.nodes, weights: rule.weights, lambda_max, full_line: true }
    }

    /// Two-zone grid for long-time synthesis: on [0, resolve_up_to] the
    /// panels are uniform in λ² with ~12 radians of the free phase e^{-2iλ²t}
    /// per 16-node panel at `t_max`, so the oscillatory integrals stay
    /// converged over the whole fit window; [resolve_up_to, λ_max] gets
    /// amplitude-resolving panels only (the spectral mass there must already
    /// be negligible, which the tail gate checks).
    pub fn half_line_for_times(lambda_max: f64, t_max: f64, resolve_up_to: f64) -> Self {
        let lc = resolve_up_to.min(lambda_max);
        let phase = 2.0 * lc * lc * t_max.max(1.0);
        let n_panels = ((phase / 12.0).ceil() as usize).clamp(24, 8192);
        let mut breaks: Vec<f64> = (0..=n_panels)
            .map(|j| lc * ((j as f64) / n_panels as f64).sqrt())
            .collect();
        if lambda_max > lc {
            for j in 1..=24 {
                breaks.push(lc + (lambda_max - lc) * j as f64 / 24.0);
            }
        }
        let rule = Rule::composite(&breaks, 16);
        SpectralGrid { nodes: rule.nodes, weights: rule.weights, lambda_max, full_line: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Which eigenbasis a set of amplitudes refers to.
#[derive(Clone)]
pub enum BasisContext {
    /// One parity sector of an even two-soliton potential.
    TwoSolitonParity { ts: TwoSoliton, parity: Parity },
    /// General discrete data: M bound states, full-line continuum.
    General { data: DiscreteData },
}

impl BasisContext {
    pub fn two_soliton(ts: TwoSoliton, parity: Parity) -> Self {
        BasisContext::TwoSolitonParity { ts, parity }
    }

    pub fn n_bound(&self) -> usize {
        match self {
            BasisContext::TwoSolitonParity { .. } => 1,
            BasisContext::General { data } => data.m(),
        }
    }

    /// Floquet exponent branch β_b = ρ₁².
    pub fn beta_b(&self) -> f64 {
        match self {
            BasisContext::TwoSolitonParity { ts, .. } => ts.params.floquet_exponent(),
            BasisContext::General { data } => {
                let im = data.lambdas()[0].im;
                im * im
            }
        }
    }

    /// Sampled bound states at time t on the grid, one vector per state.
    pub fn bound_states(
        &self,
        grid: &SpatialGrid,
        t: f64,
    ) -> Result<Vec<Vec<Complex64>>, SpectralError> {
        match self {
            BasisContext::TwoSolitonParity { ts, parity } => {
                let cache = ts.x_cache(&grid.points());
                let rows = ts.fields_row(&cache, t);
                Ok(vec![rows.iter().map(|f| ts.psi_b_from_fields(*parity, f)).collect()])
            }
            BasisContext::General { data } => Ok(bound_basis(data, grid, t)?.states),
        }
    }

    /// Precompute the per-x data shared by all continuum evaluations at one
    /// time; lets callers stream λ nodes without rebuilding solves.
    pub fn prepare(&self, grid: &SpatialGrid, t: f64) -> Result<PreparedBasis, SpectralError> {
        let xs = grid.points();
        let kind = match self {
            BasisContext::TwoSolitonParity { ts, parity } => {
                let cache = ts.x_cache(&xs);
                PreparedKind::TwoSoliton { ts: *ts, parity: *parity, rows: ts.fields_row(&cache, t) }
            }
            BasisContext::General { data } => {
                let sols: Vec<_> = par::map_slice(&xs, |&x| dressing::solve_dressing(data, x, t));
                let mut coeffs = Vec::with_capacity(xs.len());
                for s in sols {
                    coeffs.push(s?);
                }
                PreparedKind::General { data: data.clone(), sols: coeffs }
            }
        };
        Ok(PreparedBasis { kind, xs, t })
    }

    /// Sampled continuum modes at time t: matrix indexed [node][x].
    pub fn continuum_states(
        &self,
        grid: &SpatialGrid,
        t: f64,
        sgrid: &SpectralGrid,
    ) -> Result<Vec<Vec<Complex64>>, SpectralError> {
        let prep = self.prepare(grid, t)?;
        Ok(par::map_slice(&sgrid.nodes, |&lam| prep.continuum_row(lam)))
    }
}

/// Per-x data for one basis snapshot.
pub struct PreparedBasis {
    kind: PreparedKind,
    xs: Vec<f64>,
    t: f64,
}

enum PreparedKind {
    TwoSoliton { ts: TwoSoliton, parity: Parity, rows: Vec<crate::two_soliton::TwoSolitonFields> },
    General { data: DiscreteData, sols: Vec<dressing::CoefficientSolution> },
}

impl PreparedBasis {
    /// One continuum mode sampled over the grid.
    pub fn continuum_row(&self, lambda: f64) -> Vec<Complex64> {
        match &self.kind {
            PreparedKind::TwoSoliton { ts, parity, rows } => self
                .xs
                .iter()
                .enumerate()
                .map(|(i, &x)| ts.psi_d_from_fields(*parity, &rows[i], x, self.t, lambda))
                .collect(),
            PreparedKind::General { data, sols } => {
                let nrm = continuum_norm(data, lambda);
                sols.iter().map(|c| c.a_at(Complex64::new(lambda, 0.0)) * nrm).collect()
            }
        }
    }
}

/// (π Π_k |λ-λ_k|²)^{-1/2}
pub fn continuum_norm(data: &DiscreteData, lambda: f64) -> f64 {
    let prod: f64 = data
        .lambdas()
        .iter()
        .map(|l| (Complex64::new(lambda, 0.0) - l).norm_sqr())
        .product();
    1.0 / (std::f64::consts::PI * prod).sqrt()
}

/// δ-normalized continuum mode for general data at real λ.
pub fn psi_d(
    data: &DiscreteData,
    x: f64,
    t: f64,
    lambda: f64,
) -> Result<Complex64, SeparableError> {
    Ok(dressing::eval_a(data, x, t, Complex64::new(lambda, 0.0))? * continuum_norm(data, lambda))
}

/// Orthonormal bound basis plus the Gram–Schmidt transform that produced it.
pub struct BoundBasis {
    /// states[k][j]: k-th orthonormal state sampled at x_j
    pub states: Vec<Vec<Complex64>>,
    /// r[k][i]: coefficients expressing state k over the raw generators i ≤ k
    pub transform: Vec<Vec<Complex64>>,
}

/// Gram–Schmidt over the decaying generators a(·,t,λ_k*), in data order.
pub fn bound_basis(
    data: &DiscreteData,
    grid: &SpatialGrid,
    t: f64,
) -> Result<BoundBasis, SpectralError> {
    let xs = grid.points();
    let sols: Vec<_> = par::map_slice(&xs, |&x| dressing::solve_dressing(data, x, t));
    let m = data.m();
    let mut raw: Vec<Vec<Complex64>> = vec![Vec::with_capacity(xs.len()); m];
    for s in sols {
        let s = s?;
        for (k, col) in raw.iter_mut().enumerate() {
            col.push(dressing::eval_bound_generator(data, &s, k));
        }
    }
    let dx = grid.dx();
    let mut states: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut transform: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for k in 0..m {
        let mut v = raw[k].clone();
        let orig = inner(dx, &v, &v).re.sqrt();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); m];
        coeffs[k] = Complex64::new(1.0, 0.0);
        for (j, q) in states.iter().enumerate() {
            let c = inner(dx, q, &v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= c * qi;
            }
            for i in 0..=j {
                let sub = c * transform[j][i];
                coeffs[i] -= sub;
            }
        }
        let nrm = inner(dx, &v, &v).re.sqrt();
        if !(nrm > 1e-10 * orig.max(1e-300)) {
            return Err(SpectralError::RankDeficient(nrm / orig.max(1e-300)));
        }
        let inv = 1.0 / nrm;
        for vi in v.iter_mut() {
            *vi *= inv;
        }
        for c in coeffs.iter_mut() {
            *c *= inv;
        }
        states.push(v);
        transform.push(coeffs);
    }
    Ok(BoundBasis { states, transform })
}

/// Whether amplitudes carry the raw basis coefficients B or the Floquet
/// interaction-picture amplitudes A (A_b = B_b e^{2iβt}, A_d = B_d e^{-2iλ²t}).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeConvention {
    RawB,
    FloquetA,
}

/// Mode amplitudes of a field over one [`BasisContext`].
#[derive(Clone)]
pub struct ModeAmplitudes {
    pub bound: Vec<Complex64>,
    pub continuum: Vec<Complex64>,
    pub grid: SpectralGrid,
    /// time of the basis snapshot the amplitudes refer to
    pub basis_time: f64,
    pub beta_b: f64,
    pub convention: TimeConvention,
}

impl ModeAmplitudes {
    /// |B_b|² + Σ w |B_d|², the discrete Parseval sum.
    pub fn parseval_sum(&self) -> f64 {
        let b: f64 = self.bound.iter().map(|z| z.norm_sqr()).sum();
        let c: f64 = self
            .continuum
            .iter()
            .zip(&self.grid.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum();
        b + c
    }

    /// Fraction of the continuum Parseval mass near the truncation edge
    /// (top 10% of the λ range); a large value means λ_max is too low.
    pub fn tail_fraction(&self) -> f64 {
        let total: f64 = self
            .continuum
            .iter()
            .zip(&self.grid.weights)
            .map(|(z, w)| w * z.norm_sqr())
            .sum();
        if total == 0.0 {
            return 0.0;
        }
        let cut = 0.9 * self.grid.lambda_max;
        let tail: f64 = self
            .continuum
            .iter()
            .zip(self.grid.nodes.iter().zip(&self.grid.weights))
            .filter(|(_, (l, _))| l.abs() >= cut)
            .map(|(z, (_, w))| w * z.norm_sqr())
            .sum();
        tail / total
    }

    pub fn to_floquet(&self) -> ModeAmplitudes {
        match self.convention {
            TimeConvention::FloquetA => self.clone(),
            TimeConvention::RawB => {
                let t = self.basis_time;
                let mut out = self.clone();
                let ph = Complex64::from_polar(1.0, 2.0 * self.beta_b * t);
                for b in out.bound.iter_mut() {
                    *b *= ph;
                }
                for (a, &l) in out.continuum.iter_mut().zip(&self.grid.nodes) {
                    *a *= Complex64::from_polar(1.0, -2.0 * l * l * t);
                }
                out.convention = TimeConvention::FloquetA;
                out
            }
        }
    }
}

/// Project a field onto the basis at the field's own time.
pub fn analyze(
    ctx: &BasisContext,
    field: &WaveField,
    sgrid: &SpectralGrid,
) -> Result<ModeAmplitudes, SpectralError> {
    let t = field.time;
    let dx = field.grid.dx();
    let bound_states = ctx.bound_states(&field.grid, t)?;
    let bound = bound_states.iter().map(|b| inner(dx, b, &field.samples)).collect();
    let cont_states = ctx.continuum_states(&field.grid, t, sgrid)?;
    let continuum = cont_states.iter().map(|c| inner(dx, c, &field.samples)).collect();
    Ok(ModeAmplitudes {
        bound,
        continuum,
        grid: sgrid.clone(),
        basis_time: t,
        beta_b: ctx.beta_b(),
        convention: TimeConvention::RawB,
    })
}

/// Rebuild a field from amplitudes using the basis at time `t`.
///
/// RawB amplitudes with `t = basis_time` invert [`analyze`]; RawB amplitudes
/// at a different `t` give the exact unperturbed evolution of that field.
pub fn synthesize(
    ctx: &BasisContext,
    amps: &ModeAmplitudes,
    grid: &SpatialGrid,
    t: f64,
) -> Result<WaveField, SpectralError> {
    let (bound, continuum) = match amps.convention {
        TimeConvention::RawB => (amps.bound.clone(), amps.continuum.clone()),
        TimeConvention::FloquetA => {
            // return to raw coefficients of the basis at time t
            let ph = Complex64::from_polar(1.0, -2.0 * amps.beta_b * t);
            let bound = amps.bound.iter().map(|b| b * ph).collect();
            let continuum = amps
                .continuum
                .iter()
                .zip(&amps.grid.nodes)
                .map(|(a, &l)| a * Complex64::from_polar(1.0, 2.0 * l * l * t))
                .collect();
            (bound, continuum)
        }
    };
    let nx = grid.n_points;
    let mut samples = vec![Complex64::new(0.0, 0.0); nx];
    for (b, state) in bound.iter().zip(ctx.bound_states(grid, t)?) {
        for (s, v) in samples.iter_mut().zip(&state) {
            *s += b * v;
        }
    }
    let cont_states = ctx.continuum_states(grid, t, &amps.grid)?;
    // accumulate in fixed chunk order so results do not depend on scheduling
    let chunk = 64;
    let n_chunks = amps.grid.len().div_ceil(chunk);
    let partials: Vec<Vec<Complex64>> = par::map_indexed(n_chunks, |ci| {
        let lo = ci * chunk;
        let hi = (lo + chunk).min(amps.grid.len());
        let mut acc = vec![Complex64::new(0.0, 0.0); nx];
        for j in lo..hi {
            let c = continuum[j] * amps.grid.weights[j];
            for (a, v) in acc.iter_mut().zip(&cont_states[j]) {
                *a += c * v;
            }
        }
        acc
    });
    for p in partials {
        for (s, v) in samples.iter_mut().zip(&p) {
            *s += v;
        }
    }
    Ok(WaveField { grid: *grid, samples, time: t })
}

/// Diagonal action of the free Floquet propagator over a step `dt`:
/// bound amplitudes gain e^{2iβ_b dt}, continuum ones e^{-2iλ² dt}.
pub fn propagate_free(amps: &ModeAmplitudes, dt: f64) -> ModeAmplitudes {
    let a = amps.to_floquet();
    let mut out = a.clone();
    let ph = Complex64::from_polar(1.0, 2.0 * a.beta_b * dt);
    for b in out.bound.iter_mut() {
        *b *= ph;
    }
    for (c, &l) in out.continuum.iter_mut().zip(&a.grid.nodes) {
        *c *= Complex64::from_polar(1.0, -2.0 * l * l * dt);
    }
    out
}

/// ‖⟨x⟩^{-σ} e^{-itB} P_c f‖₂ for each requested time.
///
/// The bound components are projected out, the continuum evolves by pure
/// phases over the analysis-time basis, and the weighted norm is taken on
/// the field's grid. Errors out if the λ truncation visibly clips f.
pub fn local_decay_probe(
    ctx: &BasisContext,
    field: &WaveField,
    sigma: f64,
    times: &[f64],
    sgrid: &SpectralGrid,
) -> Result<Vec<f64>, SpectralError> {
    let grid = &field.grid;
    let nx = grid.n_points;
    let dx = grid.dx();
    let t0 = field.time;
    let prep = ctx.prepare(grid, t0)?;

    // stream λ-chunks: each chunk evaluates its modes once, projects the
    // field onto them, and accumulates every requested time at once; the
    // full mode matrix for a long-time grid would not fit comfortably
    let chunk = 128;
    let n_chunks = sgrid.len().div_ceil(chunk);
    struct Partial {
        acc: Vec<Complex64>,
        mass: f64,
        tail_mass: f64,
    }
    let cut = 0.9 * sgrid.lambda_max;
    let partials: Vec<Partial> = par::map_indexed(n_chunks, |ci| {
        let lo = ci * chunk;
        let hi = (lo + chunk).min(sgrid.len());
        let mut acc = vec![Complex64::new(0.0, 0.0); times.len() * nx];
        let mut mass = 0.0;
        let mut tail_mass = 0.0;
        for j in lo..hi {
            let states = prep.continuum_row(sgrid.nodes[j]);
            let b = inner(dx, &states, &field.samples);
            let w = sgrid.weights[j];
            mass += w * b.norm_sqr();
            if sgrid.nodes[j].abs() >= cut {
                tail_mass += w * b.norm_sqr();
            }
            let base = b * w;
            if base.norm_sqr() == 0.0 {
                continue;
            }
            let l2 = sgrid.nodes[j] * sgrid.nodes[j];
            for (ti, &t) in times.iter().enumerate() {
                let c = base * Complex64::from_polar(1.0, -2.0 * l2 * (t - t0));
                let row = &mut acc[ti * nx..(ti + 1) * nx];
                for (a, v) in row.iter_mut().zip(&states) {
                    *a += c * v;
                }
            }
        }
        Partial { acc, mass, tail_mass }
    });
    let mut field_per_time = vec![Complex64::new(0.0, 0.0); times.len() * nx];
    let mut mass = 0.0;
    let mut tail_mass = 0.0;
    for p in partials {
        for (s, v) in field_per_time.iter_mut().zip(&p.acc) {
            *s += v;
        }
        mass += p.mass;
        tail_mass += p.tail_mass;
    }
    // gate on the field norm: the probe is meaningless if the truncation
    // clips real spectral content, but pure-noise continuum mass is fine
    let denom = field.norm_sqr().max(1e-300);
    let _ = mass;
    if tail_mass / denom > 1e-8 {
        return Err(SpectralError::InsufficientLambdaResolution { frac: tail_mass / denom });
    }

    let weights: Vec<f64> =
        grid.points().iter().map(|&x| (1.0 + x * x).powf(-sigma)).collect();
    Ok((0..times.len())
        .map(|ti| {
            let row = &field_per_time[ti * nx..(ti + 1) * nx];
            (dx * row
                .iter()
                .zip(&weights)
                .map(|(z, w)| w * z.norm_sqr())
                .sum::<f64>())
            .sqrt()
        })
        .collect())
}

/// Least-squares slope of log(y) against log(t); returns (exponent, stderr).
pub fn fit_power_law(times: &[f64], values: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > 0.0 && v > 0.0)
        .map(|(&t, &v)| (t.ln(), v.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let stderr = (resid / ((n - 2.0).max(1.0) * sxx)).sqrt();
    (slope, stderr)
}
