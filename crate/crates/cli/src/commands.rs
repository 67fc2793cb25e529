//! The experiment pipeline: construct → spectrum → predict → simulate →
//! compare, plus the dispersive decay probe. Every command reads a
//! [`Scenario`], writes deterministic CSV/JSON/SVG artifacts into the
//! scenario's output directory, and returns structured results so the test
//! suites can drive the same code paths.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use breather_core::basis::{
    analyze, fit_power_law, local_decay_probe, BasisContext, SpectralGrid,
};
use breather_core::coupling::{
    predict, CouplingConfig, CouplingEngine, DecayPrediction, Perturbation, PredictOptions,
};
use breather_core::dressing::{check_commensurate, eval_potential, PeriodReport};
use breather_core::grid::{SpatialGrid, WaveField};
use breather_core::solver::{run, SimulationConfig, SpongeConfig, TimeSeries};
use breather_core::two_soliton::{Parity, TwoSoliton};
use breather_core::Complex64;

use crate::fitting::{
    decay_slope_fit, linear_fit, unwrap_phase, CompareEntry, ComparisonReport, ScalingRatio,
};
use crate::scenario::{PotentialSpec, Scenario};
use crate::svg::{Heatmap, LinePlot, Series};

/// Structured failure classes mapped to process exit codes by main().
#[derive(Debug)]
pub enum CmdError {
    Config(anyhow::Error),
    NumericalGuard(anyhow::Error),
    ConvergenceGate { message: String },
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(e) => write!(f, "configuration error: {e:#}"),
            CmdError::NumericalGuard(e) => write!(f, "numerical guard: {e:#}"),
            CmdError::ConvergenceGate { message } => write!(f, "convergence gate: {message}"),
        }
    }
}

impl std::error::Error for CmdError {}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::NumericalGuard(_) => 3,
            CmdError::ConvergenceGate { .. } => 4,
        }
    }
}

fn guard<E: std::error::Error + Send + Sync + 'static>(e: E) -> CmdError {
    CmdError::NumericalGuard(anyhow::Error::new(e))
}

fn config_err(e: anyhow::Error) -> CmdError {
    CmdError::Config(e)
}

fn io_err(e: std::io::Error, what: &str) -> CmdError {
    CmdError::Config(anyhow!("{what}: {e}"))
}

pub type CmdResult<T> = std::result::Result<T, CmdError>;

fn ensure_out_dir(sc: &Scenario) -> CmdResult<PathBuf> {
    fs::create_dir_all(&sc.out_dir).map_err(|e| io_err(e, "creating output directory"))?;
    Ok(sc.out_dir.clone())
}

fn two_soliton(sc: &Scenario) -> CmdResult<TwoSoliton> {
    Ok(TwoSoliton::new(sc.potential.two_soliton_params().map_err(config_err)?))
}

fn sim_grid(sc: &Scenario) -> CmdResult<SpatialGrid> {
    SpatialGrid::symmetric(sc.grid_half_width, sc.grid_n_points)
        .map_err(|e| config_err(anyhow::Error::new(e)))
}

fn coupling_grid(sc: &Scenario) -> CmdResult<SpatialGrid> {
    SpatialGrid::symmetric(sc.grid_half_width, sc.grid_n_points * sc.x_oversample.max(1))
        .map_err(|e| config_err(anyhow::Error::new(e)))
}

fn coupling_config(sc: &Scenario) -> CmdResult<CouplingConfig> {
    let mut cfg = CouplingConfig::with_grid(coupling_grid(sc)?);
    cfg.n_time = sc.n_time;
    cfg.k_max = sc.k_max;
    cfg.lambda_max = sc.lambda_max;
    cfg.n_panels = sc.n_panels;
    cfg.nodes_per_panel = sc.nodes_per_panel;
    Ok(cfg)
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:.4}")
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    fs::write(path, text).map_err(|e| io_err(e, &format!("writing {}", path.display())))
}

fn f(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// construct

#[derive(Debug, Serialize)]
pub struct ConstructOutput {
    pub kind: String,
    pub period: Option<f64>,
    pub fundamental_freq: Option<f64>,
    pub harmonics: Option<Vec<i64>>,
    pub stationary: bool,
    pub l1_norm_t0: f64,
    pub l1_norm_half_period: f64,
    pub min_v0: f64,
    pub csv: String,
    pub svg: String,
}

/// Tabulate V0(x, t) over one period (or a single column when stationary)
/// and emit the CSV plus an SVG heatmap.
pub fn cmd_construct(sc: &Scenario) -> CmdResult<ConstructOutput> {
    let out = ensure_out_dir(sc)?;
    let data = sc.potential.discrete_data().map_err(config_err)?;
    let report = check_commensurate(&data, 1e-9).map_err(guard)?;
    let (period, freq, harmonics, stationary) = match &report {
        PeriodReport::Stationary => (None, None, None, true),
        PeriodReport::Periodic { period, fundamental_freq, harmonics, .. } => {
            (Some(*period), Some(*fundamental_freq), Some(harmonics.clone()), false)
        }
        PeriodReport::Quasiperiodic => {
            return Err(CmdError::NumericalGuard(anyhow!(
                "spectral data is quasiperiodic; no fundamental period to tabulate"
            )))
        }
    };
    let grid = sim_grid(sc)?;
    let l = period.unwrap_or(0.0);
    let n_t = if stationary { 1 } else { 64 };
    let xs = grid.points();

    // fast path for the two-soliton family, general solve otherwise
    let v_of = |x: f64, t: f64| -> Result<f64, CmdError> {
        match &sc.potential {
            PotentialSpec::TwoSoliton { .. } => {
                let ts = two_soliton(sc)?;
                Ok(ts.v0(x, t))
            }
            _ => eval_potential(&data, x, t).map_err(guard),
        }
    };
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n_t);
    match &sc.potential {
        PotentialSpec::TwoSoliton { .. } => {
            let ts = two_soliton(sc)?;
            let cache = ts.x_cache(&xs);
            for i in 0..n_t {
                let t = l * i as f64 / n_t as f64;
                let mut row = vec![0.0; xs.len()];
                ts.v0_row(&cache, t, &mut row);
                columns.push(row);
            }
        }
        _ => {
            for i in 0..n_t {
                let t = l * i as f64 / n_t.max(1) as f64;
                let mut row = Vec::with_capacity(xs.len());
                for &x in &xs {
                    row.push(v_of(x, t)?);
                }
                columns.push(row);
            }
        }
    }

    let mut csv = String::from("x");
    for i in 0..n_t {
        csv.push_str(&format!(",v0_t{}", f(l * i as f64 / n_t.max(1) as f64)));
    }
    csv.push('\n');
    for (j, &x) in xs.iter().enumerate() {
        csv.push_str(&f(x));
        for col in &columns {
            csv.push(',');
            csv.push_str(&f(col[j]));
        }
        csv.push('\n');
    }
    let csv_path = out.join("potential.csv");
    write_text(&csv_path, &csv)?;

    // heatmap over (x, t), downsampled
    let hm = Heatmap {
        title: "V0(x, t)".into(),
        x_label: "x".into(),
        y_label: "t".into(),
        x_range: (grid.x_min, grid.x_max),
        y_range: (0.0, l),
    };
    let rows = n_t.max(1);
    let cols = 256.min(xs.len());
    let stride = xs.len() / cols;
    let svg = hm.render(rows, cols, |r, c| columns[r][c * stride]);
    let svg_path = out.join("potential.svg");
    write_text(&svg_path, &svg)?;

    // L¹ invariance diagnostic
    let dx = grid.dx();
    let l1 = |col: &Vec<f64>| col.iter().map(|v| v.abs()).sum::<f64>() * dx;
    let l1_t0 = l1(&columns[0]);
    let l1_half = if stationary { l1_t0 } else { l1(&columns[n_t / 2]) };
    let min_v0 = columns.iter().flatten().cloned().fold(0.0, f64::min);

    Ok(ConstructOutput {
        kind: match &sc.potential {
            PotentialSpec::TwoSoliton { .. } => "two_soliton".into(),
            PotentialSpec::Single { .. } => "single".into(),
            PotentialSpec::Discrete { .. } => "discrete".into(),
        },
        period,
        fundamental_freq: freq,
        harmonics,
        stationary,
        l1_norm_t0: l1_t0,
        l1_norm_half_period: l1_half,
        min_v0,
        csv: csv_path.display().to_string(),
        svg: svg_path.display().to_string(),
    })
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Debug, Serialize)]
pub struct SpectrumOutput {
    pub period: f64,
    pub beta_b: f64,
    pub floquet_multiplier_re: f64,
    pub floquet_multiplier_im: f64,
    pub n0: i64,
    pub resonances: Vec<(i64, f64)>,
    pub bound_norm_even: f64,
    pub bound_norm_odd: f64,
    pub csv: String,
}

/// Tabulate the bound states and a few continuum modes at t = 0, plus the
/// Floquet/resonance bookkeeping shared by predict.
pub fn cmd_spectrum(sc: &Scenario) -> CmdResult<SpectrumOutput> {
    let out = ensure_out_dir(sc)?;
    let ts = two_soliton(sc)?;
    let grid = sim_grid(sc)?;
    let l = ts.params.period();
    let beta = ts.params.floquet_exponent();
    let xs = grid.points();
    let cache = ts.x_cache(&xs);
    let rows = ts.fields_row(&cache, 0.0);
    let sample_lams = [0.25, 0.5, 1.0, 2.0];
    let mut csv = String::from("x,re_psi_b_even,im_psi_b_even,re_psi_b_odd,im_psi_b_odd");
    for lam in sample_lams {
        csv.push_str(&format!(",re_psi_d_even_l{lam},im_psi_d_even_l{lam}"));
    }
    csv.push('\n');
    let mut n_even = 0.0;
    let mut n_odd = 0.0;
    let dx = grid.dx();
    for (j, &x) in xs.iter().enumerate() {
        let be = ts.psi_b_from_fields(Parity::Even, &rows[j]);
        let bo = ts.psi_b_from_fields(Parity::Odd, &rows[j]);
        n_even += be.norm_sqr() * dx;
        n_odd += bo.norm_sqr() * dx;
        csv.push_str(&format!(
            "{},{},{},{},{}",
            f(x),
            f(be.re),
            f(be.im),
            f(bo.re),
            f(bo.im)
        ));
        for lam in sample_lams {
            let d = ts.psi_d_from_fields(Parity::Even, &rows[j], x, 0.0, lam);
            csv.push_str(&format!(",{},{}", f(d.re), f(d.im)));
        }
        csv.push('\n');
    }
    let csv_path = out.join("spectrum.csv");
    write_text(&csv_path, &csv)?;
    let mult = ts.params.floquet_multiplier();
    let mut resonances = Vec::new();
    let mut n = (beta * l / std::f64::consts::PI).floor() as i64;
    while resonances.len() < 12 {
        let s = std::f64::consts::PI * n as f64 / l - beta;
        resonances.push((n, s));
        n += 1;
    }
    let n0 = resonances.iter().find(|(_, s)| *s > 0.0).map(|(n, _)| *n).unwrap_or(0);
    let spectrum = SpectrumOutput {
        period: l,
        beta_b: beta,
        floquet_multiplier_re: mult.re,
        floquet_multiplier_im: mult.im,
        n0,
        resonances,
        bound_norm_even: n_even.sqrt(),
        bound_norm_odd: n_odd.sqrt(),
        csv: csv_path.display().to_string(),
    };
    let json = serde_json::to_string_pretty(&spectrum).expect("serializable");
    write_text(&out.join("spectrum.json"), &json)?;
    Ok(spectrum)
}

// ---------------------------------------------------------------------------
// predict

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResonanceOut {
    pub n: i64,
    pub sigma: f64,
    pub lambda: f64,
    pub n_abs: f64,
    pub contribution: f64,
    pub oracle_rel: f64,
    pub dropped: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceOut {
    pub checked: bool,
    pub gamma_refined: f64,
    pub lambda_refined: f64,
    pub rel_gamma_change: f64,
    pub rel_lambda_change: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictOutput {
    pub epsilon: f64,
    pub parity: String,
    pub period: f64,
    pub beta_b: f64,
    pub mbar: f64,
    pub gamma: f64,
    pub lambda_shift: f64,
    pub small_time_c: f64,
    pub n0: i64,
    pub drop_zero_resonance: bool,
    pub resonances: Vec<ResonanceOut>,
    pub convergence: ConvergenceOut,
    /// Fourier coefficients of M(t) needed to rebuild the amplitude
    /// predictor: [k, re, im] for |k| ≤ k_max
    pub m_coeffs: Vec<(i64, f64, f64)>,
}

fn prediction_to_output(
    eps: f64,
    sc: &Scenario,
    pred: &DecayPrediction,
    m_coeffs: Vec<(i64, f64, f64)>,
    conv: ConvergenceOut,
) -> PredictOutput {
    PredictOutput {
        epsilon: eps,
        parity: pred.parity.label().into(),
        period: pred.period,
        beta_b: pred.beta_b,
        mbar: pred.mbar,
        gamma: pred.gamma,
        lambda_shift: pred.lambda_shift,
        small_time_c: pred.small_time_c,
        n0: pred.n0,
        drop_zero_resonance: sc.drop_zero_resonance,
        resonances: pred
            .resonances
            .iter()
            .map(|r| ResonanceOut {
                n: r.n,
                sigma: r.sigma,
                lambda: r.lambda,
                n_abs: r.n_abs,
                contribution: r.contribution,
                oracle_rel: r.oracle_rel,
                dropped: r.dropped,
            })
            .collect(),
        convergence: conv,
        m_coeffs,
    }
}

/// Compute one ε's prediction, with the optional grid-independence gate.
pub fn predict_one(sc: &Scenario, eps: f64) -> CmdResult<PredictOutput> {
    let ts = two_soliton(sc)?;
    let opts = PredictOptions { drop_zero_resonance: sc.drop_zero_resonance, ..Default::default() };
    if eps == 0.0 {
        // W ≡ 0: all observables vanish identically
        let pred = DecayPrediction {
            parity: sc.parity,
            period: ts.params.period(),
            beta_b: ts.params.floquet_exponent(),
            mbar: 0.0,
            gamma: 0.0,
            lambda_shift: 0.0,
            small_time_c: 0.0,
            n0: 0,
            resonances: vec![],
        };
        let conv = ConvergenceOut {
            checked: false,
            gamma_refined: 0.0,
            lambda_refined: 0.0,
            rel_gamma_change: 0.0,
            rel_lambda_change: 0.0,
            passed: true,
        };
        return Ok(prediction_to_output(eps, sc, &pred, vec![], conv));
    }
    let cfg = coupling_config(sc)?;
    let engine = CouplingEngine::new(ts, Perturbation::Detuning { epsilon: eps }, sc.parity, cfg.clone())
        .map_err(guard)?;
    let (pred, data) = predict(&engine, &opts).map_err(guard)?;
    let conv = if sc.convergence_check {
        let refined = CouplingEngine::new(
            ts,
            Perturbation::Detuning { epsilon: eps },
            sc.parity,
            cfg.refined(),
        )
        .map_err(guard)?;
        let (pred_f, _) = predict(&refined, &opts).map_err(guard)?;
        let dg = (pred.gamma - pred_f.gamma).abs() / pred_f.gamma.abs().max(1e-300);
        let dl = (pred.lambda_shift - pred_f.lambda_shift).abs()
            / pred_f.lambda_shift.abs().max(1e-300);
        ConvergenceOut {
            checked: true,
            gamma_refined: pred_f.gamma,
            lambda_refined: pred_f.lambda_shift,
            rel_gamma_change: dg,
            rel_lambda_change: dl,
            passed: dg < 0.005 && dl < 0.005,
        }
    } else {
        ConvergenceOut {
            checked: false,
            gamma_refined: pred.gamma,
            lambda_refined: pred.lambda_shift,
            rel_gamma_change: 0.0,
            rel_lambda_change: 0.0,
            passed: true,
        }
    };
    let k_keep = sc.k_max.min(data.m_coeffs.len() / 2 - 1) as i64;
    let m_coeffs = (-k_keep..=k_keep)
        .map(|k| {
            let c = data.m_coeff(k);
            (k, c.re, c.im)
        })
        .collect();
    Ok(prediction_to_output(eps, sc, &pred, m_coeffs, conv))
}

/// Predictions for every scenario ε, persisted as predict_<eps>.json.
pub fn cmd_predict(sc: &Scenario) -> CmdResult<Vec<PredictOutput>> {
    let out = ensure_out_dir(sc)?;
    let results: Vec<CmdResult<PredictOutput>> =
        breather_core::par::map_slice(&sc.epsilons, |&eps| predict_one(sc, eps));
    let mut outputs = Vec::new();
    for r in results {
        let p = r?;
        let path = out.join(format!("predict_eps{}.json", eps_tag(p.epsilon)));
        write_text(&path, &serde_json::to_string_pretty(&p).expect("serializable"))?;
        outputs.push(p);
    }
    if outputs.iter().any(|p| p.convergence.checked && !p.convergence.passed) {
        return Err(CmdError::ConvergenceGate {
            message: "Γ or Λ moved by ≥ 0.5% under doubled spectral resolution".into(),
        });
    }
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulateMeta {
    pub epsilon: f64,
    pub parity: String,
    pub n_periods: usize,
    pub record_every: usize,
    pub grid_half_width: f64,
    pub grid_n_points: usize,
    pub sponge_damping: f64,
    pub sponge_width: f64,
    pub steps: usize,
    pub dt_min_used: f64,
    pub dt_max_used: f64,
    pub rows: usize,
}

pub fn simulation_config(sc: &Scenario, eps: f64) -> CmdResult<SimulationConfig> {
    let ts = two_soliton(sc)?;
    let grid = sim_grid(sc)?;
    let mut cfg = SimulationConfig::two_soliton(ts, grid, sc.parity);
    cfg.epsilon = eps;
    cfg.n_periods = sc.n_periods;
    cfg.record_every = sc.record_every;
    cfg.dt_max = ts.params.period() / sc.dt_max_fraction;
    cfg.dt_phase_budget = sc.phase_budget;
    cfg.error_tolerance = if sc.solver_tolerance > 0.0 { Some(sc.solver_tolerance) } else { None };
    cfg.error_check_stride = sc.error_check_stride;
    cfg.sponge = if sc.no_sponge {
        SpongeConfig::off()
    } else {
        SpongeConfig { damping: sc.sponge_damping, width: sc.sponge_width }
    };
    Ok(cfg)
}

pub fn initial_bound_state(sc: &Scenario) -> CmdResult<WaveField> {
    let ts = two_soliton(sc)?;
    let grid = sim_grid(sc)?;
    let cache = ts.x_cache(&grid.points());
    let rows = ts.fields_row(&cache, 0.0);
    Ok(WaveField::new(
        grid,
        rows.iter().map(|f| ts.psi_b_from_fields(sc.parity, f)).collect(),
        0.0,
    )
    .expect("matched grid"))
}

pub fn run_one(sc: &Scenario, eps: f64) -> CmdResult<TimeSeries> {
    let cfg = simulation_config(sc, eps)?;
    cfg.validate().map_err(guard)?;
    let initial = initial_bound_state(sc)?;
    run(cfg, initial).map_err(guard)
}

pub fn series_csv(series: &TimeSeries) -> String {
    let mut csv = String::from("t,re_b,im_b,abs_b,arg_b,interior_norm\n");
    for i in 0..series.times.len() {
        let b = series.b_b[i];
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            f(series.times[i]),
            f(b.re),
            f(b.im),
            f(b.norm()),
            f(b.arg()),
            f(series.interior_norm[i])
        ));
    }
    csv
}

pub fn cmd_simulate(sc: &Scenario) -> CmdResult<Vec<TimeSeries>> {
    let out = ensure_out_dir(sc)?;
    let results: Vec<CmdResult<TimeSeries>> =
        breather_core::par::map_slice(&sc.epsilons, |&eps| run_one(sc, eps));
    let mut all = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let eps = sc.epsilons[i];
        let series = r?;
        write_text(&out.join(format!("simulate_eps{}.csv", eps_tag(eps))), &series_csv(&series))?;
        let meta = SimulateMeta {
            epsilon: eps,
            parity: sc.parity.label().into(),
            n_periods: sc.n_periods,
            record_every: sc.record_every,
            grid_half_width: sc.grid_half_width,
            grid_n_points: sc.grid_n_points,
            sponge_damping: if sc.no_sponge { 0.0 } else { sc.sponge_damping },
            sponge_width: sc.sponge_width,
            steps: series.dt_stats.steps,
            dt_min_used: series.dt_stats.dt_min_used,
            dt_max_used: series.dt_stats.dt_max_used,
            rows: series.times.len(),
        };
        write_text(
            &out.join(format!("simulate_eps{}.meta.json", eps_tag(eps))),
            &serde_json::to_string_pretty(&meta).expect("serializable"),
        )?;
        all.push(series);
    }
    Ok(all)
}

// ---------------------------------------------------------------------------
// compare

pub struct LoadedSeries {
    pub times: Vec<f64>,
    pub b_b: Vec<Complex64>,
}

pub fn load_series_csv(path: &Path) -> Result<LoadedSeries> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut times = Vec::new();
    let mut b_b = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if !line.starts_with("t,re_b,im_b") {
                bail!("{}: unexpected header {line:?}", path.display());
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 6 {
            bail!("{}: line {} has {} columns", path.display(), i + 1, cols.len());
        }
        times.push(cols[0].parse::<f64>().with_context(|| format!("line {}", i + 1))?);
        b_b.push(Complex64::new(
            cols[1].parse::<f64>().with_context(|| format!("line {}", i + 1))?,
            cols[2].parse::<f64>().with_context(|| format!("line {}", i + 1))?,
        ));
    }
    Ok(LoadedSeries { times, b_b })
}

/// Rebuild the comparison from the persisted predict/simulate artifacts.
pub fn cmd_compare(sc: &Scenario) -> CmdResult<ComparisonReport> {
    let out = ensure_out_dir(sc)?;
    let mut entries = Vec::new();
    let mut mag_series = Vec::new();
    let mut phase_series = Vec::new();
    let mut period = 0.0;
    let mut beta_b = 0.0;
    for (ci, &eps) in sc.epsilons.iter().enumerate() {
        let ppath = out.join(format!("predict_eps{}.json", eps_tag(eps)));
        let spath = out.join(format!("simulate_eps{}.csv", eps_tag(eps)));
        if !ppath.exists() || !spath.exists() {
            return Err(CmdError::Config(anyhow!(
                "missing artifacts for eps={eps} (need {} and {}); run predict and simulate first",
                ppath.display(),
                spath.display()
            )));
        }
        let pred: PredictOutput = serde_json::from_str(
            &fs::read_to_string(&ppath).map_err(|e| io_err(e, "reading prediction"))?,
        )
        .map_err(|e| CmdError::Config(anyhow!("parsing {}: {e}", ppath.display())))?;
        let series = load_series_csv(&spath).map_err(config_err)?;
        period = pred.period;
        beta_b = pred.beta_b;

        let abs_b: Vec<f64> = series.b_b.iter().map(|b| b.norm()).collect();
        let log_abs: Vec<f64> = abs_b.iter().map(|a| a.max(1e-300).ln()).collect();
        let (slope, intercept, used) = decay_slope_fit(&series.times, &abs_b, sc.fit_window_start)
            .ok_or_else(|| {
                CmdError::Config(anyhow!("too few usable samples in the fit window for eps={eps}"))
            })?;
        let rel = if pred.gamma > 0.0 {
            (slope + pred.gamma).abs() / pred.gamma
        } else {
            slope.abs()
        };
        // phase drift of B_b over the same window; prediction Λ - M̄
        let args: Vec<f64> = series.b_b.iter().map(|b| b.arg()).collect();
        let unwrapped = unwrap_phase(&args);
        let t_end = *series.times.last().unwrap_or(&0.0);
        let windowed: Vec<(f64, f64)> = series
            .times
            .iter()
            .zip(&unwrapped)
            .filter(|(&t, _)| t >= sc.fit_window_start * t_end)
            .map(|(&t, &p)| (t, p))
            .collect();
        let (phase_slope, _) = linear_fit(
            &windowed.iter().map(|p| p.0).collect::<Vec<_>>(),
            &windowed.iter().map(|p| p.1).collect::<Vec<_>>(),
        );
        let predicted_phase = pred.lambda_shift - pred.mbar;
        let phase_rel = if predicted_phase.abs() > 0.0 {
            (phase_slope - predicted_phase).abs() / predicted_phase.abs()
        } else {
            phase_slope.abs()
        };
        entries.push(CompareEntry {
            epsilon: eps,
            fitted_slope: slope,
            fitted_intercept: intercept,
            predicted_gamma: pred.gamma,
            rel_slope_error: rel,
            slope_within_tolerance: rel <= sc.slope_tolerance,
            phase_slope,
            predicted_phase_slope: predicted_phase,
            phase_rel_error: phase_rel,
            mbar: pred.mbar,
            lambda_shift: pred.lambda_shift,
            small_time_c: pred.small_time_c,
            convergence_ok: pred.convergence.passed,
            samples_used: used,
        });
        mag_series.push(Series {
            label: format!("eps={eps} simulated"),
            points: series.times.iter().zip(&log_abs).map(|(&t, &v)| (t, v)).collect(),
            dashed: false,
            color_index: ci,
        });
        mag_series.push(Series {
            label: format!("eps={eps} predicted -Γt"),
            points: series.times.iter().map(|&t| (t, -pred.gamma * t)).collect(),
            dashed: true,
            color_index: ci,
        });
        phase_series.push(Series {
            label: format!("eps={eps} arg B_b"),
            points: series.times.iter().zip(&unwrapped).map(|(&t, &p)| (t, p)).collect(),
            dashed: false,
            color_index: ci,
        });
        phase_series.push(Series {
            label: format!("eps={eps} predicted (Λ-M̄)t"),
            points: series.times.iter().map(|&t| (t, predicted_phase * t)).collect(),
            dashed: true,
            color_index: ci,
        });
    }
    // ε²-scaling of fitted slopes
    let mut scaling = Vec::new();
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let (hi, lo) = (&entries[i], &entries[j]);
            if hi.epsilon == 0.0 || lo.epsilon == 0.0 || lo.fitted_slope.abs() < 1e-300 {
                continue;
            }
            let ratio = hi.fitted_slope / lo.fitted_slope;
            let expected = (hi.epsilon / lo.epsilon).powi(2);
            let rel = (ratio - expected).abs() / expected;
            scaling.push(ScalingRatio {
                eps_hi: hi.epsilon,
                eps_lo: lo.epsilon,
                slope_ratio: ratio,
                expected_ratio: expected,
                rel_error: rel,
                within_ten_percent: rel <= 0.10,
            });
        }
    }
    let report = ComparisonReport {
        parity: sc.parity.label().into(),
        period,
        beta_b,
        slope_tolerance: sc.slope_tolerance,
        fit_window_start: sc.fit_window_start,
        all_slopes_within_tolerance: entries.iter().all(|e| e.slope_within_tolerance),
        all_ratios_within_ten_percent: scaling.iter().all(|s| s.within_ten_percent),
        entries,
        scaling,
    };
    write_text(
        &out.join("report.json"),
        &serde_json::to_string_pretty(&report).expect("serializable"),
    )?;
    let mag_plot = LinePlot {
        title: format!("log|B_b(t)|, {} sector", sc.parity.label()),
        x_label: "t".into(),
        y_label: "log |B_b|".into(),
        series: mag_series,
    };
    write_text(&out.join(format!("magnitude_{}.svg", sc.parity.label())), &mag_plot.render())?;
    let phase_plot = LinePlot {
        title: format!("arg B_b(t), {} sector", sc.parity.label()),
        x_label: "t".into(),
        y_label: "arg B_b".into(),
        series: phase_series,
    };
    write_text(&out.join(format!("phase_{}.svg", sc.parity.label())), &phase_plot.render())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// decay probe

#[derive(Debug, Serialize)]
pub struct DecayProbeOutput {
    pub parity: String,
    pub sigma_weight: f64,
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub expected_exponent: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

pub fn cmd_decay_probe(sc: &Scenario) -> CmdResult<Vec<DecayProbeOutput>> {
    let out = ensure_out_dir(sc)?;
    let ts = two_soliton(sc)?;
    let l = ts.params.period();
    let half = sc.grid_half_width.min(40.0);
    let grid = SpatialGrid::symmetric(half, 512).map_err(|e| config_err(anyhow::Error::new(e)))?;
    let sgrid = SpectralGrid::half_line_for_times(7.0, 50.0 * l, 3.5);
    let times: Vec<f64> = (0..24).map(|i| 5.0 * l * (10.0f64).powf(i as f64 / 23.0)).collect();
    let sigma = 3.5;
    let mut outputs = Vec::new();
    for parity in [Parity::Odd, Parity::Even] {
        let ctx = BasisContext::two_soliton(ts, parity);
        let field = match parity {
            Parity::Odd => WaveField::from_fn(grid, 0.0, |x| {
                Complex64::new(x * (-x * x / 4.0).exp(), 0.0)
            }),
            Parity::Even => {
                WaveField::from_fn(grid, 0.0, |x| Complex64::new((-x * x / 4.0).exp(), 0.0))
            }
        };
        let norms = local_decay_probe(&ctx, &field, sigma, &times, &sgrid).map_err(guard)?;
        let (exponent, stderr) = fit_power_law(&times, &norms);
        outputs.push(DecayProbeOutput {
            parity: parity.label().into(),
            sigma_weight: sigma,
            exponent,
            exponent_stderr: stderr,
            expected_exponent: match parity {
                Parity::Odd => -1.5,
                Parity::Even => -0.5,
            },
            times: times.clone(),
            norms,
        });
    }
    write_text(
        &out.join("decay_probe.json"),
        &serde_json::to_string_pretty(&outputs).expect("serializable"),
    )?;
    Ok(outputs)
}

// ---------------------------------------------------------------------------
// shared helper for small-time diagnostics (used by tests)

/// Analyze-based bound projection sanity value |B_b(0)| for a scenario.
pub fn initial_projection(sc: &Scenario) -> CmdResult<Complex64> {
    let ts = two_soliton(sc)?;
    let ctx = BasisContext::two_soliton(ts, sc.parity);
    let field = initial_bound_state(sc)?;
    let sgrid = SpectralGrid::half_line_graded(6.0, 24, 12);
    let amps = analyze(&ctx, &field, &sgrid).map_err(guard)?;
    Ok(amps.bound[0])
}
