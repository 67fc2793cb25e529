//! Scenario files: a flat key-value format with dotted section keys.
//!
//! ```text
//! potential.kind = two_soliton
//! potential.rho1 = 0.25
//! potential.rho2 = 0.75
//! parity = odd
//! epsilons = 0.04, 0.02, 0.01
//! output.dir = out/r9-odd
//! ```
//!
//! Unknown keys are rejected with line diagnostics; `parse(serialize(s))`
//! reproduces `s` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use breather_core::two_soliton::{Parity, TwoSolitonParams};
use breather_core::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    TwoSoliton { rho1: f64, rho2: f64, theta1: f64, theta2: f64 },
    Single { rho: f64, theta: f64 },
    Discrete { lambdas: Vec<Complex64>, g_rows: Vec<Vec<Complex64>> },
}

impl PotentialSpec {
    pub fn two_soliton_params(&self) -> Result<TwoSolitonParams> {
        match self {
            PotentialSpec::TwoSoliton { rho1, rho2, theta1, theta2 } => {
                TwoSolitonParams::new(*rho1, *rho2, *theta1, *theta2)
                    .map_err(|e| anyhow!("invalid potential parameters: {e}"))
            }
            _ => bail!("this command needs the two-soliton potential family"),
        }
    }

    pub fn discrete_data(&self) -> Result<breather_core::dressing::DiscreteData> {
        use breather_core::dressing::DiscreteData;
        let data = match self {
            PotentialSpec::TwoSoliton { .. } => self.two_soliton_params()?.to_discrete_data(),
            PotentialSpec::Single { rho, theta } => {
                DiscreteData::single(*rho, Complex64::from_polar(1.0, *theta))
            }
            PotentialSpec::Discrete { lambdas, g_rows } => {
                DiscreteData::new(lambdas.clone(), g_rows.clone())
            }
        };
        data.map_err(|e| anyhow!("invalid discrete data: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub potential: PotentialSpec,
    pub parity: Parity,
    pub epsilons: Vec<f64>,
    pub n_periods: usize,
    pub record_every: usize,
    pub grid_half_width: f64,
    pub grid_n_points: usize,
    pub sponge_damping: f64,
    pub sponge_width: f64,
    pub no_sponge: bool,
    /// dt_max = L / this
    pub dt_max_fraction: f64,
    pub phase_budget: f64,
    pub solver_tolerance: f64,
    pub error_check_stride: usize,
    pub lambda_max: Option<f64>,
    pub n_panels: usize,
    pub nodes_per_panel: usize,
    pub k_max: usize,
    pub n_time: usize,
    pub x_oversample: usize,
    pub drop_zero_resonance: bool,
    pub convergence_check: bool,
    pub slope_tolerance: f64,
    pub fit_window_start: f64,
    pub out_dir: PathBuf,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            potential: PotentialSpec::TwoSoliton {
                rho1: 0.25,
                rho2: 0.75,
                theta1: 0.0,
                theta2: 0.0,
            },
            parity: Parity::Odd,
            epsilons: vec![0.04, 0.02, 0.01],
            n_periods: 50,
            record_every: 16,
            grid_half_width: 80.0,
            grid_n_points: 1024,
            sponge_damping: 1.0,
            sponge_width: 10.0,
            no_sponge: false,
            dt_max_fraction: 2048.0,
            phase_budget: 0.01,
            solver_tolerance: 1e-9,
            error_check_stride: 64,
            lambda_max: None,
            n_panels: 24,
            nodes_per_panel: 16,
            k_max: 32,
            n_time: 256,
            x_oversample: 2,
            drop_zero_resonance: false,
            convergence_check: true,
            slope_tolerance: 0.20,
            fit_window_start: 0.2,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn fmt_c64(z: Complex64) -> String {
    format!("{}{}{}i", fmt_f64(z.re), if z.im < 0.0 { "-" } else { "+" }, fmt_f64(z.im.abs()))
}

fn parse_c64(s: &str) -> Result<Complex64> {
    let t = s.trim().trim_end_matches('i');
    // split at the sign of the imaginary part (not the leading sign, not an
    // exponent sign)
    let bytes = t.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && bytes[i - 1] as char != 'e' && bytes[i - 1] as char != 'E' {
            split = Some(i);
            break;
        }
    }
    match split {
        Some(i) => {
            let re: f64 = t[..i].parse().context("bad complex real part")?;
            let im: f64 = match &t[i..] {
                "+" => 1.0,
                "-" => -1.0,
                other => other.parse().context("bad complex imaginary part")?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            if s.trim().ends_with('i') {
                Ok(Complex64::new(0.0, t.parse().context("bad imaginary literal")?))
            } else {
                Ok(Complex64::new(t.parse().context("bad real literal")?, 0.0))
            }
        }
    }
}

impl Scenario {
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        match &self.potential {
            PotentialSpec::TwoSoliton { rho1, rho2, theta1, theta2 } => {
                writeln!(s, "potential.kind = two_soliton").unwrap();
                writeln!(s, "potential.rho1 = {}", fmt_f64(*rho1)).unwrap();
                writeln!(s, "potential.rho2 = {}", fmt_f64(*rho2)).unwrap();
                writeln!(s, "potential.theta1 = {}", fmt_f64(*theta1)).unwrap();
                writeln!(s, "potential.theta2 = {}", fmt_f64(*theta2)).unwrap();
            }
            PotentialSpec::Single { rho, theta } => {
                writeln!(s, "potential.kind = single").unwrap();
                writeln!(s, "potential.rho = {}", fmt_f64(*rho)).unwrap();
                writeln!(s, "potential.theta = {}", fmt_f64(*theta)).unwrap();
            }
            PotentialSpec::Discrete { lambdas, g_rows } => {
                writeln!(s, "potential.kind = discrete").unwrap();
                let ls: Vec<String> = lambdas.iter().map(|l| fmt_c64(*l)).collect();
                writeln!(s, "potential.lambdas = {}", ls.join(", ")).unwrap();
                let gs: Vec<String> = g_rows
                    .iter()
                    .map(|row| row.iter().map(|z| fmt_c64(*z)).collect::<Vec<_>>().join(", "))
                    .collect();
                writeln!(s, "potential.g = {}", gs.join("; ")).unwrap();
            }
        }
        writeln!(s, "parity = {}", self.parity.label()).unwrap();
        let eps: Vec<String> = self.epsilons.iter().map(|e| fmt_f64(*e)).collect();
        writeln!(s, "epsilons = {}", eps.join(", ")).unwrap();
        writeln!(s, "n_periods = {}", self.n_periods).unwrap();
        writeln!(s, "record_every = {}", self.record_every).unwrap();
        writeln!(s, "grid.half_width = {}", fmt_f64(self.grid_half_width)).unwrap();
        writeln!(s, "grid.n_points = {}", self.grid_n_points).unwrap();
        writeln!(s, "sponge.damping = {}", fmt_f64(self.sponge_damping)).unwrap();
        writeln!(s, "sponge.width = {}", fmt_f64(self.sponge_width)).unwrap();
        writeln!(s, "sponge.off = {}", self.no_sponge).unwrap();
        writeln!(s, "solver.dt_max_fraction = {}", fmt_f64(self.dt_max_fraction)).unwrap();
        writeln!(s, "solver.phase_budget = {}", fmt_f64(self.phase_budget)).unwrap();
        writeln!(s, "solver.tolerance = {}", fmt_f64(self.solver_tolerance)).unwrap();
        writeln!(s, "solver.error_check_stride = {}", self.error_check_stride).unwrap();
        match self.lambda_max {
            Some(l) => writeln!(s, "spectral.lambda_max = {}", fmt_f64(l)).unwrap(),
            None => writeln!(s, "spectral.lambda_max = auto").unwrap(),
        }
        writeln!(s, "spectral.n_panels = {}", self.n_panels).unwrap();
        writeln!(s, "spectral.nodes_per_panel = {}", self.nodes_per_panel).unwrap();
        writeln!(s, "spectral.k_max = {}", self.k_max).unwrap();
        writeln!(s, "spectral.n_time = {}", self.n_time).unwrap();
        writeln!(s, "spectral.x_oversample = {}", self.x_oversample).unwrap();
        writeln!(s, "predict.drop_zero_resonance = {}", self.drop_zero_resonance).unwrap();
        writeln!(s, "predict.convergence_check = {}", self.convergence_check).unwrap();
        writeln!(s, "compare.slope_tolerance = {}", fmt_f64(self.slope_tolerance)).unwrap();
        writeln!(s, "compare.fit_window_start = {}", fmt_f64(self.fit_window_start)).unwrap();
        writeln!(s, "output.dir = {}", self.out_dir.display()).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        let mut kv: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got {raw:?}", idx + 1))?;
            let key = key.trim().to_string();
            if kv.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
                bail!("line {}: duplicate key {key:?}", idx + 1);
            }
        }
        let mut sc = Scenario::default();
        let mut take = |k: &str| kv.remove(k);
        let f64_of = |k: &str, (line, v): (usize, String)| -> Result<f64> {
            v.parse::<f64>().with_context(|| format!("line {line}: field {k:?}: bad number {v:?}"))
        };
        let usize_of = |k: &str, (line, v): (usize, String)| -> Result<usize> {
            v.parse::<usize>()
                .with_context(|| format!("line {line}: field {k:?}: bad integer {v:?}"))
        };
        let bool_of = |k: &str, (line, v): (usize, String)| -> Result<bool> {
            v.parse::<bool>()
                .with_context(|| format!("line {line}: field {k:?}: bad boolean {v:?}"))
        };

        let kind = take("potential.kind").map(|(_, v)| v).unwrap_or("two_soliton".into());
        sc.potential = match kind.as_str() {
            "two_soliton" => {
                let mut p = (0.25, 0.75, 0.0, 0.0);
                if let Some(v) = take("potential.rho1") {
                    p.0 = f64_of("potential.rho1", v)?;
                }
                if let Some(v) = take("potential.rho2") {
                    p.1 = f64_of("potential.rho2", v)?;
                }
                if let Some(v) = take("potential.theta1") {
                    p.2 = f64_of("potential.theta1", v)?;
                }
                if let Some(v) = take("potential.theta2") {
                    p.3 = f64_of("potential.theta2", v)?;
                }
                PotentialSpec::TwoSoliton { rho1: p.0, rho2: p.1, theta1: p.2, theta2: p.3 }
            }
            "single" => {
                let rho = take("potential.rho")
                    .map(|v| f64_of("potential.rho", v))
                    .transpose()?
                    .unwrap_or(0.5);
                let theta = take("potential.theta")
                    .map(|v| f64_of("potential.theta", v))
                    .transpose()?
                    .unwrap_or(0.0);
                PotentialSpec::Single { rho, theta }
            }
            "discrete" => {
                let (line, ls) = take("potential.lambdas")
                    .ok_or_else(|| anyhow!("potential.kind=discrete needs potential.lambdas"))?;
                let lambdas: Vec<Complex64> = ls
                    .split(',')
                    .map(|p| parse_c64(p).with_context(|| format!("line {line}: lambda {p:?}")))
                    .collect::<Result<_>>()?;
                let (gline, gs) = take("potential.g")
                    .ok_or_else(|| anyhow!("potential.kind=discrete needs potential.g"))?;
                let g_rows: Vec<Vec<Complex64>> = gs
                    .split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|p| {
                                parse_c64(p)
                                    .with_context(|| format!("line {gline}: g entry {p:?}"))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?;
                PotentialSpec::Discrete { lambdas, g_rows }
            }
            other => bail!("unknown potential.kind {other:?}"),
        };
        if let Some((line, v)) = take("parity") {
            sc.parity = v
                .parse()
                .map_err(|e| anyhow!("line {line}: {e}"))?;
        }
        if let Some((line, v)) = take("epsilons") {
            sc.epsilons = v
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .with_context(|| format!("line {line}: bad epsilon {p:?}"))
                })
                .collect::<Result<_>>()?;
        }
        macro_rules! field {
            ($key:literal, $slot:expr, $conv:ident) => {
                if let Some(v) = take($key) {
                    $slot = $conv($key, v)?;
                }
            };
        }
        field!("n_periods", sc.n_periods, usize_of);
        field!("record_every", sc.record_every, usize_of);
        field!("grid.half_width", sc.grid_half_width, f64_of);
        field!("grid.n_points", sc.grid_n_points, usize_of);
        field!("sponge.damping", sc.sponge_damping, f64_of);
        field!("sponge.width", sc.sponge_width, f64_of);
        field!("sponge.off", sc.no_sponge, bool_of);
        field!("solver.dt_max_fraction", sc.dt_max_fraction, f64_of);
        field!("solver.phase_budget", sc.phase_budget, f64_of);
        field!("solver.tolerance", sc.solver_tolerance, f64_of);
        field!("solver.error_check_stride", sc.error_check_stride, usize_of);
        if let Some((line, v)) = take("spectral.lambda_max") {
            sc.lambda_max = if v == "auto" {
                None
            } else {
                Some(v.parse::<f64>().with_context(|| format!("line {line}: bad lambda_max"))?)
            };
        }
        field!("spectral.n_panels", sc.n_panels, usize_of);
        field!("spectral.nodes_per_panel", sc.nodes_per_panel, usize_of);
        field!("spectral.k_max", sc.k_max, usize_of);
        field!("spectral.n_time", sc.n_time, usize_of);
        field!("spectral.x_oversample", sc.x_oversample, usize_of);
        field!("predict.drop_zero_resonance", sc.drop_zero_resonance, bool_of);
        field!("predict.convergence_check", sc.convergence_check, bool_of);
        field!("compare.slope_tolerance", sc.slope_tolerance, f64_of);
        field!("compare.fit_window_start", sc.fit_window_start, f64_of);
        if let Some((_, v)) = take("output.dir") {
            sc.out_dir = PathBuf::from(v);
        }
        if let Some((key, (line, _))) = kv.into_iter().next() {
            bail!("line {line}: unknown field {key:?}");
        }
        Ok(sc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default() {
        let sc = Scenario::default();
        let text = sc.serialize();
        let back = Scenario::parse(&text).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn round_trip_discrete_and_overrides() {
        let mut sc = Scenario::default();
        sc.potential = PotentialSpec::Discrete {
            lambdas: vec![Complex64::new(0.0, 0.3), Complex64::new(0.0, 0.9)],
            g_rows: vec![
                vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.25)],
                vec![Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.0)],
            ],
        };
        sc.epsilons = vec![0.015];
        sc.lambda_max = Some(5.5);
        sc.no_sponge = true;
        let back = Scenario::parse(&sc.serialize()).unwrap();
        assert_eq!(sc, back);
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = Scenario::parse("grid.n_points = twelve\n").unwrap_err();
        assert!(format!("{err:#}").contains("line 1"), "{err:#}");
        let err = Scenario::parse("parity = odd\nmystery.key = 3\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 2") && msg.contains("mystery.key"), "{msg}");
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = "# a comment\n\nparity = even # trailing comment\n";
        let sc = Scenario::parse(text).unwrap();
        assert_eq!(sc.parity, Parity::Even);
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_c64("1.5+2i").unwrap(), Complex64::new(1.5, 2.0));
        assert_eq!(parse_c64("-0.5-0.25i").unwrap(), Complex64::new(-0.5, -0.25));
        assert_eq!(parse_c64("0.75i").unwrap(), Complex64::new(0.0, 0.75));
        assert_eq!(parse_c64("3.0").unwrap(), Complex64::new(3.0, 0.0));
        assert_eq!(parse_c64("1e-3+2e-4i").unwrap(), Complex64::new(1e-3, 2e-4));
    }
}
