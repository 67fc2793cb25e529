//! Closed forms for the even two-soliton time-periodic family (M = 2, N = 1,
//! λ = iρ₁, iρ₂, g = e^{iθ}).
//!
//! All expressions are evaluated with every hyperbolic term pre-scaled by
//! e^{-2s|x|}, so nothing overflows at any x. The b-route is used for both
//! bound states: b⁽¹⁾ is even and b⁽⁰⁾ is odd, both decay like e^{-2ρ₁|x|},
//! and they span the two-dimensional bound subspace, so
//!
//! ```text
//!   Ψ_b^(e) = i b⁽¹⁾ / √s,        Ψ_b^(o) = b⁽⁰⁾ / √(ρ₁ ρ₂ s),
//! ```
//!
//! which agree with the Gram–Schmidt-convention combinations of
//! a(x,t,-iρ_k) but stay finite-precision-clean at large |x| where those
//! combinations cancel catastrophically.

use num_complex::Complex64;
use thiserror::Error;

use crate::c64;
use crate::dressing::{DiscreteData, SeparableError};

#[derive(Debug, Error)]
pub enum TwoSolitonError {
    #[error("need 0 < rho1 < rho2, got ({0}, {1})")]
    BadRhos(f64, f64),
}

/// Spatial parity sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn label(&self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "even" | "e" => Ok(Parity::Even),
            "odd" | "o" => Ok(Parity::Odd),
            other => Err(format!("unknown parity {other:?} (use even|odd)")),
        }
    }
}

/// Parameters (ρ₁, ρ₂, θ₁, θ₂) of the even two-soliton periodic potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSolitonParams {
    pub rho1: f64,
    pub rho2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl TwoSolitonParams {
    pub fn new(rho1: f64, rho2: f64, theta1: f64, theta2: f64) -> Result<Self, TwoSolitonError> {
        if !(0.0 < rho1 && rho1 < rho2) {
            return Err(TwoSolitonError::BadRhos(rho1, rho2));
        }
        Ok(TwoSolitonParams { rho1, rho2, theta1, theta2 })
    }

    /// s = ρ₂ + ρ₁
    #[inline]
    pub fn s(&self) -> f64 {
        self.rho2 + self.rho1
    }

    /// d = ρ₂ - ρ₁
    #[inline]
    pub fn d(&self) -> f64 {
        self.rho2 - self.rho1
    }

    /// Fundamental period L = π/(s·d).
    #[inline]
    pub fn period(&self) -> f64 {
        std::f64::consts::PI / (self.s() * self.d())
    }

    /// ω = 2π/L = 2 s d.
    #[inline]
    pub fn omega(&self) -> f64 {
        2.0 * self.s() * self.d()
    }

    /// Floquet exponent of the bound states, β_b = ρ₁² (branch choice; any
    /// ρ_k² agrees modulo π/L).
    #[inline]
    pub fn floquet_exponent(&self) -> f64 {
        self.rho1 * self.rho1
    }

    /// Floquet multiplier e^{2iβ_b L} shared by both bound states.
    pub fn floquet_multiplier(&self) -> Complex64 {
        (2.0 * Complex64::i() * self.floquet_exponent() * self.period()).exp()
    }

    /// The same data in general discrete-data form.
    pub fn to_discrete_data(&self) -> Result<DiscreteData, SeparableError> {
        DiscreteData::new(
            vec![c64(0.0, self.rho1), c64(0.0, self.rho2)],
            vec![
                vec![Complex64::from_polar(1.0, self.theta1)],
                vec![Complex64::from_polar(1.0, self.theta2)],
            ],
        )
    }
}

/// The closed-form dressing functions at one point.
#[derive(Debug, Clone, Copy)]
pub struct TwoSolitonFields {
    pub b1: Complex64,
    pub b0: Complex64,
    pub a0: Complex64,
    pub a1: Complex64,
}

/// Cached x-dependent hyperbolics for fast sweeps over t at fixed grid.
///
/// Every entry is pre-multiplied by e^{-2s|x|}; the shared denominator and
/// all numerators below carry the same factor, which cancels in the ratios.
#[derive(Debug, Clone)]
pub struct XCache {
    pub x: Vec<f64>,
    ch_s: Vec<f64>,  // cosh(2sx)·e^{-2s|x|}
    ch_d: Vec<f64>,  // cosh(2dx)·e^{-2s|x|}
    sh_s: Vec<f64>,  // sinh(2sx)·e^{-2s|x|}
    sh_d: Vec<f64>,  // sinh(2dx)·e^{-2s|x|}
    ch_1: Vec<f64>,  // cosh(2ρ₁x)·e^{-2s|x|}  (appears with e^{iφ₂})
    ch_2: Vec<f64>,  // cosh(2ρ₂x)·e^{-2s|x|}  (appears with e^{iφ₁})
    sh_1: Vec<f64>,  // sinh(2ρ₁x)·e^{-2s|x|}
    sh_2: Vec<f64>,  // sinh(2ρ₂x)·e^{-2s|x|}
    scale: Vec<f64>, // e^{-2s|x|} itself (multiplies the cos term)
}

#[inline]
fn scaled_ch_sh(a: f64, two_s_abs_x: f64) -> (f64, f64) {
    // cosh(a)e^{-m}, sinh(a)e^{-m} with m = 2s|x| ≥ |a|: both exponents ≤ 0
    let ep = (a - two_s_abs_x).exp();
    let em = (-a - two_s_abs_x).exp();
    (0.5 * (ep + em), 0.5 * (ep - em))
}

/// Evaluator for the two-soliton closed forms.
#[derive(Debug, Clone, Copy)]
pub struct TwoSoliton {
    pub params: TwoSolitonParams,
}

impl TwoSoliton {
    pub fn new(params: TwoSolitonParams) -> Self {
        TwoSoliton { params }
    }

    pub fn x_cache(&self, xs: &[f64]) -> XCache {
        let p = &self.params;
        let (s, d, r1, r2) = (p.s(), p.d(), p.rho1, p.rho2);
        let n = xs.len();
        let mut c = XCache {
            x: xs.to_vec(),
            ch_s: Vec::with_capacity(n),
            ch_d: Vec::with_capacity(n),
            sh_s: Vec::with_capacity(n),
            sh_d: Vec::with_capacity(n),
            ch_1: Vec::with_capacity(n),
            ch_2: Vec::with_capacity(n),
            sh_1: Vec::with_capacity(n),
            sh_2: Vec::with_capacity(n),
            scale: Vec::with_capacity(n),
        };
        for &x in xs {
            let m = 2.0 * s * x.abs();
            let (chs, shs) = scaled_ch_sh(2.0 * s * x, m);
            let (chd, shd) = scaled_ch_sh(2.0 * d * x, m);
            let (ch1, sh1) = scaled_ch_sh(2.0 * r1 * x, m);
            let (ch2, sh2) = scaled_ch_sh(2.0 * r2 * x, m);
            c.ch_s.push(chs);
            c.sh_s.push(shs);
            c.ch_d.push(chd);
            c.sh_d.push(shd);
            c.ch_1.push(ch1);
            c.sh_1.push(sh1);
            c.ch_2.push(ch2);
            c.sh_2.push(sh2);
            c.scale.push((-m).exp());
        }
        c
    }

    /// Time-dependent phases shared by a whole x-row.
    #[inline]
    fn phases(&self, t: f64) -> (Complex64, Complex64, f64) {
        let p = &self.params;
        let e1 = Complex64::from_polar(1.0, 2.0 * p.rho1 * p.rho1 * t + p.theta1);
        let e2 = Complex64::from_polar(1.0, 2.0 * p.rho2 * p.rho2 * t + p.theta2);
        let cos_psi = (p.omega() * t + (p.theta2 - p.theta1)).cos();
        (e1, e2, cos_psi)
    }

    #[inline]
    fn fields_cached(&self, c: &XCache, i: usize, e1: Complex64, e2: Complex64, cos_psi: f64) -> TwoSolitonFields {
        let p = &self.params;
        let (s, d, r1, r2) = (p.s(), p.d(), p.rho1, p.rho2);
        let sd = s * d;
        let den = d * d * c.ch_s[i] + s * s * c.ch_d[i] - 4.0 * r1 * r2 * cos_psi * c.scale[i];
        let inv = 1.0 / den;
        let b1 = c64(0.0, -2.0 * sd) * (e1 * (r1 * c.ch_2[i]) - e2 * (r2 * c.ch_1[i])) * inv;
        let b0 = (e1 * c.sh_2[i] - e2 * c.sh_1[i]) * (2.0 * sd * r1 * r2 * inv);
        // a0 numerator: ρ₁ρ₂ [ s²cosh(2dx) - d²cosh(2sx) - 2ρ₁²e^{-iΨ} - 2ρ₂²e^{iΨ} ]
        let zpsi = e2 * e1.conj(); // e^{iΨ}, Ψ = ωt + θ₂-θ₁
        let a0 = ((s * s * c.ch_d[i] - d * d * c.ch_s[i])
            - (zpsi.conj() * (2.0 * r1 * r1) + zpsi * (2.0 * r2 * r2)) * c.scale[i])
            * (r1 * r2 * inv);
        let a1 = c64(0.0, -sd) * (d * c.sh_s[i] + s * c.sh_d[i]) * inv;
        TwoSolitonFields { b1, b0, a0, a1 }
    }

    /// b⁽¹⁾, b⁽⁰⁾, a⁽⁰⁾, a⁽¹⁾ at a single point.
    pub fn fields(&self, x: f64, t: f64) -> TwoSolitonFields {
        let c = self.x_cache(std::slice::from_ref(&x));
        let (e1, e2, cp) = self.phases(t);
        self.fields_cached(&c, 0, e1, e2, cp)
    }

    /// Fields along a cached x-row at fixed t.
    pub fn fields_row(&self, c: &XCache, t: f64) -> Vec<TwoSolitonFields> {
        let (e1, e2, cp) = self.phases(t);
        (0..c.x.len()).map(|i| self.fields_cached(c, i, e1, e2, cp)).collect()
    }

    /// V0(x,t) = -4|b⁽¹⁾|².
    pub fn v0(&self, x: f64, t: f64) -> f64 {
        -4.0 * self.fields(x, t).b1.norm_sqr()
    }

    /// V0 along a cached row; real arithmetic only.
    pub fn v0_row(&self, c: &XCache, t: f64, out: &mut [f64]) {
        let p = &self.params;
        let (s, d, r1, r2) = (p.s(), p.d(), p.rho1, p.rho2);
        let cos_psi = (p.omega() * t + (p.theta2 - p.theta1)).cos();
        let f = 4.0 * s * s * d * d;
        for i in 0..c.x.len() {
            let den = d * d * c.ch_s[i] + s * s * c.ch_d[i] - 4.0 * r1 * r2 * cos_psi * c.scale[i];
            let num = r1 * r1 * c.ch_2[i] * c.ch_2[i] + r2 * r2 * c.ch_1[i] * c.ch_1[i]
                - 2.0 * r1 * r2 * c.ch_1[i] * c.ch_2[i] * cos_psi;
            // num carries e^{-4s|x|}; den² carries the same
            out[i] = -4.0 * f * num / (den * den);
        }
    }

    /// ∂V0/∂t along a cached row (enters the step-size schedule).
    pub fn dv0_dt_row(&self, c: &XCache, t: f64, out: &mut [f64]) {
        let p = &self.params;
        let (s, d, r1, r2, om) = (p.s(), p.d(), p.rho1, p.rho2, p.omega());
        let psi = om * t + (p.theta2 - p.theta1);
        let (sin_psi, cos_psi) = psi.sin_cos();
        let f = 4.0 * s * s * d * d;
        for i in 0..c.x.len() {
            let den = d * d * c.ch_s[i] + s * s * c.ch_d[i] - 4.0 * r1 * r2 * cos_psi * c.scale[i];
            let num = r1 * r1 * c.ch_2[i] * c.ch_2[i] + r2 * r2 * c.ch_1[i] * c.ch_1[i]
                - 2.0 * r1 * r2 * c.ch_1[i] * c.ch_2[i] * cos_psi;
            let dnum = 2.0 * r1 * r2 * c.ch_1[i] * c.ch_2[i] * om * sin_psi;
            let dden = 4.0 * r1 * r2 * om * sin_psi * c.scale[i];
            out[i] = -4.0 * f * (dnum * den - 2.0 * num * dden) / (den * den * den);
        }
    }

    /// Unit-norm bound state of the requested parity. Exactly parity-definite
    /// by construction.
    pub fn psi_b(&self, parity: Parity, x: f64, t: f64) -> Complex64 {
        let f = self.fields(x, t);
        self.psi_b_from_fields(parity, &f)
    }

    #[inline]
    pub fn psi_b_from_fields(&self, parity: Parity, f: &TwoSolitonFields) -> Complex64 {
        let p = &self.params;
        match parity {
            Parity::Even => Complex64::i() * f.b1 / p.s().sqrt(),
            Parity::Odd => f.b0 / (p.rho1 * p.rho2 * p.s()).sqrt(),
        }
    }

    /// δ-normalized continuum mode of the requested parity at λ ≥ 0.
    pub fn psi_d(&self, parity: Parity, x: f64, t: f64, lambda: f64) -> Complex64 {
        let f = self.fields(x, t);
        self.psi_d_from_fields(parity, &f, x, t, lambda)
    }

    #[inline]
    pub fn psi_d_from_fields(
        &self,
        parity: Parity,
        f: &TwoSolitonFields,
        x: f64,
        t: f64,
        lambda: f64,
    ) -> Complex64 {
        let p = &self.params;
        let l2 = lambda * lambda;
        let nrm = 1.0
            / (2.0
                * std::f64::consts::PI
                * (l2 + p.rho1 * p.rho1)
                * (l2 + p.rho2 * p.rho2))
                .sqrt();
        let (s2l, c2l) = (2.0 * lambda * x).sin_cos();
        let body = match parity {
            Parity::Even => (f.a0 + l2) * (2.0 * c2l) - Complex64::i() * f.a1 * (2.0 * lambda * s2l),
            Parity::Odd => f.a1 * (2.0 * lambda * c2l) - Complex64::i() * (f.a0 + l2) * (2.0 * s2l),
        };
        body * Complex64::from_polar(nrm, -2.0 * l2 * t)
    }

    /// The Gram–Schmidt-convention combinations of a(x,t,-iρ_k); used as a
    /// cross-check of the b-route bound states at moderate |x| (the two
    /// routes agree analytically, but this one cancels badly for large |x|).
    pub fn psi_b_via_modes(&self, parity: Parity, x: f64, t: f64) -> Complex64 {
        let p = &self.params;
        let f = self.fields(x, t);
        let a_at = |rho: f64| -> Complex64 {
            let pre = f.a0 - rho * rho - Complex64::i() * rho * f.a1;
            pre * Complex64::from_polar((-2.0 * rho * x).exp(), 2.0 * rho * rho * t)
        };
        let a1 = a_at(p.rho1);
        let a2 = a_at(p.rho2);
        let norm = 1.0 / (4.0 * p.s()).sqrt();
        match parity {
            Parity::Even => norm * (a1 * (2.0 / -p.d()) + a2 * (2.0 / p.d())),
            Parity::Odd => {
                let w1 = (p.rho2 / p.rho1).sqrt() * 2.0 / -p.d();
                let w2 = (p.rho1 / p.rho2).sqrt() * 2.0 / p.d();
                norm * (a1 * w1 + a2 * w2)
            }
        }
    }
}
