//! Gauss–Legendre quadrature: reference nodes, composite panel rules, and a
//! simple adaptive routine for the few places that need error control.

use num_complex::Complex64;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre polynomial; accurate to
/// machine precision for the modest orders used here.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_pd(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed quadrature rule: nodes and weights on some interval union.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Composite Gauss–Legendre rule over consecutive panels with the given
    /// breakpoints (strictly increasing).
    pub fn composite(breaks: &[f64], nodes_per_panel: usize) -> Rule {
        assert!(breaks.len() >= 2);
        let (gx, gw) = gauss_legendre(nodes_per_panel);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(b > a, "breakpoints must be strictly increasing");
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            for (x, wt) in gx.iter().zip(&gw) {
                nodes.push(c + h * x);
                weights.push(h * wt);
            }
        }
        Rule { nodes, weights }
    }

    /// Uniform panels on [a, b].
    pub fn uniform(a: f64, b: f64, n_panels: usize, nodes_per_panel: usize) -> Rule {
        let breaks: Vec<f64> = (0..=n_panels)
            .map(|i| a + (b - a) * i as f64 / n_panels as f64)
            .collect();
        Rule::composite(&breaks, nodes_per_panel)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn integrate_c<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> Complex64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| f(x) * w)
            .sum()
    }
}

/// Adaptive Gauss–Legendre integration of a complex-valued function.
///
/// Bisects until the 10- vs 20-node estimates of each slice agree to `tol`
/// (absolute, spread over slices). Depth is capped; analytic integrands used
/// here converge long before the cap.
pub fn adaptive_quad_c<F: Fn(f64) -> Complex64 + Copy>(
    f: F,
    a: f64,
    b: f64,
    tol: f64,
) -> Complex64 {
    fn slice<F: Fn(f64) -> Complex64 + Copy>(
        f: F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        lo: &Rule,
        hi: &Rule,
    ) -> Complex64 {
        let map = |r: &Rule| -> Complex64 {
            let h = 0.5 * (b - a);
            let c = 0.5 * (a + b);
            r.nodes
                .iter()
                .zip(&r.weights)
                .map(|(&x, &w)| f(c + h * x) * (w * h))
                .sum()
        };
        let coarse = map(lo);
        let fine = map(hi);
        if (fine - coarse).norm() <= tol || depth >= 28 {
            fine
        } else {
            let m = 0.5 * (a + b);
            slice(f, a, m, 0.5 * tol, depth + 1, lo, hi)
                + slice(f, m, b, 0.5 * tol, depth + 1, lo, hi)
        }
    }
    let (nl, wl) = gauss_legendre(10);
    let (nh, wh) = gauss_legendre(20);
    let lo = Rule { nodes: nl, weights: wl };
    let hi = Rule { nodes: nh, weights: wh };
    slice(f, a, b, tol, 0, &lo, &hi)
}
