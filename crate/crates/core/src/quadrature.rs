//! Gauss-Legendre rules for the one-dimensional integrals of the closed-form
//! and line-side computations.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// `order`-point rule on `[-1, 1]`, nodes by Newton on the Legendre
    /// three-term recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    /// The rule applied on `panels` equal subintervals of `[a, b]`.
    pub fn composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let width = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + width * k as f64;
                self.integrate(lo, lo + width, &f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
