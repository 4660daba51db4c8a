//! Gauss–Legendre and ball/sphere product rules.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let pn = if n == 0 { 1.0 } else { p1 };
    let dn = n as f64 * (x * pn - p0) / (x * x - 1.0);
    (pn, dn)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| v * half).collect(),
    )
}

/// Directions on the unit sphere `S^{d-1}` with weights summing to its area.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub d: usize,
    /// flat, `d` entries per direction
    pub directions: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// `d = 1`: the two points `+-1`; `d = 2`: `n_angles` equispaced angles;
    /// `d = 3`: the 50-point Lebedev rule (exact to degree 11).
    pub fn new(d: usize, n_angles: usize) -> Self {
        match d {
            1 => Self {
                d,
                directions: vec![-1.0, 1.0],
                weights: vec![1.0, 1.0],
            },
            2 => {
                let n = n_angles.max(1);
                let mut directions = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let a = 2.0 * PI * (i as f64 + 0.5) / n as f64;
                    directions.push(a.cos());
                    directions.push(a.sin());
                }
                Self {
                    d,
                    directions,
                    weights: vec![2.0 * PI / n as f64; n],
                }
            }
            3 => lebedev50(),
            _ => panic!("sphere rules are provided for d <= 3"),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.directions[i * self.d..(i + 1) * self.d]
    }
}

fn lebedev50() -> SphereRule {
    let a1 = 0.012_698_412_698_412_698;
    let a2 = 0.022_574_955_908_289_243;
    let a3 = 0.021_093_75;
    let b1 = 0.020_173_335_537_918_871;
    let l = 1.0 / 11f64.sqrt();
    let mm = 3.0 / 11f64.sqrt();
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let s3 = 1.0 / 3f64.sqrt();
    let mut dirs: Vec<[f64; 3]> = Vec::new();
    let mut w = Vec::new();
    for axis in 0..3 {
        for s in [-1.0, 1.0] {
            let mut p = [0.0; 3];
            p[axis] = s;
            dirs.push(p);
            w.push(a1);
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for si in [-1.0, 1.0] {
            for sj in [-1.0, 1.0] {
                let mut p = [0.0; 3];
                p[i] = si * s2;
                p[j] = sj * s2;
                dirs.push(p);
                w.push(a2);
            }
        }
    }
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                dirs.push([sx * s3, sy * s3, sz * s3]);
                w.push(a3);
            }
        }
    }
    for big in 0..3 {
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let mut p = [l, l, l];
                    p[big] = mm;
                    dirs.push([sx * p[0], sy * p[1], sz * p[2]]);
                    w.push(b1);
                }
            }
        }
    }
    let area = 4.0 * PI;
    SphereRule {
        d: 3,
        directions: dirs.into_iter().flatten().collect(),
        weights: w.into_iter().map(|v| v * area).collect(),
    }
}

/// Product rule on the closed unit ball `|y| <= 1`.
#[derive(Debug, Clone)]
pub struct BallRule {
    pub d: usize,
    /// flat, `d` entries per node
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Node counts for [`BallRule`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BallResolution {
    pub radial: usize,
    pub angular: usize,
}

impl BallResolution {
    /// 64 nodes on each half-line for `d = 1`, 32 x 64 for `d = 2`, 24 x Lebedev-50 for `d = 3`.
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => Self {
                radial: 64,
                angular: 2,
            },
            2 => Self {
                radial: 32,
                angular: 64,
            },
            _ => Self {
                radial: 24,
                angular: 50,
            },
        }
    }
}

impl BallRule {
    pub fn new(d: usize, res: BallResolution) -> Self {
        if d == 1 {
            let (r, wr) = gauss_legendre_on(res.radial, 0.0, 1.0);
            let nodes = r.iter().map(|v| -v).chain(r.iter().copied()).collect();
            let weights = wr.iter().chain(&wr).copied().collect();
            return Self { d, nodes, weights };
        }
        let sphere = SphereRule::new(d, res.angular);
        let (r, wr) = gauss_legendre_on(res.radial, 0.0, 1.0);
        let mut nodes = Vec::with_capacity(r.len() * sphere.len() * d);
        let mut weights = Vec::with_capacity(r.len() * sphere.len());
        for (ri, wi) in r.iter().zip(&wr) {
            let jac = ri.powi(d as i32 - 1);
            for s in 0..sphere.len() {
                nodes.extend(sphere.direction(s).iter().map(|u| u * ri));
                weights.push(wi * jac * sphere.weights[s]);
            }
        }
        Self { d, nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Integrates `f` over the shell `a <= |x| <= b` with a geometric radial
/// partition (so that singular behaviour near `a` is resolved).
pub fn shell_integral<F>(d: usize, a: f64, b: f64, panels: usize, nodes_per_panel: usize, angular: usize, mut f: F) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let sphere = SphereRule::new(d, angular);
    let (gx, gw) = gauss_legendre(nodes_per_panel);
    let mut edges = Vec::with_capacity(panels + 1);
    if a > 0.0 {
        let ratio = (b / a).powf(1.0 / panels as f64);
        for i in 0..=panels {
            edges.push(a * ratio.powi(i as i32));
        }
    } else {
        for i in 0..=panels {
            edges.push(b * i as f64 / panels as f64);
        }
    }
    let mut total = 0.0;
    let mut x = vec![0.0; d];
    for win in edges.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (t, w) in gx.iter().zip(&gw) {
            let r = mid + half * t;
            let jac = r.powi(d as i32 - 1) * w * half;
            for s in 0..sphere.len() {
                for (xi, u) in x.iter_mut().zip(sphere.direction(s)) {
                    *xi = u * r;
                }
                total += jac * sphere.weights[s] * f(&x);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // x^18 is exact with 10 nodes
        let v: f64 = x.iter().zip(&w).map(|(a, b)| a.powi(18) * b).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rule_has_zero_node() {
        let (x, _) = gauss_legendre(7);
        assert_eq!(x[3], 0.0);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn lebedev_is_exact_to_degree_eleven() {
        let rule = SphereRule::new(3, 0);
        assert_eq!(rule.len(), 50);
        let area = 4.0 * PI;
        let integrate = |f: &dyn Fn(&[f64]) -> f64| -> f64 {
            (0..rule.len())
                .map(|i| rule.weights[i] * f(rule.direction(i)))
                .sum::<f64>()
                / area
        };
        let cases: [(&dyn Fn(&[f64]) -> f64, f64); 6] = [
            (&|_| 1.0, 1.0),
            (&|u| u[0] * u[0], 1.0 / 3.0),
            (&|u| u[2].powi(4), 1.0 / 5.0),
            (&|u| u[0].powi(2) * u[1].powi(2), 1.0 / 15.0),
            (&|u| u[1].powi(6), 1.0 / 7.0),
            (&|u| (u[0] * u[1] * u[2]).powi(2), 1.0 / 105.0),
        ];
        for (f, want) in cases {
            assert!((integrate(f) - want).abs() < 1e-13);
        }
        for i in 0..rule.len() {
            let u = rule.direction(i);
            assert!((u.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ball_rules_give_volume() {
        for d in 1..=3 {
            let rule = BallRule::new(d, BallResolution::default_for(d));
            let v: f64 = rule.weights.iter().sum();
            assert!((v - unit_ball_volume(d)).abs() < 1e-12, "d={d}: {v}");
        }
    }

    #[test]
    fn shell_integral_of_one() {
        let v = shell_integral(2, 0.0, 2.0, 4, 8, 16, |_| 1.0);
        assert!((v - 4.0 * PI).abs() < 1e-12);
        let v = shell_integral(3, 1e-3, 1.0, 10, 8, 0, |_| 1.0);
        let want = 4.0 / 3.0 * PI * (1.0 - 1e-9);
        assert!((v - want).abs() < 1e-12);
    }
}
