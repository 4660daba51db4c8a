//! Tensor grids over axis-aligned boxes.

/// `n` equispaced points on `[lo, hi]` (just the midpoint when `n == 1`).
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Tensor-product grid on `[lo, hi]^d`, last axis fastest.
#[derive(Debug, Clone)]
pub struct BoxGrid {
    pub d: usize,
    pub axis: Vec<f64>,
}

impl BoxGrid {
    pub fn new(d: usize, lo: f64, hi: f64, n: usize) -> Self {
        Self {
            d,
            axis: linspace(lo, hi, n),
        }
    }

    pub fn len(&self) -> usize {
        self.axis.len().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing between neighbouring nodes.
    pub fn spacing(&self) -> f64 {
        if self.axis.len() < 2 {
            0.0
        } else {
            self.axis[1] - self.axis[0]
        }
    }

    pub fn point(&self, mut idx: usize, out: &mut [f64]) {
        let n = self.axis.len();
        for j in (0..self.d).rev() {
            out[j] = self.axis[idx % n];
            idx /= n;
        }
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| {
            let mut p = vec![0.0; self.d];
            self.point(i, &mut p);
            p
        })
    }
}
