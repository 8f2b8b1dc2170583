//! Finite-difference stencils on arbitrary one-dimensional node sets.

/// Fornberg's algorithm: weights `c[m][j]` of the `m`-th derivative at `x0`
/// for data at `xs[j]`, for every `m ≤ max_deriv`.
pub fn fornberg(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One row of a derivative operator.
#[derive(Clone, Debug)]
pub struct Row {
    pub start: usize,
    pub weights: Vec<f64>,
}

/// Derivative operator `d^m/dz^m` on a node set.
#[derive(Clone, Debug)]
pub struct Stencil {
    pub rows: Vec<Row>,
}

impl Stencil {
    /// `width`-point stencils, centered where possible and shifted one-sided
    /// near the ends.
    pub fn new(nodes: &[f64], deriv: usize, width: usize) -> Self {
        let n = nodes.len();
        assert!(n >= width, "grid has fewer nodes than the stencil width");
        let rows = (0..n)
            .map(|i| {
                let start = i.saturating_sub(width / 2).min(n - width);
                let mut weights = fornberg(nodes[i], &nodes[start..start + width], deriv)[deriv].clone();
                // annihilate constants exactly
                let sum: f64 = weights.iter().sum();
                weights[i - start] -= sum;
                Row { start, weights }
            })
            .collect();
        Self { rows }
    }

    /// Stencils of fourth-order accuracy for the first two derivatives on a
    /// uniform grid: five centered points inside, six one-sided points near
    /// the ends for the second derivative.
    pub fn uniform_fourth_order(nodes: &[f64], deriv: usize) -> Self {
        let n = nodes.len();
        let rows = (0..n)
            .map(|i| {
                let (start, width) = if deriv == 1 {
                    (i.saturating_sub(2).min(n - 5), 5)
                } else if i >= 2 && i + 2 < n {
                    (i - 2, 5)
                } else if i < 2 {
                    (0, 6)
                } else {
                    (n - 6, 6)
                };
                let mut weights = fornberg(nodes[i], &nodes[start..start + width], deriv)[deriv].clone();
                // annihilate constants exactly
                let sum: f64 = weights.iter().sum();
                weights[i - start] -= sum;
                Row { start, weights }
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Apply to data addressed as `data[offset + stride * j]`, writing a
    /// contiguous result.
    pub fn apply_strided<T>(&self, data: &[T], offset: usize, stride: usize, out: &mut [T])
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        for (i, r) in self.rows.iter().enumerate() {
            let mut s = T::default();
            for (k, &w) in r.weights.iter().enumerate() {
                s = s + data[offset + stride * (r.start + k)] * w;
            }
            out[i] = s;
        }
    }

    pub fn apply<T>(&self, data: &[T]) -> Vec<T>
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    {
        let mut out = vec![T::default(); data.len()];
        self.apply_strided(data, 0, 1, &mut out);
        out
    }
}
