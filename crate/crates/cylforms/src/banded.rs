//! Banded linear algebra: complex LU with partial pivoting and symmetric
//! `LDLᵀ` inertia counts.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// General banded complex matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `i` stores columns `i - kl ..= i + ku + kl`; the extra `kl` slots hold
/// fill-in from row interchanges.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![Complex64::default(); n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width).then(|| i * self.width + off as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.slot(i, j).map_or(Complex64::default(), |s| self.data[s])
    }

    /// Add `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).expect("inside band");
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside band");
        let s = self.slot(i, j).expect("inside band");
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factor in place.
    pub fn factor(mut self) -> Result<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + kl;
        let mut piv = vec![0usize; n];
        let mut lower = vec![Complex64::default(); n * kl.max(1)];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for r in k + 1..=last {
                let v = self.get(r, k).norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= 1e-300 || best <= scale * 1e-17 {
                return Err(Error::SingularSystem(format!("zero pivot in column {k}")));
            }
            piv[k] = p;
            let top = (k + reach).min(n - 1);
            if p != k {
                for j in k..=top {
                    let a = self.slot(k, j).expect("row window");
                    let b = self.slot(p, j).expect("row window");
                    self.data.swap(a, b);
                }
            }
            let d = self.get(k, k);
            for r in k + 1..=last {
                let m = self.get(r, k) / d;
                lower[k * kl.max(1) + (r - k - 1)] = m;
                if m == Complex64::default() {
                    continue;
                }
                let s = self.slot(r, k).expect("row window");
                self.data[s] = Complex64::default();
                for j in k + 1..=top {
                    let src = self.get(k, j);
                    if src != Complex64::default() {
                        let t = self.slot(r, j).expect("row window");
                        self.data[t] -= m * src;
                    }
                }
            }
        }
        Ok(BandedLu { m: self, piv, lower })
    }
}

/// LU factors of a [`BandedMatrix`].
#[derive(Clone, Debug)]
pub struct BandedLu {
    m: BandedMatrix,
    piv: Vec<usize>,
    lower: Vec<Complex64>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.m.n;
        let kl = self.m.kl;
        let reach = self.m.ku + kl;
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.piv[k];
            x.swap(k, p);
            let last = (k + kl).min(n - 1);
            for r in k + 1..=last {
                let m = self.lower[k * kl.max(1) + (r - k - 1)];
                let xk = x[k];
                x[r] -= m * xk;
            }
        }
        for k in (0..n).rev() {
            let top = (k + reach).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=top {
                s -= self.m.get(k, j) * x[j];
            }
            x[k] = s / self.m.get(k, k);
        }
        x
    }
}

/// Real symmetric banded matrix storing the diagonal and `bw` superdiagonals.
#[derive(Clone, Debug)]
pub struct SymBanded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl SymBanded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (bw + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry `(i, j)` for `|i - j| ≤ bw`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        if j - i > self.bw {
            0.0
        } else {
            self.data[i * (self.bw + 1) + (j - i)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        assert!(j - i <= self.bw, "entry outside band");
        self.data[i * (self.bw + 1) + (j - i)] += v;
    }

    /// Gershgorin interval containing the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let a = i.saturating_sub(self.bw);
            let b = (i + self.bw).min(self.n - 1);
            let r: f64 = (a..=b).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
            lo = lo.min(self.get(i, i) - r);
            hi = hi.max(self.get(i, i) + r);
        }
        (lo, hi)
    }

    /// Number of eigenvalues below `shift`, from the signs of the `LDLᵀ`
    /// pivots of `A - shift·I`.
    pub fn count_below(&self, shift: f64) -> usize {
        let bw = self.bw;
        let w = bw + 1;
        let mut a = self.data.clone();
        for i in 0..self.n {
            a[i * w] -= shift;
        }
        let tiny = f64::MIN_POSITIVE.sqrt();
        let mut count = 0;
        for k in 0..self.n {
            let mut d = a[k * w];
            if d == 0.0 {
                d = tiny;
            }
            if d < 0.0 {
                count += 1;
            }
            let last = (k + bw).min(self.n - 1);
            for i in k + 1..=last {
                let aki = a[k * w + (i - k)];
                if aki == 0.0 {
                    continue;
                }
                let l = aki / d;
                for j in i..=last {
                    a[i * w + (j - i)] -= l * a[k * w + (j - k)];
                }
            }
        }
        count
    }

    /// Lowest `m` eigenvalues by bisection on inertia counts.
    pub fn lowest_eigenvalues(&self, m: usize, rel_tol: f64) -> Result<Vec<f64>> {
        if m > self.n {
            return Err(Error::InvalidInput(format!("{m} eigenvalues requested of a {}-dimensional matrix", self.n)));
        }
        let (lo0, hi0) = self.gershgorin();
        let mut out = Vec::with_capacity(m);
        for idx in 0..m {
            let mut lo = out.last().copied().unwrap_or(lo0).max(lo0) - f64::EPSILON * lo0.abs().max(1.0);
            let mut hi = lo.max(0.0) + 1.0;
            while self.count_below(hi) <= idx {
                hi = lo + 2.0 * (hi - lo);
                if hi > hi0 {
                    hi = hi0 + 1.0;
                    break;
                }
            }
            let mut iters = 0;
            while hi - lo > rel_tol * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) > idx {
                    hi = mid;
                } else {
                    lo = mid;
                }
                iters += 1;
                if iters > 400 {
                    return Err(Error::NonConvergent("bisection did not converge".into()));
                }
            }
            out.push(0.5 * (lo + hi));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_tridiagonal_with_pivoting() {
        let n = 40;
        let mut m = BandedMatrix::zeros(n, 2, 3);
        for i in 0..n {
            m.set(i, i, Complex64::new(1e-3, 0.2));
            if i + 1 < n {
                m.set(i, i + 1, Complex64::new(2.0, -1.0));
                m.set(i + 1, i, Complex64::new(-1.5, 0.5));
            }
            if i + 3 < n {
                m.set(i, i + 3, Complex64::new(0.3, 0.0));
            }
            if i >= 2 {
                m.set(i, i - 2, Complex64::new(0.7, 0.1));
            }
        }
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0 / (i + 1) as f64)).collect();
        let b = m.mul_vec(&x);
        let lu = m.clone().factor().unwrap();
        let y = lu.solve(&b);
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(4, 1, 1);
        assert!(matches!(m.factor(), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn dirichlet_laplacian_eigenvalues() {
        let n = 100;
        let h = 1.0 / (n + 1) as f64;
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0 / (h * h));
            if i + 1 < n {
                a.add(i, i + 1, -1.0 / (h * h));
            }
        }
        let ev = a.lowest_eigenvalues(3, 1e-14).unwrap();
        for (m, e) in ev.iter().enumerate() {
            let want = 4.0 / (h * h) * ((m + 1) as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
            assert!((e - want).abs() < 1e-10 * want, "{e} vs {want}");
        }
    }
}
