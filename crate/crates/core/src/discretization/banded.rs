//! Cholesky factorization of symmetric positive definite band matrices.

use crate::error::{Error, Result};

/// Lower-triangular band factor `L` with `A = L L^T`, stored row by row.
/// Row `i` holds `L[i][i - bw ..= i]`, left-padded with zeros near the top.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    /// Factors the matrix whose lower band is supplied by `entry(i, k)`, the
    /// value of `A[i][i - k]` for `k <= bw`.
    pub fn factor(n: usize, bw: usize, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let stride = bw + 1;
        let mut data = vec![0.0; n * stride];
        for i in 0..n {
            let first = i.saturating_sub(bw);
            for j in first..=i {
                let lo = first.max(j.saturating_sub(bw));
                let mut s = entry(i, i - j);
                let row_i = &data[i * stride..(i + 1) * stride];
                let row_j = &data[j * stride..(j + 1) * stride];
                // column k lives at offset bw - (row - k)
                let oi = bw + lo - i;
                let oj = bw + lo - j;
                let len = j - lo;
                s -= row_i[oi..oi + len]
                    .iter()
                    .zip(&row_j[oj..oj + len])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Internal(format!(
                            "matrix is not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    data[i * stride + bw] = s.sqrt();
                } else {
                    let d = data[j * stride + bw];
                    data[i * stride + bw - (i - j)] = s / d;
                }
            }
        }
        Ok(BandCholesky { n, bw, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let stride = self.bw + 1;
        let bw = self.bw;
        for i in 0..self.n {
            let first = i.saturating_sub(bw);
            let row = &self.data[i * stride..(i + 1) * stride];
            let off = bw + first - i;
            let s: f64 = row[off..bw]
                .iter()
                .zip(&x[first..i])
                .map(|(a, b)| a * b)
                .sum();
            x[i] = (x[i] - s) / row[bw];
        }
        for i in (0..self.n).rev() {
            let row = &self.data[i * stride..(i + 1) * stride];
            x[i] /= row[bw];
            let xi = x[i];
            let first = i.saturating_sub(bw);
            let off = bw + first - i;
            for (xk, l) in x[first..i].iter_mut().zip(&row[off..bw]) {
                *xk -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_from_band(n: usize, bw: usize, entry: &impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..=bw.min(i) {
                a[i][i - k] = entry(i, k);
                a[i - k][i] = entry(i, k);
            }
        }
        a
    }

    #[test]
    fn solves_band_system() {
        let n = 40;
        let bw = 5;
        let entry = |i: usize, k: usize| match k {
            0 => 12.0 + (i % 3) as f64,
            1 => -1.0,
            5 => -0.5 - 0.01 * i as f64,
            _ => 0.0,
        };
        let chol = BandCholesky::factor(n, bw, entry).unwrap();
        let a = dense_from_band(n, bw, &entry);
        let x_true: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a[i][j] * x_true[j]).sum())
            .collect();
        chol.solve_in_place(&mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let entry = |_: usize, k: usize| if k == 0 { 1.0 } else { -2.0 };
        assert!(BandCholesky::factor(5, 1, entry).is_err());
    }
}
