//! Dense row-major matrices and the few numeric primitives the encoder
//! needs. Everything is f64: desk-scale models are small enough that the
//! extra width is free, and the gradient checks depend on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    /// Entries drawn i.i.d. normal with the given standard deviation.
    pub fn randn(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.next_normal() * std).collect();
        Matrix { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self (m×k) · other (k×n)`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.rows);
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[p * n..(p + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `selfᵀ (k×m) · other (m... ) -> (cols(self) × cols(other))`.
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.rows, other.rows);
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(k, n);
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let src = &other.data[i * n..(i + 1) * n];
                let dst = &mut out.data[p * n..(p + 1) * n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// `self (m×k) · otherᵀ (n×k) -> (m×n)`.
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        debug_assert_eq!(self.cols, other.cols);
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &other.data[j * k..(j + 1) * k];
                let mut sum = 0.0;
                for (x, y) in a_row.iter().zip(b_row) {
                    sum += x * y;
                }
                out.data[i * n + j] = sum;
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Adds a row vector to every row.
    pub fn add_row_broadcast(&mut self, bias: &[f64]) {
        debug_assert_eq!(self.cols, bias.len());
        for r in 0..self.rows {
            for (v, b) in self.row_mut(r).iter_mut().zip(bias) {
                *v += b;
            }
        }
    }

    /// Column sums, e.g. the bias gradient of a linear layer.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }
}

/// In-place row-wise softmax with max subtraction.
pub fn softmax_rows(m: &mut Matrix) {
    for r in 0..m.rows {
        softmax_slice(m.row_mut(r));
    }
}

pub fn softmax_slice(row: &mut [f64]) {
    let max = row
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// log(sum(exp(row))) with max subtraction.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| if b > a { b } else { a });
    let mut sum = 0.0;
    for &v in row {
        sum += libm::exp(v - max);
    }
    max + libm::log(sum)
}

/// Backward through a row-wise softmax: given y = softmax(x) and dL/dy,
/// writes dL/dx into `grad` in place.
pub fn softmax_backward_rows(probs: &Matrix, grad: &mut Matrix) {
    debug_assert_eq!(probs.rows, grad.rows);
    for r in 0..probs.rows {
        let p = probs.row(r);
        let g = grad.row_mut(r);
        let mut dot = 0.0;
        for (gi, pi) in g.iter().zip(p) {
            dot += gi * pi;
        }
        for (gi, pi) in g.iter_mut().zip(p) {
            *gi = pi * (*gi - dot);
        }
    }
}

/// Exact GELU and its derivative.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / core::f64::consts::SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x / core::f64::consts::SQRT_2));
    let pdf = libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI);
    cdf + x * pdf
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row layer normalization. Returns the normalized-but-unscaled values
/// and the reciprocal standard deviation per row, both needed for backward.
pub fn layer_norm_forward(
    input: &Matrix,
    gain: &[f64],
    bias: &[f64],
) -> (Matrix, Matrix, Vec<f64>) {
    let d = input.cols;
    let mut normalized = Matrix::zeros(input.rows, d);
    let mut output = Matrix::zeros(input.rows, d);
    let mut rstd = vec![0.0; input.rows];
    for r in 0..input.rows {
        let row = input.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        rstd[r] = rs;
        for c in 0..d {
            let n = (row[c] - mean) * rs;
            *normalized.at_mut(r, c) = n;
            *output.at_mut(r, c) = n * gain[c] + bias[c];
        }
    }
    (output, normalized, rstd)
}

/// Backward through layer norm. Accumulates parameter gradients into
/// `gain_grad` / `bias_grad` and returns dL/d(input).
pub fn layer_norm_backward(
    grad_out: &Matrix,
    normalized: &Matrix,
    rstd: &[f64],
    gain: &[f64],
    gain_grad: &mut [f64],
    bias_grad: &mut [f64],
) -> Matrix {
    let d = grad_out.cols;
    let mut grad_in = Matrix::zeros(grad_out.rows, d);
    for r in 0..grad_out.rows {
        let go = grad_out.row(r);
        let xn = normalized.row(r);
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for c in 0..d {
            let g = go[c] * gain[c];
            sum_g += g;
            sum_gx += g * xn[c];
            gain_grad[c] += go[c] * xn[c];
            bias_grad[c] += go[c];
        }
        let inv_d = 1.0 / d as f64;
        for c in 0..d {
            let g = go[c] * gain[c];
            *grad_in.at_mut(r, c) = rstd[r] * (g - inv_d * sum_g - xn[c] * inv_d * sum_gx);
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} vs {b}");
    }

    #[test]
    fn matmul_small() {
        let a = Matrix::from_rows(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_rows(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.data, vec![58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn transposed_products_agree_with_naive() {
        let mut rng = Rng::seed(5);
        let a = Matrix::randn(4, 3, 1.0, &mut rng);
        let b = Matrix::randn(4, 5, 1.0, &mut rng);
        let tn = a.matmul_tn(&b); // 3x5
        for i in 0..3 {
            for j in 0..5 {
                let mut want = 0.0;
                for r in 0..4 {
                    want += a.at(r, i) * b.at(r, j);
                }
                assert_close(tn.at(i, j), want, 1e-12);
            }
        }
        let c = Matrix::randn(6, 3, 1.0, &mut rng);
        let nt = a.matmul_nt(&c); // 4x6
        for i in 0..4 {
            for j in 0..6 {
                let mut want = 0.0;
                for k in 0..3 {
                    want += a.at(i, k) * c.at(j, k);
                }
                assert_close(nt.at(i, j), want, 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_normalize() {
        let mut m = Matrix::from_rows(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]);
        softmax_rows(&mut m);
        for r in 0..2 {
            let sum: f64 = m.row(r).iter().sum();
            assert_close(sum, 1.0, 1e-12);
        }
        assert!(m.at(0, 2) > m.at(0, 1));
    }

    #[test]
    fn softmax_uniform_on_zero_logits() {
        let mut m = Matrix::zeros(1, 4);
        softmax_rows(&mut m);
        for c in 0..4 {
            assert_close(m.at(0, c), 0.25, 1e-15);
        }
    }

    #[test]
    fn gelu_matches_finite_difference() {
        for &x in &[-2.5, -0.7, 0.0, 0.3, 1.9] {
            let eps = 1e-6;
            let fd = (gelu(x + eps) - gelu(x - eps)) / (2.0 * eps);
            assert_close(gelu_grad(x), fd, 1e-8);
        }
    }

    #[test]
    fn layer_norm_rows_standardized() {
        let mut rng = Rng::seed(11);
        let x = Matrix::randn(3, 8, 2.0, &mut rng);
        let gain = vec![1.0; 8];
        let bias = vec![0.0; 8];
        let (y, _, _) = layer_norm_forward(&x, &gain, &bias);
        for r in 0..3 {
            let mean: f64 = y.row(r).iter().sum::<f64>() / 8.0;
            let var: f64 = y
                .row(r)
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / 8.0;
            assert_close(mean, 0.0, 1e-12);
            assert_close(var, 1.0, 1e-4);
        }
    }
}
