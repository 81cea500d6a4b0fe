//! Companion-matrix state lifting: each output channel of order o_i
//! contributes a block [y_i, y_i', ..., y_i^(o_i-1)] to the augmented state.
//! A carries ones on each block's superdiagonal, B routes the learned field
//! into the highest-derivative rows, C reads the zeroth-derivative rows.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateLifting {
    orders: Vec<usize>,
    dim: usize,
    /// First row of each block (the observed output component).
    output_rows: Vec<usize>,
    /// Last row of each block (receives f_k + f_theta).
    driven_rows: Vec<usize>,
}

pub fn build_lifting(orders: &[usize]) -> StateLifting {
    assert!(!orders.is_empty() && orders.iter().all(|&o| o >= 1));
    let mut output_rows = Vec::with_capacity(orders.len());
    let mut driven_rows = Vec::with_capacity(orders.len());
    let mut off = 0;
    for &o in orders {
        output_rows.push(off);
        driven_rows.push(off + o - 1);
        off += o;
    }
    StateLifting {
        orders: orders.to_vec(),
        dim: off,
        output_rows,
        driven_rows,
    }
}

impl StateLifting {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_outputs(&self) -> usize {
        self.orders.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn output_rows(&self) -> &[usize] {
        &self.output_rows
    }

    pub fn driven_rows(&self) -> &[usize] {
        &self.driven_rows
    }

    /// dz = A z + B f, with f one value per output block.
    pub fn apply(&self, z: &[f64], f: &[f64], dz: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim);
        debug_assert_eq!(f.len(), self.orders.len());
        for (k, &start) in self.output_rows.iter().enumerate() {
            let end = self.driven_rows[k];
            for r in start..end {
                dz[r] = z[r + 1];
            }
            dz[end] = f[k];
        }
    }

    /// Transpose of `apply`: pulls `dz_bar` back to (z_bar, f_bar).
    pub fn apply_transpose(&self, dz_bar: &[f64], z_bar: &mut [f64], f_bar: &mut [f64]) {
        for (k, &start) in self.output_rows.iter().enumerate() {
            let end = self.driven_rows[k];
            for r in start..end {
                z_bar[r + 1] += dz_bar[r];
            }
            f_bar[k] += dz_bar[end];
        }
    }

    /// C z: the observed outputs.
    pub fn outputs(&self, z: &[f64]) -> Vec<f64> {
        self.output_rows.iter().map(|&r| z[r]).collect()
    }

    /// Dense A, B, C for inspection.
    pub fn matrices(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = self.dim;
        let m = self.orders.len();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![vec![0.0; m]; n];
        let mut c = vec![vec![0.0; n]; m];
        for (k, &start) in self.output_rows.iter().enumerate() {
            let end = self.driven_rows[k];
            for r in start..end {
                a[r][r + 1] = 1.0;
            }
            b[end][k] = 1.0;
            c[k][start] = 1.0;
        }
        (a, b, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_two_single_output() {
        let l = build_lifting(&[2]);
        let (a, b, c) = l.matrices();
        assert_eq!(a, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(b, vec![vec![0.0], vec![1.0]]);
        assert_eq!(c, vec![vec![1.0, 0.0]]);
    }

    #[test]
    fn order_one_is_identity_routing() {
        let l = build_lifting(&[1]);
        let (a, b, c) = l.matrices();
        assert_eq!(a, vec![vec![0.0]]);
        assert_eq!(b, vec![vec![1.0]]);
        assert_eq!(c, vec![vec![1.0]]);
    }

    #[test]
    fn mixed_orders_block_structure() {
        let l = build_lifting(&[2, 1]);
        assert_eq!(l.dim(), 3);
        let (a, b, c) = l.matrices();
        let ones: usize = a
            .iter()
            .flatten()
            .map(|&v| if v == 1.0 { 1 } else { 0 })
            .sum();
        assert_eq!(ones, 1);
        assert_eq!(a[0][1], 1.0);
        assert_eq!(b[1][0], 1.0);
        assert_eq!(b[2][1], 1.0);
        assert_eq!(c[0][0], 1.0);
        assert_eq!(c[1][2], 1.0);
    }

    #[test]
    fn apply_matches_dense_matrices() {
        let l = build_lifting(&[3, 2]);
        let z = vec![0.5, -1.0, 2.0, 0.25, -0.75];
        let f = vec![10.0, 20.0];
        let mut dz = vec![0.0; 5];
        l.apply(&z, &f, &mut dz);
        let (a, b, _) = l.matrices();
        for r in 0..5 {
            let want: f64 = (0..5).map(|cc| a[r][cc] * z[cc]).sum::<f64>()
                + (0..2).map(|k| b[r][k] * f[k]).sum::<f64>();
            assert!((dz[r] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn transpose_is_adjoint_of_apply() {
        let l = build_lifting(&[2, 3]);
        let z = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let f = vec![-1.0, 0.5];
        let mut dz = vec![0.0; 5];
        l.apply(&z, &f, &mut dz);
        let bar = vec![0.1, -0.2, 0.3, 0.7, -0.4];
        let mut zb = vec![0.0; 5];
        let mut fb = vec![0.0; 2];
        l.apply_transpose(&bar, &mut zb, &mut fb);
        // <bar, A z + B f> == <A^T bar, z> + <B^T bar, f>
        let lhs: f64 = bar.iter().zip(&dz).map(|(a, b)| a * b).sum();
        let rhs: f64 = zb.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            + fb.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
