// SPDX-License-Identifier: Apache-2.0

//! Dense `c += a * b` on row-major slices.
//!
//! Every output element is `c + sum_p a[i][p] * b[p][j]` accumulated in
//! increasing `p`, whichever code path computes it, so results do not depend
//! on how rows are grouped into batches.

const MR: usize = 4;
const NR: usize = 8;

/// `c (m x n) += a (m x k) * b (k x n)`.
pub(crate) fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    assert!(a.len() == m * k && b.len() == k * n && c.len() == m * n, "gemm shape mismatch");
    let m_main = m - m % MR;
    let n_main = n - n % NR;
    for i in (0..m_main).step_by(MR) {
        let rows: [&[f64]; MR] = core::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
        for j in (0..n_main).step_by(NR) {
            let mut acc = [[0.0f64; NR]; MR];
            for (r, acc_r) in acc.iter_mut().enumerate() {
                acc_r.copy_from_slice(&c[(i + r) * n + j..(i + r) * n + j + NR]);
            }
            for p in 0..k {
                let bp: &[f64; NR] = b[p * n + j..p * n + j + NR].try_into().expect("NR columns");
                for (acc_r, row) in acc.iter_mut().zip(&rows) {
                    let x = row[p];
                    for (v, &bv) in acc_r.iter_mut().zip(bp) {
                        *v += x * bv;
                    }
                }
            }
            for (r, acc_r) in acc.iter().enumerate() {
                c[(i + r) * n + j..(i + r) * n + j + NR].copy_from_slice(acc_r);
            }
        }
        for j in n_main..n {
            for (r, row) in rows.iter().enumerate() {
                let mut s = c[(i + r) * n + j];
                for (p, &x) in row.iter().enumerate() {
                    s += x * b[p * n + j];
                }
                c[(i + r) * n + j] = s;
            }
        }
    }
    for i in m_main..m {
        let row = &a[i * k..(i + 1) * k];
        let out = &mut c[i * n..(i + 1) * n];
        for (p, &x) in row.iter().enumerate() {
            for (v, &bv) in out.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *v += x * bv;
            }
        }
    }
}

/// Writes the transpose of `a (rows x cols)` into `out`.
pub(crate) fn transpose_into(a: &[f64], rows: usize, cols: usize, out: &mut alloc::vec::Vec<f64>) {
    out.clear();
    out.resize(rows * cols, 0.0);
    for (r, row) in a.chunks_exact(cols).enumerate() {
        for (c, &v) in row.iter().enumerate() {
            out[c * rows + r] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn naive(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        for i in 0..m {
            for j in 0..n {
                let mut s = c[i * n + j];
                for p in 0..k {
                    s += a[i * k + p] * b[p * n + j];
                }
                c[i * n + j] = s;
            }
        }
    }

    proptest! {
        #[test]
        fn matches_naive_bitwise(m in 1usize..11, k in 1usize..7, n in 1usize..19, seed in any::<u64>()) {
            let mut x = seed;
            let mut next = || {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let a: Vec<f64> = (0..m * k).map(|_| next()).collect();
            let b: Vec<f64> = (0..k * n).map(|_| next()).collect();
            let c0: Vec<f64> = (0..m * n).map(|_| next()).collect();
            let mut fast = c0.clone();
            let mut slow = c0;
            gemm_acc(&mut fast, &a, &b, m, k, n);
            naive(&mut slow, &a, &b, m, k, n);
            prop_assert_eq!(fast, slow);
        }
    }

    #[test]
    fn transpose() {
        let mut t = vec![];
        transpose_into(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, 3, &mut t);
        assert_eq!(t, [1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
