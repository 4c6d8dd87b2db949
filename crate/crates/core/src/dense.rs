//! Small dense complex kernels: triangular Schur forms, reordering and
//! eigenvectors of triangular matrices.

use nalgebra::DMatrix;

use crate::{Result, TeigError, C64};

/// Complex Schur decomposition `H = Q T Q^H` with `T` upper triangular.
pub(crate) fn triangular_schur(h: DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = h.nrows();
    let scale = h.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let schur = nalgebra::Schur::try_new(h, f64::EPSILON, 100 * n.max(10))
        .ok_or_else(|| TeigError::NoConvergence { restarts: 0, residuals: vec![] })?;
    let (q, mut t) = schur.unpack();
    for j in 0..n {
        for i in j + 1..n {
            if t[(i, j)].norm() > 1e-12 * scale {
                return Err(TeigError::NoConvergence { restarts: 0, residuals: vec![t[(i, j)].norm()] });
            }
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Swap diagonal entries `k` and `k+1` of triangular `t`, updating `q`.
fn swap_adjacent(q: &mut DMatrix<C64>, t: &mut DMatrix<C64>, k: usize) {
    let n = t.nrows();
    let (a, b, c) = (t[(k, k)], t[(k + 1, k + 1)], t[(k, k + 1)]);
    // first column of Z is the eigenvector of the 2x2 block for b
    let (v1, v2) = (c, b - a);
    let r = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (z11, z21) = (v1 / r, v2 / r);
    let (z12, z22) = (-z21.conj(), z11.conj());
    // T <- Z^H T Z on rows/cols k, k+1
    for j in 0..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = z11.conj() * x + z21.conj() * y;
        t[(k + 1, j)] = z12.conj() * x + z22.conj() * y;
    }
    for i in 0..n {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * z11 + y * z21;
        t[(i, k + 1)] = x * z12 + y * z22;
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = x * z11 + y * z21;
        q[(i, k + 1)] = x * z12 + y * z22;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Reorder the Schur form so that diagonal entries appear in descending
/// `key` order (stable for ties).
pub(crate) fn sort_schur(q: &mut DMatrix<C64>, t: &mut DMatrix<C64>, key: impl Fn(C64) -> f64) {
    let n = t.nrows();
    for p in 0..n {
        let mut best = p;
        for i in p + 1..n {
            if key(t[(i, i)]) > key(t[(best, best)]) {
                best = i;
            }
        }
        for k in (p..best).rev() {
            swap_adjacent(q, t, k);
        }
    }
}

/// Unit eigenvectors of an upper-triangular matrix for its first `count`
/// diagonal entries. Vector `i` is supported on `0..=i`.
pub(crate) fn triangular_eigenvectors(t: &DMatrix<C64>, count: usize) -> Vec<Vec<C64>> {
    let n = t.nrows();
    let scale = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let guard = f64::EPSILON * scale;
    (0..count.min(n))
        .map(|i| {
            let ti = t[(i, i)];
            let mut y = vec![C64::new(0.0, 0.0); n];
            y[i] = C64::new(1.0, 0.0);
            for r in (0..i).rev() {
                let s: C64 = (r + 1..=i).map(|c| t[(r, c)] * y[c]).sum();
                let mut d = t[(r, r)] - ti;
                if d.norm() < guard {
                    d = C64::new(guard, 0.0);
                }
                y[r] = -s / d;
            }
            let nrm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= nrm);
            y
        })
        .collect()
}
