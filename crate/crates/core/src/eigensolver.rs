//! Eigenpairs of the pencil `λ A x = B x` with symmetric positive definite
//! block-diagonal `A`.
//!
//! The dominant eigenvalues of `A^{-1} B` (largest `|λ|`, i.e. smallest
//! `|k|`) are computed with a complex Krylov–Schur iteration. Left
//! eigenvectors come from a second run on `A^{-1} B^T`: if
//! `B^T z = λ A z` then `u = conj(z)` satisfies `u^H B = λ u^H A`.
//!
//! A semisimple multiple eigenvalue is invisible to a single Krylov
//! sequence beyond its first copy, so after convergence the iteration is
//! restarted with the converged Schur vectors locked and a fresh random
//! vector until the wanted set stops changing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::Pencil;
use crate::dense::{sort_schur, triangular_eigenvectors, triangular_schur};
use crate::exec::{fill_indexed, join, map_range, Execution};
use crate::skyline::SkylineCholesky;
use crate::sparse::{dotc, norm};
use crate::{Result, TeigError, C64};

/// Eigenvalues closer than this (relative) are treated as one cluster.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Left/right spectra must agree to this relative distance to be paired.
pub const MATCH_TOL: f64 = 1e-6;
/// Largest pencil handled by [`dense_solve_pencil`].
pub const DENSE_LIMIT: usize = 2000;
/// Eigenvalues below this fraction of the largest are treated as zero.
const NULL_TOL: f64 = 1e-10;
/// Lock-and-inject rounds used to expose repeated eigenvalues.
const MAX_INJECTIONS: usize = 4;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRequest {
    /// Number of dominant eigenpairs wanted. Clusters and conjugate pairs at
    /// the cut are returned whole.
    pub how_many: usize,
    /// Krylov subspace dimension; `None` picks `max(40, 4 * how_many)`.
    pub arnoldi_dim: Option<usize>,
    pub max_restarts: usize,
    /// Relative Ritz residual tolerance.
    pub tol: f64,
    /// Largest accepted normwise backward error of a returned pair.
    pub residual_check: f64,
    pub seed: u64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SpectrumRequest {
    fn default() -> Self {
        SpectrumRequest {
            how_many: 6,
            arnoldi_dim: None,
            max_restarts: 50,
            tol: 1e-10,
            residual_check: 1e-9,
            seed: 0x5eed,
            execution: Execution::default(),
        }
    }
}

impl SpectrumRequest {
    pub fn with_count(how_many: usize) -> Self {
        SpectrumRequest { how_many, ..Default::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda: C64,
    /// `1/sqrt(λ)`, principal branch.
    pub k: C64,
    /// `A`-normalized; largest entry real and positive.
    pub right_vec: Vec<C64>,
    /// Satisfies `u^H B = λ u^H A`; `A`-normalized.
    pub left_vec: Vec<C64>,
    /// Normwise backward error of the right pair.
    pub residual: f64,
    /// Eigenvalue with `Re λ > 0`, i.e. `|arg k| < π/4`.
    pub physical: bool,
    /// Position within its cluster of numerically equal eigenvalues.
    pub cluster: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Spectrum {
    /// Physical eigenvalues by ascending `Re k`, then non-physical ones.
    pub pairs: Vec<EigenPair>,
    pub restarts: usize,
    pub operator_applications: usize,
    pub warnings: Vec<String>,
}

impl Spectrum {
    /// The `j`-th physical eigenpair, 1-based.
    pub fn physical(&self, j: usize) -> Result<&EigenPair> {
        let available = self.pairs.iter().filter(|p| p.physical).count();
        if j == 0 || j > available {
            return Err(TeigError::EigenIndex { index: j, available });
        }
        Ok(self.pairs.iter().filter(|p| p.physical).nth(j - 1).expect("counted"))
    }
}

/// Drop a rounding-level imaginary part of a real eigenvalue.
pub fn snap_real(lambda: C64) -> C64 {
    if lambda.im.abs() <= 1e-13 * lambda.norm() {
        C64::new(lambda.re, 0.0)
    } else {
        lambda
    }
}

/// `1/sqrt(λ)` on the principal branch.
pub fn k_from_lambda(lambda: C64) -> C64 {
    C64::new(1.0, 0.0) / lambda.sqrt()
}

/// Cholesky factors of the diagonal blocks of `A`.
#[derive(Clone, Debug)]
pub struct AFactor {
    l1: SkylineCholesky,
    l2: Option<SkylineCholesky>,
}

impl AFactor {
    pub fn new(pencil: &Pencil, exec: Execution) -> Result<Self> {
        let (l1, l2) = join(
            exec,
            || SkylineCholesky::factor(&pencil.a1),
            || (pencil.a2.n_rows() > 0).then(|| SkylineCholesky::factor(&pencil.a2)).transpose(),
        );
        Ok(AFactor { l1: l1?, l2: l2? })
    }

    pub fn dim(&self) -> usize {
        self.l1.dim() + self.l2.as_ref().map_or(0, |l| l.dim())
    }

    /// Solve `A x = b` in place (also `A^T x = b`, as `A` is symmetric).
    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (x1, x2) = b.split_at_mut(self.l1.dim());
        self.l1.solve_in_place(x1);
        if let Some(l2) = &self.l2 {
            l2.solve_in_place(x2);
        }
    }

    pub fn envelope_size(&self) -> usize {
        self.l1.envelope_size() + self.l2.as_ref().map_or(0, |l| l.envelope_size())
    }
}

/// `x -> A^{-1} B x` and `x -> A^{-1} B^T x` with a shared factorization.
pub struct ShiftInvert<'a> {
    pub pencil: &'a Pencil,
    pub factor: &'a AFactor,
    pub execution: Execution,
}

impl ShiftInvert<'_> {
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.pencil.b_block.matvec_with(self.execution, x);
        self.factor.solve_in_place(&mut y);
        y
    }

    pub fn apply_transpose(&self, x: &[C64]) -> Vec<C64> {
        let mut y = self.pencil.b_transpose.matvec_with(self.execution, x);
        self.factor.solve_in_place(&mut y);
        y
    }
}

/// Normwise backward error `|B x - λ A x| / ((|B|_F + |λ| |A|_F) |x|)`.
pub fn pencil_residual(pencil: &Pencil, lambda: C64, x: &[C64]) -> f64 {
    let bx = pencil.b_block.matvec(x);
    let ax = pencil.a_block.matvec(x);
    let r: Vec<C64> = bx.iter().zip(&ax).map(|(b, a)| b - lambda * a).collect();
    let denom = (pencil.b_block.frobenius_norm() + lambda.norm() * pencil.a_block.frobenius_norm()) * norm(x);
    norm(&r) / denom.max(f64::MIN_POSITIVE)
}

fn transpose_residual(pencil: &Pencil, lambda: C64, z: &[C64]) -> f64 {
    let bz = pencil.b_transpose.matvec(z);
    let az = pencil.a_block.matvec(z);
    let r: Vec<C64> = bz.iter().zip(&az).map(|(b, a)| b - lambda * a).collect();
    let denom = (pencil.b_block.frobenius_norm() + lambda.norm() * pencil.a_block.frobenius_norm()) * norm(z);
    norm(&r) / denom.max(f64::MIN_POSITIVE)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

/// Orthogonalize `w` against `basis` (two passes of classical Gram–Schmidt).
/// Returns the accumulated coefficients and the remaining norm.
fn orthogonalize(exec: Execution, basis: &[Vec<C64>], w: &mut [C64]) -> (Vec<C64>, f64) {
    let mut coeffs = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let h = map_range(exec, basis.len(), |j| dotc(&basis[j], w));
        let snapshot = w.to_vec();
        fill_indexed(exec, w, |i| {
            let mut acc = snapshot[i];
            for (v, c) in basis.iter().zip(&h) {
                acc -= v[i] * c;
            }
            acc
        });
        coeffs.iter_mut().zip(&h).for_each(|(c, d)| *c += d);
    }
    (coeffs, norm(w))
}

fn combine(exec: Execution, basis: &[Vec<C64>], q: &DMatrix<C64>, cols: usize) -> Vec<Vec<C64>> {
    let n = basis.first().map_or(0, |v| v.len());
    (0..cols)
        .map(|c| {
            let mut out = vec![ZERO; n];
            fill_indexed(exec, &mut out, |i| (0..basis.len()).map(|j| basis[j][i] * q[(j, c)]).sum());
            out
        })
        .collect()
}

struct KrylovResult {
    pairs: Vec<(C64, Vec<C64>)>,
    restarts: usize,
    applications: usize,
}

/// Dominant eigenpairs of a matrix-free operator by Krylov–Schur.
fn krylov_schur(n: usize, op: &dyn Fn(&[C64]) -> Vec<C64>, req: &SpectrumRequest, nev: usize, seed: u64) -> Result<KrylovResult> {
    let exec = req.execution;
    let nev = nev.min(n);
    let m = req.arnoldi_dim.unwrap_or(40.max(4 * nev)).max(nev + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let mut v0 = random_vector(&mut rng, n);
    let nv = norm(&v0);
    v0.iter_mut().for_each(|v| *v /= nv);
    basis.push(v0);
    // Rows 0..m hold the projected operator; row m couples to the residual vector.
    let mut h = DMatrix::<C64>::zeros(m + 1, m);
    let mut k = 0;
    let mut applications = 0;
    let mut injections = 0;
    let mut previous: Option<Vec<C64>> = None;
    let mut last_residuals = Vec::new();

    for restart in 0..=req.max_restarts {
        for j in k..m {
            let mut w = op(&basis[j]);
            applications += 1;
            let (coeffs, mut beta) = orthogonalize(exec, &basis[..=j], &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                h[(i, j)] = *c;
            }
            if j + 1 == n {
                beta = 0.0;
                w.iter_mut().for_each(|v| *v = ZERO);
            } else if beta <= 1e-13 * coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1.0) {
                // invariant subspace: continue with a fresh direction
                beta = 0.0;
                w = random_vector(&mut rng, n);
                let (_, r) = orthogonalize(exec, &basis[..=j], &mut w);
                w.iter_mut().for_each(|v| *v /= r);
            } else {
                w.iter_mut().for_each(|v| *v /= beta);
            }
            h[(j + 1, j)] = C64::new(beta, 0.0);
            basis.push(w);
        }

        let (mut q, mut t) = triangular_schur(h.rows(0, m).into_owned())?;
        sort_schur(&mut q, &mut t, |z| z.norm());
        let b: Vec<C64> = (0..m).map(|c| (0..m).map(|r| h[(m, r)] * q[(r, c)]).sum()).collect();
        let ys = triangular_eigenvectors(&t, m);
        let ritz_res: Vec<f64> = (0..m)
            .map(|i| {
                let r: C64 = (0..=i).map(|c| b[c] * ys[i][c]).sum();
                r.norm() / t[(i, i)].norm().max(f64::MIN_POSITIVE)
            })
            .collect();
        // extend the wanted set over clusters straddling the cut
        let mut want = nev;
        while want < m && (t[(want, want)].norm() - t[(nev - 1, nev - 1)].norm()).abs() <= 1e-6 * t[(nev - 1, nev - 1)].norm() {
            want += 1;
        }
        last_residuals = ritz_res[..want].to_vec();
        let converged = ritz_res[..want].iter().all(|&r| r <= req.tol);

        if converged {
            let current: Vec<C64> = (0..want).map(|i| t[(i, i)]).collect();
            let stable = previous.as_ref().is_some_and(|p| {
                current.iter().all(|z| p.iter().any(|w| (z - w).norm() <= CLUSTER_TOL * z.norm().max(1e-300)))
            });
            if stable || want >= n || injections >= MAX_INJECTIONS || m - want < 2 {
                let xs = combine(exec, &basis[..m], &q, m);
                let pairs = (0..want)
                    .map(|i| {
                        let mut x = vec![ZERO; n];
                        for (c, yc) in ys[i].iter().enumerate().take(i + 1) {
                            for (xi, vi) in x.iter_mut().zip(&xs[c]) {
                                *xi += vi * yc;
                            }
                        }
                        (t[(i, i)], x)
                    })
                    .collect();
                return Ok(KrylovResult { pairs, restarts: restart, applications });
            }
            // lock every converged leading Schur vector, inject a new direction
            previous = Some(current);
            injections += 1;
            let mut p = want;
            while p < m - 1 && ritz_res[p] <= req.tol && b[p].norm() <= req.tol * t[(p, p)].norm() {
                p += 1;
            }
            let mut kept = combine(exec, &basis[..m], &q, p);
            let mut w = random_vector(&mut rng, n);
            let (_, r) = orthogonalize(exec, &kept, &mut w);
            w.iter_mut().for_each(|v| *v /= r);
            kept.push(w);
            basis = kept;
            h.fill(ZERO);
            for i in 0..p {
                for j in i..p {
                    h[(i, j)] = t[(i, j)];
                }
            }
            k = p;
            continue;
        }

        // thick restart keeping the wanted Ritz values plus a buffer
        let keep = (want + (m - want) / 2).min(m - 1).max(want.min(m - 1));
        let residual = basis.pop().expect("residual vector");
        let mut kept = combine(exec, &basis, &q, keep);
        kept.push(residual);
        basis = kept;
        h.fill(ZERO);
        for i in 0..keep {
            for j in i..keep {
                h[(i, j)] = t[(i, j)];
            }
            h[(keep, i)] = b[i];
        }
        k = keep;
    }
    Err(TeigError::NoConvergence { restarts: req.max_restarts, residuals: last_residuals })
}

/// `A`-normalize and fix the phase so the largest entry is real positive.
fn normalize(pencil: &Pencil, x: &mut [C64]) {
    let a = pencil.form_a(x, x).re.max(f64::MIN_POSITIVE).sqrt();
    let big = x.iter().copied().fold(ZERO, |acc, v| if v.norm() > acc.norm() { v } else { acc });
    let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { C64::new(1.0, 0.0) };
    x.iter_mut().for_each(|v| *v *= phase / a);
}

/// `A`-orthonormalize a cluster of vectors; returns whether any was dependent.
fn a_gram_schmidt(pencil: &Pencil, vs: &mut [Vec<C64>]) -> bool {
    let mut dependent = false;
    for i in 0..vs.len() {
        let before = pencil.form_a(&vs[i], &vs[i]).re.sqrt();
        for j in 0..i {
            let c = pencil.form_a(&vs[i], &vs[j]);
            let vj = vs[j].clone();
            vs[i].iter_mut().zip(&vj).for_each(|(a, b)| *a -= c * b);
        }
        let after = pencil.form_a(&vs[i], &vs[i]).re.sqrt();
        if after <= 1e-6 * before {
            dependent = true;
        }
        normalize(pencil, &mut vs[i]);
    }
    dependent
}

/// Sort physical pairs by ascending `Re k`, then `|Im k|`, with `+Im` first
/// in a conjugate pair; non-physical ones follow. Conjugate partners share
/// one averaged key so rounding cannot separate them.
fn sort_pairs(pairs: &mut Vec<EigenPair>) {
    let keys: Vec<(bool, f64, f64, f64)> = pairs
        .iter()
        .map(|p| {
            let partner = pairs.iter().find(|q| {
                q.lambda.im * p.lambda.im < 0.0 && (q.lambda - p.lambda.conj()).norm() <= CLUSTER_TOL * p.lambda.norm()
            });
            let (re, im) = match partner {
                Some(q) => (0.5 * (p.k.re + q.k.re), 0.5 * (p.k.im.abs() + q.k.im.abs())),
                None => (p.k.re, p.k.im.abs()),
            };
            (!p.physical, re, im, -p.k.im.signum())
        })
        .collect();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| keys[a].partial_cmp(&keys[b]).expect("finite eigenvalues"));
    let mut taken: Vec<Option<EigenPair>> = std::mem::take(pairs).into_iter().map(Some).collect();
    *pairs = order.into_iter().map(|i| taken[i].take().expect("permutation")).collect();
}

/// Pair right and left eigenvectors, normalize and sort.
fn finalize(
    pencil: &Pencil,
    right: Vec<(C64, Vec<C64>)>,
    left: Vec<(C64, Vec<C64>)>,
    how_many: usize,
    residual_check: f64,
    warnings: &mut Vec<String>,
) -> Result<Vec<EigenPair>> {
    // λ = 0 (k = ∞) comes from the singular B and has no transmission meaning
    let top = right.iter().chain(&left).map(|p| p.0.norm()).fold(0.0, f64::max);
    let finite = |p: &(C64, Vec<C64>)| p.0.norm() > NULL_TOL * top;
    let mut right: Vec<_> = right.into_iter().filter(finite).collect();
    let left: Vec<_> = left.into_iter().filter(finite).collect();
    // dominant first, then group clusters
    right.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()));
    let mut count = how_many.min(right.len());
    while count > 0 && count < right.len() {
        let last = right[count - 1].0;
        if (right[count].0.norm() - last.norm()).abs() <= 1e-6 * last.norm() {
            count += 1;
        } else {
            break;
        }
    }
    right.truncate(count);

    let mut used = vec![false; left.len()];
    let mut pairs = Vec::with_capacity(right.len());
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, (lambda, _)) in right.iter().enumerate() {
        let scale = lambda.norm().max(f64::MIN_POSITIVE);
        match clusters.iter_mut().find(|c| (right[c[0]].0 - lambda).norm() <= CLUSTER_TOL * scale) {
            Some(c) => c.push(i),
            None => clusters.push(vec![i]),
        }
    }
    for members in clusters {
        let lambda = right[members[0]].0;
        let scale = lambda.norm().max(f64::MIN_POSITIVE);
        let mut rvecs: Vec<Vec<C64>> = members.iter().map(|&i| right[i].1.clone()).collect();
        let mut lvecs = Vec::new();
        for _ in &members {
            let best = (0..left.len())
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (left[a].0 - lambda).norm().total_cmp(&(left[b].0 - lambda).norm()));
            match best {
                Some(j) if (left[j].0 - lambda).norm() <= MATCH_TOL * scale => {
                    used[j] = true;
                    lvecs.push(left[j].1.iter().map(|v| v.conj()).collect::<Vec<_>>());
                }
                _ => return Err(TeigError::EigenMatch { lambda_re: lambda.re, lambda_im: lambda.im }),
            }
        }
        if members.len() > 1 && (a_gram_schmidt(pencil, &mut rvecs) | a_gram_schmidt(pencil, &mut lvecs)) {
            warnings.push(format!("dependent eigenvectors in cluster at λ = {lambda}"));
        }
        for (pos, (&i, (mut x, mut u))) in members.iter().zip(rvecs.into_iter().zip(lvecs)).enumerate() {
            let lam = snap_real(right[i].0);
            normalize(pencil, &mut x);
            normalize(pencil, &mut u);
            let residual = pencil_residual(pencil, lam, &x);
            // u^H B = λ u^H A  <=>  B^T conj(u) = λ A conj(u)
            let cu: Vec<C64> = u.iter().map(|v| v.conj()).collect();
            let left_res = transpose_residual(pencil, lam, &cu);
            if residual > residual_check || left_res > residual_check {
                return Err(TeigError::NoConvergence { restarts: 0, residuals: vec![residual, left_res] });
            }
            pairs.push(EigenPair {
                lambda: lam,
                k: k_from_lambda(lam),
                right_vec: x,
                left_vec: u,
                residual,
                physical: lam.re > 0.0,
                cluster: pos,
            });
        }
    }
    sort_pairs(&mut pairs);
    Ok(pairs)
}

/// Dominant eigenpairs of `λ A x = B x` by Krylov–Schur.
pub fn solve_pencil(pencil: &Pencil, req: &SpectrumRequest) -> Result<Spectrum> {
    let factor = AFactor::new(pencil, req.execution)?;
    solve_pencil_factored(pencil, &factor, req)
}

/// As [`solve_pencil`], reusing a factorization of `A`.
pub fn solve_pencil_factored(pencil: &Pencil, factor: &AFactor, req: &SpectrumRequest) -> Result<Spectrum> {
    let n = pencil.dim();
    if n == 0 || req.how_many == 0 {
        return Err(TeigError::InvalidArgument("empty pencil or zero eigenpairs requested".into()));
    }
    if factor.dim() != n {
        return Err(TeigError::DimensionMismatch(format!("factor of size {} for pencil of size {n}", factor.dim())));
    }
    let si = ShiftInvert { pencil, factor, execution: req.execution };
    // a small margin keeps pairs at the cut inside the converged set
    let nev = (req.how_many + 2).min(n);
    let right_op = |x: &[C64]| si.apply(x);
    let left_op = |x: &[C64]| si.apply_transpose(x);
    let (right, left) = join(
        req.execution,
        || krylov_schur(n, &right_op, req, nev, req.seed),
        || krylov_schur(n, &left_op, req, nev, req.seed.wrapping_add(1)),
    );
    let (right, left) = (right?, left?);
    let mut warnings = Vec::new();
    let pairs = finalize(pencil, right.pairs, left.pairs, req.how_many, req.residual_check, &mut warnings)?;
    Ok(Spectrum {
        pairs,
        restarts: right.restarts.max(left.restarts),
        operator_applications: right.applications + left.applications,
        warnings,
    })
}

/// Dense reference solver: eigenvalues of `A^{-1} B` from a real Schur form,
/// eigenvectors by inverse iteration.
pub fn dense_solve_pencil(pencil: &Pencil, req: &SpectrumRequest) -> Result<Spectrum> {
    let n = pencil.dim();
    if n == 0 || n > DENSE_LIMIT {
        return Err(TeigError::InvalidArgument(format!("dense solver supports 1..={DENSE_LIMIT} unknowns, got {n}")));
    }
    let a = pencil.a_block.to_dense();
    let chol = nalgebra::Cholesky::new(a).ok_or(TeigError::NotPositiveDefinite { row: 0, pivot: f64::NAN })?;
    let c = chol.solve(&pencil.b_block.to_dense());
    let ct = chol.solve(&pencil.b_transpose.to_dense());
    let mut eigs: Vec<C64> = c.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let take = (req.how_many + 2).min(n);
    let mut take_n = take;
    while take_n < n && (eigs[take_n].norm() - eigs[take - 1].norm()).abs() <= 1e-6 * eigs[take - 1].norm() {
        take_n += 1;
    }
    let wanted = &eigs[..take_n];
    let right = inverse_iteration(&c, wanted);
    let left = inverse_iteration(&ct, wanted);
    let mut warnings = Vec::new();
    let pairs = finalize(pencil, right, left, req.how_many, req.residual_check, &mut warnings)?;
    Ok(Spectrum { pairs, restarts: 0, operator_applications: 0, warnings })
}

fn inverse_iteration(c: &DMatrix<f64>, eigs: &[C64]) -> Vec<(C64, Vec<C64>)> {
    let n = c.nrows();
    let cc = c.map(|v| C64::new(v, 0.0));
    let scale = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut out: Vec<(C64, Vec<C64>)> = Vec::new();
    for &lambda in eigs {
        let shift = lambda + C64::new(1e-10 * scale, 1e-10 * scale);
        let lu = (&cc - DMatrix::<C64>::identity(n, n) * shift).lu();
        // vectors already found for this cluster
        let cluster: Vec<Vec<C64>> = out
            .iter()
            .filter(|(z, _)| (z - lambda).norm() <= CLUSTER_TOL * lambda.norm())
            .map(|(_, v)| v.clone())
            .collect();
        let mut x = nalgebra::DVector::from_vec(random_vector(&mut rng, n));
        for _ in 0..4 {
            let mut xs: Vec<C64> = x.iter().copied().collect();
            orthogonalize(Execution::Sequential, &cluster, &mut xs);
            x = nalgebra::DVector::from_vec(xs);
            if let Some(y) = lu.solve(&x) {
                x = y.clone() / C64::new(y.norm(), 0.0);
            }
        }
        let mut xs: Vec<C64> = x.iter().copied().collect();
        let r = orthogonalize(Execution::Sequential, &cluster, &mut xs).1;
        xs.iter_mut().for_each(|v| *v /= r);
        out.push((lambda, xs));
    }
    out
}
