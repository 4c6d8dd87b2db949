//! Two-grid correction of a coarse eigenpair.
//!
//! Given a coarse eigenvalue `λ_H` with right and left vectors, one linear
//! solve on the fine grid for each:
//!
//! ```text
//! λ_H      A_h x_h = B_h   P x_H
//! conj(λ_H) A_h y_h = B_h^T P y_H
//! ```
//!
//! and the generalized Rayleigh quotient `λ^h = y_h^H B_h x_h / y_h^H A_h x_h`
//! gives `k = 1/sqrt(λ^h)`. Both solves reuse one Cholesky factorization of
//! the symmetric `A_h`.

use crate::assembly::{assemble_block_system, eval_bfs, eval_q2, AssemblyOptions, BlockSystem, Pencil};
use crate::coefficients::RefractiveIndex;
use crate::eigensolver::{k_from_lambda, pencil_residual, snap_real, AFactor, EigenPair, ShiftInvert, Spectrum, CLUSTER_TOL};
use crate::elements::{HermiteKind, QuadratureRule};
use crate::exec::{map_range, Execution};
use crate::mesh::{build_mesh, DomainKind, StructuredMesh};
use crate::sparse::SparseMatrix;
use crate::{Result, TeigError, C64};

/// Smallest accepted `|y_H^H B_H x_H|` for `A`-normalized coarse vectors.
pub const MIN_ADJOINT_PAIRING: f64 = 1e-3;

/// Mesh, assembled system and factorization of `A` on one grid.
#[derive(Clone, Debug)]
pub struct Level {
    pub mesh: StructuredMesh,
    pub system: BlockSystem,
    pub factor: AFactor,
}

impl Level {
    pub fn build(
        domain: DomainKind,
        cells_per_unit: usize,
        index: &RefractiveIndex,
        quad: &QuadratureRule,
        exec: Execution,
    ) -> Result<Level> {
        let mesh = build_mesh(domain, cells_per_unit)?;
        let system = assemble_block_system(&mesh, index, quad, AssemblyOptions { execution: exec })?;
        let factor = AFactor::new(&system.pencil, exec)?;
        Ok(Level { mesh, system, factor })
    }

    pub fn pencil(&self) -> &Pencil {
        &self.system.pencil
    }
}

/// Prolongation `P = diag(P1, P2)` from the coarse to a nested fine grid.
///
/// Fine BFS DOFs are the value, gradient and mixed derivative at fine nodes,
/// so row `(node, kind)` of `P1` samples that derivative of each coarse BFS
/// basis function. `P2` samples coarse Q2 functions at fine Q2 nodes. Both
/// are exact because the coarse spaces are contained in the fine ones.
pub fn build_prolongation(coarse: &Level, fine: &Level, exec: Execution) -> Result<SparseMatrix> {
    let (cm, fm) = (&coarse.mesh, &fine.mesh);
    if cm.domain != fm.domain || cm.cells_per_unit == 0 || fm.cells_per_unit % cm.cells_per_unit != 0 {
        return Err(TeigError::NotNested(format!(
            "{} with {} cells per unit is not refined by {} with {}",
            cm.domain.name(),
            cm.cells_per_unit,
            fm.domain.name(),
            fm.cells_per_unit
        )));
    }
    let (cx, cy) = (&coarse.system.dof_x, &coarse.system.dof_y);
    let (fx, fy) = (&fine.system.dof_x, &fine.system.dof_y);
    let (ncx, ncy, nfx, nfy) = (cx.num_dofs, cy.num_dofs, fx.num_dofs, fy.num_dofs);

    let locate = |p: [f64; 2]| cm.locate(p).ok_or_else(|| TeigError::NotNested(format!("fine point {p:?} outside coarse mesh")));

    let bfs_rows = map_range(exec, fm.nodes.len(), |node| -> Result<Vec<(usize, usize, f64)>> {
        let mut out = Vec::new();
        if fx.bfs_dof(node, HermiteKind::Value).is_none() {
            return Ok(out);
        }
        let (cell, r) = locate(fm.nodes[node])?;
        let basis = crate::elements::bfs_eval(r).to_physical(cm.side());
        let cols = cx.cell_bfs_dofs(cm, cell);
        for kind in HermiteKind::ALL {
            let row = fx.bfs_dof(node, kind).expect("interior node");
            let vals = match kind {
                HermiteKind::Value => &basis.values,
                HermiteKind::Dx => &basis.grad_x,
                HermiteKind::Dy => &basis.grad_y,
                HermiteKind::Dxy => &basis.dxy,
            };
            for (i, c) in cols.iter().enumerate() {
                if let Some(col) = *c {
                    if vals[i] != 0.0 {
                        out.push((row, col, vals[i]));
                    }
                }
            }
        }
        Ok(out)
    });

    let stride = 2 * fm.lattice_side() + 1;
    let origin = fm.domain.origin();
    let half = 0.5 * fm.side();
    let q2_rows = map_range(exec, stride * stride, |q| -> Result<Vec<(usize, usize, f64)>> {
        let (qi, qj) = (q % stride, q / stride);
        let mut out = Vec::new();
        let Some(row) = fy.q2_dof(qi, qj) else { return Ok(out) };
        let p = [origin[0] + qi as f64 * half, origin[1] + qj as f64 * half];
        let (cell, r) = locate(p)?;
        let basis = crate::elements::q2_eval(r);
        for (i, c) in cy.cell_q2_dofs(cm, cell).iter().enumerate() {
            if let Some(col) = *c {
                if basis.values[i] != 0.0 {
                    out.push((nfx + row, ncx + col, basis.values[i]));
                }
            }
        }
        Ok(out)
    });

    let mut triplets = Vec::new();
    for rows in bfs_rows.into_iter().chain(q2_rows) {
        triplets.extend(rows?);
    }
    SparseMatrix::from_triplets(nfx + nfy, ncx + ncy, triplets)
}

/// Two-grid approximation of one eigenvalue.
#[derive(Clone, Debug)]
pub struct TwoGridEigen {
    pub lambda_coarse: C64,
    pub k_coarse: C64,
    pub lambda: C64,
    pub k: C64,
    pub x_h: Vec<C64>,
    pub y_h: Vec<C64>,
    /// `y_H^H B_H x_H` for the `A`-normalized coarse vectors.
    pub coarse_pairing: C64,
    /// Normwise backward error of `(λ^h, x_h)` on the fine pencil.
    pub residual: f64,
}

/// Generalized Rayleigh quotient `y^H B x / y^H A x`.
pub fn rayleigh_quotient(pencil: &Pencil, x: &[C64], y: &[C64]) -> Result<C64> {
    let a = pencil.form_a(x, y);
    let b = pencil.form_b(x, y);
    let scale = (pencil.form_a(x, x).re * pencil.form_a(y, y).re).sqrt();
    if a.norm().is_nan() || a.norm() <= 1e-14 * scale {
        return Err(TeigError::ZeroDenominator { value: a.norm() });
    }
    Ok(b / a)
}

/// Both sides of the error identity for the Rayleigh quotient: with
/// `(λ, u, u*)` an eigentriple,
/// `RQ(x, y) - λ = (y - u*)^H (B - λ A)(x - u) / y^H A x`.
pub fn rayleigh_identity_sides(pencil: &Pencil, pair: &EigenPair, x: &[C64], y: &[C64]) -> Result<(C64, C64)> {
    let lhs = rayleigh_quotient(pencil, x, y)? - pair.lambda;
    let ex: Vec<C64> = x.iter().zip(&pair.right_vec).map(|(a, b)| a - b).collect();
    let ey: Vec<C64> = y.iter().zip(&pair.left_vec).map(|(a, b)| a - b).collect();
    let rhs = (pencil.form_b(&ex, &ey) - pair.lambda * pencil.form_a(&ex, &ey)) / pencil.form_a(x, y);
    Ok((lhs, rhs))
}

fn a_normalized(pencil: &Pencil, x: &[C64]) -> Vec<C64> {
    let a = pencil.form_a(x, x).re.sqrt();
    x.iter().map(|v| v / a).collect()
}

/// Adjoint coarse vector: the `A`-orthogonal projection of `x_H` onto the
/// span of the left vectors of its eigenvalue cluster. For a simple
/// eigenvalue this is the left vector itself, rescaled.
fn adjoint_start(pencil: &Pencil, spectrum: &Spectrum, pair: &EigenPair, x: &[C64]) -> Vec<C64> {
    let lefts: Vec<&Vec<C64>> = spectrum
        .pairs
        .iter()
        .filter(|p| (p.lambda - pair.lambda).norm() <= CLUSTER_TOL * pair.lambda.norm())
        .map(|p| &p.left_vec)
        .collect();
    let m = lefts.len();
    let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| pencil.form_a(lefts[j], lefts[i]));
    let rhs = nalgebra::DVector::from_fn(m, |i, _| pencil.form_a(x, lefts[i]));
    let coeffs = gram.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::from_element(m, C64::new(1.0, 0.0)));
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for (c, u) in coeffs.iter().zip(&lefts) {
        y.iter_mut().zip(u.iter()).for_each(|(a, b)| *a += c * b);
    }
    if pencil.form_a(&y, &y).re.sqrt() <= 1e-12 {
        return pair.left_vec.clone();
    }
    a_normalized(pencil, &y)
}

/// Correct the `j`-th physical coarse eigenpair on the fine level.
pub fn two_grid_solve(
    coarse: &Level,
    spectrum: &Spectrum,
    fine: &Level,
    prolongation: &SparseMatrix,
    j: usize,
    exec: Execution,
) -> Result<TwoGridEigen> {
    let (cp, fp) = (coarse.pencil(), fine.pencil());
    if prolongation.n_rows() != fp.dim() || prolongation.n_cols() != cp.dim() {
        return Err(TeigError::DimensionMismatch(format!(
            "prolongation {}x{} between systems of size {} and {}",
            prolongation.n_rows(),
            prolongation.n_cols(),
            cp.dim(),
            fp.dim()
        )));
    }
    let pair = spectrum.physical(j)?;
    let x_coarse = a_normalized(cp, &pair.right_vec);
    let y_coarse = adjoint_start(cp, spectrum, pair, &x_coarse);
    let coarse_pairing = cp.form_b(&x_coarse, &y_coarse);
    if coarse_pairing.norm().is_nan() || coarse_pairing.norm() <= MIN_ADJOINT_PAIRING {
        return Err(TeigError::WeakAdjointPairing { value: coarse_pairing.norm(), threshold: MIN_ADJOINT_PAIRING });
    }

    let si = ShiftInvert { pencil: fp, factor: &fine.factor, execution: exec };
    let lam = pair.lambda;
    let (px, py) = (prolongation.matvec_with(exec, &x_coarse), prolongation.matvec_with(exec, &y_coarse));
    let (mut x_h, mut y_h) = crate::exec::join(exec, || si.apply(&px), || si.apply_transpose(&py));
    x_h.iter_mut().for_each(|v| *v /= lam);
    y_h.iter_mut().for_each(|v| *v /= lam.conj());

    let lambda = snap_real(rayleigh_quotient(fp, &x_h, &y_h)?);
    let residual = pencil_residual(fp, lambda, &x_h);
    Ok(TwoGridEigen {
        lambda_coarse: lam,
        k_coarse: pair.k,
        lambda,
        k: k_from_lambda(lambda),
        x_h,
        y_h,
        coarse_pairing,
        residual,
    })
}

/// Evaluate the discrete pair `(u_h, w_h)` at a physical point: value of
/// `u_h` with its gradient and mixed derivative, then the value of `w_h`.
pub fn evaluate_fields(level: &Level, coeffs: &[f64], p: [f64; 2]) -> Option<[f64; 5]> {
    let (cell, r) = level.mesh.locate(p)?;
    let nx = level.system.dof_x.num_dofs;
    let u = eval_bfs(&level.mesh, &level.system.dof_x, &coeffs[..nx], cell, r);
    let w = eval_q2(&level.mesh, &level.system.dof_y, &coeffs[nx..], cell, r);
    Some([u.value, u.dx, u.dy, u.dxy, w[0]])
}
