//! Global numbering under essential boundary conditions and assembly of the
//! mixed system.
//!
//! With `{phi_i}` the BFS basis of `X_h` and `{psi_i}` the Q2 basis of `Y_h`:
//!
//! | matrix | size    | entry                               |
//! |--------|---------|-------------------------------------|
//! | `A1`   | `N x N` | `(Δphi_j, Δphi_i)_{n-1}`            |
//! | `A2`   | `M x M` | `(∇psi_j, ∇psi_i)`                  |
//! | `S1`   | `N x N` | `(phi_j, Δphi_i)_{n-1}`             |
//! | `S2`   | `N x N` | `(Δphi_j, n phi_i)_{n-1}`           |
//! | `R`    | `N x M` | `(∇psi_j, ∇phi_i)`                  |
//! | `M`    | `M x N` | `(n phi_j, psi_i)_{n-1}`            |
//!
//! where `(u, v)_{n-1} = ∫ u v / (n - 1)`. The pencil is stored as
//! `λ A x = B x` with `A = diag(A1, A2)` and `B = -[S1 + S2, -R; M, 0]`.

use serde::{Deserialize, Serialize};

use crate::coefficients::RefractiveIndex;
use crate::elements::{bfs_eval, q2_eval, HermiteKind, PhysicalBfs, Q2BasisEval, QuadratureRule, BFS_NDOF, Q2_NDOF, Q2_NODES};
use crate::exec::{join, map_range, Execution};
use crate::mesh::StructuredMesh;
use crate::sparse::SparseMatrix;
use crate::{Result, TeigError, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Space {
    /// BFS subspace of `H0^2`, four DOFs per interior node.
    Xh,
    /// Q2 subspace of `H0^1`, one DOF per interior Q2 node.
    Yh,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub space: Space,
    pub num_dofs: usize,
    mesh_key: (crate::mesh::DomainKind, usize),
    /// Xh: first global DOF of each mesh node. Yh: DOF of each Q2 lattice point.
    entity_dofs: Vec<Option<usize>>,
    /// Q2 lattice stride (`2 * lattice_side + 1`); unused for Xh.
    q2_stride: usize,
}

/// Whether the Q2 lattice point `(qi, qj)` (half-cell units) is on the boundary.
/// `None` if the point is outside the mesh.
fn q2_point_status(mesh: &StructuredMesh, qi: usize, qj: usize) -> Option<bool> {
    let cell = |ci: isize, cj: isize| ci >= 0 && cj >= 0 && mesh.cell_at(ci as usize, cj as usize).is_some();
    let (i, j) = ((qi / 2) as isize, (qj / 2) as isize);
    match (qi % 2, qj % 2) {
        (0, 0) => mesh.node_at(qi / 2, qj / 2).map(|n| mesh.node_on_boundary[n]),
        (1, 0) => {
            let (below, above) = (cell(i, j - 1), cell(i, j));
            (below || above).then_some(below != above)
        }
        (0, 1) => {
            let (left, right) = (cell(i - 1, j), cell(i, j));
            (left || right).then_some(left != right)
        }
        _ => cell(i, j).then_some(false),
    }
}

pub fn build_dofmap(mesh: &StructuredMesh, space: Space) -> Result<DofMap> {
    let mesh_key = (mesh.domain, mesh.cells_per_unit);
    match space {
        Space::Xh => {
            let mut next = 0;
            let entity_dofs = mesh
                .node_on_boundary
                .iter()
                .map(|&b| {
                    (!b).then(|| {
                        let d = next;
                        next += 4;
                        d
                    })
                })
                .collect();
            if next == 0 {
                return Err(TeigError::NoInteriorDofs { space: "Xh" });
            }
            Ok(DofMap { space, num_dofs: next, mesh_key, entity_dofs, q2_stride: 0 })
        }
        Space::Yh => {
            let stride = 2 * mesh.lattice_side() + 1;
            let mut entity_dofs = vec![None; stride * stride];
            let mut next = 0;
            for qj in 0..stride {
                for qi in 0..stride {
                    if q2_point_status(mesh, qi, qj) == Some(false) {
                        entity_dofs[qj * stride + qi] = Some(next);
                        next += 1;
                    }
                }
            }
            if next == 0 {
                return Err(TeigError::NoInteriorDofs { space: "Yh" });
            }
            Ok(DofMap { space, num_dofs: next, mesh_key, entity_dofs, q2_stride: stride })
        }
    }
}

impl DofMap {
    fn check_mesh(&self, mesh: &StructuredMesh) -> Result<()> {
        if self.mesh_key != (mesh.domain, mesh.cells_per_unit) {
            return Err(TeigError::DimensionMismatch(format!(
                "{:?} dofmap built for {:?}, used with {:?}",
                self.space,
                self.mesh_key,
                (mesh.domain, mesh.cells_per_unit)
            )));
        }
        Ok(())
    }

    /// Global index of BFS DOF `kind` at mesh node `node`.
    pub fn bfs_dof(&self, node: usize, kind: HermiteKind) -> Option<usize> {
        debug_assert_eq!(self.space, Space::Xh);
        self.entity_dofs[node].map(|b| b + kind.index())
    }

    /// Global index of the Q2 DOF at lattice point `(qi, qj)` (half-cell units).
    pub fn q2_dof(&self, qi: usize, qj: usize) -> Option<usize> {
        debug_assert_eq!(self.space, Space::Yh);
        if qi >= self.q2_stride || qj >= self.q2_stride {
            return None;
        }
        self.entity_dofs[qj * self.q2_stride + qi]
    }

    /// Local-to-global map for one cell, in reference element order.
    pub fn cell_bfs_dofs(&self, mesh: &StructuredMesh, cell: usize) -> [Option<usize>; BFS_NDOF] {
        let mut out = [None; BFS_NDOF];
        for (c, &node) in mesh.cells[cell].iter().enumerate() {
            for kind in HermiteKind::ALL {
                out[4 * c + kind.index()] = self.bfs_dof(node, kind);
            }
        }
        out
    }

    pub fn cell_q2_dofs(&self, mesh: &StructuredMesh, cell: usize) -> [Option<usize>; Q2_NDOF] {
        let [ci, cj] = mesh.cell_lattice[cell];
        let mut out = [None; Q2_NDOF];
        for (k, p) in Q2_NODES.iter().enumerate() {
            let qi = (2 * ci as isize + 1 + p[0] as isize) as usize;
            let qj = (2 * cj as isize + 1 + p[1] as isize) as usize;
            out[k] = self.q2_dof(qi, qj);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixKind {
    A1,
    A2,
    S1,
    S2,
    R,
    M,
}

/// The six Galerkin matrices of the mixed formulation.
#[derive(Clone, Debug)]
pub struct MatrixSet {
    pub a1: SparseMatrix,
    pub a2: SparseMatrix,
    pub s1: SparseMatrix,
    pub s2: SparseMatrix,
    pub r: SparseMatrix,
    pub m: SparseMatrix,
}

impl MatrixSet {
    pub fn get(&self, which: MatrixKind) -> &SparseMatrix {
        match which {
            MatrixKind::A1 => &self.a1,
            MatrixKind::A2 => &self.a2,
            MatrixKind::S1 => &self.s1,
            MatrixKind::S2 => &self.s2,
            MatrixKind::R => &self.r,
            MatrixKind::M => &self.m,
        }
    }
}

/// Element matrices of one cell, indexed `[test][trial]`.
struct ElementMatrices {
    a1: [[f64; 16]; 16],
    s1: [[f64; 16]; 16],
    s2: [[f64; 16]; 16],
    r: [[f64; 9]; 16],
    m: [[f64; 16]; 9],
    a2: [[f64; 9]; 9],
}

/// Reference basis data at the quadrature points, mapped to a cell of side `s`.
pub(crate) struct Tabulation {
    bfs: Vec<PhysicalBfs>,
    q2: Vec<Q2BasisEval>,
    points: Vec<[f64; 2]>,
    /// Quadrature weights times the Jacobian determinant.
    weights: Vec<f64>,
    side: f64,
}

impl Tabulation {
    pub(crate) fn new(side: f64, quad: &QuadratureRule) -> Self {
        let d1 = 2.0 / side;
        let jac = 0.25 * side * side;
        let q2 = quad
            .points
            .iter()
            .map(|&p| {
                let mut e = q2_eval(p);
                e.grad_x.iter_mut().for_each(|g| *g *= d1);
                e.grad_y.iter_mut().for_each(|g| *g *= d1);
                e
            })
            .collect();
        Tabulation {
            bfs: quad.points.iter().map(|&p| bfs_eval(p).to_physical(side)).collect(),
            q2,
            points: quad.points.clone(),
            weights: quad.weights.iter().map(|w| w * jac).collect(),
            side,
        }
    }

    fn element(&self, origin: [f64; 2], index: &RefractiveIndex) -> Result<ElementMatrices> {
        let mut e = ElementMatrices {
            a1: [[0.0; 16]; 16],
            s1: [[0.0; 16]; 16],
            s2: [[0.0; 16]; 16],
            r: [[0.0; 9]; 16],
            m: [[0.0; 16]; 9],
            a2: [[0.0; 9]; 9],
        };
        let half = 0.5 * self.side;
        for q in 0..self.points.len() {
            let p = [origin[0] + half * (self.points[q][0] + 1.0), origin[1] + half * (self.points[q][1] + 1.0)];
            let n = index.eval_n(p);
            let wt = index.eval_weight(p)?;
            let w = self.weights[q];
            let b = &self.bfs[q];
            let g = &self.q2[q];
            let mut lap = [0.0; 16];
            for (i, l) in lap.iter_mut().enumerate() {
                *l = b.laplacian(i);
            }
            for i in 0..16 {
                let wl = w * wt * lap[i];
                let wnv = w * wt * n * b.values[i];
                for (j, (lj, vj)) in lap.iter().zip(&b.values).enumerate() {
                    e.a1[i][j] += wl * lj;
                    e.s1[i][j] += wl * vj;
                    e.s2[i][j] += wnv * lj;
                }
                for j in 0..9 {
                    e.r[i][j] += w * (g.grad_x[j] * b.grad_x[i] + g.grad_y[j] * b.grad_y[i]);
                }
            }
            for i in 0..9 {
                let wnp = w * wt * n * g.values[i];
                for j in 0..16 {
                    e.m[i][j] += wnp * b.values[j];
                }
                for j in 0..9 {
                    e.a2[i][j] += w * (g.grad_x[j] * g.grad_x[i] + g.grad_y[j] * g.grad_y[i]);
                }
            }
        }
        Ok(e)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AssemblyOptions {
    pub execution: Execution,
}

type Triplets = Vec<(usize, usize, f64)>;

fn scatter<const R: usize, const C: usize>(
    out: &mut Triplets,
    rows: &[Option<usize>; R],
    cols: &[Option<usize>; C],
    local: &[[f64; C]; R],
) {
    for (i, ri) in rows.iter().enumerate() {
        let Some(gi) = *ri else { continue };
        for (j, cj) in cols.iter().enumerate() {
            if let Some(gj) = *cj {
                out.push((gi, gj, local[i][j]));
            }
        }
    }
}

/// Assemble all six matrices in one traversal of the cells.
pub fn assemble_all(
    mesh: &StructuredMesh,
    index: &RefractiveIndex,
    dof_x: &DofMap,
    dof_y: &DofMap,
    quad: &QuadratureRule,
    opts: AssemblyOptions,
) -> Result<MatrixSet> {
    if dof_x.space != Space::Xh || dof_y.space != Space::Yh {
        return Err(TeigError::DimensionMismatch("expected (Xh, Yh) dofmaps".into()));
    }
    dof_x.check_mesh(mesh)?;
    dof_y.check_mesh(mesh)?;
    let tab = Tabulation::new(mesh.side(), quad);
    let (nx, ny) = (dof_x.num_dofs, dof_y.num_dofs);

    // Element matrices are computed in parallel chunks and scattered in cell
    // order, so the triplet sequence does not depend on the thread count.
    const CHUNK: usize = 512;
    let mut t: [Triplets; 6] = Default::default();
    for chunk_start in (0..mesh.cells.len()).step_by(CHUNK) {
        let len = CHUNK.min(mesh.cells.len() - chunk_start);
        let elems = map_range(opts.execution, len, |k| tab.element(mesh.cell_origin(chunk_start + k), index));
        for (k, e) in elems.into_iter().enumerate() {
            let e = e?;
            let cell = chunk_start + k;
            let gx = dof_x.cell_bfs_dofs(mesh, cell);
            let gy = dof_y.cell_q2_dofs(mesh, cell);
            scatter(&mut t[0], &gx, &gx, &e.a1);
            scatter(&mut t[1], &gy, &gy, &e.a2);
            scatter(&mut t[2], &gx, &gx, &e.s1);
            scatter(&mut t[3], &gx, &gx, &e.s2);
            scatter(&mut t[4], &gx, &gy, &e.r);
            scatter(&mut t[5], &gy, &gx, &e.m);
        }
    }
    let [ta1, ta2, ts1, ts2, tr, tm] = t;
    let dims = [(nx, nx), (ny, ny), (nx, nx), (nx, nx), (nx, ny), (ny, nx)];
    let mats = map_range(opts.execution, 6, |k| {
        let trip = match k {
            0 => &ta1,
            1 => &ta2,
            2 => &ts1,
            3 => &ts2,
            4 => &tr,
            _ => &tm,
        };
        SparseMatrix::from_triplets(dims[k].0, dims[k].1, trip.clone())
    });
    let mut it = mats.into_iter();
    let mut next = || it.next().expect("six matrices");
    Ok(MatrixSet { a1: next()?, a2: next()?, s1: next()?, s2: next()?, r: next()?, m: next()? })
}

pub fn assemble_matrix(
    which: MatrixKind,
    mesh: &StructuredMesh,
    index: &RefractiveIndex,
    dof_x: &DofMap,
    dof_y: &DofMap,
    quad: &QuadratureRule,
) -> Result<SparseMatrix> {
    let set = assemble_all(mesh, index, dof_x, dof_y, quad, AssemblyOptions::default())?;
    Ok(set.get(which).clone())
}

/// The generalized pencil `λ A x = B x` with block-diagonal SPD `A`.
#[derive(Clone, Debug)]
pub struct Pencil {
    pub a1: SparseMatrix,
    pub a2: SparseMatrix,
    pub a_block: SparseMatrix,
    pub b_block: SparseMatrix,
    pub b_transpose: SparseMatrix,
}

impl Pencil {
    /// `a2` may be `0 x 0` for pencils with a single diagonal block.
    pub fn new(a1: SparseMatrix, a2: SparseMatrix, b_block: SparseMatrix) -> Result<Self> {
        let (n1, n2) = (a1.n_rows(), a2.n_rows());
        let n = n1 + n2;
        if a1.n_cols() != n1 || a2.n_cols() != n2 || b_block.n_rows() != n || b_block.n_cols() != n {
            return Err(TeigError::DimensionMismatch(format!(
                "pencil blocks {}x{}, {}x{} with B {}x{}",
                a1.n_rows(),
                a1.n_cols(),
                a2.n_rows(),
                a2.n_cols(),
                b_block.n_rows(),
                b_block.n_cols()
            )));
        }
        let a_block = SparseMatrix::from_blocks(&[n1, n2], &[n1, n2], &[vec![Some((&a1, 1.0)), None], vec![None, Some((&a2, 1.0))]])?;
        let b_transpose = b_block.transpose();
        Ok(Pencil { a1, a2, a_block, b_block, b_transpose })
    }

    pub fn dim(&self) -> usize {
        self.a_block.n_rows()
    }

    /// Size of the first diagonal block.
    pub fn split(&self) -> usize {
        self.a1.n_rows()
    }

    /// `A((x), (y)) = y^H A x`
    pub fn form_a(&self, x: &[C64], y: &[C64]) -> C64 {
        self.a_block.sesquilinear(x, y)
    }

    /// `B((x), (y)) = y^H B x`
    pub fn form_b(&self, x: &[C64], y: &[C64]) -> C64 {
        self.b_block.sesquilinear(x, y)
    }
}

#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub pencil: Pencil,
    pub matrices: MatrixSet,
    pub dof_x: DofMap,
    pub dof_y: DofMap,
}

pub fn assemble_block_system(
    mesh: &StructuredMesh,
    index: &RefractiveIndex,
    quad: &QuadratureRule,
    opts: AssemblyOptions,
) -> Result<BlockSystem> {
    let (dx, dy) = join(opts.execution, || build_dofmap(mesh, Space::Xh), || build_dofmap(mesh, Space::Yh));
    let (dof_x, dof_y) = (dx?, dy?);
    let matrices = assemble_all(mesh, index, &dof_x, &dof_y, quad, opts)?;
    let (nx, ny) = (dof_x.num_dofs, dof_y.num_dofs);
    // B = -[S1 + S2, -R; M, 0]
    let b_block = SparseMatrix::from_blocks(
        &[nx, ny],
        &[nx, ny],
        &[
            vec![Some((&matrices.s1, -1.0)), Some((&matrices.r, 1.0))],
            vec![Some((&matrices.m, -1.0)), None],
        ],
    )?;
    // S1 + S2 share a pattern; merging their triplets sums them
    let b_block = {
        let extra = SparseMatrix::from_blocks(&[nx, ny], &[nx, ny], &[vec![Some((&matrices.s2, -1.0)), None], vec![None, None]])?;
        let mut t = b_block.triplets();
        t.extend(extra.triplets());
        SparseMatrix::from_triplets(nx + ny, nx + ny, t)?
    };
    let pencil = Pencil::new(matrices.a1.clone(), matrices.a2.clone(), b_block)?;
    Ok(BlockSystem { pencil, matrices, dof_x, dof_y })
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.pencil.dim()
    }
}

/// Point values of a discrete BFS function.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BfsValue {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dyy: f64,
    pub dxy: f64,
}

impl BfsValue {
    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

/// Evaluate `u_h = Σ c_i phi_i` at reference point `r` of `cell`.
pub fn eval_bfs(mesh: &StructuredMesh, dofs: &DofMap, coeffs: &[f64], cell: usize, r: [f64; 2]) -> BfsValue {
    let b = bfs_eval(r).to_physical(mesh.side());
    let g = dofs.cell_bfs_dofs(mesh, cell);
    let mut out = BfsValue::default();
    for (i, gi) in g.iter().enumerate() {
        if let Some(k) = *gi {
            let c = coeffs[k];
            out.value += c * b.values[i];
            out.dx += c * b.grad_x[i];
            out.dy += c * b.grad_y[i];
            out.dxx += c * b.dxx[i];
            out.dyy += c * b.dyy[i];
            out.dxy += c * b.dxy[i];
        }
    }
    out
}

/// Evaluate `w_h = Σ c_i psi_i` and its physical gradient at reference point `r` of `cell`.
pub fn eval_q2(mesh: &StructuredMesh, dofs: &DofMap, coeffs: &[f64], cell: usize, r: [f64; 2]) -> [f64; 3] {
    let e = q2_eval(r);
    let d1 = 2.0 / mesh.side();
    let g = dofs.cell_q2_dofs(mesh, cell);
    let mut out = [0.0; 3];
    for (i, gi) in g.iter().enumerate() {
        if let Some(k) = *gi {
            out[0] += coeffs[k] * e.values[i];
            out[1] += coeffs[k] * e.grad_x[i] * d1;
            out[2] += coeffs[k] * e.grad_y[i] * d1;
        }
    }
    out
}
