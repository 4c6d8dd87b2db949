//! Structured quadrilateral meshes of the unit square and the L-shaped domain.
//!
//! Every cell is an axis-aligned square of side `s = 1/cells_per_unit`. All
//! entities live on an integer lattice anchored at the domain's lower-left
//! corner, which makes nesting between refinement levels exact.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Result, TeigError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DomainKind {
    /// `(-1/2, 1/2)^2`
    UnitSquare,
    /// `(-1, 1)^2` minus `[0, 1] x [-1, 0]`
    LShaped,
}

impl DomainKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "square" | "unit-square" | "UnitSquare" => Ok(DomainKind::UnitSquare),
            "lshape" | "l-shape" | "LShaped" => Ok(DomainKind::LShaped),
            other => Err(TeigError::InvalidArgument(format!("unknown domain '{other}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DomainKind::UnitSquare => "square",
            DomainKind::LShaped => "lshape",
        }
    }

    /// Lower-left corner of the bounding box.
    pub fn origin(self) -> [f64; 2] {
        match self {
            DomainKind::UnitSquare => [-0.5, -0.5],
            DomainKind::LShaped => [-1.0, -1.0],
        }
    }

    /// Side of the bounding box in length units.
    pub fn extent(self) -> usize {
        match self {
            DomainKind::UnitSquare => 1,
            DomainKind::LShaped => 2,
        }
    }

    pub fn area(self) -> f64 {
        match self {
            DomainKind::UnitSquare => 1.0,
            DomainKind::LShaped => 3.0,
        }
    }

    /// Whether lattice cell `(ci, cj)` belongs to the domain, with
    /// `cells_per_unit` cells along a unit length.
    fn has_cell(self, ci: usize, cj: usize, cells_per_unit: usize) -> bool {
        let side = self.extent() * cells_per_unit;
        if ci >= side || cj >= side {
            return false;
        }
        match self {
            DomainKind::UnitSquare => true,
            DomainKind::LShaped => !(ci >= cells_per_unit && cj < cells_per_unit),
        }
    }

    /// Distance from a point in the closure of the domain to its boundary.
    pub fn distance_to_boundary(self, p: [f64; 2]) -> f64 {
        let [x, y] = p;
        match self {
            DomainKind::UnitSquare => (0.5 - x.abs()).min(0.5 - y.abs()),
            DomainKind::LShaped => {
                let outer = (1.0 - x.abs()).min(1.0 - y.abs());
                // segments x = 0, y in [-1, 0] and y = 0, x in [0, 1]
                let seg_v = {
                    let cy = y.clamp(-1.0, 0.0);
                    (x * x + (y - cy) * (y - cy)).sqrt()
                };
                let seg_h = {
                    let cx = x.clamp(0.0, 1.0);
                    ((x - cx) * (x - cx) + y * y).sqrt()
                };
                outer.min(seg_v).min(seg_h)
            }
        }
    }
}

/// How a refined mesh relates to the mesh it was refined from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub parent_cells_per_unit: usize,
    pub factor: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredMesh {
    pub domain: DomainKind,
    pub cells_per_unit: usize,
    /// Physical coordinates, lexicographic (y-major, then x).
    pub nodes: Vec<[f64; 2]>,
    /// Integer lattice coordinates of each node.
    pub node_lattice: Vec<[usize; 2]>,
    /// Corner node indices, counterclockwise from the lower-left corner.
    pub cells: Vec<[usize; 4]>,
    /// Lattice coordinates of each cell's lower-left corner.
    pub cell_lattice: Vec<[usize; 2]>,
    pub edges: Vec<[usize; 2]>,
    pub node_on_boundary: Vec<bool>,
    pub edge_on_boundary: Vec<bool>,
    pub lineage: Option<Lineage>,
    node_lookup: Vec<Option<usize>>,
    cell_lookup: Vec<Option<usize>>,
}

pub fn build_mesh(domain: DomainKind, cells_per_unit: usize) -> Result<StructuredMesh> {
    if cells_per_unit == 0 {
        return Err(TeigError::InvalidArgument("cells_per_unit must be at least 1".into()));
    }
    let n = cells_per_unit;
    let side = domain.extent() * n;
    let s = 1.0 / n as f64;
    let origin = domain.origin();
    let stride = side + 1;

    let cell_at = |ci: isize, cj: isize| -> bool {
        ci >= 0 && cj >= 0 && domain.has_cell(ci as usize, cj as usize, n)
    };

    let mut node_lookup = vec![None; stride * stride];
    let mut nodes = Vec::new();
    let mut node_lattice = Vec::new();
    let mut node_on_boundary = Vec::new();
    for j in 0..=side {
        for i in 0..=side {
            let (ii, jj) = (i as isize, j as isize);
            let around = [
                cell_at(ii - 1, jj - 1),
                cell_at(ii, jj - 1),
                cell_at(ii, jj),
                cell_at(ii - 1, jj),
            ];
            if !around.iter().any(|&c| c) {
                continue;
            }
            node_lookup[j * stride + i] = Some(nodes.len());
            nodes.push([origin[0] + i as f64 * s, origin[1] + j as f64 * s]);
            node_lattice.push([i, j]);
            node_on_boundary.push(!around.iter().all(|&c| c));
        }
    }

    let mut cell_lookup = vec![None; side * side];
    let mut cells = Vec::new();
    let mut cell_lattice = Vec::new();
    for cj in 0..side {
        for ci in 0..side {
            if !domain.has_cell(ci, cj, n) {
                continue;
            }
            let id = |i: usize, j: usize| node_lookup[j * stride + i].expect("cell corner exists");
            cell_lookup[cj * side + ci] = Some(cells.len());
            cells.push([id(ci, cj), id(ci + 1, cj), id(ci + 1, cj + 1), id(ci, cj + 1)]);
            cell_lattice.push([ci, cj]);
        }
    }

    let mut edges = Vec::new();
    let mut edge_on_boundary = Vec::new();
    for (a, &[i, j]) in node_lattice.iter().enumerate() {
        let (ii, jj) = (i as isize, j as isize);
        // edge to the right: cells below and above it
        if i < side {
            let below = cell_at(ii, jj - 1);
            let above = cell_at(ii, jj);
            if below || above {
                let b = node_lookup[j * stride + i + 1].expect("edge end exists");
                edges.push([a, b]);
                edge_on_boundary.push(below != above);
            }
        }
        // edge upwards: cells left and right of it
        if j < side {
            let left = cell_at(ii - 1, jj);
            let right = cell_at(ii, jj);
            if left || right {
                let b = node_lookup[(j + 1) * stride + i].expect("edge end exists");
                edges.push([a, b]);
                edge_on_boundary.push(left != right);
            }
        }
    }

    Ok(StructuredMesh {
        domain,
        cells_per_unit,
        nodes,
        node_lattice,
        cells,
        cell_lattice,
        edges,
        node_on_boundary,
        edge_on_boundary,
        lineage: None,
        node_lookup,
        cell_lookup,
    })
}

/// Split every cell into `factor x factor` congruent cells.
pub fn refine(mesh: &StructuredMesh, factor: usize) -> Result<StructuredMesh> {
    if factor == 0 {
        return Err(TeigError::InvalidArgument("refinement factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(mesh.clone());
    }
    let mut fine = build_mesh(mesh.domain, mesh.cells_per_unit * factor)?;
    fine.lineage = Some(Lineage { parent_cells_per_unit: mesh.cells_per_unit, factor });
    Ok(fine)
}

impl StructuredMesh {
    /// Cell side length `s`.
    pub fn side(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    /// Mesh size as the cell diagonal, `s * sqrt(2)`.
    pub fn mesh_size_h(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.side()
    }

    /// Number of cells along one side of the bounding box.
    pub fn lattice_side(&self) -> usize {
        self.domain.extent() * self.cells_per_unit
    }

    pub fn num_interior_nodes(&self) -> usize {
        self.node_on_boundary.iter().filter(|&&b| !b).count()
    }

    pub fn node_at(&self, i: usize, j: usize) -> Option<usize> {
        let stride = self.lattice_side() + 1;
        if i >= stride || j >= stride {
            return None;
        }
        self.node_lookup[j * stride + i]
    }

    pub fn cell_at(&self, ci: usize, cj: usize) -> Option<usize> {
        let side = self.lattice_side();
        if ci >= side || cj >= side {
            return None;
        }
        self.cell_lookup[cj * side + ci]
    }

    /// Lower-left physical corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        self.nodes[self.cells[cell][0]]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let [x, y] = self.cell_origin(cell);
        let h = 0.5 * self.side();
        [x + h, y + h]
    }

    /// Locate a cell containing a physical point of the closed domain and
    /// return it with the point's reference coordinates in `[-1, 1]^2`.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let origin = self.domain.origin();
        let n = self.cells_per_unit as f64;
        let side = self.lattice_side();
        let fx = (p[0] - origin[0]) * n;
        let fy = (p[1] - origin[1]) * n;
        let tol = 1e-9;
        if fx < -tol || fy < -tol || fx > side as f64 + tol || fy > side as f64 + tol {
            return None;
        }
        let base_i = (fx.floor().max(0.0) as usize).min(side - 1);
        let base_j = (fy.floor().max(0.0) as usize).min(side - 1);
        // points on cell boundaries may belong to a neighbour only
        for dj in [0isize, -1, 1] {
            for di in [0isize, -1, 1] {
                let ci = base_i as isize + di;
                let cj = base_j as isize + dj;
                if ci < 0 || cj < 0 {
                    continue;
                }
                let (ci, cj) = (ci as usize, cj as usize);
                if let Some(cell) = self.cell_at(ci, cj) {
                    let xi = 2.0 * (fx - ci as f64) - 1.0;
                    let eta = 2.0 * (fy - cj as f64) - 1.0;
                    if xi.abs() <= 1.0 + 2.0 * tol && eta.abs() <= 1.0 + 2.0 * tol {
                        return Some((cell, [xi.clamp(-1.0, 1.0), eta.clamp(-1.0, 1.0)]));
                    }
                }
            }
        }
        None
    }

    /// Line-oriented debug dump: `NODE i x y`, `CELL i n0 n1 n2 n3`, `BND i`.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "NODE {i} {} {}", p[0], p[1]);
        }
        for (i, c) in self.cells.iter().enumerate() {
            let _ = writeln!(out, "CELL {i} {} {} {} {}", c[0], c[1], c[2], c[3]);
        }
        for (i, &b) in self.node_on_boundary.iter().enumerate() {
            if b {
                let _ = writeln!(out, "BND {i}");
            }
        }
        out
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| TeigError::io(path, e))?;
        f.write_all(self.dump_text().as_bytes()).map_err(|e| TeigError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = build_mesh(DomainKind::UnitSquare, 4).unwrap();
        assert_eq!(m.cells.len(), 16);
        assert_eq!(m.nodes.len(), 25);
        assert_eq!(m.node_on_boundary.iter().filter(|&&b| b).count(), 16);
        assert!((m.mesh_size_h() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(m.edges.len(), 40);
        assert_eq!(m.edge_on_boundary.iter().filter(|&&b| b).count(), 16);
    }

    #[test]
    fn lshape_counts() {
        let m = build_mesh(DomainKind::LShaped, 4).unwrap();
        assert_eq!(m.cells.len(), 48);
        assert!((m.mesh_size_h() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        let corner = m.node_at(4, 4).unwrap();
        assert_eq!(m.nodes[corner], [0.0, 0.0]);
        assert!(m.node_on_boundary[corner]);
        // no node strictly inside the removed quadrant
        assert!(m.nodes.iter().all(|p| !(p[0] > 1e-12 && p[1] < -1e-12)));
    }

    #[test]
    fn single_cell_has_no_interior() {
        let m = build_mesh(DomainKind::UnitSquare, 1).unwrap();
        assert_eq!(m.cells.len(), 1);
        assert_eq!(m.nodes.len(), 4);
        assert_eq!(m.num_interior_nodes(), 0);
    }

    #[test]
    fn rejects_zero_cells() {
        assert!(build_mesh(DomainKind::UnitSquare, 0).is_err());
        let m = build_mesh(DomainKind::UnitSquare, 2).unwrap();
        assert!(refine(&m, 0).is_err());
    }

    #[test]
    fn refine_nests() {
        let coarse = build_mesh(DomainKind::UnitSquare, 4).unwrap();
        let fine = refine(&coarse, 4).unwrap();
        assert_eq!(fine.cells_per_unit, 16);
        for p in &coarse.nodes {
            assert!(fine.nodes.iter().any(|q| (q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14));
        }
        assert_eq!(refine(&coarse, 1).unwrap(), coarse);
        let l = build_mesh(DomainKind::LShaped, 4).unwrap();
        assert_eq!(refine(&l, 2).unwrap().cells.len(), 192);
    }

    #[test]
    fn fine_cells_inside_one_coarse_cell() {
        for domain in [DomainKind::UnitSquare, DomainKind::LShaped] {
            let coarse = build_mesh(domain, 2).unwrap();
            let fine = refine(&coarse, 4).unwrap();
            let s = coarse.side();
            for c in 0..fine.cells.len() {
                let p = fine.cell_center(c);
                let hits = (0..coarse.cells.len())
                    .filter(|&k| {
                        let o = coarse.cell_origin(k);
                        p[0] > o[0] && p[0] < o[0] + s && p[1] > o[1] && p[1] < o[1] + s
                    })
                    .count();
                assert_eq!(hits, 1);
            }
        }
    }

    #[test]
    fn area_and_boundary_flags() {
        for (domain, area) in [(DomainKind::UnitSquare, 1.0), (DomainKind::LShaped, 3.0)] {
            for n in [1, 3, 8] {
                let m = build_mesh(domain, n).unwrap();
                let total = m.cells.len() as f64 * m.side() * m.side();
                assert!((total - area).abs() <= 1e-12 * area);
                let tol = 1e-12 * m.side();
                for (i, p) in m.nodes.iter().enumerate() {
                    assert_eq!(m.node_on_boundary[i], domain.distance_to_boundary(*p) <= tol, "node {p:?}");
                }
                for (e, &[a, b]) in m.edges.iter().enumerate() {
                    let mid = [(m.nodes[a][0] + m.nodes[b][0]) / 2.0, (m.nodes[a][1] + m.nodes[b][1]) / 2.0];
                    assert_eq!(m.edge_on_boundary[e], domain.distance_to_boundary(mid) <= tol);
                }
            }
        }
    }

    #[test]
    fn deterministic_and_dump() {
        let a = build_mesh(DomainKind::LShaped, 3).unwrap();
        let b = build_mesh(DomainKind::LShaped, 3).unwrap();
        assert_eq!(a, b);
        let text = a.dump_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("CELL")).count(), a.cells.len());
        assert!(text.starts_with("NODE 0 -1 -1"));
    }

    #[test]
    fn locate_points() {
        let m = build_mesh(DomainKind::LShaped, 2).unwrap();
        let (c, r) = m.locate([0.25, 0.25]).unwrap();
        assert_eq!(m.cell_lattice[c], [2, 2]);
        assert!((r[0]).abs() < 1e-12 && (r[1]).abs() < 1e-12);
        assert!(m.locate([0.5, -0.5]).is_none());
        assert!(m.locate([0.0, -0.5]).is_some());
    }

    proptest::proptest! {
        #[test]
        fn locate_round_trips(n in 1usize..9, fx in 0.0f64..1.0, fy in 0.0f64..1.0, lshape in proptest::bool::ANY) {
            let domain = if lshape { DomainKind::LShaped } else { DomainKind::UnitSquare };
            let m = build_mesh(domain, n).unwrap();
            let o = domain.origin();
            let e = domain.extent() as f64;
            let p = [o[0] + e * fx, o[1] + e * fy];
            if let Some((cell, r)) = m.locate(p) {
                let c = m.cell_origin(cell);
                let half = 0.5 * m.side();
                proptest::prop_assert!((c[0] + half * (r[0] + 1.0) - p[0]).abs() < 1e-12);
                proptest::prop_assert!((c[1] + half * (r[1] + 1.0) - p[1]).abs() < 1e-12);
            } else {
                proptest::prop_assert!(lshape && p[0] > 0.0 && p[1] < 0.0);
            }
        }
    }
}
