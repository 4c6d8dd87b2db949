//! End-to-end acceptance checks. Each test prints one PASS/FAIL line; run
//! with `--nocapture` to see them. Set `TEIG_ACCEPT_FINE=1` to include the
//! two-grid comparison on the 128-cell grid (about 0.5 GB and several
//! minutes).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use teig_core::assembly::{build_dofmap, eval_bfs, eval_q2, Space};
use teig_core::coefficients::RefractiveIndex;
use teig_core::eigensolver::{dense_solve_pencil, solve_pencil_factored, Spectrum, SpectrumRequest};
use teig_core::elements::{bfs_eval, gauss_rule, q2_eval, CORNERS, Q2_NODES};
use teig_core::harness::{estimate_order, mesh_size};
use teig_core::mesh::{build_mesh, DomainKind};
use teig_core::twogrid::{build_prolongation, evaluate_fields, rayleigh_identity_sides, two_grid_solve, Level};
use teig_core::{Execution, C64};

const TABLE_COUNT: usize = 8;

struct Solved {
    level: Level,
    spectrum: Spectrum,
}

type Key = (DomainKind, String, usize);
type Cache = Mutex<HashMap<Key, Arc<OnceLock<&'static Solved>>>>;

fn solved(domain: DomainKind, index: RefractiveIndex, cells: usize) -> &'static Solved {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cell = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry((domain, index.name(), cells)).or_default().clone()
    };
    cell.get_or_init(|| {
        let level = Level::build(domain, cells, &index, &gauss_rule(6).unwrap(), Execution::default()).unwrap();
        let spectrum = solve_pencil_factored(level.pencil(), &level.factor, &SpectrumRequest::with_count(TABLE_COUNT)).unwrap();
        Box::leak(Box::new(Solved { level, spectrum }))
    })
}

fn k(domain: DomainKind, index: RefractiveIndex, cells: usize, j: usize) -> C64 {
    solved(domain, index, cells).spectrum.physical(j).unwrap().k
}

fn two_grid(domain: DomainKind, index: RefractiveIndex, coarse: usize, fine: usize, j: usize) -> C64 {
    let c = solved(domain, index, coarse);
    let f = solved(domain, index, fine);
    let p = build_prolongation(&c.level, &f.level, Execution::default()).unwrap();
    two_grid_solve(&c.level, &c.spectrum, &f.level, &p, j, Execution::default()).unwrap().k
}

fn report(id: u32, what: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

const SQ: DomainKind = DomainKind::UnitSquare;
const LS: DomainKind = DomainKind::LShaped;
const C16: RefractiveIndex = RefractiveIndex::Constant(16.0);
const TILT: RefractiveIndex = RefractiveIndex::LinearTilt;

fn max_dev(pairs: &[(C64, f64)]) -> f64 {
    pairs.iter().map(|(a, b)| (a.re - b).abs().max(a.im.abs())).fold(0.0, f64::max)
}

#[test]
fn criterion_01_square_first_eigenvalue() {
    let dev = max_dev(&[
        (k(SQ, C16, 4, 1), 1.8853376219),
        (k(SQ, C16, 16, 1), 1.8796196028),
        (two_grid(SQ, C16, 4, 16, 1), 1.8796663603),
    ]);
    report(1, "square, n = 16, first eigenvalue (coarse, fine, two-grid)", dev <= 2e-5, format!("max deviation {dev:.2e} (tol 2e-5)"));
}

#[test]
fn criterion_02_square_higher_modes() {
    let dev = max_dev(&[(k(SQ, C16, 16, 2), 2.4443616792), (k(SQ, C16, 16, 3), 2.4443616792), (k(SQ, C16, 16, 4), 2.8665486898)]);
    report(2, "square, n = 16, eigenvalues 2-4 with the double pair", dev <= 2e-5, format!("max deviation {dev:.2e} (tol 2e-5)"));
}

#[test]
fn criterion_03_tilted_index_complex_pair() {
    let mut dev: f64 = 0.0;
    let mut sym: f64 = 0.0;
    for (cells, re, im) in [(32, 4.4965576676, 0.8715036461), (16, 4.4966278055, 0.8718292888)] {
        let (k5, k6) = (k(SQ, TILT, cells, 5), k(SQ, TILT, cells, 6));
        dev = dev.max((k5.re - re).abs()).max((k5.im - im).abs()).max((k6.re - re).abs()).max((k6.im + im).abs());
        sym = sym.max((k5 - k6.conj()).norm());
    }
    let tg = two_grid(SQ, TILT, 8, 32, 2);
    dev = dev.max((tg.re - 3.5387175444).abs()).max(tg.im.abs());
    report(
        3,
        "tilted index, complex pair k5,6 and two-grid k2",
        dev <= 5e-5 && sym <= 1e-8,
        format!("max component deviation {dev:.2e} (tol 5e-5), conjugate asymmetry {sym:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_04_lshape_first_row() {
    let dev = max_dev(&[(k(LS, C16, 4, 1), 1.4968609397), (two_grid(LS, C16, 4, 16, 1), 1.4806917664)]);
    report(4, "L-shape, n = 16, coarse and two-grid first eigenvalue", dev <= 5e-5, format!("max deviation {dev:.2e} (tol 5e-5)"));
}

#[test]
fn criterion_05_convergence_order() {
    let mut slopes = Vec::new();
    for j in [1, 2, 4] {
        let k_ref = k(SQ, C16, 64, j);
        let cells = [8, 16, 32];
        let hs: Vec<f64> = cells.iter().map(|&c| mesh_size(c)).collect();
        let errs: Vec<f64> = cells.iter().map(|&c| (k(SQ, C16, c, j) - k_ref).norm()).collect();
        slopes.push((j, estimate_order(&hs, &errs).unwrap()));
    }
    let pass = slopes.iter().all(|(_, s)| (3.3..=4.7).contains(s));
    let detail: Vec<String> = slopes.iter().map(|(j, s)| format!("j={j}: {s:.3}")).collect();
    report(5, "observed order of the direct solve", pass, format!("{} (range [3.3, 4.7])", detail.join(", ")));
}

#[test]
fn criterion_06_two_grid_tracks_direct() {
    // (coarse, fine, j, published |two-grid - direct|)
    let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (c, f) in [(8, 32), (16, 64)] {
        let gaps: [f64; 3] = if f == 32 {
            [1.8795931892 - 1.8795929802, 2.4442473340 - 2.4442441026, 2.8664512778 - 2.8664462104]
        } else {
            [1.8795912878 - 1.8795912869, 2.4442366150 - 2.4442366022, 2.8664395799 - 2.8664395581]
        };
        rows.extend([(c, f, 1, gaps[0]), (c, f, 2, gaps[1]), (c, f, 3, gaps[1]), (c, f, 4, gaps[2])]);
    }
    if std::env::var("TEIG_ACCEPT_FINE").is_ok_and(|v| v == "1") {
        let gaps = [1.8795911816 - 1.8795911807, 2.4442361438 - 2.4442361308, 2.8664391599 - 2.8664391379];
        rows.extend([(32, 128, 1, gaps[0]), (32, 128, 2, gaps[1]), (32, 128, 3, gaps[1]), (32, 128, 4, gaps[2])]);
    }
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for &(c, f, j, published) in &rows {
        let gap = (two_grid(SQ, C16, c, f, j) - k(SQ, C16, f, j)).norm();
        let limit = 1e-3f64.min(10.0 * published.abs());
        pass &= gap <= limit;
        worst = worst.max(gap / limit);
        println!("    H=√2/{c} h=√2/{f} j={j}: gap {gap:.3e}, limit {limit:.3e}");
    }
    report(6, "two-grid vs direct gap", pass, format!("{} rows, worst gap/limit {worst:.3}", rows.len()));
}

#[test]
fn criterion_07_krylov_matches_dense() {
    let s = solved(SQ, TILT, 4);
    let pencil = s.level.pencil();
    assert_eq!(pencil.dim(), 85);
    let req = SpectrumRequest::with_count(6);
    let krylov = solve_pencil_factored(pencil, &s.level.factor, &req).unwrap();
    let dense = dense_solve_pencil(pencil, &req).unwrap();
    let mut dev: f64 = 0.0;
    for (a, b) in krylov.pairs.iter().zip(&dense.pairs).take(6) {
        dev = dev.max((a.lambda - b.lambda).norm() / b.lambda.norm());
    }
    // spectrum of the transposed pencil, solved independently
    let transposed =
        teig_core::assembly::Pencil::new(pencil.a1.clone(), pencil.a2.clone(), pencil.b_transpose.clone()).unwrap();
    let left = dense_solve_pencil(&transposed, &req).unwrap();
    let mut lr: f64 = 0.0;
    for (a, b) in left.pairs.iter().zip(&dense.pairs).take(6) {
        lr = lr.max((a.lambda - b.lambda).norm() / b.lambda.norm());
    }
    report(
        7,
        "Krylov-Schur vs dense on the 85-unknown system",
        dev <= 1e-8 && lr <= 1e-8 && krylov.pairs.len() >= 6,
        format!("dominant λ rel. deviation {dev:.2e}, left/right spectra {lr:.2e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_08_rayleigh_error_identity() {
    let s = solved(SQ, TILT, 4);
    let pencil = s.level.pencil();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for t in 0..20 {
        let pair = &s.spectrum.pairs[t % 6];
        // even t: arbitrary vectors; odd t: moderate perturbations of the eigenvectors
        let scale = pair.right_vec.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let (keep, eps) = if t % 2 == 0 { (0.0, scale) } else { (1.0, scale * 10f64.powf(-rng.random_range(1.0..2.0))) };
        let mut perturb = |v: &[C64]| -> Vec<C64> {
            v.iter().map(|a| keep * a + C64::new(rng.random_range(-eps..eps), rng.random_range(-eps..eps))).collect()
        };
        let x = perturb(&pair.right_vec);
        let y = perturb(&pair.left_vec);
        let (lhs, rhs) = rayleigh_identity_sides(pencil, pair, &x, &y).unwrap();
        worst = worst.max((lhs - rhs).norm() / lhs.norm());
    }
    report(8, "Rayleigh quotient error identity, 20 random pairs", worst <= 1e-10, format!("worst relative mismatch {worst:.2e} (tol 1e-10)"));
}

#[test]
fn criterion_09_element_properties() {
    let mut failures = Vec::new();
    // BFS: DOF functionals are dual to the basis
    for (c, p) in CORNERS.iter().enumerate() {
        let e = bfs_eval(*p);
        for i in 0..16 {
            let vals = [e.values[i], e.grad_x[i], e.grad_y[i], e.dxy[i]];
            for (kk, v) in vals.iter().enumerate() {
                let expect = if i == 4 * c + kk { 1.0 } else { 0.0 };
                if (v - expect).abs() > 1e-13 {
                    failures.push(format!("bfs duality {i} at corner {c}"));
                }
            }
        }
    }
    // Q2: nodal Kronecker property and partition of unity
    for (a, p) in Q2_NODES.iter().enumerate() {
        let e = q2_eval(*p);
        for b in 0..9 {
            if (e.values[b] - if a == b { 1.0 } else { 0.0 }).abs() > 1e-14 {
                failures.push(format!("q2 kronecker {a},{b}"));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let s: f64 = q2_eval(p).values.iter().sum();
        let b = bfs_eval(p);
        let sb: f64 = (0..4).map(|c| b.values[4 * c]).sum();
        if (s - 1.0).abs() > 1e-13 || (sb - 1.0).abs() > 1e-13 {
            failures.push("partition of unity".into());
        }
    }
    // global C1 continuity of BFS and C0 continuity of Q2 across every interior edge
    let mesh = build_mesh(LS, 3).unwrap();
    let dx = build_dofmap(&mesh, Space::Xh).unwrap();
    let dy = build_dofmap(&mesh, Space::Yh).unwrap();
    let cu: Vec<f64> = (0..dx.num_dofs).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cw: Vec<f64> = (0..dy.num_dofs).map(|_| rng.random_range(-1.0..1.0)).collect();
    for cell in 0..mesh.cells.len() {
        let [ci, cj] = mesh.cell_lattice[cell];
        if let Some(right) = mesh.cell_at(ci + 1, cj) {
            for t in [-0.7, 0.1, 0.9] {
                let (a, b) = (eval_bfs(&mesh, &dx, &cu, cell, [1.0, t]), eval_bfs(&mesh, &dx, &cu, right, [-1.0, t]));
                let (wa, wb) = (eval_q2(&mesh, &dy, &cw, cell, [1.0, t]), eval_q2(&mesh, &dy, &cw, right, [-1.0, t]));
                if (a.value - b.value).abs() > 1e-11 || (a.dx - b.dx).abs() > 1e-10 || (a.dy - b.dy).abs() > 1e-10 || (wa[0] - wb[0]).abs() > 1e-12 {
                    failures.push(format!("continuity across x-edge of cell {cell}"));
                }
            }
        }
        if let Some(up) = mesh.cell_at(ci, cj + 1) {
            for t in [-0.3, 0.5] {
                let (a, b) = (eval_bfs(&mesh, &dx, &cu, cell, [t, 1.0]), eval_bfs(&mesh, &dx, &cu, up, [t, -1.0]));
                if (a.value - b.value).abs() > 1e-11 || (a.dx - b.dx).abs() > 1e-10 || (a.dy - b.dy).abs() > 1e-10 {
                    failures.push(format!("continuity across y-edge of cell {cell}"));
                }
            }
        }
    }
    // homogeneous boundary data: the discrete functions and normal derivatives vanish on the boundary
    for t in [0.13, 0.57] {
        let p = [-1.0, -1.0 + 2.0 * t];
        let (cell, r) = mesh.locate(p).unwrap();
        let u = eval_bfs(&mesh, &dx, &cu, cell, r);
        let w = eval_q2(&mesh, &dy, &cw, cell, r);
        if u.value.abs() > 1e-13 || u.dx.abs() > 1e-12 || w[0].abs() > 1e-13 {
            failures.push("boundary conditions".into());
        }
    }
    report(9, "element property suite", failures.is_empty(), if failures.is_empty() { "all checks hold".into() } else { failures.join("; ") });
}

#[test]
fn criterion_10_prolongation_exactness() {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for domain in [SQ, LS] {
        let c = Level::build(domain, 2, &C16, &gauss_rule(6).unwrap(), Execution::default()).unwrap();
        let f = Level::build(domain, 8, &C16, &gauss_rule(6).unwrap(), Execution::default()).unwrap();
        let p = build_prolongation(&c, &f, Execution::default()).unwrap();
        let coarse: Vec<f64> = (0..c.pencil().dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fine = p.matvec(&coarse);
        let mut count = 0;
        while count < 100 {
            let o = domain.origin();
            let e = domain.extent() as f64;
            let pt = [o[0] + e * rng.random_range(0.0..1.0), o[1] + e * rng.random_range(0.0..1.0)];
            let (Some(a), Some(b)) = (evaluate_fields(&c, &coarse, pt), evaluate_fields(&f, &fine, pt)) else { continue };
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
            count += 1;
        }
    }
    report(10, "prolongation exactness, both spaces and domains", worst <= 1e-10, format!("max pointwise deviation {worst:.2e} (tol 1e-10)"));
}
