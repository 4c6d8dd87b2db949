//! Reference elements on `[-1, 1]^2`: the Bogner–Fox–Schmit bicubic Hermite
//! element and the 9-node biquadratic Lagrange element, plus tensor
//! Gauss–Legendre quadrature.
//!
//! BFS degrees of freedom are ordered corner-major, counterclockwise from
//! `(-1, -1)`, with kinds `{value, d/dx, d/dy, d2/dxdy}` per corner. On the
//! reference cell the derivative functionals are taken in reference units;
//! [`bfs_dof_scale`] converts to physical-unit derivative DOFs on a square
//! of side `s`.

use crate::{Result, TeigError};

pub const BFS_NDOF: usize = 16;
pub const Q2_NDOF: usize = 9;

/// Reference corners, counterclockwise from `(-1, -1)`.
pub const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// Q2 nodes: 4 corners, 4 edge midpoints (bottom, right, top, left), center.
pub const Q2_NODES: [[f64; 2]; 9] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
    [0.0, 0.0],
];

/// DOF kind of a BFS basis function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HermiteKind {
    Value,
    Dx,
    Dy,
    Dxy,
}

impl HermiteKind {
    pub const ALL: [HermiteKind; 4] = [HermiteKind::Value, HermiteKind::Dx, HermiteKind::Dy, HermiteKind::Dxy];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Orders of differentiation in x and y.
    fn orders(self) -> (usize, usize) {
        match self {
            HermiteKind::Value => (0, 0),
            HermiteKind::Dx => (1, 0),
            HermiteKind::Dy => (0, 1),
            HermiteKind::Dxy => (1, 1),
        }
    }
}

/// Factor turning a reference-unit DOF into a physical-unit DOF on a cell of
/// side `side`: the physical basis function equals `scale * reference`.
pub fn bfs_dof_scale(kind: HermiteKind, side: f64) -> f64 {
    let half = 0.5 * side;
    match kind {
        HermiteKind::Value => 1.0,
        HermiteKind::Dx | HermiteKind::Dy => half,
        HermiteKind::Dxy => half * half,
    }
}

/// Cubic Hermite function on `[-1, 1]` with its first two derivatives.
/// `right` selects the end point, `deriv` the derivative functional.
fn hermite_1d(right: bool, deriv: bool, t: f64) -> [f64; 3] {
    let t2 = t * t;
    let t3 = t2 * t;
    match (right, deriv) {
        (false, false) => [(2.0 - 3.0 * t + t3) / 4.0, (-3.0 + 3.0 * t2) / 4.0, 1.5 * t],
        (false, true) => [(1.0 - t - t2 + t3) / 4.0, (-1.0 - 2.0 * t + 3.0 * t2) / 4.0, (-2.0 + 6.0 * t) / 4.0],
        (true, false) => [(2.0 + 3.0 * t - t3) / 4.0, (3.0 - 3.0 * t2) / 4.0, -1.5 * t],
        (true, true) => [(-1.0 - t + t2 + t3) / 4.0, (-1.0 + 2.0 * t + 3.0 * t2) / 4.0, (2.0 + 6.0 * t) / 4.0],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfsBasisEval {
    pub point: [f64; 2],
    pub values: [f64; 16],
    pub grad_x: [f64; 16],
    pub grad_y: [f64; 16],
    pub dxx: [f64; 16],
    pub dyy: [f64; 16],
    pub dxy: [f64; 16],
}

pub fn bfs_eval(point: [f64; 2]) -> BfsBasisEval {
    let [xi, eta] = point;
    let mut e = BfsBasisEval {
        point,
        values: [0.0; 16],
        grad_x: [0.0; 16],
        grad_y: [0.0; 16],
        dxx: [0.0; 16],
        dyy: [0.0; 16],
        dxy: [0.0; 16],
    };
    for (c, corner) in CORNERS.iter().enumerate() {
        let rx = corner[0] > 0.0;
        let ry = corner[1] > 0.0;
        for kind in HermiteKind::ALL {
            let (ox, oy) = kind.orders();
            let fx = hermite_1d(rx, ox == 1, xi);
            let fy = hermite_1d(ry, oy == 1, eta);
            let i = 4 * c + kind.index();
            e.values[i] = fx[0] * fy[0];
            e.grad_x[i] = fx[1] * fy[0];
            e.grad_y[i] = fx[0] * fy[1];
            e.dxx[i] = fx[2] * fy[0];
            e.dyy[i] = fx[0] * fy[2];
            e.dxy[i] = fx[1] * fy[1];
        }
    }
    e
}

/// BFS basis on a physical square of side `side`, with physical-unit
/// derivative DOFs.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalBfs {
    pub values: [f64; 16],
    pub grad_x: [f64; 16],
    pub grad_y: [f64; 16],
    pub dxx: [f64; 16],
    pub dyy: [f64; 16],
    pub dxy: [f64; 16],
}

impl PhysicalBfs {
    pub fn laplacian(&self, i: usize) -> f64 {
        self.dxx[i] + self.dyy[i]
    }
}

impl BfsBasisEval {
    pub fn to_physical(&self, side: f64) -> PhysicalBfs {
        let d1 = 2.0 / side;
        let d2 = d1 * d1;
        let mut p = PhysicalBfs {
            values: [0.0; 16],
            grad_x: [0.0; 16],
            grad_y: [0.0; 16],
            dxx: [0.0; 16],
            dyy: [0.0; 16],
            dxy: [0.0; 16],
        };
        for i in 0..BFS_NDOF {
            let sc = bfs_dof_scale(HermiteKind::ALL[i % 4], side);
            p.values[i] = sc * self.values[i];
            p.grad_x[i] = sc * d1 * self.grad_x[i];
            p.grad_y[i] = sc * d1 * self.grad_y[i];
            p.dxx[i] = sc * d2 * self.dxx[i];
            p.dyy[i] = sc * d2 * self.dyy[i];
            p.dxy[i] = sc * d2 * self.dxy[i];
        }
        p
    }
}

fn lagrange_1d(node: f64, t: f64) -> [f64; 2] {
    if node < -0.5 {
        [0.5 * t * (t - 1.0), t - 0.5]
    } else if node > 0.5 {
        [0.5 * t * (t + 1.0), t + 0.5]
    } else {
        [1.0 - t * t, -2.0 * t]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Q2BasisEval {
    pub point: [f64; 2],
    pub values: [f64; 9],
    pub grad_x: [f64; 9],
    pub grad_y: [f64; 9],
}

pub fn q2_eval(point: [f64; 2]) -> Q2BasisEval {
    let [xi, eta] = point;
    let mut e = Q2BasisEval { point, values: [0.0; 9], grad_x: [0.0; 9], grad_y: [0.0; 9] };
    for (i, node) in Q2_NODES.iter().enumerate() {
        let fx = lagrange_1d(node[0], xi);
        let fy = lagrange_1d(node[1], eta);
        e.values[i] = fx[0] * fy[0];
        e.grad_x[i] = fx[1] * fy[0];
        e.grad_y[i] = fx[0] * fy[1];
    }
    e
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub order: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

pub const DEFAULT_QUAD_ORDER: usize = 6;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, by Newton iteration on
/// the Legendre polynomial from Chebyshev-like initial guesses.
pub fn gauss_legendre_1d(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let dp = legendre(n, x).1;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `(P_n(x), P_n'(x))`
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor Gauss–Legendre rule with `order^2` points on `[-1, 1]^2`.
pub fn gauss_rule(order: usize) -> Result<QuadratureRule> {
    if !(1..=10).contains(&order) {
        return Err(TeigError::InvalidArgument(format!("quadrature order {order} outside 1..=10")));
    }
    let (x, w) = gauss_legendre_1d(order);
    let mut points = Vec::with_capacity(order * order);
    let mut weights = Vec::with_capacity(order * order);
    for j in 0..order {
        for i in 0..order {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { order, points, weights })
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random_point(r: &mut ChaCha8Rng) -> [f64; 2] {
        [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]
    }

    /// Value of DOF functional `kind` at `corner` applied to a function given
    /// by reference derivatives.
    fn dof_of(e: &BfsBasisEval, j: usize, kind: HermiteKind) -> f64 {
        match kind {
            HermiteKind::Value => e.values[j],
            HermiteKind::Dx => e.grad_x[j],
            HermiteKind::Dy => e.grad_y[j],
            HermiteKind::Dxy => e.dxy[j],
        }
    }

    #[test]
    fn bfs_hermite_duality() {
        for (c, &corner) in CORNERS.iter().enumerate() {
            let e = bfs_eval(corner);
            for kind in HermiteKind::ALL {
                let i = 4 * c + kind.index();
                for j in 0..16 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dof_of(&e, j, kind) - expect).abs() < 1e-14, "dof {i} basis {j}");
                }
            }
        }
        let e = bfs_eval([-1.0, -1.0]);
        assert_eq!(e.values[0], 1.0);
        assert!(e.values[1..].iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn bfs_reproduces_constant() {
        let mut r = rng();
        for _ in 0..50 {
            let e = bfs_eval(random_point(&mut r));
            let s: f64 = (0..4).map(|c| e.values[4 * c]).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bfs_interpolates_bicubic() {
        // f = x^3 y^3, DOFs: f, f_x, f_y, f_xy at the corners
        let f = |x: f64, y: f64| [x.powi(3) * y.powi(3), 3.0 * x * x * y.powi(3), 3.0 * x.powi(3) * y * y, 9.0 * x * x * y * y];
        let mut coef = [0.0; 16];
        for (c, p) in CORNERS.iter().enumerate() {
            let d = f(p[0], p[1]);
            coef[4 * c..4 * c + 4].copy_from_slice(&d);
        }
        let mut r = rng();
        for _ in 0..50 {
            let p = random_point(&mut r);
            let e = bfs_eval(p);
            let v: f64 = (0..16).map(|i| coef[i] * e.values[i]).sum();
            assert!((v - f(p[0], p[1])[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn q2_partition_and_kronecker() {
        let mut r = rng();
        for _ in 0..50 {
            let e = q2_eval(random_point(&mut r));
            assert!((e.values.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(e.grad_x.iter().sum::<f64>().abs() < 1e-13);
            assert!(e.grad_y.iter().sum::<f64>().abs() < 1e-13);
        }
        for (i, &p) in Q2_NODES.iter().enumerate() {
            let e = q2_eval(p);
            for j in 0..9 {
                assert!((e.values[j] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
        let c = q2_eval([0.0, 0.0]);
        assert_eq!(c.values[8], 1.0);
    }

    #[test]
    fn q2_interpolates_biquadratic() {
        let f = |p: [f64; 2]| p[0] * p[0] * p[1] * p[1];
        let mut r = rng();
        for _ in 0..50 {
            let p = random_point(&mut r);
            let e = q2_eval(p);
            let v: f64 = (0..9).map(|i| f(Q2_NODES[i]) * e.values[i]).sum();
            assert!((v - f(p)).abs() < 1e-13);
        }
    }

    #[test]
    fn finite_difference_consistency() {
        let mut r = rng();
        let h = 1e-5;
        for _ in 0..20 {
            let p = [r.random_range(-0.9..0.9), r.random_range(-0.9..0.9)];
            let e = bfs_eval(p);
            let ex = |d: f64| bfs_eval([p[0] + d, p[1]]);
            let ey = |d: f64| bfs_eval([p[0], p[1] + d]);
            let (xp, xm, yp, ym) = (ex(h), ex(-h), ey(h), ey(-h));
            for i in 0..16 {
                let gx = (xp.values[i] - xm.values[i]) / (2.0 * h);
                let gy = (yp.values[i] - ym.values[i]) / (2.0 * h);
                assert!((gx - e.grad_x[i]).abs() < 1e-6);
                assert!((gy - e.grad_y[i]).abs() < 1e-6);
                assert!(((xp.grad_x[i] - xm.grad_x[i]) / (2.0 * h) - e.dxx[i]).abs() < 1e-6);
                assert!(((yp.grad_y[i] - ym.grad_y[i]) / (2.0 * h) - e.dyy[i]).abs() < 1e-6);
                assert!(((yp.grad_x[i] - ym.grad_x[i]) / (2.0 * h) - e.dxy[i]).abs() < 1e-6);
            }
            let q = q2_eval(p);
            let (qxp, qxm) = (q2_eval([p[0] + h, p[1]]), q2_eval([p[0] - h, p[1]]));
            let (qyp, qym) = (q2_eval([p[0], p[1] + h]), q2_eval([p[0], p[1] - h]));
            for i in 0..9 {
                assert!(((qxp.values[i] - qxm.values[i]) / (2.0 * h) - q.grad_x[i]).abs() < 1e-6);
                assert!(((qyp.values[i] - qym.values[i]) / (2.0 * h) - q.grad_y[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn physical_laplacian_of_mapped_bicubic() {
        // u(x, y) = x^3 y^2 + x y^3 on the cell [x0, x0+s] x [y0, y0+s]
        let (x0, y0, s) = (0.3, -0.2, 0.125);
        let u = |x: f64, y: f64| {
            [
                x.powi(3) * y * y + x * y.powi(3),
                3.0 * x * x * y * y + y.powi(3),
                2.0 * x.powi(3) * y + 3.0 * x * y * y,
                6.0 * x * x * y + 3.0 * y * y,
            ]
        };
        let lap = |x: f64, y: f64| 6.0 * x * y * y + 2.0 * x.powi(3) + 6.0 * x * y;
        let mut coef = [0.0; 16];
        for (c, p) in CORNERS.iter().enumerate() {
            let x = x0 + 0.5 * s * (p[0] + 1.0);
            let y = y0 + 0.5 * s * (p[1] + 1.0);
            coef[4 * c..4 * c + 4].copy_from_slice(&u(x, y));
        }
        let mut r = rng();
        for _ in 0..20 {
            let p = random_point(&mut r);
            let phys = bfs_eval(p).to_physical(s);
            let x = x0 + 0.5 * s * (p[0] + 1.0);
            let y = y0 + 0.5 * s * (p[1] + 1.0);
            let l: f64 = (0..16).map(|i| coef[i] * phys.laplacian(i)).sum();
            assert!((l - lap(x, y)).abs() < 1e-10);
            let gx: f64 = (0..16).map(|i| coef[i] * phys.grad_x[i]).sum();
            assert!((gx - u(x, y)[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_rules() {
        let r1 = gauss_rule(1).unwrap();
        assert_eq!(r1.points, vec![[0.0, 0.0]]);
        assert!((r1.weights[0] - 4.0).abs() < 1e-15);
        let r3 = gauss_rule(3).unwrap();
        assert!((r3.integrate(|p| p[0].powi(4)) - 0.8).abs() < 1e-14);
        let r6 = gauss_rule(6).unwrap();
        let exact = (2.0 / 11.0) * (2.0 / 11.0);
        assert!((r6.integrate(|p| p[0].powi(10) * p[1].powi(10)) - exact).abs() < 1e-14);
        for order in 1..=10 {
            let r = gauss_rule(order).unwrap();
            assert_eq!(r.points.len(), order * order);
            assert!((r.weights.iter().sum::<f64>() - 4.0).abs() < 1e-13);
            // highest even degree within 2*order - 1
            let even = 2 * order - 2;
            let got = r.integrate(|p| p[0].powi(even as i32) * p[1].powi(even as i32));
            let e1 = 2.0 / (even as f64 + 1.0);
            assert!((got - e1 * e1).abs() < 1e-13, "order {order}");
        }
        assert!(gauss_rule(0).is_err());
        assert!(gauss_rule(11).is_err());
    }

    proptest::proptest! {
        #[test]
        fn bicubics_are_reproduced(c in proptest::collection::vec(-1.0f64..1.0, 16), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            // p(x, y) = sum c[4a+b] x^a y^b, interpolated through its nodal DOFs
            let p = |x: f64, y: f64, dx: usize, dy: usize| -> f64 {
                let d = |t: f64, a: usize, k: usize| -> f64 {
                    if k > a { return 0.0; }
                    let f: f64 = ((a - k + 1)..=a).map(|v| v as f64).product();
                    f * t.powi((a - k) as i32)
                };
                (0..16).map(|i| c[i] * d(x, i / 4, dx) * d(y, i % 4, dy)).sum()
            };
            let e = bfs_eval([x, y]);
            let orders = [(0, 0), (1, 0), (0, 1), (1, 1)];
            let mut v = 0.0;
            for (corner, q) in CORNERS.iter().enumerate() {
                for (kind, &(ox, oy)) in orders.iter().enumerate() {
                    v += p(q[0], q[1], ox, oy) * e.values[4 * corner + kind];
                }
            }
            proptest::prop_assert!((v - p(x, y, 0, 0)).abs() < 1e-12);
        }
    }
}
