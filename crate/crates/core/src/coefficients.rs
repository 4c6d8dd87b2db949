//! Refractive indices and the contrast weight `1/(n - 1)`.

use serde::{Deserialize, Serialize};

use crate::{Result, TeigError};

/// Weights with `n - 1` below this are rejected: the mixed formulation
/// breaks down as the contrast vanishes.
pub const MIN_CONTRAST: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum RefractiveIndex {
    Constant(f64),
    /// `n = 8 + x1 - x2`
    LinearTilt,
    /// `n = 8 + 4 |x|`
    Radial,
}

impl RefractiveIndex {
    /// Config names: `const16`, `tilt`, `radial` (also `constN` for any N).
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "tilt" => Ok(RefractiveIndex::LinearTilt),
            "radial" => Ok(RefractiveIndex::Radial),
            other => other
                .strip_prefix("const")
                .and_then(|v| v.parse::<f64>().ok())
                .map(RefractiveIndex::Constant)
                .ok_or_else(|| TeigError::InvalidArgument(format!("unknown refractive index '{other}'"))),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RefractiveIndex::Constant(c) => format!("const{c}"),
            RefractiveIndex::LinearTilt => "tilt".into(),
            RefractiveIndex::Radial => "radial".into(),
        }
    }

    pub fn eval_n(&self, p: [f64; 2]) -> f64 {
        match *self {
            RefractiveIndex::Constant(c) => c,
            RefractiveIndex::LinearTilt => 8.0 + p[0] - p[1],
            RefractiveIndex::Radial => 8.0 + 4.0 * p[0].hypot(p[1]),
        }
    }

    /// `1 / (n(p) - 1)`
    pub fn eval_weight(&self, p: [f64; 2]) -> Result<f64> {
        let n = self.eval_n(p);
        if n <= 1.0 + MIN_CONTRAST {
            return Err(TeigError::Degenerate { n, x: p[0], y: p[1] });
        }
        Ok(1.0 / (n - 1.0))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, RefractiveIndex::Constant(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::DomainKind;

    #[test]
    fn point_values() {
        assert_eq!(RefractiveIndex::Constant(16.0).eval_n([0.3, -0.1]), 16.0);
        assert_eq!(RefractiveIndex::LinearTilt.eval_n([0.25, -0.25]), 8.5);
        assert_eq!(RefractiveIndex::Radial.eval_n([0.0, 0.0]), 8.0);
        assert_eq!(RefractiveIndex::Constant(16.0).eval_weight([0.0, 0.0]).unwrap(), 1.0 / 15.0);
        assert!((RefractiveIndex::LinearTilt.eval_weight([-0.5, 0.5]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        let w = RefractiveIndex::Radial.eval_weight([1.0, 1.0]).unwrap();
        assert!((w - 1.0 / (7.0 + 4.0 * 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn degenerate_contrast() {
        assert!(RefractiveIndex::Constant(1.0).eval_weight([0.0, 0.0]).is_err());
        assert!(RefractiveIndex::Constant(0.5).eval_weight([0.0, 0.0]).is_err());
    }

    #[test]
    fn names_round_trip() {
        for idx in [RefractiveIndex::Constant(16.0), RefractiveIndex::LinearTilt, RefractiveIndex::Radial] {
            assert_eq!(RefractiveIndex::parse(&idx.name()).unwrap(), idx);
        }
        assert!(RefractiveIndex::parse("bogus").is_err());
    }

    #[test]
    fn weight_positive_on_sample_grids() {
        for domain in [DomainKind::UnitSquare, DomainKind::LShaped] {
            let o = domain.origin();
            let ext = domain.extent() as f64;
            for idx in [RefractiveIndex::Constant(16.0), RefractiveIndex::LinearTilt, RefractiveIndex::Radial] {
                for j in 0..=100 {
                    for i in 0..=100 {
                        let p = [o[0] + ext * i as f64 / 100.0, o[1] + ext * j as f64 / 100.0];
                        if domain == DomainKind::LShaped && p[0] > 0.0 && p[1] < 0.0 {
                            continue;
                        }
                        assert!(idx.eval_n(p) >= 1.5);
                        assert!(idx.eval_weight(p).unwrap() > 0.0);
                    }
                }
            }
        }
    }
}
