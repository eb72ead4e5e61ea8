use core::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityKind {
    /// `(pi/2)^d * prod_i |sin(pi (x_i - c))|`
    SineShift {
        c: f64,
    },
    Uniform,
}

/// Product density on `[0, 1]^d` with identical, independent coordinates.
///
/// New kinds only need a 1D pdf, CDF and inverse CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDensity {
    kind: DensityKind,
    dim: usize,
}

impl SyntheticDensity {
    pub fn sine_shift(c: f64, dim: usize) -> Result<Self> {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "sine shift must lie in (0, 1)",
            });
        }
        Self::with_kind(DensityKind::SineShift { c }, dim)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::with_kind(DensityKind::Uniform, dim)
    }

    fn with_kind(kind: DensityKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be positive",
            });
        }
        Ok(Self { kind, dim })
    }

    pub fn kind(&self) -> DensityKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        x.iter().map(|&t| self.pdf_1d(t)).product()
    }

    pub fn pdf_1d(&self, t: f64) -> f64 {
        match self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::SineShift { c } => FRAC_PI_2 * math::sin(PI * (t - c)).abs(),
        }
    }

    pub fn cdf_1d(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match self.kind {
            DensityKind::Uniform => t,
            DensityKind::SineShift { c } => {
                let at_c = 0.5 * (1.0 - math::cos(PI * c));
                if t <= c {
                    0.5 * (math::cos(PI * (c - t)) - math::cos(PI * c))
                } else {
                    at_c + 0.5 * (1.0 - math::cos(PI * (t - c)))
                }
            }
        }
    }

    /// Closed-form inverse of [`cdf_1d`](Self::cdf_1d); the sine case is split at
    /// the zero `x = c` so each piece inverts through `acos`.
    pub fn inverse_cdf_1d(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let x = match self.kind {
            DensityKind::Uniform => u,
            DensityKind::SineShift { c } => {
                let cos_c = math::cos(PI * c);
                let at_c = 0.5 * (1.0 - cos_c);
                if u <= at_c {
                    c - math::acos((2.0 * u + cos_c).clamp(-1.0, 1.0)) / PI
                } else {
                    c + math::acos((1.0 - 2.0 * (u - at_c)).clamp(-1.0, 1.0)) / PI
                }
            }
        };
        x.clamp(0.0, 1.0)
    }

    /// Largest value of the density on the cube.
    pub fn sup(&self) -> f64 {
        match self.kind {
            DensityKind::Uniform => 1.0,
            DensityKind::SineShift { .. } => math::pow(FRAC_PI_2, self.dim as f64),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_shift() {
        let d = SyntheticDensity::sine_shift(0.3, 1).unwrap();
        let expected = (1.0 - (0.3 * PI).cos()) / 2.0;
        assert!((d.cdf_1d(0.3) - expected).abs() < 1e-15);
        assert!((d.cdf_1d(0.3) - 0.206107).abs() < 1e-6);
        assert_eq!(d.cdf_1d(0.0), 0.0);
        assert!((d.cdf_1d(1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_cdf_roundtrip() {
        for &c in &[0.3, 0.7, 0.01, 0.99] {
            let d = SyntheticDensity::sine_shift(c, 1).unwrap();
            for k in 0..=200 {
                let u = k as f64 / 200.0;
                let x = d.inverse_cdf_1d(u);
                assert!((d.cdf_1d(x) - u).abs() < 1e-9, "c={c} u={u}");
            }
        }
    }

    #[test]
    fn rejects_bad_shift() {
        assert!(SyntheticDensity::sine_shift(0.0, 1).is_err());
        assert!(SyntheticDensity::sine_shift(1.0, 1).is_err());
        assert!(SyntheticDensity::uniform(0).is_err());
    }
}
