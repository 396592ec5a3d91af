use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value register with `d = 4 * 2^bits` points `y * 2^-bits` spanning `[0, 4)`.
///
/// The range is four times the value range so that the +2 offset applied to
/// hidden indices, plus an estimate overshoot of up to 1/2, never wraps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueGrid {
    bits: u32,
}

/// Grid index type.
pub type GridPoint = u32;

impl ValueGrid {
    pub const MAX_BITS: u32 = 24;

    pub fn new(bits: u32) -> Result<Self> {
        if bits > Self::MAX_BITS {
            return Err(Error::Argument(format!(
                "grid bits {bits} exceeds maximum {}",
                Self::MAX_BITS
            )));
        }
        Ok(Self { bits })
    }

    /// Smallest grid with `step <= eps / 8`.
    pub fn for_precision(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("precision must be positive, got {eps}")));
        }
        let bits = (8.0 / eps).log2().ceil().max(0.0) as u32;
        Self::new(bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// `Δ = 2^-bits`.
    pub fn step(&self) -> f64 {
        (-(self.bits as f64)).exp2()
    }

    /// Number of grid points `d`.
    pub fn size(&self) -> u32 {
        4 << self.bits
    }

    /// Grid offset corresponding to the value 2.0.
    pub fn hide_offset(&self) -> GridPoint {
        2 << self.bits
    }

    pub fn value(&self, y: GridPoint) -> f64 {
        y as f64 * self.step()
    }

    /// Nearest grid point to `x`, ties rounded up. `x` must lie in `[0, 4)`.
    pub fn round(&self, x: f64) -> Result<GridPoint> {
        if !(0.0..4.0).contains(&x) {
            return Err(Error::Domain(format!("value {x} outside grid range [0, 4)")));
        }
        let y = (x / self.step() + 0.5).floor() as u64;
        Ok(y.min(self.size() as u64 - 1) as GridPoint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn size_and_step_are_dyadic() {
        for bits in 0..12 {
            let g = ValueGrid::new(bits).unwrap();
            assert_eq!(g.size(), 4 * (1 << bits));
            assert_eq!(g.step() * g.size() as f64, 4.0);
            assert_eq!(g.value(g.hide_offset()), 2.0);
        }
    }

    #[test]
    fn rounding_example() {
        let g = ValueGrid::new(3).unwrap();
        let y = g.round(0.37).unwrap();
        assert_eq!(g.value(y), 0.375);
        assert!((g.value(y) - 0.37).abs() <= g.step() / 2.0);
    }

    #[test]
    fn precision_grid() {
        let g = ValueGrid::for_precision(1.0 / 64.0).unwrap();
        assert_eq!(g.bits(), 9);
        assert!(g.step() <= 1.0 / 64.0 / 8.0);
        assert!(ValueGrid::for_precision(0.0).is_err());
    }

    #[test]
    fn out_of_range_is_domain_error() {
        let g = ValueGrid::new(4).unwrap();
        assert!(g.round(-0.1).is_err());
        assert!(g.round(4.0).is_err());
    }

    proptest! {
        #[test]
        fn rounding_error_at_most_half_step(bits in 0u32..16, x in 0.0f64..=1.0) {
            let g = ValueGrid::new(bits).unwrap();
            let y = g.round(x).unwrap();
            prop_assert!((g.value(y) - x).abs() <= g.step() / 2.0);
        }
    }
}
