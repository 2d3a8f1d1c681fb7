use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Periodic cubic lattice with `n` sites per axis and period `length`.
///
/// Sites are ordered x-fastest: `index = x + n·(y + n·z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return invalid(format!("grid size must be a power of two >= 8, got {n}"));
        }
        if !(length > 0.0 && length.is_finite()) {
            return invalid(format!("period length must be positive, got {length}"));
        }
        Ok(Self { n, length })
    }

    /// `n` sites on the `2π` torus, where wavenumbers are integers.
    pub fn standard(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n3(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Signed integer mode for a transform index, in `(-n/2, n/2]`.
    pub fn mode(&self, idx: usize) -> i64 {
        let n = self.n as i64;
        let m = idx as i64;
        if m > n / 2 {
            m - n
        } else {
            m
        }
    }

    /// Transform index of a signed mode.
    pub fn index_of_mode(&self, m: i64) -> usize {
        m.rem_euclid(self.n as i64) as usize
    }

    /// Physical wavenumber `2π m / L` for a transform index.
    pub fn wavenumber(&self, idx: usize) -> f64 {
        2.0 * PI * self.mode(idx) as f64 / self.length
    }

    /// Largest wavenumber magnitude per axis.
    pub fn k_nyquist(&self) -> f64 {
        PI * self.n as f64 / self.length
    }

    /// Largest retained per-axis mode under the 2/3 rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n / 3) as i64
    }

    /// Largest wavenumber magnitude that survives dealiasing.
    pub fn k_max_dealiased(&self) -> f64 {
        3f64.sqrt() * 2.0 * PI * self.dealias_cutoff() as f64 / self.length
    }

    #[inline]
    pub fn site(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.n * (y + self.n * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Physical position of a site.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (x, y, z) = self.coords(idx);
        let h = self.dx();
        [x as f64 * h, y as f64 * h, z as f64 * h]
    }

    /// Samples a function of position on every site.
    pub fn sample(&self, f: impl Fn([f64; 3]) -> f64) -> Vec<f64> {
        (0..self.n3()).map(|i| f(self.position(i))).collect()
    }

    /// The same lattice with its period multiplied by `lambda`.
    pub fn rescaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.n, self.length * lambda)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(12, 1.0).is_err());
        assert!(Grid::new(4, 1.0).is_err());
        assert!(Grid::new(16, 0.0).is_err());
        assert!(Grid::new(16, -1.0).is_err());
        assert!(Grid::new(16, 2.0).is_ok());
    }

    #[test]
    fn mode_table_round_trips() {
        let g = Grid::new(16, 3.0).unwrap();
        for idx in 0..16 {
            let m = g.mode(idx);
            assert!(m > -8 && m <= 8);
            assert_eq!(g.index_of_mode(m), idx);
        }
        assert_eq!(g.mode(8), 8);
        assert_eq!(g.mode(9), -7);
        assert_eq!(g.dealias_cutoff(), 5);
    }

    #[test]
    fn site_ordering_is_x_fastest() {
        let g = Grid::standard(8).unwrap();
        assert_eq!(g.site(1, 0, 0), 1);
        assert_eq!(g.site(0, 1, 0), 8);
        assert_eq!(g.site(0, 0, 1), 64);
        assert_eq!(g.coords(g.site(3, 5, 7)), (3, 5, 7));
    }
}
