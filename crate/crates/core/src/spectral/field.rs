//! Lattice storage for algebra-valued fields.

use num_complex::Complex64;

use crate::algebra::{AlgElem, StructureSpec};
use crate::error::{invalid, Result};

use super::grid::Grid;

/// One algebra-valued scalar field: `dim` real lattices, one per basis direction.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgField {
    pub comps: Vec<Vec<f64>>,
}

/// Spatial one-form `(B_1, B_2, B_3)`.
pub type VecField = [AlgField; 3];

/// Fourier coefficients of an [`AlgField`], one complex lattice per basis direction.
pub type SpecField = Vec<Vec<Complex64>>;

impl AlgField {
    pub fn zeros(dim: usize, n3: usize) -> Self {
        Self {
            comps: vec![vec![0.0; n3]; dim],
        }
    }

    pub fn from_comps(comps: Vec<Vec<f64>>) -> Self {
        Self { comps }
    }

    /// Field with a single nonzero basis direction.
    pub fn along(dim: usize, a: usize, values: Vec<f64>) -> Self {
        let n3 = values.len();
        let mut f = Self::zeros(dim, n3);
        f.comps[a] = values;
        f
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn n3(&self) -> usize {
        self.comps.first().map_or(0, Vec::len)
    }

    pub fn at(&self, site: usize) -> AlgElem {
        AlgElem::new(self.comps.iter().map(|c| c[site]).collect())
    }

    pub fn set(&mut self, site: usize, value: &AlgElem) {
        for (c, v) in self.comps.iter_mut().zip(&value.coeffs) {
            c[site] = *v;
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            comps: self
                .comps
                .iter()
                .map(|c| c.iter().map(|x| x * s).collect())
                .collect(),
        }
    }

    pub fn add(&self, other: &AlgField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &AlgField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &AlgField) {
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in c.iter_mut().zip(o) {
                *x += a * y;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|x| x.is_finite()))
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|&x| x == 0.0))
    }

    /// Pointwise bracket `[self, other]`.
    pub fn bracket(&self, other: &AlgField, spec: &StructureSpec) -> AlgField {
        let n3 = self.n3();
        let mut out = AlgField::zeros(spec.dim(), n3);
        for &(a, b, c, f) in spec.terms() {
            let o = &mut out.comps[c];
            for ((o, x), y) in o.iter_mut().zip(&self.comps[a]).zip(&other.comps[b]) {
                *o += f * x * y;
            }
        }
        out
    }

    /// Pointwise inner product density `(self, other)(x)`.
    pub fn inner_density(&self, other: &AlgField, spec: &StructureSpec) -> Vec<f64> {
        let n3 = self.n3();
        let mut out = vec![0.0; n3];
        for (x, y) in self.comps.iter().zip(&other.comps) {
            for i in 0..n3 {
                out[i] += x[i] * y[i];
            }
        }
        if spec.metric() != 1.0 {
            out.iter_mut().for_each(|v| *v *= spec.metric());
        }
        out
    }

    /// `∫ (self, other) dx`.
    pub fn integrate_inner(&self, other: &AlgField, spec: &StructureSpec, grid: &Grid) -> f64 {
        let mut s = 0.0;
        for (x, y) in self.comps.iter().zip(&other.comps) {
            s += x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
        s * spec.metric() * grid.cell_volume()
    }

    pub fn l2_norm_sq(&self, spec: &StructureSpec, grid: &Grid) -> f64 {
        self.integrate_inner(self, spec, grid)
    }

    pub fn l2_norm(&self, spec: &StructureSpec, grid: &Grid) -> f64 {
        self.l2_norm_sq(spec, grid).sqrt()
    }

    /// Largest pointwise algebra norm.
    pub fn sup_norm(&self, spec: &StructureSpec) -> f64 {
        self.inner_density(self, spec)
            .iter()
            .fold(0.0f64, |m, v| m.max(*v))
            .sqrt()
    }

    pub fn check_shape(&self, dim: usize, grid: &Grid) -> Result<()> {
        if self.dim() != dim || self.comps.iter().any(|c| c.len() != grid.n3()) {
            return invalid(format!(
                "field shape ({} x {}) does not match algebra dimension {dim} on {} sites",
                self.dim(),
                self.n3(),
                grid.n3()
            ));
        }
        Ok(())
    }
}

pub fn vec_zeros(dim: usize, n3: usize) -> VecField {
    [
        AlgField::zeros(dim, n3),
        AlgField::zeros(dim, n3),
        AlgField::zeros(dim, n3),
    ]
}

pub fn vec_add(a: &VecField, b: &VecField) -> VecField {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

pub fn vec_sub(a: &VecField, b: &VecField) -> VecField {
    [a[0].sub(&b[0]), a[1].sub(&b[1]), a[2].sub(&b[2])]
}

pub fn vec_scale(a: &VecField, s: f64) -> VecField {
    [a[0].scale(s), a[1].scale(s), a[2].scale(s)]
}

pub fn vec_axpy(y: &mut VecField, a: f64, x: &VecField) {
    for i in 0..3 {
        y[i].axpy(a, &x[i]);
    }
}

pub fn vec_l2_norm_sq(a: &VecField, spec: &StructureSpec, grid: &Grid) -> f64 {
    a.iter().map(|f| f.l2_norm_sq(spec, grid)).sum()
}

pub fn vec_l2_norm(a: &VecField, spec: &StructureSpec, grid: &Grid) -> f64 {
    vec_l2_norm_sq(a, spec, grid).sqrt()
}

pub fn vec_max_abs(a: &VecField) -> f64 {
    a.iter().fold(0.0, |m, f| m.max(f.max_abs()))
}

pub fn vec_is_finite(a: &VecField) -> bool {
    a.iter().all(AlgField::is_finite)
}

pub fn vec_integrate_inner(a: &VecField, b: &VecField, spec: &StructureSpec, grid: &Grid) -> f64 {
    (0..3).map(|i| a[i].integrate_inner(&b[i], spec, grid)).sum()
}
