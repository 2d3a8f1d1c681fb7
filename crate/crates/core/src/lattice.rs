//! A grid, its transform engine and the structure constants, bundled.
//!
//! All quadratic products go through [`Lattice::bracket`], which truncates both
//! inputs and the product to the dealiased band. Because of this, covariant
//! identities such as `D^ℓ D_ℓ φ = Δφ + ...` hold exactly on the lattice
//! when they are assembled from the same primitives.

use crate::algebra::StructureSpec;
use crate::spectral::field::{AlgField, SpecField, VecField};
use crate::spectral::{Grid, Spectral};

#[derive(Debug)]
pub struct Lattice {
    sp: Spectral,
    spec: StructureSpec,
}

impl Lattice {
    pub fn new(grid: Grid, spec: StructureSpec) -> Self {
        Self {
            sp: Spectral::new(grid),
            spec,
        }
    }

    pub fn sp(&self) -> &Spectral {
        &self.sp
    }

    pub fn spec(&self) -> &StructureSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        self.sp.grid()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn n3(&self) -> usize {
        self.sp.n3()
    }

    pub fn zeros(&self) -> AlgField {
        AlgField::zeros(self.dim(), self.n3())
    }

    pub fn vzeros(&self) -> VecField {
        std::array::from_fn(|_| self.zeros())
    }

    /// Forward transform truncated to the dealiased band.
    pub fn hat(&self, f: &AlgField) -> SpecField {
        let mut fh = self.sp.forward_field(f);
        self.sp.truncate_field(&mut fh);
        fh
    }

    pub fn band(&self, f: &AlgField) -> AlgField {
        self.sp.inverse_field(&self.hat(f))
    }

    pub fn vband(&self, v: &VecField) -> VecField {
        std::array::from_fn(|i| self.band(&v[i]))
    }

    /// Spectral `∂_axis`.
    pub fn d(&self, f: &AlgField, axis: usize) -> AlgField {
        let fh = self.sp.forward_field(f);
        let dh: SpecField = fh.iter().map(|c| self.sp.deriv_hat(c, axis)).collect();
        self.sp.inverse_field(&dh)
    }

    pub fn div(&self, v: &VecField) -> AlgField {
        let mut out = self.d(&v[0], 0);
        out.axpy(1.0, &self.d(&v[1], 1));
        out.axpy(1.0, &self.d(&v[2], 2));
        out
    }

    /// Alias-free bracket `T[T x, T y]`.
    pub fn bracket(&self, x: &AlgField, y: &AlgField) -> AlgField {
        if self.spec.is_abelian() {
            return self.zeros();
        }
        self.bracket_band(&self.band(x), &self.band(y))
    }

    /// `T[x, y]` for inputs already inside the band.
    pub fn bracket_band(&self, x: &AlgField, y: &AlgField) -> AlgField {
        if self.spec.is_abelian() {
            return self.zeros();
        }
        self.band(&x.bracket(y, &self.spec))
    }

    pub fn l2_sq(&self, f: &AlgField) -> f64 {
        f.l2_norm_sq(&self.spec, self.grid())
    }

    pub fn vl2_sq(&self, v: &VecField) -> f64 {
        v.iter().map(|f| self.l2_sq(f)).sum()
    }

    pub fn inner(&self, f: &AlgField, g: &AlgField) -> f64 {
        f.integrate_inner(g, &self.spec, self.grid())
    }

    pub fn vinner(&self, a: &VecField, b: &VecField) -> f64 {
        (0..3).map(|i| self.inner(&a[i], &b[i])).sum()
    }
}
