//! Deterministic random band-limited fields.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::field::{AlgField, VecField};
use super::transform::Spectral;

/// Random smooth field with spectral amplitude `(1 + |ξ|²)^{-decay/2}`, supported on
/// modes with every `|m_i| ≤ max_mode` (clamped to the dealiasing band) and no zero
/// mode. The result is scaled so that its largest lattice value is 1.
pub fn random_smooth_field(
    sp: &Spectral,
    dim: usize,
    rng: &mut ChaCha8Rng,
    decay: f64,
    max_mode: i64,
) -> AlgField {
    let grid = *sp.grid();
    let cut = max_mode.min(grid.dealias_cutoff());
    let n3 = sp.n3();
    let mut comps = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut fh = vec![Complex64::new(0.0, 0.0); n3];
        for (idx, c) in fh.iter_mut().enumerate() {
            let (x, y, z) = grid.coords(idx);
            let (mx, my, mz) = (grid.mode(x), grid.mode(y), grid.mode(z));
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            if idx == 0 || mx.abs() > cut || my.abs() > cut || mz.abs() > cut {
                continue;
            }
            let xi = sp.kabs(idx);
            *c = Complex64::new(re, im) * (1.0 + xi * xi).powf(-0.5 * decay);
        }
        // real part of the inverse transform of an arbitrary spectrum is its
        // Hermitian symmetrization, which keeps the support
        comps.push(sp.inverse(fh));
    }
    let f = AlgField::from_comps(comps);
    let m = f.max_abs();
    if m > 0.0 {
        f.scale(1.0 / m)
    } else {
        f
    }
}

pub fn random_smooth_vec(
    sp: &Spectral,
    dim: usize,
    rng: &mut ChaCha8Rng,
    decay: f64,
    max_mode: i64,
) -> VecField {
    [
        random_smooth_field(sp, dim, rng, decay, max_mode),
        random_smooth_field(sp, dim, rng, decay, max_mode),
        random_smooth_field(sp, dim, rng, decay, max_mode),
    ]
}
