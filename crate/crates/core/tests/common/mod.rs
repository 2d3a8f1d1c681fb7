#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ymlab::algebra::StructureSpec;
use ymlab::lattice::Lattice;
use ymlab::spectral::field::{AlgField, VecField};
use ymlab::spectral::ops::vec_sobolev_norm;
use ymlab::spectral::random::random_smooth_vec;
use ymlab::spectral::Grid;

pub fn lattice(n: usize, spec: StructureSpec) -> Lattice {
    Lattice::new(Grid::standard(n).unwrap(), spec)
}

pub fn max_diff(a: &AlgField, b: &AlgField) -> f64 {
    a.sub(b).max_abs()
}

pub fn vmax(v: &VecField) -> f64 {
    v.iter().fold(0.0, |m, f| m.max(f.max_abs()))
}

pub fn vdiff(a: &VecField, b: &VecField) -> f64 {
    (0..3).fold(0.0, |m, i| m.max(max_diff(&a[i], &b[i])))
}

/// Random smooth one-form with `‖A‖_{Ḣ^{1/2}} = size`.
pub fn random_form(lat: &Lattice, seed: u64, size: f64, max_mode: i64) -> VecField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = random_smooth_vec(lat.sp(), lat.dim(), &mut rng, 1.0, max_mode);
    let n = vec_sobolev_norm(lat.sp(), lat.spec(), &v, 0.5, true);
    std::array::from_fn(|i| v[i].scale(size / n))
}

/// Sixth-order centered difference along `axis`.
pub fn fd6(f: &[f64], g: &Grid, axis: usize) -> Vec<f64> {
    let n = g.n() as i64;
    let h = g.dx();
    let c = [(1, 45.0), (2, -9.0), (3, 1.0)];
    (0..g.n3())
        .map(|idx| {
            let (x, y, z) = g.coords(idx);
            let mut p = [x as i64, y as i64, z as i64];
            let base = p[axis];
            let mut acc = 0.0;
            for (o, w) in c {
                p[axis] = (base + o).rem_euclid(n);
                let fp = f[g.site(p[0] as usize, p[1] as usize, p[2] as usize)];
                p[axis] = (base - o).rem_euclid(n);
                let fm = f[g.site(p[0] as usize, p[1] as usize, p[2] as usize)];
                acc += w * (fp - fm);
            }
            acc / (60.0 * h)
        })
        .collect()
}

pub fn fd6_field(f: &AlgField, g: &Grid, axis: usize) -> AlgField {
    AlgField::from_comps(f.comps.iter().map(|c| fd6(c, g, axis)).collect())
}

/// Small random state with the Gauss constraint imposed.
pub fn repaired_state(lat: &Lattice, seed: u64, size: f64, max_mode: i64) -> ymlab::dynamics::CauchyState {
    let a = random_form(lat, seed, size, max_mode);
    let et = random_form(lat, seed + 1000, size, max_mode);
    let scale = lat.vl2_sq(&et).sqrt();
    let rep = ymlab::gauge::constraint_repair(lat, &a, &et, 1e-12 * scale, 50).unwrap();
    ymlab::dynamics::CauchyState::new(0.0, a, rep.e)
}

pub const WAVE_K: [f64; 3] = [1.0, 2.0, 0.0];

/// Exact linear wave `A = amp·ε cos(k·x − |k|t)` along the first algebra direction.
pub fn plane_wave(lat: &Lattice, amp: f64, t: f64) -> ymlab::dynamics::CauchyState {
    let k = WAVE_K;
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let pol = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt(), 0.0];
    let g = lat.grid();
    let phase = |x: [f64; 3]| k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - kn * t;
    let a: VecField = std::array::from_fn(|i| {
        AlgField::along(lat.dim(), 0, g.sample(|x| amp * pol[i] * phase(x).cos()))
    });
    let e: VecField = std::array::from_fn(|i| {
        AlgField::along(lat.dim(), 0, g.sample(|x| amp * kn * pol[i] * phase(x).sin()))
    });
    ymlab::dynamics::CauchyState::new(t, a, e)
}
