//! Deterministic initial data.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use ymlab::algebra::StructureSpec;
use ymlab::dynamics::CauchyState;
use ymlab::gauge::{constraint_repair, gauss_residual};
use ymlab::lattice::Lattice;
use ymlab::mkg::{constraint_residual, prepare_data, MkgState};
use ymlab::spectral::field::{AlgField, VecField};
use ymlab::spectral::ops::{sobolev_norm, vec_sobolev_norm};
use ymlab::spectral::random::{random_smooth_field, random_smooth_vec};
use ymlab::spectral::Grid;

use crate::config::{ExperimentConfig, Family, Group, Kind};
use crate::error::HarnessError;

/// Wave vector of the plane-wave family, in units of `2π/L`.
pub const WAVE_K: [f64; 3] = [1.0, 2.0, 0.0];
const REPAIR_TOL: f64 = 1e-11;
const REPAIR_ITERS: usize = 60;

/// Initial data for either model.
#[derive(Clone, Debug, PartialEq)]
pub enum Data {
    Ym(CauchyState),
    Mkg(MkgState),
}

/// Achieved sizes of generated data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DataReport {
    pub family: Family,
    /// `‖A‖_{H^σ}`.
    pub a_h_sigma: f64,
    /// `‖E‖_{H^{σ−1}}`.
    pub e_h_sigma_minus_one: f64,
    /// `‖φ‖_{H^σ}`, zero for Yang-Mills data.
    pub phi_h_sigma: f64,
    /// Gauss (or MKG constraint) residual in `L²`.
    pub gauss_residual: f64,
    pub repair_iterations: usize,
}

pub fn lattice(cfg: &ExperimentConfig) -> Result<Lattice, HarnessError> {
    let spec = match cfg.physics.group {
        Group::Su2 => StructureSpec::su2(),
        Group::U1 => StructureSpec::u1(),
    };
    Ok(Lattice::new(Grid::new(cfg.grid.n, cfg.grid.length)?, spec))
}

/// Builds the data described by `cfg`, MKG data for the `mkg` kind.
pub fn make_data(cfg: &ExperimentConfig, lat: &Lattice) -> Result<(Data, DataReport), HarnessError> {
    if cfg.run.kind == Some(Kind::Mkg) {
        let (s, r) = make_mkg(cfg, lat)?;
        Ok((Data::Mkg(s), r))
    } else {
        let (s, r) = make_ym(cfg, lat)?;
        Ok((Data::Ym(s), r))
    }
}

fn scaled_vec(lat: &Lattice, v: &VecField, sobolev: f64, size: f64) -> VecField {
    let n = vec_sobolev_norm(lat.sp(), lat.spec(), v, sobolev, false);
    let f = if n > 0.0 { size / n } else { 0.0 };
    std::array::from_fn(|i| v[i].scale(f))
}

fn scaled_scalar(lat: &Lattice, f: &AlgField, sobolev: f64, size: f64) -> AlgField {
    let n = sobolev_norm(lat.sp(), lat.spec(), f, sobolev, false);
    f.scale(if n > 0.0 { size / n } else { 0.0 })
}

fn wave_number(lat: &Lattice) -> f64 {
    2.0 * std::f64::consts::PI / lat.grid().length()
}

/// The exact solution `A = amp·ε cos(k·x − |k|t)`, `E = ∂_t A`.
pub fn plane_wave(lat: &Lattice, amp: f64, t: f64) -> CauchyState {
    let u = wave_number(lat);
    let k = WAVE_K.map(|c| c * u);
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let pol = [2.0 / 5f64.sqrt(), -1.0 / 5f64.sqrt(), 0.0];
    let g = lat.grid();
    let phase = |x: [f64; 3]| k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - kn * t;
    let a = std::array::from_fn(|i| AlgField::along(lat.dim(), 0, g.sample(|x| amp * pol[i] * phase(x).cos())));
    let e = std::array::from_fn(|i| AlgField::along(lat.dim(), 0, g.sample(|x| amp * kn * pol[i] * phase(x).sin())));
    CauchyState::new(t, a, e)
}

/// Periodic Gaussian envelope of width `w` centred at `c`.
fn envelope(g: &Grid, c: [f64; 3], w: f64) -> Vec<f64> {
    let l = g.length();
    g.sample(|x| {
        let r2: f64 = (0..3)
            .map(|i| {
                let d = (x[i] - c[i]).rem_euclid(l);
                d.min(l - d).powi(2)
            })
            .sum();
        (-0.5 * r2 / (w * w)).exp()
    })
}

/// Two packets moving towards each other along `x`, polarized along `y` and `z`.
fn pulses(lat: &Lattice) -> (VecField, VecField) {
    let g = lat.grid();
    let l = g.length();
    let kappa = 3.0 * wave_number(lat);
    let w = l / 10.0;
    let mut a = lat.vzeros();
    let mut e = lat.vzeros();
    let second_dir = if lat.dim() > 1 { 1 } else { 0 };
    for (centre, axis, dir, speed) in [(l / 3.0, 1, 0, 1.0), (2.0 * l / 3.0, 2, second_dir, -1.0)] {
        let env = envelope(g, [centre, l / 2.0, l / 2.0], w);
        let vals: Vec<f64> = g
            .sample(|x| (kappa * (x[0] - centre)).cos())
            .iter()
            .zip(&env)
            .map(|(c, v)| c * v)
            .collect();
        let field = lat.band(&AlgField::along(lat.dim(), dir, vals));
        // a profile f(x − ct) has ∂_t f = −c ∂_x f
        e[axis] = lat.d(&field, 0).scale(-speed);
        a[axis] = field;
    }
    (a, e)
}

fn random_vec(lat: &Lattice, rng: &mut ChaCha8Rng, max_mode: i64) -> VecField {
    random_smooth_vec(lat.sp(), lat.dim(), rng, 1.0, max_mode)
}

fn random_scalar(lat: &Lattice, rng: &mut ChaCha8Rng, max_mode: i64) -> AlgField {
    random_smooth_field(lat.sp(), 2, rng, 1.0, max_mode)
}

fn report_norms(lat: &Lattice, cfg: &ExperimentConfig, a: &VecField, e: &VecField) -> (f64, f64) {
    let s = cfg.physics.sigma;
    (
        vec_sobolev_norm(lat.sp(), lat.spec(), a, s, false),
        vec_sobolev_norm(lat.sp(), lat.spec(), e, s - 1.0, false),
    )
}

/// Yang-Mills data, with the Gauss constraint imposed on random and pulse data.
pub fn make_ym(cfg: &ExperimentConfig, lat: &Lattice) -> Result<(CauchyState, DataReport), HarnessError> {
    let d = &cfg.data;
    let sigma = cfg.physics.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let (a, e_tilde, repair) = match d.family {
        Family::Zero => (lat.vzeros(), lat.vzeros(), false),
        Family::PlaneWave => {
            let w = plane_wave(lat, d.amplitude, 0.0);
            (w.a, w.e, false)
        }
        Family::Random => {
            let a = scaled_vec(lat, &random_vec(lat, &mut rng, d.max_mode), sigma, d.amplitude);
            let e = scaled_vec(lat, &random_vec(lat, &mut rng, d.max_mode), sigma - 1.0, d.amplitude);
            (a, e, true)
        }
        Family::Pulses => {
            let (a, e) = pulses(lat);
            let n = vec_sobolev_norm(lat.sp(), lat.spec(), &a, sigma, false);
            let f = d.amplitude / n;
            (
                std::array::from_fn(|i| a[i].scale(f)),
                std::array::from_fn(|i| e[i].scale(f)),
                true,
            )
        }
    };
    let (e, iterations) = if repair {
        let scale = lat.vl2_sq(&e_tilde).sqrt();
        let r = constraint_repair(lat, &a, &e_tilde, REPAIR_TOL * scale.max(1e-300), REPAIR_ITERS)?;
        (r.e, r.iterations)
    } else {
        (e_tilde, 0)
    };
    let state = CauchyState::new(0.0, a, e);
    state.check(lat)?;
    let (an, en) = report_norms(lat, cfg, &state.a, &state.e);
    let report = DataReport {
        family: d.family,
        a_h_sigma: an,
        e_h_sigma_minus_one: en,
        phi_h_sigma: 0.0,
        gauss_residual: gauss_residual(lat, &state.a, &state.e).1,
        repair_iterations: iterations,
    };
    Ok((state, report))
}

/// Maxwell-Klein-Gordon data: neutral and constraint-satisfying.
pub fn make_mkg(cfg: &ExperimentConfig, lat: &Lattice) -> Result<(MkgState, DataReport), HarnessError> {
    let d = &cfg.data;
    let sigma = cfg.physics.sigma;
    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
    let zero = AlgField::zeros(2, lat.n3());
    let (a, e, phi, phi_t) = match d.family {
        Family::Zero => (lat.vzeros(), lat.vzeros(), zero.clone(), zero),
        Family::PlaneWave => {
            let w = plane_wave(lat, d.amplitude, 0.0);
            (w.a, w.e, zero.clone(), zero)
        }
        Family::Random => {
            let a = scaled_vec(lat, &random_vec(lat, &mut rng, d.max_mode), sigma, d.amplitude);
            let e = scaled_vec(lat, &random_vec(lat, &mut rng, d.max_mode), sigma - 1.0, d.amplitude);
            let phi = scaled_scalar(lat, &random_scalar(lat, &mut rng, d.max_mode), sigma, d.amplitude);
            let phi_t = scaled_scalar(lat, &random_scalar(lat, &mut rng, d.max_mode), sigma - 1.0, d.amplitude);
            (a, e, phi, phi_t)
        }
        Family::Pulses => {
            let (a, e) = pulses(lat);
            let g = lat.grid();
            let l = g.length();
            let kappa = 3.0 * wave_number(lat);
            let env = envelope(g, [l / 2.0, l / 3.0, l / 2.0], l / 10.0);
            let wave = |f: fn(f64) -> f64| -> Vec<f64> {
                g.sample(|x| f(kappa * x[1])).iter().zip(&env).map(|(c, v)| c * v).collect()
            };
            // φ = g e^{iκy} moving along +y: φ_t = −∂_y φ
            let phi = lat.band(&AlgField::from_comps(vec![wave(f64::cos), wave(f64::sin)]));
            let phi_t = lat.d(&phi, 1).scale(-1.0);
            let fa = d.amplitude / vec_sobolev_norm(lat.sp(), lat.spec(), &a, sigma, false);
            let fp = d.amplitude / sobolev_norm(lat.sp(), lat.spec(), &phi, sigma, false);
            (
                std::array::from_fn(|i| a[i].scale(fa)),
                std::array::from_fn(|i| e[i].scale(fa)),
                phi.scale(fp),
                phi_t.scale(fp),
            )
        }
    };
    let state = if phi.is_zero() && phi_t.is_zero() && d.family != Family::Random {
        let s = MkgState::new(0.0, a, e, phi, phi_t);
        s.check(lat)?;
        s
    } else {
        prepare_data(lat, &a, &e, &phi, &phi_t)?
    };
    let (an, en) = report_norms(lat, cfg, &state.a, &state.e);
    let report = DataReport {
        family: d.family,
        a_h_sigma: an,
        e_h_sigma_minus_one: en,
        phi_h_sigma: sobolev_norm(lat.sp(), lat.spec(), &state.phi, sigma, false),
        gauss_residual: constraint_residual(lat, &state),
        repair_iterations: 0,
    };
    Ok((state, report))
}
