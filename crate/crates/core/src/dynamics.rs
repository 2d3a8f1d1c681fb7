//! Temporal-gauge Yang-Mills evolution by the method of lines.
//!
//! The state is `(A_i, E_i)` with `E_i = ∂_t A_i`. The right-hand side is
//! assembled in covariant form, `Ė_i = ∂^j F_ji + [A^j, F_ji]`, which is the
//! expanded wave equation written with the four bracket terms collected. All
//! products are dealiased, so the semi-discrete energy is an exact invariant.

use num_complex::Complex64;

use crate::error::{invalid, Result, YmError};
use crate::gauge::{curvature, gauss_residual, pair_slot, Connection};
use crate::lattice::Lattice;
use crate::spectral::field::{vec_axpy, vec_is_finite, vec_scale, AlgField, SpecField, VecField};
use crate::spectral::ops::{gradient, inverse_laplacian, laplacian, leray_df, vec_sobolev_norm};
use crate::spectral::Grid;

/// Hard stability limit on `dt · k_max` for a single explicit step.
pub const MAX_CFL: f64 = 1.0;

/// Cauchy data in temporal gauge.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyState {
    pub t: f64,
    pub a: VecField,
    pub e: VecField,
}

impl CauchyState {
    pub fn new(t: f64, a: VecField, e: VecField) -> Self {
        Self { t, a, e }
    }

    pub fn zeros(lat: &Lattice) -> Self {
        Self::new(0.0, lat.vzeros(), lat.vzeros())
    }

    pub fn connection(&self) -> Connection {
        Connection::spatial(self.a.clone())
    }

    pub fn check(&self, lat: &Lattice) -> Result<()> {
        self.connection().check(lat)?;
        for f in &self.e {
            f.check_shape(lat.dim(), lat.grid())?;
        }
        if !vec_is_finite(&self.e) {
            return invalid("electric field has non-finite entries");
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && vec_is_finite(&self.a) && vec_is_finite(&self.e)
    }
}

/// Time stepping parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Bound on `dt · k_max`; at most [`MAX_CFL`].
    pub cfl: f64,
    /// Keep every this many steps in the trajectory (the final state is always kept).
    pub sample_every: usize,
    /// Record monitors every this many steps.
    pub monitor_every: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            cfl: 0.5,
            sample_every: usize::MAX,
            monitor_every: 1,
        }
    }

    pub fn validate(&self, lat: &Lattice) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return invalid(format!("horizon must be non-negative, got {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return invalid(format!("cfl must lie in (0, {MAX_CFL}], got {}", self.cfl));
        }
        let c = self.dt * lat.sp().k_max();
        if c > self.cfl {
            return invalid(format!("dt·k_max = {c:.4} exceeds cfl {}", self.cfl));
        }
        if self.sample_every == 0 || self.monitor_every == 0 {
            return invalid("sampling intervals must be positive");
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_end`.
    pub fn schedule(&self) -> (usize, f64) {
        if self.t_end == 0.0 {
            return (0, self.dt);
        }
        let steps = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }
}

/// Monitored quantities at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monitor {
    pub t: f64,
    pub energy: f64,
    /// `‖D^ℓ E_ℓ‖_{L²}`.
    pub gauss: f64,
    pub a_h_half: f64,
    pub a_h1: f64,
    pub e_l2: f64,
}

pub fn monitor(lat: &Lattice, state: &CauchyState) -> Monitor {
    let sp = lat.sp();
    let spec = lat.spec();
    Monitor {
        t: state.t,
        energy: energy(lat, state),
        gauss: gauss_residual(lat, &state.a, &state.e).1,
        a_h_half: vec_sobolev_norm(sp, spec, &state.a, 0.5, true),
        a_h1: vec_sobolev_norm(sp, spec, &state.a, 1.0, true),
        e_l2: lat.vl2_sq(&state.e).sqrt(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<CauchyState>,
    pub monitors: Vec<Monitor>,
}

impl Trajectory {
    pub fn last(&self) -> &CauchyState {
        self.samples.last().expect("trajectory keeps its final state")
    }
}

/// Spectral-space curvature of a band-limited connection.
pub(crate) struct SpectralCurvature {
    /// `T A` on the lattice.
    pub ab: VecField,
    /// `F_01, F_02, F_12` in slot order.
    pub fh: [SpecField; 3],
    pub f: [AlgField; 3],
}

const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

fn spec_axpy(y: &mut SpecField, a: f64, x: &SpecField) {
    for (yc, xc) in y.iter_mut().zip(x) {
        for (u, v) in yc.iter_mut().zip(xc) {
            *u += a * v;
        }
    }
}

pub(crate) fn spectral_curvature(lat: &Lattice, a: &VecField) -> SpectralCurvature {
    let sp = lat.sp();
    let mut ah = sp.forward_vec(a);
    for f in ah.iter_mut() {
        sp.truncate_field(f);
    }
    let ab = sp.inverse_vec(&ah);
    let brackets = (!lat.spec().is_abelian()).then(|| {
        let b: Vec<AlgField> = PAIRS
            .iter()
            .map(|&(i, j)| ab[i].bracket(&ab[j], lat.spec()))
            .collect();
        let mut bh = sp.forward_fields(&b.iter().collect::<Vec<_>>());
        bh.iter_mut().for_each(|f| sp.truncate_field(f));
        bh
    });
    let fh: [SpecField; 3] = std::array::from_fn(|p| {
        let (i, j) = PAIRS[p];
        let mut out: SpecField = (0..lat.dim())
            .map(|c| {
                let di = sp.deriv_hat(&ah[j][c], i);
                let dj = sp.deriv_hat(&ah[i][c], j);
                di.iter().zip(&dj).map(|(x, y)| x - y).collect()
            })
            .collect();
        if let Some(bh) = &brackets {
            spec_axpy(&mut out, 1.0, &bh[p]);
        }
        out
    });
    let f = sp.inverse_vec(&fh);
    SpectralCurvature { ab, fh, f }
}

/// `D^j F_ji` for `i = 0..3`.
pub(crate) fn curvature_divergence(lat: &Lattice, c: &SpectralCurvature) -> VecField {
    let sp = lat.sp();
    let dim = lat.dim();
    let n3 = lat.n3();
    let mut out: [SpecField; 3] = std::array::from_fn(|_| vec![vec![Complex64::new(0.0, 0.0); n3]; dim]);
    for (i, oi) in out.iter_mut().enumerate() {
        for j in 0..3 {
            if let Some((p, s)) = pair_slot(j, i) {
                for (o, fc) in oi.iter_mut().zip(&c.fh[p]) {
                    let d = sp.deriv_hat(fc, j);
                    o.iter_mut().zip(&d).for_each(|(u, v)| *u += s * v);
                }
            }
        }
    }
    if !lat.spec().is_abelian() {
        let b: Vec<AlgField> = (0..3)
            .map(|i| {
                let mut acc = lat.zeros();
                for j in 0..3 {
                    if let Some((p, s)) = pair_slot(j, i) {
                        acc.axpy(s, &c.ab[j].bracket(&c.f[p], lat.spec()));
                    }
                }
                acc
            })
            .collect();
        let mut bh = sp.forward_fields(&b.iter().collect::<Vec<_>>());
        for (oi, bi) in out.iter_mut().zip(bh.iter_mut()) {
            sp.truncate_field(bi);
            spec_axpy(oi, 1.0, bi);
        }
    }
    sp.inverse_vec(&out)
}

/// Right-hand side `(Ȧ, Ė) = (E, D^j F_ji)`.
pub fn ym_rhs(lat: &Lattice, state: &CauchyState) -> (VecField, VecField) {
    let c = spectral_curvature(lat, &state.a);
    (state.e.clone(), curvature_divergence(lat, &c))
}

fn blow_up(what: &'static str, t: f64, detail: impl Into<String>) -> YmError {
    YmError::BlowUp {
        what,
        time: t,
        detail: detail.into(),
    }
}

/// One classical RK4 step.
pub fn step_rk4(lat: &Lattice, state: &CauchyState, dt: f64) -> Result<CauchyState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let c = dt * lat.sp().k_max();
    if c > MAX_CFL {
        return invalid(format!("dt·k_max = {c:.4} exceeds the stability limit {MAX_CFL}"));
    }
    let shifted = |k: &(VecField, VecField), h: f64| {
        let mut a = state.a.clone();
        let mut e = state.e.clone();
        vec_axpy(&mut a, h, &k.0);
        vec_axpy(&mut e, h, &k.1);
        CauchyState::new(state.t + h, a, e)
    };
    let k1 = ym_rhs(lat, state);
    let k2 = ym_rhs(lat, &shifted(&k1, 0.5 * dt));
    let k3 = ym_rhs(lat, &shifted(&k2, 0.5 * dt));
    let k4 = ym_rhs(lat, &shifted(&k3, dt));
    let mut a = state.a.clone();
    let mut e = state.e.clone();
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        vec_axpy(&mut a, w * dt / 6.0, &k.0);
        vec_axpy(&mut e, w * dt / 6.0, &k.1);
    }
    let next = CauchyState::new(state.t + dt, a, e);
    if !next.is_finite() {
        return Err(blow_up(
            "yang-mills evolution",
            next.t,
            format!("non-finite field after step from t = {}", state.t),
        ));
    }
    Ok(next)
}

/// Integrates to `t_end`, calling `observe(step, state)` after every step (and once at step 0).
pub fn evolve_with(
    lat: &Lattice,
    state: &CauchyState,
    config: &EvolutionConfig,
    mut observe: impl FnMut(usize, &CauchyState) -> Result<()>,
) -> Result<CauchyState> {
    config.validate(lat)?;
    state.check(lat)?;
    let (steps, dt) = config.schedule();
    let t0 = state.t;
    let mut cur = state.clone();
    observe(0, &cur)?;
    for step in 1..=steps {
        cur = step_rk4(lat, &cur, dt)?;
        cur.t = t0 + step as f64 * dt;
        observe(step, &cur)?;
    }
    Ok(cur)
}

/// Integrates to `t_end`, keeping samples and monitors per the configuration.
pub fn evolve(lat: &Lattice, state: &CauchyState, config: &EvolutionConfig) -> Result<Trajectory> {
    let (steps, _) = config.schedule();
    let mut samples = Vec::new();
    let mut monitors = Vec::new();
    evolve_with(lat, state, config, |step, s| {
        if step % config.sample_every == 0 || step == steps {
            samples.push(s.clone());
        }
        if step % config.monitor_every == 0 || step == steps {
            monitors.push(monitor(lat, s));
        }
        Ok(())
    })?;
    Ok(Trajectory { samples, monitors })
}

/// `½ Σ_{i<j} ‖F_ij‖² + ½ Σ_i ‖E_i‖²`.
pub fn energy(lat: &Lattice, state: &CauchyState) -> f64 {
    curvature(lat, &state.a, Some(&state.e)).energy(lat)
}

/// Residuals of the Leray-split form of the equations against [`ym_rhs`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DfCfReport {
    /// `‖∂_t P^⊥A − Δ^{-1}∇ Σ_j [E_j, A_j]‖`, zero mode excluded.
    pub cf_abs: f64,
    pub cf_rel: f64,
    /// `‖□PA − (−2P[A_j,∂_jA] + P[A_j,∇A_j] + P[A, div A] − P[A_j,[A_j,A]])‖`.
    pub df_abs: f64,
    pub df_rel: f64,
}

impl DfCfReport {
    pub fn max_rel(&self) -> f64 {
        self.cf_rel.max(self.df_rel)
    }
}

fn rel(abs: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        abs
    } else {
        abs / scale
    }
}

pub fn df_cf_consistency(lat: &Lattice, state: &CauchyState) -> DfCfReport {
    let sp = lat.sp();
    let (a, e) = (&state.a, &state.e);
    let (_, e_dot) = ym_rhs(lat, state);

    // curl-free part: both sides are gradients, so compare after Δ^{-1}∇ div
    let cf_lhs = gradient(sp, &inverse_laplacian(sp, &lat.div(e)));
    let mut src = lat.zeros();
    for j in 0..3 {
        src.axpy(1.0, &lat.bracket(&e[j], &a[j]));
    }
    let cf_rhs = gradient(sp, &inverse_laplacian(sp, &src));

    // divergence-free part: □PA = ΔPA − PĖ
    let pa = leray_df(sp, a);
    let lap_pa: VecField = std::array::from_fn(|i| laplacian(sp, &pa[i]));
    let pe = leray_df(sp, &e_dot);
    let df_lhs: VecField = std::array::from_fn(|i| lap_pa[i].sub(&pe[i]));
    let div_a = lat.div(a);
    let raw: VecField = std::array::from_fn(|i| {
        let mut out = lat.bracket(&a[i], &div_a);
        for j in 0..3 {
            out.axpy(-2.0, &lat.bracket(&a[j], &lat.d(&a[i], j)));
            out.axpy(1.0, &lat.bracket(&a[j], &lat.d(&a[j], i)));
            out.axpy(-1.0, &lat.bracket(&a[j], &lat.bracket(&a[j], &a[i])));
        }
        out
    });
    let df_rhs = leray_df(sp, &raw);

    let diff = |x: &VecField, y: &VecField| {
        let mut d = x.clone();
        vec_axpy(&mut d, -1.0, y);
        lat.vl2_sq(&d).sqrt()
    };
    let norm = |x: &VecField| lat.vl2_sq(x).sqrt();
    let cf_abs = diff(&cf_lhs, &cf_rhs);
    let df_abs = diff(&df_lhs, &df_rhs);
    DfCfReport {
        cf_abs,
        cf_rel: rel(cf_abs, norm(&cf_lhs) + norm(&cf_rhs)),
        df_abs,
        df_rel: rel(df_abs, norm(&df_lhs) + norm(&df_rhs)),
    }
}

/// `A^λ(t, x) = λ^{-1} A(t/λ, x/λ)` on the torus with period multiplied by `λ`.
pub fn rescale(lat: &Lattice, state: &CauchyState, lambda: f64) -> Result<(Lattice, CauchyState)> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("scale factor must be positive, got {lambda}"));
    }
    let g = lat.grid();
    let grid = Grid::new(g.n(), g.length() * lambda)?;
    let out = Lattice::new(grid, lat.spec().clone());
    let scaled = CauchyState::new(
        lambda * state.t,
        vec_scale(&state.a, 1.0 / lambda),
        vec_scale(&state.e, 1.0 / (lambda * lambda)),
    );
    Ok((out, scaled))
}
