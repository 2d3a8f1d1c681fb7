//! Maxwell-Klein-Gordon in temporal gauge, its heat flow and tension fields.
//!
//! The gauge field lives on an abelian [`Lattice`]. The scalar is a two-component
//! field `(Re φ, Im φ)` on the same grid, and `D_j φ = ∂_j φ + i A_j φ`. Every
//! product is dealiased. With `φ ≡ 0` the gauge part runs through the Yang-Mills
//! code for the abelian algebra.

use log::warn;

use crate::diagnostics::{identity_from_nodes, identity_nodes, modified_energy_from, IdentityCheck, ModifiedEnergy};
use crate::dynamics::{ym_rhs, CauchyState, EvolutionConfig, MAX_CFL};
use crate::error::{invalid, Result, YmError};
use crate::gauge::curvature;
use crate::heatflow::{caloric_rhs_direct, d_t, d_t2, run_flow_on, sample_grid, FlowPolicy, STENCIL_WARN};
use crate::lattice::Lattice;
use crate::spectral::bilinear::{bilinear_w_sum, Pairing, WMode};
use crate::spectral::field::{vec_axpy, vec_is_finite, AlgField, SpecField, VecField};
use crate::spectral::ops::leray_df;

/// Constant of the leading quadratic term of `P w`.
pub const MKG_W2_COEFF: f64 = -2.0;
/// Constant of the leading quadratic term of `v` (times `i`).
pub const MKG_V2_COEFF: f64 = -4.0;

// ---------------------------------------------------------------------------
// pointwise complex arithmetic on `(re, im)` fields

fn re(c: &AlgField) -> &[f64] {
    &c.comps[0]
}

fn im(c: &AlgField) -> &[f64] {
    &c.comps[1]
}

/// `r · c` for a real field `r`.
fn real_times(r: &[f64], c: &AlgField) -> AlgField {
    AlgField::from_comps(
        c.comps
            .iter()
            .map(|x| x.iter().zip(r).map(|(a, b)| a * b).collect())
            .collect(),
    )
}

/// `i · c`.
fn times_i(c: &AlgField) -> AlgField {
    AlgField::from_comps(vec![im(c).iter().map(|x| -x).collect(), re(c).to_vec()])
}

/// `Im(p · conj(q))`.
fn im_conj(p: &AlgField, q: &AlgField) -> AlgField {
    let v = (0..p.n3()).map(|k| im(p)[k] * re(q)[k] - re(p)[k] * im(q)[k]).collect();
    AlgField::from_comps(vec![v])
}

/// `|p|²`.
fn abs2(p: &AlgField) -> AlgField {
    AlgField::from_comps(vec![re(p).iter().zip(im(p)).map(|(a, b)| a * a + b * b).collect()])
}

/// `∫ Im(p · conj(q)) dx`.
fn im_conj_integral(lat: &Lattice, p: &AlgField, q: &AlgField) -> f64 {
    let dv = lat.grid().cell_volume();
    (0..p.n3()).map(|k| im(p)[k] * re(q)[k] - re(p)[k] * im(q)[k]).sum::<f64>() * dv
}

fn scalar_zeros(lat: &Lattice) -> AlgField {
    AlgField::zeros(2, lat.n3())
}

fn check_scalar(lat: &Lattice, f: &AlgField, what: &str) -> Result<()> {
    f.check_shape(2, lat.grid())?;
    if !f.is_finite() {
        return invalid(format!("{what} has non-finite entries"));
    }
    Ok(())
}

fn check_abelian(lat: &Lattice) -> Result<()> {
    if !lat.spec().is_abelian() || lat.dim() != 1 {
        return invalid("Maxwell-Klein-Gordon needs the u(1) lattice");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// covariant operators

/// `D_j φ = ∂_j φ + i T(A_j φ)`.
pub fn cov_d_scalar(lat: &Lattice, a: &VecField, phi: &AlgField, j: usize) -> AlgField {
    let mut out = lat.d(phi, j);
    out.axpy(1.0, &times_i(&lat.band(&real_times(&a[j].comps[0], phi))));
    out
}

/// `Δ_A φ = Σ_j D_j D_j φ`.
pub fn cov_laplacian(lat: &Lattice, a: &VecField, phi: &AlgField) -> AlgField {
    let mut out = scalar_zeros(lat);
    for j in 0..3 {
        let d = cov_d_scalar(lat, a, phi, j);
        out.axpy(1.0, &cov_d_scalar(lat, a, &d, j));
    }
    out
}

/// `J_j = Im(φ · conj(D_j φ))`.
pub fn current(lat: &Lattice, a: &VecField, phi: &AlgField) -> VecField {
    std::array::from_fn(|j| lat.band(&im_conj(phi, &cov_d_scalar(lat, a, phi, j))))
}

/// `Im(φ · conj(φ_t))`.
pub fn charge_density(lat: &Lattice, phi: &AlgField, phi_t: &AlgField) -> AlgField {
    lat.band(&im_conj(phi, phi_t))
}

/// `Σ_j 2i T(A_j ∂_j ψ) − T(A_j T(A_j ψ))`, the first-order part of `Δ_A − i div A`.
fn transport_part(lat: &Lattice, a: &VecField, psi: &AlgField) -> AlgField {
    let mut out = scalar_zeros(lat);
    for j in 0..3 {
        let aj = &a[j].comps[0];
        out.axpy(2.0, &times_i(&lat.band(&real_times(aj, &lat.d(psi, j)))));
        let inner = lat.band(&real_times(aj, psi));
        out.axpy(-1.0, &lat.band(&real_times(aj, &inner)));
    }
    out
}

// ---------------------------------------------------------------------------
// state and evolution

/// Temporal-gauge data `(A, E = ∂_t A, φ, φ_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgState {
    pub t: f64,
    pub a: VecField,
    pub e: VecField,
    pub phi: AlgField,
    pub phi_t: AlgField,
}

impl MkgState {
    pub fn new(t: f64, a: VecField, e: VecField, phi: AlgField, phi_t: AlgField) -> Self {
        Self { t, a, e, phi, phi_t }
    }

    pub fn zeros(lat: &Lattice) -> Self {
        Self::new(0.0, lat.vzeros(), lat.vzeros(), scalar_zeros(lat), scalar_zeros(lat))
    }

    /// Pure Maxwell data with a vanishing scalar.
    pub fn maxwell(lat: &Lattice, gauge: &CauchyState) -> Self {
        Self::new(gauge.t, gauge.a.clone(), gauge.e.clone(), scalar_zeros(lat), scalar_zeros(lat))
    }

    pub fn gauge_part(&self) -> CauchyState {
        CauchyState::new(self.t, self.a.clone(), self.e.clone())
    }

    pub fn scalar_is_zero(&self) -> bool {
        self.phi.is_zero() && self.phi_t.is_zero()
    }

    pub fn check(&self, lat: &Lattice) -> Result<()> {
        check_abelian(lat)?;
        self.gauge_part().check(lat)?;
        check_scalar(lat, &self.phi, "scalar field")?;
        check_scalar(lat, &self.phi_t, "scalar velocity")
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && vec_is_finite(&self.a)
            && vec_is_finite(&self.e)
            && self.phi.is_finite()
            && self.phi_t.is_finite()
    }
}

/// Time derivatives `(Ȧ, Ė, φ̇, φ̈)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgRhs {
    pub a: VecField,
    pub e: VecField,
    pub phi: AlgField,
    pub phi_t: AlgField,
}

/// `Ė_i = ∂^j F_ji + Im(φ conj(D_i φ))`, `φ̈ = Δ_A φ`.
pub fn mkg_rhs(lat: &Lattice, state: &MkgState) -> MkgRhs {
    let (a, mut e) = ym_rhs(lat, &state.gauge_part());
    if state.scalar_is_zero() {
        return MkgRhs {
            a,
            e,
            phi: scalar_zeros(lat),
            phi_t: scalar_zeros(lat),
        };
    }
    vec_axpy(&mut e, 1.0, &current(lat, &state.a, &state.phi));
    MkgRhs {
        a,
        e,
        phi: state.phi_t.clone(),
        phi_t: cov_laplacian(lat, &state.a, &state.phi),
    }
}

/// One classical RK4 step, arithmetically identical to the Yang-Mills step on the gauge part.
pub fn mkg_step(lat: &Lattice, state: &MkgState, dt: f64) -> Result<MkgState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let c = dt * lat.sp().k_max();
    if c > MAX_CFL {
        return invalid(format!("dt·k_max = {c:.4} exceeds the stability limit {MAX_CFL}"));
    }
    let shifted = |k: &MkgRhs, h: f64| {
        let mut s = state.clone();
        vec_axpy(&mut s.a, h, &k.a);
        vec_axpy(&mut s.e, h, &k.e);
        s.phi.axpy(h, &k.phi);
        s.phi_t.axpy(h, &k.phi_t);
        s.t = state.t + h;
        s
    };
    let k1 = mkg_rhs(lat, state);
    let k2 = mkg_rhs(lat, &shifted(&k1, 0.5 * dt));
    let k3 = mkg_rhs(lat, &shifted(&k2, 0.5 * dt));
    let k4 = mkg_rhs(lat, &shifted(&k3, dt));
    let mut next = state.clone();
    for (k, w) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
        vec_axpy(&mut next.a, w * dt / 6.0, &k.a);
        vec_axpy(&mut next.e, w * dt / 6.0, &k.e);
        next.phi.axpy(w * dt / 6.0, &k.phi);
        next.phi_t.axpy(w * dt / 6.0, &k.phi_t);
    }
    next.t = state.t + dt;
    if !next.is_finite() {
        return Err(YmError::BlowUp {
            what: "maxwell-klein-gordon evolution",
            time: next.t,
            detail: format!("non-finite field after step from t = {}", state.t),
        });
    }
    Ok(next)
}

/// Integrates to `t_end`, calling `observe(step, state)` after every step and at step 0.
pub fn mkg_evolve_with(
    lat: &Lattice,
    state: &MkgState,
    config: &EvolutionConfig,
    mut observe: impl FnMut(usize, &MkgState) -> Result<()>,
) -> Result<MkgState> {
    config.validate(lat)?;
    state.check(lat)?;
    let (steps, dt) = config.schedule();
    let t0 = state.t;
    let mut cur = state.clone();
    observe(0, &cur)?;
    for step in 1..=steps {
        cur = mkg_step(lat, &cur, dt)?;
        cur.t = t0 + step as f64 * dt;
        observe(step, &cur)?;
    }
    Ok(cur)
}

/// `H = ½ ∫ Σ_{α<β} |F_αβ|² + Σ_α |D_α φ|²`.
pub fn mkg_energy(lat: &Lattice, state: &MkgState) -> f64 {
    field_energy(lat, &state.a, &state.e, &state.phi, &state.phi_t)
}

fn field_energy(lat: &Lattice, a: &VecField, e: &VecField, phi: &AlgField, phi_t: &AlgField) -> f64 {
    let gauge = curvature(lat, a, Some(e)).energy(lat);
    if phi.is_zero() && phi_t.is_zero() {
        return gauge;
    }
    let grad: f64 = (0..3).map(|j| lat.l2_sq(&cov_d_scalar(lat, a, phi, j))).sum();
    gauge + 0.5 * (lat.l2_sq(phi_t) + grad)
}

/// `Q = ∫ Im(φ · conj(φ_t)) dx`.
pub fn charge(lat: &Lattice, state: &MkgState) -> f64 {
    im_conj_integral(lat, &state.phi, &state.phi_t)
}

/// `‖∂^i E_i − Im(φ conj(φ_t))‖_{L²}`.
pub fn constraint_residual(lat: &Lattice, state: &MkgState) -> f64 {
    let r = lat.div(&state.e).sub(&charge_density(lat, &state.phi, &state.phi_t));
    lat.l2_sq(&r).sqrt()
}

/// `φ ↦ e^{iχ} φ`, `A ↦ A − ∇χ` for a spatial `χ`, band-limited afterwards.
pub fn mkg_gauge_transform(lat: &Lattice, state: &MkgState, chi: &AlgField) -> MkgState {
    let c = &chi.comps[0];
    let rotate = |f: &AlgField| {
        let r = (0..f.n3())
            .map(|k| c[k].cos() * re(f)[k] - c[k].sin() * im(f)[k])
            .collect();
        let i = (0..f.n3())
            .map(|k| c[k].sin() * re(f)[k] + c[k].cos() * im(f)[k])
            .collect();
        lat.band(&AlgField::from_comps(vec![r, i]))
    };
    let a = std::array::from_fn(|j| state.a[j].sub(&lat.d(chi, j)));
    MkgState::new(state.t, a, state.e.clone(), rotate(&state.phi), rotate(&state.phi_t))
}

/// Band-limited, charge-neutral data satisfying `∂^i E_i = Im(φ₀ conj(φ₁))`.
///
/// The total charge is removed by `φ₁ ↦ φ₁ + c·iφ₀`, then the curl-free part of
/// `ẽ` is replaced by the solution of the constraint.
pub fn prepare_data(lat: &Lattice, a: &VecField, e_tilde: &VecField, phi0: &AlgField, phi1: &AlgField) -> Result<MkgState> {
    check_abelian(lat)?;
    check_scalar(lat, phi0, "scalar field")?;
    check_scalar(lat, phi1, "scalar velocity")?;
    let a = lat.vband(a);
    let e_tilde = lat.vband(e_tilde);
    let phi0 = lat.band(phi0);
    let mut phi1 = lat.band(phi1);
    let q = im_conj_integral(lat, &phi0, &phi1);
    let mass = lat.l2_sq(&phi0);
    if q != 0.0 {
        if mass == 0.0 {
            return invalid("cannot neutralize charge with a vanishing scalar field");
        }
        phi1.axpy(q / mass, &times_i(&phi0));
    }
    let rho = charge_density(lat, &phi0, &phi1);
    let sp = lat.sp();
    let gap = lat.div(&e_tilde).sub(&rho);
    let pot = sp.inverse_field(&sp.forward_field(&gap).iter().map(|c| sp.inv_lap_hat(c)).collect());
    let e = std::array::from_fn(|j| e_tilde[j].sub(&lat.d(&pot, j)));
    let out = MkgState::new(0.0, a, e, phi0, phi1);
    out.check(lat)?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// heat flow

/// Flow level `(A(s), B(s) = F_0i(s), φ(s), ψ(s) = D_0 φ(s))`.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgFlowState {
    pub s: f64,
    pub a: VecField,
    pub b: VecField,
    pub phi: AlgField,
    pub psi: AlgField,
}

impl MkgFlowState {
    pub fn from_state(state: &MkgState) -> Self {
        Self {
            s: 0.0,
            a: state.a.clone(),
            b: state.e.clone(),
            phi: state.phi.clone(),
            psi: state.phi_t.clone(),
        }
    }

    /// `H(t,s)`.
    pub fn energy(&self, lat: &Lattice) -> f64 {
        field_energy(lat, &self.a, &self.b, &self.phi, &self.psi)
    }

    pub fn scalar_is_zero(&self) -> bool {
        self.phi.is_zero() && self.psi.is_zero()
    }
}

/// `s`-derivatives of a flow level.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgFlowRhs {
    pub a: VecField,
    pub b: VecField,
    pub phi: AlgField,
    pub psi: AlgField,
}

const NA: usize = 0;
const NB: usize = 3;
const NPHI: usize = 6;
const NPSI: usize = 8;
const NCOMP: usize = 10;

fn pack(a: &VecField, b: &VecField, phi: &AlgField, psi: &AlgField) -> AlgField {
    let mut comps = Vec::with_capacity(NCOMP);
    comps.extend(a.iter().map(|f| f.comps[0].clone()));
    comps.extend(b.iter().map(|f| f.comps[0].clone()));
    comps.extend(phi.comps.iter().cloned());
    comps.extend(psi.comps.iter().cloned());
    AlgField::from_comps(comps)
}

fn unpack(f: &AlgField) -> (VecField, VecField, AlgField, AlgField) {
    let one = |k: usize| AlgField::from_comps(vec![f.comps[k].clone()]);
    let two = |k: usize| AlgField::from_comps(vec![f.comps[k].clone(), f.comps[k + 1].clone()]);
    (
        std::array::from_fn(|j| one(NA + j)),
        std::array::from_fn(|j| one(NB + j)),
        two(NPHI),
        two(NPSI),
    )
}

/// Nonlinear parts in the gauge `A_s = div A`:
/// `N_A = J`, `N_B = −|φ|² B + 2 Im(ψ conj(Dφ))`, `N_φ = 2iA·∇φ − |A|²φ`,
/// `N_ψ = 2iA·∇ψ − |A|²ψ + 2i B·Dφ + i Im(φ conj(ψ)) φ`.
fn nonlinear_fields(lat: &Lattice, a: &VecField, b: &VecField, phi: &AlgField, psi: &AlgField) -> AlgField {
    let dphi: Vec<AlgField> = (0..3).map(|j| cov_d_scalar(lat, a, phi, j)).collect();
    let rho = lat.band(&abs2(phi));
    let na: VecField = std::array::from_fn(|j| lat.band(&im_conj(phi, &dphi[j])));
    let nb: VecField = std::array::from_fn(|j| {
        let mut x = lat.band(&im_conj(psi, &dphi[j])).scale(2.0);
        let rb = AlgField::from_comps(vec![rho.comps[0].iter().zip(&b[j].comps[0]).map(|(p, q)| p * q).collect()]);
        x.axpy(-1.0, &lat.band(&rb));
        x
    });
    let nphi = transport_part(lat, a, phi);
    let mut npsi = transport_part(lat, a, psi);
    for j in 0..3 {
        npsi.axpy(2.0, &times_i(&lat.band(&real_times(&b[j].comps[0], &dphi[j]))));
    }
    let j0 = lat.band(&im_conj(phi, psi));
    npsi.axpy(1.0, &times_i(&lat.band(&real_times(&j0.comps[0], phi))));
    pack(&na, &nb, &nphi, &npsi)
}

/// Full right-hand side `∂_s X = ΔX + N_X`.
pub fn mkg_heatflow_rhs(lat: &Lattice, state: &MkgFlowState) -> MkgFlowRhs {
    let sp = lat.sp();
    let n = nonlinear_fields(lat, &state.a, &state.b, &state.phi, &state.psi);
    let u = pack(&state.a, &state.b, &state.phi, &state.psi);
    let lap = sp.inverse_field(&sp.forward_field(&u).iter().map(|c| sp.lap_hat(c)).collect());
    let mut total = lap;
    total.axpy(1.0, &n);
    let (a, b, phi, psi) = unpack(&total);
    MkgFlowRhs { a, b, phi, psi }
}

fn heat(lat: &Lattice, u: &SpecField, h: f64) -> SpecField {
    u.iter().map(|c| lat.sp().heat_hat(c, h)).collect()
}

fn axpy(y: &mut SpecField, a: f64, x: &SpecField) {
    for (yc, xc) in y.iter_mut().zip(x) {
        for (p, q) in yc.iter_mut().zip(xc) {
            *p += a * q;
        }
    }
}

fn nonlinear(lat: &Lattice, u: &SpecField) -> SpecField {
    let sp = lat.sp();
    let (a, b, phi, psi) = unpack(&sp.inverse_field(u));
    let mut out = sp.forward_field(&nonlinear_fields(lat, &a, &b, &phi, &psi));
    sp.truncate_field(&mut out);
    out
}

/// Lawson integrating-factor RK4 step of size `h`.
fn lawson(lat: &Lattice, u: &SpecField, n0: &SpecField, h: f64) -> SpecField {
    let half = heat(lat, u, 0.5 * h);
    let full = heat(lat, u, h);
    let mut u2 = u.clone();
    axpy(&mut u2, 0.5 * h, n0);
    let n2 = nonlinear(lat, &heat(lat, &u2, 0.5 * h));
    let mut u3 = half;
    axpy(&mut u3, 0.5 * h, &n2);
    let n3 = nonlinear(lat, &u3);
    let mut u4 = full.clone();
    axpy(&mut u4, h, &heat(lat, &n3, 0.5 * h));
    let n4 = nonlinear(lat, &u4);
    let mut inner = heat(lat, n0, 0.5 * h);
    axpy(&mut inner, 2.0, &n2);
    axpy(&mut inner, 2.0, &n3);
    let mut out = full;
    axpy(&mut out, h / 6.0, &heat(lat, &inner, 0.5 * h));
    axpy(&mut out, h / 6.0, &n4);
    out
}

struct Node {
    s: f64,
    states: Vec<SpecField>,
    evals: Vec<SpecField>,
}

impl Node {
    fn level(&self, lat: &Lattice, k: usize) -> MkgFlowState {
        let (a, b, phi, psi) = unpack(&lat.sp().inverse_field(&self.states[k]));
        MkgFlowState { s: self.s, a, b, phi, psi }
    }

    /// `∂_s` of slice `k` in spectral form.
    fn deriv(&self, lat: &Lattice, k: usize) -> SpecField {
        let mut d: SpecField = self.states[k].iter().map(|c| lat.sp().lap_hat(c)).collect();
        axpy(&mut d, 1.0, &self.evals[k]);
        d
    }
}

fn spec_is_finite(u: &SpecField) -> bool {
    u.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
}

/// Flows every initial level in lockstep through `targets`.
fn drive(
    lat: &Lattice,
    inits: &[MkgFlowState],
    targets: &[f64],
    policy: FlowPolicy,
    mut on_step: impl FnMut(&Node, &Node, f64),
    mut on_sample: impl FnMut(usize, &Node),
) -> Result<()> {
    policy.validate()?;
    if targets.windows(2).any(|w| w[1] < w[0]) || targets.first().is_some_and(|&s| s < 0.0) {
        return invalid("flow targets must be sorted and non-negative");
    }
    let sp = lat.sp();
    let states: Vec<SpecField> = inits
        .iter()
        .map(|x| {
            let mut u = sp.forward_field(&pack(&x.a, &x.b, &x.phi, &x.psi));
            sp.truncate_field(&mut u);
            u
        })
        .collect();
    if !states.iter().all(spec_is_finite) {
        return invalid("flow data has non-finite entries");
    }
    let evals = states.iter().map(|u| nonlinear(lat, u)).collect();
    let mut node = Node { s: 0.0, states, evals };
    for (j, &target) in targets.iter().enumerate() {
        while node.s < target {
            let h = policy.next(node.s, target);
            let states: Vec<SpecField> = node
                .states
                .iter()
                .zip(&node.evals)
                .map(|(u, e)| lawson(lat, u, e, h))
                .collect();
            let s = if (node.s + h - target).abs() <= 1e-12 * target { target } else { node.s + h };
            if !states.iter().all(spec_is_finite) {
                return Err(YmError::BlowUp {
                    what: "maxwell-klein-gordon heat flow",
                    time: s,
                    detail: "non-finite field".into(),
                });
            }
            let evals = states.iter().map(|u| nonlinear(lat, u)).collect();
            let next = Node { s, states, evals };
            on_step(&node, &next, h);
            node = next;
        }
        on_sample(j, &node);
    }
    Ok(())
}

/// Heat flow of one time slice, sampled on an `s`-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgFlow {
    pub origin: MkgState,
    pub samples: Vec<MkgFlowState>,
}

impl MkgFlow {
    pub fn s_grid(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.s).collect()
    }
}

/// Flows `origin` on the standard sample grid of `[0, s₀]`.
pub fn mkg_run_flow(lat: &Lattice, origin: &MkgState, s0: f64, policy: FlowPolicy) -> Result<MkgFlow> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return invalid(format!("flow horizon must be positive, got {s0}"));
    }
    mkg_run_flow_on(lat, origin, &sample_grid(s0), policy)
}

/// Flows `origin` through the sorted levels `grid`. A vanishing scalar uses the Yang-Mills flow.
pub fn mkg_run_flow_on(lat: &Lattice, origin: &MkgState, grid: &[f64], policy: FlowPolicy) -> Result<MkgFlow> {
    origin.check(lat)?;
    if origin.scalar_is_zero() {
        let ym = run_flow_on(lat, &origin.gauge_part(), grid, policy)?;
        let samples = ym
            .samples
            .into_iter()
            .map(|x| MkgFlowState {
                s: x.s,
                a: x.a,
                b: x.b,
                phi: scalar_zeros(lat),
                psi: scalar_zeros(lat),
            })
            .collect();
        return Ok(MkgFlow {
            origin: origin.clone(),
            samples,
        });
    }
    let mut samples = Vec::with_capacity(grid.len());
    drive(
        lat,
        &[MkgFlowState::from_state(origin)],
        grid,
        policy,
        |_, _, _| {},
        |_, node| samples.push(node.level(lat, 0)),
    )?;
    Ok(MkgFlow {
        origin: origin.clone(),
        samples,
    })
}

pub fn mkg_flow_energies(lat: &Lattice, flow: &MkgFlow) -> Vec<f64> {
    flow.samples.iter().map(|x| x.energy(lat)).collect()
}

/// `𝓘𝓗(t) = sup (N²s)^{1−σ} H(t,s) + ∫₀^{s₀} (N²s)^{1−σ} H(t,s) ds/s`.
pub fn mkg_modified_energy(lat: &Lattice, flow: &MkgFlow, n_freq: f64, sigma: f64) -> Result<ModifiedEnergy> {
    modified_energy_from(&flow.s_grid(), &mkg_flow_energies(lat, flow), n_freq, sigma)
}

// ---------------------------------------------------------------------------
// tension fields

/// `v = □_A φ` and `w_i = ∂^α F_αi + Im(φ conj(D_i φ))` at one flow level.
#[derive(Clone, Debug, PartialEq)]
pub struct MkgTension {
    pub s: f64,
    pub v: AlgField,
    pub w: VecField,
    pub a0: AlgField,
    pub center: MkgFlowState,
    /// `‖P(∂_t A − B)‖ / ‖B‖`, which vanishes when `B = ∂_t A − ∇A_0`.
    pub b_consistency: f64,
    pub stencil_error: f64,
    pub a0_mean: f64,
}

/// `count` slices spaced `delta` apart, from one evolution of `start` with step `dt`.
pub fn mkg_slice_train(lat: &Lattice, start: &MkgState, dt: f64, delta: f64, count: usize) -> Result<Vec<MkgState>> {
    let per = (delta / dt).round();
    if per < 1.0 || (per * dt - delta).abs() > 1e-9 * delta {
        return invalid(format!("slice spacing {delta} is not a multiple of dt {dt}"));
    }
    start.check(lat)?;
    let mut slices = Vec::with_capacity(count);
    let mut cur = start.clone();
    for k in 0..count {
        if k > 0 {
            for _ in 0..per as usize {
                cur = mkg_step(lat, &cur, dt)?;
            }
            cur.t = start.t + k as f64 * delta;
        }
        slices.push(cur.clone());
    }
    Ok(slices)
}

fn check_train(slices: &[MkgState], delta: f64) -> Result<()> {
    if slices.len() < 5 {
        return invalid(format!("a tension stencil needs at least 5 slices, got {}", slices.len()));
    }
    if !(delta > 0.0) {
        return invalid("stencil spacing must be positive");
    }
    for (k, s) in slices.iter().enumerate() {
        let expect = slices[0].t + k as f64 * delta;
        if (s.t - expect).abs() > 1e-9 * delta {
            return invalid(format!("slice {k} at t = {} is not on the stencil", s.t));
        }
    }
    Ok(())
}

/// Mean of `Im(φ conj(ψ))` and its `s`-derivative at slice `k`.
fn charge_mean(lat: &Lattice, node: &Node, k: usize) -> (f64, f64) {
    let sp = lat.sp();
    let vol = lat.grid().volume();
    let u = &node.states[k];
    let d = node.deriv(lat, k);
    let im_int = |p: &SpecField, q: &SpecField, i: usize, j: usize| {
        sp.parseval_inner(&p[i + 1], &q[j]) - sp.parseval_inner(&p[i], &q[j + 1])
    };
    let m = im_int(u, u, NPHI, NPSI) / vol;
    let dm = (im_int(&d, u, NPHI, NPSI) + im_int(u, &d, NPHI, NPSI)) / vol;
    (m, dm)
}

/// Tension fields at every slice with two neighbours on each side.
pub fn mkg_tension_train(lat: &Lattice, slices: &[MkgState], delta: f64, s: f64, policy: FlowPolicy) -> Result<Vec<MkgTension>> {
    check_train(slices, delta)?;
    for x in slices {
        x.check(lat)?;
    }
    if !(s >= 0.0 && s.is_finite()) {
        return invalid(format!("flow level must be non-negative, got {s}"));
    }
    let inits: Vec<MkgFlowState> = slices.iter().map(MkgFlowState::from_state).collect();
    let mut means = vec![0.0; slices.len()];
    let mut levels = Vec::new();
    let mut s_end = 0.0;
    drive(
        lat,
        &inits,
        &[s],
        policy,
        |prev, cur, h| {
            for (k, m) in means.iter_mut().enumerate() {
                let (m0, d0) = charge_mean(lat, prev, k);
                let (m1, d1) = charge_mean(lat, cur, k);
                *m += 0.5 * h * (m0 + m1) + h * h / 12.0 * (d0 - d1);
            }
        },
        |_, node| {
            levels = (0..slices.len()).map(|k| node.level(lat, k)).collect();
            s_end = node.s;
        },
    )?;
    Ok((2..slices.len() - 2)
        .map(|c| assemble(lat, &levels[c - 2..c + 3], means[c], delta, s_end))
        .collect())
}

/// Tension fields at the centre of a five-slice stencil.
pub fn mkg_tension(lat: &Lattice, slices: &[MkgState], delta: f64, s: f64, policy: FlowPolicy) -> Result<MkgTension> {
    if slices.len() != 5 {
        return invalid(format!("a tension stencil has 5 slices, got {}", slices.len()));
    }
    Ok(mkg_tension_train(lat, slices, delta, s, policy)?.remove(0))
}

fn assemble(lat: &Lattice, levels: &[MkgFlowState], a0_mean: f64, delta: f64, s: f64) -> MkgTension {
    let sp = lat.sp();
    let c = &levels[2];
    let (mut err_num, mut err_den) = (0.0, 0.0);
    let mut dt_of = |get: &dyn Fn(&MkgFlowState) -> &AlgField| {
        let col: Vec<&AlgField> = levels.iter().map(get).collect();
        let d4 = d_t(&col, delta);
        err_num += lat.l2_sq(&d4.sub(&d_t2(&col, delta)));
        err_den += lat.l2_sq(&d4);
        d4
    };
    let dtb: Vec<AlgField> = (0..3).map(|i| dt_of(&|x| &x.b[i])).collect();
    let dtpsi = dt_of(&|x| &x.psi);
    let dta: VecField = std::array::from_fn(|i| {
        let col: Vec<&AlgField> = levels.iter().map(|x| &x.a[i]).collect();
        d_t(&col, delta)
    });
    let gap: VecField = std::array::from_fn(|i| dta[i].sub(&c.b[i]));
    let div = lat.div(&gap);
    let mut a0 = sp.inverse_field(&sp.forward_field(&div).iter().map(|x| sp.inv_lap_hat(x)).collect());
    a0.comps[0].iter_mut().for_each(|x| *x += a0_mean);
    let curl_part = lat.vl2_sq(&leray_df(sp, &gap)).sqrt();
    let b_norm = lat.vl2_sq(&c.b).sqrt();

    let cdiv = caloric_rhs_direct(lat, &c.a);
    let j = current(lat, &c.a, &c.phi);
    let w: VecField = std::array::from_fn(|i| {
        let mut x = cdiv[i].sub(&dtb[i]);
        x.axpy(1.0, &j[i]);
        x
    });
    let mut v = cov_laplacian(lat, &c.a, &c.phi);
    v.axpy(-1.0, &dtpsi);
    v.axpy(-1.0, &times_i(&lat.band(&real_times(&a0.comps[0], &c.psi))));

    let stencil_error = if err_den > 0.0 { (err_num / err_den).sqrt() } else { 0.0 };
    if stencil_error > STENCIL_WARN {
        warn!("mkg tension stencil: relative t-derivative error estimate {stencil_error:.3e}");
    }
    MkgTension {
        s,
        v,
        w,
        a0,
        center: c.clone(),
        b_consistency: if b_norm > 0.0 { curl_part / b_norm } else { curl_part },
        stencil_error,
        a0_mean,
    }
}

/// `H(t₁,s) − H(t₀,s)` against `−∫∫ Re(ψ conj(v)) + B·w dx dt`, with `t₀ = start.t + 2δ`.
pub fn mkg_hamiltonian_identity_check(
    lat: &Lattice,
    start: &MkgState,
    span: f64,
    dt: f64,
    delta: f64,
    s: f64,
    policy: FlowPolicy,
) -> Result<IdentityCheck> {
    let m = identity_nodes(span, delta)?;
    let slices = mkg_slice_train(lat, start, dt, delta, m + 5)?;
    let tensions = mkg_tension_train(lat, &slices, delta, s, policy)?;
    let integrand: Vec<f64> = tensions
        .iter()
        .map(|t| -(lat.inner(&t.center.psi, &t.v) + lat.vinner(&t.center.b, &t.w)))
        .collect();
    let lhs = tensions[m].center.energy(lat) - tensions[0].center.energy(lat);
    let stencil = tensions.iter().fold(0.0f64, |a, t| a.max(t.stencil_error));
    Ok(identity_from_nodes(
        [slices[2].t, slices[m + 2].t],
        tensions[0].s,
        lhs,
        &integrand,
        delta,
        stencil,
    ))
}

// ---------------------------------------------------------------------------
// leading quadratic tension

/// Real vector component times a complex scalar.
fn real_complex() -> Pairing {
    Pairing {
        dim_f: 1,
        dim_g: 2,
        dim_out: 2,
        terms: vec![(0, 0, 0, 1.0), (0, 1, 1, 1.0)],
    }
}

/// `w⁽²⁾ = −2 P Im W(∂_t φ, conj(∇ ∂_t φ))(s)` from data at `s = 0`.
pub fn mkg_w2_leading(lat: &Lattice, origin: &MkgState, s: f64, mode: WMode) -> Result<VecField> {
    let pt = &origin.phi_t;
    let pairing = Pairing::complex_im();
    let mut out = lat.vzeros();
    for (j, o) in out.iter_mut().enumerate() {
        let g = lat.d(pt, j);
        *o = bilinear_w_sum(lat.sp(), &pairing, &[(pt, &g)], s, mode)?.scale(MKG_W2_COEFF);
    }
    Ok(leray_df(lat.sp(), &out))
}

/// `v⁽²⁾ = −4i W(∂_t P^j A, ∂_j ∂_t φ)(s)` from data at `s = 0`.
pub fn mkg_v2_leading(lat: &Lattice, origin: &MkgState, s: f64, mode: WMode) -> Result<AlgField> {
    let pe = leray_df(lat.sp(), &origin.e);
    let g: Vec<AlgField> = (0..3).map(|j| lat.d(&origin.phi_t, j)).collect();
    let pairs: Vec<(&AlgField, &AlgField)> = (0..3).map(|j| (&pe[j], &g[j])).collect();
    let x = bilinear_w_sum(lat.sp(), &real_complex(), &pairs, s, mode)?;
    Ok(times_i(&x).scale(MKG_V2_COEFF))
}
