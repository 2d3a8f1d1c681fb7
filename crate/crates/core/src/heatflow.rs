//! Yang-Mills heat flow at fixed physical time.
//!
//! Each time slice `(A_i, B_i = F_0i)` is flowed in DeTurck gauge `A_s = ∂^ℓ A_ℓ`:
//!
//! ```text
//! (∂_s − Δ) A_i = 2[A^ℓ, ∂_ℓ A_i] − [A^ℓ, ∂_i A_ℓ] + [A^ℓ, [A_ℓ, A_i]]
//! (∂_s − Δ) B_i = 2[B^ℓ, F_ℓi] + 2[A^ℓ, ∂_ℓ B_i] + [A^ℓ, [A_ℓ, B_i]]
//! ```
//!
//! The stepper is integrating-factor RK4 on the spectral coefficients, so the
//! heat part is exact and abelian data reproduce `e^{sΔ}` to round-off. The
//! caloric gauge is reached through the transport `∂_s U = U A_s`, integrated
//! alongside the flow by a fourth-order Magnus method.

use log::warn;
use num_complex::Complex64;

use crate::algebra::quat_mul;
use crate::dynamics::{curvature_divergence, spectral_curvature, CauchyState};
use crate::error::{invalid, Result, YmError};
use crate::gauge::{curvature, gauge_transform, pair_slot, Connection, Curvature, GroupField};
use crate::lattice::Lattice;
use crate::quadrature::composite_gauss;
use crate::spectral::bilinear::{bilinear_w_sum, Pairing, WMode};
use crate::spectral::field::{vec_is_finite, AlgField, SpecField, VecField};
use crate::spectral::ops::divergence_hat;

/// Number of geometric flow samples on `[s₀/1024, s₀]`.
pub const FLOW_SAMPLES: usize = 32;
/// Ratio `s₀ / s_min` of the sample grid.
pub const FLOW_RANGE: f64 = 1024.0;
/// Largest renormalization of the transported gauge accepted in one step.
pub const TRANSPORT_TOL: f64 = 1e-6;
/// Stiffness limit `ds · k_max²` for the explicit caloric stepper.
pub const CALORIC_STIFFNESS: f64 = 0.25;
/// Relative Richardson estimate of the stencil error above which a warning is logged.
pub const STENCIL_WARN: f64 = 1e-3;
/// `w⁽²⁾_i = W2_COEFF · Σ_ℓ W(E_ℓ, ∂_i E_ℓ − 2 ∂_ℓ E_i)` with the bracket pairing.
pub const W2_COEFF: f64 = -2.0;

/// One level of the flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub s: f64,
    pub a: VecField,
    /// `B_i = F_0i`.
    pub b: VecField,
}

impl FlowState {
    pub fn from_cauchy(state: &CauchyState) -> Self {
        Self {
            s: 0.0,
            a: state.a.clone(),
            b: state.e.clone(),
        }
    }

    pub fn curvature(&self, lat: &Lattice) -> Curvature {
        curvature(lat, &self.a, Some(&self.b))
    }

    /// `½ Σ_{α<β} ‖F_αβ(s)‖²`.
    pub fn energy(&self, lat: &Lattice) -> f64 {
        self.curvature(lat).energy(lat)
    }

    pub fn magnetic_energy(&self, lat: &Lattice) -> f64 {
        self.curvature(lat).magnetic_energy(lat)
    }
}

/// Step-size rule `ds = max(ds_min, growth · s)`, clipped to the next sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPolicy {
    pub ds_min: f64,
    pub growth: f64,
}

impl FlowPolicy {
    /// `ds_min = s₀ / (4·1024)`, ten steps at `ds_min` before geometric growth.
    pub fn for_horizon(s0: f64) -> Self {
        Self {
            ds_min: s0 / (4.0 * FLOW_RANGE),
            growth: 0.1,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.ds_min > 0.0 && self.ds_min.is_finite() && self.growth > 0.0 && self.growth.is_finite()) {
            return invalid(format!("invalid flow policy {self:?}"));
        }
        Ok(())
    }

    pub(crate) fn next(&self, s: f64, target: f64) -> f64 {
        let ds = self.ds_min.max(self.growth * s);
        if s + ds >= target * (1.0 - 1e-12) - 1e-300 || target - s < 0.5 * ds {
            target - s
        } else {
            ds
        }
    }
}

/// `{0} ∪ {s₀ · 1024^{(k−31)/31}}`.
pub fn sample_grid(s0: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let m = FLOW_SAMPLES - 1;
    for k in 0..FLOW_SAMPLES {
        out.push(s0 * FLOW_RANGE.powf((k as f64 - m as f64) / m as f64));
    }
    *out.last_mut().unwrap() = s0;
    out
}

/// `U(s)` solving `∂_s U = U A_s`, `U(0) = 1`, at the flow samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CaloricTransport {
    pub s: Vec<f64>,
    pub u: Vec<GroupField>,
    /// Largest per-step renormalization applied to `U`.
    pub max_correction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrajectory {
    pub origin: CauchyState,
    pub samples: Vec<FlowState>,
    pub transport: CaloricTransport,
}

impl FlowTrajectory {
    pub fn s_grid(&self) -> Vec<f64> {
        self.samples.iter().map(|x| x.s).collect()
    }
}

// ---------------------------------------------------------------------------
// spectral engine

#[derive(Clone)]
struct SpecState {
    a: [SpecField; 3],
    b: [SpecField; 3],
}

/// Nonlinear terms and band-limited lattice values at one node.
struct Eval {
    a: VecField,
    b: VecField,
    na: [SpecField; 3],
    nb: [SpecField; 3],
}

fn zeros_spec(lat: &Lattice) -> SpecField {
    vec![vec![Complex64::new(0.0, 0.0); lat.n3()]; lat.dim()]
}

fn axpy(y: &mut SpecField, a: f64, x: &SpecField) {
    for (yc, xc) in y.iter_mut().zip(x) {
        for (u, v) in yc.iter_mut().zip(xc) {
            *u += a * v;
        }
    }
}

fn heat(lat: &Lattice, f: &SpecField, h: f64) -> SpecField {
    f.iter().map(|c| lat.sp().heat_hat(c, h)).collect()
}

fn lap(lat: &Lattice, f: &SpecField) -> SpecField {
    f.iter().map(|c| lat.sp().lap_hat(c)).collect()
}

fn deriv(lat: &Lattice, f: &SpecField, axis: usize) -> SpecField {
    f.iter().map(|c| lat.sp().deriv_hat(c, axis)).collect()
}

fn to_spec(lat: &Lattice, v: &VecField) -> [SpecField; 3] {
    let mut h = lat.sp().forward_vec(v);
    h.iter_mut().for_each(|f| lat.sp().truncate_field(f));
    h
}

fn forward_trunc(lat: &Lattice, fields: &[AlgField]) -> Vec<SpecField> {
    let mut h = lat.sp().forward_fields(&fields.iter().collect::<Vec<_>>());
    h.iter_mut().for_each(|f| lat.sp().truncate_field(f));
    h
}

impl SpecState {
    fn from_fields(lat: &Lattice, a: &VecField, b: &VecField) -> Self {
        Self {
            a: to_spec(lat, a),
            b: to_spec(lat, b),
        }
    }

    fn map(&self, f: impl Fn(&SpecField) -> SpecField) -> Self {
        Self {
            a: std::array::from_fn(|i| f(&self.a[i])),
            b: std::array::from_fn(|i| f(&self.b[i])),
        }
    }

    fn heat(&self, lat: &Lattice, h: f64) -> Self {
        self.map(|f| heat(lat, f, h))
    }

    fn axpy_eval(&mut self, a: f64, e: &Eval) {
        for i in 0..3 {
            axpy(&mut self.a[i], a, &e.na[i]);
            axpy(&mut self.b[i], a, &e.nb[i]);
        }
    }

    fn is_finite(&self) -> bool {
        self.a
            .iter()
            .chain(&self.b)
            .all(|f| f.iter().all(|c| c.iter().all(|z| z.re.is_finite() && z.im.is_finite())))
    }
}

/// DeTurck nonlinearities `N_A`, `N_B` (everything except `ΔA`, `ΔB`).
fn nonlinear(lat: &Lattice, u: &SpecState) -> Eval {
    let sp = lat.sp();
    let spec = lat.spec();
    let a = sp.inverse_vec(&u.a);
    let b = sp.inverse_vec(&u.b);
    if spec.is_abelian() {
        return Eval {
            a,
            b,
            na: std::array::from_fn(|_| zeros_spec(lat)),
            nb: std::array::from_fn(|_| zeros_spec(lat)),
        };
    }
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let aa = forward_trunc(lat, &pairs.map(|(i, j)| a[i].bracket(&a[j], spec)));
    let fh: [SpecField; 3] = std::array::from_fn(|p| {
        let (i, j) = pairs[p];
        let mut out = deriv(lat, &u.a[j], i);
        axpy(&mut out, -1.0, &deriv(lat, &u.a[i], j));
        axpy(&mut out, 1.0, &aa[p]);
        out
    });
    let f = sp.inverse_vec(&fh);
    let div_a = sp.inverse_field(&divergence_hat(sp, &u.a));

    // N_A_i = ∂_ℓ T[A_ℓ, A_i] + T(Σ_ℓ [A_ℓ, F_ℓi] + [A_i, div A])
    let mut pa: Vec<AlgField> = (0..3).map(|i| a[i].bracket(&div_a, spec)).collect();
    let mut pb: Vec<AlgField> = (0..3).map(|i| div_a.bracket(&b[i], spec).scale(-2.0)).collect();
    for i in 0..3 {
        for l in 0..3 {
            if let Some((p, s)) = pair_slot(l, i) {
                pa[i].axpy(s, &a[l].bracket(&f[p], spec));
                pb[i].axpy(2.0 * s, &b[l].bracket(&f[p], spec));
            }
        }
    }
    // C_ℓi = T[A_ℓ, B_i]
    let c_fields: Vec<AlgField> = (0..9).map(|k| a[k / 3].bracket(&b[k % 3], spec)).collect();
    let ch = forward_trunc(lat, &c_fields);
    let c = sp.inverse_fields(&ch.iter().collect::<Vec<_>>());
    // N_B_i = 2∂_ℓ C_ℓi + T(−2[div A, B_i] + Σ_ℓ [A_ℓ, C_ℓi] + 2Σ_ℓ [B_ℓ, F_ℓi])
    for i in 0..3 {
        for l in 0..3 {
            pb[i].axpy(1.0, &a[l].bracket(&c[3 * l + i], spec));
        }
    }
    let pah = forward_trunc(lat, &pa);
    let pbh = forward_trunc(lat, &pb);
    let na: [SpecField; 3] = std::array::from_fn(|i| {
        let mut out = pah[i].clone();
        for l in 0..3 {
            if let Some((p, s)) = pair_slot(l, i) {
                axpy(&mut out, s, &deriv(lat, &aa[p], l));
            }
        }
        out
    });
    let nb: [SpecField; 3] = std::array::from_fn(|i| {
        let mut out = pbh[i].clone();
        for l in 0..3 {
            axpy(&mut out, 2.0, &deriv(lat, &ch[3 * l + i], l));
        }
        out
    });
    Eval { a, b, na, nb }
}

/// Lawson RK4 step of size `h` given the nonlinearity `e0` at `u`.
fn lawson(lat: &Lattice, u: &SpecState, e0: &Eval, h: f64) -> SpecState {
    let half = u.heat(lat, 0.5 * h);
    let full = u.heat(lat, h);

    let mut u2 = u.clone();
    u2.axpy_eval(0.5 * h, e0);
    let u2 = u2.heat(lat, 0.5 * h);
    let e2 = nonlinear(lat, &u2);

    let mut u3 = half.clone();
    u3.axpy_eval(0.5 * h, &e2);
    let e3 = nonlinear(lat, &u3);

    let k3h = SpecState {
        a: e3.na.clone(),
        b: e3.nb.clone(),
    }
    .heat(lat, 0.5 * h);
    let mut u4 = full.clone();
    for i in 0..3 {
        axpy(&mut u4.a[i], h, &k3h.a[i]);
        axpy(&mut u4.b[i], h, &k3h.b[i]);
    }
    let e4 = nonlinear(lat, &u4);

    let mut inner = SpecState {
        a: e0.na.clone(),
        b: e0.nb.clone(),
    }
    .heat(lat, 0.5 * h);
    inner.axpy_eval(2.0, &e2);
    inner.axpy_eval(2.0, &e3);
    let inner = inner.heat(lat, 0.5 * h);
    let mut out = full;
    for i in 0..3 {
        axpy(&mut out.a[i], h / 6.0, &inner.a[i]);
        axpy(&mut out.b[i], h / 6.0, &inner.b[i]);
    }
    out.axpy_eval(h / 6.0, &e4);
    out
}

/// Flow nodes handed to observers.
struct Node {
    s: f64,
    states: Vec<SpecState>,
    evals: Vec<Eval>,
}

impl Node {
    /// Spectral `∂_s A` of slice `k`.
    fn da(&self, lat: &Lattice, k: usize) -> [SpecField; 3] {
        std::array::from_fn(|i| {
            let mut d = lap(lat, &self.states[k].a[i]);
            axpy(&mut d, 1.0, &self.evals[k].na[i]);
            d
        })
    }

    fn db(&self, lat: &Lattice, k: usize) -> [SpecField; 3] {
        std::array::from_fn(|i| {
            let mut d = lap(lat, &self.states[k].b[i]);
            axpy(&mut d, 1.0, &self.evals[k].nb[i]);
            d
        })
    }

    fn flow_state(&self, k: usize) -> FlowState {
        FlowState {
            s: self.s,
            a: self.evals[k].a.clone(),
            b: self.evals[k].b.clone(),
        }
    }
}

fn flow_blow_up(s: f64) -> YmError {
    YmError::BlowUp {
        what: "heat flow",
        time: s,
        detail: "non-finite coefficients".into(),
    }
}

/// Flows several slices in lockstep through the sorted `targets`. `on_step(prev, cur)`
/// runs after every step, `on_sample(j, cur)` whenever `targets[j]` is reached.
fn drive(
    lat: &Lattice,
    inits: &[(VecField, VecField)],
    targets: &[f64],
    policy: FlowPolicy,
    mut on_step: impl FnMut(&Node, &Node) -> Result<()>,
    mut on_sample: impl FnMut(usize, &Node) -> Result<()>,
) -> Result<()> {
    policy.validate()?;
    if targets.windows(2).any(|w| w[1] < w[0]) || targets.first().is_some_and(|&s| s < 0.0) {
        return invalid("flow targets must be sorted and non-negative");
    }
    for (a, b) in inits {
        if !(vec_is_finite(a) && vec_is_finite(b)) {
            return invalid("flow data has non-finite entries");
        }
    }
    let states: Vec<SpecState> = inits.iter().map(|(a, b)| SpecState::from_fields(lat, a, b)).collect();
    let evals = states.iter().map(|u| nonlinear(lat, u)).collect();
    let mut node = Node { s: 0.0, states, evals };
    for (j, &target) in targets.iter().enumerate() {
        while node.s < target {
            let h = policy.next(node.s, target);
            let states: Vec<SpecState> = node
                .states
                .iter()
                .zip(&node.evals)
                .map(|(u, e)| lawson(lat, u, e, h))
                .collect();
            let s = if (node.s + h - target).abs() <= 1e-12 * target { target } else { node.s + h };
            if !states.iter().all(SpecState::is_finite) {
                return Err(flow_blow_up(s));
            }
            let evals = states.iter().map(|u| nonlinear(lat, u)).collect();
            let next = Node { s, states, evals };
            on_step(&node, &next)?;
            node = next;
        }
        on_sample(j, &node)?;
    }
    Ok(())
}

/// Hermite data `(value, s-derivative)` of `div A` at a node.
fn div_a_hermite(lat: &Lattice, node: &Node, k: usize) -> (AlgField, AlgField) {
    let sp = lat.sp();
    let v = sp.inverse_field(&divergence_hat(sp, &node.states[k].a));
    let d = sp.inverse_field(&divergence_hat(sp, &node.da(lat, k)));
    (v, d)
}

/// `∫ div A ds` over one step and the fourth-order Magnus exponent `∫x + h²/12 [x₀, x₁]`.
///
/// The integral is exact for the heat part: with `r(τ) = x̂(τ) − e^{−λτ} x̂₀` the
/// remainder is integrated by the Hermite corrected trapezoid.
fn transport_exponent(lat: &Lattice, prev: &Node, cur: &Node, h: f64) -> AlgField {
    let sp = lat.sp();
    let x0 = divergence_hat(sp, &prev.states[0].a);
    let d0 = divergence_hat(sp, &prev.da(lat, 0));
    let x1 = divergence_hat(sp, &cur.states[0].a);
    let d1 = divergence_hat(sp, &cur.da(lat, 0));
    let integral: SpecField = (0..lat.dim())
        .map(|c| {
            (0..lat.n3())
                .map(|k| {
                    let lam = sp.k2(k);
                    let e = (-lam * h).exp();
                    let phi = if lam * h > 1e-12 { -(-lam * h).exp_m1() / lam } else { h };
                    let r1 = x1[c][k] - e * x0[c][k];
                    let dr0 = d0[c][k] + lam * x0[c][k];
                    let dr1 = d1[c][k] + lam * e * x0[c][k];
                    x0[c][k] * phi + 0.5 * h * r1 + h * h / 12.0 * (dr0 - dr1)
                })
                .collect()
        })
        .collect();
    let mut omega = sp.inverse_field(&integral);
    if !lat.spec().is_abelian() {
        let ends = sp.inverse_fields(&[&x0, &x1]);
        omega.axpy(h * h / 12.0, &ends[0].bracket(&ends[1], lat.spec()));
    }
    omega
}

/// `U ← U exp(Ω)`, returning the renormalization applied.
fn transport_step(lat: &Lattice, u: &mut GroupField, omega: &AlgField) -> Result<f64> {
    let g = GroupField::exp(lat, omega);
    let mut worst = 0.0f64;
    for (q, e) in u.q.iter_mut().zip(&g.q) {
        let n = quat_mul(*q, *e);
        let norm = n.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max((norm - 1.0).abs());
        *q = n.map(|v| v / norm);
    }
    if worst > TRANSPORT_TOL {
        return Err(YmError::StepRejected {
            what: "caloric transport",
            detail: format!("renormalization {worst:.3e} exceeds {TRANSPORT_TOL:.0e}"),
        });
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// public operations

/// `(∂_s A, ∂_s B)` in DeTurck gauge.
pub fn deturck_rhs(lat: &Lattice, state: &FlowState) -> (VecField, VecField) {
    let u = SpecState::from_fields(lat, &state.a, &state.b);
    let e = nonlinear(lat, &u);
    let node = Node {
        s: state.s,
        states: vec![u],
        evals: vec![e],
    };
    (lat.sp().inverse_vec(&node.da(lat, 0)), lat.sp().inverse_vec(&node.db(lat, 0)))
}

/// One integrating-factor RK4 step.
pub fn flow_step(lat: &Lattice, state: &FlowState, ds: f64) -> Result<FlowState> {
    if !(ds > 0.0 && ds.is_finite()) {
        return invalid(format!("flow step must be positive, got {ds}"));
    }
    let u = SpecState::from_fields(lat, &state.a, &state.b);
    let e = nonlinear(lat, &u);
    let next = lawson(lat, &u, &e, ds);
    if !next.is_finite() {
        return Err(flow_blow_up(state.s + ds));
    }
    Ok(FlowState {
        s: state.s + ds,
        a: lat.sp().inverse_vec(&next.a),
        b: lat.sp().inverse_vec(&next.b),
    })
}

/// Flows `state` (taken at `s = 0`) to each of the sorted `targets`.
pub fn flow_to(lat: &Lattice, state: &FlowState, targets: &[f64], policy: FlowPolicy) -> Result<Vec<FlowState>> {
    let mut out = Vec::with_capacity(targets.len());
    drive(
        lat,
        &[(state.a.clone(), state.b.clone())],
        targets,
        policy,
        |_, _| Ok(()),
        |_, node| {
            out.push(node.flow_state(0));
            Ok(())
        },
    )?;
    Ok(out)
}

/// Flows the Cauchy data to `s₀` on [`sample_grid`], transporting the caloric gauge along.
pub fn run_flow(lat: &Lattice, origin: &CauchyState, s0: f64, policy: FlowPolicy) -> Result<FlowTrajectory> {
    if !(s0 > 0.0 && s0.is_finite()) {
        return invalid(format!("flow horizon must be positive, got {s0}"));
    }
    run_flow_on(lat, origin, &sample_grid(s0), policy)
}

/// As [`run_flow`] on an explicit sorted sample grid.
pub fn run_flow_on(lat: &Lattice, origin: &CauchyState, grid: &[f64], policy: FlowPolicy) -> Result<FlowTrajectory> {
    origin.check(lat)?;
    let mut samples = Vec::with_capacity(grid.len());
    let u = std::cell::RefCell::new(GroupField::identity(lat.n3()));
    let mut us = Vec::with_capacity(grid.len());
    let mut worst = 0.0f64;
    drive(
        lat,
        &[(origin.a.clone(), origin.e.clone())],
        grid,
        policy,
        |prev, cur| {
            let omega = transport_exponent(lat, prev, cur, cur.s - prev.s);
            worst = worst.max(transport_step(lat, &mut u.borrow_mut(), &omega)?);
            Ok(())
        },
        |_, node| {
            samples.push(node.flow_state(0));
            us.push(u.borrow().clone());
            Ok(())
        },
    )?;
    Ok(FlowTrajectory {
        origin: origin.clone(),
        samples,
        transport: CaloricTransport {
            s: grid.to_vec(),
            u: us,
            max_correction: worst,
        },
    })
}

/// The transport carried by a flow trajectory.
pub fn caloric_transport(flow: &FlowTrajectory) -> &CaloricTransport {
    &flow.transport
}

/// Caloric-gauge fields at one flow level.
#[derive(Clone, Debug, PartialEq)]
pub struct CaloricSample {
    pub s: f64,
    pub a: VecField,
    pub b: VecField,
    pub mc_residual: f64,
}

/// `Ã_i = U A_i U^{-1} − (∂_i U) U^{-1}`, `B̃ = U B U^{-1}` at every sample.
pub fn to_caloric(lat: &Lattice, flow: &FlowTrajectory, transport: &CaloricTransport) -> Result<Vec<CaloricSample>> {
    if transport.s.len() != flow.samples.len()
        || transport.s.iter().zip(&flow.samples).any(|(s, x)| (s - x.s).abs() > 1e-14 * s.abs().max(1.0))
    {
        return invalid("transport and flow are sampled on different s-grids");
    }
    Ok(flow
        .samples
        .iter()
        .zip(&transport.u)
        .map(|(x, u)| {
            let t = gauge_transform(lat, &Connection::spatial(x.a.clone()), Some(&x.b), u);
            CaloricSample {
                s: x.s,
                a: t.conn.a,
                b: t.e.unwrap(),
                mc_residual: t.mc_residual,
            }
        })
        .collect())
}

/// `∂_s Ã_i = D^ℓ F_ℓi`, the caloric-gauge flow.
pub fn caloric_rhs_direct(lat: &Lattice, a: &VecField) -> VecField {
    curvature_divergence(lat, &spectral_curvature(lat, a))
}

/// Explicit RK4 integration of the caloric flow for `steps` steps of size `ds`.
pub fn caloric_flow_direct(lat: &Lattice, a: &VecField, ds: f64, steps: usize) -> Result<VecField> {
    let k2 = lat.sp().k_max().powi(2);
    if !(ds > 0.0) || ds * k2 > CALORIC_STIFFNESS {
        return Err(YmError::StepRejected {
            what: "caloric flow",
            detail: format!("ds·k_max² = {:.3} exceeds {CALORIC_STIFFNESS}", ds * k2),
        });
    }
    let add = |x: &VecField, k: &VecField, c: f64| -> VecField { std::array::from_fn(|i| {
        let mut o = x[i].clone();
        o.axpy(c, &k[i]);
        o
    }) };
    let mut cur = a.clone();
    for step in 0..steps {
        let k1 = caloric_rhs_direct(lat, &cur);
        let k2 = caloric_rhs_direct(lat, &add(&cur, &k1, 0.5 * ds));
        let k3 = caloric_rhs_direct(lat, &add(&cur, &k2, 0.5 * ds));
        let k4 = caloric_rhs_direct(lat, &add(&cur, &k3, ds));
        for i in 0..3 {
            cur[i].axpy(ds / 6.0, &k1[i]);
            cur[i].axpy(ds / 3.0, &k2[i]);
            cur[i].axpy(ds / 3.0, &k3[i]);
            cur[i].axpy(ds / 6.0, &k4[i]);
        }
        if !vec_is_finite(&cur) {
            return Err(flow_blow_up((step + 1) as f64 * ds));
        }
    }
    Ok(cur)
}

// ---------------------------------------------------------------------------
// tension field

/// Five equally spaced Cauchy slices centred at `t₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeStencil {
    pub slices: Vec<CauchyState>,
    pub delta: f64,
}

impl TimeStencil {
    pub fn new(slices: Vec<CauchyState>, delta: f64) -> Result<Self> {
        if slices.len() != 5 {
            return invalid(format!("a stencil needs 5 slices, got {}", slices.len()));
        }
        if !(delta > 0.0) {
            return invalid("stencil spacing must be positive");
        }
        for (k, s) in slices.iter().enumerate() {
            let expect = slices[2].t + (k as f64 - 2.0) * delta;
            if (s.t - expect).abs() > 1e-9 * delta {
                return invalid(format!("slice {k} at t = {} is not on the stencil", s.t));
            }
        }
        Ok(Self { slices, delta })
    }

    /// Evolves `start` (taken as `t₀ − 2δ`) with step `dt` and records the five slices.
    pub fn from_evolution(lat: &Lattice, start: &CauchyState, dt: f64, delta: f64) -> Result<Self> {
        Self::new(slice_train(lat, start, dt, delta, 5)?, delta)
    }

    pub fn center(&self) -> &CauchyState {
        &self.slices[2]
    }
}

/// `count` slices spaced `delta` apart, from one evolution of `start` with step `dt`.
pub fn slice_train(lat: &Lattice, start: &CauchyState, dt: f64, delta: f64, count: usize) -> Result<Vec<CauchyState>> {
    let per = (delta / dt).round();
    if per < 1.0 || (per * dt - delta).abs() > 1e-9 * delta {
        return invalid(format!("slice spacing {delta} is not a multiple of dt {dt}"));
    }
    let mut slices = Vec::with_capacity(count);
    let mut cur = start.clone();
    for k in 0..count {
        if k > 0 {
            for _ in 0..per as usize {
                cur = crate::dynamics::step_rk4(lat, &cur, dt)?;
            }
            cur.t = start.t + k as f64 * delta;
        }
        slices.push(cur.clone());
    }
    Ok(slices)
}

/// Fourth-order central difference across the stencil.
pub(crate) fn d_t(values: &[&AlgField], delta: f64) -> AlgField {
    let mut out = values[3].sub(values[1]).scale(8.0);
    out.axpy(-1.0, values[4]);
    out.axpy(1.0, values[0]);
    out.scale(1.0 / (12.0 * delta))
}

pub(crate) fn d_t2(values: &[&AlgField], delta: f64) -> AlgField {
    values[3].sub(values[1]).scale(0.5 / delta)
}

/// Tension field and its bookkeeping at one flow level.
#[derive(Clone, Debug, PartialEq)]
pub struct Tension {
    pub s: f64,
    /// `w_i = D_0 F_0i + D^j F_ij`.
    pub w: VecField,
    pub a0: AlgField,
    /// Central slice at level `s`.
    pub center: FlowState,
    /// `‖B − (∂_t A − ∇A_0 + [A_0, A])‖ / ‖B‖`.
    pub b_consistency: f64,
    /// Richardson estimate of the relative stencil error in `∂_t B`.
    pub stencil_error: f64,
    /// Largest component of the spatial mean of `A_0`.
    pub a0_mean: f64,
    /// `‖[Ā_0, B]‖`, the change in `w` if the mean of `A_0` were dropped.
    pub mean_sensitivity: f64,
}

/// Flows the five slices to `s`, reconstructs `A_0(s)` and evaluates `w(s)`.
pub fn tension_field(lat: &Lattice, stencil: &TimeStencil, s: f64, policy: FlowPolicy) -> Result<Tension> {
    let mut out = tension_train(lat, &stencil.slices, stencil.delta, s, policy)?;
    Ok(out.pop().expect("a stencil has one centre"))
}

/// Tension fields at every interior slice `2..len−2` of an equally spaced train of
/// slices. All slices are flowed in lockstep, so neighbouring centres share flows.
pub fn tension_train(
    lat: &Lattice,
    slices: &[CauchyState],
    delta: f64,
    s: f64,
    policy: FlowPolicy,
) -> Result<Vec<Tension>> {
    if !(s >= 0.0 && s.is_finite()) {
        return invalid(format!("flow level must be non-negative, got {s}"));
    }
    if slices.len() < 5 || !(delta > 0.0) {
        return invalid("a slice train needs at least 5 slices and positive spacing");
    }
    for (k, x) in slices.iter().enumerate() {
        if (x.t - slices[0].t - k as f64 * delta).abs() > 1e-9 * delta {
            return invalid(format!("slice {k} at t = {} is off the train", x.t));
        }
    }
    let sp = lat.sp();
    let centers = slices.len() - 4;
    let inits: Vec<(VecField, VecField)> = slices.iter().map(|c| (c.a.clone(), c.e.clone())).collect();
    let mut a0 = vec![lat.zeros(); centers];
    let mut fin: Option<(Vec<FlowState>, f64)> = None;

    // ∂_s A_0 = g − [div A, A_0],  g = −D^ℓ B_ℓ + ∂_t div A
    let divs = |node: &Node| -> Vec<(AlgField, AlgField)> { (0..slices.len()).map(|k| div_a_hermite(lat, node, k)).collect() };
    let forcing = |node: &Node, dv: &[(AlgField, AlgField)], c: usize| -> (AlgField, AlgField, AlgField) {
        let k = c + 2;
        let vals: Vec<&AlgField> = dv[c..c + 5].iter().map(|d| &d.0).collect();
        let ders: Vec<&AlgField> = dv[c..c + 5].iter().map(|d| &d.1).collect();
        let e = &node.evals[k];
        let dbh = node.db(lat, k);
        let da = sp.inverse_vec(&node.da(lat, k));
        let db = sp.inverse_vec(&dbh);
        let mut g = d_t(&vals, delta).sub(&sp.inverse_field(&divergence_hat(sp, &node.states[k].b)));
        let mut gd = d_t(&ders, delta).sub(&sp.inverse_field(&divergence_hat(sp, &dbh)));
        for l in 0..3 {
            g.axpy(-1.0, &lat.bracket_band(&e.a[l], &e.b[l]));
            gd.axpy(-1.0, &lat.bracket_band(&da[l], &e.b[l]));
            gd.axpy(-1.0, &lat.bracket_band(&e.a[l], &db[l]));
        }
        (g, gd, dv[k].0.clone())
    };
    let mut last: Option<Vec<(AlgField, AlgField, AlgField)>> = None;
    drive(
        lat,
        &inits,
        &[s],
        policy,
        |prev, cur| {
            let h = cur.s - prev.s;
            let before = match last.take() {
                Some(x) => x,
                None => {
                    let dv = divs(prev);
                    (0..centers).map(|c| forcing(prev, &dv, c)).collect()
                }
            };
            let dv = divs(cur);
            let after: Vec<_> = (0..centers).map(|c| forcing(cur, &dv, c)).collect();
            for (c, a) in a0.iter_mut().enumerate() {
                let (g0, gd0, v0) = &before[c];
                let (g1, gd1, v1) = &after[c];
                // Euler-Maclaurin corrected trapezoid for the forcing, Heun for the bracket
                let mut inc = g0.add(g1).scale(0.5 * h);
                inc.axpy(h * h / 12.0, &gd0.sub(gd1));
                let mut pred = a.add(&inc);
                pred.axpy(-h, &lat.bracket_band(v0, a));
                let mut next = a.add(&inc);
                next.axpy(-0.5 * h, &lat.bracket_band(v0, a));
                next.axpy(-0.5 * h, &lat.bracket_band(v1, &pred));
                *a = next;
            }
            last = Some(after);
            Ok(())
        },
        |_, node| {
            fin = Some(((0..slices.len()).map(|k| node.flow_state(k)).collect(), node.s));
            Ok(())
        },
    )?;
    let (levels, s_end) = fin.expect("the flow visits its only target");
    a0.into_iter()
        .enumerate()
        .map(|(c, a0)| Ok(assemble_tension(lat, &levels[c..c + 5], a0, delta, s_end)))
        .collect()
}

fn assemble_tension(lat: &Lattice, levels: &[FlowState], a0: AlgField, delta: f64, s: f64) -> Tension {
    let c = &levels[2];
    let cdiv = caloric_rhs_direct(lat, &c.a);
    let mut w = lat.vzeros();
    let mut err_num = 0.0;
    let mut err_den = 0.0;
    let mut cons_num = 0.0;
    for i in 0..3 {
        let col: Vec<&AlgField> = levels.iter().map(|x| &x.b[i]).collect();
        let dtb = d_t(&col, delta);
        err_num += lat.l2_sq(&dtb.sub(&d_t2(&col, delta)));
        err_den += lat.l2_sq(&dtb);
        let mut wi = dtb;
        wi.axpy(1.0, &lat.bracket(&a0, &c.b[i]));
        wi.axpy(-1.0, &cdiv[i]);
        w[i] = wi;

        let acol: Vec<&AlgField> = levels.iter().map(|x| &x.a[i]).collect();
        let mut f0i = d_t(&acol, delta);
        f0i.axpy(-1.0, &lat.d(&a0, i));
        f0i.axpy(1.0, &lat.bracket(&a0, &c.a[i]));
        cons_num += lat.l2_sq(&c.b[i].sub(&f0i));
    }
    let b_norm = lat.vl2_sq(&c.b).sqrt();
    let mean = AlgField::from_comps(
        a0.comps
            .iter()
            .map(|c| vec![c.iter().sum::<f64>() / c.len() as f64; c.len()])
            .collect(),
    );
    let a0_mean = mean.max_abs();
    let mean_sensitivity = (0..3).map(|i| lat.l2_sq(&lat.bracket(&mean, &c.b[i]))).sum::<f64>().sqrt();
    let stencil_error = if err_den > 0.0 { (err_num / err_den).sqrt() } else { 0.0 };
    if stencil_error > STENCIL_WARN {
        warn!("tension stencil: relative t-derivative error estimate {stencil_error:.3e}");
    }
    Tension {
        s,
        w,
        a0,
        center: c.clone(),
        b_consistency: if b_norm > 0.0 { cons_num.sqrt() / b_norm } else { cons_num.sqrt() },
        stencil_error,
        a0_mean,
        mean_sensitivity,
    }
}

// ---------------------------------------------------------------------------
// decompositions

/// The six curvature components `F_12, F_13, F_23, F_01, F_02, F_03`.
pub type CurvatureSix = [AlgField; 6];

fn six(lat: &Lattice, x: &FlowState) -> CurvatureSix {
    let f = x.curvature(lat);
    let [m0, m1, m2] = f.mag;
    let [b0, b1, b2] = x.b.clone();
    [m0, m1, m2, b0, b1, b2]
}

/// `F^bil(s) = F(s) − e^{sΔ} F(0)` for the sample at index `idx`.
pub fn f_bilinear_part(lat: &Lattice, flow: &FlowTrajectory, idx: usize) -> Result<CurvatureSix> {
    let Some(x) = flow.samples.get(idx) else {
        return invalid(format!("sample {idx} out of range"));
    };
    let f0 = six(lat, &FlowState::from_cauchy(&flow.origin));
    let fs = six(lat, x);
    Ok(std::array::from_fn(|k| {
        let lin = crate::spectral::ops::heat_propagate(lat.sp(), &f0[k], x.s).expect("s >= 0");
        fs[k].sub(&lin)
    }))
}

/// `2[F_α^ℓ, F_ℓβ] + 2[A^ℓ, ∂_ℓ F_αβ] + [A^ℓ, [A_ℓ, F_αβ]]` for the six components.
fn curvature_source(lat: &Lattice, x: &FlowState) -> CurvatureSix {
    let f = x.curvature(lat);
    let a = &x.a;
    let comps = six(lat, x);
    // (α, β) with α = 3 standing for the time index
    let idx = [(0, 1), (0, 2), (1, 2), (3, 0), (3, 1), (3, 2)];
    let fab = |al: usize, l: usize| -> AlgField {
        if al == 3 {
            x.b[l].clone()
        } else {
            f.f(al, l)
        }
    };
    std::array::from_fn(|k| {
        let (al, be) = idx[k];
        let mut out = lat.zeros();
        for l in 0..3 {
            out.axpy(2.0, &lat.bracket(&fab(al, l), &f.f(l, be)));
            out.axpy(2.0, &lat.bracket(&a[l], &lat.d(&comps[k], l)));
            out.axpy(1.0, &lat.bracket(&a[l], &lat.bracket(&a[l], &comps[k])));
        }
        out
    })
}

/// `F^bil(s)` as the Duhamel integral of the curvature source, by composite Gauss quadrature.
pub fn f_bilinear_duhamel(
    lat: &Lattice,
    origin: &CauchyState,
    s: f64,
    panels: usize,
    policy: FlowPolicy,
) -> Result<CurvatureSix> {
    if !(s > 0.0) || panels == 0 {
        return invalid("Duhamel quadrature needs s > 0 and at least one panel");
    }
    let nodes = composite_gauss(0.0, s, 8, panels);
    let targets: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let states = flow_to(lat, &FlowState::from_cauchy(origin), &targets, policy)?;
    let mut out: CurvatureSix = std::array::from_fn(|_| lat.zeros());
    for ((sn, wn), x) in nodes.iter().zip(&states) {
        let src = curvature_source(lat, x);
        for k in 0..6 {
            let h = crate::spectral::ops::heat_propagate(lat.sp(), &src[k], s - sn)?;
            out[k].axpy(*wn, &h);
        }
    }
    Ok(out)
}

/// Leading quadratic part of the tension field, `W2_COEFF · Σ_ℓ W(E_ℓ, ∂_i E_ℓ − 2∂_ℓ E_i)`.
pub fn w2_leading(lat: &Lattice, origin: &CauchyState, s: f64, mode: WMode) -> Result<VecField> {
    let e = &origin.e;
    let pairing = Pairing::lie(lat.spec());
    let de: [[AlgField; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|l| lat.d(&e[l], i)));
    let mut out = lat.vzeros();
    for i in 0..3 {
        let g: Vec<AlgField> = (0..3)
            .map(|l| {
                let mut x = de[i][l].clone();
                x.axpy(-2.0, &de[l][i]);
                x
            })
            .collect();
        let pairs: Vec<(&AlgField, &AlgField)> = (0..3).map(|l| (&e[l], &g[l])).collect();
        out[i] = bilinear_w_sum(lat.sp(), &pairing, &pairs, s, mode)?.scale(W2_COEFF);
    }
    Ok(out)
}
