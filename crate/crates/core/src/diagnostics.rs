//! Energy bookkeeping along the heat flow: `𝓔(t,s)`, the modified energy,
//! the differentiated-energy identity, invariant audits and the
//! almost-conservation sweep.

use log::warn;

use crate::dynamics::{evolve_with, CauchyState, EvolutionConfig};
use crate::error::{invalid, Result};
use crate::gauge::{cov_d, curvature, gauge_transform, gauss_residual, Connection, GroupField};
use crate::heatflow::{run_flow, slice_train, tension_train, to_caloric, FlowPolicy, FlowTrajectory};
use crate::lattice::Lattice;
use crate::quadrature::simpson_weights;
use crate::spectral::field::{AlgField, VecField};

/// Relative tolerance of the energy identity; larger node-doubling gaps are flagged.
pub const IDENTITY_TOL: f64 = 1e-3;

/// `(N² s)^{1−σ}`.
pub fn weight(n_freq: f64, sigma: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    (n_freq * n_freq * s).powf(1.0 - sigma)
}

/// `𝓔(t,s)` at every flow sample.
pub fn flow_energies(lat: &Lattice, flow: &FlowTrajectory) -> Vec<f64> {
    flow.samples.iter().map(|x| x.energy(lat)).collect()
}

/// `𝓔(t,s) = ½ Σ_{α<β} ‖F_αβ(s)‖²` at the sample `s`.
pub fn energy_at(lat: &Lattice, flow: &FlowTrajectory, s: f64) -> Result<f64> {
    match flow.samples.iter().find(|x| (x.s - s).abs() <= 1e-12 * s.abs().max(f64::MIN_POSITIVE)) {
        Some(x) => Ok(x.energy(lat)),
        None => invalid(format!("s = {s} is not a flow sample")),
    }
}

/// Parts of `𝓘𝓔(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModifiedEnergy {
    pub value: f64,
    pub sup_part: f64,
    pub integral_part: f64,
    /// Analytic contribution of `[0, s_min]`, included in `integral_part`.
    pub tail: f64,
    /// Sample at which the sup is attained.
    pub sup_s: f64,
    /// Ratio of consecutive positive samples, the resolution of the discrete sup.
    pub grid_ratio: f64,
    pub n_freq: f64,
    pub sigma: f64,
}

fn check_weight_params(n_freq: f64, sigma: f64) -> Result<()> {
    if !(n_freq > 0.0 && n_freq.is_finite()) {
        return invalid(format!("frequency scale must be positive, got {n_freq}"));
    }
    if !(sigma < 1.0 && sigma.is_finite()) {
        return invalid(format!("σ must be below 1, got {sigma}"));
    }
    Ok(())
}

/// `∫_{t_a}^{t_b} e^{c t} t^p dt` by its power series, stable for small `c`.
fn exp_moment(c: f64, p: i32, ta: f64, tb: f64) -> f64 {
    let prim = |t: f64| {
        if t == 0.0 {
            return 0.0;
        }
        let (mut term, mut sum) = (1.0, 0.0);
        for n in 0..200 {
            let add = term * t.powi(p + 1) / (n as f64 + p as f64 + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
            term *= c * t / (n as f64 + 1.0);
        }
        sum
    };
    prim(tb) - prim(ta)
}

/// `∫ e^{c t} q(t) dt` over `[t_a, t_b]` for the quadratic `q` through `(0,e0), (t1,e1), (t2,e2)`.
fn quadratic_panel(c: f64, t: [f64; 3], e: [f64; 3], ta: f64, tb: f64) -> f64 {
    let d1 = (e[1] - e[0]) / t[1];
    let d2 = ((e[2] - e[1]) / (t[2] - t[1]) - d1) / t[2];
    let m0 = exp_moment(c, 0, ta, tb);
    let m1 = exp_moment(c, 1, ta, tb);
    let m2 = exp_moment(c, 2, ta, tb);
    e[0] * m0 + d1 * m1 + d2 * (m2 - t[1] * m1)
}

/// `𝓘𝓔` from sampled energies on `{0} ∪ (geometric grid ending at N^{-2})`.
///
/// The weight is integrated exactly with `𝓔` piecewise quadratic in `log s`;
/// below the first positive sample `𝓔` is frozen at `𝓔(t,0)`.
pub fn modified_energy_from(s: &[f64], energies: &[f64], n_freq: f64, sigma: f64) -> Result<ModifiedEnergy> {
    check_weight_params(n_freq, sigma)?;
    if s.len() != energies.len() || s.len() < 4 || s[0] != 0.0 {
        return invalid("modified energy needs s = 0 and at least three positive samples");
    }
    let s0 = 1.0 / (n_freq * n_freq);
    let last = *s.last().unwrap();
    if (last - s0).abs() > 1e-12 * s0 {
        return invalid(format!("flow ends at s = {last}, expected N^-2 = {s0}"));
    }
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("s-grid must be increasing");
    }
    if energies.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return invalid("energies must be finite and non-negative");
    }
    let c = 1.0 - sigma;
    let (mut sup_part, mut sup_s) = (0.0, 0.0);
    for (&si, &ei) in s.iter().zip(energies) {
        let v = weight(n_freq, sigma, si) * ei;
        if v > sup_part {
            sup_part = v;
            sup_s = si;
        }
    }
    let tail = energies[0] * weight(n_freq, sigma, s[1]) / c;
    let mut integral = tail;
    let u: Vec<f64> = s.iter().map(|x| x.ln()).collect();
    let panel = |k: usize, ta: f64, tb: f64| {
        let t = [0.0, u[k + 1] - u[k], u[k + 2] - u[k]];
        let e = [energies[k], energies[k + 1], energies[k + 2]];
        weight(n_freq, sigma, s[k]) * quadratic_panel(c, t, e, ta, tb)
    };
    let mut k = 1;
    while k + 2 < s.len() {
        integral += panel(k, 0.0, u[k + 2] - u[k]);
        k += 2;
    }
    if k + 1 < s.len() {
        integral += panel(k - 1, u[k] - u[k - 1], u[k + 1] - u[k - 1]);
    }
    Ok(ModifiedEnergy {
        value: sup_part + integral,
        sup_part,
        integral_part: integral,
        tail,
        sup_s,
        grid_ratio: s[2] / s[1],
        n_freq,
        sigma,
    })
}

/// `𝓘𝓔(t) = sup (N²s)^{1−σ} 𝓔(t,s) + ∫₀^{s₀} (N²s)^{1−σ} 𝓔(t,s) ds/s` with `s₀ = N^{-2}`.
pub fn modified_energy(lat: &Lattice, flow: &FlowTrajectory, n_freq: f64, sigma: f64) -> Result<ModifiedEnergy> {
    modified_energy_from(&flow.s_grid(), &flow_energies(lat, flow), n_freq, sigma)
}

/// Energy bookkeeping at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReport {
    pub t: f64,
    pub s: Vec<f64>,
    pub energies: Vec<f64>,
    pub modified: ModifiedEnergy,
    /// Named residuals, each relative to its field scale.
    pub residuals: Vec<(String, f64)>,
}

/// Energies, `𝓘𝓔` and the constraint and identity residuals of a flow.
pub fn energy_report(lat: &Lattice, flow: &FlowTrajectory, n_freq: f64, sigma: f64) -> Result<EnergyReport> {
    let energies = flow_energies(lat, flow);
    let modified = modified_energy_from(&flow.s_grid(), &energies, n_freq, sigma)?;
    let o = &flow.origin;
    let (_, gauss) = gauss_residual(lat, &o.a, &o.e);
    let e_norm = lat.vl2_sq(&o.e).sqrt();
    let audit = invariant_audit(lat, &o.a, &o.e[0], &o.e[1]);
    let residuals = vec![
        ("gauss".to_string(), if e_norm > 0.0 { gauss / e_norm } else { gauss }),
        ("bianchi".to_string(), audit.bianchi),
        ("commutator".to_string(), audit.commutator),
        ("leibniz".to_string(), audit.leibniz),
        ("transport".to_string(), flow.transport.max_correction),
    ];
    Ok(EnergyReport {
        t: o.t,
        s: flow.s_grid(),
        energies,
        modified,
        residuals,
    })
}

// ---------------------------------------------------------------------------
// energy identity

/// `𝓔(t₁,s) − 𝓔(t₀,s)` against `Σ_ℓ ∫∫ (w_ℓ, F_0ℓ)(s) dx dt`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityCheck {
    pub t0: f64,
    pub t1: f64,
    pub s: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub abs: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs|)`.
    pub rel: f64,
    /// Relative change of the Simpson sum when every other node is dropped.
    pub doubling_gap: f64,
    pub under_resolved: bool,
    pub nodes: usize,
    pub max_stencil_error: f64,
}

/// Checks the energy identity on `[t₀, t₀ + span]` with `t₀ = start.t + 2δ`.
///
/// Simpson nodes sit on every slice of one evolution with spacing `δ`, so the
/// quadrature, the stencil and the time step are refined together.
pub fn energy_identity_check(
    lat: &Lattice,
    start: &CauchyState,
    span: f64,
    dt: f64,
    delta: f64,
    s: f64,
    policy: FlowPolicy,
) -> Result<IdentityCheck> {
    let m = identity_nodes(span, delta)?;
    let slices = slice_train(lat, start, dt, delta, m + 5)?;
    let tensions = tension_train(lat, &slices, delta, s, policy)?;
    let integrand: Vec<f64> = tensions.iter().map(|t| lat.vinner(&t.w, &t.center.b)).collect();
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

/// Checks the span `4k·δ` and returns `k·4`.
pub(crate) fn identity_nodes(span: f64, delta: f64) -> Result<usize> {
    let m = (span / delta).round();
    if m < 4.0 || (m * delta - span).abs() > 1e-9 * span || m as usize % 4 != 0 {
        return invalid(format!("span {span} must be 4k stencil spacings of {delta}"));
    }
    Ok(m as usize)
}

/// Simpson sums of the integrand on `m + 1` nodes and on every other node.
pub(crate) fn identity_from_nodes(
    t: [f64; 2],
    s: f64,
    lhs: f64,
    integrand: &[f64],
    delta: f64,
    max_stencil_error: f64,
) -> IdentityCheck {
    let m = integrand.len() - 1;
    let fine = simpson_weights(m + 1, delta).expect("m is even");
    let coarse = simpson_weights(m / 2 + 1, 2.0 * delta).expect("m/2 is even");
    let rhs: f64 = fine.iter().zip(integrand).map(|(w, f)| w * f).sum();
    let rhs_half: f64 = coarse.iter().zip(integrand.iter().step_by(2)).map(|(w, f)| w * f).sum();
    let scale = lhs.abs() + rhs.abs();
    let rel_of = |x: f64| if scale > 0.0 { x / scale } else { x };
    let doubling_gap = rel_of((rhs - rhs_half).abs());
    let under_resolved = doubling_gap > IDENTITY_TOL;
    if under_resolved {
        warn!("energy identity: node-doubling gap {doubling_gap:.3e} exceeds {IDENTITY_TOL:.0e}");
    }
    IdentityCheck {
        t0: t[0],
        t1: t[1],
        s,
        lhs,
        rhs,
        abs: (lhs - rhs).abs(),
        rel: rel_of((lhs - rhs).abs()),
        doubling_gap,
        under_resolved,
        nodes: m + 1,
        max_stencil_error,
    }
}

// ---------------------------------------------------------------------------
// off-shell identities

/// Relative residuals of the Bianchi, commutator and Leibniz identities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvariantAudit {
    pub bianchi: f64,
    pub commutator: f64,
    pub leibniz: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// `D_1F_23 + D_2F_31 + D_3F_12`, `[D_i, D_j]B − [F_ij, B]` and
/// `∂_i(B,C) − (D_iB,C) − (B,D_iC)` for the connection `a`.
pub fn invariant_audit(lat: &Lattice, a: &VecField, b: &AlgField, c: &AlgField) -> InvariantAudit {
    let f = curvature(lat, a, None);
    let terms = [cov_d(lat, a, &f.f(1, 2), 0), cov_d(lat, a, &f.f(2, 0), 1), cov_d(lat, a, &f.f(0, 1), 2)];
    let mut bianchi = terms[0].clone();
    bianchi.axpy(1.0, &terms[1]);
    bianchi.axpy(1.0, &terms[2]);
    let bianchi = ratio(
        lat.l2_sq(&bianchi).sqrt(),
        terms.iter().map(|t| lat.l2_sq(t).sqrt()).sum(),
    );

    let db: Vec<AlgField> = (0..3).map(|i| cov_d(lat, a, b, i)).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let dij = cov_d(lat, a, &db[j], i);
        let dji = cov_d(lat, a, &db[i], j);
        let fb = lat.bracket(&f.f(i, j), b);
        num += lat.l2_sq(&dij.sub(&dji).sub(&fb));
        den += lat.l2_sq(&dij) + lat.l2_sq(&dji) + lat.l2_sq(&fb);
    }
    let commutator = ratio(num.sqrt(), den.sqrt());

    let spec = lat.spec();
    let scalar = |v: Vec<f64>| lat.band(&AlgField::from_comps(vec![v]));
    let bc = scalar(b.inner_density(c, spec));
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..3 {
        let lhs = lat.d(&bc, i);
        let dc = cov_d(lat, a, c, i);
        let rhs: Vec<f64> = db[i]
            .inner_density(c, spec)
            .iter()
            .zip(b.inner_density(&dc, spec))
            .map(|(x, y)| x + y)
            .collect();
        let rhs = scalar(rhs);
        num += lat.l2_sq(&lhs.sub(&rhs));
        den += lat.l2_sq(&lhs) + lat.l2_sq(&rhs);
    }
    InvariantAudit {
        bianchi,
        commutator,
        leibniz: ratio(num.sqrt(), den.sqrt()),
    }
}

// ---------------------------------------------------------------------------
// gauge invariance

/// Largest relative changes of the energy, `𝓔(t,s)` and `𝓘𝓔` over a set of gauges.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeAudit {
    pub energy: f64,
    pub flow_energy: f64,
    pub modified: f64,
    pub mc_residual: f64,
}

/// Compares energies of the caloric samples with those of their gauge transforms.
///
/// The caloric flow commutes with `s`-independent gauge transformations, so the
/// transformed caloric samples are the caloric flow of the transformed data.
pub fn gauge_audit(
    lat: &Lattice,
    flow: &FlowTrajectory,
    gauges: &[GroupField],
    n_freq: f64,
    sigma: f64,
) -> Result<GaugeAudit> {
    let cal = to_caloric(lat, flow, &flow.transport)?;
    let s: Vec<f64> = cal.iter().map(|c| c.s).collect();
    let base: Vec<f64> = cal.iter().map(|c| curvature(lat, &c.a, Some(&c.b)).energy(lat)).collect();
    let base_mod = modified_energy_from(&s, &base, n_freq, sigma)?.value;
    let o = &flow.origin;
    let e0 = curvature(lat, &o.a, Some(&o.e)).energy(lat);
    let mut out = GaugeAudit {
        energy: 0.0,
        flow_energy: 0.0,
        modified: 0.0,
        mc_residual: 0.0,
    };
    let rel = |x: f64, y: f64| if y > 0.0 { (x - y).abs() / y } else { (x - y).abs() };
    for u in gauges {
        let t = gauge_transform(lat, &Connection::spatial(o.a.clone()), Some(&o.e), u);
        out.energy = out.energy.max(rel(curvature(lat, &t.conn.a, t.e.as_ref()).energy(lat), e0));
        out.mc_residual = out.mc_residual.max(t.mc_residual);
        let mut energies = Vec::with_capacity(cal.len());
        for (c, eb) in cal.iter().zip(&base) {
            let t = gauge_transform(lat, &Connection::spatial(c.a.clone()), Some(&c.b), u);
            let e = curvature(lat, &t.conn.a, t.e.as_ref()).energy(lat);
            out.flow_energy = out.flow_energy.max(rel(e, *eb));
            out.mc_residual = out.mc_residual.max(t.mc_residual);
            energies.push(e);
        }
        out.modified = out.modified.max(rel(modified_energy_from(&s, &energies, n_freq, sigma)?.value, base_mod));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gagliardo-Nirenberg probe

/// Ratios `lhs / rhs` of the covariant Gagliardo-Nirenberg and Sobolev inequalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnRatios {
    /// `‖φ‖_{L⁴} / (‖φ‖^{1/4} ‖Dφ‖^{3/4})`.
    pub l4: f64,
    /// `‖φ‖_{L³} / (‖φ‖^{1/2} ‖Dφ‖^{1/2})`.
    pub l3: f64,
    /// `‖φ‖_{L⁶} / ‖Dφ‖`.
    pub l6: f64,
    /// `‖φ‖_{L^∞} / (‖Dφ‖^{1/2} ‖D²φ‖^{1/2})`.
    pub linf: f64,
}

impl GnRatios {
    pub fn max(&self) -> f64 {
        self.l4.max(self.l3).max(self.l6).max(self.linf)
    }
}

/// Evaluates the four ratios for `φ` and the connection `a`.
pub fn gn_inequality_probe(lat: &Lattice, phi: &AlgField, a: &VecField) -> GnRatios {
    let dv = lat.grid().cell_volume();
    let abs: Vec<f64> = phi.inner_density(phi, lat.spec()).iter().map(|x| x.max(0.0).sqrt()).collect();
    let lp = |p: f64| (abs.iter().map(|x| x.powf(p)).sum::<f64>() * dv).powf(1.0 / p);
    let l2 = lat.l2_sq(phi).sqrt();
    let d: Vec<AlgField> = (0..3).map(|i| cov_d(lat, a, phi, i)).collect();
    let d1 = d.iter().map(|x| lat.l2_sq(x)).sum::<f64>().sqrt();
    let d2 = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| lat.l2_sq(&cov_d(lat, a, &d[j], i)))
        .sum::<f64>()
        .sqrt();
    let linf = abs.iter().fold(0.0f64, |m, x| m.max(*x));
    GnRatios {
        l4: ratio(lp(4.0), l2.powf(0.25) * d1.powf(0.75)),
        l3: ratio(lp(3.0), (l2 * d1).sqrt()),
        l6: ratio(lp(6.0), d1),
        linf: ratio(linf, (d1 * d2).sqrt()),
    }
}

// ---------------------------------------------------------------------------
// almost conservation

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub n_freqs: Vec<f64>,
    pub sigma: f64,
    pub t_end: f64,
    pub dt: f64,
    /// Number of equal time intervals at whose ends `𝓘𝓔` is evaluated.
    pub t_intervals: usize,
    /// Geometric growth of the flow step.
    pub growth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n_freq: f64,
    /// `(t, 𝓘𝓔(t))`.
    pub series: Vec<(f64, f64)>,
    /// `max_t |𝓘𝓔(t) − 𝓘𝓔(0)|`.
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log drift` against `log N`.
    pub slope: Option<f64>,
    /// Drift is non-increasing along the listed frequencies.
    pub monotone: bool,
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Evolves `data` once and tracks `𝓘𝓔(t)` for every frequency scale `N`.
pub fn almost_conservation_sweep(lat: &Lattice, data: &CauchyState, cfg: &SweepConfig) -> Result<SweepTable> {
    check_weight_params(1.0, cfg.sigma)?;
    if cfg.n_freqs.is_empty() || cfg.n_freqs.iter().any(|n| !(*n > 0.0)) || cfg.t_intervals == 0 {
        return invalid("sweep needs positive frequencies and at least one time interval");
    }
    let mut ev = EvolutionConfig::new(cfg.dt, cfg.t_end);
    ev.monitor_every = usize::MAX;
    let (steps, _) = ev.schedule();
    if steps % cfg.t_intervals != 0 {
        return invalid(format!("{steps} steps do not split into {} intervals", cfg.t_intervals));
    }
    let every = steps / cfg.t_intervals;
    let mut states = Vec::with_capacity(cfg.t_intervals + 1);
    evolve_with(lat, data, &ev, |k, st| {
        if k % every == 0 {
            states.push(st.clone());
        }
        Ok(())
    })?;
    let mut rows = Vec::with_capacity(cfg.n_freqs.len());
    for &n in &cfg.n_freqs {
        let s0 = 1.0 / (n * n);
        let policy = FlowPolicy {
            ds_min: s0 / crate::heatflow::FLOW_RANGE,
            growth: cfg.growth,
        };
        let mut series = Vec::with_capacity(states.len());
        for st in &states {
            let flow = run_flow(lat, st, s0, policy)?;
            series.push((st.t, modified_energy(lat, &flow, n, cfg.sigma)?.value));
        }
        let drift = series.iter().fold(0.0f64, |m, (_, v)| m.max((v - series[0].1).abs()));
        rows.push(SweepRow { n_freq: n, series, drift });
    }
    let monotone = rows.windows(2).all(|w| w[1].drift <= w[0].drift);
    let slope = log_log_slope(
        &rows.iter().map(|r| r.n_freq).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.drift).collect::<Vec<_>>(),
    );
    Ok(SweepTable { rows, slope, monotone })
}
