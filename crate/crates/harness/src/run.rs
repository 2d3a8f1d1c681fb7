//! Experiment orchestration.

use std::path::Path;

use ymlab::algebra::structure_audit;
use ymlab::diagnostics::{
    almost_conservation_sweep, energy_identity_check, invariant_audit, modified_energy, weight, SweepConfig,
};
use ymlab::dynamics::{evolve_with, monitor, step_rk4, CauchyState, EvolutionConfig};
use ymlab::gauge::curvature;
use ymlab::heatflow::{run_flow, slice_train, tension_train, w2_leading, FlowPolicy};
use ymlab::lattice::Lattice;
use ymlab::mkg::{charge, constraint_residual, mkg_energy, mkg_evolve_with, MkgState};
use ymlab::spectral::bilinear::WMode;
use ymlab::spectral::field::VecField;
use ymlab::spectral::ops::{heat_propagate_vec, leray_df};

use crate::checkpoint::FieldCheckpoint;
use crate::config::{ExperimentConfig, Family, Group, Kind};
use crate::data::{lattice, make_mkg, make_ym, plane_wave};
use crate::error::HarnessError;
use crate::output::{col, write_artifacts, Comparison, Measurement, Summary, Table};

/// Samples of the structure audit.
pub const AUDIT_SAMPLES: usize = 1000;
/// Floor, relative to `‖E(0)‖`, for the initial Gauss residual in growth ratios.
pub const GAUSS_FLOOR: f64 = 1e-14;
const IDENTITY_NODES: f64 = 8.0;

/// Outcome of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub summary: Summary,
    pub checkpoints: Vec<(String, FieldCheckpoint)>,
}

/// Runs the configured experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let kind = cfg.kind()?;
    if kind == Kind::Mkg && cfg.physics.group != Group::U1 {
        return Err(HarnessError::Config(vec!["the mkg experiment needs physics.group = \"u1\"".into()]));
    }
    let lat = lattice(cfg)?;
    match kind {
        Kind::Evolve => evolve(cfg, &lat),
        Kind::Heatflow => heatflow(cfg, &lat),
        Kind::Tension => tension(cfg, &lat),
        Kind::AclSweep => acl_sweep(cfg, &lat),
        Kind::Mkg => mkg(cfg, &lat),
        Kind::Invariants => invariants(cfg, &lat),
    }
}

/// Runs the experiment and writes every artifact into the output directory.
pub fn run(cfg: &ExperimentConfig) -> Result<Summary, HarnessError> {
    let out = execute(cfg)?;
    let dir = Path::new(&cfg.output.dir);
    write_artifacts(dir, &out.table, &out.summary)?;
    if cfg.output.checkpoint {
        for (name, ck) in &out.checkpoints {
            ck.write(&dir.join(name))?;
        }
    }
    Ok(out.summary)
}

fn policy(cfg: &ExperimentConfig) -> FlowPolicy {
    FlowPolicy {
        ds_min: cfg.ds_min(),
        growth: cfg.integrator.growth,
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

fn vnorm(lat: &Lattice, v: &VecField) -> f64 {
    lat.vl2_sq(v).sqrt()
}

fn vdist(lat: &Lattice, a: &VecField, b: &VecField) -> f64 {
    let d: VecField = std::array::from_fn(|i| a[i].sub(&b[i]));
    vnorm(lat, &d)
}

fn evolve(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_ym(cfg, lat)?;
    let exact = cfg.data.family == Family::PlaneWave;
    let mut table = Table::new(vec![
        col("step", "time step index"),
        col("t", "time"),
        col("energy", "energy ½‖E‖² + ½‖F_ij‖²"),
        col("energy_drift", "|energy(t) − energy(0)| / energy(0)"),
        col("gauss", "L² norm of the Gauss residual D^ℓ E_ℓ"),
        col("a_h_half", "homogeneous H^{1/2} norm of A"),
        col("e_l2", "L² norm of E"),
        col("exact_error", "L² distance of (A, E) to the exact plane wave, 0 for other data"),
    ]);
    let ev = EvolutionConfig::new(cfg.integrator.dt, cfg.integrator.t_end);
    let m0 = monitor(lat, &data);
    let amp = cfg.data.amplitude;
    let last = evolve_with(lat, &data, &ev, |step, st| {
        let m = monitor(lat, st);
        let err = if exact {
            let w = plane_wave(lat, amp, st.t);
            (lat.vl2_sq(&diff(&st.a, &w.a)) + lat.vl2_sq(&diff(&st.e, &w.e))).sqrt()
        } else {
            0.0
        };
        table.push(vec![
            step as f64,
            m.t,
            m.energy,
            rel((m.energy - m0.energy).abs(), m0.energy),
            m.gauss,
            m.a_h_half,
            m.e_l2,
            err,
        ]);
        Ok(())
    })?;
    let drift = table.column("energy_drift").unwrap().into_iter().fold(0.0, f64::max);
    let gauss = table.column("gauss").unwrap();
    let g_max = gauss.iter().copied().fold(0.0, f64::max);
    let g_ref = m0.gauss.max(GAUSS_FLOOR * m0.e_l2);
    let mut ms = vec![
        Measurement::check("hyperbolic-evolution/energy-drift", 6, drift, Comparison::Below, 1e-7),
        Measurement::check("hyperbolic-evolution/gauss-growth", 6, rel(g_max, g_ref), Comparison::AtMost, 10.0),
    ];
    if exact {
        let e = table.column("exact_error").unwrap().into_iter().fold(0.0, f64::max);
        ms.push(Measurement::report("hyperbolic-evolution/plane-wave-error", 6, e));
    }
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: vec![("final.ckpt".into(), FieldCheckpoint::from_cauchy(lat, &last))],
    })
}

fn diff(a: &VecField, b: &VecField) -> VecField {
    std::array::from_fn(|i| a[i].sub(&b[i]))
}

fn heatflow(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_ym(cfg, lat)?;
    let s0 = cfg.s0();
    let flow = run_flow(lat, &data, s0, policy(cfg))?;
    let (n_freq, sigma) = (cfg.physics.n_freq, cfg.physics.sigma);
    let abelian = lat.spec().is_abelian() || cfg.data.family == Family::PlaneWave;
    let mut table = Table::new(vec![
        col("s", "flow time"),
        col("energy", "flowed energy 𝓔(s) = ½ Σ_{α<β} ‖F_αβ(s)‖²"),
        col("magnetic_energy", "½ Σ_{i<j} ‖F_ij(s)‖²"),
        col("weight", "(N² s)^{1−σ}"),
        col("weighted_energy", "(N² s)^{1−σ} 𝓔(s)"),
        col("heat_error", "L² distance of A(s) to e^{sΔ}A(0) for abelian data, 0 otherwise"),
    ]);
    let mut heat_err = 0.0f64;
    for x in &flow.samples {
        let e = x.energy(lat);
        let w = weight(n_freq, sigma, x.s);
        let herr = if abelian {
            vdist(lat, &x.a, &heat_propagate_vec(lat.sp(), &data.a, x.s)?)
        } else {
            0.0
        };
        heat_err = heat_err.max(rel(herr, vnorm(lat, &data.a)));
        table.push(vec![x.s, e, x.magnetic_energy(lat), w, w * e, herr]);
    }
    let mag = table.column("magnetic_energy").unwrap();
    let monotone = mag.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
    let ie = modified_energy(lat, &flow, n_freq, sigma)?;
    let mut ms = vec![
        Measurement::flag("heat-flow/magnetic-monotone", 8, monotone),
        Measurement::report("almost-conservation/modified-energy", 12, ie.value),
    ];
    if abelian {
        ms.push(Measurement::check("heat-flow/abelian-heat-error", 8, heat_err, Comparison::Below, 1e-10));
    }
    let last = flow.samples.last().expect("flow has samples");
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: vec![("flow.ckpt".into(), FieldCheckpoint::from_flow(lat, data.t, last))],
    })
}

fn tension(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_ym(cfg, lat)?;
    let (dt, delta, s0) = (cfg.integrator.dt, cfg.delta(), cfg.s0());
    let slices = slice_train(lat, &data, dt, delta, 5)?;
    let centre = &slices[2];
    let f_norm = (2.0 * curvature(lat, &centre.a, Some(&centre.e)).energy(lat)).sqrt();
    let mut table = Table::new(vec![
        col("s", "flow time"),
        col("w_l2", "L² norm of the tension field w(s)"),
        col("w_ratio", "‖w(s)‖ / ‖F(0)‖"),
        col("w2_remainder", "‖P w − w⁽²⁾‖ / ‖P w‖ with the Duhamel-mode leading term"),
        col("stencil_error", "relative Richardson estimate of the time-stencil error"),
        col("b_consistency", "‖B − (∂_t A − ∇A_0 + [A_0, A])‖ / ‖B‖"),
    ]);
    let mut w0 = 0.0;
    for s in [0.0, s0 / 16.0, s0 / 4.0, s0] {
        let t = tension_train(lat, &slices, delta, s, policy(cfg))?.remove(0);
        let wl = vnorm(lat, &t.w);
        let rem = if s > 0.0 {
            let pw = leray_df(lat.sp(), &t.w);
            let w2 = w2_leading(lat, centre, s, WMode::Duhamel)?;
            rel(vdist(lat, &pw, &w2), vnorm(lat, &pw))
        } else {
            0.0
        };
        if s == 0.0 {
            w0 = rel(wl, f_norm);
        }
        table.push(vec![s, wl, rel(wl, f_norm), rem, t.stencil_error, t.b_consistency]);
    }
    let span = IDENTITY_NODES * delta;
    let id = energy_identity_check(lat, &data, span, dt, delta, s0 / 4.0, policy(cfg))?;
    let ms = vec![
        Measurement::check("tension/w0-ratio", 9, w0, Comparison::AtMost, 1e-6),
        Measurement::report("leading-tension/w2-remainder", 11, *table.column("w2_remainder").unwrap().last().unwrap()),
        Measurement::check("energy-identity/relative-residual", 10, id.rel, Comparison::Below, 1e-3),
        Measurement::report("energy-identity/doubling-gap", 10, id.doubling_gap),
    ];
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: Vec::new(),
    })
}

fn acl_sweep(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_ym(cfg, lat)?;
    let sc = SweepConfig {
        n_freqs: cfg.physics.sweep.clone(),
        sigma: cfg.physics.sigma,
        t_end: cfg.integrator.t_end,
        dt: cfg.integrator.dt,
        t_intervals: cfg.integrator.intervals,
        growth: cfg.integrator.growth,
    };
    let sweep = almost_conservation_sweep(lat, &data, &sc)?;
    let slope = sweep.slope.unwrap_or(f64::NAN);
    let mut table = Table::new(vec![
        col("n_freq", "frequency scale N"),
        col("modified_energy_0", "𝓘𝓔(0)"),
        col("drift", "max_t |𝓘𝓔(t) − 𝓘𝓔(0)|"),
        col("slope", "least-squares slope of log drift against log N"),
    ]);
    for r in &sweep.rows {
        table.push(vec![r.n_freq, r.series[0].1, r.drift, slope]);
    }
    let ms = vec![
        Measurement::flag("almost-conservation/drift-non-increasing", 12, sweep.monotone),
        Measurement::report("almost-conservation/slope", 12, slope),
    ];
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: Vec::new(),
    })
}

fn mkg(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_mkg(cfg, lat)?;
    let mut table = Table::new(vec![
        col("step", "time step index"),
        col("t", "time"),
        col("energy", "Maxwell-Klein-Gordon energy"),
        col("energy_drift", "|energy(t) − energy(0)| / energy(0)"),
        col("charge", "∫ Im(φ conj(φ_t)) dx"),
        col("charge_drift", "|charge(t) − charge(0)| / (‖φ(0)‖ ‖φ_t(0)‖)"),
        col("constraint", "L² norm of ∂^i E_i − Im(φ conj(φ_t))"),
    ]);
    let ev = EvolutionConfig::new(cfg.integrator.dt, cfg.integrator.t_end);
    let h0 = mkg_energy(lat, &data);
    let q0 = charge(lat, &data);
    let q_scale = (lat.l2_sq(&data.phi) * lat.l2_sq(&data.phi_t)).sqrt();
    let last = mkg_evolve_with(lat, &data, &ev, |step, st| {
        let h = mkg_energy(lat, st);
        let q = charge(lat, st);
        table.push(vec![
            step as f64,
            st.t,
            h,
            rel((h - h0).abs(), h0),
            q,
            rel((q - q0).abs(), q_scale),
            constraint_residual(lat, st),
        ]);
        Ok(())
    })?;
    let max_of = |name: &str| table.column(name).unwrap().into_iter().fold(0.0, f64::max);
    let mut ms = vec![
        Measurement::check("mkg/charge-drift", 13, max_of("charge_drift"), Comparison::Below, 1e-9),
        Measurement::report("mkg/energy-drift", 13, max_of("energy_drift")),
        Measurement::report("mkg/constraint", 13, max_of("constraint")),
    ];
    if data.scalar_is_zero() {
        ms.push(Measurement::flag("mkg/maxwell-reduction-bit-identical", 13, reduction_matches(lat, &data, &ev)?));
    }
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: vec![("final.ckpt".into(), FieldCheckpoint::from_mkg(lat, &last))],
    })
}

/// Steps the gauge part with the Yang-Mills integrator and compares bitwise.
fn reduction_matches(lat: &Lattice, data: &MkgState, ev: &EvolutionConfig) -> Result<bool, HarnessError> {
    let (steps, dt) = ev.schedule();
    let mut ym: CauchyState = data.gauge_part();
    let mut same = true;
    let mut k = 0;
    mkg_evolve_with(lat, data, ev, |step, st| {
        if step > 0 {
            ym = step_rk4(lat, &ym, dt)?;
            ym.t = data.t + step as f64 * dt;
        }
        same &= st.gauge_part() == ym && st.scalar_is_zero();
        k = step;
        Ok(())
    })?;
    Ok(same && k == steps)
}

fn invariants(cfg: &ExperimentConfig, lat: &Lattice) -> Result<RunOutput, HarnessError> {
    let (data, report) = make_ym(cfg, lat)?;
    let alg = structure_audit(lat.spec(), AUDIT_SAMPLES, cfg.data.seed)?;
    let geo = invariant_audit(lat, &data.a, &data.e[0], &data.e[1]);
    let gauss = rel(report.gauss_residual, vnorm(lat, &data.e));
    let mut table = Table::new(vec![
        col("jacobi", "largest Jacobi residual over the algebra samples"),
        col("ad_invariance", "largest |([x,y],z) + (y,[x,z])|"),
        col("adjoint_isometry", "largest | |Ad_U x| − |x| |"),
        col("bianchi", "relative Bianchi residual of the data connection"),
        col("commutator", "relative residual of [D_i, D_j] = [F_ij, ·]"),
        col("leibniz", "relative residual of the Leibniz rule for D_i"),
        col("gauss", "‖D^ℓ E_ℓ‖ / ‖E‖ of the data"),
    ]);
    table.push(vec![
        alg.jacobi,
        alg.ad_invariance,
        alg.adjoint_isometry,
        geo.bianchi,
        geo.commutator,
        geo.leibniz,
        gauss,
    ]);
    let ms = vec![
        Measurement::check("algebra/jacobi", 1, alg.jacobi, Comparison::Below, 1e-12),
        Measurement::check("algebra/ad-invariance", 1, alg.ad_invariance, Comparison::Below, 1e-12),
        Measurement::check("algebra/adjoint-isometry", 1, alg.adjoint_isometry, Comparison::Below, 1e-12),
        Measurement::check("off-shell-geometry/bianchi", 5, geo.bianchi, Comparison::Below, 1e-9),
        Measurement::check("off-shell-geometry/commutator", 5, geo.commutator, Comparison::Below, 1e-9),
        Measurement::report("off-shell-geometry/leibniz", 5, geo.leibniz),
        Measurement::report("hyperbolic-evolution/initial-gauss", 6, gauss),
    ];
    Ok(RunOutput {
        table,
        summary: Summary::new(cfg, report, ms),
        checkpoints: Vec::new(),
    })
}
