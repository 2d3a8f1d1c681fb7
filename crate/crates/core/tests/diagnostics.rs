mod common;

use common::*;
use std::f64::consts::PI;
use ymlab::algebra::StructureSpec;
use ymlab::diagnostics::*;
use ymlab::dynamics::{energy, CauchyState};
use ymlab::gauge::random_gauge;
use ymlab::heatflow::*;
use ymlab::spectral::field::AlgField;

const VOL: f64 = 8.0 * PI * PI * PI;

fn wave_energy(amp: f64) -> f64 {
    // ½‖E‖² + ½‖curl A‖² for the plane wave, |k|² = 5
    amp * amp * 5.0 * VOL / 2.0
}

/// `γ(c, x)` by its power series.
fn lower_gamma(c: f64, x: f64) -> f64 {
    let (mut term, mut sum) = (1.0 / c, 1.0 / c);
    for n in 1..200 {
        term *= x / (c + n as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    x.powf(c) * (-x).exp() * sum
}

#[test]
fn weight_is_one_at_the_flow_horizon() {
    for n in [2.0, 4.0, 8.0, 16.0, 32.0, 64.0] {
        for sigma in [0.55, 0.75, 0.9] {
            assert_eq!(weight(n, sigma, 1.0 / (n * n)), 1.0);
        }
    }
    assert_eq!(weight(8.0, 0.7, 0.0), 0.0);
}

#[test]
fn abelian_energies_decay_mode_by_mode() {
    let lat = lattice(16, StructureSpec::u1());
    let amp = 0.3;
    let st = plane_wave(&lat, amp, 0.0);
    let flow = run_flow(&lat, &st, 0.1, FlowPolicy::for_horizon(0.1)).unwrap();
    let e0 = wave_energy(amp);
    assert!((energy_at(&lat, &flow, 0.0).unwrap() - energy(&lat, &st)).abs() < 1e-12 * e0);
    for (s, e) in flow.s_grid().iter().zip(flow_energies(&lat, &flow)) {
        let expect = e0 * (-10.0 * s).exp();
        assert!((e - expect).abs() < 1e-10 * e0, "s={s}: {e} vs {expect}");
    }
    assert!(energy_at(&lat, &flow, 0.0123).is_err());
}

#[test]
fn zero_flow_has_zero_modified_energy() {
    let lat = lattice(8, StructureSpec::su2());
    let st = CauchyState::new(0.0, lat.vzeros(), lat.vzeros());
    let flow = run_flow(&lat, &st, 1.0 / 16.0, FlowPolicy::for_horizon(1.0 / 16.0)).unwrap();
    let me = modified_energy(&lat, &flow, 4.0, 0.8).unwrap();
    assert_eq!(me.value, 0.0);
    assert!(flow_energies(&lat, &flow).iter().all(|e| *e == 0.0));
}

#[test]
fn modified_energy_matches_the_single_mode_integral() {
    let lat = lattice(16, StructureSpec::u1());
    let amp = 0.2;
    let st = plane_wave(&lat, amp, 0.0);
    let e0 = wave_energy(amp);
    let k2 = 5.0f64;
    for n_freq in [4.0f64, 8.0] {
        let s0 = 1.0 / (n_freq * n_freq);
        let flow = run_flow(&lat, &st, s0, FlowPolicy::for_horizon(s0)).unwrap();
        for sigma in [0.6, 0.75, 0.9] {
            let me = modified_energy(&lat, &flow, n_freq, sigma).unwrap();
            let c = 1.0 - sigma;
            let exact = e0 * n_freq.powf(2.0 * c) * (2.0 * k2).powf(-c) * lower_gamma(c, 2.0 * k2 * s0);
            let rel = (me.integral_part - exact).abs() / exact;
            assert!(rel < 1e-4, "N={n_freq} σ={sigma}: {} vs {exact} ({rel:e})", me.integral_part);
            let sup = flow
                .s_grid()
                .iter()
                .map(|s| weight(n_freq, sigma, *s) * e0 * (-2.0 * k2 * s).exp())
                .fold(0.0, f64::max);
            assert!((me.sup_part - sup).abs() < 1e-10 * sup);
            assert!((me.value - me.sup_part - me.integral_part).abs() < 1e-14 * me.value);
            let s1 = flow.s_grid()[1];
            let head = e0 * n_freq.powf(2.0 * c) * (2.0 * k2).powf(-c) * lower_gamma(c, 2.0 * k2 * s1);
            assert!((me.tail - head).abs() < 1e-3 * head);
            assert!((me.grid_ratio - 1024f64.powf(1.0 / 31.0)).abs() < 1e-12);
        }
    }
}

#[test]
fn modified_energy_is_quadratic() {
    let lat = lattice(16, StructureSpec::u1());
    let s0 = 1.0 / 16.0;
    let base = repaired_state(&lat, 3, 0.5, 4);
    let flow = run_flow(&lat, &base, s0, FlowPolicy::for_horizon(s0)).unwrap();
    let me = modified_energy(&lat, &flow, 4.0, 0.7).unwrap();
    let s = flow.s_grid();
    let energies = flow_energies(&lat, &flow);
    for a in [0.5, 3.0] {
        let scaled: Vec<f64> = energies.iter().map(|e| a * a * e).collect();
        let v = modified_energy_from(&s, &scaled, 4.0, 0.7).unwrap().value;
        assert!((v - a * a * me.value).abs() < 1e-14 * v);
    }
    let st = CauchyState::new(0.0, base.a.map(|f| f.scale(2.0)), base.e.map(|f| f.scale(2.0)));
    let flow2 = run_flow(&lat, &st, s0, FlowPolicy::for_horizon(s0)).unwrap();
    let v = modified_energy(&lat, &flow2, 4.0, 0.7).unwrap().value;
    assert!((v - 4.0 * me.value).abs() < 1e-12 * v);
}

#[test]
fn modified_energy_rejects_bad_parameters() {
    let s = sample_grid(1.0 / 16.0);
    let e = vec![1.0; s.len()];
    assert!(modified_energy_from(&s, &e, 4.0, 1.0).is_err());
    assert!(modified_energy_from(&s, &e, 4.0, 1.2).is_err());
    assert!(modified_energy_from(&s, &e, 8.0, 0.7).is_err());
    assert!(modified_energy_from(&s, &e[1..], 4.0, 0.7).is_err());
    assert!(modified_energy_from(&s[1..], &e[1..], 4.0, 0.7).is_err());
    let mut bad = e.clone();
    bad[3] = f64::NAN;
    assert!(modified_energy_from(&s, &bad, 4.0, 0.7).is_err());
    let v = modified_energy_from(&s, &e, 4.0, 0.7).unwrap();
    // constant energy: sup at s₀ is 1 and the integral is 1/(1−σ)
    assert!((v.sup_part - 1.0).abs() < 1e-15);
    assert!((v.integral_part - 1.0 / 0.3).abs() < 1e-12);
}

#[test]
fn invariant_audit_residuals() {
    let lat = lattice(16, StructureSpec::su2());
    let z = lat.vzeros();
    let a0 = invariant_audit(&lat, &z, &lat.zeros(), &lat.zeros());
    assert_eq!((a0.bianchi, a0.commutator, a0.leibniz), (0.0, 0.0, 0.0));

    let u1 = lattice(16, StructureSpec::u1());
    let a = random_form(&u1, 21, 1.0, 5);
    let b = random_form(&u1, 22, 1.0, 5);
    assert!(invariant_audit(&u1, &a, &b[0], &b[1]).bianchi < 1e-11);

    // cubic products stay in the band for modes ≤ n/9
    for seed in 0..3 {
        let a = random_form(&lat, 30 + seed, 1.0, 1);
        let b = random_form(&lat, 40 + seed, 1.0, 1);
        let r = invariant_audit(&lat, &a, &b[0], &b[2]);
        assert!(r.bianchi < 1e-9 && r.commutator < 1e-9 && r.leibniz < 1e-9, "{r:?}");
    }
}

fn cos_field(lat: &Lattice) -> AlgField {
    AlgField::along(lat.dim(), 0, lat.grid().sample(|x| x[0].cos()))
}

use ymlab::lattice::Lattice;

#[test]
fn gn_ratios_single_mode() {
    let lat = lattice(16, StructureSpec::su2());
    let phi = cos_field(&lat);
    let r = gn_inequality_probe(&lat, &phi, &lat.vzeros());
    let area = 4.0 * PI * PI;
    let l2 = (area * PI).sqrt();
    let l4 = (area * 0.75 * PI).powf(0.25);
    let l6 = (area * 0.625 * PI).powf(1.0 / 6.0);
    assert!((r.l4 - l4 / l2).abs() < 1e-12);
    assert!((r.l6 - l6 / l2).abs() < 1e-12);
    assert!((r.linf - 1.0 / l2).abs() < 1e-12);
    let l3 = (area * 8.0 / 3.0).powf(1.0 / 3.0);
    assert!((r.l3 - l3 / l2).abs() < 1e-3);
}

#[test]
fn gn_ratios_are_scale_free_and_bounded() {
    let lat = lattice(16, StructureSpec::su2());
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let phi = random_form(&lat, 500 + seed, 1.0, 5)[0].clone();
        let a = random_form(&lat, 700 + seed, 0.5, 3);
        let r = gn_inequality_probe(&lat, &phi, &a);
        worst = worst.max(r.max());
        if seed < 3 {
            let r2 = gn_inequality_probe(&lat, &phi.scale(7.0), &a);
            assert!((r2.max() - r.max()).abs() < 1e-12 * r.max());
        }
    }
    assert!(worst.is_finite() && worst < 10.0, "worst ratio {worst}");
}

#[test]
fn modified_energy_is_gauge_invariant() {
    let lat = lattice(16, StructureSpec::su2());
    let st = repaired_state(&lat, 8, 0.5, 2);
    let n_freq = 4.0;
    let s0 = 1.0 / 16.0;
    let flow = run_flow(&lat, &st, s0, FlowPolicy::for_horizon(s0)).unwrap();
    let gauges: Vec<_> = (0..3).map(|k| random_gauge(&lat, 60 + k, 0.5, 0.0, 1)).collect();
    let r = gauge_audit(&lat, &flow, &gauges, n_freq, 0.7).unwrap();
    assert!(r.energy < 1e-8 && r.flow_energy < 1e-8 && r.modified < 1e-8, "{r:?}");
}

#[test]
fn energy_identity_on_abelian_and_on_shell_data() {
    let lat = lattice(16, StructureSpec::u1());
    let st = plane_wave(&lat, 0.3, 0.0);
    let pol = FlowPolicy::for_horizon(0.02);
    let r = energy_identity_check(&lat, &st, 0.1, 0.005, 0.025, 0.02, pol).unwrap();
    assert!(r.lhs.abs() < 1e-10 && r.rhs.abs() < 1e-10, "{r:?}");

    let su2 = lattice(8, StructureSpec::su2());
    let st = repaired_state(&su2, 5, 1.0, 2);
    let r = energy_identity_check(&su2, &st, 0.04, 0.002, 0.01, 0.0, pol).unwrap();
    let e = energy(&su2, &st);
    assert!(r.lhs.abs() < 1e-8 * e && r.rhs.abs() < 1e-8 * e, "{r:?} {e}");
}

#[test]
fn energy_identity_converges_under_refinement() {
    let lat = lattice(16, StructureSpec::su2());
    let st = repaired_state(&lat, 5, 1.0, 2);
    let s = 1.0 / 64.0;
    let pol = FlowPolicy {
        ds_min: s / 256.0,
        growth: 0.25,
    };
    let coarse = energy_identity_check(&lat, &st, 0.1, 0.005, 0.025, s, pol).unwrap();
    let fine = energy_identity_check(&lat, &st, 0.1, 0.0025, 0.0125, s, pol).unwrap();
    assert!(fine.rel < 1e-3, "{fine:?}");
    assert!(coarse.abs > 2.0 * fine.abs, "{coarse:?} {fine:?}");
    assert!(!fine.under_resolved);
    assert!(energy_identity_check(&lat, &st, 0.1, 0.005, 0.03, s, pol).is_err());
}

#[test]
fn abelian_sweep_is_conserved() {
    let lat = lattice(8, StructureSpec::u1());
    let st = plane_wave(&lat, 0.3, 0.0);
    let cfg = SweepConfig {
        n_freqs: vec![2.0, 4.0],
        sigma: 0.7,
        t_end: 0.2,
        dt: 0.01,
        t_intervals: 4,
        growth: 0.25,
    };
    let table = almost_conservation_sweep(&lat, &st, &cfg).unwrap();
    assert_eq!(table.rows.len(), 2);
    for row in &table.rows {
        assert_eq!(row.series.len(), 5);
        assert!(row.drift < 1e-8 * row.series[0].1, "{row:?}");
    }
}

#[test]
fn log_log_slope_of_a_power_law() {
    let x = [4.0, 8.0, 16.0, 32.0];
    let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
    assert!((log_log_slope(&x, &y).unwrap() + 0.5).abs() < 1e-12);
    assert!(log_log_slope(&x[..1], &y[..1]).is_none());
}
