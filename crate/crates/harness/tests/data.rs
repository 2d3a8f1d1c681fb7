use ymlab::gauge::gauss_residual;
use ymlab::mkg::{charge, constraint_residual};
use ymlab_harness::config::{Family, Group};
use ymlab_harness::data::{lattice, make_data, make_mkg, make_ym, plane_wave, Data};
use ymlab_harness::{ExperimentConfig, Kind};

fn cfg(family: Family, group: Group) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.grid.n = 8;
    c.physics.group = group;
    c.data.family = family;
    c.data.amplitude = 0.2;
    c.resolved()
}

#[test]
fn same_seed_same_data() {
    let c = cfg(Family::Random, Group::Su2);
    let lat = lattice(&c).unwrap();
    let (a, ra) = make_ym(&c, &lat).unwrap();
    let (b, rb) = make_ym(&c, &lat).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let mut d = c.clone();
    d.data.seed = 2;
    assert_ne!(make_ym(&d, &lat).unwrap().0, a);
}

#[test]
fn random_data_has_the_requested_size_and_satisfies_gauss() {
    for group in [Group::Su2, Group::U1] {
        let c = cfg(Family::Random, group);
        let lat = lattice(&c).unwrap();
        let (s, r) = make_ym(&c, &lat).unwrap();
        assert!((r.a_h_sigma - 0.2).abs() < 0.02 * 0.2, "{r:?}");
        assert!(r.e_h_sigma_minus_one > 0.0 && r.e_h_sigma_minus_one <= 0.2 * 1.02, "{r:?}");
        let e = lat.vl2_sq(&s.e).sqrt();
        assert!(r.gauss_residual < 1e-11 * e, "{r:?}");
    }
}

#[test]
fn plane_wave_satisfies_gauss_without_repair() {
    let c = cfg(Family::PlaneWave, Group::U1);
    let lat = lattice(&c).unwrap();
    let (s, r) = make_ym(&c, &lat).unwrap();
    assert_eq!(r.repair_iterations, 0);
    assert_eq!(s, plane_wave(&lat, 0.2, 0.0));
    let e = lat.vl2_sq(&s.e).sqrt();
    assert!(gauss_residual(&lat, &s.a, &s.e).1 < 1e-13 * e);
}

#[test]
fn zero_family_is_zero() {
    let c = cfg(Family::Zero, Group::Su2);
    let lat = lattice(&c).unwrap();
    let (s, r) = make_ym(&c, &lat).unwrap();
    assert!(s.a.iter().chain(&s.e).all(|f| f.is_zero()));
    assert_eq!(r.a_h_sigma, 0.0);
}

#[test]
fn pulses_are_constrained() {
    let c = cfg(Family::Pulses, Group::Su2);
    let lat = lattice(&c).unwrap();
    let (s, r) = make_ym(&c, &lat).unwrap();
    assert!((r.a_h_sigma - 0.2).abs() < 1e-12);
    assert!(r.gauss_residual < 1e-11 * lat.vl2_sq(&s.e).sqrt());
}

#[test]
fn mkg_data_is_neutral_and_constrained() {
    for family in [Family::Random, Family::Pulses] {
        let mut c = cfg(family, Group::U1);
        c.run.kind = Some(Kind::Mkg);
        let lat = lattice(&c).unwrap();
        let (s, r) = make_mkg(&c, &lat).unwrap();
        assert!(r.phi_h_sigma > 0.0);
        assert!(charge(&lat, &s).abs() < 1e-12, "{family:?}");
        assert!(constraint_residual(&lat, &s) < 1e-12, "{family:?}");
        match make_data(&c, &lat).unwrap().0 {
            Data::Mkg(m) => assert_eq!(m, s),
            Data::Ym(_) => panic!("mkg kind must give mkg data"),
        }
    }
}
