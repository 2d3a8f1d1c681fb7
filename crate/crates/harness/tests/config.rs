use ymlab_harness::config::{Family, Group};
use ymlab_harness::{ExperimentConfig, HarnessError, Kind, Strictness};

fn parse(text: &str) -> Result<ExperimentConfig, HarnessError> {
    ExperimentConfig::parse(text, Strictness::Strict)
}

#[test]
fn minimal_config_fills_defaults() {
    let c = parse("[physics]\nN = 8.0\n").unwrap();
    assert_eq!(c.physics.s0, Some(1.0 / 64.0));
    assert_eq!(c.integrator.ds_min, Some(1.0 / 64.0 / 4096.0));
    assert_eq!(c.integrator.delta, Some(5.0 * c.integrator.dt));
    assert_eq!(c.grid.n, 16);
    assert_eq!(c.physics.group, Group::Su2);
    assert_eq!(c.data.family, Family::Random);
    assert_eq!(c.run.kind, None);
}

#[test]
fn empty_text_is_the_default_config() {
    assert_eq!(parse("").unwrap(), ExperimentConfig::default().resolved());
}

#[test]
fn explicit_s0_is_kept() {
    let c = parse("[physics]\nN = 8.0\ns0 = 0.5\n").unwrap();
    assert_eq!(c.s0(), 0.5);
}

#[test]
fn sigma_outside_range_is_rejected() {
    for bad in ["1.2", "0.5", "1.0"] {
        match parse(&format!("[physics]\nsigma = {bad}\n")) {
            Err(HarnessError::Config(v)) => assert!(v.iter().any(|m| m.contains("sigma")), "{v:?}"),
            other => panic!("sigma = {bad} accepted: {other:?}"),
        }
    }
}

#[test]
fn every_violation_is_listed() {
    let text = "[grid]\nn = 12\n[physics]\nsigma = 2.0\n[integrator]\ndt = -1.0\n";
    match parse(text) {
        Err(HarnessError::Config(v)) => {
            assert_eq!(v.len(), 3, "{v:?}");
            assert!(v[0].contains("grid.n") && v[1].contains("sigma") && v[2].contains("dt"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_keys_fail_strict_parsing_with_a_line_number() {
    let text = "[grid]\nn = 16\n\n[physics]\nsigam = 0.7\n";
    match parse(text) {
        Err(HarnessError::Parse(msg)) => {
            assert!(msg.contains("sigam"), "{msg}");
            assert!(msg.contains("line 5"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse("[extras]\nx = 1\n"), Err(HarnessError::Parse(_))));
}

#[test]
fn lax_parsing_drops_unknown_keys() {
    let text = "[physics]\nsigam = 0.7\nsigma = 0.8\n[extras]\nx = 1\n";
    let c = ExperimentConfig::parse(text, Strictness::Lax).unwrap();
    assert_eq!(c.physics.sigma, 0.8);
}

#[test]
fn syntax_errors_report_the_line() {
    match parse("[grid]\nn = 16\nL = \n") {
        Err(HarnessError::Parse(msg)) => assert!(msg.contains("line 3"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn emit_then_parse_round_trips() {
    let mut c = ExperimentConfig::default();
    c.run.kind = Some(Kind::AclSweep);
    c.grid.n = 32;
    c.physics.group = Group::U1;
    c.physics.sigma = 0.85;
    c.physics.sweep = vec![4.0, 8.0];
    c.integrator.dt = 1e-3;
    c.data.family = Family::Pulses;
    c.data.seed = 12345;
    c.output.dir = "runs/a b".into();
    let c = c.resolved();
    let text = c.emit();
    let back = parse(&text).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.emit(), text);
}

#[test]
fn kinds_use_command_names() {
    let c = parse("[run]\nkind = \"acl-sweep\"\n").unwrap();
    assert_eq!(c.run.kind, Some(Kind::AclSweep));
    assert_eq!(Kind::AclSweep.to_string(), "acl-sweep");
}
