//! Experiment configuration: TOML sections of `key = value` lines.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Evolve,
    Heatflow,
    Tension,
    AclSweep,
    Mkg,
    Invariants,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Evolve => "evolve",
            Kind::Heatflow => "heatflow",
            Kind::Tension => "tension",
            Kind::AclSweep => "acl-sweep",
            Kind::Mkg => "mkg",
            Kind::Invariants => "invariants",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Su2,
    U1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Exact abelian plane wave.
    PlaneWave,
    /// Band-limited random data with prescribed `H^σ` size.
    Random,
    /// Two counter-propagating wave packets.
    Pulses,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strictness {
    Strict,
    Lax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { kind: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    /// Period of the torus.
    #[serde(rename = "L")]
    pub length: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 16,
            length: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub group: Group,
    #[serde(rename = "N")]
    pub n_freq: f64,
    pub sigma: f64,
    /// Flow horizon, `N^{-2}` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Frequency scales of the almost-conservation sweep.
    pub sweep: Vec<f64>,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        Self {
            group: Group::Su2,
            n_freq: 4.0,
            sigma: 0.75,
            s0: None,
            sweep: vec![4.0, 8.0, 16.0, 32.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Smallest flow step, `s₀/4096` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ds_min: Option<f64>,
    /// Geometric growth of the flow step.
    pub growth: f64,
    /// Spacing of the time stencil for tension fields, `5·dt` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Time intervals at whose ends the sweep evaluates the modified energy.
    pub intervals: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_end: 1.0,
            ds_min: None,
            growth: 0.1,
            delta: None,
            intervals: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub family: Family,
    pub amplitude: f64,
    pub seed: u64,
    /// Largest Fourier mode per axis of random data.
    pub max_mode: i64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            family: Family::Random,
            amplitude: 0.1,
            seed: 1,
            max_mode: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub checkpoint: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    pub integrator: IntegratorSection,
    pub data: DataSection,
    pub output: OutputSection,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("run", &["kind"]),
    ("grid", &["n", "L"]),
    ("physics", &["group", "N", "sigma", "s0", "sweep"]),
    ("integrator", &["dt", "T", "ds_min", "growth", "delta", "intervals"]),
    ("data", &["family", "amplitude", "seed", "max_mode"]),
    ("output", &["dir", "checkpoint"]),
];

impl ExperimentConfig {
    /// Flow horizon `s₀`.
    pub fn s0(&self) -> f64 {
        self.physics.s0.unwrap_or(1.0 / (self.physics.n_freq * self.physics.n_freq))
    }

    pub fn ds_min(&self) -> f64 {
        self.integrator.ds_min.unwrap_or(self.s0() / 4096.0)
    }

    pub fn delta(&self) -> f64 {
        self.integrator.delta.unwrap_or(5.0 * self.integrator.dt)
    }

    pub fn kind(&self) -> Result<Kind, HarnessError> {
        self.run
            .kind
            .ok_or_else(|| HarnessError::Config(vec!["run.kind is not set".into()]))
    }

    /// Fills every derived default so that emitted configs are self-contained.
    pub fn resolved(mut self) -> Self {
        self.physics.s0 = Some(self.s0());
        self.integrator.ds_min = Some(self.ds_min());
        self.integrator.delta = Some(self.delta());
        self
    }

    /// Every violated constraint, in section order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                v.push(msg);
            }
        };
        let g = &self.grid;
        need(g.n >= 8 && g.n.is_power_of_two(), format!("grid.n must be a power of two >= 8, got {}", g.n));
        need(g.length > 0.0 && g.length.is_finite(), format!("grid.L must be positive, got {}", g.length));
        let p = &self.physics;
        need(p.sigma > 0.5 && p.sigma < 1.0, format!("physics.sigma must lie in (1/2, 1), got {}", p.sigma));
        need(p.n_freq > 0.0 && p.n_freq.is_finite(), format!("physics.N must be positive, got {}", p.n_freq));
        if let Some(s0) = p.s0 {
            need(s0 > 0.0 && s0.is_finite(), format!("physics.s0 must be positive, got {s0}"));
        }
        need(
            !p.sweep.is_empty() && p.sweep.iter().all(|x| *x > 0.0 && x.is_finite()),
            "physics.sweep must list positive frequencies".into(),
        );
        let i = &self.integrator;
        need(i.dt > 0.0 && i.dt.is_finite(), format!("integrator.dt must be positive, got {}", i.dt));
        need(i.t_end >= 0.0 && i.t_end.is_finite(), format!("integrator.T must be non-negative, got {}", i.t_end));
        need(i.growth > 0.0 && i.growth.is_finite(), format!("integrator.growth must be positive, got {}", i.growth));
        need(i.intervals > 0, "integrator.intervals must be positive".into());
        if let Some(d) = i.ds_min {
            need(d > 0.0 && d.is_finite(), format!("integrator.ds_min must be positive, got {d}"));
        }
        if let Some(d) = i.delta {
            need(d > 0.0 && d.is_finite(), format!("integrator.delta must be positive, got {d}"));
        }
        let d = &self.data;
        need(
            d.amplitude >= 0.0 && d.amplitude.is_finite(),
            format!("data.amplitude must be non-negative, got {}", d.amplitude),
        );
        need(d.max_mode >= 1, format!("data.max_mode must be at least 1, got {}", d.max_mode));
        need(!self.output.dir.is_empty(), "output.dir must not be empty".into());
        v
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::Config(v))
        }
    }

    /// Parses and validates config text, filling derived defaults.
    pub fn parse(text: &str, mode: Strictness) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig = match mode {
            Strictness::Strict => toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?,
            Strictness::Lax => {
                let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?;
                drop_unknown(&mut table);
                table.try_into().map_err(|e: toml::de::Error| HarnessError::Parse(e.to_string()))?
            }
        };
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    /// Canonical text form; parsing it returns an identical config.
    pub fn emit(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, Strictness::Strict)
    }
}

fn drop_unknown(table: &mut toml::Table) {
    table.retain(|section, value| {
        let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == &section[..]) else {
            log::warn!("ignoring unknown section [{section}]");
            return false;
        };
        match value.as_table_mut() {
            Some(t) => {
                t.retain(|k, _| {
                    let known = keys.iter().any(|x| *x == &k[..]);
                    if !known {
                        log::warn!("ignoring unknown key {section}.{k}");
                    }
                    known
                });
                true
            }
            None => {
                log::warn!("ignoring non-table entry {section}");
                false
            }
        }
    });
}

pub fn load_config(path: &Path, mode: Strictness) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text, mode)
}
