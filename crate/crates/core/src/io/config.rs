//! Run configuration: `key = value` text with `[system]`, `[forcing]`,
//! `[modes]`, `[rom]` and `[experiment]` sections.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::benchmarks::{GinzburgLandauSpec, ScalarTransportSpec};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::modal::{BlockLayout, Window};
use crate::rom::RomConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SystemConfig {
    GinzburgLandau(GinzburgLandauSpec),
    ScalarTransport(ScalarTransportSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    /// Block length `N_ω`.
    pub n_omega: usize,
    /// Sample spacing.
    pub dt: f64,
    /// Exact block count; takes precedence over `stride` and `overlap`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    #[serde(default)]
    pub window: Window,
}

fn default_overlap() -> f64 {
    0.5
}

impl ModesConfig {
    pub fn layout(&self) -> BlockLayout {
        match (self.blocks, self.stride) {
            (Some(b), _) => BlockLayout::Count(b),
            (None, Some(s)) => BlockLayout::Stride(s),
            (None, None) => BlockLayout::Overlap(self.overlap),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Length of the training record after spin-up.
    pub training_steps: usize,
    /// Steps discarded before training and run ahead of each test window;
    /// defaults to `N_ω`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spinup_steps: Option<usize>,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Mean ranks for the mode sweep; defaults to `[rom.r]`.
    #[serde(default)]
    pub r_values: Vec<usize>,
    /// Include balanced truncation (dense systems only).
    #[serde(default = "default_true")]
    pub balanced_truncation: bool,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    /// Seed for forcing derived from the system when `[forcing]` is absent.
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_n_test() -> usize {
    20
}
fn default_true() -> bool {
    true
}
fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingSpec>,
    pub modes: ModesConfig,
    pub rom: RomConfig,
    pub experiment: ExperimentConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The configuration with every default written out.
    pub fn to_text(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.system {
            SystemConfig::GinzburgLandau(s) => {
                s.validate()?;
                if self.forcing.is_none() {
                    return Err(Error::Config(
                        "the ginzburg-landau system needs a [forcing] section".into(),
                    ));
                }
            }
            SystemConfig::ScalarTransport(s) => s.validate()?,
        }
        if let Some(f) = &self.forcing {
            f.validate()?;
        }
        let m = &self.modes;
        if m.n_omega < 2 || !(m.dt > 0.0) {
            return Err(Error::Config(
                "modes.n_omega must be at least 2 and modes.dt positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&m.overlap) {
            return Err(Error::Config(format!(
                "modes.overlap must lie in [0, 1), got {}",
                m.overlap
            )));
        }
        let e = &self.experiment;
        if e.training_steps < m.n_omega {
            return Err(Error::Config(format!(
                "experiment.training_steps ({}) is shorter than one block ({})",
                e.training_steps, m.n_omega
            )));
        }
        if let Some(r) = e.r_values.iter().find(|&&r| r > self.rom.r) {
            return Err(Error::Config(format!(
                "r value {r} exceeds rom.r = {}",
                self.rom.r
            )));
        }
        if !(e.rtol > 0.0 && e.atol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    pub fn spinup(&self) -> usize {
        self.experiment.spinup_steps.unwrap_or(self.modes.n_omega)
    }

    /// Ranks of the mode sweep, ascending and unique.
    pub fn sweep(&self) -> Vec<usize> {
        let mut r = if self.experiment.r_values.is_empty() {
            vec![self.rom.r]
        } else {
            self.experiment.r_values.clone()
        };
        r.sort_unstable();
        r.dedup();
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GL: &str = r#"
[system]
kind = "ginzburg-landau"
n_x = 64
half_width = 45.0

[forcing]
kind = "white"
xi = 4.0
seed = 7

[modes]
n_omega = 64
dt = 0.2

[rom]
r = 4

[experiment]
training_steps = 400
n_test = 2
r_values = [2, 4]
"#;

    #[test]
    fn round_trip_with_defaults() {
        let cfg = RunConfig::parse(GL).unwrap();
        assert_eq!(cfg.modes.layout(), BlockLayout::Overlap(0.5));
        let text = cfg.to_text().unwrap();
        assert!(text.contains("rtol"));
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        for (from, to) in [
            ("n_test = 2", "n_test = 2\nbogus = 1"),
            ("xi = 4.0", "xi = 4.0\nspeed = 2"),
        ] {
            let bad = GL.replace(from, to);
            assert!(
                matches!(RunConfig::parse(&bad), Err(Error::Config(_))),
                "{to}"
            );
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::parse(&GL.replace("r_values = [2, 4]", "r_values = [8]")).is_err());
        assert!(
            RunConfig::parse(&GL.replace("training_steps = 400", "training_steps = 10")).is_err()
        );
        let no_forcing = GL.replace("[forcing]\nkind = \"white\"\nxi = 4.0\nseed = 7\n", "");
        assert!(RunConfig::parse(&no_forcing).is_err());
    }

    #[test]
    fn transport_without_forcing_section() {
        let text = r#"
[system]
kind = "scalar-transport"
n = 16

[modes]
n_omega = 32
dt = 0.5
blocks = 10

[rom]
r = 3
intermediary = { pod = 20 }

[experiment]
training_steps = 200
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.modes.layout(), BlockLayout::Count(10));
        assert_eq!(RunConfig::parse(&cfg.to_text().unwrap()).unwrap(), cfg);
    }
}
