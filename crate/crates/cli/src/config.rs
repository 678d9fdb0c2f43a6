//! Run configuration: defaults, TOML file, command-line flags, in that order
//! of increasing precedence.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use oscar_core::params::{PhysicalParams, BOLTZMANN, ELECTRON_GYROMAGNETIC_RATIO, HBAR};
use oscar_core::protocols::SimParams;
use oscar_core::quasiclassical::DEFAULT_ROOT_SCAN;
use oscar_core::states::Sense;
use serde::{Deserialize, Serialize};

/// A dimensionless time or rate: a plain number, or a multiple of π written
/// as `8pi`, `8*pi`, `pi/2` or `pi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "f64")]
pub struct Dimensionless(pub f64);

impl From<Dimensionless> for f64 {
    fn from(d: Dimensionless) -> f64 {
        d.0
    }
}

impl FromStr for Dimensionless {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
        let bad = || format!("`{s}` is not a number or a multiple of pi (e.g. 25.1, 8pi, pi/2)");
        if let Ok(v) = t.parse::<f64>() {
            return Ok(Self(v));
        }
        let Some(at) = t.find("pi") else {
            return Err(bad());
        };
        let coef = t[..at].trim_end_matches('*');
        let coef = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
        let rest = &t[at + 2..];
        let div = match rest.strip_prefix('/') {
            None if rest.is_empty() => 1.0,
            Some(d) => d.parse::<f64>().map_err(|_| bad())?,
            None => return Err(bad()),
        };
        Ok(Self(coef * PI / div))
    }
}

impl<'de> Deserialize<'de> for Dimensionless {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Self(v)),
            Raw::Int(v) => Ok(Self(v as f64)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Dimensionless {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialSpin {
    Aligned,
    AntiAligned,
}

impl From<InitialSpin> for Sense {
    fn from(s: InitialSpin) -> Sense {
        match s {
            InitialSpin::Aligned => Sense::Aligned,
            InitialSpin::AntiAligned => Sense::AntiAligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorName {
    X,
    P,
    Sx,
    Sy,
    Sz,
    H,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub physical: PhysicalSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub numerics: NumericsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub f_c: Option<f64>,
    pub k_c: Option<f64>,
    pub b1: Option<f64>,
    pub gradient: Option<f64>,
    pub amplitude: Option<f64>,
    pub temperature: Option<f64>,
    pub gamma: Option<f64>,
    pub hbar: Option<f64>,
    pub k_b: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub x0: Option<f64>,
    pub p0: Option<f64>,
    pub initial: Option<InitialSpin>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub delta0: Option<f64>,
    pub realizations: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub tau_p: Option<Dimensionless>,
    pub tau_coll: Option<Dimensionless>,
    pub pulses: Option<usize>,
    pub calibrate: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub n_osc: Option<usize>,
    pub sample_dtau: Option<Dimensionless>,
    pub half_periods: Option<usize>,
    pub seed: Option<u64>,
    pub root_scan: Option<f64>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("{}", e.to_string().trim_end()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in config {}", path.display()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "oscar", version, about = "Spin/cantilever OSCAR simulator", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Quasiclassical estimates for the laboratory parameters.
    Estimate,
    /// Plain OSCAR run, optionally with telegraph noise.
    Simulate,
    /// OSCAR interrupted by π/2 pulses, with collapses.
    Interrupted,
    /// Nonzero elements of an operator matrix.
    OperatorsDump {
        #[arg(long, value_enum, default_value = "h")]
        operator: OperatorName,
    },
}

#[derive(Debug, Default, Clone, Args)]
pub struct Flags {
    /// TOML file with [physical] [model] [noise] [protocol] [numerics] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Telegraph-noise amplitude Δ₀.
    #[arg(long, global = true)]
    pub delta0: Option<f64>,
    #[arg(long, global = true)]
    pub n_osc: Option<usize>,
    #[arg(long, global = true)]
    pub half_periods: Option<usize>,
    /// Pulse period, e.g. `8pi`.
    #[arg(long, global = true)]
    pub tau_p: Option<Dimensionless>,
    /// Delay from pulse end to collapse, e.g. `2pi`.
    #[arg(long, global = true)]
    pub tau_coll: Option<Dimensionless>,
    #[arg(long, global = true)]
    pub pulses: Option<usize>,
    /// Noise realizations run in parallel.
    #[arg(long, global = true)]
    pub realizations: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Fully resolved configuration of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub config_file: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub physical: PhysicalEcho,
    pub eps: f64,
    pub eta: f64,
    pub x0: f64,
    pub p0: f64,
    pub initial: Option<InitialSpin>,
    pub delta0: f64,
    pub realizations: usize,
    pub tau_p: f64,
    /// 0 disables collapses.
    pub tau_coll: f64,
    pub pulses: usize,
    pub calibrate: bool,
    pub n_osc: usize,
    pub sample_dtau: f64,
    pub half_periods: usize,
    pub root_scan: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalEcho {
    pub f_c: f64,
    pub k_c: f64,
    pub b1: f64,
    pub gradient: f64,
    pub amplitude: f64,
    pub temperature: f64,
    pub gamma: f64,
    pub hbar: f64,
    pub k_b: f64,
}

impl From<PhysicalEcho> for PhysicalParams {
    fn from(e: PhysicalEcho) -> Self {
        PhysicalParams {
            f_c: e.f_c,
            k_c: e.k_c,
            b1: e.b1,
            gradient: e.gradient,
            amplitude: e.amplitude,
            temperature: e.temperature,
            gamma: e.gamma,
            hbar: e.hbar,
            k_b: e.k_b,
        }
    }
}

pub const DEFAULT_HALF_PERIODS: usize = 24;
pub const DEFAULT_PULSES: usize = 4;
pub const DEFAULT_OUT: &str = "oscar-out";

impl RunConfig {
    /// Parses `argv` (program name first) and the config file it names.
    pub fn from_args<I, T>(argv: I) -> anyhow::Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(argv)?;
        let file = match &cli.flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::resolve(cli.command, &cli.flags, &file)
    }

    pub fn resolve(command: Command, flags: &Flags, file: &FileConfig) -> anyhow::Result<Self> {
        let lab = PhysicalParams::experiment();
        let sim = SimParams::default();
        let ph = &file.physical;
        let physical = PhysicalEcho {
            f_c: ph.f_c.unwrap_or(lab.f_c),
            k_c: ph.k_c.unwrap_or(lab.k_c),
            b1: ph.b1.unwrap_or(lab.b1),
            gradient: ph.gradient.unwrap_or(lab.gradient),
            amplitude: ph.amplitude.unwrap_or(lab.amplitude),
            temperature: ph.temperature.unwrap_or(lab.temperature),
            gamma: ph.gamma.unwrap_or(ELECTRON_GYROMAGNETIC_RATIO),
            hbar: ph.hbar.unwrap_or(HBAR),
            k_b: ph.k_b.unwrap_or(BOLTZMANN),
        };
        let cfg = Self {
            command,
            config_file: flags.config.clone(),
            out: flags.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            seed: flags.seed.or(file.numerics.seed).unwrap_or(0),
            physical,
            eps: file.model.eps.unwrap_or(sim.eps),
            eta: file.model.eta.unwrap_or(sim.eta),
            x0: file.model.x0.unwrap_or(sim.x0),
            p0: file.model.p0.unwrap_or(sim.p0),
            initial: file.model.initial,
            delta0: flags.delta0.or(file.noise.delta0).unwrap_or(0.0),
            realizations: flags.realizations.or(file.noise.realizations).unwrap_or(1),
            tau_p: flags.tau_p.or(file.protocol.tau_p).map_or(8.0 * PI, |d| d.0),
            tau_coll: flags.tau_coll.or(file.protocol.tau_coll).map_or(2.0 * PI, |d| d.0),
            pulses: flags.pulses.or(file.protocol.pulses).unwrap_or(DEFAULT_PULSES),
            calibrate: file.protocol.calibrate.unwrap_or(true),
            n_osc: flags.n_osc.or(file.numerics.n_osc).unwrap_or(sim.n_osc),
            sample_dtau: file.numerics.sample_dtau.map_or(sim.sample_dtau, |d| d.0),
            half_periods: flags.half_periods.or(file.numerics.half_periods).unwrap_or(DEFAULT_HALF_PERIODS),
            root_scan: file.numerics.root_scan.unwrap_or(DEFAULT_ROOT_SCAN),
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.realizations == 0 {
            bail!("realizations must be at least 1");
        }
        if self.half_periods == 0 {
            bail!("half_periods must be at least 1");
        }
        if !(self.delta0 >= 0.0) {
            bail!("delta0 must be non-negative, got {}", self.delta0);
        }
        if !(self.sample_dtau > 0.0) {
            bail!("sample_dtau must be positive, got {}", self.sample_dtau);
        }
        if !(self.tau_p > 0.0) {
            bail!("tau_p must be positive, got {}", self.tau_p);
        }
        if !(self.tau_coll >= 0.0) {
            bail!("tau_coll must be non-negative (0 disables collapses), got {}", self.tau_coll);
        }
        if !(self.root_scan > 0.0) {
            bail!("root_scan must be positive, got {}", self.root_scan);
        }
        if self.n_osc < 2 {
            bail!("n_osc must be at least 2, got {}", self.n_osc);
        }
        Ok(())
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            eps: self.eps,
            eta: self.eta,
            x0: self.x0,
            p0: self.p0,
            n_osc: self.n_osc,
            sample_dtau: self.sample_dtau,
        }
    }

    pub fn physical_params(&self) -> PhysicalParams {
        self.physical.into()
    }
}
