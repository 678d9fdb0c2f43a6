//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use oscar_core::analysis::{effective_shift_series, CrossingSeries};
use oscar_core::evolve::{RunDiagnostics, RunOutput};
use oscar_core::protocols::{CollapseRecord, Outcome, PulseResponse};
use oscar_core::states::Sense;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// Full round-trip precision: 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Collects the files written by a command, relative to the output directory.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    pub written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn timeseries(&mut self, name: &str, out: &RunOutput) -> anyhow::Result<()> {
        let header = [
            "tau",
            "x",
            "p",
            "s_x",
            "s_y",
            "s_z",
            "spin_magnitude",
            "norm_error",
            "top_band_population",
        ];
        let rows = out.samples.iter().map(|s| {
            [s.tau, s.x, s.p, s.spin.x, s.spin.y, s.spin.z, s.spin_magnitude, s.norm_error, s.top_band]
                .into_iter()
                .map(num)
                .collect()
        });
        self.table(name, &header, rows)
    }

    /// `j, crossing time, Δτ_j, δτ_j = |Δτ_j − π|, ω_j = π/Δτ_j, δω_j`.
    pub fn crossings(&mut self, name: &str, c: &CrossingSeries) -> anyhow::Result<()> {
        let shifts = effective_shift_series(c);
        let header = ["j", "crossing", "half_period", "delta_tau", "omega", "delta_omega"];
        let rows = (0..c.len()).map(|j| {
            vec![
                (j + 1).to_string(),
                num(c.crossings[j + 1]),
                num(c.half_periods[j]),
                num(c.deviations[j]),
                num(c.omegas[j]),
                num(shifts.signed[j]),
            ]
        });
        self.table(name, &header, rows)
    }

    pub fn pulses(&mut self, name: &str, windows: &[(f64, f64)], responses: &[PulseResponse]) -> anyhow::Result<()> {
        let header = ["k", "start", "end", "x", "projection", "angle", "p_aligned", "p_anti_aligned"];
        let rows = windows.iter().zip(responses).enumerate().map(|(k, (w, r))| {
            let mut row = vec![k.to_string(), num(w.0), num(w.1)];
            row.extend(
                [r.x, r.projection, r.angle, r.probabilities.aligned, r.probabilities.anti_aligned].map(num),
            );
            row
        });
        self.table(name, &header, rows)
    }

    pub fn collapses(&mut self, name: &str, records: &[CollapseRecord]) -> anyhow::Result<()> {
        let header = ["k", "tau", "x", "branch", "outcome", "p_aligned", "p_anti_aligned"];
        let rows = records.iter().enumerate().map(|(k, c)| {
            vec![
                k.to_string(),
                num(c.tau),
                num(c.x),
                sense_name(c.branch).to_string(),
                match c.outcome {
                    Outcome::Kept => "kept",
                    Outcome::Jumped => "jumped",
                }
                .to_string(),
                num(c.probabilities.aligned),
                num(c.probabilities.anti_aligned),
            ]
        });
        self.table(name, &header, rows)
    }
}

pub fn sense_name(s: Sense) -> &'static str {
    match s {
        Sense::Aligned => "aligned",
        Sense::AntiAligned => "anti-aligned",
    }
}

/// SHA-256 of the words, little-endian, as lowercase hex.
pub fn digest_words(words: &[u64]) -> String {
    let mut h = Sha256::new();
    for w in words {
        h.update(w.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Health {
    pub max_norm_error: f64,
    pub max_top_band_population: f64,
    pub truncation_warning_at: Option<f64>,
    pub max_energy_drift: f64,
    pub segments: usize,
    pub events: usize,
}

impl Health {
    pub fn absorb(&mut self, d: &RunDiagnostics) {
        self.max_norm_error = self.max_norm_error.max(d.max_norm_error);
        self.max_top_band_population = self.max_top_band_population.max(d.max_top_band);
        self.truncation_warning_at = match (self.truncation_warning_at, d.truncation_warning_at) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        self.max_energy_drift = self.max_energy_drift.max(d.max_energy_drift);
        self.segments += d.segments;
        self.events += d.events;
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub program: &'static str,
    pub version: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub seed: u64,
    pub basis: Basis,
    pub schedule_digest: Option<String>,
    pub health: Option<Health>,
    pub summary: serde_json::Value,
    pub outputs: Vec<String>,
    pub config: &'a RunConfig,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Basis {
    pub n_osc: usize,
    pub dim: usize,
}

impl Manifest<'_> {
    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            digest_words(&[]),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_ne!(digest_words(&[1]), digest_words(&[2]));
    }
}
