//! Merges noise kicks, rf-off windows and event times into one timeline of
//! constant-Hamiltonian segments.

use alloc::format;
use alloc::vec::Vec;

use super::noise::NoiseRealization;
use crate::hilbert::HamiltonianSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub spec: HamiltonianSpec,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Contiguous segments covering `[0, τ_end]` plus the times at which a run
/// hands the state to an event handler. Every event time is a segment end.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    segments: Vec<Segment>,
    events: Vec<f64>,
}

impl Schedule {
    pub fn builder(tau_end: f64, eps: f64, eta: f64) -> ScheduleBuilder<'static> {
        ScheduleBuilder {
            tau_end,
            eps,
            eta,
            noise: None,
            rf_off: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Single constant segment.
    pub fn constant(tau_end: f64, spec: HamiltonianSpec) -> Result<Self> {
        Self::builder(tau_end, spec.eps_active, spec.eta)
            .constant_delta(spec.delta)
            .build()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn tau_end(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Distinct Hamiltonians in first-use order.
    pub fn distinct_specs(&self) -> Vec<HamiltonianSpec> {
        let mut out: Vec<HamiltonianSpec> = Vec::new();
        for seg in &self.segments {
            if !out.iter().any(|s| s.key() == seg.spec.key()) {
                out.push(seg.spec);
            }
        }
        out
    }

    /// Bit patterns of every segment and event, for hashing into a digest.
    pub fn canonical_words(&self) -> Vec<u64> {
        let mut words = Vec::with_capacity(5 * self.segments.len() + self.events.len() + 2);
        words.push(self.segments.len() as u64);
        for s in &self.segments {
            words.extend([s.start.to_bits(), s.end.to_bits()]);
            words.extend(s.spec.key());
        }
        words.push(self.events.len() as u64);
        words.extend(self.events.iter().map(|e| e.to_bits()));
        words
    }

    fn validate(&self) -> Result<()> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::Schedule("no segments".into()))?;
        if first.start != 0.0 {
            return Err(Error::Schedule(format!("first segment starts at {}", first.start)));
        }
        for pair in self.segments.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(Error::Schedule(format!(
                    "gap or overlap between {} and {}",
                    pair[0].end, pair[1].start
                )));
            }
        }
        if let Some(bad) = self.segments.iter().find(|s| s.end <= s.start) {
            return Err(Error::Schedule(format!("empty segment at {}", bad.start)));
        }
        Ok(())
    }
}

pub struct ScheduleBuilder<'a> {
    tau_end: f64,
    eps: f64,
    eta: f64,
    noise: Option<NoiseSource<'a>>,
    rf_off: Vec<(f64, f64)>,
    events: Vec<f64>,
}

enum NoiseSource<'a> {
    Kicks(&'a NoiseRealization),
    Constant(f64),
}

impl<'a> ScheduleBuilder<'a> {
    pub fn noise<'b>(self, noise: &'b NoiseRealization) -> ScheduleBuilder<'b>
    where
        'a: 'b,
    {
        ScheduleBuilder {
            tau_end: self.tau_end,
            eps: self.eps,
            eta: self.eta,
            noise: Some(NoiseSource::Kicks(noise)),
            rf_off: self.rf_off,
            events: self.events,
        }
    }

    pub fn constant_delta(mut self, delta: f64) -> Self {
        self.noise = Some(NoiseSource::Constant(delta));
        self
    }

    /// Window `[start, end)` with the rf field switched off (ε → 0).
    pub fn rf_off(mut self, start: f64, end: f64) -> Self {
        self.rf_off.push((start, end));
        self
    }

    pub fn event(mut self, tau: f64) -> Self {
        self.events.push(tau);
        self
    }

    pub fn events(mut self, taus: impl IntoIterator<Item = f64>) -> Self {
        self.events.extend(taus);
        self
    }

    pub fn build(self) -> Result<Schedule> {
        crate::params::positive("tau_end", self.tau_end)?;
        let tau_end = self.tau_end;
        for &(a, b) in &self.rf_off {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::Schedule(format!("rf-off window [{a}, {b}) is empty")));
            }
        }
        let mut events = self.events;
        if let Some(&bad) = events.iter().find(|&&t| !(t > 0.0 && t <= tau_end)) {
            return Err(Error::Schedule(format!(
                "event at {bad} lies outside (0, {tau_end}]"
            )));
        }
        events.sort_by(f64::total_cmp);
        events.dedup();

        let mut cuts = alloc::vec![0.0, tau_end];
        if let Some(NoiseSource::Kicks(n)) = &self.noise {
            cuts.extend(n.kick_times.iter().copied());
        }
        for &(a, b) in &self.rf_off {
            cuts.extend([a, b]);
        }
        cuts.extend(events.iter().copied());
        cuts.retain(|&t| (0.0..=tau_end).contains(&t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let delta_at = |tau: f64| match &self.noise {
            Some(NoiseSource::Kicks(n)) => n.value_at(tau),
            Some(NoiseSource::Constant(d)) => *d,
            None => 0.0,
        };
        let segments = cuts
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let rf_on = !self.rf_off.iter().any(|&(a, b)| a <= mid && mid < b);
                Segment {
                    start: w[0],
                    end: w[1],
                    spec: HamiltonianSpec::new(if rf_on { self.eps } else { 0.0 }, self.eta, delta_at(mid)),
                }
            })
            .collect();
        let schedule = Schedule { segments, events };
        schedule.validate()?;
        Ok(schedule)
    }
}
