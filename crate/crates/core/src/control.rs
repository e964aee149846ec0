//! Control ranges, piecewise-constant controls and sampled trajectories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed interval `Ω = [u_min, u_max]` with `u_min < 0 < u_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ControlRange {
    u_min: f64,
    u_max: f64,
}

impl TryFrom<[f64; 2]> for ControlRange {
    type Error = Error;
    fn try_from(a: [f64; 2]) -> Result<Self> {
        ControlRange::new(a[0], a[1])
    }
}

impl From<ControlRange> for [f64; 2] {
    fn from(r: ControlRange) -> Self {
        [r.u_min, r.u_max]
    }
}

impl ControlRange {
    pub fn new(u_min: f64, u_max: f64) -> Result<Self> {
        if !(u_min.is_finite() && u_max.is_finite()) {
            return Err(Error::NonFinite("control range"));
        }
        if !(u_min < 0.0 && 0.0 < u_max) {
            return Err(Error::BadControlRange(u_min, u_max));
        }
        Ok(ControlRange { u_min, u_max })
    }

    pub fn u_min(&self) -> f64 {
        self.u_min
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn contains(&self, u: f64) -> bool {
        self.u_min <= u && u <= self.u_max
    }

    pub fn check(&self, u: f64) -> Result<()> {
        if self.contains(u) {
            Ok(())
        } else {
            Err(Error::ControlOutOfRange {
                u,
                u_min: self.u_min,
                u_max: self.u_max,
            })
        }
    }

    /// The range `kΩ`, reordered when `k < 0`.
    pub fn scaled(&self, k: f64) -> Result<ControlRange> {
        let (a, b) = (k * self.u_min, k * self.u_max);
        ControlRange::new(a.min(b), a.max(b))
    }
}

/// A finite concatenation of constant controls, stored as
/// `(duration, value)` pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseControl {
    pieces: Vec<(f64, f64)>,
}

impl PiecewiseControl {
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        for &(d, u) in &pieces {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::BadDuration(d));
            }
            if !u.is_finite() {
                return Err(Error::NonFinite("control value"));
            }
        }
        Ok(PiecewiseControl { pieces })
    }

    pub fn empty() -> Self {
        PiecewiseControl { pieces: Vec::new() }
    }

    /// Appends a piece; zero durations are dropped.
    pub fn push(&mut self, duration: f64, value: f64) -> Result<()> {
        if duration == 0.0 {
            return Ok(());
        }
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::BadDuration(duration));
        }
        if !value.is_finite() {
            return Err(Error::NonFinite("control value"));
        }
        self.pieces.push((duration, value));
        Ok(())
    }

    pub fn extend(&mut self, other: &PiecewiseControl) {
        self.pieces.extend_from_slice(&other.pieces);
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn total_duration(&self) -> f64 {
        self.pieces.iter().map(|p| p.0).sum()
    }

    /// `Σ sᵢ uᵢ`.
    pub fn integral(&self) -> f64 {
        self.pieces.iter().map(|p| p.0 * p.1).sum()
    }

    pub fn check_range(&self, omega: &ControlRange) -> Result<()> {
        self.pieces.iter().try_for_each(|p| omega.check(p.1))
    }

    /// Renders the schedule as `duration,value` CSV rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("duration,value\n");
        for (d, u) in &self.pieces {
            let _ = writeln!(s, "{d},{u}");
        }
        s
    }

    /// Parses `duration,value` rows; an optional header line is skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut pieces = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(Error::Hypothesis(format!(
                        "control line {}: expected two columns",
                        i + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(d), Ok(u)) => {
                    if !(d.is_finite() && d >= 0.0) {
                        return Err(Error::Hypothesis(format!(
                            "control line {}: bad duration {d}",
                            i + 1
                        )));
                    }
                    if d > 0.0 {
                        pieces.push((d, u));
                    }
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::Hypothesis(format!(
                        "control line {}: unparsable number",
                        i + 1
                    )))
                }
            }
        }
        PiecewiseControl::new(pieces)
    }
}

/// Samples `(time, state)` of a solution together with the control that
/// produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S> {
    pub samples: Vec<(f64, S)>,
    pub switch_times: Vec<f64>,
    pub control: PiecewiseControl,
}

impl<S: Copy> Trajectory<S> {
    pub fn start(&self) -> S {
        self.samples[0].1
    }

    pub fn end(&self) -> S {
        self.samples[self.samples.len() - 1].1
    }

    pub fn map<T>(&self, f: impl FnMut(S) -> T) -> Trajectory<T> {
        let mut f = f;
        Trajectory {
            samples: self.samples.iter().map(|&(s, x)| (s, f(x))).collect(),
            switch_times: self.switch_times.clone(),
            control: self.control.clone(),
        }
    }
}

/// Splits a piece of length `duration` into `n` equal sub-steps no longer
/// than `step`.
pub(crate) fn substeps(duration: f64, step: f64) -> (usize, f64) {
    let n = ((duration / step) - 1e-9).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}
