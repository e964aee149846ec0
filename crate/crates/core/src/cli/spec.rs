//! JSON system specifications with line-anchored validation errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlRange;
use crate::error::Error;
use crate::group::GroupVariant;
use crate::kernel2d::{Mat2, ThetaFamily, Vec2};
use crate::reach::{BoundingBox, ReachConfig};
use crate::system::{InvariantField, LinearField, SystemSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Half-width of a centred square, or `[xmin, xmax, ymin, ymax]`.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none", deserialize_with = "number_or_list")]
    pub bbox: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

fn number_or_list<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Box {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Some(match Box::deserialize(d)? {
        Box::One(h) => vec![h],
        Box::Many(v) => v,
    }))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub theta: ThetaFamily,
    #[serde(rename = "A")]
    pub a: Mat2,
    pub xi: Vec2,
    pub alpha: f64,
    pub eta: Vec2,
    pub omega: [f64; 2],
    #[serde(default = "simply_connected")]
    pub variant: GroupVariant,
    #[serde(default)]
    pub numerics: Numerics,
}

fn simply_connected() -> GroupVariant {
    GroupVariant::SimplyConnected
}

/// Numerical settings after applying defaults, the spec file and flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub step: f64,
    pub seed: u64,
    pub grid_box: [f64; 4],
    pub grid_resolution: usize,
    pub horizon: f64,
    pub budget: usize,
}

impl Resolved {
    pub fn reach_config(&self) -> ReachConfig {
        let [xmin, xmax, ymin, ymax] = self.grid_box;
        ReachConfig {
            bbox: BoundingBox { xmin, xmax, ymin, ymax },
            resolution: self.grid_resolution,
            horizon: self.horizon,
            budget: self.budget,
            seed: self.seed,
            ..ReachConfig::default()
        }
    }
}

pub fn box_from_values(v: &[f64]) -> Result<[f64; 4], String> {
    let b = match *v {
        [h] => [-h, h, -h, h],
        [a, b, c, d] => [a, b, c, d],
        _ => return Err(format!("grid box needs 1 or 4 values, got {}", v.len())),
    };
    BoundingBox {
        xmin: b[0],
        xmax: b[1],
        ymin: b[2],
        ymax: b[3],
    }
    .validate()
    .map_err(|e| e.to_string())?;
    Ok(b)
}

/// 1-based line of the first occurrence of the key `"key"`.
fn line_of(text: &str, key: &str) -> usize {
    let pat = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&pat)).map_or(1, |i| i + 1)
}

fn anchor(path: &Path, text: &str, key: &str, msg: impl std::fmt::Display) -> String {
    format!("{}:{}: {key}: {msg}", path.display(), line_of(text, key))
}

fn key_for(e: &Error) -> &'static str {
    match e {
        Error::GammaOutOfRange(_) => "theta",
        Error::NonCommuting(_) | Error::DoesNotDescend(_) => "A",
        Error::BadControlRange(..) => "omega",
        Error::IncompatibleVariant { .. } | Error::BadCoverIndex(_) => "variant",
        Error::NonFinite("invariant field") => "eta",
        Error::NonFinite(_) => "A",
        _ => "theta",
    }
}

pub struct Loaded {
    pub file: SpecFile,
    pub system: SystemSpec,
}

pub fn load(path: &Path) -> Result<Loaded, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(path, &text)
}

pub fn parse(path: &Path, text: &str) -> Result<Loaded, String> {
    let file: SpecFile = serde_json::from_str(text)
        .map_err(|e| format!("{}:{}:{}: {}", path.display(), e.line(), e.column(), e))?;
    let omega = ControlRange::new(file.omega[0], file.omega[1]).map_err(|e| anchor(path, text, "omega", e))?;
    let system = SystemSpec::new(
        file.theta,
        LinearField { a: file.a, xi: file.xi },
        InvariantField {
            alpha: file.alpha,
            eta: file.eta,
        },
        omega,
        file.variant,
    )
    .map_err(|e| anchor(path, text, key_for(&e), e))?;
    let n = &file.numerics;
    if let Some(s) = n.step {
        if !(s > 0.0 && s.is_finite()) {
            return Err(anchor(path, text, "step", "must be positive"));
        }
    }
    if let Some(h) = n.horizon {
        if !(h > 0.0 && h.is_finite()) {
            return Err(anchor(path, text, "horizon", "must be positive"));
        }
    }
    if n.budget == Some(0) {
        return Err(anchor(path, text, "budget", "must be positive"));
    }
    if let Some(g) = &n.grid {
        if let Some(b) = &g.bbox {
            box_from_values(b).map_err(|e| anchor(path, text, "box", e))?;
        }
        if matches!(g.resolution, Some(r) if r < 8) {
            return Err(anchor(path, text, "resolution", "must be at least 8"));
        }
    }
    Ok(Loaded { file, system })
}
