//! The semidirect product `G(θ) = ℝ ×_ρ ℝ²` and its two quotient groups.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel2d::{ThetaFamily, Vec2};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    pub t: f64,
    pub v: Vec2,
}

impl GroupElement {
    pub const IDENTITY: GroupElement = GroupElement { t: 0.0, v: Vec2::ZERO };

    pub const fn new(t: f64, v: Vec2) -> Self {
        GroupElement { t, v }
    }

    pub fn checked(t: f64, v: Vec2) -> Result<Self> {
        if t.is_finite() && v.is_finite() {
            Ok(GroupElement { t, v })
        } else {
            Err(Error::NonFinite("group element"))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.v.is_finite()
    }

    /// Max-abs distance between coordinates.
    pub fn dist(&self, o: &GroupElement) -> f64 {
        (self.t - o.t).abs().max((self.v - o.v).max_abs())
    }
}

/// `(t₁, v₁)(t₂, v₂) = (t₁ + t₂, v₁ + ρ_{t₁} v₂)`.
pub fn multiply(a: GroupElement, b: GroupElement, f: ThetaFamily) -> GroupElement {
    GroupElement::new(a.t + b.t, a.v + f.rho(a.t).apply(b.v))
}

pub fn inverse(a: GroupElement, f: ThetaFamily) -> GroupElement {
    GroupElement::new(-a.t, -f.rho(-a.t).apply(a.v))
}

/// `g (0, w) g⁻¹`.
pub fn conjugate(g: GroupElement, w: Vec2, f: ThetaFamily) -> GroupElement {
    multiply(multiply(g, GroupElement::new(0.0, w), f), inverse(g, f), f)
}

/// Projection onto `S\G(θ) ≅ ℝ²` for `S = ℝ(1, 0)`: `(t, v) ↦ ρ_{−t} v`.
pub fn project_s(a: GroupElement, f: ThetaFamily) -> Vec2 {
    f.rho(-a.t).apply(a.v)
}

/// Projection onto `H\G(θ)` for `H = ℝ(0, w)`: `(t, v) ↦ (t, ⟨v, Rw⟩)`.
pub fn project_h(a: GroupElement, w: Vec2, _f: ThetaFamily) -> Result<(f64, f64)> {
    if w == Vec2::ZERO {
        return Err(Error::ZeroDirection);
    }
    Ok((a.t, a.v.dot(w.rot90())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GroupVariant {
    SimplyConnected,
    /// `Z_n\G(θ)` with `Z_n = {(2knπ, 0)}`, for θ = R.
    #[serde(rename = "se2n")]
    SE2n { n: u32 },
    /// `G(θ)/Z = Aff(ℝ) × S¹` for θ = diag(1, 0).
    AffCircle,
}

impl GroupVariant {
    pub fn name(&self) -> &'static str {
        match self {
            GroupVariant::SimplyConnected => "simply_connected",
            GroupVariant::SE2n { .. } => "se2n",
            GroupVariant::AffCircle => "aff_circle",
        }
    }

    pub fn check_theta(&self, f: ThetaFamily) -> Result<()> {
        match *self {
            GroupVariant::SimplyConnected => Ok(()),
            GroupVariant::SE2n { n } => {
                if n == 0 {
                    Err(Error::BadCoverIndex(n))
                } else if f == (ThetaFamily::Spiral { gamma: 0.0 }) {
                    Ok(())
                } else {
                    Err(Error::IncompatibleVariant {
                        variant: "se2n",
                        required: "Spiral(0)",
                    })
                }
            }
            GroupVariant::AffCircle => {
                if f == (ThetaFamily::Diagonal { gamma: 0.0 }) {
                    Ok(())
                } else {
                    Err(Error::IncompatibleVariant {
                        variant: "aff_circle",
                        required: "Diagonal(0)",
                    })
                }
            }
        }
    }

    /// Length of the period of the wrapped coordinate, if any.
    pub fn period(&self) -> Option<f64> {
        match *self {
            GroupVariant::SimplyConnected => None,
            GroupVariant::SE2n { n } => Some(2.0 * PI * n as f64),
            GroupVariant::AffCircle => Some(2.0 * PI),
        }
    }
}

/// Reduces `x` into `[0, period)`, returning the reduced value and the
/// number of periods removed.
pub(crate) fn wrap(x: f64, period: f64) -> (f64, i64) {
    let k = (x / period).floor();
    let mut r = x - k * period;
    let mut k = k as i64;
    if r >= period {
        r -= period;
        k += 1;
    }
    if r < 0.0 {
        r += period;
        k -= 1;
    }
    if r >= period {
        r = 0.0;
    }
    (r, k)
}

/// Class of a group element in a quotient, stored through its canonical
/// representative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientElement {
    pub rep: GroupElement,
    pub variant: GroupVariant,
}

impl QuotientElement {
    /// Product of classes, computed on representatives.
    pub fn multiply(&self, other: &QuotientElement, f: ThetaFamily) -> Result<QuotientElement> {
        if self.variant != other.variant {
            return Err(Error::Hypothesis("quotient elements of different groups".into()));
        }
        quotient_map(multiply(self.rep, other.rep, f), self.variant, f)
    }

    /// Distance on the quotient, accounting for the wrapped coordinate.
    pub fn dist(&self, o: &QuotientElement) -> f64 {
        let circ = |a: f64, b: f64, p: f64| {
            let d = (a - b).rem_euclid(p);
            d.min(p - d)
        };
        match self.variant.period() {
            None => self.rep.dist(&o.rep),
            Some(p) => match self.variant {
                GroupVariant::AffCircle => (self.rep.t - o.rep.t)
                    .abs()
                    .max((self.rep.v.x - o.rep.v.x).abs())
                    .max(circ(self.rep.v.y, o.rep.v.y, p)),
                _ => circ(self.rep.t, o.rep.t, p).max((self.rep.v - o.rep.v).max_abs()),
            },
        }
    }
}

/// Canonical projection onto the quotient group and the winding number of
/// the representative that was removed.
pub fn quotient_map_winding(
    a: GroupElement,
    variant: GroupVariant,
    f: ThetaFamily,
) -> Result<(QuotientElement, i64)> {
    variant.check_theta(f)?;
    let (rep, k) = match variant {
        GroupVariant::SimplyConnected => (a, 0),
        GroupVariant::SE2n { .. } => {
            let (t, k) = wrap(a.t, variant.period().unwrap_or(2.0 * PI));
            (GroupElement::new(t, a.v), k)
        }
        GroupVariant::AffCircle => {
            let (y, k) = wrap(a.v.y, 2.0 * PI);
            (GroupElement::new(a.t, Vec2::new(a.v.x, y)), k)
        }
    };
    Ok((QuotientElement { rep, variant }, k))
}

pub fn quotient_map(a: GroupElement, variant: GroupVariant, f: ThetaFamily) -> Result<QuotientElement> {
    quotient_map_winding(a, variant, f).map(|(q, _)| q)
}
