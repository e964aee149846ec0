//! Coverings `G(θ) → SE(2)_n` and `G(θ) → Aff(ℝ) × S¹`: projection and
//! lifting of points and trajectories, and whether a drift descends.

use serde::Serialize;

use crate::classify::{classify, ClassificationReport};
use crate::control::{ControlRange, Trajectory};
use crate::error::{Error, Result};
use crate::group::{quotient_map_winding, GroupElement, GroupVariant, QuotientElement};
use crate::kernel2d::{ThetaFamily, Vec2};
use crate::system::{drift_flow, LinearField, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoveringMap {
    pub variant: GroupVariant,
    pub theta: ThetaFamily,
}

impl CoveringMap {
    pub fn new(variant: GroupVariant, theta: ThetaFamily) -> Result<Self> {
        variant.check_theta(theta)?;
        Ok(CoveringMap { variant, theta })
    }

    pub fn project(&self, g: GroupElement) -> Result<QuotientElement> {
        self.project_winding(g).map(|(q, _)| q)
    }

    /// Projection and the deck translation that was removed.
    pub fn project_winding(&self, g: GroupElement) -> Result<(QuotientElement, i64)> {
        quotient_map_winding(g, self.variant, self.theta)
    }

    /// `g · z^k` for the generator `z` of the kernel.
    pub fn deck(&self, g: GroupElement, k: i64) -> GroupElement {
        let Some(p) = self.variant.period() else {
            return g;
        };
        let d = p * k as f64;
        match self.variant {
            GroupVariant::AffCircle => GroupElement::new(g.t, g.v + Vec2::new(0.0, d)),
            _ => GroupElement::new(g.t + d, g.v),
        }
    }

    /// The lift of `q` in sheet `k`.
    pub fn lift(&self, q: &QuotientElement, k: i64) -> Result<GroupElement> {
        if q.variant != self.variant {
            return Err(Error::Hypothesis("quotient element of another group".into()));
        }
        Ok(self.deck(q.rep, k))
    }

    /// Lifts of `q` in the sheets `ks`.
    pub fn fiber(&self, q: &QuotientElement, ks: std::ops::RangeInclusive<i64>) -> Result<Vec<GroupElement>> {
        ks.map(|k| self.lift(q, k)).collect()
    }

    /// Projects every sample, returning the windings alongside.
    pub fn project_trajectory(&self, tr: &Trajectory<GroupElement>) -> Result<(Trajectory<QuotientElement>, Vec<i64>)> {
        let mut windings = Vec::with_capacity(tr.samples.len());
        let mut samples = Vec::with_capacity(tr.samples.len());
        for &(s, g) in &tr.samples {
            let (q, k) = self.project_winding(g)?;
            samples.push((s, q));
            windings.push(k);
        }
        Ok((
            Trajectory {
                samples,
                switch_times: tr.switch_times.clone(),
                control: tr.control.clone(),
            },
            windings,
        ))
    }

    /// Lifts a sampled quotient trajectory continuously, starting at `start`
    /// over its first sample. Consecutive samples must be closer than half
    /// a period in the wrapped coordinate.
    pub fn lift_trajectory(&self, tr: &Trajectory<QuotientElement>, start: GroupElement) -> Result<Trajectory<GroupElement>> {
        let first = tr.start();
        let (q0, k0) = self.project_winding(start)?;
        if q0.dist(&first) > 1e-9 * start.v.max_abs().max(start.t.abs()).max(1.0) {
            return Err(Error::Hypothesis("start does not lie over the first sample".into()));
        }
        let Some(p) = self.variant.period() else {
            return Ok(tr.map(|q| q.rep));
        };
        let wrapped = |g: &GroupElement| match self.variant {
            GroupVariant::AffCircle => g.v.y,
            _ => g.t,
        };
        let mut k = k0;
        let mut prev = wrapped(&first.rep);
        let mut samples = Vec::with_capacity(tr.samples.len());
        for &(s, q) in &tr.samples {
            let x = wrapped(&q.rep);
            if x - prev > 0.5 * p {
                k -= 1;
            } else if prev - x > 0.5 * p {
                k += 1;
            }
            prev = x;
            samples.push((s, self.deck(q.rep, k)));
        }
        Ok(Trajectory {
            samples,
            switch_times: tr.switch_times.clone(),
            control: tr.control.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescendReport {
    pub descends: bool,
    pub reason: String,
}

/// Whether the linear field `drift` on `G(θ)` induces one on the quotient.
pub fn descend_check(variant: GroupVariant, theta: ThetaFamily, drift: &LinearField) -> Result<DescendReport> {
    variant.check_theta(theta)?;
    Ok(match variant {
        GroupVariant::SimplyConnected => DescendReport {
            descends: true,
            reason: "no quotient".into(),
        },
        GroupVariant::SE2n { n } => DescendReport {
            descends: true,
            reason: format!("Lambda_t xi vanishes at t = 2k{n}pi, so the flow fixes the kernel"),
        },
        GroupVariant::AffCircle => {
            let ae2 = drift.a.apply(Vec2::E2);
            let tol = 1e-12 * drift.a.max_abs().max(1.0);
            if ae2.max_abs() <= tol {
                DescendReport {
                    descends: true,
                    reason: "A e2 = 0, so the flow fixes the kernel".into(),
                }
            } else {
                DescendReport {
                    descends: false,
                    reason: format!("A e2 = ({}, {}) moves the kernel", ae2.x, ae2.y),
                }
            }
        }
    })
}

/// Two lifts of one quotient point whose drift images differ below.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonDescentWitness {
    pub base: GroupElement,
    pub translate: GroupElement,
    pub time: f64,
    pub images: [QuotientElement; 2],
    pub gap: f64,
}

/// Flows the identity and its deck translate for time `s` and compares the
/// projections; `None` if they agree.
pub fn non_descent_witness(variant: GroupVariant, theta: ThetaFamily, drift: &LinearField, s: f64) -> Result<Option<NonDescentWitness>> {
    let cover = CoveringMap::new(variant, theta)?;
    let sys = SystemSpec::simple(theta, drift.a, drift.xi, 1.0, Vec2::ZERO, ControlRange::new(-1.0, 1.0)?)?;
    let base = GroupElement::IDENTITY;
    let translate = cover.deck(base, 1);
    let images = [
        cover.project(drift_flow(s, base, &sys))?,
        cover.project(drift_flow(s, translate, &sys))?,
    ];
    let gap = images[0].dist(&images[1]);
    Ok((gap > 1e-9).then_some(NonDescentWitness {
        base,
        translate,
        time: s,
        images,
        gap,
    }))
}

/// Classifications of `sys` and of its lift to the simply connected group.
pub fn lift_classification(sys: &SystemSpec) -> (ClassificationReport, ClassificationReport) {
    (classify(sys), classify(&sys.lifted()))
}
