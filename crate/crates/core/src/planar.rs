//! The planar control-affine system `v̇ = (A − uθ)v + uη`.

use serde::{Deserialize, Serialize};

use crate::control::{ControlRange, PiecewiseControl};
use crate::error::{Error, Result};
use crate::kernel2d::{expm, lambda_op, Mat2, ThetaFamily, Vec2};
use crate::system::{check_invertible, RANK_TOL};

/// Half-width of the band around each root of `det A(u)` that is treated as
/// singular.
pub const ROOT_BAND: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlanarSpec {
    a: Mat2,
    theta: ThetaFamily,
    eta: Vec2,
    omega: ControlRange,
}

/// An open interval `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, u: f64) -> bool {
        self.lo < u && u < self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `int Ω` minus the real roots of `det A(u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaHat {
    pub intervals: Vec<Interval>,
    pub roots: Vec<f64>,
    /// The component containing 0.
    pub i0: Interval,
}

impl OmegaHat {
    pub fn contains(&self, u: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(u)) && self.roots.iter().all(|r| (u - r).abs() > ROOT_BAND)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpennessCertificate {
    pub value: f64,
    /// `det(I − e^{sA(u)})`
    pub det_factor: f64,
    /// `⟨e^{sA(u)} v′(u), R v′(u)⟩`
    pub rotation_factor: f64,
    pub nonzero: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum PlanarVerdict {
    Open,
    Closed,
    WholePlane,
    Unclassified { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarClassification {
    pub verdict: PlanarVerdict,
    pub interval: Interval,
    /// `tr A(u)` at the interval endpoints.
    pub trace_lo: f64,
    pub trace_hi: f64,
    /// Zero of `u ↦ tr A(u)` inside the interval, if any.
    pub trace_root: Option<f64>,
    /// `det A(u)` at the interval midpoint.
    pub det_mid: f64,
}

impl PlanarSpec {
    pub fn new(a: Mat2, theta: ThetaFamily, eta: Vec2, omega: ControlRange) -> Result<Self> {
        theta.validate()?;
        if !a.is_finite() || !eta.is_finite() {
            return Err(Error::NonFinite("planar system"));
        }
        let th = theta.matrix();
        let res = a.commutator(&th).max_abs();
        if res > 1e-12 * (a.max_abs() * th.max_abs()).max(1.0) {
            return Err(Error::NonCommuting(res));
        }
        check_invertible(&a)?;
        Ok(PlanarSpec { a, theta, eta, omega })
    }

    pub fn a(&self) -> Mat2 {
        self.a
    }
    pub fn theta(&self) -> ThetaFamily {
        self.theta
    }
    pub fn eta(&self) -> Vec2 {
        self.eta
    }
    pub fn omega(&self) -> ControlRange {
        self.omega
    }

    /// `A(u) = A − uθ`.
    pub fn a_of_u(&self, u: f64) -> Mat2 {
        self.a - self.theta.matrix().scale(u)
    }

    /// Coefficients `(c₂, c₁, c₀)` of `det A(u) = c₂u² + c₁u + c₀`.
    pub fn det_quadratic(&self) -> (f64, f64, f64) {
        let a = self.a;
        let t = self.theta.matrix();
        let mixed = a.a * t.d + a.d * t.a - a.b * t.c - a.c * t.b;
        (t.det(), -mixed, a.det())
    }

    fn det_scale(&self, u: f64) -> f64 {
        let m = self.a.max_abs() + u.abs() * self.theta.matrix().max_abs();
        (m * m).max(1.0)
    }

    fn nonsingular(&self, u: f64) -> Result<Mat2> {
        let m = self.a_of_u(u);
        if m.det().abs() <= RANK_TOL * self.det_scale(u) {
            Err(Error::SingularAu(u))
        } else {
            Ok(m)
        }
    }

    /// `v(u) = −u A(u)⁻¹ η`.
    pub fn equilibrium(&self, u: f64) -> Result<Vec2> {
        let m = self.nonsingular(u)?;
        m.solve(self.eta.scale(-u)).ok_or(Error::SingularAu(u))
    }

    /// `v′(u) = −A(u)⁻¹ (η − θ v(u))`.
    pub fn equilibrium_derivative(&self, u: f64) -> Result<Vec2> {
        let m = self.nonsingular(u)?;
        let v = m.solve(self.eta.scale(-u)).ok_or(Error::SingularAu(u))?;
        let rhs = self.eta - self.theta.matrix().apply(v);
        m.solve(-rhs).ok_or(Error::SingularAu(u))
    }

    /// Real roots of `det A(u)` (any location), ascending.
    pub fn det_roots(&self) -> Vec<f64> {
        let (c2, c1, c0) = self.det_quadratic();
        let scale = c2.abs().max(c1.abs()).max(c0.abs());
        let mut roots = Vec::new();
        if c2.abs() <= 1e-14 * scale {
            if c1.abs() > 1e-14 * scale {
                roots.push(-c0 / c1);
            }
        } else {
            let disc = c1 * c1 - 4.0 * c2 * c0;
            if disc < 0.0 {
                // a touching parabola may come out slightly negative
                let vertex = -c1 / (2.0 * c2);
                let qv = c0 - c1 * c1 / (4.0 * c2);
                if qv.abs() <= 1e-10 * scale {
                    roots.push(vertex);
                }
            } else {
                let sq = disc.sqrt();
                let q = -0.5 * (c1 + c1.signum() * sq);
                if q == 0.0 {
                    roots.push(0.0);
                } else {
                    roots.push(q / c2);
                    roots.push(c0 / q);
                }
            }
        }
        roots.sort_by(|a, b| a.total_cmp(b));
        roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
        roots
    }

    pub fn omega_hat(&self) -> OmegaHat {
        let (lo, hi) = (self.omega.u_min(), self.omega.u_max());
        let roots: Vec<f64> = self.det_roots().into_iter().filter(|r| lo < *r && *r < hi).collect();
        let mut cuts = vec![lo];
        cuts.extend(roots.iter().copied());
        cuts.push(hi);
        let intervals: Vec<Interval> = cuts
            .windows(2)
            .map(|w| Interval { lo: w[0], hi: w[1] })
            .filter(|i| i.hi > i.lo)
            .collect();
        let i0 = intervals
            .iter()
            .copied()
            .find(|i| i.contains(0.0))
            .unwrap_or(Interval { lo: 0.0, hi: 0.0 });
        OmegaHat { intervals, roots, i0 }
    }

    /// Solution at time `s` from `v0` under the constant control `u`.
    pub fn planar_solution(&self, s: f64, v0: Vec2, u: f64) -> Vec2 {
        let m = self.a_of_u(u);
        let e = expm(&m, s);
        if m.det().abs() > 1e-8 * self.det_scale(u) {
            if let Some(c) = m.solve(self.eta.scale(-u)) {
                return e.apply(v0 - c) + c;
            }
        }
        e.apply(v0) + lambda_op(&m, s, self.eta.scale(u))
    }

    /// Final state of a concatenation and its linear part `e^{Σ sᵢA(uᵢ)}`.
    pub fn concat_solution(&self, v0: Vec2, ctrl: &PiecewiseControl) -> (Vec2, Mat2) {
        let mut v = v0;
        for &(s, u) in ctrl.pieces() {
            v = self.planar_solution(s, v, u);
        }
        let tau = ctrl.total_duration();
        let lin = expm(&(self.a.scale(tau) - self.theta.matrix().scale(ctrl.integral())), 1.0);
        (v, lin)
    }

    /// `det(I − e^{sA(u)}) ⟨e^{sA(u)} v′(u), R v′(u)⟩`.
    pub fn openness_certificate(&self, u: f64, s: f64) -> Result<OpennessCertificate> {
        let m = self.nonsingular(u)?;
        let vp = self.equilibrium_derivative(u)?;
        let e = expm(&m, s);
        let det_factor = (Mat2::IDENTITY - e).det();
        let rotation_factor = e.apply(vp).dot(vp.rot90());
        let rot_tol = 1e-12 * e.max_abs() * vp.norm_sq();
        let det_tol = 1e-14 * (1.0 + e.max_abs()).powi(2);
        Ok(OpennessCertificate {
            value: det_factor * rotation_factor,
            det_factor,
            rotation_factor,
            nonzero: det_factor.abs() > det_tol && rotation_factor.abs() > rot_tol,
        })
    }

    /// Root of `⟨A(u)η, Rη⟩ = 0`, regardless of where it lies.
    pub fn exceptional_root(&self) -> Result<Option<f64>> {
        let reta = self.eta.rot90();
        let n2 = self.eta.norm_sq();
        let th = self.theta.matrix();
        let pa = self.a.apply(self.eta).dot(reta);
        let pt = th.apply(self.eta).dot(reta);
        let pa_zero = pa.abs() <= 1e-12 * self.a.max_abs() * n2;
        let pt_zero = pt.abs() <= 1e-12 * th.max_abs() * n2;
        match (pa_zero, pt_zero) {
            (true, true) => Err(Error::LarcViolated(
                "eta is a common eigenvector of A and theta".into(),
            )),
            (_, true) => Ok(None),
            (true, false) => Ok(Some(0.0)),
            (false, false) => Ok(Some(pa / pt)),
        }
    }

    /// The control at which the openness certificate degenerates, when it
    /// lies in Ω̂.
    pub fn exceptional_control(&self) -> Result<Option<f64>> {
        let root = self.exceptional_root()?;
        let oh = self.omega_hat();
        Ok(root.filter(|u| oh.contains(*u)))
    }

    /// Verdict on the control set attached to `interval` (default `I₀`) from
    /// the sign pattern of `tr A(u)`.
    pub fn classify_planar(&self, interval: Option<Interval>) -> Result<PlanarClassification> {
        let oh = self.omega_hat();
        let iv = interval.unwrap_or(oh.i0);
        if !(iv.hi > iv.lo) {
            return Err(Error::Hypothesis(format!("empty interval ({}, {})", iv.lo, iv.hi)));
        }
        if iv.lo < self.omega.u_min() || iv.hi > self.omega.u_max() {
            return Err(Error::Hypothesis(format!(
                "interval ({}, {}) leaves the control range",
                iv.lo, iv.hi
            )));
        }
        if let Some(r) = self.det_roots().into_iter().find(|r| iv.contains(*r)) {
            return Err(Error::SingularAu(r));
        }
        let tr_a = self.a.trace();
        let tr_t = self.theta.matrix().trace();
        let trace = |u: f64| tr_a - u * tr_t;
        let det_mid = self.a_of_u(iv.mid()).det();
        let scale = self.a.max_abs().max(1.0);
        let trace_root = if tr_t.abs() > 1e-12 {
            let r = tr_a / tr_t;
            iv.contains(r).then_some(r)
        } else if tr_a.abs() <= 1e-12 * scale {
            Some(iv.mid())
        } else {
            None
        };
        let verdict = if det_mid <= 0.0 {
            PlanarVerdict::Unclassified {
                reason: "detNegative".into(),
            }
        } else if trace_root.is_some() {
            PlanarVerdict::WholePlane
        } else if trace(iv.mid()) > 0.0 {
            PlanarVerdict::Open
        } else {
            PlanarVerdict::Closed
        };
        Ok(PlanarClassification {
            verdict,
            interval: iv,
            trace_lo: trace(iv.lo),
            trace_hi: trace(iv.hi),
            trace_root,
            det_mid,
        })
    }

    /// Whether this is the rotation case `θ = R`, `A = μR`; returns `μ`.
    pub fn rotation_rate(&self) -> Option<f64> {
        let a = self.a;
        let tol = 1e-12 * a.max_abs().max(1.0);
        if self.theta.is_rotation() && a.a.abs() <= tol && a.d.abs() <= tol && (a.b + a.c).abs() <= tol {
            Some(a.c)
        } else {
            None
        }
    }
}
