//! Constructive planners: circle hopping for the rotation case, fiber
//! synchronization, the staircase connector on the quotient line, the
//! `H₁/H₂` fiber moves and the monotone separating certificate.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{substeps, ControlRange, PiecewiseControl};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::integrate::rk4_step;
use crate::kernel2d::{ThetaFamily, Vec2};
use crate::planar::{Interval, PlanarSpec};
use crate::system::{field_values, nilrank, normalize_eta, simulate, SystemSpec};

/// A control together with the endpoint it was built for and the endpoint
/// reached by integrating it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanResult<S> {
    pub control: PiecewiseControl,
    pub start: S,
    pub predicted: S,
    pub reached: S,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CircleHopPlan {
    pub forward: PlanResult<Vec2>,
    /// Steers `v(u₀)` back to the start using the complementary arcs.
    pub back: PlanResult<Vec2>,
    pub u1: f64,
    pub u2: f64,
    /// `|v(u₂) − v(u₁)|`
    pub hop_step: f64,
    /// Distance to the active center at the start of each hop, measured on
    /// the integrated path.
    pub hop_radii: Vec<f64>,
}

fn integrate_planar(spec: &PlanarSpec, v0: Vec2, ctrl: &PiecewiseControl) -> (Vec2, Vec<Vec2>) {
    let mut v = v0;
    let mut starts = Vec::with_capacity(ctrl.len());
    for &(s, u) in ctrl.pieces() {
        starts.push(v);
        v = spec.planar_solution(s, v, u);
    }
    (v, starts)
}

/// Counter-rotating angle in `[0, 2π)` carrying `a` onto the ray of `b`
/// when rotating with the sign of `omega`.
fn sweep_angle(a: Vec2, b: Vec2, omega: f64) -> f64 {
    let phi = a.cross(b).atan2(a.dot(b));
    let ang = if omega > 0.0 { phi } else { -phi };
    let r = ang.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Steers `v0` to `v(u0)` in the rotation case `θ = R`, `A = μR`.
///
/// Every constant control `u` turns the plane about `v(u)`, and the centers
/// lie on the line `ℝRη`. After one arc onto that line, half-turns about
/// `v(u₁)` and `v(u₂)` alternate, each shrinking the distance to the far
/// center by `|v(u₂) − v(u₁)|`, until the point lies between the two
/// centers; a final half-turn about the midpoint with `v(u₀)` finishes.
pub fn circle_hop(spec: &PlanarSpec, v0: Vec2, u0: f64, interval: Interval) -> Result<CircleHopPlan> {
    let mu = spec
        .rotation_rate()
        .ok_or_else(|| Error::Hypothesis("circle hopping needs theta = R and A = mu R".into()))?;
    let eta = spec.eta();
    let h = eta.norm();
    if h == 0.0 {
        return Err(Error::Hypothesis("circle hopping needs eta != 0".into()));
    }
    let omega = spec.omega();
    if interval.lo < omega.u_min() || interval.hi > omega.u_max() {
        return Err(Error::Hypothesis("interval leaves the control range".into()));
    }
    if !(interval.hi > interval.lo) {
        return Err(Error::Hypothesis("degenerate interval".into()));
    }
    if interval.contains(mu) {
        return Err(Error::Hypothesis(format!("mu = {mu} lies inside the interval")));
    }
    if !interval.contains(u0) {
        return Err(Error::Hypothesis(format!("u0 = {u0} is not inside the interval")));
    }
    if !v0.is_finite() {
        return Err(Error::NonFinite("start point"));
    }
    let u1 = 0.5 * (interval.lo + u0);
    let u2 = 0.5 * (u0 + interval.hi);
    if !(u1 < u0 && u0 < u2) {
        return Err(Error::Hypothesis("degenerate interval: u1 = u2".into()));
    }
    let dir = eta.rot90().scale(1.0 / h);
    let coord = |u: f64| u * h / (mu - u);
    let inv = |c: f64| c * mu / (h + c);
    let rate = |u: f64| mu - u;
    let (c0, c1, c2) = (coord(u0), coord(u1), coord(u2));
    let target = dir.scale(c0);
    let step = (c2 - c1).abs();
    let (lo, hi) = (c1.min(c2), c1.max(c2));
    let scale = v0.norm().max(c0.abs()).max(1.0);
    let tol = 1e-13 * scale;

    let mut fwd = Vec::new();
    let mut back = Vec::new();
    if (v0 - target).norm() > tol {
        // first arc about v(u2) onto the center line, landing on the side of v(u1)
        let center2 = dir.scale(c2);
        let r0 = (v0 - center2).norm();
        let mut x = c2;
        if r0 > tol {
            x = c2 - (c2 - c1).signum() * r0;
            let ang = sweep_angle(v0 - center2, dir.scale(x - c2), rate(u2));
            if ang > 0.0 {
                fwd.push((ang / rate(u2).abs(), u2));
                back.push(((TAU - ang) / rate(u2).abs(), u2));
            }
        }
        let mut use_first = true;
        let mut hops = 0usize;
        while x < lo - tol || x > hi + tol {
            let (cu, uu) = if use_first { (c1, u1) } else { (c2, u2) };
            x = 2.0 * cu - x;
            let dur = PI / rate(uu).abs();
            fwd.push((dur, uu));
            back.push((dur, uu));
            use_first = !use_first;
            hops += 1;
            if hops > 10_000_000 {
                return Err(Error::Planner("circle hopping did not terminate".into()));
            }
        }
        if (x - c0).abs() > tol {
            let un = inv(0.5 * (x + c0));
            let dur = PI / rate(un).abs();
            fwd.push((dur, un));
            back.push((dur, un));
        }
    }
    back.reverse();
    let fwd = PiecewiseControl::new(fwd)?;
    let back = PiecewiseControl::new(back)?;

    let (reached, starts) = integrate_planar(spec, v0, &fwd);
    let centers: Vec<Vec2> = fwd.pieces().iter().map(|p| dir.scale(coord(p.1))).collect();
    let n_hops = fwd
        .pieces()
        .iter()
        .take_while(|p| p.1 == u1 || p.1 == u2)
        .count();
    let hop_radii = starts
        .iter()
        .zip(&centers)
        .take(n_hops)
        .map(|(s, c)| (*s - *c).norm())
        .collect();
    let (returned, _) = integrate_planar(spec, target, &back);
    Ok(CircleHopPlan {
        forward: PlanResult {
            control: fwd,
            start: v0,
            predicted: target,
            reached,
            error: (reached - target).norm(),
        },
        back: PlanResult {
            control: back,
            start: target,
            predicted: v0,
            reached: returned,
            error: (returned - v0).norm(),
        },
        u1,
        u2,
        hop_step: step,
        hop_radii,
    })
}

/// Produces planar controls joining two points of a control set.
pub trait PlanarConnector {
    fn connect(&self, from: Vec2, to: Vec2) -> Result<PiecewiseControl>;
}

/// Connects through the hub `v(hub)` with circle hopping.
#[derive(Clone, Copy, Debug)]
pub struct CircleHopConnector {
    pub spec: PlanarSpec,
    pub interval: Interval,
    pub hub: f64,
}

impl PlanarConnector for CircleHopConnector {
    fn connect(&self, from: Vec2, to: Vec2) -> Result<PiecewiseControl> {
        if (from - to).norm() <= 1e-14 * from.norm().max(1.0) {
            return Ok(PiecewiseControl::empty());
        }
        let mut c = circle_hop(&self.spec, from, self.hub, self.interval)?.forward.control;
        let back = circle_hop(&self.spec, to, self.hub, self.interval)?.back.control;
        c.extend(&back);
        Ok(c)
    }
}

/// Integrates the product system `ṫ = u, v̇ = A(u)v + uη`.
pub fn integrate_product(spec: &PlanarSpec, p: (f64, Vec2), ctrl: &PiecewiseControl) -> (f64, Vec2) {
    let (mut t, mut v) = p;
    for &(s, u) in ctrl.pieces() {
        t += s * u;
        v = spec.planar_solution(s, v, u);
    }
    (t, v)
}

/// Steers `p1` to `p2` in the product system `ṫ = u, v̇ = A(u)v + uη`
/// (controls in planar units): planar connections through `v(u1)` and
/// `v(u2)`, with a dwell at one of these equilibria to fix the `t`
/// coordinate.
pub fn fiber_sync(
    spec: &PlanarSpec,
    conn: &dyn PlanarConnector,
    p1: (f64, Vec2),
    p2: (f64, Vec2),
    u1: f64,
    u2: f64,
) -> Result<PlanResult<(f64, Vec2)>> {
    if !(u1 < 0.0 && 0.0 < u2) {
        return Err(Error::Hypothesis(format!("need u1 < 0 < u2, got {u1}, {u2}")));
    }
    let omega = spec.omega();
    omega.check(u1)?;
    omega.check(u2)?;
    let e1 = spec.equilibrium(u1)?;
    let e2 = spec.equilibrium(u2)?;
    let scale = p1.1.norm().max(p2.1.norm()).max(1.0);
    let same = |a: Vec2, b: Vec2| (a - b).norm() <= 1e-14 * scale;

    let mut ctrl = PiecewiseControl::empty();
    let dt = p2.0 - p1.0;
    if same(p1.1, p2.1) && dt.abs() <= 1e-14 * p1.0.abs().max(1.0) {
        // already there
    } else if same(p1.1, p2.1) && same(p1.1, e2) && dt > 0.0 {
        ctrl.push(dt / u2, u2)?;
    } else if same(p1.1, p2.1) && same(p1.1, e1) && dt < 0.0 {
        ctrl.push(dt / u1, u1)?;
    } else {
        let leg1 = conn.connect(p1.1, e1)?;
        let leg2 = conn.connect(e1, e2)?;
        let leg3 = conn.connect(e2, p2.1)?;
        let t_mid = p1.0 + leg1.integral() + leg2.integral();
        let gap = p2.0 - t_mid - leg3.integral();
        ctrl.extend(&leg1);
        if gap < 0.0 {
            ctrl.push(gap / u1, u1)?;
            ctrl.extend(&leg2);
        } else {
            ctrl.extend(&leg2);
            ctrl.push(gap / u2, u2)?;
        }
        ctrl.extend(&leg3);
    }
    let reached = integrate_product(spec, p1, &ctrl);
    let error = (reached.0 - p2.0).abs().max((reached.1 - p2.1).norm());
    Ok(PlanResult {
        control: ctrl,
        start: p1,
        predicted: p2,
        reached,
        error,
    })
}

/// The line system `ṫ = uα, ẋ = c e^{γt} sin t` obtained by projecting a
/// nilrank-0 spiral system along `ℝ(0, θ⁻¹ξ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpiralQuotient {
    pub gamma: f64,
    pub alpha: f64,
    pub c: f64,
    pub omega: ControlRange,
}

pub const STAIR_LOW: f64 = -FRAC_PI_4;
pub const STAIR_HIGH: f64 = FRAC_PI_4;

impl SpiralQuotient {
    pub fn new(gamma: f64, alpha: f64, c: f64, omega: ControlRange) -> Result<Self> {
        if !(gamma.is_finite() && gamma != 0.0) {
            return Err(Error::Hypothesis("staircase needs gamma != 0".into()));
        }
        if !(alpha.is_finite() && alpha != 0.0) {
            return Err(Error::ZeroAlpha);
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Hypothesis("staircase needs c > 0".into()));
        }
        Ok(SpiralQuotient { gamma, alpha, c, omega })
    }

    /// The projected system of `sys` (nilrank 0, θ = Spiral(γ ≠ 0)).
    pub fn of_system(sys: &SystemSpec) -> Result<Self> {
        let gamma = match sys.theta() {
            ThetaFamily::Spiral { gamma } if gamma != 0.0 => gamma,
            _ => return Err(Error::Hypothesis("needs theta = Spiral(gamma != 0)".into())),
        };
        if nilrank(sys) != 0 {
            return Err(Error::Nilrank {
                found: nilrank(sys),
                required: "0",
            });
        }
        let q = Self::fiber(sys)?;
        SpiralQuotient::new(gamma, sys.alpha(), q.norm_sq(), sys.omega())
    }

    /// The fiber direction `θ⁻¹ξ`.
    pub fn fiber(sys: &SystemSpec) -> Result<Vec2> {
        let q = sys
            .theta()
            .matrix()
            .solve(sys.xi())
            .ok_or_else(|| Error::Hypothesis("theta is singular".into()))?;
        if q == Vec2::ZERO {
            return Err(Error::Hypothesis("xi = 0".into()));
        }
        Ok(q)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.c * (self.gamma * t).exp() * t.sin()
    }

    fn antiderivative(&self, t: f64) -> f64 {
        let g = self.gamma;
        (g * t).exp() * (g * t.sin() - t.cos()) / (g * g + 1.0)
    }

    /// Controls moving `t` down and up at the largest admissible speed.
    fn bang(&self) -> (f64, f64) {
        let (lo, hi) = (self.omega.u_min(), self.omega.u_max());
        if self.alpha > 0.0 {
            (lo, hi)
        } else {
            (hi, lo)
        }
    }

    /// Change in `x` while `t` moves from `ta` to `tb` under control `u`.
    fn sweep(&self, ta: f64, tb: f64, u: f64) -> f64 {
        self.c / (u * self.alpha) * (self.antiderivative(tb) - self.antiderivative(ta))
    }

    fn legs(&self, x: f64, y: f64, z1: f64, ctrl: &mut PiecewiseControl) -> Result<()> {
        let (dn, up) = self.bang();
        let (t1, t2) = (STAIR_LOW, STAIR_HIGH);
        let x1 = x + self.sweep(0.0, t1, dn);
        let z2 = z1 + self.sweep(t1, t2, up);
        let y2 = y - self.sweep(t2, 0.0, dn);
        let (r1, r2) = (self.rate(t1), self.rate(t2));
        ctrl.push(t1 / (dn * self.alpha), dn)?;
        ctrl.push((z1 - x1) / r1, 0.0)?;
        ctrl.push((t2 - t1) / (up * self.alpha), up)?;
        ctrl.push((y2 - z2) / r2, 0.0)?;
        ctrl.push(-t2 / (dn * self.alpha), dn)?;
        Ok(())
    }

    fn low_level(&self, starts: &[f64], ends: &[f64]) -> f64 {
        let (dn, up) = self.bang();
        let (t1, t2) = (STAIR_LOW, STAIR_HIGH);
        let d12 = self.sweep(t1, t2, up);
        let mut z = f64::INFINITY;
        for &x in starts {
            z = z.min(x + self.sweep(0.0, t1, dn));
        }
        for &y in ends {
            z = z.min(y - self.sweep(t2, 0.0, dn) - d12);
        }
        z - 1.0
    }

    /// Five legs from `(0, x)` to `(0, y)`.
    pub fn connect(&self, x: f64, y: f64, step: f64) -> Result<PlanResult<(f64, f64)>> {
        let z1 = self.low_level(&[x], &[y]);
        let mut ctrl = PiecewiseControl::empty();
        self.legs(x, y, z1, &mut ctrl)?;
        self.finish(ctrl, (0.0, x), (0.0, y), step)
    }

    /// Ten legs `(0, x) → (0, y) → (0, x)` sharing the dwell levels.
    pub fn closed_loop(&self, x: f64, y: f64, step: f64) -> Result<PlanResult<(f64, f64)>> {
        let z1 = self.low_level(&[x, y], &[x, y]);
        let mut ctrl = PiecewiseControl::empty();
        self.legs(x, y, z1, &mut ctrl)?;
        self.legs(y, x, z1, &mut ctrl)?;
        self.finish(ctrl, (0.0, x), (0.0, x), step)
    }

    fn finish(&self, ctrl: PiecewiseControl, start: (f64, f64), goal: (f64, f64), step: f64) -> Result<PlanResult<(f64, f64)>> {
        ctrl.check_range(&self.omega)?;
        let path = self.integrate(start, &ctrl, step)?;
        let reached = path[path.len() - 1];
        Ok(PlanResult {
            control: ctrl,
            start,
            predicted: goal,
            reached,
            error: (reached.0 - goal.0).abs().max((reached.1 - goal.1).abs()),
        })
    }

    /// Fourth-order integration of the line system; returns every sample.
    pub fn integrate(&self, start: (f64, f64), ctrl: &PiecewiseControl, step: f64) -> Result<Vec<(f64, f64)>> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::BadStep(step));
        }
        let mut y = [start.0, start.1];
        let mut out = vec![start];
        for &(d, u) in ctrl.pieces() {
            let f = |y: &[f64; 2]| [u * self.alpha, self.rate(y[0])];
            let (n, h) = substeps(d, step);
            for _ in 0..n {
                y = rk4_step(&f, &y, h);
                out.push((y[0], y[1]));
            }
        }
        Ok(out)
    }
}

/// Closed staircase loop `(0, x) → (0, y) → (0, x)`.
pub fn staircase(gamma: f64, alpha: f64, c: f64, x: f64, y: f64, omega: ControlRange) -> Result<PlanResult<(f64, f64)>> {
    SpiralQuotient::new(gamma, alpha, c, omega)?.closed_loop(x, y, 1e-3)
}

/// `(H₁(s), H₂(s))`: coordinates along `(q, Rq)` reached from `(0, s₀q)`
/// by the control `ρ/α` for time `s` followed by `−ρ/α` for time `s`.
pub fn h_functions(rho: f64, gamma: f64, s0: f64, s: f64) -> Result<(f64, f64)> {
    if rho == 0.0 || !rho.is_finite() {
        return Err(Error::Hypothesis("rho must be nonzero".into()));
    }
    let g2 = gamma * gamma + 1.0;
    let tau = rho * s;
    let e = (gamma * tau).exp();
    let k = 2.0 / (rho * g2);
    let h1 = k * (e * (gamma * tau.cos() + tau.sin()) - gamma - s * rho * g2) + s0;
    let h2 = k * (e * (gamma * tau.sin() - tau.cos()) + 1.0);
    Ok((h1, h2))
}

/// Bracket of `h2_zero` in `s`, as `(lo, hi, hatted)`.
pub fn h2_bracket(rho: f64, gamma: f64, s0: f64, k: i64) -> Result<(f64, f64, bool)> {
    if !((gamma * k as f64) > 0.0) {
        return Err(Error::Hypothesis(format!("need gamma * k > 0, got gamma = {gamma}, k = {k}")));
    }
    if !(rho * gamma > 0.0) {
        return Err(Error::Hypothesis("rho must have the sign of gamma".into()));
    }
    let eps = 1e-3;
    let kk = k as f64;
    let hatted = s0 * gamma > 0.0 || (s0 == 0.0 && gamma > 0.0);
    let (a, b) = if hatted {
        (PI + TAU * kk + eps, TAU * (kk + 1.0) - eps)
    } else {
        (TAU * kk + eps, PI + TAU * kk - eps)
    };
    let (sa, sb) = (a / rho, b / rho);
    Ok((sa.min(sb), sa.max(sb), hatted))
}

/// A zero of `H₂` in `I_k` or `Î_k`, picked by the signs of `s₀` and `γ`.
pub fn h2_zero(rho: f64, gamma: f64, s0: f64, k: i64) -> Result<f64> {
    let (mut lo, mut hi, _) = h2_bracket(rho, gamma, s0, k)?;
    let f = |s: f64| h_functions(rho, gamma, s0, s).map(|h| h.1);
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let (fl, fh) = (f(lo)?.abs(), f(hi)?.abs());
    Ok(if fl <= fh { lo } else { hi })
}

/// Outcome of steering a spiral system back onto the fiber `ℝ(0, q)`,
/// `q = θ⁻¹ξ`, and then along it with the `H₁/H₂` move.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiberReturn {
    pub control: PiecewiseControl,
    pub after_excursion: GroupElement,
    pub on_fiber: GroupElement,
    pub reached: GroupElement,
    pub q: Vec2,
    pub s0: f64,
    pub rho: f64,
    pub k: i64,
    pub s: f64,
    pub h1: f64,
    /// `max(|t|, |⟨v, Rq⟩| / |q|)` at the end, in `η = 0` coordinates.
    pub fiber_error: f64,
    /// `|⟨v, q⟩ / |q|² − H₁(S)|` at the end.
    pub h1_error: f64,
}

/// Runs `excursion` from the identity, returns `t` to 0, closes the quotient
/// coordinate with the staircase and finishes with the two-piece fiber move
/// `(S, ρ/α), (S, −ρ/α)`. Everything is integrated on the original system.
pub fn spiral_fiber_return(sys: &SystemSpec, excursion: &PiecewiseControl, step: f64) -> Result<FiberReturn> {
    let (norm, shift) = normalize_eta(sys)?;
    let sq = SpiralQuotient::of_system(&norm)?;
    let q = SpiralQuotient::fiber(&norm)?;
    let omega = sys.omega();
    if !(omega.u_min() < 0.0 && omega.u_max() > 0.0) {
        return Err(Error::Hypothesis("needs 0 inside the control range".into()));
    }
    excursion.check_range(&omega)?;
    let alpha = sys.alpha();
    let gamma = sq.gamma;
    let rq = q.rot90();
    let qn = q.norm();

    let mut ctrl = excursion.clone();
    let after_excursion = simulate(GroupElement::IDENTITY, &ctrl, sys, step)?.end();
    let (dn, up) = sq.bang();
    let t1 = after_excursion.t;
    if t1 > 0.0 {
        ctrl.push(-t1 / (dn * alpha), dn)?;
    } else if t1 < 0.0 {
        ctrl.push(-t1 / (up * alpha), up)?;
    }
    let level = simulate(GroupElement::IDENTITY, &ctrl, sys, step)?.end();
    let x = shift.forward(level).v.dot(rq);
    let stair = sq.connect(x, 0.0, step)?;
    ctrl.extend(&stair.control);
    let on_fiber = simulate(GroupElement::IDENTITY, &ctrl, sys, step)?.end();
    let s0 = shift.forward(on_fiber).v.dot(q) / q.norm_sq();

    let rho = gamma.signum() * alpha.abs() * omega.u_max().min(-omega.u_min());
    let hatted = s0 * gamma > 0.0 || (s0 == 0.0 && gamma > 0.0);
    let k = if gamma > 0.0 {
        1
    } else if hatted {
        -2
    } else {
        -1
    };
    let s = h2_zero(rho, gamma, s0, k)?;
    ctrl.push(s, rho / alpha)?;
    ctrl.push(s, -rho / alpha)?;
    let reached = simulate(GroupElement::IDENTITY, &ctrl, sys, step)?.end();
    let h1 = h_functions(rho, gamma, s0, s)?.0;
    let end = shift.forward(reached);
    Ok(FiberReturn {
        control: ctrl,
        after_excursion,
        on_fiber,
        reached,
        q,
        s0,
        rho,
        k,
        s,
        h1,
        fiber_error: end.t.abs().max(end.v.dot(rq).abs() / qn),
        h1_error: (end.v.dot(q) / q.norm_sq() - h1).abs(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiHatCase {
    Diagonal,
    DiagonalZero,
    Jordan,
    Rotation,
}

/// The separating covector `ξ̂` and its rate function
/// `g(t) = ⟨Λ^θ_t ξ, ξ̂⟩ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiHat {
    pub xi_hat: Vec2,
    pub case: XiHatCase,
    gamma: f64,
    xi_sq: f64,
}

impl XiHat {
    pub fn g(&self, t: f64) -> f64 {
        match self.case {
            XiHatCase::Diagonal => {
                let g = self.gamma;
                g.abs() * t.exp_m1() - g.signum() * (g * t).exp_m1()
            }
            XiHatCase::DiagonalZero => t.exp_m1() - t,
            XiHatCase::Jordan => t * t.exp() - t.exp_m1(),
            XiHatCase::Rotation => self.xi_sq * (1.0 - t.cos()),
        }
    }
}

pub fn xi_hat(theta: ThetaFamily, xi: Vec2) -> Result<XiHat> {
    let th = theta.matrix();
    let p = th.apply(xi).dot(xi.rot90());
    if !(p.abs() > 1e-12 * th.max_abs() * xi.norm_sq()) {
        return Err(Error::Hypothesis("<theta xi, R xi> = 0".into()));
    }
    let (xi_hat, case, gamma) = match theta {
        ThetaFamily::Spiral { gamma } if gamma != 0.0 => {
            return Err(Error::Hypothesis("no separating covector for Spiral(gamma != 0)".into()))
        }
        ThetaFamily::Spiral { .. } => (Vec2::new(-xi.y, xi.x), XiHatCase::Rotation, 0.0),
        ThetaFamily::Jordan => (
            Vec2::new(1.0 / xi.y, -xi.x / (xi.y * xi.y)),
            XiHatCase::Jordan,
            1.0,
        ),
        ThetaFamily::Diagonal { gamma } if gamma == 0.0 => {
            (Vec2::new(1.0 / xi.x, -1.0 / xi.y), XiHatCase::DiagonalZero, 0.0)
        }
        ThetaFamily::Diagonal { gamma } => (
            Vec2::new(gamma.abs() / xi.x, -gamma.abs() / xi.y),
            XiHatCase::Diagonal,
            gamma,
        ),
    };
    Ok(XiHat {
        xi_hat,
        case,
        gamma,
        xi_sq: xi.norm_sq(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparatingCertificate {
    pub xi_hat: Vec2,
    pub case: XiHatCase,
    /// `(t, g(t))` on a uniform grid of `[−10, 10]`.
    pub g_table: Vec<[f64; 2]>,
    pub min_g: f64,
    pub min_g_at: f64,
    /// Smallest sampled `d/ds ⟨v − α⁻¹Λ_t η, ξ̂⟩` along trajectories.
    pub min_rate: f64,
    /// Smallest change of `⟨v − α⁻¹Λ_t η, ξ̂⟩` between consecutive samples.
    pub min_increment: f64,
    pub samples: usize,
    pub holds: bool,
}

pub const CERT_TOL: f64 = 1e-12;

/// Certifies that `⟨v − α⁻¹Λ_t η, ξ̂⟩` never decreases along solutions, so
/// distinct level planes cannot share a control set.
pub fn monotone_certificate(sys: &SystemSpec, samples: usize, seed: u64) -> Result<SeparatingCertificate> {
    let r = nilrank(sys);
    if r != 0 {
        return Err(Error::Nilrank { found: r, required: "0" });
    }
    let alpha = sys.alpha();
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    let theta = sys.theta();
    let xh = xi_hat(theta, sys.xi())?;
    let n = 2001;
    let mut g_table = Vec::with_capacity(n);
    let (mut min_g, mut min_g_at) = (f64::INFINITY, 0.0);
    for i in 0..n {
        let t = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
        let g = xh.g(t);
        if g < min_g {
            min_g = g;
            min_g_at = t;
        }
        g_table.push([t, g]);
    }

    let eta = sys.eta();
    let level = |g: &GroupElement| (g.v - theta.lambda(g.t, eta).scale(1.0 / alpha)).dot(xh.xi_hat);
    let omega = sys.omega();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_path = 10;
    let paths = samples.div_ceil(per_path).max(1);
    let (mut min_rate, mut min_inc) = (f64::INFINITY, f64::INFINITY);
    let mut taken = 0;
    for _ in 0..paths {
        let start = GroupElement::new(
            rng.gen_range(-3.0..3.0),
            Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
        );
        let mut pieces = Vec::new();
        for _ in 0..3 {
            pieces.push((rng.gen_range(0.05..1.0), rng.gen_range(omega.u_min()..=omega.u_max())));
        }
        let ctrl = PiecewiseControl::new(pieces)?;
        let tr = simulate(start, &ctrl, sys, 1e-2)?;
        for w in tr.samples.windows(2) {
            min_inc = min_inc.min(level(&w[1].1) - level(&w[0].1));
        }
        for _ in 0..per_path {
            let (_, g) = tr.samples[rng.gen_range(0..tr.samples.len())];
            let u = rng.gen_range(omega.u_min()..=omega.u_max());
            let (_, dv) = field_values(g, u, sys)?;
            let rate = (dv - theta.rho(g.t).apply(eta).scale(u)).dot(xh.xi_hat);
            min_rate = min_rate.min(rate);
            taken += 1;
        }
    }
    let holds = min_g >= -CERT_TOL && min_rate >= -CERT_TOL && min_inc >= -1e-9;
    Ok(SeparatingCertificate {
        xi_hat: xh.xi_hat,
        case: xh.case,
        g_table,
        min_g,
        min_g_at,
        min_rate,
        min_increment: min_inc,
        samples: taken,
        holds,
    })
}
