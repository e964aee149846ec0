//! Linear control systems `ṫ = uα, v̇ = Av + Λ^θ_t ξ + uρ_t η` on `G(θ)`.

use serde::{Deserialize, Serialize};

use crate::control::{substeps, ControlRange, PiecewiseControl, Trajectory};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupVariant};
use crate::integrate::rk4_step;
use crate::kernel2d::{expm, lambda_op, Mat2, ThetaFamily, Vec2};
use crate::planar::PlanarSpec;

/// Relative threshold for ranks and determinants.
pub const RANK_TOL: f64 = 1e-10;
/// Relative threshold for the rank-condition inner products.
pub const PRODUCT_TOL: f64 = 1e-12;

fn commutator_residual(a: &Mat2, theta: ThetaFamily) -> Result<()> {
    let th = theta.matrix();
    let res = a.commutator(&th).max_abs();
    if res > 1e-12 * (a.max_abs() * th.max_abs()).max(1.0) {
        Err(Error::NonCommuting(res))
    } else {
        Ok(())
    }
}

/// The drift `𝒳(t, v) = (0, Av + Λ^θ_t ξ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearField {
    pub a: Mat2,
    pub xi: Vec2,
}

impl LinearField {
    pub fn new(a: Mat2, xi: Vec2, theta: ThetaFamily) -> Result<Self> {
        if !a.is_finite() || !xi.is_finite() {
            return Err(Error::NonFinite("linear field"));
        }
        commutator_residual(&a, theta)?;
        Ok(LinearField { a, xi })
    }
}

/// The input `Y(t, v) = (α, ρ_t η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantField {
    pub alpha: f64,
    pub eta: Vec2,
}

impl InvariantField {
    pub fn new(alpha: f64, eta: Vec2) -> Result<Self> {
        if !alpha.is_finite() || !eta.is_finite() {
            return Err(Error::NonFinite("invariant field"));
        }
        Ok(InvariantField { alpha, eta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SystemSpec {
    theta: ThetaFamily,
    drift: LinearField,
    input: InvariantField,
    omega: ControlRange,
    variant: GroupVariant,
}

impl SystemSpec {
    pub fn new(
        theta: ThetaFamily,
        drift: LinearField,
        input: InvariantField,
        omega: ControlRange,
        variant: GroupVariant,
    ) -> Result<Self> {
        theta.validate()?;
        let drift = LinearField::new(drift.a, drift.xi, theta)?;
        let input = InvariantField::new(input.alpha, input.eta)?;
        variant.check_theta(theta)?;
        if variant == GroupVariant::AffCircle {
            let ae2 = drift.a.apply(Vec2::E2);
            if ae2.max_abs() > 1e-12 * drift.a.max_abs().max(1.0) {
                return Err(Error::DoesNotDescend(format!(
                    "A e2 = {ae2} must vanish on Aff(R) x S1"
                )));
            }
        }
        Ok(SystemSpec {
            theta,
            drift,
            input,
            omega,
            variant,
        })
    }

    /// Shorthand for a simply connected system.
    pub fn simple(theta: ThetaFamily, a: Mat2, xi: Vec2, alpha: f64, eta: Vec2, omega: ControlRange) -> Result<Self> {
        SystemSpec::new(
            theta,
            LinearField { a, xi },
            InvariantField { alpha, eta },
            omega,
            GroupVariant::SimplyConnected,
        )
    }

    pub fn theta(&self) -> ThetaFamily {
        self.theta
    }
    pub fn drift(&self) -> LinearField {
        self.drift
    }
    pub fn input(&self) -> InvariantField {
        self.input
    }
    pub fn omega(&self) -> ControlRange {
        self.omega
    }
    pub fn variant(&self) -> GroupVariant {
        self.variant
    }
    pub fn a(&self) -> Mat2 {
        self.drift.a
    }
    pub fn xi(&self) -> Vec2 {
        self.drift.xi
    }
    pub fn alpha(&self) -> f64 {
        self.input.alpha
    }
    pub fn eta(&self) -> Vec2 {
        self.input.eta
    }

    pub fn with_variant(&self, variant: GroupVariant) -> Result<SystemSpec> {
        SystemSpec::new(self.theta, self.drift, self.input, self.omega, variant)
    }

    pub fn with_fields(&self, drift: LinearField, input: InvariantField) -> Result<SystemSpec> {
        SystemSpec::new(self.theta, drift, input, self.omega, self.variant)
    }

    /// The same system on the simply connected group.
    pub fn lifted(&self) -> SystemSpec {
        SystemSpec {
            variant: GroupVariant::SimplyConnected,
            ..*self
        }
    }

    fn rhs(&self, t: f64, v: Vec2, u: f64) -> (f64, Vec2) {
        let dv = self.drift.a.apply(v)
            + self.theta.lambda(t, self.drift.xi)
            + self.theta.rho(t).apply(self.input.eta).scale(u);
        (u * self.input.alpha, dv)
    }
}

/// `φ_s(t, v) = (t, e^{sA} v + Λ^θ_t Λ^A_s ξ)`.
pub fn drift_flow(s: f64, g: GroupElement, sys: &SystemSpec) -> GroupElement {
    let a = sys.a();
    let inner = lambda_op(&a, s, sys.xi());
    GroupElement::new(g.t, expm(&a, s).apply(g.v) + sys.theta().lambda(g.t, inner))
}

/// Right-hand side `(uα, Av + Λ^θ_t ξ + uρ_t η)` at `g`.
pub fn field_values(g: GroupElement, u: f64, sys: &SystemSpec) -> Result<(f64, Vec2)> {
    sys.omega().check(u)?;
    Ok(sys.rhs(g.t, g.v, u))
}

/// Integrates the system from `g` under `ctrl`, sampling every `step` and
/// at every switch.
pub fn simulate(g: GroupElement, ctrl: &PiecewiseControl, sys: &SystemSpec, step: f64) -> Result<Trajectory<GroupElement>> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::BadStep(step));
    }
    ctrl.check_range(&sys.omega())?;
    if !g.is_finite() {
        return Err(Error::NonFinite("start point"));
    }
    if nilrank(sys) == 2 && sys.alpha() != 0.0 {
        if let Ok(red) = PlanarReduction::build(sys) {
            return Ok(simulate_planar(g, ctrl, &red, step));
        }
    }
    Ok(simulate_rk4(g, ctrl, sys, step))
}

fn simulate_planar(g: GroupElement, ctrl: &PiecewiseControl, red: &PlanarReduction, step: f64) -> Trajectory<GroupElement> {
    let mut samples = vec![(0.0, g)];
    let mut switches = Vec::new();
    let mut clock = 0.0;
    let (mut t, mut w) = red.to_planar(g);
    for &(dur, u) in ctrl.pieces() {
        let up = red.alpha * u;
        let (n, h) = substeps(dur, step);
        let (t0, w0) = (t, w);
        for k in 1..=n {
            let s = if k == n { dur } else { k as f64 * h };
            let ws = red.planar.planar_solution(s, w0, up);
            let ts = t0 + s * up;
            samples.push((clock + s, red.from_planar(ts, ws)));
            if k == n {
                t = ts;
                w = ws;
            }
        }
        clock += dur;
        switches.push(clock);
    }
    Trajectory {
        samples,
        switch_times: switches,
        control: ctrl.clone(),
    }
}

fn simulate_rk4(g: GroupElement, ctrl: &PiecewiseControl, sys: &SystemSpec, step: f64) -> Trajectory<GroupElement> {
    let mut samples = vec![(0.0, g)];
    let mut switches = Vec::new();
    let mut clock = 0.0;
    let mut y = [g.t, g.v.x, g.v.y];
    for &(dur, u) in ctrl.pieces() {
        let f = |y: &[f64; 3]| {
            let (dt, dv) = sys.rhs(y[0], Vec2::new(y[1], y[2]), u);
            [dt, dv.x, dv.y]
        };
        let (n, h) = substeps(dur, step);
        let start = clock;
        for k in 1..=n {
            y = rk4_step(&f, &y, h);
            let s = if k == n { dur } else { k as f64 * h };
            samples.push((start + s, GroupElement::new(y[0], Vec2::new(y[1], y[2]))));
        }
        clock += dur;
        switches.push(clock);
    }
    Trajectory {
        samples,
        switch_times: switches,
        control: ctrl.clone(),
    }
}

/// Raw ingredients of the rank conditions, evaluated at `w = αξ + Aη`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankCertificate {
    pub alpha: f64,
    pub w: Vec2,
    /// `⟨Aw, Rw⟩`
    pub drift_product: f64,
    /// `⟨θw, Rw⟩`
    pub theta_product: f64,
    /// The tested quantity.
    pub value: f64,
    pub holds: bool,
}

fn rank_products(sys: &SystemSpec) -> (Vec2, f64, f64, f64, f64) {
    let w = sys.xi().scale(sys.alpha()) + sys.a().apply(sys.eta());
    let rw = w.rot90();
    let th = sys.theta().matrix();
    let pa = sys.a().apply(w).dot(rw);
    let pt = th.apply(w).dot(rw);
    let n2 = w.norm_sq();
    let tol_a = PRODUCT_TOL * sys.a().max_abs().max(f64::MIN_POSITIVE) * n2;
    let tol_t = PRODUCT_TOL * th.max_abs() * n2;
    (w, pa, pt, tol_a, tol_t)
}

/// `α(⟨Aw, Rw⟩² + ⟨θw, Rw⟩²) ≠ 0` with `w = αξ + Aη`.
pub fn larc(sys: &SystemSpec) -> RankCertificate {
    let (w, pa, pt, tol_a, tol_t) = rank_products(sys);
    let alpha = sys.alpha();
    RankCertificate {
        alpha,
        w,
        drift_product: pa,
        theta_product: pt,
        value: alpha * (pa * pa + pt * pt),
        holds: alpha != 0.0 && (pa.abs() > tol_a || pt.abs() > tol_t),
    }
}

/// `α⟨Aw, Rw⟩ ≠ 0` with `w = αξ + Aη`.
pub fn adrank(sys: &SystemSpec) -> RankCertificate {
    let (w, pa, pt, tol_a, _) = rank_products(sys);
    let alpha = sys.alpha();
    RankCertificate {
        alpha,
        w,
        drift_product: pa,
        theta_product: pt,
        value: alpha * pa,
        holds: alpha != 0.0 && pa.abs() > tol_a,
    }
}

/// Numerical rank of `A`.
pub fn matrix_rank(a: &Mat2) -> usize {
    let (s1, s2) = a.singular_values();
    let tol = RANK_TOL * s1.max(1.0);
    (s1 > tol) as usize + (s2 > tol) as usize
}

pub fn nilrank(sys: &SystemSpec) -> usize {
    matrix_rank(&sys.a())
}

/// The 3×3 derivation `𝒟 = [[0, 0], [ξ, A]]` of the drift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivation {
    pub a: Mat2,
    pub xi: Vec2,
}

impl Derivation {
    pub fn of(sys: &SystemSpec) -> Self {
        Derivation {
            a: sys.a(),
            xi: sys.xi(),
        }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [0.0, 0.0, 0.0],
            [self.xi.x, self.a.a, self.a.b],
            [self.xi.y, self.a.c, self.a.d],
        ]
    }

    /// `e^{s𝒟} = [[1, 0], [Λ^A_s ξ, e^{sA}]]`.
    pub fn exp(&self, s: f64) -> [[f64; 3]; 3] {
        let l = lambda_op(&self.a, s, self.xi);
        let e = expm(&self.a, s);
        [[1.0, 0.0, 0.0], [l.x, e.a, e.b], [l.y, e.c, e.d]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Eigenvalue>,
    pub dim_unstable: usize,
    pub dim_central: usize,
    pub dim_stable: usize,
}

pub(crate) fn eigenvalues(a: &Mat2) -> [Eigenvalue; 2] {
    let half = 0.5 * a.trace();
    let disc = half * half - a.det();
    if disc >= 0.0 {
        let r = disc.sqrt();
        let big = if half >= 0.0 { half + r } else { half - r };
        let small = if big != 0.0 { a.det() / big } else { 0.0 };
        let (hi, lo) = if big >= small { (big, small) } else { (small, big) };
        [Eigenvalue { re: hi, im: 0.0 }, Eigenvalue { re: lo, im: 0.0 }]
    } else {
        let r = (-disc).sqrt();
        [Eigenvalue { re: half, im: r }, Eigenvalue { re: half, im: -r }]
    }
}

/// Spectrum of `𝒟`: `{0} ∪ eig(A)`, with the dimensions of the unstable,
/// central and stable subalgebras.
pub fn derivation_spectrum(sys: &SystemSpec) -> SpectrumReport {
    let a = sys.a();
    let tol = RANK_TOL * a.max_abs().max(1.0);
    let mut eigs = vec![Eigenvalue { re: 0.0, im: 0.0 }];
    eigs.extend(eigenvalues(&a));
    let (mut up, mut mid, mut down) = (0, 0, 0);
    for e in &eigs {
        if e.re > tol {
            up += 1;
        } else if e.re < -tol {
            down += 1;
        } else {
            mid += 1;
        }
    }
    SpectrumReport {
        eigenvalues: eigs,
        dim_unstable: up,
        dim_central: mid,
        dim_stable: down,
    }
}

/// The automorphism `(t, v) ↦ (t, v + Λ^θ_t δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineShift {
    pub theta: ThetaFamily,
    pub delta: Vec2,
}

impl AffineShift {
    pub fn forward(&self, g: GroupElement) -> GroupElement {
        GroupElement::new(g.t, g.v + self.theta.lambda(g.t, self.delta))
    }

    pub fn inverse(&self, g: GroupElement) -> GroupElement {
        GroupElement::new(g.t, g.v - self.theta.lambda(g.t, self.delta))
    }
}

/// Conjugates the input to `(α, 0)`; the drift picks up `ξ + α⁻¹Aη`.
pub fn normalize_eta(sys: &SystemSpec) -> Result<(SystemSpec, AffineShift)> {
    let alpha = sys.alpha();
    if alpha == 0.0 {
        return Err(Error::ZeroAlpha);
    }
    let xi = sys.xi() + sys.a().apply(sys.eta()).scale(1.0 / alpha);
    let out = sys.with_fields(
        LinearField { a: sys.a(), xi },
        InvariantField { alpha, eta: Vec2::ZERO },
    )?;
    let shift = AffineShift {
        theta: sys.theta(),
        delta: sys.eta().scale(-1.0 / alpha),
    };
    Ok((out, shift))
}

pub(crate) fn check_invertible(a: &Mat2) -> Result<()> {
    let det = a.det();
    if det.abs() <= RANK_TOL * (a.max_abs() * a.max_abs()).max(1.0) {
        Err(Error::SingularDrift(det))
    } else {
        Ok(())
    }
}

/// Conjugates the drift to `(A, 0)`; the input becomes `(α, αA⁻¹ξ + η)`.
pub fn normalize_xi(sys: &SystemSpec) -> Result<(SystemSpec, AffineShift)> {
    let a = sys.a();
    check_invertible(&a)?;
    let delta = a.solve(sys.xi()).ok_or(Error::SingularDrift(a.det()))?;
    let out = sys.with_fields(
        LinearField { a, xi: Vec2::ZERO },
        InvariantField {
            alpha: sys.alpha(),
            eta: delta.scale(sys.alpha()) + sys.eta(),
        },
    )?;
    Ok((
        out,
        AffineShift {
            theta: sys.theta(),
            delta,
        },
    ))
}

/// Coordinates in which a nilrank-2 system becomes the planar system
/// `ṫ = ũ, ẇ = (A − ũθ)w + ũη̃` with `ũ = αu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarReduction {
    pub planar: PlanarSpec,
    pub shift: AffineShift,
    pub alpha: f64,
}

impl PlanarReduction {
    fn build(sys: &SystemSpec) -> Result<Self> {
        let alpha = sys.alpha();
        if alpha == 0.0 {
            return Err(Error::ZeroAlpha);
        }
        let (norm, shift) = normalize_xi(sys)?;
        let omega = sys.omega().scaled(alpha)?;
        let planar = PlanarSpec::new(sys.a(), sys.theta(), norm.eta().scale(1.0 / alpha), omega)?;
        Ok(PlanarReduction { planar, shift, alpha })
    }

    fn theta(&self) -> ThetaFamily {
        self.shift.theta
    }

    /// `(t, v) ↦ (t, ρ_{−t}(v + Λ_t A⁻¹ξ))`.
    pub fn to_planar(&self, g: GroupElement) -> (f64, Vec2) {
        let h = self.shift.forward(g);
        (h.t, self.theta().rho(-h.t).apply(h.v))
    }

    pub fn from_planar(&self, t: f64, w: Vec2) -> GroupElement {
        self.shift
            .inverse(GroupElement::new(t, self.theta().rho(t).apply(w)))
    }

    /// `(t, v) ↦ (t, ρ_{−t}v)`, the rotation part of the reduction.
    pub fn rotate_out(&self, g: GroupElement) -> (f64, Vec2) {
        (g.t, self.theta().rho(-g.t).apply(g.v))
    }

    pub fn planar_control(&self, u: f64) -> f64 {
        self.alpha * u
    }
}

pub fn conjugate_to_planar(sys: &SystemSpec) -> Result<PlanarReduction> {
    let r = nilrank(sys);
    if r != 2 {
        return Err(Error::Nilrank {
            found: r,
            required: "2",
        });
    }
    let cert = larc(sys);
    if !cert.holds {
        return Err(Error::LarcViolated(format!("value {:e}", cert.value)));
    }
    PlanarReduction::build(sys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range() -> ControlRange {
        ControlRange::new(-1.0, 1.0).unwrap()
    }

    fn diag_half() -> ThetaFamily {
        ThetaFamily::Diagonal { gamma: 0.5 }
    }

    #[test]
    fn construction_checks() {
        let j = ThetaFamily::Jordan;
        assert!(matches!(
            SystemSpec::simple(j, Mat2::diag(1.0, 2.0), Vec2::ZERO, 1.0, Vec2::ZERO, range()),
            Err(Error::NonCommuting(_))
        ));
        let d0 = ThetaFamily::Diagonal { gamma: 0.0 };
        let base = SystemSpec::simple(d0, Mat2::diag(1.0, 2.0), Vec2::E1, 1.0, Vec2::ZERO, range()).unwrap();
        assert!(base.with_variant(GroupVariant::AffCircle).is_err());
        assert!(base.with_variant(GroupVariant::SE2n { n: 1 }).is_err());
    }

    #[test]
    fn field_examples() {
        let sys = SystemSpec::simple(diag_half(), Mat2::diag(2.0, -1.0), Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, range()).unwrap();
        let (dt, dv) = field_values(GroupElement::IDENTITY, 0.0, &sys).unwrap();
        assert_eq!((dt, dv), (0.0, Vec2::ZERO));
        let v = Vec2::new(0.5, 3.0);
        let (_, dv) = field_values(GroupElement::new(0.0, v), 0.0, &sys).unwrap();
        assert_eq!(dv, sys.a().apply(v));
        let g = GroupElement::new(0.7, Vec2::ZERO);
        let sys0 = SystemSpec::simple(diag_half(), Mat2::ZERO, Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, range()).unwrap();
        let (dt, dv) = field_values(g, 1.0, &sys0).unwrap();
        assert_eq!(dt, 1.0);
        assert!((dv - diag_half().lambda(0.7, Vec2::new(1.0, 1.0))).max_abs() < 1e-15);
        assert!(field_values(g, 2.0, &sys0).is_err());
    }

    #[test]
    fn drift_flow_examples() {
        let sys = SystemSpec::simple(diag_half(), Mat2::ZERO, Vec2::new(1.0, -2.0), 1.0, Vec2::ZERO, range()).unwrap();
        let g = GroupElement::new(0.9, Vec2::new(1.0, 1.0));
        assert_eq!(drift_flow(0.0, g, &sys), g);
        let s = 1.7;
        let want = g.v + diag_half().lambda(g.t, sys.xi()).scale(s);
        assert!((drift_flow(s, g, &sys).v - want).max_abs() < 1e-14);
    }

    #[test]
    fn rank_examples() {
        let d = diag_half();
        let zero_alpha = SystemSpec::simple(d, Mat2::ZERO, Vec2::new(1.0, 1.0), 0.0, Vec2::ZERO, range()).unwrap();
        assert!(!larc(&zero_alpha).holds && !adrank(&zero_alpha).holds);
        let s = SystemSpec::simple(d, Mat2::ZERO, Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, range()).unwrap();
        let c = larc(&s);
        assert!(c.holds);
        assert!((c.theta_product + 0.5).abs() < 1e-15);
        let e = SystemSpec::simple(d, Mat2::IDENTITY, Vec2::E1, 1.0, Vec2::ZERO, range()).unwrap();
        assert!(!larc(&e).holds);
        let scalar = SystemSpec::simple(d, Mat2::scalar(3.0), Vec2::new(1.0, 2.0), 1.0, Vec2::new(0.3, 1.0), range()).unwrap();
        assert!(!adrank(&scalar).holds);
        let one = ThetaFamily::Diagonal { gamma: 1.0 };
        let s = SystemSpec::simple(one, Mat2::diag(1.0, -1.0), Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, range()).unwrap();
        let c = adrank(&s);
        assert!(c.holds);
        assert!((c.drift_product + 2.0).abs() < 1e-15);
    }

    #[test]
    fn nilrank_and_spectrum() {
        let d = diag_half();
        let mk = |a: Mat2| SystemSpec::simple(d, a, Vec2::ZERO, 1.0, Vec2::ZERO, range()).unwrap();
        assert_eq!(nilrank(&mk(Mat2::ZERO)), 0);
        assert_eq!(nilrank(&mk(Mat2::diag(1.0, 0.0))), 1);
        assert_eq!(nilrank(&mk(Mat2::scalar(-1.0))), 2);
        let sp = derivation_spectrum(&mk(Mat2::ZERO));
        assert_eq!(sp.dim_central, 3);
        let sp = derivation_spectrum(&mk(Mat2::scalar(-1.0)));
        assert_eq!((sp.dim_stable, sp.dim_central), (2, 1));
        let j = SystemSpec::simple(ThetaFamily::Jordan, Mat2::new(1.0, 1.0, 0.0, 1.0), Vec2::ZERO, 1.0, Vec2::ZERO, range()).unwrap();
        let sp = derivation_spectrum(&j);
        assert_eq!(sp.dim_unstable, 2);
        assert!(sp.eigenvalues.iter().skip(1).all(|e| (e.re - 1.0).abs() < 1e-12 && e.im == 0.0));
    }

    #[test]
    fn normalizations() {
        let one = ThetaFamily::Diagonal { gamma: 1.0 };
        let sys = SystemSpec::simple(one, Mat2::scalar(-1.0), Vec2::new(0.5, 0.5), 2.0, Vec2::new(2.0, 0.0), range()).unwrap();
        let (n, _) = normalize_eta(&sys).unwrap();
        assert!((n.xi() - Vec2::new(-0.5, 0.5)).max_abs() < 1e-15);
        assert_eq!(n.eta(), Vec2::ZERO);
        let sys = SystemSpec::simple(one, Mat2::scalar(-1.0), Vec2::E1, 1.0, Vec2::ZERO, range()).unwrap();
        let (n, _) = normalize_xi(&sys).unwrap();
        assert_eq!(n.xi(), Vec2::ZERO);
        assert!((n.eta() - Vec2::new(-1.0, 0.0)).max_abs() < 1e-15);
        let sing = SystemSpec::simple(one, Mat2::ZERO, Vec2::E1, 1.0, Vec2::ZERO, range()).unwrap();
        assert!(normalize_xi(&sing).is_err());
        let z = SystemSpec::simple(one, Mat2::ZERO, Vec2::E1, 0.0, Vec2::ZERO, range()).unwrap();
        assert_eq!(normalize_eta(&z).unwrap_err(), Error::ZeroAlpha);
    }

    #[test]
    fn planar_reduction_maps() {
        let sys = SystemSpec::simple(diag_half(), Mat2::diag(1.0, -0.5), Vec2::new(0.3, -0.2), 1.5, Vec2::new(1.0, 1.0), range()).unwrap();
        let red = conjugate_to_planar(&sys).unwrap();
        assert_eq!(red.to_planar(GroupElement::IDENTITY), (0.0, Vec2::ZERO));
        let g = GroupElement::new(0.4, Vec2::new(-1.0, 2.0));
        let (t, w) = red.to_planar(g);
        assert!(red.from_planar(t, w).dist(&g) < 1e-14);
        let low = SystemSpec::simple(diag_half(), Mat2::diag(1.0, 0.0), Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, range()).unwrap();
        assert!(matches!(conjugate_to_planar(&low), Err(Error::Nilrank { found: 1, .. })));
    }

    #[test]
    fn zero_control_single_sample() {
        let sys = SystemSpec::simple(diag_half(), Mat2::ZERO, Vec2::E1, 1.0, Vec2::ZERO, range()).unwrap();
        let tr = simulate(GroupElement::IDENTITY, &PiecewiseControl::empty(), &sys, 1e-3).unwrap();
        assert_eq!(tr.samples.len(), 1);
        assert!(simulate(GroupElement::IDENTITY, &PiecewiseControl::empty(), &sys, 0.0).is_err());
    }
}
