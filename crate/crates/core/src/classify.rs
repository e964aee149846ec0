//! Control-set classification from the rank conditions, the nilrank and the
//! spectrum of the drift, and numerical cross-checks of each verdict.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control::PiecewiseControl;
use crate::error::Result;
use crate::group::{GroupElement, GroupVariant};
use crate::kernel2d::{ThetaFamily, Vec2};
use crate::plan::{circle_hop, monotone_certificate, spiral_fiber_return, xi_hat, SpiralQuotient, XiHat};
use crate::planar::{OmegaHat, PlanarClassification, PlanarVerdict};
use crate::reach::{control_set_estimate, reach_sets, ControlSetEstimate, LineQuotient, ReachConfig, ReachDiagnostics, ReachDynamics, ReachGrid};
use crate::system::{adrank, conjugate_to_planar, derivation_spectrum, larc, nilrank, PlanarReduction, RankCertificate, SpectrumReport, SystemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Taxonomy {
    /// A unique control set with nonempty interior, open.
    UniqueOpen,
    /// A unique control set with nonempty interior, closed.
    UniqueClosed,
    /// The only control set is the whole group.
    WholeGroup,
    /// Infinitely many control sets, all with empty interior.
    InfiniteEmptyInterior,
    Controllable,
    Unclassified,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanarDetails {
    /// `A(ũ) = A − ũθ` with `ũ = αu`; intervals below are in `ũ`.
    pub convention: String,
    pub eta: Vec2,
    pub omega: [f64; 2],
    pub omega_hat: OmegaHat,
    pub classification: Option<PlanarClassification>,
    pub exceptional_control: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuotientDetails {
    /// Direction of `H = ℝ(0, w)`.
    pub w: Vec2,
    pub lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LiftDetails {
    pub variant: GroupVariant,
    pub taxonomy: Taxonomy,
    pub geometry: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub variant: GroupVariant,
    pub theta: ThetaFamily,
    pub nilrank: usize,
    pub larc: RankCertificate,
    pub adrank: RankCertificate,
    pub spectrum: SpectrumReport,
    pub taxonomy: Taxonomy,
    pub geometry: String,
    /// The criterion that produced the verdict.
    pub rule: String,
    pub reason: Option<String>,
    pub planar: Option<PlanarDetails>,
    pub quotient: Option<QuotientDetails>,
    pub xi_hat: Option<XiHat>,
    pub lift: Option<LiftDetails>,
    pub notes: Vec<String>,
}

fn planar_details(red: &PlanarReduction) -> (PlanarDetails, Taxonomy, Option<String>) {
    let p = red.planar;
    let cls = p.classify_planar(None);
    let (taxonomy, reason) = match &cls {
        Ok(c) => match &c.verdict {
            PlanarVerdict::Open => (Taxonomy::UniqueOpen, None),
            PlanarVerdict::Closed => (Taxonomy::UniqueClosed, None),
            PlanarVerdict::WholePlane => (Taxonomy::WholeGroup, None),
            PlanarVerdict::Unclassified { reason } => (Taxonomy::Unclassified, Some(reason.clone())),
        },
        Err(e) => (Taxonomy::Unclassified, Some(e.to_string())),
    };
    let details = PlanarDetails {
        convention: "A(u~) = A - u~ theta with u~ = alpha u".into(),
        eta: p.eta(),
        omega: [p.omega().u_min(), p.omega().u_max()],
        omega_hat: p.omega_hat(),
        classification: cls.ok(),
        exceptional_control: p.exceptional_control().ok().flatten(),
    };
    (details, taxonomy, reason)
}

fn sign_taxonomy(lambda: f64, scale: f64) -> Taxonomy {
    let tol = crate::system::RANK_TOL * scale.max(1.0);
    if lambda > tol {
        Taxonomy::UniqueOpen
    } else if lambda < -tol {
        Taxonomy::UniqueClosed
    } else {
        Taxonomy::Controllable
    }
}

pub fn classify(sys: &SystemSpec) -> ClassificationReport {
    let l = larc(sys);
    let mut r = ClassificationReport {
        variant: sys.variant(),
        theta: sys.theta(),
        nilrank: nilrank(sys),
        larc: l,
        adrank: adrank(sys),
        spectrum: derivation_spectrum(sys),
        taxonomy: Taxonomy::Unclassified,
        geometry: String::new(),
        rule: String::new(),
        reason: None,
        planar: None,
        quotient: None,
        xi_hat: None,
        lift: None,
        notes: Vec::new(),
    };
    if !l.holds {
        r.rule = "Lie algebra rank condition".into();
        r.reason = Some("rank condition fails: alpha (<Aw, Rw>^2 + <theta w, Rw>^2) = 0".into());
        return r;
    }
    let a = sys.a();
    match (sys.variant(), r.nilrank) {
        (_, 2) => {
            let red = conjugate_to_planar(sys).expect("nilrank 2 with the rank condition");
            let (details, taxonomy, reason) = planar_details(&red);
            r.taxonomy = taxonomy;
            r.reason = reason;
            r.planar = Some(details);
            r.rule = "nilrank 2: sign pattern of tr A(u~) on the component I0 of the regular controls".into();
            r.geometry = "cylinder R x C_plane in the coordinates (t, rho_{-t}(v + Lambda_t A^{-1} xi)), \
                          C_plane the control set of w' = A(u~)w + u~ eta~ on I0"
                .into();
            if let GroupVariant::SE2n { n } = sys.variant() {
                r.geometry = format!(
                    "image in SE(2)_{n} of the cylinder R x C_plane, (t, rho_{{-t}}(v + Lambda_t A^{{-1}} xi)) coordinates"
                );
                r.lift = Some(LiftDetails {
                    variant: GroupVariant::SimplyConnected,
                    taxonomy,
                    geometry: "the unique control set R x C_plane; its image is the unique control set below".into(),
                });
            }
        }
        (GroupVariant::AffCircle, _) => {
            let lambda = a.trace();
            r.quotient = LineQuotient::new(sys).ok().map(|q| QuotientDetails { w: q.w, lambda });
            r.taxonomy = sign_taxonomy(lambda, a.max_abs());
            r.rule = "Aff(R) x S1: sign of lambda = tr A".into();
            r.geometry = "C_Aff(R) x S1".into();
            if r.taxonomy == Taxonomy::Controllable {
                let lifted = sys.lifted();
                r.xi_hat = xi_hat(lifted.theta(), lifted.xi()).ok();
                r.lift = Some(LiftDetails {
                    variant: GroupVariant::SimplyConnected,
                    taxonomy: Taxonomy::InfiniteEmptyInterior,
                    geometry: "planes P_c = {<v - alpha^-1 Lambda_t eta, xi_hat> = c}".into(),
                });
                r.notes.push("controllable below although the simply connected lift is not".into());
            }
        }
        (_, 1) => {
            let q = LineQuotient::new(sys).expect("rank one");
            r.quotient = Some(QuotientDetails { w: q.w, lambda: q.lambda });
            r.taxonomy = sign_taxonomy(q.lambda, a.max_abs());
            r.rule = "nilrank 1: sign of tr A on the quotient H\\G, H = R(0, w), w in ker A".into();
            r.geometry = "C_{H\\G} x ker A".into();
        }
        (variant, _) => match sys.theta() {
            ThetaFamily::Spiral { gamma } if gamma != 0.0 => {
                r.taxonomy = Taxonomy::Controllable;
                r.rule = "nilrank 0, theta = Spiral(gamma != 0): staircase on H\\G and the H1/H2 fiber moves".into();
                r.geometry = "the whole group".into();
            }
            theta => {
                r.taxonomy = Taxonomy::InfiniteEmptyInterior;
                r.rule = "nilrank 0: <v - alpha^-1 Lambda_t eta, xi_hat> is nondecreasing along solutions".into();
                r.xi_hat = xi_hat(theta, sys.xi()).ok();
                r.geometry = match variant {
                    GroupVariant::SE2n { .. } => "cylinders C_r = {([t], v) : <v - alpha^-1 Lambda_t eta, xi_hat> = r}".into(),
                    _ => "planes P_c = {<v - alpha^-1 Lambda_t eta, xi_hat> = c}".into(),
                };
            }
        },
    }
    r
}

/// The two-dimensional model on which orbits are sampled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReachModel {
    /// Reduced planar coordinates `w = ρ_{−t}(v + Λ_t A⁻¹ξ)`.
    Planar(PlanarReduction),
    /// `(t, ⟨v, Rw⟩)` on `H\G`.
    Line(LineQuotient),
}

impl ReachModel {
    pub fn for_system(sys: &SystemSpec) -> Result<ReachModel> {
        if nilrank(sys) == 2 {
            return conjugate_to_planar(sys).map(ReachModel::Planar);
        }
        LineQuotient::new(sys).map(ReachModel::Line)
    }

    pub fn coordinates(&self) -> &'static str {
        match self {
            ReachModel::Planar(_) => "w = rho_{-t}(v + Lambda_t A^{-1} xi)",
            ReachModel::Line(_) => "(t, <v, Rw>)",
        }
    }

    /// Image of the identity.
    pub fn base(&self) -> Vec2 {
        match self {
            ReachModel::Planar(r) => r.to_planar(GroupElement::IDENTITY).1,
            ReachModel::Line(q) => q.project(0.0, Vec2::ZERO),
        }
    }

    pub fn dynamics(&self) -> &dyn ReachDynamics {
        match self {
            ReachModel::Planar(r) => &r.planar,
            ReachModel::Line(q) => q,
        }
    }

    pub fn reach(&self, cfg: &ReachConfig) -> Result<ReachGrid> {
        reach_sets(self.dynamics(), self.base(), cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    pub reach: ReachConfig,
    pub far_starts: usize,
    pub far_radius: f64,
    pub round_trips: usize,
    pub certificate_samples: usize,
    pub seed: u64,
    pub step: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            reach: ReachConfig::default(),
            far_starts: 10,
            far_radius: 10.0,
            round_trips: 20,
            certificate_samples: 10_000,
            seed: 0,
            step: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateSummary {
    pub coordinates: String,
    pub cells: usize,
    pub forward_cells: usize,
    pub backward_cells: usize,
    pub cell_size: [f64; 2],
    pub diagnostics: ReachDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationLog {
    pub checks: Vec<Check>,
    pub discrepancies: usize,
    pub passed: bool,
    pub estimate: Option<EstimateSummary>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub log: VerificationLog,
    pub estimate: Option<ControlSetEstimate>,
}

struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, name: &str, passed: bool, value: Option<f64>, detail: impl Into<String>) {
        self.0.push(Check {
            name: name.into(),
            passed,
            value,
            detail: detail.into(),
        });
    }
}

fn sampled(model: &ReachModel, cfg: &VerifyConfig) -> Result<ControlSetEstimate> {
    Ok(control_set_estimate(&model.reach(&cfg.reach)?))
}

fn window_check(checks: &mut Checks, est: &ControlSetEstimate) {
    let fill = est.window_fill(est.base, 10);
    checks.add(
        "window_fill",
        fill >= 0.99,
        Some(fill),
        "fraction of the 10 x 10 cells around the base point inside the estimate",
    );
}

fn base_check(checks: &mut Checks, est: &ControlSetEstimate) {
    checks.add(
        "base_in_estimate",
        est.count > 0 && est.contains_point(est.base),
        Some(est.count as f64),
        "cell of the identity lies in the estimate",
    );
}

/// Flows far starts until they enter the estimate; returns the worst entry
/// time, or `None` if one never entered within `limit`.
fn far_entry(est: &ControlSetEstimate, starts: &[Vec2], flow: impl Fn(Vec2, f64) -> Vec2, h: f64, limit: f64) -> Option<f64> {
    let mut worst: f64 = 0.0;
    for &p in starts {
        let mut x = p;
        let mut s = 0.0;
        while !est.contains_point(x) {
            if s > limit || !x.is_finite() {
                return None;
            }
            x = flow(x, h);
            s += h;
        }
        worst = worst.max(s);
    }
    Some(worst)
}

fn verify_planar(red: &PlanarReduction, report: &ClassificationReport, cfg: &VerifyConfig, checks: &mut Checks) -> Result<ControlSetEstimate> {
    let p = red.planar;
    let est = sampled(&ReachModel::Planar(*red), cfg)?;
    base_check(checks, &est);
    let i0 = p.omega_hat().i0;
    let mut misses = 0;
    let mut tested = 0;
    for k in -2..=2 {
        let u = i0.mid() + k as f64 * i0.width() / 6.0;
        let e = p.equilibrium(u)?;
        if cfg.reach.cell_of(e).is_some() {
            tested += 1;
            misses += !est.contains_point(e) as usize;
        }
    }
    checks.add(
        "equilibria_in_estimate",
        misses == 0,
        Some(misses as f64),
        format!("{tested} equilibria v(u) inside the grid, {misses} outside the estimate"),
    );
    match report.taxonomy {
        Taxonomy::UniqueClosed => {
            let n = cfg.far_starts.max(1);
            let starts: Vec<Vec2> = (0..n)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / n as f64 + 0.3;
                    Vec2::new(a.cos(), a.sin()).scale(cfg.far_radius)
                })
                .collect();
            let entry = far_entry(&est, &starts, |x, h| p.planar_solution(h, x, 0.0), 0.05, 500.0);
            checks.add(
                "far_starts_enter",
                entry.is_some(),
                entry,
                format!("{n} starts at radius {} under u = 0", cfg.far_radius),
            );
        }
        Taxonomy::WholeGroup => {
            window_check(checks, &est);
            if p.rotation_rate().is_some() {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                let b = cfg.reach.bbox;
                let mut worst: f64 = 0.0;
                for _ in 0..cfg.round_trips {
                    let v0 = Vec2::new(
                        0.5 * rng.gen_range(b.xmin..b.xmax),
                        0.5 * rng.gen_range(b.ymin..b.ymax),
                    );
                    let plan = circle_hop(&p, v0, 0.0, i0)?;
                    worst = worst.max(plan.forward.error).max(plan.back.error);
                }
                checks.add(
                    "circle_hop_round_trips",
                    worst <= 1e-6,
                    Some(worst),
                    format!("{} random starts steered to v(0) and back", cfg.round_trips),
                );
            }
        }
        _ => {}
    }
    Ok(est)
}

fn verify_line(q: &LineQuotient, report: &ClassificationReport, cfg: &VerifyConfig, checks: &mut Checks) -> Result<ControlSetEstimate> {
    let est = sampled(&ReachModel::Line(*q), cfg)?;
    base_check(checks, &est);
    match report.taxonomy {
        Taxonomy::UniqueClosed => {
            let n = cfg.far_starts.max(1);
            let om = q.sys.omega();
            let alpha = q.sys.alpha();
            let starts: Vec<Vec2> = (0..n)
                .map(|k| {
                    let a = std::f64::consts::TAU * k as f64 / n as f64 + 0.3;
                    Vec2::new(2.0 * a.cos(), cfg.far_radius * a.sin())
                })
                .collect();
            // first bring t back to 0 at full speed, then drift with u = 0
            let flow = |x: Vec2, h: f64| {
                let u = if x.x.abs() < 1e-12 {
                    0.0
                } else {
                    let want = -x.x.signum() / alpha;
                    let u = if want > 0.0 { om.u_max() } else { om.u_min() };
                    let reach = (u * alpha * h).abs();
                    if reach > x.x.abs() {
                        -x.x / (alpha * h)
                    } else {
                        u
                    }
                };
                q.stepper(u, h)(x)
            };
            let entry = far_entry(&est, &starts, flow, 0.01, 500.0);
            checks.add(
                "far_starts_enter",
                entry.is_some(),
                entry,
                format!("{n} starts with |x| up to {} steered to t = 0, then u = 0", cfg.far_radius),
            );
        }
        Taxonomy::Controllable | Taxonomy::WholeGroup => window_check(checks, &est),
        _ => {}
    }
    Ok(est)
}

fn certificate_check(sys: &SystemSpec, cfg: &VerifyConfig, checks: &mut Checks) -> Result<()> {
    let c = monotone_certificate(&sys.lifted(), cfg.certificate_samples, cfg.seed)?;
    checks.add(
        "monotone_certificate",
        c.holds,
        Some(c.min_g.min(c.min_rate)),
        format!(
            "min g = {:.3e} at t = {:.3}, min rate = {:.3e}, min increment = {:.3e} over {} samples",
            c.min_g, c.min_g_at, c.min_rate, c.min_increment, c.samples
        ),
    );
    Ok(())
}

fn verify_spiral(sys: &SystemSpec, cfg: &VerifyConfig, checks: &mut Checks) -> Result<()> {
    let sq = SpiralQuotient::of_system(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (x, y) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        worst = worst.max(sq.closed_loop(x, y, cfg.step)?.error);
    }
    checks.add("staircase_loops", worst <= 1e-6, Some(worst), "5 closed staircase loops on H\\G");
    let om = sys.omega();
    let mut pieces = Vec::new();
    for _ in 0..3 {
        pieces.push((rng.gen_range(0.1..1.0), rng.gen_range(om.u_min()..=om.u_max())));
    }
    let fr = spiral_fiber_return(sys, &PiecewiseControl::new(pieces)?, cfg.step)?;
    let err = fr.fiber_error.max(fr.h1_error);
    checks.add(
        "fiber_return",
        err <= 1e-5,
        Some(err),
        format!("excursion, staircase and H1/H2 move: S = {:.6}, H1 = {:.6}", fr.s, fr.h1),
    );
    Ok(())
}

/// Cross-checks `report` against sampled orbits, planners and certificates.
pub fn verify_classification(report: &ClassificationReport, sys: &SystemSpec, cfg: &VerifyConfig) -> Result<Verification> {
    let mut checks = Checks(Vec::new());
    let mut estimate = None;
    let mut coordinates = "";
    match report.taxonomy {
        Taxonomy::Unclassified => {}
        Taxonomy::InfiniteEmptyInterior => certificate_check(sys, cfg, &mut checks)?,
        Taxonomy::Controllable if report.nilrank == 0 && sys.variant() != GroupVariant::AffCircle => {
            verify_spiral(sys, cfg, &mut checks)?
        }
        _ => {
            let model = ReachModel::for_system(sys)?;
            coordinates = model.coordinates();
            let est = match &model {
                ReachModel::Planar(red) => verify_planar(red, report, cfg, &mut checks)?,
                ReachModel::Line(q) => verify_line(q, report, cfg, &mut checks)?,
            };
            estimate = Some(est);
            if matches!(report.lift, Some(LiftDetails { taxonomy: Taxonomy::InfiniteEmptyInterior, .. })) {
                certificate_check(sys, cfg, &mut checks)?;
            }
        }
    }
    let discrepancies = checks.0.iter().filter(|c| !c.passed).count();
    let summary = estimate.as_ref().map(|e: &ControlSetEstimate| {
        let (dx, dy) = e.config.cell_size();
        EstimateSummary {
            coordinates: coordinates.into(),
            cells: e.count,
            forward_cells: e.forward_count,
            backward_cells: e.backward_count,
            cell_size: [dx, dy],
            diagnostics: e.diagnostics,
        }
    });
    Ok(Verification {
        log: VerificationLog {
            checks: checks.0,
            discrepancies,
            passed: discrepancies == 0,
            estimate: summary,
        },
        estimate,
    })
}
