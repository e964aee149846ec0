//! Sampled forward and backward orbits on a planar grid, and the control-set
//! estimate `closure(𝒪⁺(x)) ∩ 𝒪⁻(x)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::ControlRange;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::kernel2d::{expm, Vec2};
use crate::planar::PlanarSpec;
use crate::system::{matrix_rank, SystemSpec};

/// Two-dimensional dynamics that can be advanced by a constant control for a
/// signed time step.
pub trait ReachDynamics: Sync {
    fn omega(&self) -> ControlRange;
    /// The map `x ↦ x(h)` under the constant control `u`; `h < 0` runs time
    /// backwards.
    fn stepper(&self, u: f64, h: f64) -> Box<dyn Fn(Vec2) -> Vec2 + '_>;
}

impl ReachDynamics for PlanarSpec {
    fn omega(&self) -> ControlRange {
        PlanarSpec::omega(self)
    }

    fn stepper(&self, u: f64, h: f64) -> Box<dyn Fn(Vec2) -> Vec2 + '_> {
        let e = expm(&self.a_of_u(u), h);
        let b = self.planar_solution(h, Vec2::ZERO, u);
        Box::new(move |w| e.apply(w) + b)
    }
}

/// The projection of a nilrank-1 system onto `H\G(θ)` with `H = ℝ(0, w)`,
/// `w` spanning `ker A`: `ṫ = uα, ẋ = λx + ⟨Λ_t ξ, Rw⟩ + u⟨ρ_t η, Rw⟩` with
/// `λ = tr A`. States are `(t, x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineQuotient {
    pub sys: SystemSpec,
    pub w: Vec2,
    pub lambda: f64,
}

impl LineQuotient {
    pub fn new(sys: &SystemSpec) -> Result<Self> {
        let a = sys.a();
        let r = matrix_rank(&a);
        // with A = 0 any direction works; on Aff(ℝ) × S¹ keep the circle
        // direction e₂, otherwise use the fibre θ⁻¹ξ when it exists
        let aff_circle = sys.variant() == crate::group::GroupVariant::AffCircle;
        let w = match r {
            1 => kernel_vector(&a),
            0 if aff_circle => Vec2::E2,
            0 => match sys.theta().matrix().solve(sys.xi()) {
                Some(q) if q != Vec2::ZERO => q.scale(1.0 / q.norm()),
                _ => Vec2::E2,
            },
            _ => {
                return Err(Error::Nilrank {
                    found: r,
                    required: "1",
                })
            }
        };
        Ok(LineQuotient {
            sys: *sys,
            w,
            lambda: a.trace(),
        })
    }

    /// `(t, v) ↦ (t, ⟨v, Rw⟩)`.
    pub fn project(&self, t: f64, v: Vec2) -> Vec2 {
        Vec2::new(t, v.dot(self.w.rot90()))
    }

    pub fn rhs(&self, y: &[f64; 2], u: f64) -> [f64; 2] {
        let th = self.sys.theta();
        let rw = self.w.rot90();
        let dx = self.lambda * y[1]
            + th.lambda(y[0], self.sys.xi()).dot(rw)
            + u * th.rho(y[0]).apply(self.sys.eta()).dot(rw);
        [u * self.sys.alpha(), dx]
    }
}

/// Unit vector spanning the kernel of a rank-one matrix.
pub(crate) fn kernel_vector(a: &crate::kernel2d::Mat2) -> Vec2 {
    // the kernel is orthogonal to the longer row
    let r1 = Vec2::new(a.a, a.b);
    let r2 = Vec2::new(a.c, a.d);
    let row = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let k = row.rot90();
    k.scale(1.0 / k.norm())
}

impl ReachDynamics for LineQuotient {
    fn omega(&self) -> ControlRange {
        self.sys.omega()
    }

    fn stepper(&self, u: f64, h: f64) -> Box<dyn Fn(Vec2) -> Vec2 + '_> {
        Box::new(move |p| {
            let f = |y: &[f64; 2]| self.rhs(y, u);
            let y = rk4_step(&f, &[p.x, p.y], h);
            Vec2::new(y[0], y[1])
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn square(half: f64) -> Self {
        BoundingBox {
            xmin: -half,
            xmax: half,
            ymin: -half,
            ymax: half,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.xmin, self.xmax, self.ymin, self.ymax].iter().all(|x| x.is_finite())
            && self.xmax > self.xmin
            && self.ymax > self.ymin;
        if ok {
            Ok(())
        } else {
            Err(Error::Hypothesis("grid box must have xmin < xmax and ymin < ymax".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachConfig {
    pub bbox: BoundingBox,
    pub resolution: usize,
    pub horizon: f64,
    pub budget: usize,
    pub seed: u64,
    pub max_switches: usize,
    pub mean_dwell: f64,
    /// Probability of drawing a control from `{u_min, 0, u_max}` instead of
    /// uniformly from Ω.
    pub bang_fraction: f64,
    /// Largest integration step; halved while a step moves more than half a
    /// cell.
    pub base_step: f64,
}

impl Default for ReachConfig {
    fn default() -> Self {
        ReachConfig {
            bbox: BoundingBox::square(10.0),
            resolution: 64,
            horizon: 30.0,
            budget: 100_000,
            seed: 0,
            max_switches: 20,
            mean_dwell: 1.0,
            bang_fraction: 0.5,
            base_step: 0.05,
        }
    }
}

impl ReachConfig {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if self.resolution < 8 {
            return Err(Error::Hypothesis("grid resolution must be at least 8".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Hypothesis("horizon must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::Hypothesis("sample budget must be positive".into()));
        }
        if !(self.mean_dwell > 0.0 && self.base_step > 0.0) {
            return Err(Error::Hypothesis("dwell and step must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.bang_fraction) {
            return Err(Error::Hypothesis("bang fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> (f64, f64) {
        let n = self.resolution as f64;
        (
            (self.bbox.xmax - self.bbox.xmin) / n,
            (self.bbox.ymax - self.bbox.ymin) / n,
        )
    }

    /// Grid cell containing `p`, if inside the box.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let b = &self.bbox;
        if !(p.x >= b.xmin && p.x <= b.xmax && p.y >= b.ymin && p.y <= b.ymax) {
            return None;
        }
        let (dx, dy) = self.cell_size();
        let n = self.resolution;
        let i = (((p.x - b.xmin) / dx) as usize).min(n - 1);
        let j = (((p.y - b.ymin) / dy) as usize).min(n - 1);
        Some((i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Vec2 {
        let (dx, dy) = self.cell_size();
        Vec2::new(
            self.bbox.xmin + (i as f64 + 0.5) * dx,
            self.bbox.ymin + (j as f64 + 0.5) * dy,
        )
    }
}

/// Square bitmap of `res × res` cells; `(i, j)` is column `i` (x) and row
/// `j` (y).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitmap {
    res: usize,
    bits: Vec<u64>,
}

impl Bitmap {
    pub fn new(res: usize) -> Self {
        Bitmap {
            res,
            bits: vec![0; (res * res).div_ceil(64)],
        }
    }

    pub fn resolution(&self) -> usize {
        self.res
    }

    fn index(&self, i: usize, j: usize) -> usize {
        j * self.res + i
    }

    pub fn set(&mut self, i: usize, j: usize) {
        let k = self.index(i, j);
        self.bits[k / 64] |= 1 << (k % 64);
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        let k = self.index(i, j);
        self.bits[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, o: &Bitmap) {
        for (a, b) in self.bits.iter_mut().zip(&o.bits) {
            *a |= *b;
        }
    }

    pub fn intersection(&self, o: &Bitmap) -> Bitmap {
        Bitmap {
            res: self.res,
            bits: self.bits.iter().zip(&o.bits).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn is_subset_of(&self, o: &Bitmap) -> bool {
        self.bits.iter().zip(&o.bits).all(|(a, b)| a & !b == 0)
    }

    /// One-cell dilation in the 8-neighbourhood.
    pub fn dilate(&self) -> Bitmap {
        let n = self.res;
        let mut out = Bitmap::new(n);
        for j in 0..n {
            for i in 0..n {
                if !self.get(i, j) {
                    continue;
                }
                for jj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                    for ii in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                        out.set(ii, jj);
                    }
                }
            }
        }
        out
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.res;
        (0..n * n).filter(move |k| self.bits[k / 64] >> (k % 64) & 1 == 1).map(move |k| (k % n, k / n))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    /// Samples that left the grid box at least once.
    pub clipped: usize,
    /// Samples stopped because they escaped far beyond the box.
    pub escaped: usize,
    /// Samples stopped on a non-finite state.
    pub non_finite: usize,
}

impl SampleStats {
    fn merge(self, o: SampleStats) -> SampleStats {
        SampleStats {
            clipped: self.clipped + o.clipped,
            escaped: self.escaped + o.escaped,
            non_finite: self.non_finite + o.non_finite,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachDiagnostics {
    pub forward: SampleStats,
    pub backward: SampleStats,
    /// Occupied cells added when going from half of the budget to the full
    /// budget, forward and backward.
    pub growth_forward: usize,
    pub growth_backward: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReachGrid {
    pub config: ReachConfig,
    pub start: Vec2,
    pub plus: Bitmap,
    pub minus: Bitmap,
    pub diagnostics: ReachDiagnostics,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_seed(seed: u64, index: usize, backward: bool) -> u64 {
    splitmix(seed ^ splitmix((index as u64) << 1 | backward as u64))
}

fn draw_control(rng: &mut ChaCha8Rng, omega: &ControlRange, bang: f64) -> f64 {
    if rng.gen_bool(bang) {
        match rng.gen_range(0..3) {
            0 => omega.u_min(),
            1 => 0.0,
            _ => omega.u_max(),
        }
    } else {
        rng.gen_range(omega.u_min()..=omega.u_max())
    }
}

/// Runs one random trajectory and marks the visited cells.
///
/// Controls and step sizes depend only on the seed and the state, never on
/// the horizon, so a longer horizon extends the same path.
fn run_sample<D: ReachDynamics + ?Sized>(dynamics: &D, x: Vec2, cfg: &ReachConfig, index: usize, backward: bool, map: &mut Bitmap) -> SampleStats {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(cfg.seed, index, backward));
    let omega = dynamics.omega();
    let sign = if backward { -1.0 } else { 1.0 };
    let (dx, dy) = cfg.cell_size();
    let half_cell = 0.5 * dx.min(dy);
    let min_step = cfg.base_step * 1e-6;
    let b = &cfg.bbox;
    let reach = 4.0 * (b.xmax - b.xmin).max(b.ymax - b.ymin) + x.max_abs();
    let mut stats = SampleStats::default();
    let mut left = false;
    let mark = |p: Vec2, map: &mut Bitmap, left: &mut bool| match cfg.cell_of(p) {
        Some((i, j)) => map.set(i, j),
        None => *left = true,
    };
    mark(x, map, &mut left);

    let mut state = x;
    let mut clock = 0.0;
    let mut switches = 0;
    let mut h = cfg.base_step;
    'outer: while clock < cfg.horizon {
        let u = draw_control(&mut rng, &omega, cfg.bang_fraction);
        let dur = if switches >= cfg.max_switches {
            f64::INFINITY
        } else {
            rng.gen_range(0.0..2.0 * cfg.mean_dwell)
        };
        switches += 1;
        let mut tau = 0.0;
        let mut cached: Option<(f64, Box<dyn Fn(Vec2) -> Vec2 + '_>)> = None;
        while tau < dur {
            let hh = h.min(dur - tau);
            if clock + tau + hh > cfg.horizon {
                break 'outer;
            }
            let fresh = !matches!(&cached, Some((c, _)) if *c == hh);
            if fresh {
                cached = Some((hh, dynamics.stepper(u, sign * hh)));
            }
            let next = (cached.as_ref().map(|c| &c.1).expect("stepper"))(state);
            if !next.is_finite() {
                stats.non_finite = 1;
                break 'outer;
            }
            let moved = (next - state).max_abs();
            if moved > half_cell && hh > min_step {
                h = 0.5 * hh;
                continue;
            }
            state = next;
            tau += hh;
            mark(state, map, &mut left);
            if state.max_abs() > reach {
                stats.escaped = 1;
                break 'outer;
            }
            if moved < 0.25 * half_cell && h < cfg.base_step {
                h = (2.0 * h).min(cfg.base_step);
            }
        }
        clock += dur;
    }
    stats.clipped = left as usize;
    stats
}

fn occupancy<D: ReachDynamics + ?Sized>(dynamics: &D, x: Vec2, cfg: &ReachConfig, range: std::ops::Range<usize>, backward: bool) -> (Bitmap, SampleStats) {
    const CHUNK: usize = 64;
    let n = cfg.resolution;
    let starts: Vec<usize> = range.clone().step_by(CHUNK).collect();
    starts
        .par_iter()
        .map(|&s| {
            let mut map = Bitmap::new(n);
            let mut stats = SampleStats::default();
            for idx in s..(s + CHUNK).min(range.end) {
                stats = stats.merge(run_sample(dynamics, x, cfg, idx, backward, &mut map));
            }
            (map, stats)
        })
        .reduce(
            || (Bitmap::new(n), SampleStats::default()),
            |(mut a, sa), (b, sb)| {
                a.union_with(&b);
                (a, sa.merge(sb))
            },
        )
}

/// Forward and backward occupancy grids from `x`.
pub fn reach_sets<D: ReachDynamics + ?Sized>(dynamics: &D, x: Vec2, cfg: &ReachConfig) -> Result<ReachGrid> {
    cfg.validate()?;
    if !x.is_finite() {
        return Err(Error::NonFinite("base point"));
    }
    let half = cfg.budget / 2;
    let mut out = Vec::with_capacity(2);
    for backward in [false, true] {
        let (mut first, s1) = occupancy(dynamics, x, cfg, 0..half, backward);
        let (second, s2) = occupancy(dynamics, x, cfg, half..cfg.budget, backward);
        let before = first.count();
        first.union_with(&second);
        let growth = first.count() - before;
        out.push((first, s1.merge(s2), growth));
    }
    let (minus, sb, gb) = out.pop().expect("backward");
    let (plus, sf, gf) = out.pop().expect("forward");
    Ok(ReachGrid {
        config: *cfg,
        start: x,
        plus,
        minus,
        diagnostics: ReachDiagnostics {
            forward: sf,
            backward: sb,
            growth_forward: gf,
            growth_backward: gb,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlSetEstimate {
    pub config: ReachConfig,
    pub base: Vec2,
    pub cells: Bitmap,
    pub count: usize,
    pub forward_count: usize,
    pub backward_count: usize,
    pub diagnostics: ReachDiagnostics,
}

impl ControlSetEstimate {
    pub fn contains_point(&self, p: Vec2) -> bool {
        self.config.cell_of(p).is_some_and(|(i, j)| self.cells.get(i, j))
    }

    /// Fraction of the `side × side` block of cells centred on the cell of
    /// `center` that belongs to the estimate.
    pub fn window_fill(&self, center: Vec2, side: usize) -> f64 {
        let n = self.config.resolution;
        let (dx, dy) = self.config.cell_size();
        let b = &self.config.bbox;
        // lower-left cell of the window, centred between cells when side is even
        let ci = (center.x - b.xmin) / dx;
        let cj = (center.y - b.ymin) / dy;
        let i0 = (ci - side as f64 / 2.0).round() as i64;
        let j0 = (cj - side as f64 / 2.0).round() as i64;
        let mut hit = 0;
        let mut total = 0;
        for j in j0..j0 + side as i64 {
            for i in i0..i0 + side as i64 {
                total += 1;
                if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n && self.cells.get(i as usize, j as usize) {
                    hit += 1;
                }
            }
        }
        hit as f64 / total as f64
    }
}

/// `dilate(𝒪⁺) ∩ 𝒪⁻`.
pub fn control_set_estimate(grid: &ReachGrid) -> ControlSetEstimate {
    let cells = grid.plus.dilate().intersection(&grid.minus);
    ControlSetEstimate {
        config: grid.config,
        base: grid.start,
        count: cells.count(),
        forward_count: grid.plus.count(),
        backward_count: grid.minus.count(),
        diagnostics: grid.diagnostics,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel2d::{Mat2, ThetaFamily};

    fn contracting() -> PlanarSpec {
        PlanarSpec::new(
            Mat2::scalar(-1.0),
            ThetaFamily::Diagonal { gamma: 1.0 },
            Vec2::E1,
            ControlRange::new(-0.5, 0.5).unwrap(),
        )
        .unwrap()
    }

    fn small() -> ReachConfig {
        ReachConfig {
            budget: 200,
            horizon: 5.0,
            resolution: 32,
            bbox: BoundingBox::square(2.0),
            ..ReachConfig::default()
        }
    }

    #[test]
    fn bitmap_ops() {
        let mut b = Bitmap::new(8);
        b.set(0, 0);
        b.set(7, 7);
        assert_eq!(b.count(), 2);
        let d = b.dilate();
        assert_eq!(d.count(), 8);
        assert!(b.is_subset_of(&d));
        assert_eq!(d.intersection(&b), b);
        assert_eq!(b.iter_set().collect::<Vec<_>>(), vec![(0, 0), (7, 7)]);
    }

    #[test]
    fn tiny_horizon_marks_start_only() {
        let cfg = ReachConfig {
            horizon: 1e-9,
            ..small()
        };
        let g = reach_sets(&contracting(), Vec2::new(0.3, 0.3), &cfg).unwrap();
        assert_eq!(g.plus.count(), 1);
        assert_eq!(g.minus.count(), 1);
    }

    #[test]
    fn deterministic_and_prefix_monotone() {
        let p = contracting();
        let a = reach_sets(&p, Vec2::ZERO, &small()).unwrap();
        let b = reach_sets(&p, Vec2::ZERO, &small()).unwrap();
        assert_eq!(a, b);
        let longer = ReachConfig {
            horizon: 9.0,
            ..small()
        };
        let c = reach_sets(&p, Vec2::ZERO, &longer).unwrap();
        assert!(a.plus.is_subset_of(&c.plus));
        assert!(a.minus.is_subset_of(&c.minus));
    }

    #[test]
    fn estimate_is_subset() {
        let g = reach_sets(&contracting(), Vec2::ZERO, &small()).unwrap();
        let e = control_set_estimate(&g);
        assert!(e.cells.is_subset_of(&g.minus));
        assert!(e.cells.is_subset_of(&g.plus.dilate()));
        assert!(e.contains_point(Vec2::ZERO));
    }

    #[test]
    fn empty_backward_gives_empty_estimate() {
        let g = reach_sets(&contracting(), Vec2::ZERO, &small()).unwrap();
        let g = ReachGrid {
            minus: Bitmap::new(32),
            ..g
        };
        assert_eq!(control_set_estimate(&g).count, 0);
    }

    #[test]
    fn kernel_vectors() {
        let k = kernel_vector(&Mat2::diag(2.0, 0.0));
        assert!((k.x).abs() < 1e-15 && (k.y.abs() - 1.0).abs() < 1e-15);
        let a = Mat2::new(1.0, 2.0, 2.0, 4.0);
        assert!(a.apply(kernel_vector(&a)).max_abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(ReachConfig {
            resolution: 4,
            ..ReachConfig::default()
        }
        .validate()
        .is_err());
        assert!(ReachConfig {
            budget: 0,
            ..ReachConfig::default()
        }
        .validate()
        .is_err());
    }
}
