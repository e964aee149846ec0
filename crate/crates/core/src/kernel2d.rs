//! Two-dimensional linear algebra: vectors, matrices, closed-form
//! exponentials and the integrated exponential `Λ^B_t v = ∫₀ᵗ e^{sB} v ds`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };
    pub const E1: Vec2 = Vec2 { x: 1.0, y: 0.0 };
    pub const E2: Vec2 = Vec2 { x: 0.0, y: 1.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Rejects NaN and infinite components.
    pub fn checked(x: f64, y: f64) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Vec2 { x, y })
        } else {
            Err(Error::NonFinite("vector"))
        }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the planar cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn max_abs(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn rot90(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(k * self.x, k * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v.scale(self)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Counter-clockwise rotation by a right angle.
pub fn rot90(v: Vec2) -> Vec2 {
    v.rot90()
}

/// Row-major 2×2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl From<[[f64; 2]; 2]> for Mat2 {
    fn from(m: [[f64; 2]; 2]) -> Self {
        Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }
}

impl From<Mat2> for [[f64; 2]; 2] {
    fn from(m: Mat2) -> Self {
        [[m.a, m.b], [m.c, m.d]]
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    /// The rotation `R` by a right angle.
    pub const ROT: Mat2 = Mat2::new(0.0, -1.0, 1.0, 0.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn checked(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let m = Mat2::new(a, b, c, d);
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NonFinite("matrix"))
        }
    }

    pub const fn diag(a: f64, d: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, d)
    }

    pub fn scalar(k: f64) -> Self {
        Mat2::diag(k, k)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2::new(self.a, self.c, self.b, self.d)
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2::new(k * self.a, k * self.b, k * self.c, k * self.d)
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Mat2::new(self.d / det, -self.b / det, -self.c / det, self.a / det))
    }

    /// Solves `self · x = rhs` by Cramer's rule.
    pub fn solve(&self, rhs: Vec2) -> Option<Vec2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Vec2::new(
            (rhs.x * self.d - self.b * rhs.y) / det,
            (self.a * rhs.y - self.c * rhs.x) / det,
        ))
    }

    pub fn commutator(&self, o: &Mat2) -> Mat2 {
        *self * *o - *o * *self
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (*self - *o).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    pub fn is_diagonal(&self) -> bool {
        self.b == 0.0 && self.c == 0.0
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> (f64, f64) {
        // For 2×2: σ₁² + σ₂² = ‖M‖_F², σ₁σ₂ = |det M|.
        let f2 = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let det = self.det().abs();
        let s = (f2 + 2.0 * det).sqrt();
        let t = (f2 - 2.0 * det).max(0.0).sqrt();
        let s1 = 0.5 * (s + t);
        let s2 = if s1 > 0.0 { det / s1 } else { 0.0 };
        (s1, s2)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        self.apply(v)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

/// The three normal forms of the structure matrix θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ThetaFamily {
    Jordan,
    Diagonal { gamma: f64 },
    Spiral { gamma: f64 },
}

impl ThetaFamily {
    pub fn diagonal(gamma: f64) -> Result<Self> {
        let f = ThetaFamily::Diagonal { gamma };
        f.validate()?;
        Ok(f)
    }

    pub fn spiral(gamma: f64) -> Result<Self> {
        let f = ThetaFamily::Spiral { gamma };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThetaFamily::Jordan => Ok(()),
            ThetaFamily::Diagonal { gamma } => {
                if !gamma.is_finite() {
                    Err(Error::NonFinite("gamma"))
                } else if gamma.abs() > 1.0 {
                    Err(Error::GammaOutOfRange(gamma))
                } else {
                    Ok(())
                }
            }
            ThetaFamily::Spiral { gamma } => {
                if gamma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite("gamma"))
                }
            }
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            ThetaFamily::Jordan => None,
            ThetaFamily::Diagonal { gamma } | ThetaFamily::Spiral { gamma } => Some(gamma),
        }
    }

    pub fn matrix(&self) -> Mat2 {
        theta_matrix(*self)
    }

    /// `ρ_t = e^{tθ}`.
    pub fn rho(&self, t: f64) -> Mat2 {
        expm(&self.matrix(), t)
    }

    /// `Λ^θ_t v`.
    pub fn lambda(&self, t: f64, v: Vec2) -> Vec2 {
        lambda_op(&self.matrix(), t, v)
    }

    pub fn is_rotation(&self) -> bool {
        matches!(*self, ThetaFamily::Spiral { gamma } if gamma == 0.0)
    }

    pub fn label(&self) -> String {
        match *self {
            ThetaFamily::Jordan => "Jordan".to_string(),
            ThetaFamily::Diagonal { gamma } => format!("Diagonal({gamma})"),
            ThetaFamily::Spiral { gamma } => format!("Spiral({gamma})"),
        }
    }
}

pub fn theta_matrix(f: ThetaFamily) -> Mat2 {
    match f {
        ThetaFamily::Jordan => Mat2::new(1.0, 1.0, 0.0, 1.0),
        ThetaFamily::Diagonal { gamma } => Mat2::diag(1.0, gamma),
        ThetaFamily::Spiral { gamma } => Mat2::new(gamma, -1.0, 1.0, gamma),
    }
}

/// Returns `(cosh √δ, sinh √δ / √δ)`, continued analytically to `δ ≤ 0`.
fn cosh_sinhc(delta: f64) -> (f64, f64) {
    if delta > 0.0 {
        let k = delta.sqrt();
        let s = if k < 1e-4 {
            1.0 + delta / 6.0 + delta * delta / 120.0
        } else {
            k.sinh() / k
        };
        (k.cosh(), s)
    } else if delta < 0.0 {
        let w = (-delta).sqrt();
        let s = if w < 1e-4 {
            1.0 + delta / 6.0 + delta * delta / 120.0
        } else {
            w.sin() / w
        };
        (w.cos(), s)
    } else {
        (1.0, 1.0)
    }
}

/// `e^{tB}` in closed form.
///
/// Writes `tB = σI + N` with `N` traceless, so `N² = δI` and
/// `e^{tB} = e^σ (cosh √δ · I + sinh √δ/√δ · N)`. This covers all three
/// θ families (and every matrix commuting with them) exactly.
pub fn expm(b: &Mat2, t: f64) -> Mat2 {
    let m = b.scale(t);
    if m.is_diagonal() {
        return Mat2::diag(m.a.exp(), m.d.exp());
    }
    let sigma = 0.5 * m.trace();
    let n = m - Mat2::scalar(sigma);
    let delta = -n.det();
    let (c, s) = cosh_sinhc(delta);
    let e = sigma.exp();
    (Mat2::scalar(c) + n.scale(s)).scale(e)
}

/// `∫₀ᵗ e^{as} ds`.
pub(crate) fn phi1(a: f64, t: f64) -> f64 {
    if a == 0.0 {
        t
    } else {
        (a * t).exp_m1() / a
    }
}

/// `∫₀ᵗ s e^{as} ds`.
pub(crate) fn phi2(a: f64, t: f64) -> f64 {
    let x = a * t;
    if x.abs() < 0.5 {
        // Σ_k a^k t^{k+2} / (k! (k+2))
        let mut term = t * t; // a^k t^{k+2} / k!
        let mut sum = 0.0;
        for k in 0..40 {
            let add = term / (k as f64 + 2.0);
            sum += add;
            if add.abs() <= 1e-18 * sum.abs() {
                break;
            }
            term *= x / (k as f64 + 1.0);
        }
        sum
    } else {
        (t * x.exp() - phi1(a, t)) / a
    }
}

#[derive(Clone, Copy, Debug)]
struct Cplx {
    re: f64,
    im: f64,
}

impl Cplx {
    fn mul(self, o: Cplx) -> Cplx {
        Cplx {
            re: self.re * o.re - self.im * o.im,
            im: self.re * o.im + self.im * o.re,
        }
    }

    fn div(self, o: Cplx) -> Cplx {
        let den = o.re * o.re + o.im * o.im;
        Cplx {
            re: (self.re * o.re + self.im * o.im) / den,
            im: (self.im * o.re - self.re * o.im) / den,
        }
    }
}

/// `(e^{zt} − 1)/z` for complex `z`.
fn phi1_complex(z: Cplx, t: f64) -> Cplx {
    if z.re == 0.0 && z.im == 0.0 {
        return Cplx { re: t, im: 0.0 };
    }
    let w = Cplx {
        re: z.re * t,
        im: z.im * t,
    };
    if w.re.hypot(w.im) < 0.5 {
        // t · Σ w^k/(k+1)!
        let mut term = Cplx { re: 1.0, im: 0.0 };
        let mut sum = Cplx { re: 0.0, im: 0.0 };
        for k in 0..40 {
            sum.re += term.re;
            sum.im += term.im;
            term = term.mul(w);
            let f = 1.0 / (k as f64 + 2.0);
            term.re *= f;
            term.im *= f;
            if term.re.hypot(term.im) <= 1e-18 * sum.re.hypot(sum.im) {
                break;
            }
        }
        Cplx {
            re: t * sum.re,
            im: t * sum.im,
        }
    } else {
        let em1 = w.re.exp_m1();
        let e = w.re.exp();
        // e^{w} − 1 with the real part computed by expm1 to avoid cancellation
        let c = w.im.cos();
        let numer = Cplx {
            re: em1 * c + (c - 1.0),
            im: e * w.im.sin(),
        };
        numer.div(z)
    }
}

/// `Λ^B_t v = ∫₀ᵗ e^{sB} v ds`.
///
/// Structured matrices (diagonal, `aI + nilpotent`, `aI + bR`) use exact
/// scalar formulas regardless of singularity; a well-conditioned `B` uses
/// `(e^{tB} − I)B⁻¹v`; anything else goes through the exponential of the
/// augmented 3×3 matrix `[[tB, tv], [0, 0]]`.
pub fn lambda_op(b: &Mat2, t: f64, v: Vec2) -> Vec2 {
    if t == 0.0 {
        return Vec2::ZERO;
    }
    if b.is_diagonal() {
        return Vec2::new(phi1(b.a, t) * v.x, phi1(b.d, t) * v.y);
    }
    if b.a == b.d {
        if b.c == 0.0 {
            let p = phi1(b.a, t);
            return Vec2::new(p * v.x + b.b * phi2(b.a, t) * v.y, p * v.y);
        }
        if b.b == 0.0 {
            let p = phi1(b.a, t);
            return Vec2::new(p * v.x, p * v.y + b.c * phi2(b.a, t) * v.x);
        }
        if b.b == -b.c {
            // acts on x + iy as multiplication by a + ic
            let z = Cplx { re: b.a, im: b.c };
            let p = phi1_complex(z, t);
            let r = p.mul(Cplx { re: v.x, im: v.y });
            return Vec2::new(r.re, r.im);
        }
    }
    let scale = b.max_abs();
    let det = b.det();
    if det.abs() > 1e-3 * scale * scale && (scale * t).abs() < 30.0 {
        let e = expm(b, t);
        if let Some(w) = b.solve(v) {
            return (e - Mat2::IDENTITY).apply(w);
        }
    }
    augmented_lambda(b, t, v)
}

type M3 = [[f64; 3]; 3];

fn m3_mul(x: &M3, y: &M3) -> M3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| x[i][k] * y[k][j]).sum();
        }
    }
    r
}

/// 3×3 exponential by scaling and squaring with a truncated Taylor series.
pub(crate) fn expm3(m: &M3) -> M3 {
    let norm = m
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 && squarings < 200 {
        scale *= 0.5;
        squarings += 1;
    }
    let mut a = *m;
    for row in a.iter_mut() {
        for x in row.iter_mut() {
            *x *= scale;
        }
    }
    let mut result = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    for k in 1..=16 {
        term = m3_mul(&term, &a);
        let f = 1.0 / k as f64;
        for (rrow, trow) in result.iter_mut().zip(term.iter_mut()) {
            for (r, x) in rrow.iter_mut().zip(trow.iter_mut()) {
                *x *= f;
                *r += *x;
            }
        }
    }
    for _ in 0..squarings {
        result = m3_mul(&result, &result);
    }
    result
}

fn augmented_lambda(b: &Mat2, t: f64, v: Vec2) -> Vec2 {
    let m: M3 = [
        [t * b.a, t * b.b, t * v.x],
        [t * b.c, t * b.d, t * v.y],
        [0.0, 0.0, 0.0],
    ];
    let e = expm3(&m);
    Vec2::new(e[0][2], e[1][2])
}
