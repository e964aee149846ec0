//! Independent reference computations for the integration tests: Taylor
//! series exponentials, adaptive Simpson quadrature, a plain RK4 loop,
//! random instance generators and a small JSON-schema checker.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use solv3d::{ControlRange, GroupElement, Mat2, SystemSpec, ThetaFamily, Vec2};

pub type M3 = [[f64; 3]; 3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut r = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

/// `e^{tB}` by scaling, a 30-term Taylor sum and repeated squaring.
pub fn expm_series(b: &Mat2, t: f64) -> Mat2 {
    let m = [[b.a * t, b.b * t], [b.c * t, b.d * t]];
    let norm = m.iter().flatten().map(|x| x.abs()).sum::<f64>();
    let mut k = 0;
    while norm / 2f64.powi(k) > 0.25 {
        k += 1;
    }
    let sc = 2f64.powi(-k);
    let x = [[m[0][0] * sc, m[0][1] * sc], [m[1][0] * sc, m[1][1] * sc]];
    let mut sum = [[1.0, 0.0], [0.0, 1.0]];
    let mut term = sum;
    for n in 1..30 {
        term = mul2(&term, &x);
        for row in term.iter_mut() {
            for e in row.iter_mut() {
                *e /= n as f64;
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..k {
        sum = mul2(&sum, &sum);
    }
    Mat2::new(sum[0][0], sum[0][1], sum[1][0], sum[1][1])
}

pub fn mul3(a: &M3, b: &M3) -> M3 {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

pub fn expm3_series(m: &M3, t: f64) -> M3 {
    let norm = m.iter().flatten().map(|x| (x * t).abs()).sum::<f64>();
    let mut k = 0;
    while norm / 2f64.powi(k) > 0.25 {
        k += 1;
    }
    let sc = t * 2f64.powi(-k);
    let x: M3 = std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] * sc));
    let mut sum: M3 = std::array::from_fn(|i| std::array::from_fn(|j| (i == j) as u8 as f64));
    let mut term = sum;
    for n in 1..30 {
        term = mul3(&term, &x);
        for row in term.iter_mut() {
            for e in row.iter_mut() {
                *e /= n as f64;
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..k {
        sum = mul3(&sum, &sum);
    }
    sum
}

/// Adaptive Simpson quadrature of a vector-valued integrand on `[a, b]`.
pub fn simpson<F: Fn(f64) -> Vec2>(f: &F, a: f64, b: f64, tol: f64) -> Vec2 {
    fn rec<F: Fn(f64) -> Vec2>(f: &F, a: f64, b: f64, fa: Vec2, fm: Vec2, fb: Vec2, whole: Vec2, tol: f64, depth: u32) -> Vec2 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = ((m - a) / 6.0) * (fa + 4.0 * flm + fm);
        let right = ((b - m) / 6.0) * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.max_abs() <= 15.0 * tol {
            return left + right + delta.scale(1.0 / 15.0);
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = ((b - a) / 6.0) * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

/// `∫₀ᵗ e^{sB} v ds` by quadrature of the series exponential, to about
/// 1e-12 relative to the larger of 1 and a coarse estimate.
pub fn lambda_quad(b: &Mat2, t: f64, v: Vec2) -> Vec2 {
    let f = |s: f64| expm_series(b, s).apply(v);
    let coarse = simpson(&f, 0.0, t, 1e-6 * (t.abs() + 1.0));
    simpson(&f, 0.0, t, 1e-12 * coarse.max_abs().max(1.0))
}

/// Fixed-step RK4 for `(t, v)` under a constant control, evaluated from the
/// defining vector fields rather than the library right-hand side.
pub fn rk4_system(sys: &SystemSpec, g: GroupElement, u: f64, duration: f64, n: usize) -> GroupElement {
    let f = |y: [f64; 3]| -> [f64; 3] {
        let t = y[0];
        let v = Vec2::new(y[1], y[2]);
        let rho = expm_series(&sys.theta().matrix(), t);
        let lam = lambda_quad(&sys.theta().matrix(), t, sys.xi());
        let dv = sys.a().apply(v) + lam + rho.apply(sys.eta()).scale(u);
        [u * sys.alpha(), dv.x, dv.y]
    };
    let h = duration / n as f64;
    let mut y = [g.t, g.v.x, g.v.y];
    let add = |y: [f64; 3], k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
    for _ in 0..n {
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * h));
        let k3 = f(add(y, k2, 0.5 * h));
        let k4 = f(add(y, k3, h));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    GroupElement::new(y[0], Vec2::new(y[1], y[2]))
}

/// RK4 for the planar system `ẇ = (A − uθ)w + uη` with a constant control.
pub fn rk4_planar(a: &Mat2, theta: &Mat2, eta: Vec2, u: f64, w0: Vec2, s: f64, n: usize) -> Vec2 {
    let m = *a - theta.scale(u);
    let f = |w: Vec2| m.apply(w) + eta.scale(u);
    let h = s / n as f64;
    let mut w = w0;
    for _ in 0..n {
        let k1 = f(w);
        let k2 = f(w + (0.5 * h) * k1);
        let k3 = f(w + (0.5 * h) * k2);
        let k4 = f(w + h * k3);
        w = w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w
}

pub fn families() -> [&'static str; 3] {
    ["jordan", "diagonal", "spiral"]
}

pub fn random_theta(r: &mut impl Rng, family: &str) -> ThetaFamily {
    match family {
        "jordan" => ThetaFamily::Jordan,
        "diagonal" => ThetaFamily::Diagonal {
            gamma: r.gen_range(-1.0..=1.0),
        },
        _ => ThetaFamily::Spiral {
            gamma: r.gen_range(-1.5..1.5),
        },
    }
}

/// A random matrix commuting with `θ`.
pub fn random_commuting(r: &mut impl Rng, theta: ThetaFamily) -> Mat2 {
    let (p, q) = (r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
    match theta {
        ThetaFamily::Jordan => Mat2::new(p, q, 0.0, p),
        ThetaFamily::Diagonal { gamma } if gamma == 1.0 => Mat2::new(p, q, r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5)),
        ThetaFamily::Diagonal { .. } => Mat2::diag(p, q),
        ThetaFamily::Spiral { .. } => Mat2::new(p, -q, q, p),
    }
}

pub fn random_vec(r: &mut impl Rng, k: f64) -> Vec2 {
    Vec2::new(r.gen_range(-k..k), r.gen_range(-k..k))
}

pub fn omega(lo: f64, hi: f64) -> ControlRange {
    ControlRange::new(lo, hi).unwrap()
}

pub fn sys(theta: ThetaFamily, a: Mat2, xi: Vec2, alpha: f64, eta: Vec2, lo: f64, hi: f64) -> SystemSpec {
    SystemSpec::simple(theta, a, xi, alpha, eta, omega(lo, hi)).unwrap()
}

/// The three nilrank-2 instances with Open, Closed and whole-plane verdicts.
pub fn canonical_open() -> SystemSpec {
    sys(ThetaFamily::Diagonal { gamma: 0.5 }, Mat2::IDENTITY, Vec2::ZERO, 1.0, Vec2::new(1.0, 1.0), -0.5, 0.5)
}

pub fn canonical_closed() -> SystemSpec {
    sys(ThetaFamily::Diagonal { gamma: 0.5 }, Mat2::scalar(-1.0), Vec2::ZERO, 1.0, Vec2::new(1.0, 1.0), -0.5, 0.5)
}

pub fn canonical_rotation() -> SystemSpec {
    sys(ThetaFamily::Spiral { gamma: 0.0 }, Mat2::ROT, Vec2::ZERO, 1.0, Vec2::E1, -0.5, 0.5)
}

pub fn spiral_instance() -> SystemSpec {
    sys(ThetaFamily::Spiral { gamma: 1.0 }, Mat2::ZERO, Vec2::E1, 1.0, Vec2::ZERO, -1.0, 1.0)
}

pub fn jordan_instance() -> SystemSpec {
    sys(ThetaFamily::Jordan, Mat2::ZERO, Vec2::E2, 1.0, Vec2::ZERO, -1.0, 1.0)
}

pub fn diagonal_instance() -> SystemSpec {
    sys(ThetaFamily::Diagonal { gamma: 0.5 }, Mat2::ZERO, Vec2::new(1.0, 1.0), 1.0, Vec2::ZERO, -1.0, 1.0)
}

/// JSON text of a spec file for `sys` with optional extra top-level fields.
pub fn spec_json(sys: &SystemSpec, extra: &str) -> String {
    let theta = serde_json::to_string(&sys.theta()).unwrap();
    let variant = serde_json::to_string(&sys.variant()).unwrap();
    let a = sys.a();
    let mut s = format!(
        "{{\n  \"theta\": {theta},\n  \"A\": [[{}, {}], [{}, {}]],\n  \"xi\": [{}, {}],\n  \"alpha\": {},\n  \"eta\": [{}, {}],\n  \"omega\": [{}, {}],\n  \"variant\": {variant}",
        a.a,
        a.b,
        a.c,
        a.d,
        sys.xi().x,
        sys.xi().y,
        sys.alpha(),
        sys.eta().x,
        sys.eta().y,
        sys.omega().u_min(),
        sys.omega().u_max()
    );
    if !extra.is_empty() {
        s.push_str(",\n  ");
        s.push_str(extra);
    }
    s.push_str("\n}\n");
    s
}

/// Validates `v` against the subset of JSON Schema used by the shipped
/// schema: type, const, enum, properties, required, additionalProperties,
/// items, minItems, maxItems, minimum and local `$ref`s.
pub fn validate_schema(schema: &Value, v: &Value) -> Result<(), String> {
    check(schema, schema, v, "$")
}

fn type_ok(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn check(root: &Value, s: &Value, v: &Value, path: &str) -> Result<(), String> {
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        let name = r.strip_prefix("#/$defs/").ok_or_else(|| format!("unsupported ref {r}"))?;
        return check(root, &root["$defs"][name], v, path);
    }
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_ok(t, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_ok(t, v)),
            _ => false,
        };
        if !ok {
            return Err(format!("{path}: expected type {t}, got {v}"));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v && !(c.is_number() && v.is_number() && c.as_f64() == v.as_f64()) {
            return Err(format!("{path}: expected {c}"));
        }
    }
    if let Some(e) = s.get("enum").and_then(Value::as_array) {
        if !e.contains(v) {
            return Err(format!("{path}: {v} not in {e:?}"));
        }
    }
    if let (Some(m), Some(x)) = (s.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < m {
            return Err(format!("{path}: {x} < {m}"));
        }
    }
    if let Some(obj) = v.as_object() {
        let props = s.get("properties").and_then(Value::as_object);
        if let Some(req) = s.get("required").and_then(Value::as_array) {
            for k in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(k) {
                    return Err(format!("{path}: missing {k}"));
                }
            }
        }
        for (k, x) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check(root, ps, x, &format!("{path}.{k}"))?,
                None if s.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    return Err(format!("{path}: unexpected key {k}"))
                }
                None => {}
            }
        }
    }
    if let Some(arr) = v.as_array() {
        if let Some(n) = s.get("minItems").and_then(Value::as_u64) {
            if (arr.len() as u64) < n {
                return Err(format!("{path}: fewer than {n} items"));
            }
        }
        if let Some(n) = s.get("maxItems").and_then(Value::as_u64) {
            if arr.len() as u64 > n {
                return Err(format!("{path}: more than {n} items"));
            }
        }
        if let Some(items) = s.get("items") {
            for (i, x) in arr.iter().enumerate() {
                check(root, items, x, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}
