//! Classical fourth-order Runge–Kutta for autonomous systems.

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    let mut r = *y;
    for i in 0..N {
        r[i] += h * k[i];
    }
    r
}

pub fn rk4_step<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y: &[f64; N], h: f64) -> [f64; N] {
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * h, &k1));
    let k3 = f(&axpy(y, 0.5 * h, &k2));
    let k4 = f(&axpy(y, h, &k3));
    let mut r = *y;
    for i in 0..N {
        r[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    r
}

/// Integrates over `duration` with `n` equal steps.
pub fn rk4<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], duration: f64, n: usize) -> [f64; N] {
    let h = duration / n as f64;
    let mut y = y0;
    for _ in 0..n {
        y = rk4_step(f, &y, h);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let y = rk4(&|y: &[f64; 1]| [-y[0]], [1.0], 1.0, 100);
        assert!((y[0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn harmonic_oscillator() {
        let f = |y: &[f64; 2]| [y[1], -y[0]];
        let y = rk4(&f, [1.0, 0.0], std::f64::consts::PI, 1000);
        assert!((y[0] + 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }
}
