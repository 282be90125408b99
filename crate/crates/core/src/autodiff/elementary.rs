//! Derivative tables for the smooth unary functions used by the networks.
//!
//! Each function returns `[f(x), f'(x), f''(x), f'''(x)]`. The third
//! derivative is needed when reverse accumulation runs through the
//! second-order part of a jet.

pub type Derivs = [f64; 4];

pub fn sin(x: f64) -> Derivs {
    let (s, c) = x.sin_cos();
    [s, c, -s, -c]
}

pub fn cos(x: f64) -> Derivs {
    let (s, c) = x.sin_cos();
    [c, -s, -c, s]
}

pub fn exp(x: f64) -> Derivs {
    let e = x.exp();
    [e, e, e, e]
}

pub fn tanh(x: f64) -> Derivs {
    let t = x.tanh();
    let s = 1.0 - t * t;
    [t, s, -2.0 * t * s, -2.0 * s * s + 4.0 * t * t * s]
}

/// Numerically stable logistic function.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logistic(x: f64) -> Derivs {
    let s = sigmoid(x);
    let d1 = s * (1.0 - s);
    [s, d1, d1 * (1.0 - 2.0 * s), d1 * (1.0 - 6.0 * s + 6.0 * s * s)]
}

/// `x / (1 + exp(-x))`, the residual basis function of a KAN edge.
pub fn silu(x: f64) -> Derivs {
    let [s, s1, s2, s3] = logistic(x);
    [x * s, s + x * s1, 2.0 * s1 + x * s2, 3.0 * s2 + x * s3]
}

pub fn powf(x: f64, p: f64) -> Derivs {
    [x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0), p * (p - 1.0) * (p - 2.0) * x.powf(p - 3.0)]
}

pub fn powi(x: f64, n: i32) -> Derivs {
    let nf = n as f64;
    [x.powi(n), nf * x.powi(n - 1), nf * (nf - 1.0) * x.powi(n - 2), nf * (nf - 1.0) * (nf - 2.0) * x.powi(n - 3)]
}

pub fn recip(x: f64) -> Derivs {
    let r = 1.0 / x;
    let r2 = r * r;
    [r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2]
}
