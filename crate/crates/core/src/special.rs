//! Exponential integral `E₁`, kept standalone so it can serve as an
//! independent check on the quadrature path.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_ITER: usize = 500;
const TINY: f64 = 1e-300;

/// `e^x · E₁(x)` for `x > 0`.
///
/// Power series below `x = 1`, modified Lentz continued fraction above.
/// The scaled form stays finite where `e^x` alone would overflow.
pub fn scaled_exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument, got {x}");
    if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        e1_continued_fraction_scaled(x)
    }
}

/// `E₁(x) = ∫₁^∞ e^(−xt)/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument, got {x}");
    if x <= 1.0 {
        e1_series(x)
    } else {
        (-x).exp() * e1_continued_fraction_scaled(x)
    }
}

// E1(x) = -γ - ln x - Σ (-x)^k / (k·k!)
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < sum.abs() * EPS {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))
fn e1_continued_fraction_scaled(x: f64) -> f64 {
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
