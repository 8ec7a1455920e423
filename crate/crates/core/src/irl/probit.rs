//! Log-likelihoods of single preference relations as functions of a Q-gap.
//!
//! Strict preferences use a probit of the scaled gap, equivalences a Gaussian
//! density. Each returns the value and its first three derivatives.

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `(ln Φ(z), φ(z)/Φ(z))`
pub(crate) fn log_cdf_and_ratio(z: f64) -> (f64, f64) {
    let log_pdf = -0.5 * z * z + FRAC_1_SQRT_2PI.ln();
    if z < -5.0 {
        // Continued fraction for the Mills ratio Φ(z)/φ(z) at x = -z.
        let x = -z;
        let mut t = x;
        for k in (1..=60).rev() {
            t = x + k as f64 / t;
        }
        let mills = 1.0 / t;
        (log_pdf + mills.ln(), 1.0 / mills)
    } else {
        let tail = 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
        let (log_cdf, cdf) = if z > 0.0 {
            ((-tail).ln_1p(), 1.0 - tail)
        } else {
            let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
            (cdf.ln(), cdf)
        };
        (log_cdf, log_pdf.exp() / cdf)
    }
}

/// Value and first three derivatives in the gap.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Derivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// `ln Φ(gap / (√2 β))`
pub(crate) fn strict(gap: f64, beta: f64) -> Derivs {
    let c = 1.0 / (std::f64::consts::SQRT_2 * beta);
    let z = gap * c;
    let (value, rho) = log_cdf_and_ratio(z);
    let rho1 = -rho * (z + rho);
    let rho2 = -rho1 * (z + 2.0 * rho) - rho;
    Derivs {
        value,
        d1: c * rho,
        d2: c * c * rho1,
        d3: c * c * c * rho2,
    }
}

/// `ln N(gap; 0, β²)`
pub(crate) fn equivalent(gap: f64, beta: f64) -> Derivs {
    let b2 = beta * beta;
    Derivs {
        value: -0.5 * gap * gap / b2 - (beta / FRAC_1_SQRT_2PI).ln(),
        d1: -gap / b2,
        d2: -1.0 / b2,
        d3: 0.0,
    }
}
