//! Fluid and diffusion approximations.
//!
//! The scaled queue `(Q − λr/μ)/sqrt(λr/μ)` converges to a diffusion with
//! drift `m(x) = −λ(x−β)⁺ − μ·min(x, γ)` (or `−μx` with unlimited chargers)
//! and variance `2μ`. Its stationary density is a patchwork of a truncated
//! Gaussian, an exponential or Gaussian middle piece, and a shifted Gaussian
//! tail. [`DiffusionSpec`] holds the piece weights; all weights are computed
//! in log space so extreme `β`, `γ` do not overflow.

mod fluid;
mod interchange;
mod sde;

pub use fluid::{
    fluid_network_integrate, fluid_single, ssc_function, FluidEvent, FluidEventKind, FluidState,
    FluidTrajectory,
};
pub use interchange::{interchange_check, InterchangePoint};
pub use sde::{simulate_limit_diffusion, DiffusionPath, SdeOptions};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::model::Regime;
use crate::normal::{ln_cdf, ln_cdf_diff, ln_mills, ln_pdf, log_sum_exp, pdf};

/// A fully specified limiting diffusion.
#[derive(Clone, Debug, Serialize)]
pub struct DiffusionSpec {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub gamma: f64,
    pub regime: Regime,
    /// Probability mass of the lower, middle and upper piece.
    pub alpha: [f64; 3],
    /// Ordered piece boundaries.
    pub breakpoints: (f64, f64),
    ln_alpha: [f64; 3],
    ln_r: [f64; 3],
}

fn check(lambda: f64, mu: f64, beta: f64, gamma: f64, regime: Regime) -> Result<()> {
    if !(lambda > 0.0 && mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
        return Err(invalid("lambda and mu must be positive and finite"));
    }
    if !beta.is_finite() || (regime != Regime::UnlimitedChargers && !gamma.is_finite()) {
        return Err(invalid("beta and gamma must be finite"));
    }
    match regime {
        Regime::LimitedChargers if gamma > beta => {
            Err(invalid("limited-charger regime needs gamma <= beta"))
        }
        Regime::SwapUnconstrained if gamma <= beta => {
            Err(invalid("swap-unconstrained regime needs gamma > beta"))
        }
        _ => Ok(()),
    }
}

/// `ln((1 − e^{−γd})/γ)`, the exponential-piece mass before the `φ(γ)` factor.
fn ln_expo_mass(gamma: f64, d: f64) -> f64 {
    if d <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if gamma == 0.0 {
        d.ln()
    } else if gamma > 0.0 {
        (-(-gamma * d).exp_m1()).ln() - gamma.ln()
    } else {
        let a = -gamma;
        a * d + (-(-a * d).exp_m1()).ln() - a.ln()
    }
}

// Piece masses relative to sqrt(2π), in log form.
fn ln_masses(lambda: f64, mu: f64, beta: f64, gamma: f64, regime: Regime) -> [f64; 3] {
    match regime {
        Regime::LimitedChargers => {
            let s = (mu / lambda).sqrt();
            let d = beta - gamma;
            [
                ln_cdf(gamma),
                ln_pdf(gamma) + ln_expo_mass(gamma, d),
                ln_pdf(gamma) - gamma * d + s.ln() + ln_mills(s * gamma),
            ]
        }
        Regime::UnlimitedChargers => {
            let s = (mu / (lambda + mu)).sqrt();
            [
                ln_cdf(beta),
                f64::NEG_INFINITY,
                ln_pdf(beta) + s.ln() + ln_mills(beta * s),
            ]
        }
        Regime::SwapUnconstrained => {
            let c = SwapConsts::new(lambda, mu, beta, gamma);
            let k3 = c.s3 * c.s3 * gamma * gamma / 2.0 - gamma * beta + gamma * gamma / 2.0;
            [
                ln_cdf(beta),
                ln_pdf(beta) - ln_pdf(beta * c.s2) + c.s2.ln() + c.ln_d2,
                k3 + c.s3.ln() + ln_cdf(-c.z3),
            ]
        }
    }
}

struct SwapConsts {
    s2: f64,
    c2: f64,
    s3: f64,
    c3: f64,
    z_gamma: f64,
    z3: f64,
    ln_d2: f64,
}

impl SwapConsts {
    fn new(lambda: f64, mu: f64, beta: f64, gamma: f64) -> Self {
        let s2 = (mu / (lambda + mu)).sqrt();
        let c2 = lambda * beta / (lambda + mu);
        let s3 = (mu / lambda).sqrt();
        let c3 = beta - s3 * s3 * gamma;
        let z_gamma = (gamma - c2) / s2;
        let z3 = (gamma - c3) / s3;
        let ln_d2 = ln_cdf_diff(beta * s2, z_gamma);
        SwapConsts {
            s2,
            c2,
            s3,
            c3,
            z_gamma,
            z3,
            ln_d2,
        }
    }
}

impl DiffusionSpec {
    pub fn new(lambda: f64, mu: f64, beta: f64, gamma: f64, regime: Regime) -> Result<Self> {
        check(lambda, mu, beta, gamma, regime)?;
        let m = ln_masses(lambda, mu, beta, gamma, regime);
        let z = log_sum_exp(&m);
        let ln_alpha = [m[0] - z, m[1] - z, m[2] - z];
        let ln_r = [0.0, m[1] - m[0], m[2] - m[0]];
        let breakpoints = match regime {
            Regime::LimitedChargers => (gamma, beta),
            Regime::UnlimitedChargers => (beta, beta),
            Regime::SwapUnconstrained => (beta, gamma),
        };
        Ok(DiffusionSpec {
            lambda,
            mu,
            beta,
            gamma,
            regime,
            alpha: ln_alpha.map(f64::exp),
            breakpoints,
            ln_alpha,
            ln_r,
        })
    }

    /// Unnormalised weights `(r₁, r₂, r₃)` with `r₁ = 1`.
    pub fn weights(&self) -> [f64; 3] {
        self.ln_r.map(f64::exp)
    }

    /// Drift `m(x)` of the limiting diffusion.
    pub fn drift(&self, x: f64) -> f64 {
        let over = -self.lambda * (x - self.beta).max(0.0);
        match self.regime {
            Regime::UnlimitedChargers => over - self.mu * x,
            _ => over - self.mu * x.min(self.gamma),
        }
    }

    /// Stationary density.
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.breakpoints;
        let [a1, a2, a3] = self.ln_alpha;
        let (lambda, mu, beta, gamma) = (self.lambda, self.mu, self.beta, self.gamma);
        match self.regime {
            Regime::LimitedChargers => {
                let s = (mu / lambda).sqrt();
                if x < lo {
                    (a1 + ln_pdf(x) - ln_cdf(gamma)).exp()
                } else if x < hi {
                    let d = beta - gamma;
                    let u = x - gamma;
                    let g = if gamma > 0.0 {
                        gamma * (-gamma * u).exp() / -(-gamma * d).exp_m1()
                    } else if gamma < 0.0 {
                        gamma * (gamma * (d - u)).exp() / (gamma * d).exp_m1()
                    } else {
                        1.0 / d
                    };
                    a2.exp() * g
                } else {
                    let sg = s * gamma;
                    let z = (x - (beta - s * s * gamma)) / s;
                    (a3 + 0.5 * (sg * sg - z * z) - ln_mills(sg) - s.ln()).exp()
                }
            }
            Regime::UnlimitedChargers => {
                let s = (mu / (lambda + mu)).sqrt();
                let c = beta * lambda / (lambda + mu);
                if x < beta {
                    (a1 + ln_pdf(x) - ln_cdf(beta)).exp()
                } else {
                    let bs = beta * s;
                    let z = (x - c) / s;
                    (a3 + 0.5 * (bs * bs - z * z) - ln_mills(bs) - s.ln()).exp()
                }
            }
            Regime::SwapUnconstrained => {
                let c = SwapConsts::new(lambda, mu, beta, gamma);
                if x < lo {
                    (a1 + ln_pdf(x) - ln_cdf(beta)).exp()
                } else if x < hi {
                    (a2 + ln_pdf((x - c.c2) / c.s2) - c.s2.ln() - c.ln_d2).exp()
                } else {
                    let z = (x - c.c3) / c.s3;
                    (a3 + 0.5 * (c.z3 * c.z3 - z * z) - ln_mills(c.z3) - c.s3.ln()).exp()
                }
            }
        }
    }

    /// Stationary distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.breakpoints;
        let [a1, a2, a3] = self.alpha;
        let (lambda, mu, beta, gamma) = (self.lambda, self.mu, self.beta, self.gamma);
        let v = match self.regime {
            Regime::LimitedChargers => {
                let s = (mu / lambda).sqrt();
                if x < lo {
                    (self.ln_alpha[0] + ln_cdf(x) - ln_cdf(gamma)).exp()
                } else if x < hi {
                    let d = beta - gamma;
                    let u = x - gamma;
                    let frac = if gamma == 0.0 {
                        u / d
                    } else {
                        (-gamma * u).exp_m1() / (-gamma * d).exp_m1()
                    };
                    a1 + a2 * frac
                } else {
                    let z = (x - (beta - s * s * gamma)) / s;
                    1.0 - a3 * (ln_cdf(-z) - ln_cdf(-s * gamma)).exp()
                }
            }
            Regime::UnlimitedChargers => {
                let s = (mu / (lambda + mu)).sqrt();
                let c = beta * lambda / (lambda + mu);
                if x < beta {
                    (self.ln_alpha[0] + ln_cdf(x) - ln_cdf(beta)).exp()
                } else {
                    let z = (x - c) / s;
                    1.0 - a3 * (ln_cdf(-z) - ln_cdf(-beta * s)).exp()
                }
            }
            Regime::SwapUnconstrained => {
                let c = SwapConsts::new(lambda, mu, beta, gamma);
                if x < lo {
                    (self.ln_alpha[0] + ln_cdf(x) - ln_cdf(beta)).exp()
                } else if x < hi {
                    let z = (x - c.c2) / c.s2;
                    a1 + a2 * (ln_cdf_diff(beta * c.s2, z) - c.ln_d2).exp()
                } else {
                    let z = (x - c.c3) / c.s3;
                    1.0 - a3 * (ln_cdf(-z) - ln_cdf(-c.z3)).exp()
                }
            }
        };
        v.clamp(0.0, 1.0)
    }

    /// Stationary probability that the scaled queue exceeds `β`.
    pub fn wait_probability(&self) -> f64 {
        match self.regime {
            Regime::LimitedChargers | Regime::UnlimitedChargers => self.alpha[2],
            Regime::SwapUnconstrained => -self.ln_alpha[0].exp_m1(),
        }
    }

    /// `∫_β^∞ (x − β) f̂(x) dx`, the scaled mean number of waiting EVs.
    pub fn tail_integral(&self) -> f64 {
        let (lambda, mu, beta, gamma) = (self.lambda, self.mu, self.beta, self.gamma);
        match self.regime {
            Regime::LimitedChargers => {
                let s = (mu / lambda).sqrt();
                let sg = s * gamma;
                self.alpha[2] * (s / ln_mills(sg).exp() - s * sg)
            }
            Regime::UnlimitedChargers => {
                let s = (mu / (lambda + mu)).sqrt();
                let bs = beta * s;
                self.alpha[2] * s * ((-ln_mills(bs)).exp() - bs)
            }
            Regime::SwapUnconstrained => {
                let c = SwapConsts::new(lambda, mu, beta, gamma);
                let middle = if self.alpha[1] > 0.0 {
                    let diff = pdf(beta * c.s2) - pdf(c.z_gamma);
                    c.s2 * diff / c.ln_d2.exp() - beta * c.s2 * c.s2
                } else {
                    0.0
                };
                let tail = c.s3 / ln_mills(c.z3).exp() - c.s3 * c.s3 * gamma;
                self.alpha[1] * middle + self.alpha[2] * tail
            }
        }
    }
}

/// Piece weights `(α₁, α₂, α₃)`.
pub fn diffusion_alpha(lambda: f64, mu: f64, beta: f64, gamma: f64, regime: Regime) -> Result<[f64; 3]> {
    Ok(DiffusionSpec::new(lambda, mu, beta, gamma, regime)?.alpha)
}

/// Limiting probability that an arriving EV finds no charged battery.
pub fn wait_probability_limit(lambda: f64, mu: f64, beta: f64, gamma: f64, regime: Regime) -> Result<f64> {
    Ok(DiffusionSpec::new(lambda, mu, beta, gamma, regime)?.wait_probability())
}

/// Limiting waiting measures at fleet size `r`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WaitLimit {
    /// `∫_β^∞ (x − β) f̂(x) dx`.
    pub tail_integral: f64,
    /// `sqrt(λr/μ)` times the tail integral.
    pub e_qw: f64,
    /// `E_QW / (λ (r − E_QW))`.
    pub e_w: f64,
    /// Limit of `E(W)·sqrt(r)`, `tail_integral / sqrt(λμ)`.
    pub e_w_sqrt_r: f64,
}

pub fn expected_wait_limit(
    lambda: f64,
    mu: f64,
    beta: f64,
    gamma: f64,
    regime: Regime,
    r: u64,
) -> Result<WaitLimit> {
    if r == 0 {
        return Err(invalid("r must be at least 1"));
    }
    let spec = DiffusionSpec::new(lambda, mu, beta, gamma, regime)?;
    let tail = spec.tail_integral();
    let rf = r as f64;
    let e_qw = (lambda * rf / mu).sqrt() * tail;
    if e_qw >= rf {
        return Err(invalid("approximate waiting count exceeds the fleet size"));
    }
    Ok(WaitLimit {
        tail_integral: tail,
        e_qw,
        e_w: e_qw / (lambda * (rf - e_qw)),
        e_w_sqrt_r: tail / (lambda * mu).sqrt(),
    })
}
