//! Distribution families used for fitting aggregate visibility totals.
//!
//! Every family is expressed in shape/loc/scale form: if `Z` follows the
//! standard member of the family then `loc + scale * Z` follows the fitted
//! one. CDFs and quantiles are built on the regularized incomplete gamma
//! and error functions so the two stay exact inverses of each other to
//! solver precision.

use std::f64::consts::SQRT_2;
use std::fmt;

use serde::Serialize;
use statrs::function::erf::{erf_inv, erfc};
use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Families ranked by the fitting pipeline, in canonical report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum FitFamily {
    LogNormal,
    Gamma,
    Exponential,
    WeibullMin,
    Normal,
    InverseGamma,
    GumbelR,
}

impl FitFamily {
    pub const ALL: [FitFamily; 7] = [
        FitFamily::LogNormal,
        FitFamily::Gamma,
        FitFamily::Exponential,
        FitFamily::WeibullMin,
        FitFamily::Normal,
        FitFamily::InverseGamma,
        FitFamily::GumbelR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FitFamily::LogNormal => "lognormal",
            FitFamily::Gamma => "gamma",
            FitFamily::Exponential => "exponential",
            FitFamily::WeibullMin => "weibull_min",
            FitFamily::Normal => "normal",
            FitFamily::InverseGamma => "invgamma",
            FitFamily::GumbelR => "gumbel_r",
        }
    }

    /// Families without a shape parameter fit loc and scale only.
    pub fn has_shape(self) -> bool {
        !matches!(
            self,
            FitFamily::Exponential | FitFamily::Normal | FitFamily::GumbelR
        )
    }
}

impl fmt::Display for FitFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A concrete parameterized distribution. `shape` is `None` exactly for
/// the shapeless families.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FittedDist {
    pub family: FitFamily,
    pub shape: Option<f64>,
    pub loc: f64,
    pub scale: f64,
}

/// Standard normal CDF via the complementary error function, which keeps
/// precision in the far tails where `0.5 * (1 + erf)` would round to 0 or 1.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Inverse of [`std_normal_cdf`]. `p` outside (0, 1) maps to +/- infinity.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Solves `gamma_lr(a, z) = p` for `z` (the standard Gamma quantile).
///
/// Wilson-Hilferty seed, then Newton steps safeguarded by a shrinking
/// bracket; any step that leaves the bracket becomes a bisection step, so
/// the iteration cannot diverge.
pub fn gamma_standard_quantile(a: f64, p: f64) -> f64 {
    assert!(a > 0.0, "gamma shape must be positive");
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut lo = 0.0_f64;
    let mut hi = a + 10.0 * (a.sqrt() + 1.0);
    while gamma_lr(a, hi) < p {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    // Wilson-Hilferty: cube of a shifted normal approximates the gamma.
    let g = std_normal_quantile(p);
    let t = 1.0 - 1.0 / (9.0 * a) + g / (3.0 * a.sqrt());
    let mut x = a * t * t * t;
    if !x.is_finite() || x <= lo || x >= hi {
        x = 0.5 * hi;
    }
    for _ in 0..200 {
        let f = gamma_lr(a, x) - p;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() - x - ln_gamma(a);
        let mut next = x - f / ln_pdf.exp();
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let done = (next - x).abs() <= 1e-15 * x.abs().max(f64::MIN_POSITIVE);
        x = next;
        if done {
            break;
        }
    }
    x
}

impl FittedDist {
    fn shape_val(&self) -> f64 {
        self.shape.expect("family requires a shape parameter")
    }

    /// CDF at `x`. Outside the support this is exactly 0 or 1.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale;
        match self.family {
            FitFamily::Normal => std_normal_cdf(z),
            FitFamily::GumbelR => (-(-z).exp()).exp(),
            FitFamily::LogNormal => {
                if z <= 0.0 {
                    0.0
                } else {
                    std_normal_cdf(z.ln() / self.shape_val())
                }
            }
            FitFamily::Gamma => {
                if z <= 0.0 {
                    0.0
                } else {
                    gamma_lr(self.shape_val(), z)
                }
            }
            FitFamily::Exponential => {
                if z <= 0.0 {
                    0.0
                } else {
                    -(-z).exp_m1()
                }
            }
            FitFamily::WeibullMin => {
                if z <= 0.0 {
                    0.0
                } else {
                    -(-z.powf(self.shape_val())).exp_m1()
                }
            }
            FitFamily::InverseGamma => {
                if z <= 0.0 {
                    0.0
                } else {
                    // Q(a, 1/z): upper tail of the gamma in the reciprocal.
                    1.0 - gamma_lr(self.shape_val(), 1.0 / z)
                }
            }
        }
    }

    /// Quantile (inverse CDF) at probability `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> f64 {
        let z = match self.family {
            FitFamily::Normal => std_normal_quantile(p),
            FitFamily::GumbelR => -(-(p.ln())).ln(),
            FitFamily::LogNormal => (self.shape_val() * std_normal_quantile(p)).exp(),
            FitFamily::Gamma => gamma_standard_quantile(self.shape_val(), p),
            FitFamily::Exponential => -(-p).ln_1p(),
            FitFamily::WeibullMin => (-(-p).ln_1p()).powf(1.0 / self.shape_val()),
            FitFamily::InverseGamma => 1.0 / gamma_standard_quantile(self.shape_val(), 1.0 - p),
        };
        self.loc + self.scale * z
    }
}
