//! Closed-form spectral and loss asymptotics: Fourier constants of
//! homogeneous singularities, γ volumes, the eigenvalue law (ν, Λ), the
//! coefficient-tail law (κ, K), and the loss law (ξ, C) for indicator and
//! Gaussian-process targets.
//!
//! Conventions: the discrete pipeline evolves the raw error values, so the
//! L²-weighted error is g = μ^{1/2} (f̃ − f). Its boundary jump therefore
//! carries |Δg|² = jump² μ(x) and its GP covariance singularity carries an
//! extra μ(x) relative to the target covariance; both factors are included
//! below and are what the measured trajectories actually match.

use serde::Serialize;

use crate::distributions::{Dataset, DistributionSpec};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec, SingularityInfo};
use crate::rng::{stream, Stream};
use crate::special::{gamma, is_gamma_pole, ln_gamma, unit_sphere_area};

use std::f64::consts::PI;

/// Density floor (relative to max μ) for the heavy-tailed importance weights
/// of the GP x-integral.
pub const DENSITY_FLOOR_REL: f64 = 1e-6;
/// Relative standard error above which an MC estimate carries a warning.
pub const MC_WARN_REL_SE: f64 = 0.05;
pub const MC_WARN_REL_SE_GP: f64 = 0.10;

/// A predicted quantity with its provenance.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error when the value came from a Monte-Carlo estimate.
    pub std_error: Option<f64>,
    /// Which formula / estimator produced the value.
    pub source: String,
    pub warning: Option<String>,
}

impl Estimate {
    pub fn exact(value: f64, source: impl Into<String>) -> Self {
        Estimate {
            value,
            std_error: None,
            source: source.into(),
            warning: None,
        }
    }

    fn mc(value: f64, se: f64, source: impl Into<String>, warn_rel: f64) -> Self {
        let rel = if value != 0.0 {
            (se / value).abs()
        } else {
            f64::INFINITY
        };
        Estimate {
            value,
            std_error: Some(se),
            source: source.into(),
            warning: (rel > warn_rel).then(|| {
                format!(
                    "relative MC standard error {:.1}% exceeds {:.0}%",
                    rel * 100.0,
                    warn_rel * 100.0
                )
            }),
        }
    }
}

/// Riesz-regularized Fourier constant of |z|^α:
/// c_{d,α} = 2^{d+α} π^{d/2} Γ((d+α)/2) / Γ(-α/2).
pub fn c_fourier(d: usize, alpha: f64) -> Result<f64> {
    validate_degree(d, alpha)?;
    let df = d as f64;
    Ok(2f64.powf(df + alpha) * PI.powf(df / 2.0) * gamma((df + alpha) / 2.0) / gamma(-alpha / 2.0))
}

/// γ_{d,α} = Γ(d/2+1)^{-1} [Γ((d+α)/2) / (π^{α/2} |Γ(-α/2)|)]^{d/(d+α)}.
pub fn gamma_const(d: usize, alpha: f64) -> Result<f64> {
    validate_degree(d, alpha)?;
    let df = d as f64;
    let bracket =
        (ln_gamma((df + alpha) / 2.0) - (alpha / 2.0) * PI.ln() - ln_gamma_abs(-alpha / 2.0))
            * (df / (df + alpha));
    Ok((bracket - ln_gamma(df / 2.0 + 1.0)).exp())
}

fn ln_gamma_abs(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma(x)
    } else {
        PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    }
}

fn validate_degree(d: usize, alpha: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "singularity degree must be positive, got {alpha}"
        )));
    }
    if is_gamma_pole(-alpha / 2.0, 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "Γ(-α/2) has a pole at even integer degree α = {alpha}"
        )));
    }
    Ok(())
}

/// r(x) = √(σ_w² |x|² + σ_b²).
pub fn extended_radius(x: &[f64], sigma_w: f64, sigma_b: f64) -> f64 {
    (sigma_w * sigma_w * x.iter().map(|v| v * v).sum::<f64>() + sigma_b * sigma_b).sqrt()
}

/// |n'| where n' is n with its component along x stretched by r(x)/σ_b.
pub fn stretched_norm(x: &[f64], n: &[f64], sigma_w: f64, sigma_b: f64) -> f64 {
    let x_norm_sq: f64 = x.iter().map(|v| v * v).sum();
    let n_norm_sq: f64 = n.iter().map(|v| v * v).sum();
    if x_norm_sq == 0.0 {
        return n_norm_sq.sqrt();
    }
    let r = extended_radius(x, sigma_w, sigma_b);
    let proj: f64 = x.iter().zip(n).map(|(a, b)| a * b).sum::<f64>() / x_norm_sq.sqrt();
    let scale = r / sigma_b;
    (n_norm_sq + (scale * scale - 1.0) * proj * proj).sqrt()
}

/// Local γ volume of the singularity A(x) φ^α:
/// γ_x = |A|^{d/(d+α)} γ_{d,α} σ_w^{αd/(d+α)} σ_b^{α/(d+α)} r^{-(αd+α)/(d+α)}.
pub fn gamma_x(x: &[f64], alpha: f64, amplitude: f64, sigma_w: f64, sigma_b: f64) -> Result<f64> {
    if amplitude == 0.0 || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "singular amplitude must be finite and nonzero, got {amplitude}"
        )));
    }
    let d = x.len();
    let df = d as f64;
    let p = df / (df + alpha);
    let r = extended_radius(x, sigma_w, sigma_b);
    Ok(amplitude.abs().powf(p)
        * gamma_const(d, alpha)?
        * sigma_w.powf(alpha * p)
        * sigma_b.powf(alpha / (df + alpha))
        * r.powf(-(alpha * df + alpha) / (df + alpha)))
}

/// Fourier transform of the singularity A(x) φ^α evaluated at a unit vector:
/// θ̃_x(n) = A (σ_w/r)^α c_{d,α} |n'|^{-d-α} (r/σ_b).
pub fn fourier_singularity_value(
    x: &[f64],
    alpha: f64,
    amplitude: f64,
    n: &[f64],
    sigma_w: f64,
    sigma_b: f64,
) -> Result<f64> {
    let d = x.len();
    if n.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: n.len(),
        });
    }
    let n_norm: f64 = n.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (n_norm - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "direction must be a unit vector, |n| = {n_norm}"
        )));
    }
    let r = extended_radius(x, sigma_w, sigma_b);
    let df = d as f64;
    Ok(amplitude
        * (sigma_w / r).powf(alpha)
        * c_fourier(d, alpha)?
        * stretched_norm(x, n, sigma_w, sigma_b).powf(-(df + alpha))
        * (r / sigma_b))
}

/// Direction-independent prefactor Q(x) with θ̃_x(n) = Q(x) |n'|^{-d-α}.
fn fourier_prefactor(
    x: &[f64],
    alpha: f64,
    amplitude: f64,
    sigma_w: f64,
    sigma_b: f64,
) -> Result<f64> {
    let r = extended_radius(x, sigma_w, sigma_b);
    Ok(amplitude * (sigma_w / r).powf(alpha) * c_fourier(x.len(), alpha)? * (r / sigma_b))
}

/// L(t) = (K/2) Γ(κ/ν + 1) (2Λt)^{-κ/ν}.
pub fn loss_asymptote(lambda: f64, nu: f64, coefficient_k: f64, kappa: f64, t: f64) -> f64 {
    assert!(
        lambda > 0.0 && nu > 0.0 && coefficient_k > 0.0 && kappa > 0.0 && t > 0.0,
        "loss asymptote needs positive parameters"
    );
    let xi = kappa / nu;
    coefficient_k / 2.0 * gamma(xi + 1.0) * (2.0 * lambda * t).powf(-xi)
}

/// Result of the eigenvalue-law prediction.
#[derive(Debug, Clone, Serialize)]
pub struct EigenAsymptote {
    pub alpha: f64,
    pub nu: Estimate,
    /// Λ of λ_n ~ Λ n^{-ν}; absent when the kernel amplitude is unknown
    /// (mean-field empirical) or declined (closed form for depth).
    pub lambda: Option<Estimate>,
    /// The underlying MC integral ⟨γ_x μ^{-α/(d+α)}⟩_μ (Λ = integral^ν);
    /// reused by the coefficient-tail laws.
    pub lambda_integral: Option<Estimate>,
}

/// ν = 1 + α/d and the compositional Λ = (⟨γ_x μ^{-α/(d+α)}⟩_μ)^{(d+α)/d}.
///
/// The printed closed forms (the shallow-ReLU Λ and its ReLU^q analogue)
/// are evaluated alongside on the same sample; any relative disagreement
/// above 1e-6 is surfaced in the provenance, and the compositional value is
/// returned. The ReLU^q closed form as printed scales as c⁴ under joint
/// (σ_w, σ_b) → (c σ_w, c σ_b) while the kernel itself scales as c^{3+α},
/// so disagreement for q ≠ 1 is expected and reported, never averaged in.
pub fn eigenvalue_asymptote(kernel: &KernelSpec, mc: &Dataset) -> Result<EigenAsymptote> {
    let info = kernel.singularity_info()?;
    let alpha = info.degree;
    let d = mc.dim();
    let df = d as f64;
    let nu_val = 1.0 + alpha / df;
    let nu = Estimate::exact(nu_val, format!("nu = 1 + alpha/d, alpha = {alpha}"));

    // No Λ for the mean-field kernel (amplitude known only empirically) or
    // for depth (the projected amplitude is an approximation; a closed-form
    // depth Λ is out of scope).
    if !info.has_amplitude() || matches!(kernel.kind, KernelKind::DeepRelu { .. }) {
        return Ok(EigenAsymptote {
            alpha,
            nu,
            lambda: None,
            lambda_integral: None,
        });
    }

    let (sw, sb) = (kernel.sigma_w, kernel.sigma_b);
    let mu_pow = -alpha / (df + alpha);
    let (integral, se) = mc_integral(mc, |x| {
        let a = info.amplitude(x)?;
        let g = gamma_x(x, alpha, a, sw, sb)?;
        Ok(g * mc.spec.density(x)?.powf(mu_pow))
    })?;
    let lambda_val = integral.powf(nu_val);
    let lambda_se = nu_val * integral.powf(nu_val - 1.0) * se;

    let mut source = format!(
        "compositional: Lambda = <gamma_x mu^{{-a/(d+a)}}>^nu over {} samples",
        mc.len()
    );
    if let Some(closed) = closed_form_lambda(kernel, alpha, mc)? {
        let rel = ((closed - lambda_val) / lambda_val).abs();
        if rel > 1e-6 {
            source.push_str(&format!(
                "; printed closed form disagrees by {rel:.3e} (closed form {closed:.6e})"
            ));
        } else {
            source.push_str("; printed closed form agrees");
        }
    }
    let lambda = Estimate::mc(lambda_val, lambda_se, source, MC_WARN_REL_SE);
    let lambda_integral = Estimate::mc(
        integral,
        se,
        "<gamma_x mu^{-a/(d+a)}>_mu".to_string(),
        MC_WARN_REL_SE,
    );
    Ok(EigenAsymptote {
        alpha,
        nu,
        lambda: Some(lambda),
        lambda_integral: Some(lambda_integral),
    })
}

/// Printed closed forms, evaluated over the same MC sample.
fn closed_form_lambda(kernel: &KernelSpec, alpha: f64, mc: &Dataset) -> Result<Option<f64>> {
    let (sw, sb) = (kernel.sigma_w, kernel.sigma_b);
    let d = mc.dim();
    let df = d as f64;
    match &kernel.kind {
        KernelKind::ShallowReluNtk => {
            let avg = mc.mc_average(|x| {
                let mu = mc
                    .spec
                    .density(x)
                    .expect("dim checked")
                    .powf(-1.0 / (df + 1.0));
                mu * extended_radius(x, sw, sb).powf((df - 1.0) / (df + 1.0))
            })?;
            let v = sw.powi(3) * sb.powf(1.0 / df) / (2.0 * PI).powi(2)
                * gamma((df + 1.0) / 2.0)
                * gamma(df / 2.0 + 1.0).powf(-(1.0 + 1.0 / df))
                * avg.powf(1.0 + 1.0 / df);
            Ok(Some(v))
        }
        KernelKind::ReluPowerQ { q } => {
            let avg = mc.mc_average(|x| {
                let mu = mc
                    .spec
                    .density(x)
                    .expect("dim checked")
                    .powf(-alpha / (df + alpha));
                mu * extended_radius(x, sw, sb).powf((2.0 * df - alpha * df - alpha) / (df + alpha))
            })?;
            let v = sw.powf(alpha + 2.0)
                * sb.powf(alpha / df)
                * q
                * q
                * (2.0 * PI).powf(df + q - 2.0)
                * gamma((df + alpha) / 2.0)
                * gamma(*q).powi(2)
                * gamma(df / 2.0 + 1.0).powf(-(df + alpha) / df)
                * avg.powf((df + alpha) / df);
            Ok(Some(v))
        }
        _ => Ok(None),
    }
}

fn mc_integral<F: Fn(&[f64]) -> Result<f64>>(ds: &Dataset, f: F) -> Result<(f64, f64)> {
    // like Dataset::mc_stats but the integrand itself can fail
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for x in ds.iter_points() {
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::NumericalInstability(format!(
                "non-finite MC integrand at {x:?}"
            )));
        }
        sum += v;
        sum_sq += v * v;
    }
    let n = ds.len() as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// ξ and C of the loss law for a ball-indicator initial error:
/// C = (1/2π) Γ(ξ+1) 2^{-ξ} ∫_{∂Ω} jump² μ(x) (μ(x) θ̃_x(n))^{-ξ} dS.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatorLossLaw {
    pub xi: f64,
    pub c: Estimate,
    /// The surface integral including the |Δg|² = jump² μ(x) weight.
    pub surface_integral: Estimate,
}

pub fn loss_coefficient_indicator(
    kernel: &KernelSpec,
    mu: &DistributionSpec,
    radius: f64,
    jump: f64,
    n_surface: usize,
    seed: u64,
) -> Result<IndicatorLossLaw> {
    if !(radius > 0.0) || jump == 0.0 {
        return Err(Error::InvalidParameter(
            "indicator law needs radius > 0 and a nonzero jump".into(),
        ));
    }
    if n_surface == 0 {
        return Err(Error::InvalidParameter(
            "need at least one surface sample".into(),
        ));
    }
    let info = kernel.singularity_info()?;
    require_amplitude(&info, kernel)?;
    let alpha = info.degree;
    let d = mu.dim;
    let df = d as f64;
    let xi = 1.0 / (df + alpha);
    let (sw, sb) = (kernel.sigma_w, kernel.sigma_b);

    let s = Stream::new(seed, stream::SPHERE_MC);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..n_surface {
        let normal = s.at(i as u64).next_unit_vector(d);
        let x: Vec<f64> = normal.iter().map(|v| radius * v).collect();
        let amp = info.amplitude(&x)?;
        let theta = fourier_singularity_value(&x, alpha, amp, &normal, sw, sb)?;
        if !(theta > 0.0) {
            return Err(Error::NumericalInstability(format!(
                "Fourier-transformed singularity is not positive at {x:?}: {theta}"
            )));
        }
        let mu_x = mu.density(&x)?;
        if !(mu_x > 0.0) {
            return Err(Error::InvalidParameter(
                "indicator surface leaves the support of mu".into(),
            ));
        }
        let v = jump * jump * mu_x * (mu_x * theta).powf(-xi);
        sum += v;
        sum_sq += v * v;
    }
    let n = n_surface as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let area = unit_sphere_area(d) * radius.powf(df - 1.0);
    let surface = area * mean;
    let surface_se = area * (var / n).sqrt();

    let pref = gamma(xi + 1.0) * 2f64.powf(-xi) / (2.0 * PI);
    let c = pref * surface;
    let c_se = pref * surface_se;
    Ok(IndicatorLossLaw {
        xi,
        c: Estimate::mc(
            c,
            c_se,
            format!("(1/2pi) G(xi+1) 2^-xi * surface MC over {n_surface} sphere samples"),
            MC_WARN_REL_SE,
        ),
        surface_integral: Estimate::mc(
            surface,
            surface_se,
            "int_dOmega jump^2 mu (mu theta~)^-xi dS".to_string(),
            MC_WARN_REL_SE,
        ),
    })
}

/// ξ and C of the loss law for a GP initial error whose covariance shares
/// the φ-based angular singularity of the NTK. The sphere integral collapses
/// analytically (∫ dS |n'|^{-d} = (σ_b/r) S_{d-1}); the remaining x-integral
/// is importance-sampled with μ over the supplied dataset:
/// C = [1/(2 (2π)^d β)] Γ(ξ+1) 2^{-ξ} ⟨P (μ_f Q)^{-ξ} (σ_b/r) S_{d-1}⟩_μ,
/// where μ_f is floored at 1e-6 max μ and the μ(x) from the error weighting
/// has cancelled the importance weight.
#[derive(Debug, Clone, Serialize)]
pub struct GpLossLaw {
    pub xi: f64,
    pub beta: f64,
    pub c: Estimate,
    /// The x-integral ∫ μ ζP (μθQ)^{-ξ} (σ_b/r) S_{d-1} dx.
    pub x_integral: Estimate,
    /// Fraction of sample points whose density sat below the floor.
    pub truncated_fraction: f64,
}

pub fn loss_coefficient_gp(
    ntk: &KernelSpec,
    covariance: &KernelSpec,
    mc: &Dataset,
) -> Result<GpLossLaw> {
    if ntk.sigma_w != covariance.sigma_w || ntk.sigma_b != covariance.sigma_b {
        return Err(Error::InvalidParameter(
            "NTK and covariance must share (sigma_w, sigma_b) for the collapsed sphere integral"
                .into(),
        ));
    }
    let theta_info = ntk.singularity_info()?;
    let zeta_info = covariance.singularity_info()?;
    require_amplitude(&theta_info, ntk)?;
    require_amplitude(&zeta_info, covariance)?;
    let alpha = theta_info.degree;
    let beta = zeta_info.degree;
    let d = mc.dim();
    let df = d as f64;
    let xi = beta / (df + alpha);
    let (sw, sb) = (ntk.sigma_w, ntk.sigma_b);
    let floor = DENSITY_FLOOR_REL * mc.spec.density_max();
    let area = unit_sphere_area(d);

    let mut truncated = 0usize;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for x in mc.iter_points() {
        let mu_raw = mc.spec.density(x)?;
        let mu_x = if mu_raw < floor {
            truncated += 1;
            floor
        } else {
            mu_raw
        };
        let q = fourier_prefactor(x, alpha, theta_info.amplitude(x)?, sw, sb)?;
        let p = fourier_prefactor(x, beta, zeta_info.amplitude(x)?, sw, sb)?;
        if !(q > 0.0) || !(p > 0.0) {
            return Err(Error::NumericalInstability(format!(
                "Fourier prefactors must be positive, got Q = {q}, P = {p} at {x:?}"
            )));
        }
        let r = extended_radius(x, sw, sb);
        let v = p * (mu_x * q).powf(-xi) * (sb / r) * area;
        sum += v;
        sum_sq += v * v;
    }
    let n = mc.len() as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let se = (var / n).sqrt();

    let pref = gamma(xi + 1.0) * 2f64.powf(-xi) / (2.0 * (2.0 * PI).powf(df) * beta);
    let truncated_fraction = truncated as f64 / n;
    let mut source = format!(
        "[1/(2(2pi)^d beta)] G(xi+1) 2^-xi * importance-sampled x-integral over {} points",
        mc.len()
    );
    if truncated > 0 {
        source.push_str(&format!(
            "; density floored at {truncated} points ({:.2}%)",
            100.0 * truncated_fraction
        ));
    }
    Ok(GpLossLaw {
        xi,
        beta,
        c: Estimate::mc(pref * mean, pref * se, source, MC_WARN_REL_SE_GP),
        x_integral: Estimate::mc(
            mean,
            se,
            "<P (mu Q)^-xi (sigma_b/r) S_{d-1}>_mu".to_string(),
            MC_WARN_REL_SE_GP,
        ),
        truncated_fraction,
    })
}

fn require_amplitude(info: &SingularityInfo, kernel: &KernelSpec) -> Result<()> {
    if matches!(kernel.kind, KernelKind::DeepRelu { .. }) {
        return Err(Error::UnsupportedKernel(
            "closed-form loss coefficients cover the shallow kernel family only".into(),
        ));
    }
    if info.has_amplitude() {
        Ok(())
    } else {
        Err(Error::UnsupportedKernel(format!(
            "kernel {} has no closed-form singular amplitude",
            kernel.kind_name()
        )))
    }
}

/// Small-λ law Q(λ) ~ coefficient · λ^exponent of the coefficient partial
/// sums, exposed for diagnostic overlays.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QLambdaLaw {
    pub coefficient: f64,
    pub exponent: f64,
}

/// Coefficient-tail law s_n ~ K n^{-κ}.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientTailLaw {
    pub kappa: Estimate,
    pub coefficient_k: Estimate,
    pub q_lambda: QLambdaLaw,
}

/// Indicator scenario: κ = 1/d, K = (S/π) (Λ-integral)^{1/d} where S is the
/// surface integral from the loss law.
pub fn coefficient_asymptote_indicator(
    law: &IndicatorLossLaw,
    lambda_integral: &Estimate,
    d: usize,
) -> CoefficientTailLaw {
    let df = d as f64;
    let kappa = 1.0 / df;
    let q_coeff = law.surface_integral.value / PI;
    let k = q_coeff * lambda_integral.value.powf(kappa);
    let k_se = law
        .surface_integral
        .std_error
        .map(|se| se / PI * lambda_integral.value.powf(kappa));
    CoefficientTailLaw {
        kappa: Estimate::exact(kappa, "kappa = 1/d"),
        coefficient_k: Estimate {
            value: k,
            std_error: k_se,
            source: "K = (surface integral / pi) * Lambda-integral^{1/d}".to_string(),
            warning: None,
        },
        q_lambda: QLambdaLaw {
            coefficient: q_coeff,
            exponent: law.xi,
        },
    }
}

/// GP scenario: κ = β/d, K = [x-integral/((2π)^d β)] (Λ-integral)^{β/d}.
/// The Λ-integral power makes s_n ~ K n^{-β/d} consistent with the loss law
/// through L(t) = (K/2) Γ(κ/ν+1) (2Λt)^{-κ/ν} exactly.
pub fn coefficient_asymptote_gp(
    law: &GpLossLaw,
    lambda_integral: &Estimate,
    d: usize,
) -> CoefficientTailLaw {
    let df = d as f64;
    let kappa = law.beta / df;
    let q_coeff = law.x_integral.value / ((2.0 * PI).powf(df) * law.beta);
    let k = q_coeff * lambda_integral.value.powf(kappa);
    let k_se = law
        .x_integral
        .std_error
        .map(|se| se / ((2.0 * PI).powf(df) * law.beta) * lambda_integral.value.powf(kappa));
    CoefficientTailLaw {
        kappa: Estimate::exact(kappa, "kappa = beta/d"),
        coefficient_k: Estimate {
            value: k,
            std_error: k_se,
            source: "K = (x-integral / ((2pi)^d beta)) * Lambda-integral^{beta/d}".to_string(),
            warning: None,
        },
        q_lambda: QLambdaLaw {
            coefficient: q_coeff,
            exponent: law.xi,
        },
    }
}

/// The full predicted tuple for one configured experiment. ξ is always
/// stored as κ/ν (the identity ξ = κ/ν is exact by construction).
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticPrediction {
    pub nu: Estimate,
    pub lambda: Option<Estimate>,
    pub kappa: Option<Estimate>,
    pub coefficient_k: Option<Estimate>,
    pub xi: Option<Estimate>,
    pub coefficient_c: Option<Estimate>,
}

impl AsymptoticPrediction {
    pub fn spectrum_only(eig: &EigenAsymptote) -> Self {
        AsymptoticPrediction {
            nu: eig.nu.clone(),
            lambda: eig.lambda.clone(),
            kappa: None,
            coefficient_k: None,
            xi: None,
            coefficient_c: None,
        }
    }

    pub fn with_target(
        eig: &EigenAsymptote,
        tail: &CoefficientTailLaw,
        c: Option<&Estimate>,
    ) -> Self {
        let xi_value = tail.kappa.value / eig.nu.value;
        AsymptoticPrediction {
            nu: eig.nu.clone(),
            lambda: eig.lambda.clone(),
            kappa: Some(tail.kappa.clone()),
            coefficient_k: Some(tail.coefficient_k.clone()),
            xi: Some(Estimate::exact(xi_value, "xi = kappa/nu")),
            coefficient_c: c.cloned(),
        }
    }
}
