//! Kernel families of wide ReLU networks and their diagonal-singularity data.
//!
//! All families are expressed through the extended-input geometry: with
//! x̃ = (σ_w x, σ_b) ∈ R^{d+1}, r = |x̃| and φ the angle between x̃ and x̃'.
//! The NTK-parametrized shallow net has closed forms; (z)_+^q activations go
//! through a one-dimensional integral; depth runs a layerwise recursion; the
//! mean-field kernel is an empirical average over neuron parameters.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::quad::tanh_sinh;
use crate::special::{gamma, ln_gamma};

pub const RELU_Q_QUAD_TOL: f64 = 1e-8;
const COS_CLAMP_TOL: f64 = 1e-12;

/// Extended-input geometry of a point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub r: f64,
    pub r_prime: f64,
    pub phi: f64,
}

impl Geometry {
    /// σ_w² x·x' + σ_b², recovered as r r' cos φ.
    pub fn extended_dot(&self) -> f64 {
        self.r * self.r_prime * self.phi.cos()
    }
}

/// r and φ of Eqs. for the extended inputs; the arccos argument is clamped
/// to [-1, 1] so coincident points give φ = 0 exactly instead of NaN.
pub fn geometry(x: &[f64], x_prime: &[f64], sigma_w: f64, sigma_b: f64) -> Result<Geometry> {
    if x.len() != x_prime.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x_prime.len(),
        });
    }
    if !(sigma_w > 0.0) || !(sigma_b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "geometry requires sigma_w > 0 and sigma_b > 0, got ({sigma_w}, {sigma_b})"
        )));
    }
    let sw2 = sigma_w * sigma_w;
    let sb2 = sigma_b * sigma_b;
    let r = (sw2 * sq_norm(x) + sb2).sqrt();
    let r_prime = (sw2 * sq_norm(x_prime) + sb2).sqrt();
    let dot: f64 = x.iter().zip(x_prime).map(|(a, b)| a * b).sum();
    let cos = ((sw2 * dot + sb2) / (r * r_prime)).clamp(-1.0, 1.0);
    Ok(Geometry {
        r,
        r_prime,
        phi: cos.acos(),
    })
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// One neuron of a mean-field network: output weight c, input weights w,
/// bias b.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronParams {
    pub c: f64,
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone)]
pub enum KernelKind {
    /// NTK Θ of a shallow ReLU network.
    ShallowReluNtk,
    /// Output covariance Σ of a shallow ReLU network (the GP covariance).
    ShallowReluCov,
    /// NTK of a shallow network with activation (z)_+^q.
    ReluPowerQ { q: f64 },
    /// NTK of a depth-L ReLU network (L = 2 is the shallow case).
    DeepRelu { depth: usize },
    /// Empirical mean-field NTK over a finite neuron-parameter set.
    MfEmpirical { params: Arc<Vec<NeuronParams>> },
}

#[derive(Debug, Clone)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub sigma_w: f64,
    pub sigma_b: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, sigma_w: f64, sigma_b: f64) -> Result<Self> {
        if !(sigma_w > 0.0) || !(sigma_b > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel requires sigma_w > 0 and sigma_b > 0, got ({sigma_w}, {sigma_b})"
            )));
        }
        match &kind {
            KernelKind::ReluPowerQ { q } if !(*q > 0.0) => {
                return Err(Error::InvalidParameter(format!(
                    "ReLU^q exponent must be positive, got {q}"
                )));
            }
            KernelKind::DeepRelu { depth } if *depth < 2 => {
                return Err(Error::InvalidParameter(format!(
                    "deep kernel needs depth >= 2, got {depth}"
                )));
            }
            KernelKind::MfEmpirical { params } if params.is_empty() => {
                return Err(Error::InvalidParameter(
                    "mean-field kernel needs at least one neuron".into(),
                ));
            }
            _ => {}
        }
        Ok(KernelSpec {
            kind,
            sigma_w,
            sigma_b,
        })
    }

    pub fn shallow_ntk(sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(KernelKind::ShallowReluNtk, sigma_w, sigma_b)
    }

    pub fn shallow_cov(sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(KernelKind::ShallowReluCov, sigma_w, sigma_b)
    }

    pub fn relu_power(q: f64, sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(KernelKind::ReluPowerQ { q }, sigma_w, sigma_b)
    }

    pub fn deep_relu(depth: usize, sigma_w: f64, sigma_b: f64) -> Result<Self> {
        Self::new(KernelKind::DeepRelu { depth }, sigma_w, sigma_b)
    }

    /// Mean-field kernel from neuron parameters. σ_w, σ_b play no role in
    /// the evaluation; they are fixed to 1 for interface uniformity.
    pub fn mf_empirical(params: Vec<NeuronParams>) -> Result<Self> {
        Self::new(
            KernelKind::MfEmpirical {
                params: Arc::new(params),
            },
            1.0,
            1.0,
        )
    }

    /// Short human-readable name for diagnostics.
    pub fn kind_name(&self) -> String {
        match &self.kind {
            KernelKind::ShallowReluNtk => "shallow-relu-ntk".into(),
            KernelKind::ShallowReluCov => "shallow-relu-cov".into(),
            KernelKind::ReluPowerQ { q } => format!("relu-power(q={q})"),
            KernelKind::DeepRelu { depth } => format!("deep-relu(depth={depth})"),
            KernelKind::MfEmpirical { params } => format!("mf-empirical({} neurons)", params.len()),
        }
    }

    /// K(x, x').
    pub fn evaluate(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        match &self.kind {
            KernelKind::ShallowReluNtk => {
                let g = geometry(x, x_prime, self.sigma_w, self.sigma_b)?;
                Ok(shallow_relu(&g, self.sigma_w).0)
            }
            KernelKind::ShallowReluCov => {
                let g = geometry(x, x_prime, self.sigma_w, self.sigma_b)?;
                Ok(shallow_relu(&g, self.sigma_w).1)
            }
            KernelKind::ReluPowerQ { q } => {
                let g = geometry(x, x_prime, self.sigma_w, self.sigma_b)?;
                ntk_relu_q(&g, *q, self.sigma_w)
            }
            KernelKind::DeepRelu { depth } => {
                ntk_deep_relu(x, x_prime, *depth, self.sigma_w, self.sigma_b)
            }
            KernelKind::MfEmpirical { params } => ntk_mf_empirical(params, x, x_prime),
        }
    }

    /// Degree and amplitude of the leading diagonal singularity.
    pub fn singularity_info(&self) -> Result<SingularityInfo> {
        let (sw, sb) = (self.sigma_w, self.sigma_b);
        match &self.kind {
            KernelKind::ShallowReluNtk => Ok(SingularityInfo {
                degree: 1.0,
                amplitude: AmplitudeKind::ShallowNtk { sw, sb },
            }),
            KernelKind::ShallowReluCov => Ok(SingularityInfo {
                degree: 3.0,
                amplitude: AmplitudeKind::ShallowCov { sw, sb },
            }),
            KernelKind::ReluPowerQ { q } => {
                if is_half_integer(*q) {
                    return Err(Error::NoSingularity(format!(
                        "ReLU^q NTK is smooth at half-integer q = {q}"
                    )));
                }
                Ok(SingularityInfo {
                    degree: 2.0 * q - 1.0,
                    amplitude: AmplitudeKind::ReluQ { q: *q, sw, sb },
                })
            }
            KernelKind::DeepRelu { depth } => Ok(SingularityInfo {
                degree: 1.0,
                amplitude: AmplitudeKind::Deep {
                    depth: *depth,
                    sw,
                    sb,
                },
            }),
            KernelKind::MfEmpirical { .. } => Ok(SingularityInfo {
                degree: 1.0,
                amplitude: AmplitudeKind::EmpiricalOnly,
            }),
        }
    }

    /// Gram matrix K(x_i, x_j) on a dataset. Assembled over i <= j and
    /// mirrored, so the output is exactly symmetric; row-parallel assembly is
    /// deterministic regardless of thread count.
    pub fn gram(&self, dataset: &Dataset) -> Result<DMatrix<f64>> {
        if let KernelKind::MfEmpirical { params } = &self.kind {
            return mf_gram(params, dataset);
        }
        let m = dataset.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|i| {
                let xi = dataset.point(i);
                (i..m)
                    .map(|j| self.evaluate(xi, dataset.point(j)))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(m, m);
        for (i, row) in rows.iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                let j = i + k;
                if !v.is_finite() {
                    return Err(Error::NonFiniteKernel { i, j });
                }
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Ok(out)
    }
}

/// (Θ, Σ) of the shallow ReLU network:
/// Σ = σ_w²/(2π) r r' (sin φ + cos φ (π - φ)),
/// Θ = Σ + σ_w²/(2π) r r' cos φ (π - φ).
pub fn shallow_relu(geom: &Geometry, sigma_w: f64) -> (f64, f64) {
    let pref = sigma_w * sigma_w / (2.0 * PI) * geom.r * geom.r_prime;
    let (sin_phi, cos_phi) = (geom.phi.sin(), geom.phi.cos());
    let arc = PI - geom.phi;
    let sigma = pref * (sin_phi + cos_phi * arc);
    let theta = sigma + pref * cos_phi * arc;
    (theta, sigma)
}

/// Gaussian moment J_s = ⟨(z)_+^s (z')_+^s⟩ for (z, z') centered jointly
/// normal with variances r², r'² and correlation cos φ.
///
/// Off the diagonal this is
///   (1/2π) (r r')^s Γ(s+1) (sin φ)^{2s+1} ∫_0^{π/2} cos^s ψ / (1 - cos φ cos ψ)^{s+1} dψ,
/// on the diagonal the closed form (r r')^s 2^{s-1} Γ(s+1/2)/√π.
pub fn gaussian_relu_moment(geom: &Geometry, s: f64) -> Result<f64> {
    if s <= -1.0 {
        return Err(Error::InvalidParameter(format!(
            "Gaussian moment diverges for exponent {s} <= -1"
        )));
    }
    let rr = geom.r * geom.r_prime;
    if geom.phi == 0.0 {
        if s <= -0.5 {
            return Err(Error::InvalidParameter(format!(
                "diagonal Gaussian moment diverges for exponent {s} <= -1/2"
            )));
        }
        return Ok(rr.powf(s) * 2f64.powf(s - 1.0) * gamma(s + 0.5) / PI.sqrt());
    }
    // 1 - cos φ cos ψ = u + v - uv with u = 1 - cos ψ, v = 1 - cos φ:
    // stable for near-coincident points where cos φ = 1 - O(1e-16) and the
    // integrand peaks at the ψ = 0 endpoint
    let half_phi_sin = (0.5 * geom.phi).sin();
    let v = 2.0 * half_phi_sin * half_phi_sin;
    let integral = tanh_sinh(
        |psi| {
            let c = psi.cos();
            let half_psi_sin = (0.5 * psi).sin();
            let u = 2.0 * half_psi_sin * half_psi_sin;
            c.powf(s) / (u + v - u * v).powf(s + 1.0)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        RELU_Q_QUAD_TOL,
    )
    .ok_or(Error::QuadratureFailure {
        q: s,
        phi: geom.phi,
        tol: RELU_Q_QUAD_TOL,
    })?;
    Ok(rr.powf(s) / (2.0 * PI)
        * gamma(s + 1.0)
        * geom.phi.sin().powf(2.0 * s + 1.0)
        * integral.value)
}

/// NTK of the shallow (z)_+^q network:
/// Θ_q = σ_w² [ J_q + (σ_w² x·x' + σ_b²) q² J_{q-1} ].
pub fn ntk_relu_q(geom: &Geometry, q: f64, sigma_w: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ReLU^q exponent must be positive, got {q}"
        )));
    }
    let j_q = gaussian_relu_moment(geom, q)?;
    let j_qm1 = gaussian_relu_moment(geom, q - 1.0)?;
    let sw2 = sigma_w * sigma_w;
    Ok(sw2 * (j_q + geom.extended_dot() * q * q * j_qm1))
}

/// NTK of a depth-L ReLU network via the layer recursion
///   r_{l+1}² = σ_w²/2 r_l² + σ_b²,
///   cos φ_{l+1} = [σ_w²/(2π) r_l r_l' (sin φ_l + cos φ_l (π - φ_l)) + σ_b²] / (r_{l+1} r'_{l+1}),
///   Θ^{(l+1)} = Σ^{(l+1)} + Θ^{(l)} σ_w²/(2π) (π - φ_l),
/// seeded by Θ^{(1)} = Σ^{(1)} = r_1 r_1' cos φ_1. The output layer has no
/// bias, so the final Σ drops the σ_b² shift.
pub fn ntk_deep_relu(
    x: &[f64],
    x_prime: &[f64],
    depth: usize,
    sigma_w: f64,
    sigma_b: f64,
) -> Result<f64> {
    if depth < 2 {
        return Err(Error::InvalidParameter(format!(
            "deep kernel needs depth >= 2, got {depth}"
        )));
    }
    let g = geometry(x, x_prime, sigma_w, sigma_b)?;
    let sw2 = sigma_w * sigma_w;
    let sb2 = sigma_b * sigma_b;
    let (mut r, mut r_prime, mut phi) = (g.r, g.r_prime, g.phi);
    let mut theta = r * r_prime * phi.cos();
    for l in 1..depth {
        let last = l == depth - 1;
        let core = sw2 / (2.0 * PI) * r * r_prime * (phi.sin() + phi.cos() * (PI - phi));
        let sigma_next = if last { core } else { core + sb2 };
        theta = sigma_next + theta * sw2 / (2.0 * PI) * (PI - phi);
        if !last {
            let r_next = (sw2 / 2.0 * r * r + sb2).sqrt();
            let r_prime_next = (sw2 / 2.0 * r_prime * r_prime + sb2).sqrt();
            // coincident inputs stay exactly coincident; recomputing the
            // angle through acos would inject ~1e-8 phantom angles
            if phi != 0.0 {
                let raw = sigma_next / (r_next * r_prime_next);
                if raw.abs() > 1.0 + COS_CLAMP_TOL {
                    return Err(Error::NumericalInstability(format!(
                        "deep recursion produced cos phi = {raw} at layer {l}"
                    )));
                }
                phi = raw.clamp(-1.0, 1.0).acos();
            }
            r = r_next;
            r_prime = r_prime_next;
        }
    }
    Ok(theta)
}

/// Empirical mean-field NTK (unit step H with H(0) = 0, matching the
/// trainer's subgradient convention):
/// Θ = (1/N) Σ_i [ (w_i·x + b_i)_+ (w_i·x' + b_i)_+ + c_i² (1 + x·x') H H' ].
pub fn ntk_mf_empirical(params: &[NeuronParams], x: &[f64], x_prime: &[f64]) -> Result<f64> {
    if params.is_empty() {
        return Err(Error::InvalidParameter(
            "mean-field kernel needs at least one neuron".into(),
        ));
    }
    let dot: f64 = x.iter().zip(x_prime).map(|(a, b)| a * b).sum();
    let mut sum = 0.0;
    for p in params {
        if p.w.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: p.w.len(),
                got: x.len(),
            });
        }
        let z: f64 = p.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + p.b;
        let z_prime: f64 = p.w.iter().zip(x_prime).map(|(a, b)| a * b).sum::<f64>() + p.b;
        sum += z.max(0.0) * z_prime.max(0.0);
        if z > 0.0 && z_prime > 0.0 {
            sum += p.c * p.c * (1.0 + dot);
        }
    }
    Ok(sum / params.len() as f64)
}

/// Gram of the mean-field kernel through dense products instead of per-entry
/// neuron sums: O(M² N) -> O(M N) activations + two M×N GEMMs.
fn mf_gram(params: &[NeuronParams], dataset: &Dataset) -> Result<DMatrix<f64>> {
    if params.is_empty() {
        return Err(Error::InvalidParameter(
            "mean-field kernel needs at least one neuron".into(),
        ));
    }
    let m = dataset.len();
    let d = dataset.dim();
    let n = params.len();
    if params.iter().any(|p| p.w.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: params.iter().find(|p| p.w.len() != d).unwrap().w.len(),
        });
    }
    // relu(Z) and c-weighted step(Z), point-major
    let mut relu = DMatrix::<f64>::zeros(m, n);
    let mut step_c = DMatrix::<f64>::zeros(m, n);
    let cols: Vec<(usize, Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|j| {
            let p = &params[j];
            let mut col_relu = vec![0.0; m];
            let mut col_step = vec![0.0; m];
            for i in 0..m {
                let z: f64 =
                    p.w.iter()
                        .zip(dataset.point(i))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        + p.b;
                if z > 0.0 {
                    col_relu[i] = z;
                    col_step[i] = p.c;
                }
            }
            (j, col_relu, col_step)
        })
        .collect();
    for (j, col_relu, col_step) in cols {
        relu.column_mut(j).copy_from_slice(&col_relu);
        step_c.column_mut(j).copy_from_slice(&col_step);
    }
    let a1 = &relu * relu.transpose();
    let a2 = &step_c * step_c.transpose();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let dot: f64 = dataset
                .point(i)
                .iter()
                .zip(dataset.point(j))
                .map(|(a, b)| a * b)
                .sum();
            let v = (a1[(i, j)] + (1.0 + dot) * a2[(i, j)]) / n as f64;
            if !v.is_finite() {
                return Err(Error::NonFiniteKernel { i, j });
            }
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

fn is_half_integer(q: f64) -> bool {
    let doubled = 2.0 * q;
    (doubled - doubled.round()).abs() < 1e-9 && (doubled.round() as i64) % 2 != 0
}

/// a_q = Γ²(q) Γ(1/2 - q) / (√π 2^q); a_1 = -1 recovers the ReLU amplitude.
pub fn relu_q_amplitude_constant(q: f64) -> Result<f64> {
    if is_half_integer(q) {
        return Err(Error::NoSingularity(format!(
            "a_q has a pole at half-integer q = {q}"
        )));
    }
    let half_minus_q = 0.5 - q;
    let sign = if half_minus_q > 0.0 {
        1.0
    } else {
        // Γ(1/2 - q) for negative argument via reflection sign
        gamma(half_minus_q).signum()
    };
    let ln_abs =
        2.0 * ln_gamma(q) + ln_gamma_abs(half_minus_q) - 0.5 * PI.ln() - q * std::f64::consts::LN_2;
    Ok(sign * ln_abs.exp())
}

fn ln_gamma_abs(x: f64) -> f64 {
    if x > 0.0 {
        ln_gamma(x)
    } else {
        // |Γ(x)| = π / (|sin(πx)| Γ(1-x))
        PI.ln() - (PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    }
}

/// Kind of closed-form amplitude backing a `SingularityInfo`.
#[derive(Debug, Clone)]
enum AmplitudeKind {
    ShallowNtk { sw: f64, sb: f64 },
    ShallowCov { sw: f64, sb: f64 },
    ReluQ { q: f64, sw: f64, sb: f64 },
    Deep { depth: usize, sw: f64, sb: f64 },
    EmpiricalOnly,
}

/// Leading diagonal singularity K_sing(x, x') = A(x) φ(x, x')^degree.
#[derive(Debug, Clone)]
pub struct SingularityInfo {
    pub degree: f64,
    amplitude: AmplitudeKind,
}

impl SingularityInfo {
    /// A(x); errors for the mean-field kernel, whose amplitude is known
    /// only empirically.
    pub fn amplitude(&self, x: &[f64]) -> Result<f64> {
        let r_at = |sw: f64, sb: f64| (sw * sw * sq_norm(x) + sb * sb).sqrt();
        match &self.amplitude {
            AmplitudeKind::ShallowNtk { sw, sb } => {
                let r = r_at(*sw, *sb);
                Ok(-sw * sw * r * r / (2.0 * PI))
            }
            AmplitudeKind::ShallowCov { sw, sb } => {
                let r = r_at(*sw, *sb);
                Ok(sw * sw * r * r / (6.0 * PI))
            }
            AmplitudeKind::ReluQ { q, sw, sb } => {
                let r = r_at(*sw, *sb);
                let a_q = relu_q_amplitude_constant(*q)?;
                Ok(sw * sw / (2.0 * PI) * r.powf(2.0 * q) * q * q * a_q)
            }
            AmplitudeKind::Deep { depth, sw, sb } => Ok(deep_amplitude(x, *depth, *sw, *sb)),
            AmplitudeKind::EmpiricalOnly => Err(Error::UnsupportedKernel(
                "mean-field amplitude is empirical only".into(),
            )),
        }
    }

    pub fn has_amplitude(&self) -> bool {
        !matches!(self.amplitude, AmplitudeKind::EmpiricalOnly)
    }
}

/// Accumulated amplitude of the depth-L singular part: unrolling
/// Θ_sing^{(l+1)} = -σ_w²/(2π) Θ_diag^{(l)} φ_l + σ_w²/2 Θ_sing^{(l)} with
/// every φ_l projected onto φ_1 through the on-diagonal ratio
/// φ_{l+1}/φ_l = σ_w r_l / (√2 r_{l+1}).
fn deep_amplitude(x: &[f64], depth: usize, sw: f64, sb: f64) -> f64 {
    let sw2 = sw * sw;
    let sb2 = sb * sb;
    let mut r2 = sw2 * sq_norm(x) + sb2;
    let mut theta_diag = r2;
    let mut phi_ratio = 1.0; // φ_l / φ_1 on the diagonal
    let mut acc = 0.0; // Σ_l (σ_w²/2)^{L-1-l} Θ_diag^{(l)} φ_l/φ_1
    let half_sw2 = sw2 / 2.0;
    for l in 1..depth {
        let weight = half_sw2.powi((depth - 1 - l) as i32);
        acc += weight * theta_diag * phi_ratio;
        if l < depth - 1 {
            let r2_next = half_sw2 * r2 + sb2;
            phi_ratio *= (half_sw2 * r2 / r2_next).sqrt();
            theta_diag = r2_next + half_sw2 * theta_diag;
            r2 = r2_next;
        }
    }
    -sw2 / (2.0 * PI) * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Dataset, DistributionSpec};
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_geometry() -> Geometry {
        geometry(&[0.0], &[0.0], 1.0, 1.0).unwrap()
    }

    #[test]
    fn geometry_hand_values() {
        // coincident points at the origin
        let g = unit_geometry();
        assert_eq!((g.r, g.r_prime, g.phi), (1.0, 1.0, 0.0));
        // d=2, x=(1,0), x'=(0,1): r = r' = √2, φ = arccos(1/2) = π/3
        let g = geometry(&[1.0, 0.0], &[0.0, 1.0], 1.0, 1.0).unwrap();
        assert!((g.r - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.phi - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
        // d=1, x=1, x'=-1: numerator vanishes, φ = π/2
        let g = geometry(&[1.0], &[-1.0], 1.0, 1.0).unwrap();
        assert!((g.phi - FRAC_PI_2).abs() < 1e-15);
        // σ_b = 0 rejected
        assert!(geometry(&[1.0], &[1.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn coincident_points_give_exactly_zero_angle() {
        let x = [0.3712, -1.442, 0.9951];
        let g = geometry(&x, &x, 1.3, 0.7).unwrap();
        assert_eq!(g.phi, 0.0);
    }

    #[test]
    fn shallow_relu_hand_values() {
        // diagonal at x=0: Θ = σ_w² r² = 1, Σ = 1/2
        let g = unit_geometry();
        let (theta, sigma) = shallow_relu(&g, 1.0);
        assert!((theta - 1.0).abs() < 1e-15);
        assert!((sigma - 0.5).abs() < 1e-15);
        // φ = π/2, r = r' = √2: Σ = Θ = 1/π
        let g = geometry(&[1.0], &[-1.0], 1.0, 1.0).unwrap();
        let (theta, sigma) = shallow_relu(&g, 1.0);
        assert!((sigma - 1.0 / PI).abs() < 1e-15);
        assert!((theta - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn kernels_are_symmetric_in_their_arguments() {
        let x = [0.3, -0.8, 0.2];
        let y = [-0.1, 0.5, 0.7];
        let kernels = [
            KernelSpec::shallow_ntk(1.2, 0.8).unwrap(),
            KernelSpec::shallow_cov(1.2, 0.8).unwrap(),
            KernelSpec::relu_power(1.3, 1.0, 1.0).unwrap(),
            KernelSpec::deep_relu(4, 1.0, 1.0).unwrap(),
            KernelSpec::mf_empirical(vec![
                NeuronParams {
                    c: 0.5,
                    w: vec![1.0, -0.3, 0.2],
                    b: 0.1,
                },
                NeuronParams {
                    c: -1.2,
                    w: vec![0.4, 0.9, -0.5],
                    b: -0.6,
                },
            ])
            .unwrap(),
        ];
        for k in &kernels {
            let a = k.evaluate(&x, &y).unwrap();
            let b = k.evaluate(&y, &x).unwrap();
            assert!(
                (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                "{}",
                k.kind_name()
            );
        }
    }

    #[test]
    fn relu_q_reduces_to_relu_at_q_one() {
        let mut g = Stream::new(3, stream::MC_ORACLE).gen();
        for _ in 0..60 {
            let x = [g.next_range(-2.0, 2.0), g.next_range(-2.0, 2.0)];
            let y = [g.next_range(-2.0, 2.0), g.next_range(-2.0, 2.0)];
            let sw = g.next_range(0.5, 1.5);
            let sb = g.next_range(0.5, 1.5);
            let geom = geometry(&x, &y, sw, sb).unwrap();
            let via_q = ntk_relu_q(&geom, 1.0, sw).unwrap();
            let (closed, _) = shallow_relu(&geom, sw);
            assert!(
                (via_q - closed).abs() <= 1e-8 * closed.abs().max(1e-12),
                "q=1 quadrature {via_q} vs closed {closed} (phi = {})",
                geom.phi
            );
        }
    }

    #[test]
    fn relu_moment_is_continuous_at_tiny_angles() {
        // near-coincident points: quadrature must stay finite and approach
        // the diagonal closed form as φ -> 0
        for s in [-0.25f64, 0.75, 1.0, 2.0] {
            let diag = gaussian_relu_moment(
                &Geometry {
                    r: 1.3,
                    r_prime: 1.3,
                    phi: 0.0,
                },
                s,
            )
            .unwrap();
            let mut prev_err = f64::INFINITY;
            for phi in [1e-4, 1e-6, 1e-8, 1e-10] {
                let v = gaussian_relu_moment(
                    &Geometry {
                        r: 1.3,
                        r_prime: 1.3,
                        phi,
                    },
                    s,
                )
                .unwrap();
                let err = (v - diag).abs() / diag;
                assert!(err < prev_err.max(1e-7) * 1.5, "s={s} phi={phi}: err {err}");
                prev_err = err;
            }
            assert!(prev_err < 1e-4, "s={s}: residual {prev_err}");
        }
    }

    #[test]
    fn relu_q_diagonal_closed_form() {
        // Σ_1(x,x) = σ_w² r²/2 through the closed-form moment path
        let geom = geometry(&[0.7, -0.4], &[0.7, -0.4], 1.0, 1.0).unwrap();
        assert_eq!(geom.phi, 0.0);
        let j1 = gaussian_relu_moment(&geom, 1.0).unwrap();
        let r2 = geom.r * geom.r_prime;
        assert!((j1 - r2 / 2.0).abs() < 1e-12);
        // diagonal with q <= 1/2 diverges
        let bad = gaussian_relu_moment(&geom, -0.6);
        assert!(bad.is_err());
    }

    /// Bivariate-Gaussian Monte-Carlo oracle for the (z)_+^s moments.
    #[test]
    fn relu_moment_matches_monte_carlo() {
        let cases = [
            (0.75f64, [0.5, 0.2], [-0.3, 0.8]),
            (1.25, [1.0, 0.0], [0.9, 0.4]),
            (2.0, [0.2, -0.4], [0.1, 0.3]),
        ];
        let n = 1_000_000usize;
        for (case_idx, (q, x, y)) in cases.iter().enumerate() {
            let geom = geometry(x, y, 1.0, 1.0).unwrap();
            for s in [*q, *q - 1.0] {
                let predicted = gaussian_relu_moment(&geom, s).unwrap();
                // draw correlated pair: z = r u, z' = r'(cos φ u + sin φ v)
                let mut gen = Stream::new(100 + case_idx as u64, stream::MC_ORACLE).gen();
                let (cos_phi, sin_phi) = (geom.phi.cos(), geom.phi.sin());
                let mut sum = 0.0;
                let mut sum_sq = 0.0;
                for _ in 0..n {
                    let (u, v) = gen.next_normal_pair();
                    let z = geom.r * u;
                    let z_prime = geom.r_prime * (cos_phi * u + sin_phi * v);
                    let val = if z > 0.0 && z_prime > 0.0 {
                        z.powf(s) * z_prime.powf(s)
                    } else {
                        0.0
                    };
                    sum += val;
                    sum_sq += val * val;
                }
                let mean = sum / n as f64;
                let var = (sum_sq / n as f64 - mean * mean).max(0.0);
                let se = (var / n as f64).sqrt();
                assert!(
                    (predicted - mean).abs() <= 3.0 * se.max(1e-12),
                    "s = {s}: quadrature {predicted} vs MC {mean} ± {se}"
                );
            }
        }
    }

    #[test]
    fn deep_depth_two_equals_shallow() {
        let mut g = Stream::new(5, stream::MC_ORACLE).gen();
        for _ in 0..100 {
            let x = [
                g.next_range(-2.0, 2.0),
                g.next_range(-2.0, 2.0),
                g.next_range(-2.0, 2.0),
            ];
            let y = [
                g.next_range(-2.0, 2.0),
                g.next_range(-2.0, 2.0),
                g.next_range(-2.0, 2.0),
            ];
            let sw = g.next_range(0.6, 1.4);
            let sb = g.next_range(0.6, 1.4);
            let deep = ntk_deep_relu(&x, &y, 2, sw, sb).unwrap();
            let (shallow, _) = shallow_relu(&geometry(&x, &y, sw, sb).unwrap(), sw);
            assert!(
                (deep - shallow).abs() <= 1e-12 * shallow.abs().max(1e-300),
                "deep {deep} vs shallow {shallow}"
            );
        }
    }

    #[test]
    fn deep_diagonal_recursion() {
        // x = x': Θ^{(l+1)} = r_{l+1}² + (σ_w²/2) Θ^{(l)} through the hidden
        // layers, with the output layer dropping σ_b²
        let x = [0.4, -0.9];
        let (sw, sb) = (1.1, 0.7);
        for depth in 2..=5usize {
            let got = ntk_deep_relu(&x, &x, depth, sw, sb).unwrap();
            let sw2 = sw * sw;
            let sb2 = sb * sb;
            let mut r2 = sw2 * (x[0] * x[0] + x[1] * x[1]) + sb2;
            let mut theta = r2;
            for l in 1..depth {
                let last = l == depth - 1;
                let r2_next = sw2 / 2.0 * r2 + if last { 0.0 } else { sb2 };
                theta = r2_next + sw2 / 2.0 * theta;
                r2 = sw2 / 2.0 * r2 + sb2;
            }
            assert!(
                (got - theta).abs() <= 1e-12 * theta,
                "depth {depth}: {got} vs recursion {theta}"
            );
        }
    }

    #[test]
    fn deep_gram_is_symmetric_psd() {
        let spec = DistributionSpec::make_mixture(3, 4, 0.5, 8).unwrap();
        let ds = spec.sample(200, 2).unwrap();
        let kernel = KernelSpec::deep_relu(4, 1.0, 1.0).unwrap();
        let gram = kernel.gram(&ds).unwrap();
        assert_eq!(gram.transpose(), gram);
        let decomp = crate::spectral::eigendecompose(&gram).unwrap();
        let trace: f64 = gram.diagonal().iter().sum();
        assert!(
            decomp.eigenvalues.iter().all(|&l| l >= -1e-8 * trace),
            "min eig {}",
            decomp.eigenvalues.last().unwrap()
        );
    }

    #[test]
    fn mf_single_neuron_hand_value() {
        let params = vec![NeuronParams {
            c: 1.0,
            w: vec![1.0],
            b: 0.0,
        }];
        let v = ntk_mf_empirical(&params, &[2.0], &[3.0]).unwrap();
        assert!((v - 13.0).abs() < 1e-14); // 2·3 + 1·(1+6)·1·1
        assert!(ntk_mf_empirical(&[], &[2.0], &[3.0]).is_err());
    }

    /// With (c, w, b) i.i.d. standard normal the empirical MF kernel
    /// converges to the shallow NTK at σ_w = σ_b = 1; the 1/N normalization
    /// is thereby pinned against the analytic kernel.
    #[test]
    fn mf_gaussian_params_converge_to_shallow_ntk() {
        let n = 100_000usize;
        let d = 2usize;
        let s = Stream::new(77, stream::MC_ORACLE);
        let params: Vec<NeuronParams> = (0..n)
            .map(|i| {
                let mut g = s.at(i as u64);
                let mut w = vec![0.0; d];
                g.fill_normal(&mut w);
                NeuronParams {
                    c: g.next_normal(),
                    w,
                    b: g.next_normal(),
                }
            })
            .collect();
        let pairs = [([0.5, -0.2], [0.1, 0.7]), ([1.2, 0.4], [1.0, 0.3])];
        for (x, y) in pairs {
            let emp = ntk_mf_empirical(&params, &x, &y).unwrap();
            let (analytic, _) = shallow_relu(&geometry(&x, &y, 1.0, 1.0).unwrap(), 1.0);
            // per-neuron summand variance estimated on a subsample
            let dot: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let mut var_acc = 0.0;
            for p in params.iter().take(20_000) {
                let z: f64 = p.w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + p.b;
                let zp: f64 = p.w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + p.b;
                let mut t = z.max(0.0) * zp.max(0.0);
                if z > 0.0 && zp > 0.0 {
                    t += p.c * p.c * (1.0 + dot);
                }
                var_acc += (t - analytic) * (t - analytic);
            }
            let se = (var_acc / 20_000.0 / n as f64).sqrt();
            assert!(
                (emp - analytic).abs() <= 3.0 * se,
                "MF {emp} vs analytic {analytic} ± {se}"
            );
        }
    }

    #[test]
    fn mf_gram_fast_path_matches_pointwise_eval() {
        let s = Stream::new(31, stream::MC_ORACLE);
        let params: Vec<NeuronParams> = (0..50)
            .map(|i| {
                let mut g = s.at(i as u64);
                NeuronParams {
                    c: g.next_normal(),
                    w: vec![g.next_normal(), g.next_normal()],
                    b: g.next_normal(),
                }
            })
            .collect();
        let kernel = KernelSpec::mf_empirical(params.clone()).unwrap();
        let spec = DistributionSpec::make_mixture(2, 3, 0.5, 2).unwrap();
        let ds = spec.sample(20, 9).unwrap();
        let gram = kernel.gram(&ds).unwrap();
        for i in [0usize, 7, 19] {
            for j in [3usize, 12] {
                let direct = ntk_mf_empirical(&params, ds.point(i), ds.point(j)).unwrap();
                assert!(
                    (gram[(i, j)] - direct).abs() <= 1e-10 * direct.abs().max(1e-12),
                    "({i},{j}): {} vs {direct}",
                    gram[(i, j)]
                );
            }
        }
    }

    #[test]
    fn singularity_metadata() {
        let ntk = KernelSpec::shallow_ntk(1.0, 1.0).unwrap();
        let info = ntk.singularity_info().unwrap();
        assert_eq!(info.degree, 1.0);
        // A(0) = -σ_w² r²/2π = -1/2π at the origin
        let a = info.amplitude(&[0.0, 0.0]).unwrap();
        assert!((a + 1.0 / (2.0 * PI)).abs() < 1e-15);

        let cov = KernelSpec::shallow_cov(1.0, 1.0).unwrap();
        let info = cov.singularity_info().unwrap();
        assert_eq!(info.degree, 3.0);
        let a = info.amplitude(&[0.0]).unwrap();
        assert!((a - 1.0 / (6.0 * PI)).abs() < 1e-15);

        // ReLU^q: degree 2q-1; q = 1 amplitude matches the shallow NTK
        let q1 = KernelSpec::relu_power(1.0, 1.0, 1.0).unwrap();
        let info = q1.singularity_info().unwrap();
        assert_eq!(info.degree, 1.0);
        let x = [0.6, -0.1];
        let a_q = info.amplitude(&x).unwrap();
        let a_relu = ntk.singularity_info().unwrap().amplitude(&x).unwrap();
        assert!((a_q - a_relu).abs() < 1e-12 * a_relu.abs());

        let q2 = KernelSpec::relu_power(2.0, 1.0, 1.0).unwrap();
        assert_eq!(q2.singularity_info().unwrap().degree, 3.0);

        // half-integer q has no singularity
        assert!(matches!(
            KernelSpec::relu_power(1.5, 1.0, 1.0)
                .unwrap()
                .singularity_info(),
            Err(Error::NoSingularity(_))
        ));

        // MF: degree 1, amplitude empirical only
        let mf = KernelSpec::mf_empirical(vec![NeuronParams {
            c: 1.0,
            w: vec![0.0],
            b: 0.5,
        }])
        .unwrap();
        let info = mf.singularity_info().unwrap();
        assert_eq!(info.degree, 1.0);
        assert!(!info.has_amplitude());
        assert!(info.amplitude(&[0.0]).is_err());
    }

    /// Numeric extraction of the singular amplitude. The two-scale symmetric
    /// stencil D(ε) = [K(x, x+2εu) + K(x, x-2εu)] − 4[K(x, x+εu) + K(x, x-εu)]
    /// plus 6 K(x,x) annihilates the smooth expansion through ε³, leaving
    /// the singular A(x) φ^α term; dividing by the same stencil applied to
    /// φ^α recovers A(x) up to O(ε)-suppressed corrections.
    #[test]
    fn singular_amplitudes_match_numeric_extraction() {
        let x = vec![0.5, -0.3];
        // generic direction for the single-angle kernels; for deep kernels
        // the reported amplitude projects every layer angle onto φ_1 via the
        // on-diagonal ratio, which is exact along directions with r' = r,
        // i.e. u ⊥ x
        let u_generic = [0.8, 0.6];
        let u_perp = {
            let n = (0.3f64 * 0.3 + 0.5 * 0.5).sqrt();
            [0.3 / n, 0.5 / n]
        };

        let extract = |kernel: &KernelSpec, alpha: f64, eps: f64, u: &[f64; 2]| -> f64 {
            let shift = |e: f64| vec![x[0] + e * u[0], x[1] + e * u[1]];
            let phi_pow = |y: &[f64]| {
                geometry(&x, y, kernel.sigma_w, kernel.sigma_b)
                    .unwrap()
                    .phi
                    .powf(alpha)
            };
            let k = |y: &[f64]| kernel.evaluate(&x, y).unwrap();
            let k0 = kernel.evaluate(&x, &x).unwrap();
            let stencil = |f: &dyn Fn(&[f64]) -> f64, f0: f64| {
                f(&shift(2.0 * eps)) + f(&shift(-2.0 * eps))
                    - 4.0 * (f(&shift(eps)) + f(&shift(-eps)))
                    + 6.0 * f0
            };
            stencil(&k, k0) / stencil(&phi_pow, 0.0)
        };

        // the q = 2 stencil signal scales as ε³ and must stay above the
        // 1e-8-relative quadrature noise, hence the larger ε and tolerance
        let cases: Vec<(KernelSpec, f64, [f64; 2], f64, f64)> = vec![
            (
                KernelSpec::shallow_ntk(1.0, 1.0).unwrap(),
                1.0,
                u_generic,
                1e-3,
                0.02,
            ),
            (
                KernelSpec::shallow_cov(1.0, 1.0).unwrap(),
                3.0,
                u_generic,
                1e-3,
                0.02,
            ),
            (
                KernelSpec::relu_power(0.75, 1.0, 1.0).unwrap(),
                0.5,
                u_generic,
                1e-3,
                0.02,
            ),
            (
                KernelSpec::relu_power(1.25, 1.0, 1.0).unwrap(),
                1.5,
                u_generic,
                1e-3,
                0.02,
            ),
            (
                KernelSpec::relu_power(2.0, 1.0, 1.0).unwrap(),
                3.0,
                u_generic,
                1e-2,
                0.05,
            ),
            (
                KernelSpec::deep_relu(3, 1.0, 1.0).unwrap(),
                1.0,
                u_perp,
                1e-3,
                0.02,
            ),
            (
                KernelSpec::deep_relu(4, 1.0, 1.0).unwrap(),
                1.0,
                u_perp,
                1e-3,
                0.02,
            ),
        ];
        for (kernel, alpha, u, eps, tol) in cases {
            let info = kernel.singularity_info().unwrap();
            assert_eq!(info.degree, alpha, "{}", kernel.kind_name());
            let predicted = info.amplitude(&x).unwrap();
            let est = extract(&kernel, alpha, eps, &u);
            let rel = (est - predicted).abs() / predicted.abs();
            assert!(
                rel < tol,
                "{}: extracted {est} vs predicted {predicted} (rel {rel:.2e})",
                kernel.kind_name()
            );
        }
    }

    #[test]
    fn gram_reports_offending_entry() {
        let spec = DistributionSpec::isotropic_gaussian(1, 1.0).unwrap();
        let ds = Dataset::from_points(spec, vec![vec![0.0], vec![1.0]]).unwrap();
        // NaN neuron weight poisons the kernel value
        let kernel = KernelSpec::mf_empirical(vec![NeuronParams {
            c: f64::NAN,
            w: vec![1.0],
            b: 1.0,
        }])
        .unwrap();
        assert!(matches!(
            kernel.gram(&ds),
            Err(Error::NonFiniteKernel { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        /// PSD on random point sets: min eigenvalue >= -1e-8 · trace.
        #[test]
        fn gram_matrices_are_psd(seed in 0u64..500) {
            let spec = DistributionSpec::make_mixture(2, 3, 0.5, seed).unwrap();
            let ds = spec.sample(40, seed).unwrap();
            for kernel in [
                KernelSpec::shallow_ntk(1.0, 1.0).unwrap(),
                KernelSpec::shallow_cov(1.0, 1.0).unwrap(),
                KernelSpec::deep_relu(3, 1.0, 1.0).unwrap(),
            ] {
                let gram = kernel.gram(&ds).unwrap();
                let decomp = crate::spectral::eigendecompose(&gram).unwrap();
                let trace: f64 = gram.diagonal().iter().sum();
                prop_assert!(decomp.eigenvalues.iter().all(|&l| l >= -1e-8 * trace));
            }
        }

        /// Joint rescaling (σ_w, σ_b) -> (cσ_w, cσ_b) multiplies the shallow
        /// NTK pointwise by c⁴.
        #[test]
        fn shallow_ntk_joint_scale_homogeneity(
            c in 0.3f64..3.0,
            x0 in -2.0f64..2.0,
            x1 in -2.0f64..2.0,
            y0 in -2.0f64..2.0,
            y1 in -2.0f64..2.0,
        ) {
            let x = [x0, x1];
            let y = [y0, y1];
            let base = KernelSpec::shallow_ntk(1.0, 1.0).unwrap().evaluate(&x, &y).unwrap();
            let scaled = KernelSpec::shallow_ntk(c, c).unwrap().evaluate(&x, &y).unwrap();
            prop_assert!(
                (scaled - c.powi(4) * base).abs() <= 1e-10 * (c.powi(4) * base).abs().max(1e-12)
            );
        }
    }
}
