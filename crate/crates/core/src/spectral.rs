//! Discretized evolution operator: assembly, diagonalization, linearized
//! loss trajectories, and empirical power-law fits.

use nalgebra::DMatrix;

use crate::distributions::Dataset;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Relative threshold below which trailing eigenvalues are treated as
/// discretization noise and excluded from power-law fits.
pub const EIGENVALUE_NOISE_FLOOR: f64 = 1e-14;
/// PSD rounding tolerance: eigenvalues in [-tol·λ_0, 0) are clamped to 0.
pub const PSD_CLAMP_TOL: f64 = 1e-8;

/// Sorted symmetric eigendecomposition. Columns of `eigenvectors` align with
/// `eigenvalues`, which are descending; ties keep their pre-sort order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Number of small negative eigenvalues clamped to zero (PSD mode only).
    pub clamped_negative: usize,
    /// Size of the dataset the operator was built on (= matrix dimension).
    pub dataset_size: usize,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn top_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// N_λ: number of eigenvalues strictly greater than `lambda`.
    pub fn counting_function(&self, lambda: f64) -> usize {
        self.eigenvalues.partition_point(|&v| v > lambda)
    }
}

/// A_ij = Θ(x_i, x_j) / M: the empirical-measure discretization of the
/// evolution operator.
pub fn build_operator_matrix(dataset: &Dataset, kernel: &KernelSpec) -> Result<DMatrix<f64>> {
    let mut gram = kernel.gram(dataset)?;
    gram /= dataset.len() as f64;
    Ok(gram)
}

/// Full symmetric eigendecomposition, eigenvalues sorted descending. No
/// PSD clamping is applied; use [`eigendecompose_psd`] for operator spectra.
pub fn eigendecompose(matrix: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    decompose(matrix, false)
}

/// Eigendecomposition of a PSD operator: negative eigenvalues within
/// rounding (≥ -1e-8 λ_0) are clamped to zero and counted; anything more
/// negative is an error.
pub fn eigendecompose_psd(matrix: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    decompose(matrix, true)
}

fn decompose(matrix: &DMatrix<f64>, psd: bool) -> Result<SpectralDecomposition> {
    let m = matrix.nrows();
    if m == 0 || matrix.ncols() != m {
        return Err(Error::InvalidParameter(format!(
            "eigendecomposition needs a nonempty square matrix, got {}x{}",
            m,
            matrix.ncols()
        )));
    }
    let sym_err = (matrix - matrix.transpose()).norm();
    if sym_err > 1e-10 * matrix.norm().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (asymmetry norm {sym_err:.3e})"
        )));
    }
    let eig = matrix
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| {
            Error::EigenFailure(format!(
                "symmetric QR did not converge (dim {m}, norm {:.3e})",
                matrix.norm()
            ))
        })?;

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }

    let mut clamped = 0;
    if psd {
        let top = eigenvalues[0];
        if top <= 0.0 {
            return Err(Error::NumericalInstability(
                "operator has no positive eigenvalue".into(),
            ));
        }
        let floor = -PSD_CLAMP_TOL * top;
        for v in eigenvalues.iter_mut() {
            if *v < floor {
                return Err(Error::NumericalInstability(format!(
                    "eigenvalue {v:.6e} below the PSD rounding floor {floor:.6e}"
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
        if clamped > 0 {
            log::debug!("clamped {clamped} small negative eigenvalues to zero");
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        clamped_negative: clamped,
        dataset_size: m,
    })
}

/// L(t) = 1/2 Σ_n e^{-2 λ_n t} c_n² on a grid of times.
pub fn loss_trajectory(
    decomp: &SpectralDecomposition,
    coefficients: &[f64],
    times: &[f64],
) -> Result<Vec<f64>> {
    if coefficients.len() != decomp.len() {
        return Err(Error::DimensionMismatch {
            expected: decomp.len(),
            got: coefficients.len(),
        });
    }
    if let Some(&t) = times.iter().find(|&&t| t < 0.0 || !t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "loss trajectory needs t >= 0, got {t}"
        )));
    }
    Ok(times
        .iter()
        .map(|&t| {
            0.5 * decomp
                .eigenvalues
                .iter()
                .zip(coefficients)
                .map(|(&l, &c)| {
                    let e = -2.0 * l * t;
                    if e < -745.0 {
                        0.0
                    } else {
                        c * c * e.exp()
                    }
                })
                .sum::<f64>()
        })
        .collect())
}

/// Discrete-gradient-descent analogue of [`loss_trajectory`]:
/// L_k = 1/2 Σ_n (1 - η λ_n)^{2k} c_n². This is the faithful linearized
/// trajectory of a step-η trainer; near the critical rate the continuous
/// exponential misstates the top-mode decay.
pub fn gd_loss_trajectory(
    decomp: &SpectralDecomposition,
    coefficients: &[f64],
    eta: f64,
    steps: &[usize],
) -> Result<Vec<f64>> {
    if coefficients.len() != decomp.len() {
        return Err(Error::DimensionMismatch {
            expected: decomp.len(),
            got: coefficients.len(),
        });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {eta}"
        )));
    }
    Ok(steps
        .iter()
        .map(|&k| {
            0.5 * decomp
                .eigenvalues
                .iter()
                .zip(coefficients)
                .map(|(&l, &c)| {
                    let rho_sq = (1.0 - eta * l).powi(2);
                    c * c * rho_sq.powi(k as i32)
                })
                .sum::<f64>()
        })
        .collect())
}

/// Least-squares power law v ≈ coefficient · n^{-exponent} in log-log space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub coefficient: f64,
    pub exponent: f64,
    pub n_min: usize,
    pub n_max: usize,
    /// RMS of log-log residuals over the fit window.
    pub residual_rms: f64,
}

/// Fit `values[n] ≈ C n^{-e}` over the index window [n_min, n_max]
/// (inclusive, n_min >= 1 so log n is defined).
pub fn fit_power_law(values: &[f64], n_min: usize, n_max: usize) -> Result<PowerLawFit> {
    if n_min < 1 || n_min >= n_max || n_max >= values.len() {
        return Err(Error::InvalidParameter(format!(
            "fit window [{n_min}, {n_max}] invalid for sequence of length {}",
            values.len()
        )));
    }
    if n_max - n_min + 1 < 10 {
        return Err(Error::InvalidParameter(format!(
            "fit window [{n_min}, {n_max}] has fewer than 10 points"
        )));
    }
    let xs: Vec<f64> = (n_min..=n_max).map(|n| n as f64).collect();
    let ys = &values[n_min..=n_max];
    if let Some(bad) = ys.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs positive values; value at n = {} is {}",
            n_min + bad,
            ys[bad]
        )));
    }
    fit_log_log(&xs, ys, n_min, n_max)
}

/// Fit `y ≈ C x^{-e}` for arbitrary positive abscissae (e.g. loss vs time).
pub fn fit_power_law_xy(x: &[f64], y: &[f64]) -> Result<PowerLawFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "power-law fit needs at least 10 points, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter(
            "power-law fit needs strictly positive data".into(),
        ));
    }
    fit_log_log(x, y, 0, x.len() - 1)
}

fn fit_log_log(x: &[f64], y: &[f64], n_min: usize, n_max: usize) -> Result<PowerLawFit> {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_x = lx.iter().sum::<f64>() / n;
    let mean_y = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxx += (a - mean_x) * (a - mean_x);
        sxy += (a - mean_x) * (b - mean_y);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate fit window: all abscissae equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let mut ss = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        let r = b - (intercept + slope * a);
        ss += r * r;
    }
    Ok(PowerLawFit {
        coefficient: intercept.exp(),
        exponent: -slope,
        n_min,
        n_max,
        residual_rms: (ss / n).sqrt(),
    })
}

/// Default eigenvalue fit window: the top of the spectrum converges to its
/// asymptote later in higher dimension, and the last ~3M/4 indices feel the
/// discretization cutoff.
pub fn default_fit_window(dim: usize, m: usize) -> (usize, usize) {
    (20 * 1.max(dim.saturating_sub(1)), m / 4)
}

/// Fit the spectrum of a decomposition over a window, trimming indices whose
/// eigenvalues sit below the relative noise floor.
pub fn fit_spectrum(
    decomp: &SpectralDecomposition,
    n_min: usize,
    n_max: usize,
) -> Result<PowerLawFit> {
    let floor = EIGENVALUE_NOISE_FLOOR * decomp.top_eigenvalue();
    let mut hi = n_max.min(decomp.len() - 1);
    while hi > n_min && decomp.eigenvalues[hi] <= floor {
        hi -= 1;
    }
    fit_power_law(&decomp.eigenvalues, n_min, hi)
}
