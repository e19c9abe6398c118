//! Experiment configuration: one TOML file per experiment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use ntklab::distributions::DistributionSpec;
use ntklab::kernels::KernelSpec;
use ntklab::targets::TargetSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Eigenvalue spectrum of the evolution operator + (ν, Λ) prediction.
    Spectrum,
    /// Target expansion coefficients and tail sums + (κ, K) prediction.
    Coefficients,
    /// Linearized loss trajectory + (ξ, C) prediction.
    LinearizedLoss,
    /// Finite-width NTK-mode training vs the linearized trajectory.
    FiniteTraining,
    /// Mean-field training: loss trajectory + NTK spectra over time.
    MfTraining,
    /// Spectrum sweep over ReLU^q exponents.
    QSweep,
    /// Spectrum sweep over network depths.
    DepthSweep,
    /// Eigenvalue-degeneracy comparison across μ variants.
    Degeneracy,
}

impl ExperimentKind {
    pub fn all() -> &'static [(&'static str, &'static str)] {
        &[
            (
                "spectrum",
                "operator eigenvalues with power-law fit and (nu, Lambda) prediction",
            ),
            (
                "coefficients",
                "target expansion coefficients c_n, tails s_n and (kappa, K) prediction",
            ),
            (
                "linearized-loss",
                "eigenbasis loss trajectory with C t^-xi overlay",
            ),
            (
                "finite-training",
                "gradient-descent training of a finite net vs the linearized trajectory",
            ),
            (
                "mf-training",
                "mean-field training with NTK spectra extracted over time",
            ),
            ("q-sweep", "spectra of ReLU^q kernels across q"),
            ("depth-sweep", "spectra of deep ReLU kernels across depth"),
            (
                "degeneracy",
                "eigenvalue clustering across data-distribution variants",
            ),
        ]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionConfig {
    GaussianMixture {
        dim: usize,
        components: usize,
        sigma: f64,
        seed: u64,
    },
    UniformCube {
        dim: usize,
        half_width: f64,
    },
    IsotropicGaussian {
        dim: usize,
        sigma: f64,
    },
}

impl DistributionConfig {
    pub fn dim(&self) -> usize {
        match self {
            DistributionConfig::GaussianMixture { dim, .. }
            | DistributionConfig::UniformCube { dim, .. }
            | DistributionConfig::IsotropicGaussian { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<DistributionSpec> {
        Ok(match *self {
            DistributionConfig::GaussianMixture {
                dim,
                components,
                sigma,
                seed,
            } => DistributionSpec::make_mixture(dim, components, sigma, seed)?,
            DistributionConfig::UniformCube { dim, half_width } => {
                DistributionSpec::uniform_cube(dim, half_width)?
            }
            DistributionConfig::IsotropicGaussian { dim, sigma } => {
                DistributionSpec::isotropic_gaussian(dim, sigma)?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    ShallowReluNtk {
        #[serde(default = "one")]
        sigma_w: f64,
        #[serde(default = "one")]
        sigma_b: f64,
    },
    ShallowReluCov {
        #[serde(default = "one")]
        sigma_w: f64,
        #[serde(default = "one")]
        sigma_b: f64,
    },
    ReluPower {
        q: f64,
        #[serde(default = "one")]
        sigma_w: f64,
        #[serde(default = "one")]
        sigma_b: f64,
    },
    DeepRelu {
        depth: usize,
        #[serde(default = "one")]
        sigma_w: f64,
        #[serde(default = "one")]
        sigma_b: f64,
    },
    /// Mean-field kernel loaded from a trainer checkpoint (text rows
    /// `c,w_1,...,w_d,b`). The path is resolved relative to the config file.
    MfCheckpoint { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

impl KernelConfig {
    pub fn build(&self, config_dir: &Path) -> Result<KernelSpec> {
        Ok(match self {
            KernelConfig::ShallowReluNtk { sigma_w, sigma_b } => {
                KernelSpec::shallow_ntk(*sigma_w, *sigma_b)?
            }
            KernelConfig::ShallowReluCov { sigma_w, sigma_b } => {
                KernelSpec::shallow_cov(*sigma_w, *sigma_b)?
            }
            KernelConfig::ReluPower {
                q,
                sigma_w,
                sigma_b,
            } => KernelSpec::relu_power(*q, *sigma_w, *sigma_b)?,
            KernelConfig::DeepRelu {
                depth,
                sigma_w,
                sigma_b,
            } => KernelSpec::deep_relu(*depth, *sigma_w, *sigma_b)?,
            KernelConfig::MfCheckpoint { path } => {
                let resolved = if path.is_absolute() {
                    path.clone()
                } else {
                    config_dir.join(path)
                };
                let params = crate::checkpoint::read_checkpoint(&resolved)
                    .with_context(|| format!("loading checkpoint {}", resolved.display()))?;
                KernelSpec::mf_empirical(params)?
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetConfig {
    Gp {
        #[serde(default = "default_sampler")]
        sampler: GpSamplerConfig,
        /// Draws are averaged over these seeds (tail sums and loss
        /// trajectories estimate their expectations).
        seeds: Vec<u64>,
        #[serde(default = "one")]
        sigma_w: f64,
        #[serde(default = "one")]
        sigma_b: f64,
    },
    BallIndicator {
        radius: f64,
        jump: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpSamplerConfig {
    Cholesky,
    WideNetwork { width: usize },
}

fn default_sampler() -> GpSamplerConfig {
    GpSamplerConfig::Cholesky
}

impl TargetConfig {
    /// Instantiate the target(s); GP targets produce one per seed.
    pub fn build(&self) -> Result<Vec<TargetSpec>> {
        Ok(match self {
            TargetConfig::Gp {
                sampler,
                seeds,
                sigma_w,
                sigma_b,
            } => {
                if seeds.is_empty() {
                    bail!("GP target needs at least one seed");
                }
                let cov = KernelSpec::shallow_cov(*sigma_w, *sigma_b)?;
                seeds
                    .iter()
                    .map(|&s| match sampler {
                        GpSamplerConfig::Cholesky => TargetSpec::gp_cholesky(cov.clone(), s),
                        GpSamplerConfig::WideNetwork { width } => {
                            TargetSpec::gp_wide_network(cov.clone(), s, *width)
                        }
                    })
                    .collect()
            }
            TargetConfig::BallIndicator { radius, jump } => {
                vec![TargetSpec::ball_indicator(*radius, *jump)?]
            }
        })
    }

    pub fn covariance(&self) -> Option<Result<KernelSpec>> {
        match self {
            TargetConfig::Gp {
                sigma_w, sigma_b, ..
            } => Some(KernelSpec::shallow_cov(*sigma_w, *sigma_b).map_err(anyhow::Error::from)),
            TargetConfig::BallIndicator { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Eigenvalue fit window [n_min, n_max]; defaults to
    /// [20·max(1, d−1), M/4].
    pub spectrum_window: Option<(usize, usize)>,
    /// Coefficient-tail fit window; defaults to [15, M/16] for GP targets
    /// and [30, M/8] for indicator targets (finite-M systematics bound the
    /// clean range from both sides).
    pub tail_window: Option<(usize, usize)>,
    /// Mode-index window mapped to the loss time grid through
    /// t = n^ν/(2Λ); defaults to [10, 60].
    pub time_window_modes: Option<(f64, f64)>,
    /// Points in the log-spaced time grid (default 48).
    pub time_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    /// Monte-Carlo sample count for the ⟨·⟩_μ averages.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    /// Sphere samples for the indicator surface integral.
    #[serde(default = "default_surface_samples")]
    pub surface_samples: usize,
    #[serde(default = "default_mc_seed")]
    pub mc_seed: u64,
    #[serde(default = "default_surface_seed")]
    pub surface_seed: u64,
}

fn default_mc_samples() -> usize {
    100_000
}
fn default_surface_samples() -> usize {
    100_000
}
fn default_mc_seed() -> u64 {
    555
}
fn default_surface_seed() -> u64 {
    556
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig {
            mc_samples: default_mc_samples(),
            surface_samples: default_surface_samples(),
            mc_seed: default_mc_seed(),
            surface_seed: default_surface_seed(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub width: usize,
    pub steps: usize,
    /// Learning rate as a fraction of the critical rate 2/λ_0.
    #[serde(default = "default_eta_factor")]
    pub eta_factor: f64,
    #[serde(default)]
    pub net_seed: u64,
    /// Steps at which parameter checkpoints are written (mean-field runs
    /// also extract NTK spectra there).
    #[serde(default)]
    pub checkpoint_steps: Vec<usize>,
}

fn default_eta_factor() -> f64 {
    ntklab::trainer::DEFAULT_ETA_SAFETY
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub depths: Vec<usize>,
    /// Optional per-member fit windows, aligned with `q`/`depths`; the
    /// asymptotic window shifts right with the singularity degree.
    #[serde(default)]
    pub windows: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Dataset size M.
    pub m: usize,
    pub distribution: DistributionConfig,
    pub kernel: Option<KernelConfig>,
    pub target: Option<TargetConfig>,
    #[serde(default = "default_dataset_seed")]
    pub dataset_seed: u64,
    /// Output directory; falls back to $NTKLAB_OUT or ./ntklab-artifacts.
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub theory: TheoryConfig,
    pub training: Option<TrainingConfig>,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_dataset_seed() -> u64 {
    101
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((config, dir))
    }

    /// Static validation: collects problems without running anything.
    pub fn validate(&self) -> Vec<String> {
        let mut report = Vec::new();
        if self.m == 0 {
            report.push("m must be >= 1".into());
        }
        if self.m > 5000 {
            report.push(format!(
                "warning: M = {} implies an O(M^3) = {:.1e}-op diagonalization; expect long runtimes",
                self.m,
                (self.m as f64).powi(3)
            ));
        }
        if let Err(e) = self.distribution.build() {
            report.push(format!("distribution: {e}"));
        }
        // sweeps build their kernels from [sweep]; mean-field training and
        // the degeneracy comparison construct their own
        let needs_kernel = !matches!(
            self.kind,
            ExperimentKind::Degeneracy
                | ExperimentKind::MfTraining
                | ExperimentKind::QSweep
                | ExperimentKind::DepthSweep
        );
        match (&self.kernel, needs_kernel) {
            (None, true) => report.push("experiment needs a [kernel] section".into()),
            (Some(k), _) => {
                // checkpoint paths are resolved at run time; validate the rest
                if !matches!(k, KernelConfig::MfCheckpoint { .. }) {
                    if let Err(e) = k.build(Path::new(".")) {
                        report.push(format!("kernel: {e}"));
                    }
                }
                if let KernelConfig::ReluPower { q, .. } = k {
                    let doubled = 2.0 * q;
                    if (doubled - doubled.round()).abs() < 1e-9 && (doubled.round() as i64) % 2 != 0
                    {
                        report.push(format!(
                            "half-integer q = {q}: the NTK is smooth there and no power-law asymptote is predicted"
                        ));
                    }
                }
            }
            _ => {}
        }
        match self.kind {
            ExperimentKind::Coefficients | ExperimentKind::LinearizedLoss => {
                if self.target.is_none() {
                    report.push("experiment needs a [target] section".into());
                }
            }
            ExperimentKind::FiniteTraining | ExperimentKind::MfTraining => {
                if self.target.is_none() {
                    report.push("experiment needs a [target] section".into());
                }
                if self.training.is_none() {
                    report.push("experiment needs a [training] section".into());
                }
            }
            ExperimentKind::QSweep => {
                if self.sweep.q.is_empty() {
                    report.push("q-sweep needs [sweep] q = [...]".into());
                }
            }
            ExperimentKind::DepthSweep => {
                if self.sweep.depths.is_empty() {
                    report.push("depth-sweep needs [sweep] depths = [...]".into());
                } else if self.sweep.depths.iter().any(|&l| l < 2) {
                    report.push("depths must be >= 2".into());
                }
            }
            _ => {}
        }
        if let Some(t) = &self.target {
            if let Err(e) = t.build() {
                report.push(format!("target: {e}"));
            }
        }
        if let Some(tr) = &self.training {
            if tr.width == 0 || tr.steps == 0 {
                report.push("training width and steps must be >= 1".into());
            }
            if !(tr.eta_factor > 0.0) {
                report.push("training eta_factor must be positive".into());
            }
        }
        if let Some(points) = self.fit.time_points {
            if points == 0 {
                report.push("time grid must have at least one point".into());
            }
        }
        if let Some((lo, hi)) = self.fit.spectrum_window {
            if lo < 1 || lo >= hi {
                report.push(format!("spectrum window [{lo}, {hi}] is invalid"));
            }
        }
        report
    }

    /// Resolved output directory.
    pub fn resolve_output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output_dir {
            return dir.clone();
        }
        if let Ok(root) = std::env::var("NTKLAB_OUT") {
            return PathBuf::from(root);
        }
        PathBuf::from("ntklab-artifacts")
    }
}
