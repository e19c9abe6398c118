//! Data densities μ(x): construction, sampling, and Monte-Carlo averaging.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// A sampleable data density with an evaluable pdf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DistributionKind {
    /// Equally weighted isotropic Gaussians.
    GaussianMixture { centers: Vec<Vec<f64>>, sigma: f64 },
    /// Uniform on [-half_width, half_width]^d.
    UniformCube { half_width: f64 },
    /// Centered isotropic Gaussian.
    IsotropicGaussian { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: DistributionKind,
}

impl DistributionSpec {
    /// Mixture of `n_components` Gaussians with centers drawn i.i.d. uniform
    /// on [-1, 1]^d. The center stream is independent of the sample stream,
    /// so datasets of any size share the same centers.
    pub fn make_mixture(dim: usize, n_components: usize, sigma: f64, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if n_components == 0 {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture sigma must be positive, got {sigma}"
            )));
        }
        let centers_stream = Stream::new(seed, stream::MIXTURE_CENTERS);
        let centers = (0..n_components)
            .map(|i| {
                let mut g = centers_stream.at(i as u64);
                (0..dim).map(|_| g.next_range(-1.0, 1.0)).collect()
            })
            .collect();
        Ok(DistributionSpec {
            dim,
            kind: DistributionKind::GaussianMixture { centers, sigma },
        })
    }

    /// Mixture with explicitly placed centers (used by tests and the
    /// degeneracy experiment).
    pub fn mixture_with_centers(centers: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component".into(),
            ));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture sigma must be positive, got {sigma}"
            )));
        }
        let dim = centers[0].len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidParameter(
                "mixture centers must share one positive dimension".into(),
            ));
        }
        Ok(DistributionSpec {
            dim,
            kind: DistributionKind::GaussianMixture { centers, sigma },
        })
    }

    pub fn uniform_cube(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 || !(half_width > 0.0) {
            return Err(Error::InvalidParameter(
                "uniform cube needs dim >= 1 and positive half-width".into(),
            ));
        }
        Ok(DistributionSpec {
            dim,
            kind: DistributionKind::UniformCube { half_width },
        })
    }

    pub fn isotropic_gaussian(dim: usize, sigma: f64) -> Result<Self> {
        if dim == 0 || !(sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "isotropic Gaussian needs dim >= 1 and positive sigma".into(),
            ));
        }
        Ok(DistributionSpec {
            dim,
            kind: DistributionKind::IsotropicGaussian { sigma },
        })
    }

    /// μ(x).
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let d = self.dim as f64;
        Ok(match &self.kind {
            DistributionKind::GaussianMixture { centers, sigma } => {
                let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.5 * d);
                let inv_two_var = 1.0 / (2.0 * sigma * sigma);
                let sum: f64 = centers
                    .iter()
                    .map(|c| {
                        let sq: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-sq * inv_two_var).exp()
                    })
                    .sum();
                norm * sum / centers.len() as f64
            }
            DistributionKind::UniformCube { half_width } => {
                if x.iter().all(|v| v.abs() <= *half_width) {
                    (2.0 * half_width).powf(-d)
                } else {
                    0.0
                }
            }
            DistributionKind::IsotropicGaussian { sigma } => {
                let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.5 * d);
                let sq: f64 = x.iter().map(|a| a * a).sum();
                norm * (-sq / (2.0 * sigma * sigma)).exp()
            }
        })
    }

    /// Upper bound for μ over R^d (for mixtures, the max over component
    /// centers — exact when components are well separated, a tight bound
    /// otherwise). Used to set density floors in importance sampling.
    pub fn density_max(&self) -> f64 {
        match &self.kind {
            DistributionKind::GaussianMixture { centers, .. } => centers
                .iter()
                .map(|c| self.density(c).expect("center has spec dimension"))
                .fold(0.0, f64::max),
            DistributionKind::UniformCube { half_width } => {
                (2.0 * half_width).powf(-(self.dim as f64))
            }
            DistributionKind::IsotropicGaussian { .. } => {
                self.density(&vec![0.0; self.dim]).expect("origin")
            }
        }
    }

    /// Draw M i.i.d. samples. Point i is a pure function of (spec, seed, i).
    pub fn sample(&self, m: usize, seed: u64) -> Result<Dataset> {
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one sample".into()));
        }
        let d = self.dim;
        let s = Stream::new(seed, stream::DATA_POINTS);
        let mut points = vec![0.0; m * d];
        for (i, chunk) in points.chunks_mut(d).enumerate() {
            let mut g = s.at(i as u64);
            match &self.kind {
                DistributionKind::GaussianMixture { centers, sigma } => {
                    let k = g.next_index(centers.len());
                    g.fill_normal(chunk);
                    for (v, c) in chunk.iter_mut().zip(&centers[k]) {
                        *v = c + sigma * *v;
                    }
                }
                DistributionKind::UniformCube { half_width } => {
                    for v in chunk.iter_mut() {
                        *v = g.next_range(-half_width, *half_width);
                    }
                }
                DistributionKind::IsotropicGaussian { sigma } => {
                    g.fill_normal(chunk);
                    for v in chunk.iter_mut() {
                        *v *= sigma;
                    }
                }
            }
        }
        Ok(Dataset {
            points,
            m,
            d,
            seed,
            spec: self.clone(),
        })
    }
}

/// A fixed sample of M points from a distribution.
#[derive(Debug, Clone)]
pub struct Dataset {
    points: Vec<f64>,
    m: usize,
    d: usize,
    pub seed: u64,
    pub spec: DistributionSpec,
}

impl Dataset {
    /// Wrap externally chosen points (hand-placed designs, checkpointed
    /// data). The seed is recorded as 0 and carries no regeneration meaning.
    pub fn from_points(spec: DistributionSpec, points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("need at least one point".into()));
        }
        let d = spec.dim;
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: points.iter().find(|p| p.len() != d).unwrap().len(),
            });
        }
        let m = points.len();
        Ok(Dataset {
            points: points.into_iter().flatten().collect(),
            m,
            d,
            seed: 0,
            spec,
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks(self.d)
    }

    /// Monte-Carlo estimate of ⟨u⟩_μ = ∫ μ(x) u(x) dx over this sample.
    pub fn mc_average<F: Fn(&[f64]) -> f64>(&self, u: F) -> Result<f64> {
        Ok(self.mc_stats(u)?.0)
    }

    /// Monte-Carlo mean and standard error of the mean.
    pub fn mc_stats<F: Fn(&[f64]) -> f64>(&self, u: F) -> Result<(f64, f64)> {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (i, x) in self.iter_points().enumerate() {
            let v = u(x);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample {
                    index: i,
                    point: x.to_vec(),
                    value: v,
                });
            }
            sum += v;
            sum_sq += v * v;
        }
        let n = self.m as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0);
        let se = (var / n).sqrt();
        Ok((mean, se))
    }
}
