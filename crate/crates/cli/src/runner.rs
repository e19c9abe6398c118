//! Experiment execution: build the pipeline for a config, emit CSV + JSON
//! artifacts, and return the parsed summary.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use ntklab::distributions::{Dataset, DistributionSpec};
use ntklab::kernels::{geometry, KernelSpec};
use ntklab::spectral::{
    build_operator_matrix, default_fit_window, eigendecompose, eigendecompose_psd, fit_power_law,
    fit_power_law_xy, fit_spectrum, gd_loss_trajectory, loss_trajectory, PowerLawFit,
    SpectralDecomposition,
};
use ntklab::targets::{expansion_coefficients, TargetSpec};
use ntklab::theory::{
    coefficient_asymptote_gp, coefficient_asymptote_indicator, eigenvalue_asymptote,
    loss_coefficient_gp, loss_coefficient_indicator, AsymptoticPrediction, EigenAsymptote,
};
use ntklab::trainer::{critical_lr, train, Parametrization, ShallowNet};

use crate::artifacts::{write_json_summary, Comparison, CsvValue, CsvWriter};
use crate::config::{
    ExperimentConfig, ExperimentKind, GpSamplerConfig, KernelConfig, TargetConfig,
};

pub struct RunOutput {
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

#[derive(Serialize)]
struct SummaryEnvelope<T: Serialize> {
    artifact_version: &'static str,
    kind: ExperimentKind,
    dim: usize,
    m: usize,
    #[serde(flatten)]
    body: T,
}

pub fn run(config: &ExperimentConfig, config_dir: &Path) -> Result<RunOutput> {
    let problems: Vec<String> = config
        .validate()
        .into_iter()
        .filter(|p| !p.starts_with("warning:"))
        .collect();
    if !problems.is_empty() {
        bail!("invalid config: {}", problems.join("; "));
    }
    let out_dir = config.resolve_output_dir();
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;

    match config.kind {
        ExperimentKind::Spectrum => run_spectrum(config, config_dir, &out_dir),
        ExperimentKind::Coefficients => run_coefficients(config, config_dir, &out_dir),
        ExperimentKind::LinearizedLoss => run_linearized_loss(config, config_dir, &out_dir),
        ExperimentKind::FiniteTraining => run_finite_training(config, config_dir, &out_dir),
        ExperimentKind::MfTraining => run_mf_training(config, config_dir, &out_dir),
        ExperimentKind::QSweep => run_q_sweep(config, config_dir, &out_dir),
        ExperimentKind::DepthSweep => run_depth_sweep(config, config_dir, &out_dir),
        ExperimentKind::Degeneracy => run_degeneracy(config, config_dir, &out_dir),
    }
}

struct Pipeline {
    mu: DistributionSpec,
    dataset: Dataset,
    kernel: KernelSpec,
    decomp: SpectralDecomposition,
    mc: Dataset,
    eig: EigenAsymptote,
}

fn build_pipeline(config: &ExperimentConfig, config_dir: &Path) -> Result<Pipeline> {
    let mu = config.distribution.build()?;
    let dataset = mu.sample(config.m, config.dataset_seed)?;
    let kernel = config
        .kernel
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [kernel] section"))?
        .build(config_dir)?;
    let operator = build_operator_matrix(&dataset, &kernel)?;
    let decomp = eigendecompose_psd(&operator)?;
    let mc = mu.sample(config.theory.mc_samples, config.theory.mc_seed)?;
    let eig = eigenvalue_asymptote(&kernel, &mc)?;
    Ok(Pipeline {
        mu,
        dataset,
        kernel,
        decomp,
        mc,
        eig,
    })
}

fn spectrum_window(config: &ExperimentConfig) -> (usize, usize) {
    config
        .fit
        .spectrum_window
        .unwrap_or_else(|| default_fit_window(config.distribution.dim(), config.m))
}

fn write_eigenvalue_csv(
    path: &Path,
    artifact: &str,
    decomp: &SpectralDecomposition,
    theory: Option<(f64, f64)>, // (Lambda, nu)
    singular: Option<&[f64]>,
) -> Result<PathBuf> {
    let mut cols = vec!["n", "lambda"];
    if singular.is_some() {
        cols.push("lambda_singular");
    }
    if theory.is_some() {
        cols.push("lambda_theory");
    }
    let mut csv = CsvWriter::create(path, artifact, &cols)?;
    for (n, &l) in decomp.eigenvalues.iter().enumerate() {
        let mut row: Vec<CsvValue> = vec![n.into(), l.into()];
        if let Some(s) = singular {
            row.push(s.get(n).copied().map_or(CsvValue::Missing, CsvValue::Float));
        }
        if let Some((lambda, nu)) = theory {
            if n >= 1 {
                row.push((lambda * (n as f64).powf(-nu)).into());
            } else {
                row.push(CsvValue::Missing);
            }
        }
        csv.row(&row)?;
    }
    csv.finish()
}

fn write_fit_csv(path: &Path, rows: &[(String, &PowerLawFit)]) -> Result<PathBuf> {
    let mut csv = CsvWriter::create(
        path,
        "power-law-fits",
        &[
            "fit",
            "coefficient",
            "exponent",
            "n_min",
            "n_max",
            "residual_rms",
        ],
    )?;
    for (label, fit) in rows {
        csv.row(&[
            CsvValue::Text(label.clone()),
            fit.coefficient.into(),
            fit.exponent.into(),
            fit.n_min.into(),
            fit.n_max.into(),
            fit.residual_rms.into(),
        ])?;
    }
    csv.finish()
}

#[derive(Serialize)]
struct SpectrumBody {
    kernel: String,
    fit_window: (usize, usize),
    fit_residual_rms: f64,
    clamped_negative_eigenvalues: usize,
    nu: Comparison,
    lambda: Comparison,
    prediction: AsymptoticPrediction,
}

fn spectrum_body(
    kernel: &KernelSpec,
    decomp: &SpectralDecomposition,
    eig: &EigenAsymptote,
    fit: &PowerLawFit,
) -> SpectrumBody {
    SpectrumBody {
        kernel: kernel.kind_name(),
        fit_window: (fit.n_min, fit.n_max),
        fit_residual_rms: fit.residual_rms,
        clamped_negative_eigenvalues: decomp.clamped_negative,
        nu: Comparison::new(fit.exponent, Some(eig.nu.value)),
        lambda: Comparison::new(fit.coefficient, eig.lambda.as_ref().map(|l| l.value)),
        prediction: AsymptoticPrediction::spectrum_only(eig),
    }
}

fn finish<T: Serialize>(
    config: &ExperimentConfig,
    out_dir: &Path,
    mut files: Vec<PathBuf>,
    body: T,
) -> Result<RunOutput> {
    let envelope = SummaryEnvelope {
        artifact_version: crate::artifacts::CSV_VERSION,
        kind: config.kind,
        dim: config.distribution.dim(),
        m: config.m,
        body,
    };
    let summary_path = out_dir.join("summary.json");
    write_json_summary(&summary_path, &envelope)?;
    files.push(summary_path);
    let summary = serde_json::to_value(&envelope)?;
    Ok(RunOutput {
        output_dir: out_dir.to_path_buf(),
        files,
        summary,
    })
}

fn run_spectrum(config: &ExperimentConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutput> {
    let p = build_pipeline(config, config_dir)?;
    let (n_min, n_max) = spectrum_window(config);
    let fit = fit_spectrum(&p.decomp, n_min, n_max)?;
    let theory = p.eig.lambda.as_ref().map(|l| (l.value, p.eig.nu.value));
    let csv = write_eigenvalue_csv(
        &out_dir.join("eigenvalues.csv"),
        "eigenvalues",
        &p.decomp,
        theory,
        None,
    )?;
    let fits = write_fit_csv(&out_dir.join("fits.csv"), &[("lambda_n".into(), &fit)])?;
    let body = spectrum_body(&p.kernel, &p.decomp, &p.eig, &fit);
    finish(config, out_dir, vec![csv, fits], body)
}

/// Averaged coefficient profile over the target draws (indicator targets
/// have exactly one).
fn averaged_profile(
    targets: &[TargetSpec],
    dataset: &Dataset,
    decomp: &SpectralDecomposition,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = dataset.len();
    let mut c_sq = vec![0.0; m];
    for t in targets {
        let g = t.realize(dataset)?;
        let prof = expansion_coefficients(&g, decomp)?;
        for (acc, c) in c_sq.iter_mut().zip(&prof.c) {
            *acc += c * c;
        }
    }
    let n_draws = targets.len() as f64;
    c_sq.iter_mut().for_each(|v| *v /= n_draws);
    let mut s = vec![0.0; m];
    let mut acc = 0.0;
    for n in (0..m).rev() {
        acc += c_sq[n];
        s[n] = acc;
    }
    Ok((c_sq, s))
}

struct TailTheory {
    prediction: AsymptoticPrediction,
    kappa: f64,
    k_coeff: Option<f64>,
    xi: f64,
    c_coeff: Option<f64>,
}

fn tail_theory(config: &ExperimentConfig, p: &Pipeline) -> Result<TailTheory> {
    let target = config
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [target] section"))?;
    let lam_int = p.eig.lambda_integral.as_ref();
    match target {
        TargetConfig::Gp { .. } => {
            let cov = target.covariance().expect("GP target has a covariance")?;
            let law = loss_coefficient_gp(&p.kernel, &cov, &p.mc)?;
            let tail = lam_int.map(|li| coefficient_asymptote_gp(&law, li, p.mc.dim()));
            let kappa = law.beta / p.mc.dim() as f64;
            Ok(TailTheory {
                prediction: match &tail {
                    Some(t) => AsymptoticPrediction::with_target(&p.eig, t, Some(&law.c)),
                    None => AsymptoticPrediction::spectrum_only(&p.eig),
                },
                kappa,
                k_coeff: tail.as_ref().map(|t| t.coefficient_k.value),
                xi: law.xi,
                c_coeff: Some(law.c.value),
            })
        }
        TargetConfig::BallIndicator { radius, jump } => {
            let law = loss_coefficient_indicator(
                &p.kernel,
                &p.mu,
                *radius,
                *jump,
                config.theory.surface_samples,
                config.theory.surface_seed,
            )?;
            let tail = lam_int.map(|li| coefficient_asymptote_indicator(&law, li, p.mu.dim));
            Ok(TailTheory {
                prediction: match &tail {
                    Some(t) => AsymptoticPrediction::with_target(&p.eig, t, Some(&law.c)),
                    None => AsymptoticPrediction::spectrum_only(&p.eig),
                },
                kappa: 1.0 / p.mu.dim as f64,
                k_coeff: tail.as_ref().map(|t| t.coefficient_k.value),
                xi: law.xi,
                c_coeff: Some(law.c.value),
            })
        }
    }
}

fn default_tail_window(config: &ExperimentConfig) -> (usize, usize) {
    match config.target {
        Some(TargetConfig::Gp { .. }) => (15, (config.m / 16).max(30)),
        _ => (30, (config.m / 8).max(60)),
    }
}

#[derive(Serialize)]
struct CoefficientsBody {
    kernel: String,
    target: String,
    draws: usize,
    tail_window: (usize, usize),
    fit_residual_rms: f64,
    kappa: Comparison,
    coefficient_k: Comparison,
    prediction: AsymptoticPrediction,
}

fn target_label(config: &TargetConfig) -> String {
    match config {
        TargetConfig::Gp { sampler, seeds, .. } => format!(
            "gp({}, {} draw(s))",
            match sampler {
                GpSamplerConfig::Cholesky => "cholesky".to_string(),
                GpSamplerConfig::WideNetwork { width } => format!("wide-network({width})"),
            },
            seeds.len()
        ),
        TargetConfig::BallIndicator { radius, jump } => {
            format!("ball-indicator(radius={radius}, jump={jump})")
        }
    }
}

fn run_coefficients(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let p = build_pipeline(config, config_dir)?;
    let target_config = config
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [target] section"))?;
    let targets = target_config.build()?;
    let (c_sq, s) = averaged_profile(&targets, &p.dataset, &p.decomp)?;
    let theory = tail_theory(config, &p)?;

    let (n_min, n_max) = config
        .fit
        .tail_window
        .unwrap_or_else(|| default_tail_window(config));
    let fit = fit_power_law(&s, n_min, n_max.min(s.len() - 1))?;

    let mut csv = CsvWriter::create(
        &out_dir.join("coefficients.csv"),
        "coefficients",
        &["n", "c_rms", "s", "s_theory"],
    )?;
    for n in 0..s.len() {
        let theory_col = match theory.k_coeff {
            Some(k) if n >= 1 => CsvValue::Float(k * (n as f64).powf(-theory.kappa)),
            _ => CsvValue::Missing,
        };
        csv.row(&[n.into(), c_sq[n].sqrt().into(), s[n].into(), theory_col])?;
    }
    let csv = csv.finish()?;
    let fits = write_fit_csv(&out_dir.join("fits.csv"), &[("s_n".into(), &fit)])?;

    let body = CoefficientsBody {
        kernel: p.kernel.kind_name(),
        target: target_label(target_config),
        draws: targets.len(),
        tail_window: (fit.n_min, fit.n_max),
        fit_residual_rms: fit.residual_rms,
        kappa: Comparison::new(fit.exponent, Some(theory.kappa)),
        coefficient_k: Comparison::new(fit.coefficient, theory.k_coeff),
        prediction: theory.prediction,
    };
    finish(config, out_dir, vec![csv, fits], body)
}

#[derive(Serialize)]
struct LinearizedLossBody {
    kernel: String,
    target: String,
    draws: usize,
    time_window: (f64, f64),
    fit_residual_rms: f64,
    xi: Comparison,
    coefficient_c: Comparison,
    prediction: AsymptoticPrediction,
}

fn run_linearized_loss(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let p = build_pipeline(config, config_dir)?;
    let target_config = config
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [target] section"))?;
    let targets = target_config.build()?;
    let (c_sq, _) = averaged_profile(&targets, &p.dataset, &p.decomp)?;
    let c_rms: Vec<f64> = c_sq.iter().map(|v| v.sqrt()).collect();
    let theory = tail_theory(config, &p)?;

    // time grid mapped from a mode-index window through t = n^ν/(2Λ)
    let lambda = p
        .eig
        .lambda
        .as_ref()
        .ok_or_else(|| anyhow!("loss time grid needs a predicted Lambda for this kernel"))?
        .value;
    let nu = p.eig.nu.value;
    let (mode_lo, mode_hi) = config.fit.time_window_modes.unwrap_or((10.0, 60.0));
    let t_lo = mode_lo.powf(nu) / (2.0 * lambda);
    let t_hi = mode_hi.powf(nu) / (2.0 * lambda);
    let points = config.fit.time_points.unwrap_or(48);
    let times: Vec<f64> = (0..points)
        .map(|i| t_lo * (t_hi / t_lo).powf(i as f64 / (points - 1).max(1) as f64))
        .collect();

    let traj = loss_trajectory(&p.decomp, &c_rms, &times)?;
    let fit = fit_power_law_xy(&times, &traj)?;

    let mut csv = CsvWriter::create(
        &out_dir.join("loss.csv"),
        "linearized-loss",
        &["t", "loss", "loss_theory"],
    )?;
    for (t, l) in times.iter().zip(&traj) {
        let theory_col = theory.c_coeff.map_or(CsvValue::Missing, |c| {
            CsvValue::Float(c * t.powf(-theory.xi))
        });
        csv.row(&[(*t).into(), (*l).into(), theory_col])?;
    }
    let csv = csv.finish()?;
    let fits = write_fit_csv(&out_dir.join("fits.csv"), &[("loss_t".into(), &fit)])?;

    let body = LinearizedLossBody {
        kernel: p.kernel.kind_name(),
        target: target_label(target_config),
        draws: targets.len(),
        time_window: (t_lo, t_hi),
        fit_residual_rms: fit.residual_rms,
        xi: Comparison::new(fit.exponent, Some(theory.xi)),
        coefficient_c: Comparison::new(fit.coefficient, theory.c_coeff),
        prediction: theory.prediction,
    };
    finish(config, out_dir, vec![csv, fits], body)
}

#[derive(Serialize)]
struct FiniteTrainingBody {
    kernel: String,
    target: String,
    width: usize,
    steps: usize,
    eta: f64,
    eta_critical: f64,
    initial_loss: f64,
    /// Step at which the linearized loss first drops below 10^-k of the
    /// initial loss, for k = 1, 2, 3.
    decade_steps: Vec<Option<usize>>,
    /// Max |trained - linearized| / linearized over the first three decades.
    max_relative_deviation_3_decades: f64,
    prediction: AsymptoticPrediction,
}

fn run_finite_training(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let p = build_pipeline(config, config_dir)?;
    let target_config = config
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [target] section"))?;
    let training = config
        .training
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [training] section"))?;
    let targets = target_config.build()?;
    let f_target = targets[0].realize(&p.dataset)?;

    let eta_critical = critical_lr(&p.decomp)?;
    let eta = training.eta_factor * eta_critical;
    let mut net = ShallowNet::init(
        Parametrization::Ntk,
        training.width,
        p.dataset.dim(),
        p.kernel.sigma_w,
        p.kernel.sigma_b,
        training.net_seed,
    )?;
    let g: Vec<f64> = net
        .forward_batch(&p.dataset)
        .iter()
        .zip(&f_target)
        .map(|(f, y)| f - y)
        .collect();
    let coeffs = expansion_coefficients(&g, &p.decomp)?;
    let log = train(
        &mut net,
        &p.dataset,
        &f_target,
        eta,
        training.steps,
        &training.checkpoint_steps,
    )?;
    for ck in &log.checkpoints {
        crate::checkpoint::write_checkpoint(
            &out_dir.join(format!("checkpoint-step{}.csv", ck.step)),
            &ck.params,
        )?;
    }
    let all_steps: Vec<usize> = (0..=training.steps).collect();
    let lin = gd_loss_trajectory(&p.decomp, &coeffs.c, eta, &all_steps)?;

    let l0 = lin[0];
    let mut decade_steps: Vec<Option<usize>> = vec![None; 3];
    let mut max_dev: f64 = 0.0;
    for (k, (&trained, &linear)) in log.losses.iter().zip(&lin).enumerate() {
        for (dec, slot) in decade_steps.iter_mut().enumerate() {
            if slot.is_none() && linear < l0 * 10f64.powi(-(dec as i32) - 1) {
                *slot = Some(k);
            }
        }
        if decade_steps[2].is_none() {
            max_dev = max_dev.max((trained - linear).abs() / linear);
        }
    }

    let mut csv = CsvWriter::create(
        &out_dir.join("training.csv"),
        "finite-training",
        &["step", "t", "train_loss", "linearized_loss"],
    )?;
    for (k, (&trained, &linear)) in log.losses.iter().zip(&lin).enumerate() {
        csv.row(&[
            k.into(),
            (k as f64 * eta).into(),
            trained.into(),
            linear.into(),
        ])?;
    }
    let csv = csv.finish()?;

    let theory = tail_theory(config, &p)?;
    let body = FiniteTrainingBody {
        kernel: p.kernel.kind_name(),
        target: target_label(target_config),
        width: training.width,
        steps: training.steps,
        eta,
        eta_critical,
        initial_loss: log.losses[0],
        decade_steps,
        max_relative_deviation_3_decades: max_dev,
        prediction: theory.prediction,
    };
    finish(config, out_dir, vec![csv], body)
}

#[derive(Serialize)]
struct MfSpectrumFit {
    step: usize,
    nu: Comparison,
    fit_window: (usize, usize),
}

#[derive(Serialize)]
struct MfTrainingBody {
    target: String,
    width: usize,
    steps: usize,
    eta: f64,
    eta_critical: f64,
    ntk_spectra: Vec<MfSpectrumFit>,
    loss_fit_steps: (usize, usize),
    xi: Comparison,
    /// Frobenius distance of the NTK from its initial value, relative to the
    /// initial norm, at the last checkpoint.
    ntk_relative_change: f64,
    prediction_nu: f64,
    prediction_xi: f64,
}

fn run_mf_training(
    config: &ExperimentConfig,
    _config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let mu = config.distribution.build()?;
    let dataset = mu.sample(config.m, config.dataset_seed)?;
    let d = dataset.dim();
    let target_config = config
        .target
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [target] section"))?;
    let training = config
        .training
        .as_ref()
        .ok_or_else(|| anyhow!("experiment needs a [training] section"))?;
    let targets = target_config.build()?;
    let f_target = targets[0].realize(&dataset)?;

    let mut net = ShallowNet::init(
        Parametrization::MeanField,
        training.width,
        d,
        1.0,
        1.0,
        training.net_seed,
    )?;
    let ntk0 = net.empirical_ntk(&dataset)?;
    let op0 = &ntk0 / config.m as f64;
    let decomp0 = eigendecompose_psd(&op0)?;
    let eta_critical = critical_lr(&decomp0)?;
    let eta = training.eta_factor * eta_critical;

    let mut checkpoint_steps = training.checkpoint_steps.clone();
    if checkpoint_steps.is_empty() {
        checkpoint_steps = vec![0, training.steps / 2, training.steps];
    }
    let log = train(
        &mut net,
        &dataset,
        &f_target,
        eta,
        training.steps,
        &checkpoint_steps,
    )?;

    // exponents of the theory: alpha = 1 singularity for any smooth neuron
    // density, beta = 3 for the network-GP target
    let nu_pred = 1.0 + 1.0 / d as f64;
    let xi_pred = 3.0 / (d as f64 + 1.0);

    let (w_lo, w_hi) = config
        .fit
        .spectrum_window
        .unwrap_or((30, (config.m / 8).max(60)));
    let mut files = Vec::new();
    let mut spectra = Vec::new();
    let mut last_ntk = None;
    for ck in &log.checkpoints {
        let ckpt_path = out_dir.join(format!("checkpoint-step{}.csv", ck.step));
        crate::checkpoint::write_checkpoint(&ckpt_path, &ck.params)?;
        files.push(ckpt_path);
        // the MfEmpirical normalization: N * gradient Gram = (1/N) Σ [...]
        let kernel = KernelSpec::mf_empirical(ck.params.clone())?;
        let gram = kernel.gram(&dataset)?;
        let op = &gram / config.m as f64;
        let decomp = eigendecompose_psd(&op)?;
        let fit = fit_spectrum(&decomp, w_lo, w_hi.min(decomp.len() - 1))?;
        files.push(write_eigenvalue_csv(
            &out_dir.join(format!("ntk-spectrum-step{}.csv", ck.step)),
            "mf-ntk-spectrum",
            &decomp,
            None,
            None,
        )?);
        spectra.push(MfSpectrumFit {
            step: ck.step,
            nu: Comparison::new(fit.exponent, Some(nu_pred)),
            fit_window: (fit.n_min, fit.n_max),
        });
        last_ntk = Some(gram);
    }
    let ntk_relative_change = last_ntk
        .map(|late| {
            let scaled0 = &ntk0 * (training.width as f64);
            (&late - &scaled0).norm() / scaled0.norm()
        })
        .unwrap_or(0.0);

    let (k_lo, k_hi) = (
        (training.steps / 100).max(30),
        (training.steps / 4).max(300).min(training.steps),
    );
    let ts: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * eta).collect();
    let ls: Vec<f64> = (k_lo..=k_hi).map(|k| log.losses[k]).collect();
    let xi_fit = fit_power_law_xy(&ts, &ls)?;

    let mut csv = CsvWriter::create(
        &out_dir.join("loss.csv"),
        "mf-training-loss",
        &["step", "t", "loss"],
    )?;
    for k in 0..=training.steps {
        csv.row(&[k.into(), (k as f64 * eta).into(), log.losses[k].into()])?;
    }
    files.push(csv.finish()?);

    let body = MfTrainingBody {
        target: target_label(target_config),
        width: training.width,
        steps: training.steps,
        eta,
        eta_critical,
        ntk_spectra: spectra,
        loss_fit_steps: (k_lo, k_hi),
        xi: Comparison::new(xi_fit.exponent, Some(xi_pred)),
        ntk_relative_change,
        prediction_nu: nu_pred,
        prediction_xi: xi_pred,
    };
    finish(config, out_dir, files, body)
}

#[derive(Serialize)]
struct SweepEntry {
    label: String,
    #[serde(flatten)]
    spectrum: SpectrumBody,
    nu_singular: Option<Comparison>,
}

#[derive(Serialize)]
struct SweepBody {
    entries: Vec<SweepEntry>,
}

fn sweep_member_window(config: &ExperimentConfig, index: usize, dim: usize) -> (usize, usize) {
    if let Some(&w) = config.sweep.windows.get(index) {
        return w;
    }
    if let Some(w) = config.fit.spectrum_window {
        return w;
    }
    default_fit_window(dim, config.m)
}

/// Spectrum of the singular-part operator ½(A(x_i)+A(x_j)) φ^α / M; its
/// positive eigenvalues track the full NTK's asymptote from much smaller n
/// and are emitted as a diagnostic overlay.
fn singular_part_spectrum(kernel: &KernelSpec, dataset: &Dataset) -> Result<Option<Vec<f64>>> {
    let info = match kernel.singularity_info() {
        Ok(info) if info.has_amplitude() => info,
        _ => return Ok(None),
    };
    let m = dataset.len();
    let amps: Vec<f64> = (0..m)
        .map(|i| info.amplitude(dataset.point(i)))
        .collect::<ntklab::Result<_>>()?;
    let mut s = nalgebra_matrix(m);
    for i in 0..m {
        for j in i..m {
            let phi = geometry(
                dataset.point(i),
                dataset.point(j),
                kernel.sigma_w,
                kernel.sigma_b,
            )?
            .phi;
            let v = 0.5 * (amps[i] + amps[j]) * phi.powf(info.degree) / m as f64;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    let decomp = eigendecompose(&s)?;
    Ok(Some(
        decomp
            .eigenvalues
            .into_iter()
            .filter(|&l| l > 0.0)
            .collect(),
    ))
}

fn nalgebra_matrix(m: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::zeros(m, m)
}

fn run_sweep_members(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
    members: Vec<(String, KernelConfig)>,
) -> Result<RunOutput> {
    let mu = config.distribution.build()?;
    let dataset = mu.sample(config.m, config.dataset_seed)?;
    let mc = mu.sample(config.theory.mc_samples, config.theory.mc_seed)?;
    let dim = dataset.dim();

    let mut files = Vec::new();
    let mut entries = Vec::new();
    let mut fit_rows: Vec<(String, PowerLawFit)> = Vec::new();
    for (index, (label, kernel_config)) in members.into_iter().enumerate() {
        let kernel = kernel_config.build(config_dir)?;
        let operator = build_operator_matrix(&dataset, &kernel)?;
        let decomp = eigendecompose_psd(&operator)?;
        let eig = eigenvalue_asymptote(&kernel, &mc)?;
        let (n_min, n_max) = sweep_member_window(config, index, dim);
        let fit = fit_spectrum(&decomp, n_min, n_max.min(decomp.len() - 1))?;

        let singular = singular_part_spectrum(&kernel, &dataset)?;
        let nu_singular = match &singular {
            Some(s) if s.len() > n_max => fit_power_law(s, n_min, n_max)
                .ok()
                .map(|f| Comparison::new(f.exponent, Some(eig.nu.value))),
            _ => None,
        };
        let theory = eig.lambda.as_ref().map(|l| (l.value, eig.nu.value));
        files.push(write_eigenvalue_csv(
            &out_dir.join(format!("eigenvalues-{label}.csv")),
            "eigenvalues",
            &decomp,
            theory,
            singular.as_deref(),
        )?);
        fit_rows.push((format!("lambda_n[{label}]"), fit));
        entries.push(SweepEntry {
            label,
            spectrum: spectrum_body(&kernel, &decomp, &eig, &fit),
            nu_singular,
        });
    }
    let fit_refs: Vec<(String, &PowerLawFit)> =
        fit_rows.iter().map(|(l, f)| (l.clone(), f)).collect();
    files.push(write_fit_csv(&out_dir.join("fits.csv"), &fit_refs)?);
    finish(config, out_dir, files, SweepBody { entries })
}

fn run_q_sweep(config: &ExperimentConfig, config_dir: &Path, out_dir: &Path) -> Result<RunOutput> {
    let base = match &config.kernel {
        Some(KernelConfig::ReluPower {
            sigma_w, sigma_b, ..
        }) => (*sigma_w, *sigma_b),
        None => (1.0, 1.0),
        Some(other) => {
            bail!("q-sweep kernel section must be relu-power (or omitted), got {other:?}")
        }
    };
    let members = config
        .sweep
        .q
        .iter()
        .map(|&q| {
            (
                format!("q{q}"),
                KernelConfig::ReluPower {
                    q,
                    sigma_w: base.0,
                    sigma_b: base.1,
                },
            )
        })
        .collect();
    run_sweep_members(config, config_dir, out_dir, members)
}

fn run_depth_sweep(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let base = match &config.kernel {
        Some(KernelConfig::DeepRelu {
            sigma_w, sigma_b, ..
        }) => (*sigma_w, *sigma_b),
        None => (1.0, 1.0),
        Some(other) => {
            bail!("depth-sweep kernel section must be deep-relu (or omitted), got {other:?}")
        }
    };
    let members = config
        .sweep
        .depths
        .iter()
        .map(|&depth| {
            (
                format!("depth{depth}"),
                KernelConfig::DeepRelu {
                    depth,
                    sigma_w: base.0,
                    sigma_b: base.1,
                },
            )
        })
        .collect();
    run_sweep_members(config, config_dir, out_dir, members)
}

pub const DEGENERACY_THRESHOLDS: [f64; 6] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2];
pub const DEGENERACY_TOP: usize = 200;

#[derive(Serialize)]
struct DegeneracyVariant {
    variant: String,
    /// Adjacent pairs among the top eigenvalues with (λ_n − λ_{n+1})/λ_n
    /// below each threshold.
    counts: Vec<usize>,
    top: usize,
}

#[derive(Serialize)]
struct DegeneracyBody {
    thresholds: Vec<f64>,
    kernel: String,
    variants: Vec<DegeneracyVariant>,
}

fn run_degeneracy(
    config: &ExperimentConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutput> {
    let kernel = match &config.kernel {
        Some(k) => k.build(config_dir)?,
        None => KernelSpec::shallow_ntk(1.0, 1.0)?,
    };
    let dim = config.distribution.dim();
    let mixture = config.distribution.build()?;
    let variants: Vec<(String, DistributionSpec)> = vec![
        (
            "isotropic-gaussian".into(),
            DistributionSpec::isotropic_gaussian(dim, 1.0)?,
        ),
        (
            "uniform-cube".into(),
            DistributionSpec::uniform_cube(dim, 1.0)?,
        ),
        ("gaussian-mixture".into(), mixture),
    ];

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (name, mu) in variants {
        let dataset = mu.sample(config.m, config.dataset_seed)?;
        let operator = build_operator_matrix(&dataset, &kernel)?;
        let decomp = eigendecompose_psd(&operator)?;
        let top = DEGENERACY_TOP.min(decomp.len());
        let head = &decomp.eigenvalues[..top];
        let counts: Vec<usize> = DEGENERACY_THRESHOLDS
            .iter()
            .map(|&t| head.windows(2).filter(|w| (w[0] - w[1]) / w[0] < t).count())
            .collect();
        files.push(write_eigenvalue_csv(
            &out_dir.join(format!("eigenvalues-{name}.csv")),
            "eigenvalues",
            &decomp,
            None,
            None,
        )?);
        rows.push(DegeneracyVariant {
            variant: name,
            counts,
            top,
        });
    }
    let body = DegeneracyBody {
        thresholds: DEGENERACY_THRESHOLDS.to_vec(),
        kernel: kernel.kind_name(),
        variants: rows,
    };
    finish(config, out_dir, files, body)
}
