//! Declarative experiment files.
//!
//! One TOML document describes a whole study: the model (an SCM or a
//! mean-function generator), intervention arms, parameter sweeps,
//! calibrations, and the execution block. Schema version 1. Seeds are
//! mandatory everywhere randomness occurs; there are no wall-clock
//! defaults, so rerunning a file reproduces its outputs byte for byte.

use serde::{Deserialize, Serialize};

use crate::calibrate::{CalibrationProblem, CalibrationTarget, Loss};
use crate::error::{Error, Result};
use crate::interventions::{
    direct_effect, feasible_range, total_effect, HeldMoment, InterventionMode,
};
use crate::montecarlo::linspace;
use crate::mse_lab::{MeanFunctionKind, MeanFunctionSpec, NetConfig, SnrDesign, SnrMode};
use crate::scm::ScmSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub version: u32,
    pub model: ModelBlock,
    #[serde(default)]
    pub arms: Vec<ArmBlock>,
    #[serde(default)]
    pub sweeps: Vec<SweepBlock>,
    #[serde(default)]
    pub calibrate: Vec<CalibrateBlock>,
    pub lab: Option<LabBlock>,
    pub run: RunBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub scm: Option<ScmSpec>,
    pub mean_function: Option<MeanFunctionSpec>,
}

/// One intervention arm. Without a parameter it is the reference arm.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmBlock {
    pub label: String,
    pub mode: Option<InterventionMode>,
    pub parameter: Option<String>,
    pub value: Option<f64>,
    #[serde(default)]
    pub hold: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Values(Vec<f64>),
    Linspace {
        start: f64,
        stop: f64,
        points: usize,
    },
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridSpec::Values(v) => v.clone(),
            GridSpec::Linspace {
                start,
                stop,
                points,
            } => linspace(*start, *stop, *points),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub label: String,
    pub parameter: String,
    pub mode: InterventionMode,
    #[serde(default)]
    pub hold: Vec<String>,
    pub grid: GridSpec,
    /// 0 selects the analytic probability-limit evaluation.
    #[serde(default)]
    pub replications_per_point: usize,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateTargetBlock {
    pub functional: String,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateBlock {
    pub free_params: Vec<String>,
    pub targets: Vec<CalibrateTargetBlock>,
    #[serde(default = "default_mc_sample_size")]
    pub mc_sample_size: usize,
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_mc_sample_size() -> usize {
    100_000
}
fn default_tolerance() -> f64 {
    1e-3
}
fn default_max_iterations() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrBlock {
    pub target: f64,
    pub mode: SnrMode,
    pub target_signal_variance: Option<f64>,
    #[serde(default = "default_snr_n_mc")]
    pub n_mc: usize,
    pub seed: u64,
}

fn default_snr_n_mc() -> usize {
    400_000
}

impl SnrBlock {
    pub fn design(&self) -> SnrDesign {
        SnrDesign {
            target_snr: self.target,
            mode: self.mode,
            target_signal_variance: self.target_signal_variance,
        }
    }
}

/// Generator overrides for one lab arm; unset fields inherit the model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabArmBlock {
    pub label: String,
    pub kind: Option<MeanFunctionKind>,
    pub p: Option<usize>,
    pub alphas: Option<Vec<Vec<f64>>>,
    pub var_eps: Option<f64>,
    /// Per-arm SNR design; overrides the lab-level one.
    pub snr: Option<SnrBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSweepBlock {
    pub sigma: GridSpec,
    #[serde(default = "default_noise_reps")]
    pub replications_per_point: usize,
}

fn default_noise_reps() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabBlock {
    pub arms: Vec<LabArmBlock>,
    pub net: NetConfig,
    pub snr: Option<SnrBlock>,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub noise_sweep: Option<NoiseSweepBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Full,
    Fast,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub n: Option<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    pub beta_a_true: Option<f64>,
    pub out: Option<String>,
    #[serde(default)]
    pub profile: Profile,
}

fn default_replications() -> usize {
    1
}

/// A semantic problem, anchored by field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// A fully resolved, feasibility-checked experiment.
#[derive(Debug, Clone)]
pub enum ResolvedExperiment {
    Scm(ResolvedScmExperiment),
    Lab(ResolvedLabExperiment),
}

#[derive(Debug, Clone)]
pub struct ResolvedScmExperiment {
    pub model: ScmSpec,
    /// (label, treated spec) per arm, reference arms included.
    pub arms: Vec<(String, ScmSpec)>,
    pub sweeps: Vec<ResolvedSweep>,
    pub calibrations: Vec<CalibrationProblem>,
    pub run: RunBlock,
}

#[derive(Debug, Clone)]
pub struct ResolvedSweep {
    pub label: String,
    pub parameter: String,
    pub mode: InterventionMode,
    pub hold: Vec<HeldMoment>,
    pub grid: Vec<f64>,
    pub replications_per_point: usize,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct ResolvedLabExperiment {
    /// (label, generator before SNR application, optional SNR design).
    pub arms: Vec<(String, MeanFunctionSpec, Option<SnrBlock>)>,
    pub net: NetConfig,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub noise_sweep: Option<(Vec<f64>, usize)>,
    pub calibrations: Vec<CalibrationProblem>,
    pub run: RunBlock,
}

/// Parses an experiment file; parse errors carry the TOML line and column.
pub fn parse(text: &str) -> Result<ExperimentFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

/// Schema and semantic validation; returns the resolved experiment or
/// every diagnostic found.
pub fn resolve(file: &ExperimentFile) -> std::result::Result<ResolvedExperiment, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    if file.version != SCHEMA_VERSION {
        diags.push(Diagnostic {
            path: "version".into(),
            message: format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                file.version
            ),
        });
    }
    match (&file.model.scm, &file.model.mean_function) {
        (Some(_), Some(_)) => {
            diags.push(Diagnostic {
                path: "model".into(),
                message: "give exactly one of model.scm and model.mean_function".into(),
            });
            Err(diags)
        }
        (None, None) => {
            diags.push(Diagnostic {
                path: "model".into(),
                message: "missing model block".into(),
            });
            Err(diags)
        }
        (Some(scm), None) => resolve_scm(file, scm, diags),
        (None, Some(mf)) => resolve_lab(file, mf, diags),
    }
}

fn parse_hold(hold: &[String], path: &str, diags: &mut Vec<Diagnostic>) -> Vec<HeldMoment> {
    let mut out = Vec::new();
    for h in hold {
        match HeldMoment::parse(h) {
            Ok(m) => out.push(m),
            Err(e) => diags.push(Diagnostic {
                path: format!("{path}.hold"),
                message: e.to_string(),
            }),
        }
    }
    out
}

fn resolve_scm(
    file: &ExperimentFile,
    scm: &ScmSpec,
    mut diags: Vec<Diagnostic>,
) -> std::result::Result<ResolvedExperiment, Vec<Diagnostic>> {
    let model = match scm.clone().normalized() {
        Ok(m) => m,
        Err(e) => {
            diags.push(Diagnostic {
                path: "model.scm".into(),
                message: e.to_string(),
            });
            return Err(diags);
        }
    };
    if file.lab.is_some() {
        diags.push(Diagnostic {
            path: "lab".into(),
            message: "lab blocks apply to mean_function models only".into(),
        });
    }
    if file.run.n.is_none()
        && (!file.arms.is_empty() || file.sweeps.iter().any(|s| s.replications_per_point > 0))
    {
        diags.push(Diagnostic {
            path: "run.n".into(),
            message: "sample size n is required to run arms or sampled sweeps".into(),
        });
    }
    if file.arms.is_empty() && file.sweeps.is_empty() && file.calibrate.is_empty() {
        diags.push(Diagnostic {
            path: "arms".into(),
            message: "nothing to run: no arms, sweeps, or calibrations".into(),
        });
    }

    let mut arms = Vec::new();
    for (i, arm) in file.arms.iter().enumerate() {
        let path = format!("arms[{i}] (label \"{}\")", arm.label);
        if file.arms[..i].iter().any(|a| a.label == arm.label) {
            diags.push(Diagnostic {
                path: path.clone(),
                message: "duplicate label".into(),
            });
        }
        let hold = parse_hold(&arm.hold, &path, &mut diags);
        match (&arm.parameter, &arm.value, arm.mode) {
            (None, None, None) => {
                if !arm.hold.is_empty() {
                    diags.push(Diagnostic {
                        path: path.clone(),
                        message: "hold requires a direct_effect intervention".into(),
                    });
                }
                arms.push((arm.label.clone(), model.clone()));
            }
            (Some(param), Some(value), Some(mode)) => {
                let planned = match mode {
                    InterventionMode::TotalEffect => {
                        if !arm.hold.is_empty() {
                            diags.push(Diagnostic {
                                path: path.clone(),
                                message: "hold applies to direct_effect arms only".into(),
                            });
                        }
                        total_effect(&model, param, *value)
                    }
                    InterventionMode::DirectEffect => direct_effect(&model, param, *value, &hold),
                };
                match planned {
                    Ok(plan) => arms.push((arm.label.clone(), plan.treated)),
                    Err(e) => {
                        let mut message = e.to_string();
                        if matches!(e, Error::Infeasible(_)) {
                            if let Ok(range) = feasible_range(&model, param, &hold) {
                                message.push_str(&format!(
                                    " (feasible range: ({}, {}))",
                                    range.lower, range.upper
                                ));
                            }
                        }
                        diags.push(Diagnostic { path, message });
                    }
                }
            }
            _ => diags.push(Diagnostic {
                path,
                message: "an intervention arm needs mode, parameter, and value together".into(),
            }),
        }
    }

    let mut sweeps = Vec::new();
    for (i, sweep) in file.sweeps.iter().enumerate() {
        let path = format!("sweeps[{i}] (label \"{}\")", sweep.label);
        if file.sweeps[..i].iter().any(|s| s.label == sweep.label) {
            diags.push(Diagnostic {
                path: path.clone(),
                message: "duplicate label".into(),
            });
        }
        let hold = parse_hold(&sweep.hold, &path, &mut diags);
        let grid = sweep.grid.values();
        if grid.is_empty() {
            diags.push(Diagnostic {
                path: path.clone(),
                message: "empty grid".into(),
            });
            continue;
        }
        // feasibility of every grid point, upfront
        for (gi, &v) in grid.iter().enumerate() {
            let feasible = match sweep.mode {
                InterventionMode::TotalEffect => {
                    total_effect(&model, &sweep.parameter, v).map(|_| ())
                }
                InterventionMode::DirectEffect => {
                    direct_effect(&model, &sweep.parameter, v, &hold).map(|_| ())
                }
            };
            if let Err(e) = feasible {
                diags.push(Diagnostic {
                    path: format!("{path}.grid[{gi}]"),
                    message: format!("{} = {v}: {e}", sweep.parameter),
                });
                break;
            }
        }
        let n = match (sweep.n, file.run.n) {
            (Some(n), _) => n,
            (None, Some(n)) => n,
            (None, None) => {
                if sweep.replications_per_point > 0 {
                    diags.push(Diagnostic {
                        path: path.clone(),
                        message: "sampled sweeps need n (sweep.n or run.n)".into(),
                    });
                }
                0
            }
        };
        sweeps.push(ResolvedSweep {
            label: sweep.label.clone(),
            parameter: sweep.parameter.clone(),
            mode: sweep.mode,
            hold,
            grid,
            replications_per_point: sweep.replications_per_point,
            n,
        });
    }

    let mut calibrations = Vec::new();
    for (i, cal) in file.calibrate.iter().enumerate() {
        let path = format!("calibrate[{i}]");
        if let Some(problem) =
            resolve_calibration(cal, &path, CalibrationTarget::Scm(model.clone()), &mut diags)
        {
            calibrations.push(problem);
        }
    }

    if diags.is_empty() {
        Ok(ResolvedExperiment::Scm(ResolvedScmExperiment {
            model,
            arms,
            sweeps,
            calibrations,
            run: file.run.clone(),
        }))
    } else {
        Err(diags)
    }
}

/// Checks a calibrate block against the model kind so a clean validation
/// cannot fail once the run starts: free parameters must exist, target
/// functionals must apply to the model, and analytically unreachable
/// targets are rejected here.
fn resolve_calibration(
    cal: &CalibrateBlock,
    path: &str,
    target: CalibrationTarget,
    diags: &mut Vec<Diagnostic>,
) -> Option<CalibrationProblem> {
    let before = diags.len();
    if cal.free_params.len() != cal.targets.len() {
        diags.push(Diagnostic {
            path: path.to_string(),
            message: format!(
                "{} free_params for {} targets; align them one-to-one",
                cal.free_params.len(),
                cal.targets.len()
            ),
        });
        return None;
    }
    if cal.mc_sample_size < 1_000 {
        diags.push(Diagnostic {
            path: format!("{path}.mc_sample_size"),
            message: "must be >= 1000".into(),
        });
    }
    if !cal.tolerance.is_finite() || cal.tolerance <= 0.0 {
        diags.push(Diagnostic {
            path: format!("{path}.tolerance"),
            message: "must be > 0".into(),
        });
    }

    match &target {
        CalibrationTarget::Scm(spec) => {
            for (i, free) in cal.free_params.iter().enumerate() {
                if let Err(e) = crate::interventions::ParamName::parse(free, spec.p()) {
                    diags.push(Diagnostic {
                        path: format!("{path}.free_params[{i}]"),
                        message: e.to_string(),
                    });
                }
            }
            // the treatment variance is solved first, so a var_a target
            // (listed in any order) sets the level the outcome floor sees
            let var_a_target = cal
                .targets
                .iter()
                .find(|t| t.functional == "var_a")
                .map(|t| t.value);
            for (i, t) in cal.targets.iter().enumerate() {
                match t.functional.as_str() {
                    "var_a" | "var_y" => {}
                    other => {
                        diags.push(Diagnostic {
                            path: format!("{path}.targets[{i}]"),
                            message: format!("unknown functional {other} for an scm model"),
                        });
                        continue;
                    }
                }
                // analytic reachability with a non-negative error variance
                let floor = match t.functional.as_str() {
                    "var_a" => spec.explained_treatment_variance(),
                    _ => {
                        let var_a = var_a_target
                            .unwrap_or_else(|| spec.explained_treatment_variance() + spec.var_eps_a);
                        spec.explained_outcome_variance(var_a)
                    }
                };
                if t.value < floor - 1e-9 {
                    diags.push(Diagnostic {
                        path: format!("{path}.targets[{i}]"),
                        message: format!(
                            "{} = {} is below the explained variance {floor:.6}; unreachable with a non-negative error variance",
                            t.functional, t.value
                        ),
                    });
                }
            }
        }
        CalibrationTarget::MeanFunction(spec) => {
            for (i, free) in cal.free_params.iter().enumerate() {
                match free.as_str() {
                    "var_eps" => {}
                    "alpha_scale" if !spec.alphas.is_empty() => {}
                    "alpha_scale" => diags.push(Diagnostic {
                        path: format!("{path}.free_params[{i}]"),
                        message: "alpha_scale needs a generator with alphas".into(),
                    }),
                    other => diags.push(Diagnostic {
                        path: format!("{path}.free_params[{i}]"),
                        message: format!("unknown parameter {other} for a mean_function model"),
                    }),
                }
            }
            for (i, t) in cal.targets.iter().enumerate() {
                if !matches!(t.functional.as_str(), "signal_variance" | "snr") {
                    diags.push(Diagnostic {
                        path: format!("{path}.targets[{i}]"),
                        message: format!("unknown functional {} for a mean_function model", t.functional),
                    });
                }
            }
        }
    }

    if diags.len() > before {
        return None;
    }
    Some(CalibrationProblem {
        target,
        free_params: cal.free_params.clone(),
        held_params: Vec::new(),
        targets: cal
            .targets
            .iter()
            .map(|t| (t.functional.clone(), t.value))
            .collect(),
        loss: Loss::SquaredError,
        mc_sample_size: cal.mc_sample_size,
        seed: cal.seed,
        tolerance: cal.tolerance,
        max_iterations: cal.max_iterations,
    })
}

fn resolve_lab(
    file: &ExperimentFile,
    mf: &MeanFunctionSpec,
    mut diags: Vec<Diagnostic>,
) -> std::result::Result<ResolvedExperiment, Vec<Diagnostic>> {
    if !file.arms.is_empty() || !file.sweeps.is_empty() {
        diags.push(Diagnostic {
            path: "arms".into(),
            message: "mean_function models use the lab block (lab.arms), not scm arms/sweeps".into(),
        });
    }
    let Some(lab) = &file.lab else {
        diags.push(Diagnostic {
            path: "lab".into(),
            message: "mean_function models need a lab block".into(),
        });
        return Err(diags);
    };
    if let Err(e) = lab.net.validate() {
        diags.push(Diagnostic {
            path: "lab.net".into(),
            message: e.to_string(),
        });
    }
    if lab.arms.is_empty() {
        diags.push(Diagnostic {
            path: "lab.arms".into(),
            message: "need at least one arm".into(),
        });
    }
    if lab.replications == 0 {
        diags.push(Diagnostic {
            path: "lab.replications".into(),
            message: "must be >= 1".into(),
        });
    }

    let mut arms = Vec::new();
    for (i, arm) in lab.arms.iter().enumerate() {
        let path = format!("lab.arms[{i}] (label \"{}\")", arm.label);
        if lab.arms[..i].iter().any(|a| a.label == arm.label) {
            diags.push(Diagnostic {
                path: path.clone(),
                message: "duplicate label".into(),
            });
        }
        let mut spec = mf.clone();
        if let Some(kind) = arm.kind {
            spec.kind = kind;
            if kind == MeanFunctionKind::RadialProduct {
                spec.alphas = Vec::new();
            }
        }
        if let Some(p) = arm.p {
            spec.p = p;
        }
        if let Some(alphas) = &arm.alphas {
            spec.alphas = alphas.clone();
        }
        if let Some(v) = arm.var_eps {
            spec.var_eps = v;
        }
        if let Err(e) = spec.validate() {
            diags.push(Diagnostic {
                path: path.clone(),
                message: e.to_string(),
            });
            continue;
        }
        let snr = arm.snr.clone().or_else(|| lab.snr.clone());
        if let Some(block) = &snr {
            if block.mode == SnrMode::FixSignal {
                if block.target_signal_variance.is_none() {
                    diags.push(Diagnostic {
                        path: format!("{path}.snr"),
                        message: "fix_signal needs target_signal_variance".into(),
                    });
                }
                if spec.kind == MeanFunctionKind::RadialProduct {
                    diags.push(Diagnostic {
                        path: format!("{path}.snr"),
                        message:
                            "fix_signal rescales sigmoid alphas; the radial generator has none"
                                .into(),
                    });
                }
            }
            if !block.target.is_finite() || block.target <= 0.0 {
                diags.push(Diagnostic {
                    path: format!("{path}.snr"),
                    message: format!("target must be > 0, got {}", block.target),
                });
            }
        } else if spec.var_eps == 0.0 {
            diags.push(Diagnostic {
                path,
                message: "var_eps = 0 with no SNR design: the relative outcome is undefined".into(),
            });
            continue;
        }
        arms.push((arm.label.clone(), spec, snr));
    }

    let noise_sweep = lab
        .noise_sweep
        .as_ref()
        .map(|ns| (ns.sigma.values(), ns.replications_per_point));
    if let Some((grid, reps)) = &noise_sweep {
        if lab.arms.len() != 2 {
            diags.push(Diagnostic {
                path: "lab.noise_sweep".into(),
                message: format!(
                    "noise sweeps compare exactly 2 arms, lab has {}",
                    lab.arms.len()
                ),
            });
        }
        if grid.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            diags.push(Diagnostic {
                path: "lab.noise_sweep.sigma".into(),
                message: "every sigma must be > 0".into(),
            });
        }
        if *reps == 0 {
            diags.push(Diagnostic {
                path: "lab.noise_sweep.replications_per_point".into(),
                message: "must be >= 1".into(),
            });
        }
    }

    let mut calibrations = Vec::new();
    for (i, cal) in file.calibrate.iter().enumerate() {
        let path = format!("calibrate[{i}]");
        if let Some(problem) = resolve_calibration(
            cal,
            &path,
            CalibrationTarget::MeanFunction(mf.clone()),
            &mut diags,
        ) {
            calibrations.push(problem);
        }
    }

    if diags.is_empty() {
        Ok(ResolvedExperiment::Lab(ResolvedLabExperiment {
            arms,
            net: lab.net.clone(),
            n_train: lab.n_train,
            n_test: lab.n_test,
            replications: lab.replications,
            noise_sweep,
            calibrations,
            run: file.run.clone(),
        }))
    } else {
        Err(diags)
    }
}
