//! Executes experiment files: validation, runs, and path explanations.
//!
//! A run validates first (all feasibility is checked before any work
//! starts), takes an advisory lock on the output directory, executes every
//! arm/sweep/calibration or lab study, and writes CSV results, a JSON
//! mirror, and a plain-text summary. Outputs are byte-identical for
//! identical (file, overrides) including seeds, for any thread count.

use std::fs;
use std::path::{Path, PathBuf};

use crate::calibrate::{calibrate_numeric, CalibrationResult};
use crate::config::{
    parse, resolve, Diagnostic, ExperimentFile, Profile, ResolvedExperiment, ResolvedLabExperiment,
    ResolvedScmExperiment,
};
use crate::error::{Error, Result};
use crate::influence::{
    build_bias_amp_diagram, build_mean_function_diagram, path_report, sufficient_blocking_sets,
};
use crate::interventions::ParamName;
use crate::montecarlo::{grid_sweep, run_experiment, ExperimentResult, SweepResult};
use crate::mse_lab::{apply_snr_design, noise_sweep, run_study, LabStudyResult, NoiseSweepResult};

/// Command-line overrides applied on top of the file's run block.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub profile: Option<Profile>,
    pub threads: Option<usize>,
}

pub fn load(path: &Path) -> Result<ExperimentFile> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Parses and validates; Ok carries the resolved experiment.
pub fn validate_file(
    path: &Path,
) -> Result<std::result::Result<ResolvedExperiment, Vec<Diagnostic>>> {
    let file = load(path)?;
    Ok(resolve(&file))
}

const FAST_REPLICATION_CAP: usize = 500;

/// Everything a run produced, with rendered artifacts.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    /// (file name, contents) in write order.
    pub files: Vec<(String, String)>,
    pub summary: String,
}

struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(dir: &Path) -> Result<LockGuard> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".causim.lock");
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Validates and executes an experiment file, writing artifacts under the
/// output directory.
pub fn run_file(path: &Path, overrides: &Overrides) -> Result<RunArtifacts> {
    let resolved = match validate_file(path)? {
        Ok(r) => r,
        Err(diags) => {
            let mut msg = String::from("validation failed:\n");
            for d in &diags {
                msg.push_str(&format!("  {d}\n"));
            }
            return Err(Error::Config(msg));
        }
    };

    let execute = || -> Result<RunArtifacts> {
        match resolved {
            ResolvedExperiment::Scm(scm) => run_scm(scm, overrides),
            ResolvedExperiment::Lab(lab) => run_lab(lab, overrides),
        }
    };
    match overrides.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(execute)
        }
        None => execute(),
    }
}

fn effective_run(
    run_out: &Option<String>,
    run_profile: Profile,
    run_seed: u64,
    replications: usize,
    overrides: &Overrides,
) -> (PathBuf, u64, usize, Profile) {
    let out = overrides
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(run_out.clone().unwrap_or_else(|| "results".to_string())));
    let seed = overrides.seed.unwrap_or(run_seed);
    let profile = overrides.profile.unwrap_or(run_profile);
    let reps = match profile {
        Profile::Full => replications,
        Profile::Fast => replications.min(FAST_REPLICATION_CAP),
    };
    (out, seed, reps, profile)
}

fn write_artifacts(out_dir: &Path, files: &[(String, String)]) -> Result<()> {
    for (name, contents) in files {
        fs::write(out_dir.join(name), contents)?;
    }
    Ok(())
}

fn calibration_text(i: usize, result: &CalibrationResult) -> String {
    let mut s = format!("calibration[{i}]: converged = {}\n", result.converged);
    for (name, value) in &result.solved_values {
        s.push_str(&format!("  {name} = {value}\n"));
    }
    for a in &result.achieved {
        s.push_str(&format!(
            "  {} = {} (target {}, se {})\n",
            a.name, a.estimate, a.target, a.standard_error
        ));
    }
    for w in &result.warnings {
        s.push_str(&format!("  warning: {w}\n"));
    }
    s
}

fn experiment_summary(result: &ExperimentResult) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "arms (n = {}, replications = {}, seed = {})\n",
        result.n, result.replications, result.seed
    ));
    s.push_str(&format!(
        "{:<12} {:>12} {:>10} {:>12} {:>10} {:>14} {:>10}\n",
        "label", "bhat_x", "se", "bhat_naive", "se", "add_abs_bias", "se"
    ));
    for arm in &result.arms {
        s.push_str(&format!(
            "{:<12} {:>12.6} {:>10.6} {:>12.6} {:>10.6} {:>14.6} {:>10.6}\n",
            arm.label,
            arm.stats.mean_bhat_x,
            arm.stats.se_bhat_x,
            arm.stats.mean_bhat_naive,
            arm.stats.se_bhat_naive,
            arm.stats.mean_add_abs_bias,
            arm.stats.se_add_abs_bias
        ));
        if arm.singular_failures > 0 {
            s.push_str(&format!(
                "  warning: {} singular replications excluded\n",
                arm.singular_failures
            ));
        }
    }
    s
}

fn sweep_summary(sweep: &SweepResult, label: &str) -> String {
    format!(
        "sweep \"{label}\": {} over {} points ({}), {}\n",
        sweep.parameter,
        sweep.points.len(),
        match sweep.mode {
            crate::interventions::InterventionMode::TotalEffect => "total effect",
            crate::interventions::InterventionMode::DirectEffect => "direct effect",
        },
        if sweep.replications_per_point == 0 {
            "analytic probability limits".to_string()
        } else {
            format!("{} replications per point", sweep.replications_per_point)
        }
    )
}

fn run_scm(exp: ResolvedScmExperiment, overrides: &Overrides) -> Result<RunArtifacts> {
    let (out_dir, seed, replications, _) = effective_run(
        &exp.run.out,
        exp.run.profile,
        exp.run.seed,
        exp.run.replications,
        overrides,
    );
    let _lock = LockGuard::acquire(&out_dir)?;

    let mut files: Vec<(String, String)> = Vec::new();
    let mut summary = String::new();

    if !exp.arms.is_empty() {
        let n = exp.run.n.expect("validated");
        let beta_a_true = exp.run.beta_a_true.unwrap_or(exp.model.beta_a);
        let result = run_experiment(&exp.arms, n, replications, seed, beta_a_true)?;
        summary.push_str(&experiment_summary(&result));
        files.push(("experiment.csv".into(), result.to_csv()));
        files.push(("experiment.json".into(), result.to_json()));
    }

    for sweep in &exp.sweeps {
        let result = grid_sweep(
            &exp.model,
            &sweep.parameter,
            &sweep.grid,
            sweep.mode,
            &sweep.hold,
            sweep.n.max(1),
            sweep.replications_per_point,
            seed,
        )?;
        summary.push_str(&sweep_summary(&result, &sweep.label));
        files.push((format!("sweep_{}.csv", sweep.label), result.to_csv()));
        files.push((format!("sweep_{}.json", sweep.label), result.to_json()));
    }

    for (i, problem) in exp.calibrations.iter().enumerate() {
        let result = calibrate_numeric(problem)?;
        summary.push_str(&calibration_text(i, &result));
        files.push((
            format!("calibration_{i}.json"),
            serde_json::to_string_pretty(&result).expect("calibration serializes"),
        ));
    }

    files.push(("summary.txt".into(), summary.clone()));
    write_artifacts(&out_dir, &files)?;
    Ok(RunArtifacts {
        out_dir,
        files,
        summary,
    })
}

fn lab_summary(result: &LabStudyResult) -> String {
    let mut s = format!(
        "lab study (n_train = {}, n_test = {}, replications = {}, seed = {})\n",
        result.n_train, result.n_test, result.replications, result.seed
    );
    s.push_str(&format!(
        "{:<12} {:>16} {:>16} {:>16}\n",
        "label", "median_rel_mse", "mean_rel_mse", "median_mod_mse"
    ));
    for arm in &result.arms {
        s.push_str(&format!(
            "{:<12} {:>16.6e} {:>16.6e} {:>16.6e}\n",
            arm.label, arm.median_relative_mse, arm.mean_relative_mse, arm.median_modified_mse
        ));
    }
    s
}

fn noise_summary(result: &NoiseSweepResult) -> String {
    let mut s = format!(
        "noise sweep ({} points, {} replications per point)\n",
        result.points.len(),
        result.replications_per_point
    );
    for pt in &result.points {
        s.push_str(&format!("  sigma = {:>8.4}:", pt.sigma_eps));
        for (label, arm) in result.labels.iter().zip(&pt.arms) {
            s.push_str(&format!(" {label} = {:.4}", arm.mean_relative_mse));
        }
        s.push('\n');
    }
    s
}

fn run_lab(exp: ResolvedLabExperiment, overrides: &Overrides) -> Result<RunArtifacts> {
    let (out_dir, seed, replications, _) = effective_run(
        &exp.run.out,
        exp.run.profile,
        exp.run.seed,
        exp.replications,
        overrides,
    );
    let _lock = LockGuard::acquire(&out_dir)?;

    // apply the SNR designs now; feasibility was checked statically
    let mut arms = Vec::with_capacity(exp.arms.len());
    for (label, spec, snr) in &exp.arms {
        let spec = match snr {
            Some(block) => apply_snr_design(spec, &block.design(), block.n_mc, block.seed)?,
            None => spec.clone(),
        };
        arms.push((label.clone(), spec));
    }

    let mut files: Vec<(String, String)> = Vec::new();
    let mut summary = String::new();

    let result = run_study(&arms, &exp.net, exp.n_train, exp.n_test, replications, seed)?;
    summary.push_str(&lab_summary(&result));
    files.push(("lab.csv".into(), result.to_csv()));
    files.push(("lab.json".into(), result.to_json()));
    for (label, _) in &arms {
        if let Some(raw) = result.raw_csv(label) {
            files.push((format!("raw_{label}.csv"), raw));
        }
    }

    if let Some((grid, reps)) = &exp.noise_sweep {
        let pair = [arms[0].clone(), arms[1].clone()];
        let ns = noise_sweep(
            &pair,
            grid,
            &exp.net,
            exp.n_train,
            exp.n_test,
            *reps,
            seed ^ 0x6e73,
        )?;
        summary.push_str(&noise_summary(&ns));
        files.push(("noise_sweep.csv".into(), ns.to_csv()));
        files.push(("noise_sweep.json".into(), ns.to_json()));
    }

    for (i, problem) in exp.calibrations.iter().enumerate() {
        let result = calibrate_numeric(problem)?;
        summary.push_str(&calibration_text(i, &result));
        files.push((
            format!("calibration_{i}.json"),
            serde_json::to_string_pretty(&result).expect("calibration serializes"),
        ));
    }

    files.push(("summary.txt".into(), summary.clone()));
    write_artifacts(&out_dir, &files)?;
    Ok(RunArtifacts {
        out_dir,
        files,
        summary,
    })
}

/// Maps an intervention parameter name onto its diagram node.
fn scm_param_node(parameter: &str) -> Option<&'static str> {
    let base = parameter.split('[').next().unwrap_or(parameter);
    match base {
        "beta_a" => Some("beta_a"),
        "beta_u" => Some("beta_u"),
        "beta_x" => Some("beta_x"),
        "gamma_u" => Some("gamma_u"),
        "gamma_x" => Some("gamma_x"),
        "alpha_a" => Some("alpha_a"),
        "alpha_y" => Some("alpha_y"),
        "mu_u" => Some("mu_u"),
        "mu_x" => Some("mu_x"),
        "var_u" => Some("sigma_u2"),
        "var_x" => Some("sigma_x2"),
        "var_eps_a" => Some("sigma_eps_a2"),
        "var_eps_y" => Some("sigma_eps_y2"),
        "n" => Some("n"),
        _ => None,
    }
}

fn describe_paths(
    diagram: &crate::influence::InfluenceDiagram,
    node: &str,
    heading: &str,
    max_blocking: usize,
) -> Result<String> {
    let report = path_report(diagram, node, "outcome")?;
    let mut s = format!("{heading}\n");
    s.push_str(&format!(
        "  {} direct, {} indirect, {} confounding pathway(s)\n",
        report.direct_paths.len(),
        report.indirect_paths.len(),
        report.confounding_paths.len()
    ));
    for p in &report.direct_paths {
        s.push_str(&format!("  direct:   {}\n", p.join(" -> ")));
    }
    for p in &report.indirect_paths {
        s.push_str(&format!("  indirect: {}\n", p.join(" -> ")));
    }
    for p in &report.confounding_paths {
        s.push_str(&format!("  confounding: {}\n", p.join(" - ")));
    }
    if !report.indirect_paths.is_empty() {
        let sets = sufficient_blocking_sets(diagram, node, "outcome", 8)?;
        s.push_str(&format!(
            "  blocking sets (top {max_blocking} of {}):\n",
            sets.len()
        ));
        for set in sets.iter().take(max_blocking) {
            s.push_str(&format!(
                "    {{{}}} ({} manipulable)\n",
                set.nodes.join(", "),
                set.manipulable_count
            ));
        }
    }
    Ok(s)
}

/// Textual path classification for each arm's intervened parameter (or one
/// explicit node), against the model's built-in diagram.
pub fn explain_file(path: &Path, node: Option<&str>) -> Result<String> {
    let file = load(path)?;
    let resolved = resolve(&file).map_err(|diags| {
        let mut msg = String::from("validation failed:\n");
        for d in &diags {
            msg.push_str(&format!("  {d}\n"));
        }
        Error::Config(msg)
    })?;

    match resolved {
        ResolvedExperiment::Scm(exp) => {
            let diagram = build_bias_amp_diagram();
            let mut out =
                String::from("model: linear-Gaussian SCM (bias-amplification diagram)\n\n");
            if let Some(node) = node {
                out.push_str(&describe_paths(
                    &diagram,
                    node,
                    &format!("node {node} -> outcome"),
                    5,
                )?);
                return Ok(out);
            }
            let mut any = false;
            let original = load(path)?;
            for arm in &original.arms {
                let Some(param) = &arm.parameter else {
                    continue;
                };
                any = true;
                // parse validates the parameter exists on the spec
                ParamName::parse(param, exp.model.p())?;
                let Some(node) = scm_param_node(param) else {
                    out.push_str(&format!(
                        "arm \"{}\": no diagram node for {param}\n",
                        arm.label
                    ));
                    continue;
                };
                out.push_str(&describe_paths(
                    &diagram,
                    node,
                    &format!("arm \"{}\": {param} -> outcome", arm.label),
                    5,
                )?);
                out.push('\n');
            }
            if !any {
                out.push_str("no intervention arms; use --node to inspect a specific parameter\n");
            }
            Ok(out)
        }
        ResolvedExperiment::Lab(_) => {
            let diagram = build_mean_function_diagram();
            let mut out = String::from("model: mean-function laboratory (SNR-design diagram)\n\n");
            let target = node.unwrap_or("mu_x");
            out.push_str(&describe_paths(
                &diagram,
                target,
                &format!("node {target} -> outcome"),
                5,
            )?);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(contents: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.toml");
        let mut f = fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    const SMALL_RUN: &str = r#"
version = 1

[model.scm]
beta_a = 0.2
beta_u = 0.3
beta_x = [-0.05]
gamma_u = 0.3
gamma_x = [0.6]
var_u = 1.0
var_x = [1.0]
var_eps_a = 0.55
var_eps_y = 0.8435

[[arms]]
label = "control"

[[arms]]
label = "total"
mode = "total_effect"
parameter = "gamma_u"
value = 0.55

[run]
n = 300
replications = 24
seed = 7
"#;

    #[test]
    fn run_writes_expected_artifacts() {
        let (dir, path) = write_temp(SMALL_RUN);
        let out = dir.path().join("out");
        let artifacts = run_file(
            &path,
            &Overrides {
                out: Some(out.clone()),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(out.join("experiment.csv").exists());
        assert!(out.join("experiment.json").exists());
        assert!(out.join("summary.txt").exists());
        assert!(!out.join(".causim.lock").exists(), "lock released");
        assert!(artifacts.summary.contains("control"));
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let (dir, path) = write_temp(SMALL_RUN);
        let a = run_file(
            &path,
            &Overrides {
                out: Some(dir.path().join("a")),
                threads: Some(1),
                ..Default::default()
            },
        )
        .unwrap();
        let b = run_file(
            &path,
            &Overrides {
                out: Some(dir.path().join("b")),
                threads: Some(4),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.files, b.files);
    }

    #[test]
    fn lock_prevents_concurrent_writers() {
        let (dir, path) = write_temp(SMALL_RUN);
        let out = dir.path().join("out");
        fs::create_dir_all(&out).unwrap();
        fs::write(out.join(".causim.lock"), "").unwrap();
        let err = run_file(
            &path,
            &Overrides {
                out: Some(out),
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("locked"), "{err}");
    }

    #[test]
    fn explain_reports_three_gamma_u_pathways() {
        let (_dir, path) = write_temp(SMALL_RUN);
        let text = explain_file(&path, None).unwrap();
        assert!(text.contains("1 direct, 2 indirect"), "{text}");
        let n_text = explain_file(&path, Some("n")).unwrap();
        assert!(n_text.contains("1 direct, 0 indirect"), "{n_text}");
    }

    #[test]
    fn fast_profile_caps_replications() {
        let text = SMALL_RUN.replace("replications = 24", "replications = 600");
        let (dir, path) = write_temp(&text);
        let artifacts = run_file(
            &path,
            &Overrides {
                out: Some(dir.path().join("out")),
                profile: Some(Profile::Fast),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(
            artifacts.summary.contains("replications = 500"),
            "{}",
            artifacts.summary
        );
    }
}
