//! Seeded sampling, OLS estimation, replicated experiments, and parameter
//! sweeps.
//!
//! Reproducibility contract: every random quantity is drawn from a stream
//! keyed by (master seed, arm label, replication index, variable index), so
//! results are bit-identical for a given seed regardless of how
//! replications are distributed across threads. Replications are
//! embarrassingly parallel; aggregation order is fixed by replication
//! index.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interventions::{direct_effect, total_effect, HeldMoment, InterventionMode};
use crate::ols::least_squares;
use crate::rng::{normal_vec, StreamKey};
use crate::scm::{plim_conditional, plim_naive, ScmSpec};

/// A generated sample, stored column-wise under stable names.
///
/// Datasets produced by [`sample_dataset`] carry Y, A, X1..Xp and U; the
/// unmeasured confounder is generated even though estimators may not use
/// it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    n: usize,
}

impl Dataset {
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidSpec(
                "dataset needs at least one non-empty column".into(),
            ));
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut cols = Vec::with_capacity(columns.len());
        for (name, col) in columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column {name} has length {}, expected {n}",
                    col.len()
                )));
            }
            if names.contains(&name) {
                return Err(Error::InvalidSpec(format!("duplicate column name {name}")));
            }
            names.push(name);
            cols.push(col);
        }
        Ok(Dataset { names, cols, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        let idx = self
            .names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownNode(format!("column {name}")))?;
        Ok(&self.cols[idx])
    }

    /// Names of the measured regressor columns, in generation order.
    pub fn x_names(&self) -> Vec<String> {
        self.names
            .iter()
            .filter(|n| n.starts_with('X'))
            .cloned()
            .collect()
    }
}

/// Draws a dataset from the structural equations on the stream `key`.
pub fn sample_dataset_keyed(spec: &ScmSpec, n: usize, key: StreamKey) -> Result<Dataset> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidSpec("n must be >= 1".into()));
    }
    let p = spec.p();
    // variable substream layout: U = 0, X_j = 1 + j, eps_a = p + 1, eps_y = p + 2
    let u = normal_vec(key.child(0), spec.mu_u, spec.var_u.sqrt(), n);
    let xs: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            normal_vec(
                key.child(1 + j as u64),
                spec.mu_x[j],
                spec.var_x[j].sqrt(),
                n,
            )
        })
        .collect();
    let eps_a = normal_vec(key.child(p as u64 + 1), 0.0, spec.var_eps_a.sqrt(), n);
    let eps_y = normal_vec(key.child(p as u64 + 2), 0.0, spec.var_eps_y.sqrt(), n);

    let mut a = vec![0.0; n];
    for i in 0..n {
        let mut v = spec.alpha_a + spec.gamma_u * u[i] + eps_a[i];
        for (g, x) in spec.gamma_x.iter().zip(&xs) {
            v += g * x[i];
        }
        a[i] = v;
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = spec.alpha_y + spec.beta_a * a[i] + spec.beta_u * u[i] + eps_y[i];
        for (b, x) in spec.beta_x.iter().zip(&xs) {
            v += b * x[i];
        }
        y[i] = v;
    }

    let mut columns = vec![("Y".to_string(), y), ("A".to_string(), a)];
    for (j, x) in xs.into_iter().enumerate() {
        columns.push((format!("X{}", j + 1), x));
    }
    columns.push(("U".to_string(), u));
    Dataset::from_columns(columns)
}

/// Draws a dataset from the structural equations; bit-reproducible given
/// (spec, n, seed).
pub fn sample_dataset(spec: &ScmSpec, n: usize, seed: u64) -> Result<Dataset> {
    sample_dataset_keyed(spec, n, StreamKey::new(seed))
}

/// OLS fit of Y ~ A + S with intercept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    /// The conditioning set S (names of X columns, possibly empty).
    pub conditioning: Vec<String>,
    /// Coefficient on A.
    pub beta_a_hat: f64,
    /// All coefficients by name, intercept first.
    pub full_coefficients: Vec<(String, f64)>,
    pub n: usize,
}

/// Fits Y ~ A + conditioning with intercept by Householder-QR least
/// squares. The conditioning set may contain only measured regressors.
pub fn ols_fit(data: &Dataset, conditioning: &[&str]) -> Result<EstimatorResult> {
    let x_names = data.x_names();
    for name in conditioning {
        if !x_names.iter().any(|x| x == name) {
            return Err(Error::InvalidSpec(format!(
                "conditioning set may contain only measured regressors, got {name}"
            )));
        }
    }
    let n = data.n();
    let y = data.column("Y")?;
    let a = data.column("A")?;
    let ones = vec![1.0; n];
    let mut cols: Vec<&[f64]> = vec![&ones, a];
    // keep data column order so coefficients are stable
    let mut used = Vec::new();
    for name in &x_names {
        if conditioning.iter().any(|c| c == name) {
            cols.push(data.column(name)?);
            used.push(name.clone());
        }
    }
    let beta = least_squares(&cols, y)?;
    let mut full = vec![
        ("intercept".to_string(), beta[0]),
        ("A".to_string(), beta[1]),
    ];
    for (i, name) in used.iter().enumerate() {
        full.push((name.clone(), beta[2 + i]));
    }
    Ok(EstimatorResult {
        conditioning: used,
        beta_a_hat: beta[1],
        full_coefficients: full,
        n,
    })
}

/// Summary statistics shared by experiment arms and sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatRow {
    pub mean_bhat_x: f64,
    pub se_bhat_x: f64,
    pub mean_bhat_naive: f64,
    pub se_bhat_naive: f64,
    pub mean_add_abs_bias: f64,
    pub se_add_abs_bias: f64,
}

impl StatRow {
    fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.mean_bhat_x,
            self.se_bhat_x,
            self.mean_bhat_naive,
            self.se_bhat_naive,
            self.mean_add_abs_bias,
            self.se_add_abs_bias
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmStats {
    pub label: String,
    #[serde(flatten)]
    pub stats: StatRow,
    /// Replications whose design matrix was singular (excluded from the
    /// summaries; must be 0 for acceptance-grade runs).
    pub singular_failures: usize,
}

/// Per-arm Monte Carlo summaries of both estimators and the
/// additional-absolute-bias statistic |bhat_x - beta_a| - |bhat_0 - beta_a|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub arms: Vec<ArmStats>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub beta_a_true: f64,
}

pub const EXPERIMENT_CSV_HEADER: &str =
    "label,mean_bhat_x,se_bhat_x,mean_bhat_naive,se_bhat_naive,mean_add_abs_bias,se_add_abs_bias";

impl ExperimentResult {
    /// One row per arm, columns in the documented order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(EXPERIMENT_CSV_HEADER);
        out.push('\n');
        for arm in &self.arms {
            out.push_str(&format!("{},{}\n", arm.label, arm.stats.csv_fields()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("experiment result serializes")
    }

    pub fn arm(&self, label: &str) -> Option<&ArmStats> {
        self.arms.iter().find(|a| a.label == label)
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len();
    if k == 0 {
        return (f64::NAN, f64::NAN);
    }
    let n = k as f64;
    let mean = values.iter().sum::<f64>() / n;
    if k == 1 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct RepRecord {
    bhat_x: f64,
    bhat_naive: f64,
}

/// Runs every arm for `replications` independent datasets of size `n`.
///
/// Arm substreams are keyed by the arm label, so permuting the arm list
/// permutes the output without changing any value. Labels must be unique.
pub fn run_experiment(
    arms: &[(String, ScmSpec)],
    n: usize,
    replications: usize,
    seed: u64,
    beta_a_true: f64,
) -> Result<ExperimentResult> {
    if arms.is_empty() {
        return Err(Error::InvalidSpec(
            "experiment needs at least one arm".into(),
        ));
    }
    if replications == 0 {
        return Err(Error::InvalidSpec("replications must be >= 1".into()));
    }
    for (i, (label, spec)) in arms.iter().enumerate() {
        spec.validate()?;
        if arms[..i].iter().any(|(l, _)| l == label) {
            return Err(Error::InvalidSpec(format!(
                "duplicate arm label {label}; labels key the random substreams"
            )));
        }
    }

    let master = StreamKey::new(seed);
    let arm_keys: Vec<StreamKey> = arms.iter().map(|(l, _)| master.child_labeled(l)).collect();

    // rep-major results; collect preserves replication order
    let per_rep: Vec<Vec<Option<RepRecord>>> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            arms.iter()
                .zip(&arm_keys)
                .map(|((_, spec), key)| {
                    let data = sample_dataset_keyed(spec, n, key.child(rep as u64))
                        .expect("spec validated above");
                    let x_names = data.x_names();
                    let x_refs: Vec<&str> = x_names.iter().map(|s| s.as_str()).collect();
                    let cond = ols_fit(&data, &x_refs);
                    let naive = ols_fit(&data, &[]);
                    match (cond, naive) {
                        (Ok(c), Ok(nv)) => Some(RepRecord {
                            bhat_x: c.beta_a_hat,
                            bhat_naive: nv.beta_a_hat,
                        }),
                        _ => None,
                    }
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(arms.len());
    for (a, (label, _)) in arms.iter().enumerate() {
        let mut bx = Vec::with_capacity(replications);
        let mut bn = Vec::with_capacity(replications);
        let mut bias = Vec::with_capacity(replications);
        let mut failures = 0usize;
        for rep in &per_rep {
            match &rep[a] {
                Some(r) => {
                    bx.push(r.bhat_x);
                    bn.push(r.bhat_naive);
                    bias.push((r.bhat_x - beta_a_true).abs() - (r.bhat_naive - beta_a_true).abs());
                }
                None => failures += 1,
            }
        }
        let (mx, sx) = mean_and_se(&bx);
        let (mn, sn) = mean_and_se(&bn);
        let (mb, sb) = mean_and_se(&bias);
        out.push(ArmStats {
            label: label.clone(),
            stats: StatRow {
                mean_bhat_x: mx,
                se_bhat_x: sx,
                mean_bhat_naive: mn,
                se_bhat_naive: sn,
                mean_add_abs_bias: mb,
                se_add_abs_bias: sb,
            },
            singular_failures: failures,
        });
    }

    Ok(ExperimentResult {
        arms: out,
        n,
        replications,
        seed,
        beta_a_true,
    })
}

/// One evaluated grid point of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(flatten)]
    pub stats: StatRow,
}

/// Sweep output, ordered by the input grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub mode: InterventionMode,
    pub hold: Vec<HeldMoment>,
    pub points: Vec<SweepPoint>,
    pub n: usize,
    /// 0 means the analytic (probability-limit) evaluation.
    pub replications_per_point: usize,
    pub seed: u64,
}

pub const SWEEP_CSV_HEADER: &str =
    "value,mean_bhat_x,se_bhat_x,mean_bhat_naive,se_bhat_naive,mean_add_abs_bias,se_add_abs_bias";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for pt in &self.points {
            out.push_str(&format!("{},{}\n", pt.value, pt.stats.csv_fields()));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }
}

/// Runs the chosen intervention at every grid value and records the
/// estimator and bias-amplification statistics per point.
///
/// With `replications_per_point = 0` the statistics are the analytic
/// probability limits (no sampling; standard errors are 0). Direct-effect
/// sweeps fail upfront on any infeasible grid value, naming the point;
/// clip the grid to [`crate::interventions::feasible_range`] first.
#[allow(clippy::too_many_arguments)]
pub fn grid_sweep(
    reference: &ScmSpec,
    parameter: &str,
    grid: &[f64],
    mode: InterventionMode,
    hold: &[HeldMoment],
    n: usize,
    replications_per_point: usize,
    seed: u64,
) -> Result<SweepResult> {
    reference.validate()?;
    if grid.is_empty() {
        return Err(Error::InvalidSpec("sweep grid is empty".into()));
    }
    let beta_a_true = reference.beta_a;

    // plan every point upfront so infeasibility cannot strike mid-run
    let mut treated = Vec::with_capacity(grid.len());
    for (i, &v) in grid.iter().enumerate() {
        let plan = match mode {
            InterventionMode::TotalEffect => total_effect(reference, parameter, v),
            InterventionMode::DirectEffect => direct_effect(reference, parameter, v, hold),
        }
        .map_err(|e| Error::Infeasible(format!("grid point {i} ({parameter} = {v}): {e}")))?;
        treated.push(plan.treated);
    }

    let master = StreamKey::new(seed);
    let points: Vec<SweepPoint> = treated
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<SweepPoint> {
            let stats = if replications_per_point == 0 {
                let plim_x = plim_conditional(spec)?;
                let plim_0 = plim_naive(spec)?;
                StatRow {
                    mean_bhat_x: plim_x,
                    se_bhat_x: 0.0,
                    mean_bhat_naive: plim_0,
                    se_bhat_naive: 0.0,
                    mean_add_abs_bias: (plim_x - beta_a_true).abs() - (plim_0 - beta_a_true).abs(),
                    se_add_abs_bias: 0.0,
                }
            } else {
                let key = master.child(i as u64);
                let mut bx = Vec::with_capacity(replications_per_point);
                let mut bn = Vec::with_capacity(replications_per_point);
                let mut bias = Vec::with_capacity(replications_per_point);
                for rep in 0..replications_per_point {
                    let data = sample_dataset_keyed(spec, n, key.child(rep as u64))?;
                    let x_names = data.x_names();
                    let x_refs: Vec<&str> = x_names.iter().map(|s| s.as_str()).collect();
                    let c = ols_fit(&data, &x_refs)?;
                    let nv = ols_fit(&data, &[])?;
                    bx.push(c.beta_a_hat);
                    bn.push(nv.beta_a_hat);
                    bias.push(
                        (c.beta_a_hat - beta_a_true).abs() - (nv.beta_a_hat - beta_a_true).abs(),
                    );
                }
                let (mx, sx) = mean_and_se(&bx);
                let (mn, sn) = mean_and_se(&bn);
                let (mb, sb) = mean_and_se(&bias);
                StatRow {
                    mean_bhat_x: mx,
                    se_bhat_x: sx,
                    mean_bhat_naive: mn,
                    se_bhat_naive: sn,
                    mean_add_abs_bias: mb,
                    se_add_abs_bias: sb,
                }
            };
            Ok(SweepPoint {
                value: grid[i],
                stats,
            })
        })
        .collect::<Result<_>>()?;

    Ok(SweepResult {
        parameter: parameter.to_string(),
        mode,
        hold: hold.to_vec(),
        points,
        n,
        replications_per_point,
        seed,
    })
}

/// Equally spaced grid of `points` values covering [lo, hi].
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points as f64 - 1.0);
    (0..points).map(|i| lo + step * i as f64).collect()
}
