//! Total-effect and direct-effect interventions on an [`ScmSpec`].
//!
//! A total effect sets one parameter and lets every downstream functional
//! float. A direct effect sets the parameter while holding designated
//! marginal moments at their reference values by recomputing the error
//! variances (the absorbers). Holding moments constant constrains how far
//! the parameter may move: the feasible range is where the absorbers stay
//! non-negative.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{marginal_moments, CovarianceMatrix, ScmSpec, PSD_RTOL};

/// Slack allowed before a required error variance counts as negative;
/// absorbs floating-point noise at exact feasibility boundaries.
const FEASIBILITY_TOL: f64 = 1e-12;

/// A marginal moment that a direct-effect intervention holds fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeldMoment {
    VarA,
    VarY,
}

impl HeldMoment {
    pub fn name(self) -> &'static str {
        match self {
            HeldMoment::VarA => "var_a",
            HeldMoment::VarY => "var_y",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "var_a" => Ok(HeldMoment::VarA),
            "var_y" => Ok(HeldMoment::VarY),
            other => Err(Error::UnknownFunctional(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionMode {
    TotalEffect,
    DirectEffect,
}

/// A reference spec plus a treated spec with absorption bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionPlan {
    pub reference: ScmSpec,
    pub treated: ScmSpec,
    pub mode: InterventionMode,
    /// Moments held at their reference values (direct effect only).
    pub held: Vec<HeldMoment>,
    /// Parameters recomputed to absorb induced moment changes.
    pub absorbers: Vec<String>,
}

/// Addressable scalar parameter of an [`ScmSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamName {
    BetaA,
    BetaU,
    BetaX(usize),
    GammaU,
    GammaX(usize),
    AlphaY,
    AlphaA,
    MuU,
    MuX(usize),
    VarU,
    VarX(usize),
    VarEpsA,
    VarEpsY,
}

impl ParamName {
    /// Parses `"gamma_u"`, `"gamma_x"` (p = 1 shorthand), `"gamma_x[2]"`, ...
    pub fn parse(name: &str, p: usize) -> Result<Self> {
        let (base, index) = match name.find('[') {
            Some(open) => {
                let close = name
                    .rfind(']')
                    .ok_or_else(|| Error::UnknownParameter(name.to_string()))?;
                let idx: usize = name[open + 1..close]
                    .parse()
                    .map_err(|_| Error::UnknownParameter(name.to_string()))?;
                (&name[..open], Some(idx))
            }
            None => (name, None),
        };
        let vector_index = |idx: Option<usize>| -> Result<usize> {
            match idx {
                Some(i) if i < p => Ok(i),
                Some(i) => Err(Error::UnknownParameter(format!(
                    "{base}[{i}] out of range for p = {p}"
                ))),
                // bare vector name is unambiguous only with a single regressor
                None if p == 1 => Ok(0),
                None => Err(Error::UnknownParameter(format!(
                    "{base} is a vector with p = {p}; use {base}[i]"
                ))),
            }
        };
        match base {
            "beta_a" => Ok(ParamName::BetaA),
            "beta_u" => Ok(ParamName::BetaU),
            "gamma_u" => Ok(ParamName::GammaU),
            "alpha_y" => Ok(ParamName::AlphaY),
            "alpha_a" => Ok(ParamName::AlphaA),
            "mu_u" => Ok(ParamName::MuU),
            "var_u" => Ok(ParamName::VarU),
            "var_eps_a" => Ok(ParamName::VarEpsA),
            "var_eps_y" => Ok(ParamName::VarEpsY),
            "beta_x" => Ok(ParamName::BetaX(vector_index(index)?)),
            "gamma_x" => Ok(ParamName::GammaX(vector_index(index)?)),
            "mu_x" => Ok(ParamName::MuX(vector_index(index)?)),
            "var_x" => Ok(ParamName::VarX(vector_index(index)?)),
            _ => Err(Error::UnknownParameter(name.to_string())),
        }
    }

    pub fn get(self, spec: &ScmSpec) -> f64 {
        match self {
            ParamName::BetaA => spec.beta_a,
            ParamName::BetaU => spec.beta_u,
            ParamName::BetaX(i) => spec.beta_x[i],
            ParamName::GammaU => spec.gamma_u,
            ParamName::GammaX(i) => spec.gamma_x[i],
            ParamName::AlphaY => spec.alpha_y,
            ParamName::AlphaA => spec.alpha_a,
            ParamName::MuU => spec.mu_u,
            ParamName::MuX(i) => spec.mu_x[i],
            ParamName::VarU => spec.var_u,
            ParamName::VarX(i) => spec.var_x[i],
            ParamName::VarEpsA => spec.var_eps_a,
            ParamName::VarEpsY => spec.var_eps_y,
        }
    }

    pub fn set(self, spec: &mut ScmSpec, value: f64) {
        match self {
            ParamName::BetaA => spec.beta_a = value,
            ParamName::BetaU => spec.beta_u = value,
            ParamName::BetaX(i) => spec.beta_x[i] = value,
            ParamName::GammaU => spec.gamma_u = value,
            ParamName::GammaX(i) => spec.gamma_x[i] = value,
            ParamName::AlphaY => spec.alpha_y = value,
            ParamName::AlphaA => spec.alpha_a = value,
            ParamName::MuU => spec.mu_u = value,
            ParamName::MuX(i) => spec.mu_x[i] = value,
            ParamName::VarU => spec.var_u = value,
            ParamName::VarX(i) => spec.var_x[i] = value,
            ParamName::VarEpsA => spec.var_eps_a = value,
            ParamName::VarEpsY => spec.var_eps_y = value,
        }
    }

    /// Lower bound of the parameter's own domain, if it has one.
    fn domain_lower(self) -> Option<f64> {
        match self {
            ParamName::VarU | ParamName::VarX(_) | ParamName::VarEpsA | ParamName::VarEpsY => {
                Some(0.0)
            }
            _ => None,
        }
    }
}

/// Replaces one parameter and lets all downstream functionals float.
pub fn total_effect(
    reference: &ScmSpec,
    parameter: &str,
    new_value: f64,
) -> Result<InterventionPlan> {
    reference.validate()?;
    let name = ParamName::parse(parameter, reference.p())?;
    let mut treated = reference.clone();
    name.set(&mut treated, new_value);
    treated.validate()?;
    Ok(InterventionPlan {
        reference: reference.clone(),
        treated,
        mode: InterventionMode::TotalEffect,
        held: Vec::new(),
        absorbers: Vec::new(),
    })
}

/// Replaces one parameter and recomputes error variances so that the held
/// moments equal their reference values exactly.
///
/// Absorption runs in structural order: `var_a` through `var_eps_a` first
/// (treatment is generated before the outcome), then `var_y` through
/// `var_eps_y`.
pub fn direct_effect(
    reference: &ScmSpec,
    parameter: &str,
    new_value: f64,
    hold: &[HeldMoment],
) -> Result<InterventionPlan> {
    reference.validate()?;
    let name = ParamName::parse(parameter, reference.p())?;
    let targets = marginal_moments(reference)?;
    let mut treated = reference.clone();
    name.set(&mut treated, new_value);

    let hold_a = hold.contains(&HeldMoment::VarA);
    let hold_y = hold.contains(&HeldMoment::VarY);
    let mut held = Vec::new();
    let mut absorbers = Vec::new();

    if hold_a {
        let required = targets.var_a - treated.explained_treatment_variance();
        if required < -FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "holding var_a = {} at {parameter} = {new_value} requires var_eps_a = {required:.6}, \
                 violating var_eps_a >= 0",
                targets.var_a
            )));
        }
        treated.var_eps_a = required.max(0.0);
        held.push(HeldMoment::VarA);
        absorbers.push("var_eps_a".to_string());
    }
    if hold_y {
        let var_a_now = treated.explained_treatment_variance() + treated.var_eps_a;
        let required = targets.var_y - treated.explained_outcome_variance(var_a_now);
        if required < -FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "holding var_y = {} at {parameter} = {new_value} requires var_eps_y = {required:.6}, \
                 violating var_eps_y >= 0",
                targets.var_y
            )));
        }
        treated.var_eps_y = required.max(0.0);
        held.push(HeldMoment::VarY);
        absorbers.push("var_eps_y".to_string());
    }

    treated.validate()?;
    Ok(InterventionPlan {
        reference: reference.clone(),
        treated,
        mode: InterventionMode::DirectEffect,
        held,
        absorbers,
    })
}

/// Interval of parameter values for which a direct effect is feasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRange {
    pub parameter: String,
    /// `-inf` when unbounded below.
    pub lower: f64,
    /// `+inf` when unbounded above.
    pub upper: f64,
    /// Which error variance hits zero at each finite endpoint (open
    /// interval: the boundary itself forces a degenerate error
    /// distribution).
    pub binding_constraints: Vec<String>,
}

/// One quadratic constraint a*v^2 + b*v + c <= t.
struct Quadratic {
    a: f64,
    b: f64,
    c: f64,
}

impl Quadratic {
    /// Exact coefficient extraction for a polynomial of degree <= 2 from
    /// its values at v = -1, 0, 1.
    fn from_samples(f: impl Fn(f64) -> f64) -> Quadratic {
        let f0 = f(0.0);
        let f1 = f(1.0);
        let fm1 = f(-1.0);
        Quadratic {
            a: 0.5 * (f1 + fm1) - f0,
            b: 0.5 * (f1 - fm1),
            c: f0,
        }
    }

    /// Solution set of a*v^2 + b*v + c <= t as an interval; `None` when
    /// empty.
    fn solve_leq(&self, t: f64) -> Option<(f64, f64)> {
        let scale = self.a.abs().max(self.b.abs()).max(self.c.abs()).max(1.0);
        let tiny = 1e-12 * scale;
        if self.a.abs() <= tiny {
            if self.b.abs() <= tiny {
                return if self.c <= t + FEASIBILITY_TOL {
                    Some((f64::NEG_INFINITY, f64::INFINITY))
                } else {
                    None
                };
            }
            let bound = (t - self.c) / self.b;
            return if self.b > 0.0 {
                Some((f64::NEG_INFINITY, bound))
            } else {
                Some((bound, f64::INFINITY))
            };
        }
        // leading coefficients here are sums of squares, so a > 0
        let disc = self.b * self.b - 4.0 * self.a * (self.c - t);
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        Some((
            (-self.b - sq) / (2.0 * self.a),
            (-self.b + sq) / (2.0 * self.a),
        ))
    }
}

/// Closed-form feasible interval for `direct_effect(reference, parameter,
/// v, hold)` over v.
///
/// Both marginal variances are polynomials of degree at most two in any
/// single parameter, so each held moment contributes one quadratic
/// inequality; the range is their intersection. Endpoints are where an
/// error variance vanishes (the interval is open: a zero error variance is
/// a degenerate sampling distribution).
pub fn feasible_range(
    reference: &ScmSpec,
    parameter: &str,
    hold: &[HeldMoment],
) -> Result<FeasibleRange> {
    reference.validate()?;
    let name = ParamName::parse(parameter, reference.p())?;
    let targets = marginal_moments(reference)?;
    let hold_a = hold.contains(&HeldMoment::VarA);
    let hold_y = hold.contains(&HeldMoment::VarY);

    let at = |v: f64| -> ScmSpec {
        let mut s = reference.clone();
        name.set(&mut s, v);
        s
    };

    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut binding: Vec<String> = Vec::new();
    let mut apply = |interval: Option<(f64, f64)>, constraint: &str| -> Result<()> {
        let (lo, hi) = interval.ok_or_else(|| {
            Error::Infeasible(format!(
                "no value of {parameter} satisfies {constraint} >= 0"
            ))
        })?;
        if lo > lower {
            lower = lo;
            binding.retain(|b| !b.starts_with("lower"));
            if lo.is_finite() {
                binding.push(format!("lower: {constraint} = 0"));
            }
        }
        if hi < upper {
            upper = hi;
            binding.retain(|b| !b.starts_with("upper"));
            if hi.is_finite() {
                binding.push(format!("upper: {constraint} = 0"));
            }
        }
        Ok(())
    };

    if hold_a {
        let q = Quadratic::from_samples(|v| at(v).explained_treatment_variance());
        apply(q.solve_leq(targets.var_a), "var_eps_a")?;
    }
    if hold_y {
        let q = Quadratic::from_samples(|v| {
            let s = at(v);
            let var_a = if hold_a {
                targets.var_a
            } else {
                s.explained_treatment_variance() + s.var_eps_a
            };
            s.explained_outcome_variance(var_a)
        });
        apply(q.solve_leq(targets.var_y), "var_eps_y")?;
    }

    if let Some(dl) = name.domain_lower() {
        if dl > lower {
            lower = dl;
            binding.retain(|b| !b.starts_with("lower"));
            binding.push(format!("lower: {parameter} domain boundary"));
        }
    }

    if lower > upper {
        return Err(Error::Infeasible(format!(
            "constraints on {parameter} are jointly unsatisfiable ({lower} > {upper})"
        )));
    }
    binding.sort();
    Ok(FeasibleRange {
        parameter: parameter.to_string(),
        lower,
        upper,
        binding_constraints: binding,
    })
}

/// Verdict of a correlation-matrix extension check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionReport {
    pub valid: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Tests whether extending an observed covariance over (Y, A, X) with an
/// unmeasured variable U is consistent: the candidate correlations are
/// turned into covariances against the observed diagonal and the extended
/// matrix is checked for positive semi-definiteness within the shared
/// eigenvalue tolerance.
pub fn extend_correlation_matrix(
    observed: &CovarianceMatrix,
    candidate_row: &[f64],
    var_u: f64,
) -> Result<ExtensionReport> {
    let d = observed.dim();
    if candidate_row.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "candidate row has {} correlations for {d} observed variables",
            candidate_row.len()
        )));
    }
    if !var_u.is_finite() || var_u <= 0.0 {
        return Err(Error::InvalidSpec(format!(
            "var_u must be > 0, got {var_u}"
        )));
    }
    for (i, &r) in candidate_row.iter().enumerate() {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::InvalidSpec(format!(
                "correlation with {} is {r}, outside [-1, 1]",
                observed.labels[i]
            )));
        }
    }

    let mut m = DMatrix::zeros(d + 1, d + 1);
    m.view_mut((0, 0), (d, d)).copy_from(&observed.entries);
    for i in 0..d {
        let cov = candidate_row[i] * (observed.entries[(i, i)] * var_u).sqrt();
        m[(i, d)] = cov;
        m[(d, i)] = cov;
    }
    m[(d, d)] = var_u;

    let eigs = m.symmetric_eigenvalues();
    let min = eigs.min();
    let max = eigs.max();
    Ok(ExtensionReport {
        valid: min >= -PSD_RTOL * max.max(1e-300),
        min_eigenvalue: min,
        max_eigenvalue: max,
    })
}
