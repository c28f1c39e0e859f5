//! Ready-made specifications for the two worked studies.

use crate::mse_lab::{MeanFunctionKind, MeanFunctionSpec};
use crate::scm::ScmSpec;

/// Bias-amplification control arm: beta_a = 0.2, beta_x = -0.05,
/// beta_u = 0.3, gamma_x = 0.6, gamma_u = 0.3, unit X/U variances, zero
/// means and intercepts, with error variances chosen so the marginal
/// treatment and outcome variances are both exactly 1.
pub fn bias_amp_control() -> ScmSpec {
    ScmSpec {
        beta_a: 0.2,
        beta_u: 0.3,
        beta_x: vec![-0.05],
        gamma_u: 0.3,
        gamma_x: vec![0.6],
        alpha_y: 0.0,
        alpha_a: 0.0,
        mu_u: 0.0,
        mu_x: vec![0.0],
        var_u: 1.0,
        var_x: vec![1.0],
        var_eps_a: 0.55,   // 1 - 0.6^2 - 0.3^2
        var_eps_y: 0.8435, // 1 - quadratic form of the outcome equation
    }
}

/// Sum-of-sigmoids generator with the original alphas (3,3) and (3,-3)
/// over two standard-normal covariates. `var_eps` starts at 0; apply an
/// SNR design to set it.
pub fn sigmoid_sum_original() -> MeanFunctionSpec {
    MeanFunctionSpec {
        kind: MeanFunctionKind::SigmoidSum,
        p: 2,
        alphas: vec![vec![3.0, 3.0], vec![3.0, -3.0]],
        var_eps: 0.0,
    }
}

/// Product-of-radials generator over `p` standard-normal covariates.
pub fn radial_product(p: usize) -> MeanFunctionSpec {
    MeanFunctionSpec {
        kind: MeanFunctionKind::RadialProduct,
        p,
        alphas: Vec::new(),
        var_eps: 0.0,
    }
}
