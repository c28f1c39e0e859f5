//! Closed-form population quantities of the bias-amplification model:
//! joint covariance, marginal moments, probability limits of both OLS
//! estimators, the bias-amplification ratio, and asymptotic variances.
//!
//! Run with: cargo run --release -p causim --example closed_form_plims

use causim::{
    asymptotic_variance, bias_amplification_ratio, build_covariance, marginal_moments,
    plim_conditional, plim_naive, Conditioning,
};

fn main() -> causim::Result<()> {
    let control = causim::presets::bias_amp_control();

    println!(
        "control spec: gamma_u = {}, gamma_x = {:?}",
        control.gamma_u, control.gamma_x
    );
    let mm = marginal_moments(&control)?;
    println!(
        "marginal variances: var_a = {}, var_y = {}",
        mm.var_a, mm.var_y
    );

    let cov = build_covariance(&control)?;
    println!("\npopulation covariance over {:?}:", cov.labels);
    for i in 0..cov.dim() {
        let row: Vec<String> = (0..cov.dim())
            .map(|j| format!("{:+.4}", cov.entries[(i, j)]))
            .collect();
        println!("  {}", row.join("  "));
    }

    println!("\nprobability limits (control):");
    println!(
        "  conditional beta_hat_a(X):  {:.6}",
        plim_conditional(&control)?
    );
    println!("  naive beta_hat_a(empty):    {:.6}", plim_naive(&control)?);
    println!(
        "  bias amplification ratio:   {:.6}  (> 1 means X amplifies)",
        bias_amplification_ratio(&control)?
    );

    println!("\nasymptotic variances of sqrt(n)(beta_hat - beta_a):");
    println!(
        "  conditional: {:.6}",
        asymptotic_variance(&control, Conditioning::OnX)?
    );
    println!(
        "  naive:       {:.6}",
        asymptotic_variance(&control, Conditioning::Naive)?
    );

    // stronger unmeasured confounding with the treatment variance held at 1
    let direct = causim::direct_effect(
        &control,
        "gamma_u",
        0.55,
        &[
            causim::interventions::HeldMoment::VarA,
            causim::interventions::HeldMoment::VarY,
        ],
    )?;
    println!("\ndirect effect gamma_u 0.3 -> 0.55 (variances held):");
    println!(
        "  conditional plim moves {:.4} -> {:.4}",
        plim_conditional(&control)?,
        plim_conditional(&direct.treated)?
    );
    println!(
        "  absorbed error variances: var_eps_a = {:.4}, var_eps_y = {:.4}",
        direct.treated.var_eps_a, direct.treated.var_eps_y
    );
    Ok(())
}
