//! Holding moments constant constrains the parameter space: feasible
//! intervals for gamma_u under different held moments, and consistency
//! checks for extending an observed covariance with an unmeasured
//! confounder row.
//!
//! Run with: cargo run --release -p causim --example feasible_ranges

use causim::interventions::{extend_correlation_matrix, HeldMoment};
use causim::{build_covariance, direct_effect, feasible_range};
use nalgebra::DMatrix;

fn main() -> causim::Result<()> {
    let control = causim::presets::bias_amp_control();

    for hold in [
        vec![HeldMoment::VarA],
        vec![HeldMoment::VarY],
        vec![HeldMoment::VarA, HeldMoment::VarY],
    ] {
        let names: Vec<&str> = hold.iter().map(|h| h.name()).collect();
        let range = feasible_range(&control, "gamma_u", &hold)?;
        println!(
            "hold {{{}}}: gamma_u in ({:.6}, {:.6})",
            names.join(", "),
            range.lower,
            range.upper
        );
        for b in &range.binding_constraints {
            println!("  binding: {b}");
        }
    }

    println!("\nprobing the boundary (hold var_a):");
    for value in [0.79, 0.81] {
        match direct_effect(&control, "gamma_u", value, &[HeldMoment::VarA]) {
            Ok(plan) => println!(
                "  gamma_u = {value}: feasible, var_eps_a = {:.6}",
                plan.treated.var_eps_a
            ),
            Err(e) => println!("  gamma_u = {value}: {e}"),
        }
    }

    // extending an observed (Y, A, X) covariance with a U row
    let cov = build_covariance(&control)?;
    let observed = causim::CovarianceMatrix::new(
        cov.labels[..3].to_vec(),
        cov.entries.view((0, 0), (3, 3)).into_owned(),
    )?;
    println!("\ncorrelation-matrix extension over observed (Y, A, X):");
    for row in [[0.0, 0.0, 0.0], [0.5, 0.3, 0.0], [0.9, 0.9, 0.9]] {
        let report = extend_correlation_matrix(&observed, &row, 1.0)?;
        println!(
            "  U-row {:?}: valid = {}, min eigenvalue = {:+.4}",
            row, report.valid, report.min_eigenvalue
        );
    }
    let identity = causim::CovarianceMatrix::new(
        vec!["Y".into(), "A".into(), "X1".into()],
        DMatrix::identity(3, 3),
    )?;
    let report = extend_correlation_matrix(&identity, &[0.9, 0.9, 0.9], 1.0)?;
    println!(
        "  identity block with U-row [0.9, 0.9, 0.9]: valid = {} (min eig {:+.4})",
        report.valid, report.min_eigenvalue
    );
    Ok(())
}
