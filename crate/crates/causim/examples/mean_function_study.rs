//! Miniature of the mean-function comparison: the original design (radial
//! p = 10 vs sigmoid, SNR held at 4 by varying the noise) against the
//! fixed-signal design (both arms p = 2, equal signal and noise). With 20
//! replications this runs in well under a minute; the shipped experiment
//! files run the full 200.
//!
//! Run with: cargo run --release -p causim --example mean_function_study

use causim::mse_lab::{apply_snr_design, run_study, NetConfig, SnrDesign, SnrMode};

fn main() -> causim::Result<()> {
    let net = NetConfig::reference_protocol(3);
    let vary_noise = SnrDesign {
        target_snr: 4.0,
        mode: SnrMode::VaryNoise,
        target_signal_variance: None,
    };

    // original design
    let sigmoid = apply_snr_design(
        &causim::presets::sigmoid_sum_original(),
        &vary_noise,
        400_000,
        11,
    )?;
    let radial10 = apply_snr_design(
        &causim::presets::radial_product(10),
        &vary_noise,
        400_000,
        11,
    )?;
    println!(
        "original design noise: sigmoid sigma_eps = {:.4}, radial sigma_eps = {:.3e}",
        sigmoid.var_eps.sqrt(),
        radial10.var_eps.sqrt()
    );
    let arms = vec![
        ("sigmoid".to_string(), sigmoid),
        ("radial".to_string(), radial10),
    ];
    let study = run_study(&arms, &net, 100, 10_000, 20, 99)?;
    println!(
        "\noriginal design, median relative MSE over {} replications:",
        study.replications
    );
    for arm in &study.arms {
        println!(
            "  {:<8} {:>12.4e}   (median modified: {:+.4e})",
            arm.label, arm.median_relative_mse, arm.median_modified_mse
        );
    }
    let ratio = study.arm("radial").unwrap().median_relative_mse
        / study.arm("sigmoid").unwrap().median_relative_mse;
    println!("  radial/sigmoid median ratio: {ratio:.1}");

    // fixed-signal design: rescale the sigmoid so its signal matches the
    // radial p = 2 signal, then give both arms the same noise
    let radial2_signal = 2.1108579925487063e-3;
    let fix = SnrDesign {
        target_snr: 4.0,
        mode: SnrMode::FixSignal,
        target_signal_variance: Some(radial2_signal),
    };
    let sigmoid_fixed =
        apply_snr_design(&causim::presets::sigmoid_sum_original(), &fix, 400_000, 11)?;
    let mut radial2 = causim::presets::radial_product(2);
    radial2.var_eps = radial2_signal / 4.0;
    println!(
        "\nfixed-signal design: alphas rescaled to {:?}, both sigma_eps = {:.4}",
        sigmoid_fixed.alphas[0],
        radial2.var_eps.sqrt()
    );
    let arms = vec![
        ("sigmoid".to_string(), sigmoid_fixed),
        ("radial".to_string(), radial2),
    ];
    let study = run_study(&arms, &net, 100, 10_000, 20, 99)?;
    println!("fixed-signal design, median relative MSE:");
    for arm in &study.arms {
        println!("  {:<8} {:>12.4}", arm.label, arm.median_relative_mse);
    }
    let ratio = study.arm("radial").unwrap().median_relative_mse
        / study.arm("sigmoid").unwrap().median_relative_mse;
    println!("  radial/sigmoid median ratio: {ratio:.1} (orders of magnitude smaller than the original design)");
    Ok(())
}
