//! Drives the declarative experiment pipeline from the library: validate a
//! shipped file, run it into a temporary directory, and show the emitted
//! summary. The `causim` binary exposes the same steps as subcommands.
//!
//! Run with: cargo run --release -p causim --example experiment_files

use std::path::Path;

use causim::config::Profile;
use causim::runner::{explain_file, run_file, validate_file, Overrides};

fn main() -> causim::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("experiments/gamma_u_arms.toml");

    match validate_file(&path)? {
        Ok(_) => println!("validate: {} is clean", path.display()),
        Err(diags) => {
            for d in diags {
                eprintln!("validate: {d}");
            }
            return Ok(());
        }
    }

    let out = std::env::temp_dir().join(format!("causim_example_{}", std::process::id()));
    // the fast profile caps replications at 500 to keep this demo short
    let artifacts = run_file(
        &path,
        &Overrides {
            out: Some(out.clone()),
            profile: Some(Profile::Fast),
            threads: None,
            seed: None,
        },
    )?;
    println!("\n{}", artifacts.summary);
    println!("artifacts written to {}:", artifacts.out_dir.display());
    for (name, _) in &artifacts.files {
        println!("  {name}");
    }

    println!("\nexplain output for the same file:\n");
    print!("{}", explain_file(&path, None)?);

    std::fs::remove_dir_all(&out).ok();
    Ok(())
}
