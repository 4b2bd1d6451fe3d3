//! Solves the scalar-flat radial profile in several dimensions and prints its
//! far-field coefficients.
use kstab::burns_simanca::{solve_profile, GridSpec};

fn main() -> anyhow::Result<()> {
    println!("{:>2} {:>14} {:>14} {:>12} {:>10}", "m", "d0", "d1", "fit", "max |s|");
    for m in 3..=5 {
        let profile = solve_profile(m, 1e3, GridSpec::default())?;
        let h = profile.header();
        println!("{m:>2} {:>14.9} {:>14.9} {:>12.2e} {:>10.2e}", h.d0, h.d1, h.fit_residual, h.max_scalar_residual);
    }
    let p3 = solve_profile(3, 1e3, GridSpec { r_min: 0.1, samples: 40 })?;
    for line in p3.to_csv().lines().step_by(8) {
        println!("{line}");
    }
    Ok(())
}
