//! Predicts cscK existence on one-point blowups of the shipped demos and
//! prints the gluing obstruction for the balanced configuration.
use std::path::PathBuf;

use kstab::blowup::{calibrate, gluing_obstruction, verdict, BlowupContext, DEFAULT_DELTA0};
use kstab::burns_simanca::{solve_profile, GridSpec};
use kstab::models::ModelSpec;
use kstab::stability::ClassifyOptions;

fn main() -> anyhow::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    let profile = solve_profile(3, 1e3, GridSpec::default())?;
    let cal = calibrate(&profile)?;
    let grid = [0.01, 0.02, 0.05, 0.1];
    assert!(grid.iter().all(|&d| d <= DEFAULT_DELTA0));
    for name in ["balanced_p1_cubed.json", "unstable_p1_cubed.json", "laplacian_destabilized.json"] {
        let model = ModelSpec::load(&data.join(name))?;
        let p = model.point.clone().expect("demo ships a point");
        let ctx = BlowupContext::new(&model, &p, 0.05)?.with_calibration(&cal);
        let r = verdict(&ctx, &grid, &ClassifyOptions::default())?;
        println!("{name:<28} {:?}: {}", r.verdict, r.reason);
        for c in &r.certificates {
            println!("    {:?} certificate, verified {}, c0 = {:.4}", c.case, c.verified, c.c0);
        }
        if name.starts_with("balanced") {
            let ob = gluing_obstruction(&ctx, profile.asymptotics.d1)?;
            println!(
                "    obstruction c1 = {:.6}, c2 = {:.6}, |F| = {:.3e}",
                ob.c1,
                ob.c2,
                ob.predicted_f.coeffs.norm()
            );
        }
    }
    Ok(())
}
