//! Inner product of two lifted fields vanishing at the blown-up point, and the
//! scalar-curvature decay of the glued metric.
use std::path::PathBuf;

use kstab::algebra::AlgebraElement;
use kstab::blowup::{calibrate, inner_product_blowup, BlowupContext};
use kstab::burns_simanca::{curvature_decay, solve_profile, GridSpec};
use kstab::models::ModelSpec;
use nalgebra::DVector;

fn main() -> anyhow::Result<()> {
    let model = ModelSpec::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/p1xp2_torus.json"))?;
    let p = model.point.clone().expect("demo ships a point");
    let profile = solve_profile(model.total_dim(), 1e3, GridSpec::default())?;
    let cal = calibrate(&profile)?;
    let ctx = BlowupContext::new(&model, &p, 0.1)?.with_calibration(&cal);
    let v = AlgebraElement(DVector::from_vec(vec![1.0, 0.0, 0.0]));
    let w = AlgebraElement(DVector::from_vec(vec![0.0, 0.0, 1.0]));
    println!("{:>6} {:>16}", "eps", "<v, w>");
    for eps in [0.1, 0.05, 0.025] {
        let r = inner_product_blowup(&ctx.at_eps(eps)?, &profile, &v, &w)?;
        println!("{eps:>6} {:>16.9e}", r.value);
    }
    let p3 = ModelSpec::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/p3_torus.json"))?;
    let q = p3.point.clone().expect("demo ships a point");
    let decay = curvature_decay(&p3, &q, &[0.1, 0.05, 0.02, 0.01], &solve_profile(3, 1e3, GridSpec::default())?)?;
    for s in &decay.samples {
        println!("eps {:<5} annulus sup r^2|s_eps - s| = {:.4e}", s.eps, s.annulus_sup);
    }
    println!("decay slope {:.3}, monotone {}", decay.slope, decay.monotone);
    Ok(())
}
