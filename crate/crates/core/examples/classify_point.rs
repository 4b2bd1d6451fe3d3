//! Classifies orbit points of a product of projective spaces and prints the
//! weights along a few one-parameter subgroups.
use std::path::PathBuf;

use kstab::models::ModelSpec;
use kstab::stability::{classify, weight, ClassifyOptions};

fn load(name: &str) -> anyhow::Result<ModelSpec> {
    Ok(ModelSpec::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name))?)
}

fn main() -> anyhow::Result<()> {
    for name in ["balanced_p1_cubed.json", "unstable_p1_cubed.json", "p1xp2_torus.json"] {
        let model = load(name)?;
        let p = model.point.clone().expect("demo ships a point");
        let v = classify(&model, &p, &ClassifyOptions::default())?;
        println!("{name:<28} {:?} (stabilizer dim {}, heuristic {})", v.class, v.stabilizer_dim, v.heuristic);
        for k in 0..model.algebra.dim().min(3) {
            let mut xi = nalgebra::DVector::zeros(model.algebra.dim());
            xi[k] = 1.0;
            let w = weight(&model, &p, &kstab::algebra::AlgebraElement(xi))?;
            println!("    generator {k}: w_mu = {:+.6}, w_nu = {:+.6}", w.w_mu, w.w_nu);
        }
    }
    Ok(())
}
