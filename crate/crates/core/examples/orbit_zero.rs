//! Searches for zeros of the perturbed moment map on an orbit and checks that
//! solvability does not depend on the perturbation parameter.
use std::path::PathBuf;

use kstab::models::ModelSpec;
use kstab::stability::{alldelta_check, find_orbit_zero, ClassifyOptions, Subgroup, ZeroOptions};

fn main() -> anyhow::Result<()> {
    let data = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data");
    for name in ["balanced_p1_cubed.json", "unstable_p1_cubed.json"] {
        let model = ModelSpec::load(&data.join(name))?;
        let p = model.point.clone().expect("demo ships a point");
        let search = find_orbit_zero(&model, &p, 0.02, Subgroup::Full, &ZeroOptions::default())?;
        match &search.solution {
            Some(z) => println!("{name}: zero found, residual {:.2e} after {} iterations", z.residual, z.iterations),
            None => {
                println!("{name}: no zero, best residual {:.3e} over {} starts", search.best_residual, search.starts)
            }
        }
        let grid = [0.01, 0.02, 0.05, 0.1];
        let r = alldelta_check(&model, &p, &grid, 0.25, &ClassifyOptions::default())?;
        let flags: Vec<bool> = r.results.iter().map(|d| d.solvable).collect();
        println!("    solvable over grid {flags:?}; constant {}, weight condition {}", r.constant, r.weight_condition);
    }
    Ok(())
}
