//! Glues the scalar-flat profile into a product of projective spaces and checks
//! that the volume lost on the gluing ball equals eps^{2m}
//! (the volume of the corner cut from the moment polytope).
use kstab::algebra::Factor;
use kstab::burns_simanca::{BlowupChart, BurnsSimanca, GluedPotential};
use kstab::models::builders::diagonal_torus;
use kstab::models::OrbitPoint;

fn main() -> anyhow::Result<()> {
    let model = diagonal_torus(vec![Factor { dim: 1, scale: 1.0 }, Factor { dim: 2, scale: 2.5 }])?;
    let p = OrbitPoint::real(&[&[1.0, 0.0], &[0.0, 0.0, 1.0]])?;
    let m = model.total_dim();
    let profile = BurnsSimanca::new(m)?;
    println!("{:>8} {:>16} {:>12}", "eps", "volume deficit", "/ eps^2m");
    for eps in [0.08, 0.04, 0.02] {
        let glued = GluedPotential::new(BlowupChart::new(&model, &p)?, eps, &profile)?;
        let d = glued.volume_deficit()?;
        println!("{eps:>8} {d:>16.6e} {:>12.6}", d / eps.powi(2 * m as i32));
    }
    Ok(())
}
