//! Futaki invariant of a lifted field on the blowup of P^3 at a torus-fixed
//! point: exact expansion, truncation and the leading eps-orders.
use kstab::algebra::Factor;
use kstab::blowup::{calibrate, futaki_blowup, BlowupContext};
use kstab::burns_simanca::{solve_profile, GridSpec};
use kstab::models::builders::diagonal_torus;
use kstab::models::OrbitPoint;

fn main() -> anyhow::Result<()> {
    let model = diagonal_torus(vec![Factor { dim: 3, scale: 1.0 }])?;
    let p = OrbitPoint::real(&[&[1.0, 0.0, 0.0, 0.0]])?;
    let cal = calibrate(&solve_profile(3, 1e3, GridSpec::default())?)?;
    let ctx = BlowupContext::new(&model, &p, 0.1)?.with_calibration(&cal);
    let xi = kstab::algebra::AlgebraElement(nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]));
    println!("h(p) = {:+.6}, laplacian(p) = {:+.6}", ctx.h_at_p(&xi), ctx.laplacian_at_p(&xi));
    println!("{:>6} {:>16} {:>16}", "eps", "Fut", "truncation");
    for eps in [0.2, 0.1, 0.05] {
        let ex = futaki_blowup(&ctx.at_eps(eps)?, &xi, None)?;
        println!("{eps:>6} {:>16.9e} {:>16.9e}", ex.fut_blowup, ex.truncation);
    }
    Ok(())
}
