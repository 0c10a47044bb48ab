//! Luxembourg and dual Orlicz norms of a few fields, with the Hölder defect and the
//! square-composition bracket.

use orlicz_dirichlet::orlicz::{holder_defect, luxembourg, orlicz_norm_dual, square_composition_check, NormalizedMeasure};
use orlicz_dirichlet::young::{conjugate, BumpFamilyParams, ConjugateScan, YoungFunction};

fn main() -> orlicz_dirichlet::Result<()> {
    let mu = NormalizedMeasure::uniform(200);
    let f: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.07).sin() * 3.0).collect();
    let g: Vec<f64> = (0..200).map(|i| 1.0 + ((i as f64) * 0.11).cos()).collect();
    let thetas = [
        YoungFunction::power(2.0)?,
        YoungFunction::power(4.0)?,
        YoungFunction::bump(BumpFamilyParams::new(1.0)?),
        YoungFunction::bump(BumpFamilyParams::new(2.0)?),
    ];
    println!("{:<28} {:>12} {:>12} {:>8} {:>12}", "theta", "luxembourg", "orlicz", "ratio", "holder");
    for t in &thetas {
        let l = luxembourg(&f, t, &mu)?;
        let o = orlicz_norm_dual(&f, t, &mu)?;
        let h = holder_defect(&f, &g, t, &mu)?;
        println!("{:<28} {l:>12.6} {o:>12.6} {:>8.4} {h:>12.4e}", t.name(), o / l);
    }
    // analytic against numerical conjugate of t^3 at a few points
    let cube = YoungFunction::power(3.0)?;
    let num = conjugate(&cube, ConjugateScan::default())?;
    let exact = cube.dual();
    for s in [0.5, 1.0, 4.0] {
        println!("conjugate of t^3 at {s}: numerical {:.8}, closed form {:.8}", num.eval(s), exact.eval(s));
    }
    let (lo, mid, hi) = square_composition_check(&f, &YoungFunction::bump(BumpFamilyParams::new(2.0)?), &mu)?;
    println!("square composition: {lo:.6} <= {mid:.6} <= {hi:.6}");
    Ok(())
}
