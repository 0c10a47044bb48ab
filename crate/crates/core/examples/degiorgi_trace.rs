//! Level-set trace of a Poisson solution on the radius-2 disk.

use orlicz_dirichlet::degiorgi::{degiorgi_study, DeGiorgiOptions};
use orlicz_dirichlet::dirichlet::{solve_dirichlet, WeakProblem};
use orlicz_dirichlet::geometry::{Domain, GProfile, MatrixField};
use orlicz_dirichlet::young::{BumpFamilyParams, YoungFunction};

fn main() -> orlicz_dirichlet::Result<()> {
    let domain = Domain::Disk { radius: 2.0 };
    let grid = domain.grid(65)?;
    let mask = domain.mask(&grid)?;
    let phi = YoungFunction::bump(BumpFamilyParams::new(2.0)?);
    for a in [MatrixField::identity(), MatrixField::diag_g(GProfile::Power(2.0))] {
        let problem = WeakProblem::new(a, vec![-1.0; grid.len()], mask.clone(), grid)?;
        let (u, _) = solve_dirichlet(&problem, 1e-10)?;
        let rep = degiorgi_study(&u, &problem, &phi, DeGiorgiOptions::default())?;
        println!(
            "{}: sup u = {:.4}, defect = {:.2e} (tol {:.2e}), fitted C = {:.4e}",
            problem.a.name(),
            rep.u_sup,
            rep.caccioppoli_defect,
            rep.tol_disc,
            rep.recursion.c
        );
        println!("  k       C_k          U_k     majorant");
        for r in rep.rows.iter().step_by(4) {
            println!("  {:2} {:9.5} {:12.4e} {:12.4e}", r.k, r.c_k, r.u_k, r.majorant_k);
        }
        println!(
            "  adaptive tau = {}, U_0 = {:.3e}, majorant {:?} after {:?} steps",
            rep.adaptive_tau, rep.adaptive_u0, rep.adaptive_majorant.outcome, rep.adaptive_majorant.steps
        );
    }
    Ok(())
}
