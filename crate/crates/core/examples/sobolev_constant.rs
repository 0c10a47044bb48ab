//! Lower bounds for the Orlicz-Sobolev constant from the versioned test family, compared with
//! the Poincaré eigenvalue for the quadratic case, then the necessity chain on a solved instance.

use orlicz_dirichlet::dirichlet::{poincare_constant, solve_dirichlet, WeakProblem};
use orlicz_dirichlet::geometry::{Domain, GProfile, MatrixField};
use orlicz_dirichlet::sobolev::{best_constant_search, necessity_chain_check, test_family, Setting};
use orlicz_dirichlet::young::{BumpFamilyParams, YoungFunction};

fn main() -> orlicz_dirichlet::Result<()> {
    let sq = Domain::Square { side: 1.0 };
    let g = sq.grid(65)?;
    let m = sq.mask(&g)?;
    let s = Setting::new(MatrixField::identity(), m.clone(), g)?;
    let quad = YoungFunction::power(2.0)?;
    let c = poincare_constant(&s.a, &s.mask, &s.grid)?.constant;
    for budget in [1, 4, 8, 12, 16] {
        let e = best_constant_search(&quad, &s, budget)?;
        println!("budget {budget:2}: lower bound {:.5} via {:<12} (sqrt C_P = {:.5})", e.lower_bound, e.maximizer_id, c.sqrt());
    }
    let bump = YoungFunction::bump(BumpFamilyParams::new(2.0)?);
    for (name, a) in [("identity", MatrixField::identity()), ("diag(1,x^2)", MatrixField::diag_g(GProfile::Power(1.0)))] {
        let s = Setting::new(a, m.clone(), g)?;
        let e = best_constant_search(&bump, &s, 12)?;
        println!("{name}: bump(2) lower bound {:.4} ({})", e.lower_bound, e.family);
    }
    let d = Domain::Disk { radius: 1.0 };
    let g = d.grid(65)?;
    let mask = d.mask(&g)?;
    let p = WeakProblem::new(MatrixField::identity(), vec![1.0; g.len()], mask, g)?;
    let (u, _) = solve_dirichlet(&p, 1e-10)?;
    let w = test_family(&p.mask, &p.grid).remove(0).1;
    let chain = necessity_chain_check(&u, &w, &p, Some(&bump.dual()))?;
    for r in &chain.rows {
        println!("{:<26} lhs {:.5e} rhs {:.5e} slack {:.3e}", r.name, r.lhs, r.rhs, r.slack);
    }
    println!("tol_disc {:.3e}, sup|u| / |f| = {:?}", chain.tol_disc, chain.sup_ratio);
    Ok(())
}
