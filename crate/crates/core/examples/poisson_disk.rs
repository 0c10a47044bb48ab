//! Poisson on the unit disk against the paraboloid `(1 − r²)/4`.

use orlicz_dirichlet::dirichlet::{solve_dirichlet, weak_residual, WeakProblem};
use orlicz_dirichlet::geometry::{Domain, MatrixField};

fn main() -> orlicz_dirichlet::Result<()> {
    let domain = Domain::Disk { radius: 1.0 };
    for n in [33, 65, 129] {
        let grid = domain.grid(n)?;
        let mask = domain.mask(&grid)?;
        let problem = WeakProblem::new(MatrixField::identity(), vec![-1.0; grid.len()], mask.clone(), grid)?;
        let (u, report) = solve_dirichlet(&problem, 1e-10)?;
        let mut max_err: f64 = 0.0;
        for k in (0..grid.len()).filter(|&k| mask.is_interior(k)) {
            let (x, y) = grid.point(k);
            max_err = max_err.max((u[k] - 0.25 * (1.0 - x * x - y * y)).abs());
        }
        let res = weak_residual(&u, &problem, None)?;
        println!(
            "n={n:4} h={:.5} cg_iters={:4} max_err={max_err:.3e} weak_res={res:.2e} C={:.5}",
            grid.h, report.iterations, report.poincare_c
        );
    }
    Ok(())
}
