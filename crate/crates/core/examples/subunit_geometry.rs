//! Subunit distances and balls for Euclidean, degenerate and Grushin fields.

use orlicz_dirichlet::geometry::{subunit_ball, subunit_distance, Domain, Grid, MatrixField, Sym2};

/// Out-up-back detours `x ≤ a`: time `2a + y/a`, minimized at `a = √(y/2)`.
fn detour_oracle(y: f64) -> f64 {
    (8.0 * y).sqrt()
}

fn main() -> orlicz_dirichlet::Result<()> {
    let domain = Domain::Disk { radius: 1.0 };
    for n in [65, 129, 257] {
        let grid: Grid = domain.grid(n)?;
        let e = subunit_distance(&MatrixField::identity(), (0.0, 0.0), (0.75, 0.0), &grid, None)?;
        let d = subunit_distance(&MatrixField::constant(Sym2::diag(1.0, 0.0)), (0.0, 0.0), (0.0, 0.5), &grid, None)?;
        let g = subunit_distance(&MatrixField::grushin(), (0.0, 0.0), (0.0, 0.25), &grid, None)?;
        println!(
            "n={n:3}  euclid {e:.5} (exact 0.75)  diag(1,0) {d}  grushin {g:.5} (detour {:.5}, geodesic {:.5})",
            detour_oracle(0.25),
            (2.0 * std::f64::consts::PI * 0.25).sqrt()
        );
    }
    let grid = domain.grid(129)?;
    let ball = subunit_ball(&MatrixField::grushin(), (0.0, 0.0), 0.5, &grid)?;
    let centre = grid.nearest(0.0, 0.0).unwrap();
    let (ex, ey) = ball.extents_from(&grid, centre);
    println!("grushin ball r=0.5: x-extent {} nodes, y-extent {} nodes", ex, ey);
    Ok(())
}
