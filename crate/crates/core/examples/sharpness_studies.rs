//! Cutoff refinement studies for the three degenerate examples, sweeping each exponent across
//! its threshold.

use orlicz_dirichlet::counterexamples::{
    degenerate_u_and_f, finite_vanishing_report, infinite_vanishing_report, laplacian_example, membership_report_w12a, CutoffChi,
    VanishingProfile,
};

fn main() -> orlicz_dirichlet::Result<()> {
    println!("Laplacian, alpha = 1/4 (threshold q = 1)");
    for q in [0.6, 0.8, 1.0, 1.2, 1.4] {
        let r = laplacian_example(0.25, q, 100)?;
        println!("  q={q:<4} {:?} (expected {:?}), slope {:.3}", r.study.verdict, r.expected, r.study.slope);
    }
    println!("finite vanishing g = x^m, m = 1 (threshold q = {})", (1.0 + 2.0) / 2.0);
    for q in [0.75, 1.0, 1.25, 1.75, 2.0] {
        let r = finite_vanishing_report(1.0, q, 0.3, 40)?;
        println!("  q={q:<4} {:?} (expected {:?}), I(last) {:.4e}", r.study.verdict, r.expected, r.study.last());
    }
    println!("infinite vanishing, alpha = 1/2 (threshold M = 6)");
    for m in [4.0, 5.0, 7.0, 8.0, 10.0] {
        let r = infinite_vanishing_report(0.5, m, 0.3, 40)?;
        println!("  M={m:<4} {:?} (expected {:?})", r.study.verdict, r.expected);
    }
    let profile = VanishingProfile::finite(1.0)?;
    let mem = membership_report_w12a(profile, CutoffChi::default(), 0.3, 40, 1.0)?;
    println!("weighted energy of u (m = 1): {:.5} ({:?}), reduced {:.5}", mem.value, mem.study.verdict, mem.reduced);
    let c = degenerate_u_and_f(profile, CutoffChi::default());
    for j in [5, 10, 20, 40] {
        let x = (-(j as f64)).exp();
        println!("  u(x, psi(x)) at x = e^-{j}: {:.3}", c.on_curve(x)?);
    }
    Ok(())
}
