//! Eve's effective measurement in the signal basis and the conditional
//! announcement probabilities it produces.

use pmqkd::keyrate::{mismatch_povm, model_povm, Announcement, SignalBasis};

fn main() -> pmqkd::Result<()> {
    let (eta, mu) = (0.01, 0.1);
    let povm = model_povm(&mismatch_povm(eta, mu, 0.99, 0.01)?, 1e-6)?;
    let basis = SignalBasis::new(mu)?;

    for g in Announcement::ALL {
        let e = povm.element(g);
        let eig: Vec<String> = e.eigenvalues()?.iter().map(|x| format!("{x:.3e}")).collect();
        println!("{g:?}  eigenvalues [{}]", eig.join(", "));
        for i in 0..4 {
            let row: Vec<String> = (0..4)
                .map(|j| {
                    let z = e.matrix()[(i, j)];
                    format!("{:+.4e}{:+.1e}i", z.re, z.im)
                })
                .collect();
            println!("    {}", row.join("  "));
        }
    }
    println!("completeness defect {:.1e}", povm.completeness_defect());
    for (a, b) in [(0, 0), (1, 1), (0, 1), (1, 0)] {
        let p = povm.outcome_probabilities(&basis, a, b);
        println!("a={a} b={b}: + {:.4e}  - {:.4e}  ? {:.4e}  d {:.4e}", p[0], p[1], p[2], p[3]);
    }
    println!("{}", serde_json::to_string_pretty(&povm.dump()?)?);
    Ok(())
}
