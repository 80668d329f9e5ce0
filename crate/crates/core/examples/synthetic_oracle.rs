//! Sampled FAD converging to the closed form, and the full oracle suite.

use emofad::synth::{closed_form_fad, convergence_probe, run_oracle_suite, GaussianSpec};
use nalgebra::DVector;

fn main() -> emofad::Result<()> {
    let a = GaussianSpec::diagonal(DVector::zeros(8), DVector::from_fn(8, |i, _| (i + 1) as f64), 1)?;
    let b = GaussianSpec::diagonal(
        DVector::from_element(8, 1.0),
        DVector::from_fn(8, |i, _| (8 - i) as f64),
        2,
    )?;
    println!("closed form {:.4}", closed_form_fad(&a, &b)?);
    println!("{:>8} {:>10} {:>10} {:>9}", "n", "sampled", "exact", "rel err");
    for row in convergence_probe(&a, &b, &[100, 1_000, 10_000, 100_000])? {
        println!(
            "{:>8} {:>10.4} {:>10.4} {:>9.4}",
            row.n, row.sampled, row.closed_form, row.relative_error
        );
    }

    for check in run_oracle_suite(42) {
        println!(
            "[{}] {}: {}",
            if check.passed { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    Ok(())
}
