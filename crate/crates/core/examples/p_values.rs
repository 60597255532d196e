//! Two-sided p-values of Pearson correlations from the Student t
//! distribution, down to very small values.

use transit_equity::stats::{p_value, pearson, regularized_incomplete_beta};

fn main() -> transit_equity::Result<()> {
    let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let ys = [2.1, 3.9, 6.2, 7.8, 9.7, 12.5, 13.1, 16.4];
    let r = pearson(&xs, &ys)?;
    println!("r = {r:.5}, p = {:.3e}", p_value(r, xs.len())?);

    println!("{:>6} {:>12} {:>12} {:>12}", "r", "n=10", "n=30", "n=300");
    for r in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99] {
        println!(
            "{r:>6} {:>12.3e} {:>12.3e} {:>12.3e}",
            p_value(r, 10)?,
            p_value(r, 30)?,
            p_value(r, 300)?
        );
    }
    println!("I_0.3(2, 5) = {:.6}", regularized_incomplete_beta(2.0, 5.0, 0.3)?);
    Ok(())
}
