//! How many answers a fixed-redundancy design would need, and what incremental inference saves.

use truthinf::metrics::{redundancy_saving, theoretical_redundancy, MetricsError};

fn main() -> Result<(), MetricsError> {
    println!("{:>7} {:>3} {:>3} {:>10}", "N", "L", "p", "r");
    for (n, l, p) in [(1_000, 5, 3), (1_000, 6, 4), (27_700, 6, 4)] {
        println!(
            "{n:>7} {l:>3} {p:>3} {:>10}",
            theoretical_redundancy(n, l, p)?
        );
    }

    // With perfectly reliable, unanimous players every task needs exactly p answers.
    for (l, p) in [(5, 3), (6, 4)] {
        let r = theoretical_redundancy(1_000, l, p)?;
        let change = redundancy_saving(1_000 * p, r)?;
        println!(
            "L={l} p={p}: at best {} answers, saving {:.1}% of {r}",
            1_000 * p,
            -change
        );
    }
    Ok(())
}
