//! Minimum-cost assignment on a rectangular matrix with forbidden pairs.
//!
//!     cargo run --example hungarian_assignment

use pot4d::track::{assignment_cost, hungarian};

fn main() -> pot4d::Result<()> {
    let inf = f64::INFINITY;
    let cost = vec![
        vec![4.0, 1.0, 3.0, 7.0],
        vec![2.0, 0.0, 5.0, inf],
        vec![3.0, 2.0, 2.0, 1.0],
    ];
    let pairs = hungarian(&cost)?;
    println!("pairs {pairs:?}, cost {}", assignment_cost(&cost, &pairs));

    // a row whose only finite entries are taken stays unmatched
    let cost = vec![vec![1.0, inf], vec![0.5, inf]];
    println!("pairs {:?}", hungarian(&cost)?);
    Ok(())
}
