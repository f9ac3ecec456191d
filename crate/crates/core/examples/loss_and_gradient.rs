//! Logistic loss on a score vector, its gradient, and a finite-difference
//! check.

use asgbdt::dataset::{SparseDataset, SparseVec};
use asgbdt::loss::{gradient_vector, logistic_gradient, logistic_loss, probability, total_loss, ScoreVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rows = vec![
        (SparseVec::from_pairs([(0, 1.0)])?, 1),
        (SparseVec::from_pairs([(0, 2.0)])?, 0),
        (SparseVec::from_pairs([(0, 3.0)])?, 1),
    ];
    let ds = SparseDataset::new(
        rows.iter().map(|r| r.0.clone()).collect(),
        rows.iter().map(|r| r.1).collect(),
        vec![4, 1, 2],
        1,
    )?;
    let f = ScoreVector(vec![0.3, -0.2, 1.1]);

    println!("total loss = {:.6}", total_loss(&ds, &f)?);
    let g = gradient_vector(&ds, &f)?;
    for i in 0..ds.len() {
        println!("i={i} p={:.4} m*l'={:+.6}", probability(f.0[i]), g.values[i]);
    }

    let h = 1e-6;
    for (y, x) in [(1u8, -2.0), (0, 0.5), (1, 3.0)] {
        let fd = (logistic_loss(y, x + h) - logistic_loss(y, x - h)) / (2.0 * h);
        println!("y={y} F={x:+}: analytic {:+.8} numeric {:+.8}", logistic_gradient(y, x), fd);
    }
    Ok(())
}
