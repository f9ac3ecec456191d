//! Fit one regression tree to a weighted target and look at it as a
//! leaf-averaging projection.

use asgbdt::dataset::FeatureBins;
use asgbdt::loss::ScoreVector;
use asgbdt::sampler::{draw, weighted_target, SamplingPlan};
use asgbdt::synth;
use asgbdt::tree::{fit, leaf_diameter, leaf_partition_of, project, zeta_estimate, TreeParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = synth::highdiv(400, 1);
    let bins = FeatureBins::build(&ds, 64)?;
    let scores = ScoreVector::constant(ds.len(), 0.0);

    let d = draw(&SamplingPlan::uniform(0.5)?, &ds, 9, 0);
    let target = weighted_target(&d, &ds, &scores)?;
    println!("draw keeps {} of {} samples", target.included.len(), ds.len());

    for max_leaves in [2, 8, 400] {
        let params = TreeParams { max_leaves, ..TreeParams::default() };
        let tree = fit(&bins, &target, &params)?;
        // positions follow target.included
        let p = leaf_partition_of(&tree, &ds, &target.included);
        let g: Vec<f64> = target.included.iter().map(|&i| target.per_sample(i as usize)).collect();
        let w: Vec<f64> = target.included.iter().map(|&i| target.weights[i as usize]).collect();
        let ag = project(&p, &g, &w)?;
        let twice = project(&p, &ag, &w)?;
        let idem = ag.iter().zip(&twice).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "max_leaves={max_leaves:3}: leaves={:3} zeta={:3} delta={:.3} |A(Ag)-Ag|={idem:.1e}",
            tree.n_leaves(),
            zeta_estimate(&p, &g, &w, 1e-9)?,
            leaf_diameter(&p, &ds),
        );
    }

    let tree = fit(&bins, &target, &TreeParams { max_leaves: 4, ..TreeParams::default() })?;
    print!("{}", tree.to_text());
    Ok(())
}
