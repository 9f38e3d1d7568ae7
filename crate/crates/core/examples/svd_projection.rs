//! Project two feature sets to 2-D, compare class-centroid separation, and
//! write scatter plots.
//!
//! cargo run --example svd_projection [output-dir]

use ilc::features::FeatureMatrix;
use ilc::projection::{centroid_distance, emit_scatter, separation_change, svd_project, ProjectionMode};
use ilc::rng;
use ilc::Label;

fn cloud(gap: f64, dims: usize, seed: u64) -> Result<FeatureMatrix, ilc::Error> {
    let mut prng = rng::seeded(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..300 {
        let deceptive = i % 4 == 0;
        let row = (0..dims)
            .map(|j| rng::uniform(&mut prng, -1.0, 1.0) + if deceptive && j < 2 { gap } else { 0.0 })
            .collect();
        rows.push(row);
        labels.push(if deceptive { Label::Deceptive } else { Label::NonDeceptive });
    }
    FeatureMatrix::from_rows(rows, labels)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("ilc_projection"));
    std::fs::create_dir_all(&out)?;
    let base = svd_project(&cloud(1.0, 8, 1)?, ProjectionMode::Centered)?;
    let aug = svd_project(&cloud(1.5, 16, 1)?, ProjectionMode::Centered)?;
    let (d0, d1) = (centroid_distance(&base)?, centroid_distance(&aug)?);
    println!(
        "baseline distance {d0:.4} (captures {:.1}% of variance)",
        100.0 * base.captured_fraction()
    );
    println!(
        "augmented distance {d1:.4} (captures {:.1}% of variance)",
        100.0 * aug.captured_fraction()
    );
    println!("separation change {:+.2}%", separation_change(d0, d1)?);
    for (p, stem) in [(&base, "baseline"), (&aug, "augmented")] {
        let (csv, svg) = emit_scatter(p, out.join(stem))?;
        println!("wrote {} and {}", csv.display(), svg.display());
    }
    Ok(())
}
