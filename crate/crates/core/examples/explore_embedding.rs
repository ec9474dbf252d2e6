//! PCA variance curve and a 2-D t-SNE map of the spectrum images, with the
//! share of points whose nearest map neighbor has the same class.
//!
//! cargo run --release --example explore_embedding [-- <embedding.csv>]

use vibediag::embedding::{nearest_neighbor_agreement, pca_fit, pca_reduce, tsne, write_embedding_csv, PcaTarget, TsneConfig};
use vibediag::pipeline::{featurize, FeaturizeConfig};
use vibediag::signal::{synthesize_recording, FaultLabel, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let recordings = FaultLabel::ALL
        .into_iter()
        .enumerate()
        .map(|(i, l)| synthesize_recording(&SyntheticSpec { duration_s: 2.0, ..SyntheticSpec::preset(l) }, 300 + i as u64))
        .collect::<Result<Vec<_>, _>>()?;
    let set = featurize(&recordings, &FeaturizeConfig::default(), None)?;
    let rows: Vec<Vec<f64>> = (0..set.len()).map(|i| set.image(i).to_vec()).collect();

    let pca = pca_fit(&rows)?;
    for k in [1, 2, 5, 10, 20, 50] {
        if let Some(c) = pca.cumulative_ratio.get(k - 1) {
            println!("{k:>3} components: {:.3} of variance", c);
        }
    }
    let reduced = pca_reduce(&pca, &rows, PcaTarget::Variance(0.9))?;
    println!("t-SNE on {} points x {} dims", reduced.len(), reduced[0].len());

    let res = tsne(&reduced, &TsneConfig { perplexity: 15.0, iterations: 500, ..Default::default() })?;
    let labels: Vec<usize> = res.indices.iter().map(|&i| set.labels[i].index()).collect();
    println!("final KL {:.4}", res.kl.last().unwrap());
    println!("nearest-neighbor class agreement {:.3}", nearest_neighbor_agreement(&res.embedding, &labels));

    if let Some(path) = std::env::args().nth(1) {
        let ids: Vec<String> = res.indices.iter().map(|&i| set.provenance[i].key()).collect();
        let names: Vec<String> = res.indices.iter().map(|&i| set.labels[i].name().to_string()).collect();
        write_embedding_csv(std::fs::File::create(&path)?, &ids, &res.embedding, &names)?;
    }
    Ok(())
}
