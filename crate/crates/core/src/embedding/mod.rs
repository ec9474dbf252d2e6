//! PCA and exact t-SNE for looking at the image set in two dimensions.

mod pca;
mod tsne;

use std::io::Write;

use thiserror::Error;

pub use pca::{pca_fit, pca_reduce, PcaModel, PcaTarget};
pub use tsne::{nearest_neighbor_agreement, tsne, TsneConfig, TsneResult};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("perplexity {perplexity} needs more than {} points, got {n}", (3.0 * perplexity + 1.0).ceil())]
    Perplexity { perplexity: f64, n: usize },
    #[error("{k} components requested but the data has rank {rank}")]
    RankExceeded { k: usize, rank: usize },
    #[error("no component count reaches {0} of the variance")]
    UnreachableVariance(f64),
    #[error("shape: {0}")]
    Shape(String),
    #[error("t-SNE produced non-finite coordinates at iteration {0}")]
    Diverged(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// `id,x,y,label` rows.
pub fn write_embedding_csv<W: Write>(
    w: W,
    ids: &[String],
    embedding: &[[f64; 2]],
    labels: &[String],
) -> Result<(), EmbeddingError> {
    if ids.len() != embedding.len() || labels.len() != embedding.len() {
        return Err(EmbeddingError::Shape("ids, points and labels differ in length".into()));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["id", "x", "y", "label"])?;
    for ((id, p), l) in ids.iter().zip(embedding).zip(labels) {
        out.write_record([id.as_str(), &p[0].to_string(), &p[1].to_string(), l.as_str()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `k,cumulative_ratio` rows, `k` from 1.
pub fn write_variance_csv<W: Write>(w: W, model: &PcaModel) -> Result<(), EmbeddingError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "cumulative_ratio"])?;
    for (k, c) in model.cumulative_ratio.iter().enumerate() {
        out.write_record([(k + 1).to_string(), c.to_string()])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        write_embedding_csv(&mut buf, &["a,1".into()], &[[0.5, -1.0]], &["Ball".into()]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "id,x,y,label\n\"a,1\",0.5,-1,Ball\n");

        let m = pca_fit(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.1]]).unwrap();
        let mut buf = Vec::new();
        write_variance_csv(&mut buf, &m).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,cumulative_ratio\n1,"));
        assert_eq!(text.lines().count(), 3);
    }
}
