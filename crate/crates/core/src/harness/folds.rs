use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SnpError};

/// Reference and evaluation row indices of one fold, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub reference: Vec<usize>,
    pub eval: Vec<usize>,
}

/// Independent seeded shuffle-splits. Fold `f` draws from stream `f` of a
/// generator seeded with `seed`, so folds do not depend on each other.
pub fn kfold_splits(n: usize, folds: usize, ref_fraction: f64, seed: u64) -> Result<Vec<Split>> {
    if !(ref_fraction > 0.0 && ref_fraction < 1.0) {
        return Err(SnpError::InvalidArgument(format!(
            "ref_fraction must be in (0, 1), got {ref_fraction}"
        )));
    }
    if folds == 0 {
        return Err(SnpError::InvalidArgument("need at least one fold".into()));
    }
    let n_ref = (n as f64 * ref_fraction).round() as usize;
    if n_ref == 0 || n_ref >= n {
        return Err(SnpError::InvalidArgument(format!(
            "{n} samples at fraction {ref_fraction} leave an empty reference or eval split"
        )));
    }
    Ok((0..folds)
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(f as u64);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let mut reference = idx[..n_ref].to_vec();
            let mut eval = idx[n_ref..].to_vec();
            reference.sort_unstable();
            eval.sort_unstable();
            Split { reference, eval }
        })
        .collect())
}
