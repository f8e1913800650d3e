use crate::dataset::{Dataset, Task};
use crate::error::{Error, Result};

/// Brute-force Euclidean k-nearest-neighbour state.
#[derive(Clone, Debug, PartialEq)]
pub struct Knn {
    k: usize,
    n_features: usize,
    task: Task,
    /// Row-major training features.
    points: Vec<f64>,
    targets: Vec<f64>,
}

impl Knn {
    pub fn fit(train: &Dataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be positive".into()));
        }
        if k > train.n_samples() {
            return Err(Error::InvalidParams(format!(
                "k = {k} exceeds the {} training rows",
                train.n_samples()
            )));
        }
        Ok(Knn {
            k,
            n_features: train.n_features(),
            task: train.task(),
            points: train.rows.iter().flatten().copied().collect(),
            targets: train.targets.clone(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Indices of the k nearest training rows; equal distances favour the lower index.
    pub fn neighbours(&self, row: &[f64]) -> Vec<usize> {
        let d = self.n_features;
        let dists = self.points.chunks_exact(d).map(|p| {
            p.iter()
                .zip(row)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        });
        let key_less = |a: (f64, usize), b: (f64, usize)| a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);

        if self.k <= 32 {
            // Sorted insertion buffer.
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
            for (i, dist) in dists.enumerate() {
                if best.len() == self.k && !key_less((dist, i), best[self.k - 1]) {
                    continue;
                }
                let pos = best
                    .iter()
                    .position(|&b| key_less((dist, i), b))
                    .unwrap_or(best.len());
                best.insert(pos, (dist, i));
                best.truncate(self.k);
            }
            best.into_iter().map(|(_, i)| i).collect()
        } else {
            let mut all: Vec<(f64, usize)> = dists.enumerate().map(|(i, d)| (d, i)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if self.k < all.len() {
                all.select_nth_unstable_by(self.k - 1, cmp);
                all.truncate(self.k);
            }
            all.sort_by(cmp);
            all.into_iter().map(|(_, i)| i).collect()
        }
    }

    /// Class-1 vote fraction or neighbour target mean.
    pub fn value(&self, row: &[f64]) -> f64 {
        let nb = self.neighbours(row);
        match self.task {
            Task::Classification => {
                nb.iter().filter(|&&i| self.targets[i] == 1.0).count() as f64 / self.k as f64
            }
            Task::Regression => nb.iter().map(|&i| self.targets[i]).sum::<f64>() / self.k as f64,
        }
    }
}
