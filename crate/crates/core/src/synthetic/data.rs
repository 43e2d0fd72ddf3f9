use std::io::Write;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::GroundTruth;
use crate::error::{Error, Result};
use crate::losses::{probs_with_reference, sigmoid, TaskKind};

/// Design matrix with targets. Binary labels are stored as `0.0 / 1.0`,
/// multiclass labels as `1.0 ..= K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub task: TaskKind,
    pub seed: u64,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Vec<f64>, task: TaskKind, seed: u64) -> Result<Self> {
        if x.nrows() == 0 || x.nrows() != y.len() {
            return Err(Error::Shape(format!(
                "{} feature rows and {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("features must be finite".into()));
        }
        y.iter().try_for_each(|&t| task.validate_target(t))?;
        Ok(Self { x, y, task, seed })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// CSV with header `x1,...,xd,y`, one row per sample in order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.dim()).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        w.write_record(&header)?;
        for (row, y) in self.x.rows().into_iter().zip(&self.y) {
            let rec: Vec<String> = row
                .iter()
                .chain(std::iter::once(y))
                .map(|v| v.to_string())
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_dims(gt: &GroundTruth, x: ArrayView2<f64>, out_dim: usize) -> Result<()> {
    if gt.dim() != x.ncols() {
        return Err(Error::Shape(format!(
            "ground truth takes {} features, design has {}",
            gt.dim(),
            x.ncols()
        )));
    }
    if gt.out_dim() != out_dim {
        return Err(Error::Shape(format!(
            "ground truth has {} outputs, task needs {out_dim}",
            gt.out_dim()
        )));
    }
    Ok(())
}

/// `Y_i = g*(X_i) + eps_i` with Gaussian noise of standard deviation `noise_sd`.
pub fn gen_regression(
    gt: &GroundTruth,
    x: Array2<f64>,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    check_dims(gt, x.view(), 1)?;
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "noise sd must be >= 0, got {noise_sd}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gt.eval_batch(x.view());
    let y = g
        .column(0)
        .iter()
        .map(|&v| {
            let e: f64 = rng.sample(StandardNormal);
            v + noise_sd * e
        })
        .collect();
    Dataset::new(x, y, TaskKind::Regression, seed)
}

/// `Y_i ~ Bernoulli(sigmoid(g*(X_i)))`
pub fn gen_binary(gt: &GroundTruth, x: Array2<f64>, seed: u64) -> Result<Dataset> {
    check_dims(gt, x.view(), 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gt.eval_batch(x.view());
    let y = g
        .column(0)
        .iter()
        .map(|&v| {
            let u: f64 = rng.random();
            if u < sigmoid(v) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Dataset::new(x, y, TaskKind::Binary, seed)
}

/// `Y_i ~ Multinomial(probs_with_reference(g*(X_i)))` over classes `1..=K`.
pub fn gen_multiclass(gt: &GroundTruth, x: Array2<f64>, k: usize, seed: u64) -> Result<Dataset> {
    let task = TaskKind::multiclass(k)?;
    check_dims(gt, x.view(), k - 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gt.eval_batch(x.view());
    let y = g
        .rows()
        .into_iter()
        .map(|row| {
            let p = probs_with_reference(&row.to_vec());
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (j, pj) in p.iter().enumerate() {
                acc += pj;
                if u < acc {
                    return (j + 1) as f64;
                }
            }
            k as f64
        })
        .collect();
    Dataset::new(x, y, task, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{make_ground_truth, ClassTag, FeatureSampler};

    fn within_3se(p_hat: f64, p: f64, n: usize) -> bool {
        (p_hat - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn noiseless_regression_is_exact() {
        let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 2, 1, 1.0, 1).unwrap();
        let x = FeatureSampler::uniform(2, 1).sample(100);
        let ds = gen_regression(&gt, x.clone(), 0.0, 3).unwrap();
        let g = gt.eval_batch(x.view());
        assert_eq!(ds.y, g.column(0).to_vec());
    }

    #[test]
    fn regression_noise_is_centered() {
        let n = 100_000;
        let gt = GroundTruth::constant(&[0.0], 1);
        let ds = gen_regression(&gt, FeatureSampler::uniform(1, 2).sample(n), 1.0, 5).unwrap();
        let mean = ds.y.iter().sum::<f64>() / n as f64;
        // 3 standard errors of a unit-variance mean
        assert!(mean.abs() <= 3.0 / (n as f64).sqrt() && mean.abs() <= 0.02);
    }

    #[test]
    fn generators_are_deterministic() {
        let gt = make_ground_truth(ClassTag::Analytic, 2, 1, 3.0, 1).unwrap();
        let x = FeatureSampler::uniform(2, 1).sample(500);
        assert_eq!(
            gen_binary(&gt, x.clone(), 7).unwrap(),
            gen_binary(&gt, x.clone(), 7).unwrap()
        );
        assert_eq!(
            gen_regression(&gt, x.clone(), 0.5, 7).unwrap(),
            gen_regression(&gt, x.clone(), 0.5, 7).unwrap()
        );
        let gt3 = make_ground_truth(ClassTag::Analytic, 2, 2, 3.0, 1).unwrap();
        assert_eq!(
            gen_multiclass(&gt3, x.clone(), 3, 7).unwrap(),
            gen_multiclass(&gt3, x, 3, 7).unwrap()
        );
    }

    #[test]
    fn binary_frequencies() {
        let n = 100_000;
        let ds = gen_binary(
            &GroundTruth::constant(&[0.0], 1),
            FeatureSampler::uniform(1, 0).sample(n),
            1,
        )
        .unwrap();
        let freq = ds.y.iter().sum::<f64>() / n as f64;
        assert!(within_3se(freq, 0.5, n));

        let ds = gen_binary(
            &GroundTruth::constant(&[1e3], 1),
            FeatureSampler::uniform(1, 0).sample(1000),
            1,
        )
        .unwrap();
        assert!(ds.y.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn binary_frequency_at_fixed_points() {
        let gt = make_ground_truth(ClassTag::Smooth { s: 2.0 }, 1, 1, 3.0, 2).unwrap();
        let n = 20_000;
        for (i, &pt) in [-1.2, 0.0, 0.9].iter().enumerate() {
            let x = Array2::from_elem((n, 1), pt);
            let ds = gen_binary(&gt, x, 100 + i as u64).unwrap();
            let freq = ds.y.iter().sum::<f64>() / n as f64;
            assert!(within_3se(freq, sigmoid(gt.eval(&[pt])[0]), n));
        }
    }

    #[test]
    fn multiclass_frequencies() {
        let n = 100_000;
        let k = 4;
        let gt = GroundTruth::constant(&[0.0; 3], 1);
        let ds = gen_multiclass(&gt, FeatureSampler::uniform(1, 0).sample(n), k, 3).unwrap();
        for c in 1..=k {
            let freq = ds.y.iter().filter(|&&y| y == c as f64).count() as f64 / n as f64;
            assert!(within_3se(freq, 0.25, n), "class {c}: {freq}");
        }
        let gt = GroundTruth::constant(&[50.0, 0.0], 1);
        let ds = gen_multiclass(&gt, FeatureSampler::uniform(1, 0).sample(1000), 3, 3).unwrap();
        assert!(ds.y.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn csv_layout() {
        let x = ndarray::array![[0.5, -1.0], [2.0, 3.25]];
        let ds = Dataset::new(x, vec![1.5, -0.25], TaskKind::Regression, 0).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x1,x2,y\n0.5,-1,1.5\n2,3.25,-0.25\n"
        );
    }

    #[test]
    fn rejects_bad_targets() {
        let x = Array2::zeros((2, 1));
        assert!(Dataset::new(x.clone(), vec![0.0, 2.0], TaskKind::Binary, 0).is_err());
        assert!(Dataset::new(x, vec![1.0], TaskKind::Regression, 0).is_err());
    }
}
