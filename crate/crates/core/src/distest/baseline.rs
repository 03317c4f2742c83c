//! T-learner mean baselines: per-arm conditional means plugged into `w`.

use super::forest::arm_rows;
use super::{CpteModel, ForestParams, KnnIndex, RegressionForest};
use crate::data::{Arm, Dataset};
use crate::error::{CpteError, Result};
use crate::linalg::SymSystem;
use crate::preference::Preference;
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaselineLearner {
    KnnMean { k: usize },
    Ridge { alpha: f64 },
    ForestMean { n_trees: Option<usize> },
}

/// Conditional-mean predictor for one arm and one outcome coordinate.
pub trait MeanModel: Send + Sync {
    fn predict(&self, x: &[f64]) -> f64;
}

/// Ridge regression with an unpenalised intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl RidgeModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<Self> {
        let n = y.len() as f64;
        let p = x[0].len();
        let mut xm = vec![0.0; p];
        for r in x {
            for (m, v) in xm.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let ym = y.iter().sum::<f64>() / n;
        let mut sys = SymSystem::zeros(p);
        let mut z = vec![0.0; p];
        for (r, &t) in x.iter().zip(y) {
            for j in 0..p {
                z[j] = r[j] - xm[j];
            }
            sys.add_outer(&z, 1.0, t - ym);
        }
        sys.add_diagonal(alpha, false);
        let coef = if p == 0 { Vec::new() } else { sys.solve()? };
        let intercept = ym - coef.iter().zip(&xm).map(|(b, m)| b * m).sum::<f64>();
        Ok(Self { intercept, coef })
    }
}

impl MeanModel for RidgeModel {
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + x.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>()
    }
}

struct KnnMean {
    index: KnnIndex,
    y: Vec<f64>,
    arm: Arm,
    k: usize,
}

impl MeanModel for KnnMean {
    fn predict(&self, x: &[f64]) -> f64 {
        let nb = self.index.neighbors(x, self.arm, self.k);
        nb.iter().map(|&i| self.y[i]).sum::<f64>() / nb.len() as f64
    }
}

impl MeanModel for RegressionForest {
    fn predict(&self, x: &[f64]) -> f64 {
        self.predict_mean(x)
    }
}

/// `q̂_W(x) = w(μ̂₁(x) | μ̂₀(x))`, `q̂_L(x) = w(μ̂₀(x) | μ̂₁(x))`.
pub struct BaselineModel {
    /// `means[arm][coordinate]`
    means: [Vec<Box<dyn MeanModel>>; 2],
    w: Preference,
    name: String,
}

impl BaselineModel {
    pub fn mean(&self, x: &[f64], arm: Arm) -> Vec<f64> {
        self.means[arm.index()].iter().map(|m| m.predict(x)).collect()
    }
}

pub fn fit_baseline(
    data: &Dataset,
    w: &Preference,
    learner: BaselineLearner,
    seed: u64,
) -> Result<BaselineModel> {
    w.require_bounded()?;
    data.require_both_arms()?;
    let d = data.outcome_dim();
    if let BaselineLearner::KnnMean { k } = learner {
        let (n0, n1) = data.arm_sizes();
        if k == 0 || k > n0.min(n1) {
            return Err(CpteError::NeighborsExceedArm {
                k,
                arm_size: n0.min(n1),
            });
        }
    }
    let index = KnnIndex::fit(&data.x, &data.t);
    let fit_one = |arm: Arm, c: usize| -> Result<Box<dyn MeanModel>> {
        Ok(match learner {
            BaselineLearner::KnnMean { k } => Box::new(KnnMean {
                index: index.clone(),
                y: data.y.column(c),
                arm,
                k,
            }),
            BaselineLearner::Ridge { alpha } => {
                let (x, y) = arm_rows(data, arm, c)?;
                Box::new(RidgeModel::fit(&x, &y, alpha)?)
            }
            BaselineLearner::ForestMean { n_trees } => {
                let (x, y) = arm_rows(data, arm, c)?;
                let mut params = ForestParams::for_size(y.len());
                if let Some(t) = n_trees {
                    params.n_trees = t;
                }
                let s = derive_seed(seed, &[arm.index() as u64, c as u64]);
                Box::new(RegressionForest::fit(&x, &y, &params, s)?)
            }
        })
    };
    let mut means: [Vec<Box<dyn MeanModel>>; 2] = [Vec::new(), Vec::new()];
    for arm in [Arm::Control, Arm::Treated] {
        for c in 0..d {
            means[arm.index()].push(fit_one(arm, c)?);
        }
    }
    let name = match learner {
        BaselineLearner::KnnMean { k } => format!("knn_mean k={k}"),
        BaselineLearner::Ridge { alpha } => format!("ridge alpha={alpha}"),
        BaselineLearner::ForestMean { .. } => "forest_mean".to_string(),
    };
    Ok(BaselineModel {
        means,
        w: w.clone(),
        name,
    })
}

impl CpteModel for BaselineModel {
    fn preference(&self) -> &Preference {
        &self.w
    }

    fn cpte(&self, x: &[f64]) -> Result<(f64, f64)> {
        let m1 = self.mean(x, Arm::Treated);
        let m0 = self.mean(x, Arm::Control);
        Ok((self.w.eval_unchecked(&m1, &m0), self.w.eval_unchecked(&m0, &m1)))
    }

    fn p_hat(&self, x: &[f64], arm: Arm, y: &[f64]) -> Result<(f64, f64)> {
        let m = self.mean(x, arm.opposite());
        let (a, b) = (self.w.eval_unchecked(y, &m), self.w.eval_unchecked(&m, y));
        Ok(if arm.is_treated() { (a, b) } else { (b, a) })
    }

    fn summary(&self) -> String {
        self.name.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Matrix;

    #[test]
    fn ridge_matches_closed_form_one_feature() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let m = RidgeModel::fit(&x, &y, 1.0).unwrap();
        // centred: sxx = 10, sxy = 8, slope 8 / (10 + 1)
        assert!((m.coef[0] - 8.0 / 11.0).abs() < 1e-12);
        assert!((m.intercept - (3.0 - 2.0 * 8.0 / 11.0)).abs() < 1e-12);
    }

    #[test]
    fn equal_means_lose_under_strict_indicator() {
        let data = Dataset::new(
            Matrix::from_rows(&[vec![0.0], vec![1.0], vec![0.0], vec![1.0]]).unwrap(),
            vec![true, true, false, false],
            Matrix::column_vector(vec![1.0, 2.0, 1.0, 2.0]),
        )
        .unwrap();
        let m = fit_baseline(&data, &Preference::pns(), BaselineLearner::KnnMean { k: 2 }, 0).unwrap();
        assert_eq!(m.cpte(&[0.5]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn perfect_means_on_homogeneous_dgp_give_zero() {
        let g = crate::synthgen::generate(&crate::synthgen::SyntheticConfig::new(4000, 8)).unwrap();
        let m = fit_baseline(&g.data, &Preference::pns(), BaselineLearner::Ridge { alpha: 1.0 }, 0).unwrap();
        let mut zeros = 0;
        for i in 0..100 {
            if m.cpte(g.data.x.row(i)).unwrap().0 == 0.0 {
                zeros += 1;
            }
        }
        assert!(zeros >= 95, "{zeros}");
    }
}
