use std::cmp::Ordering;

use super::CpteModel;
use crate::data::{Arm, Dataset, Matrix, Standardizer};
use crate::error::{CpteError, Result};
use crate::preference::Preference;

/// Per-arm nearest-neighbour search on z-scored covariates.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    standardizer: Standardizer,
    z: Matrix,
    arms: [Vec<usize>; 2],
}

impl KnnIndex {
    pub fn fit(x: &Matrix, t: &[bool]) -> Self {
        let standardizer = Standardizer::fit(x);
        let z = standardizer.transform(x);
        let mut arms = [Vec::new(), Vec::new()];
        for (i, &ti) in t.iter().enumerate() {
            arms[usize::from(ti)].push(i);
        }
        Self { standardizer, z, arms }
    }

    pub fn arm_size(&self, arm: Arm) -> usize {
        self.arms[arm.index()].len()
    }

    /// Indices of the `k` nearest units of `arm`, nearest first. Equal
    /// distances go to the lower training index.
    pub fn neighbors(&self, x: &[f64], arm: Arm, k: usize) -> Vec<usize> {
        let mut q = vec![0.0; x.len()];
        self.standardizer.transform_row(x, &mut q);
        let mut d: Vec<(f64, usize)> = self.arms[arm.index()]
            .iter()
            .map(|&i| {
                let dist = self
                    .z
                    .row(i)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (dist, i)
            })
            .collect();
        let k = k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        if k < d.len() {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

/// Distributional k-NN: `q̂_W(x)` averages `w` over the `k×k` cross pairs of the
/// nearest treated and nearest control units.
#[derive(Debug, Clone)]
pub struct KnnModel {
    index: KnnIndex,
    y: Matrix,
    w: Preference,
    k: usize,
}

impl KnnModel {
    pub fn fit(data: &Dataset, w: Preference, k: usize) -> Result<Self> {
        w.require_bounded()?;
        data.require_both_arms()?;
        let (n0, n1) = data.arm_sizes();
        if k == 0 || k > n0.min(n1) {
            return Err(CpteError::NeighborsExceedArm {
                k,
                arm_size: n0.min(n1),
            });
        }
        Ok(Self {
            index: KnnIndex::fit(&data.x, &data.t),
            y: data.y.clone(),
            w,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn index(&self) -> &KnnIndex {
        &self.index
    }

    /// Mean outcome of the `k` nearest units of `arm`, per coordinate.
    pub fn neighbor_mean(&self, x: &[f64], arm: Arm) -> Vec<f64> {
        let nb = self.index.neighbors(x, arm, self.k);
        let mut m = vec![0.0; self.y.ncols()];
        for &i in &nb {
            for (a, v) in m.iter_mut().zip(self.y.row(i)) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= nb.len() as f64);
        m
    }
}

/// Fits the distributional k-NN estimator.
pub fn knn_cpte(data: &Dataset, w: &Preference, k: usize) -> Result<KnnModel> {
    KnnModel::fit(data, w.clone(), k)
}

impl CpteModel for KnnModel {
    fn preference(&self) -> &Preference {
        &self.w
    }

    fn cpte(&self, x: &[f64]) -> Result<(f64, f64)> {
        let n1 = self.index.neighbors(x, Arm::Treated, self.k);
        let n0 = self.index.neighbors(x, Arm::Control, self.k);
        let mut sw = 0.0;
        let mut sl = 0.0;
        for &i in &n1 {
            let yi = self.y.row(i);
            for &j in &n0 {
                let yj = self.y.row(j);
                sw += self.w.eval_unchecked(yi, yj);
                sl += self.w.eval_unchecked(yj, yi);
            }
        }
        let pairs = (n1.len() * n0.len()) as f64;
        let qw = sw / pairs;
        let ql = if self.w.is_tie_aware() { 1.0 - qw } else { sl / pairs };
        Ok((qw, ql))
    }

    fn p_hat(&self, x: &[f64], arm: Arm, y: &[f64]) -> Result<(f64, f64)> {
        let nb = self.index.neighbors(x, arm.opposite(), self.k);
        let (mut pw, mut pl) = (0.0, 0.0);
        for &j in &nb {
            let yj = self.y.row(j);
            let (a, b) = (self.w.eval_unchecked(y, yj), self.w.eval_unchecked(yj, y));
            // treated: p_W = E w(y | Y0); control: p_W = E w(Y1 | y)
            if arm.is_treated() {
                pw += a;
                pl += b;
            } else {
                pw += b;
                pl += a;
            }
        }
        let m = nb.len() as f64;
        Ok((pw / m, pl / m))
    }

    fn summary(&self) -> String {
        format!("knn k={}", self.k)
    }
}

/// Conditional mean of the primary coordinate among the `k` nearest units of one arm.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    index: KnnIndex,
    labels: Vec<f64>,
    arm: Arm,
    k: usize,
}

impl KnnClassifier {
    /// `k` is capped at the arm size.
    pub fn fit(data: &Dataset, arm: Arm, component: usize, k: usize) -> Result<Self> {
        let n_arm = data.arm_indices(arm).len();
        if n_arm == 0 {
            return Err(CpteError::EmptyArm { arm: arm.index() as u8 });
        }
        Ok(Self {
            index: KnnIndex::fit(&data.x, &data.t),
            labels: data.y.column(component),
            arm,
            k: k.min(n_arm).max(1),
        })
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        let nb = self.index.neighbors(x, self.arm, self.k);
        nb.iter().map(|&i| self.labels[i]).sum::<f64>() / nb.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distest::predict_cpte;

    fn two_unit() -> Dataset {
        Dataset::new(
            Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
            vec![true, false],
            Matrix::column_vector(vec![0.4, 0.2]),
        )
        .unwrap()
    }

    #[test]
    fn single_pair() {
        let m = knn_cpte(&two_unit(), &Preference::pns(), 1).unwrap();
        for x in [[0.0, 0.0], [5.0, -3.0], [0.5, 0.5]] {
            assert_eq!(m.cpte(&x).unwrap(), (1.0, 0.0));
        }
    }

    #[test]
    fn errors() {
        let d = two_unit();
        assert!(matches!(
            knn_cpte(&d, &Preference::pns(), 2),
            Err(CpteError::NeighborsExceedArm { k: 2, arm_size: 1 })
        ));
        let one_arm = d.subset(&[0]);
        assert!(matches!(
            knn_cpte(&one_arm, &Preference::pns(), 1),
            Err(CpteError::EmptyArm { arm: 0 })
        ));
    }

    #[test]
    fn distance_ties_use_lowest_index() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![0.0]]).unwrap();
        let idx = KnnIndex::fit(&x, &[true, true, true, false]);
        assert_eq!(idx.neighbors(&[0.0], Arm::Treated, 2), vec![0, 1]);
        assert_eq!(idx.neighbors(&[0.9], Arm::Treated, 2), vec![0, 2]);
    }

    #[test]
    fn tie_aware_complement_is_exact() {
        let g = crate::synthgen::gen_hierarchical(&crate::synthgen::HierarchicalConfig::new(200, 1))
            .unwrap();
        let m = knn_cpte(&g.data, &Preference::lexicographic(2), 5).unwrap();
        let est = predict_cpte(&m, &g.data.x).unwrap();
        for (a, b) in est.q_w.iter().zip(&est.q_l) {
            assert_eq!(a + b, 1.0);
            assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn binary_outcome_matches_bernoulli_closed_form() {
        // with shared neighbour sets the cross-pair mean factorises as p1 (1 - p0)
        let g = crate::synthgen::gen_hierarchical(&crate::synthgen::HierarchicalConfig::new(400, 2))
            .unwrap();
        let primary = Dataset::new(
            g.data.x.clone(),
            g.data.t.clone(),
            Matrix::column_vector(g.data.y.column(0)),
        )
        .unwrap();
        let m = knn_cpte(&primary, &Preference::pns(), 9).unwrap();
        for i in 0..20 {
            let x = g.data.x.row(i);
            let p1 = m.neighbor_mean(x, Arm::Treated)[0];
            let p0 = m.neighbor_mean(x, Arm::Control)[0];
            let (qw, _) = m.cpte(x).unwrap();
            assert!((qw - p1 * (1.0 - p0)).abs() < 1e-12);
        }
    }
}
