use rand::Rng;

use super::{hash_point, CpteModel, KnnClassifier};
use crate::data::{Arm, Dataset};
use crate::error::{CpteError, Result};
use crate::preference::Preference;
use crate::rng::{derive_seed, rng_from};
use crate::stats::{interp_linear, interp_step};

/// Conditional quantiles of one arm's outcome. `quantiles(x, levels)[c][k]` is the
/// level-`levels[k]` quantile of coordinate `c`, nondecreasing in the level.
pub trait QuantileModel: Send + Sync {
    fn dim(&self) -> usize {
        1
    }

    /// Discrete coordinates are read off the table with step interpolation.
    fn is_discrete(&self, _component: usize) -> bool {
        false
    }

    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>>;

    fn summary(&self) -> String {
        String::from("quantile model")
    }
}

/// Wraps a closure `(x, q) -> value` as a univariate quantile model.
pub struct FnQuantile<F>(pub F);

impl<F> QuantileModel for FnQuantile<F>
where
    F: Fn(&[f64], f64) -> f64 + Send + Sync,
{
    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>> {
        vec![levels.iter().map(|&q| (self.0)(x, q)).collect()]
    }
}

/// Bernoulli quantile function `1{q > 1 − p(x)}` from a probability model.
pub struct BernoulliQuantile {
    pub classifier: KnnClassifier,
}

impl QuantileModel for BernoulliQuantile {
    fn is_discrete(&self, _component: usize) -> bool {
        true
    }

    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>> {
        let p = self.classifier.probability(x);
        vec![levels
            .iter()
            .map(|&q| if q > 1.0 - p { 1.0 } else { 0.0 })
            .collect()]
    }

    fn summary(&self) -> String {
        "knn classifier".into()
    }
}

/// Binary primary and continuous secondary coordinates modelled independently given `x`.
pub struct FactorizedModel {
    pub primary: Box<dyn QuantileModel>,
    pub secondary: Box<dyn QuantileModel>,
}

impl QuantileModel for FactorizedModel {
    fn dim(&self) -> usize {
        2
    }

    fn is_discrete(&self, component: usize) -> bool {
        if component == 0 {
            self.primary.is_discrete(0)
        } else {
            self.secondary.is_discrete(0)
        }
    }

    fn quantiles(&self, x: &[f64], levels: &[f64]) -> Vec<Vec<f64>> {
        let mut out = self.primary.quantiles(x, levels);
        out.extend(self.secondary.quantiles(x, levels));
        out
    }

    fn summary(&self) -> String {
        format!("factorized[{}; {}]", self.primary.summary(), self.secondary.summary())
    }
}

/// Sorted `(level, value)` tables per coordinate, checked for monotonicity.
struct Tables {
    levels: Vec<f64>,
    values: Vec<Vec<f64>>,
    discrete: Vec<bool>,
}

impl Tables {
    fn build(m: &dyn QuantileModel, x: &[f64], grid: &[f64]) -> Result<Self> {
        let raw = m.quantiles(x, grid);
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| grid[a].total_cmp(&grid[b]));
        let levels: Vec<f64> = order.iter().map(|&k| grid[k]).collect();
        let mut values = Vec::with_capacity(raw.len());
        for col in &raw {
            let v: Vec<f64> = order.iter().map(|&k| col[k]).collect();
            for k in 1..v.len() {
                if v[k] < v[k - 1] {
                    return Err(CpteError::NonMonotoneQuantiles { level: levels[k] });
                }
            }
            values.push(v);
        }
        let discrete = (0..raw.len()).map(|c| m.is_discrete(c)).collect();
        Ok(Self {
            levels,
            values,
            discrete,
        })
    }

    fn draw(&self, rng: &mut impl Rng, out: &mut [f64]) {
        for (c, v) in self.values.iter().enumerate() {
            let u: f64 = rng.random();
            out[c] = if self.discrete[c] {
                interp_step(&self.levels, v, u)
            } else {
                interp_linear(&self.levels, v, u)
            };
        }
    }
}

fn random_grid(rng: &mut impl Rng, size: usize) -> Vec<f64> {
    (0..size).map(|_| rng.random::<f64>()).collect()
}

/// Sampling-based CPTE at `x`: a random level grid `Q ~ U(0,1)^|Q|` is pushed
/// through both quantile models, `samples` independent uniform pairs are
/// interpolated against the sorted tables, and `w` and its reverse are averaged
/// over the resulting cross pairs.
pub fn algo1_estimate(
    m1: &dyn QuantileModel,
    m0: &dyn QuantileModel,
    x: &[f64],
    w: &Preference,
    grid_size: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if grid_size < 2 || samples < 1 {
        return Err(CpteError::InvalidInput(
            "grid size must be at least 2 and samples at least 1".into(),
        ));
    }
    w.require_bounded()?;
    let mut rng = rng_from(seed);
    let grid = random_grid(&mut rng, grid_size);
    let t1 = Tables::build(m1, x, &grid)?;
    let t0 = Tables::build(m0, x, &grid)?;
    if t1.values.len() != w.dim() || t0.values.len() != w.dim() {
        return Err(CpteError::DimensionMismatch {
            expected: w.dim(),
            got: t1.values.len(),
        });
    }
    let mut y1 = vec![0.0; w.dim()];
    let mut y0 = vec![0.0; w.dim()];
    let (mut sw, mut sl) = (0.0, 0.0);
    for _ in 0..samples {
        t1.draw(&mut rng, &mut y1);
        t0.draw(&mut rng, &mut y0);
        sw += w.eval_unchecked(&y1, &y0);
        sl += w.eval_unchecked(&y0, &y1);
    }
    let qw = sw / samples as f64;
    let ql = if w.is_tie_aware() { 1.0 - qw } else { sl / samples as f64 };
    Ok((qw, ql))
}

/// Monte-Carlo `(p̂_W, p̂_L)` for an observation `(x, arm, y)` using the
/// opposite arm's quantile model.
pub fn estimate_p(
    m_opposite: &dyn QuantileModel,
    x: &[f64],
    arm: Arm,
    y: &[f64],
    w: &Preference,
    grid_size: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if grid_size < 2 || samples < 1 {
        return Err(CpteError::InvalidInput(
            "grid size must be at least 2 and samples at least 1".into(),
        ));
    }
    let mut rng = rng_from(seed);
    let grid = random_grid(&mut rng, grid_size);
    let table = Tables::build(m_opposite, x, &grid)?;
    let mut draw = vec![0.0; y.len()];
    let (mut pw, mut pl) = (0.0, 0.0);
    for _ in 0..samples {
        table.draw(&mut rng, &mut draw);
        let (a, b) = (w.eval_unchecked(y, &draw), w.eval_unchecked(&draw, y));
        if arm.is_treated() {
            pw += a;
            pl += b;
        } else {
            pw += b;
            pl += a;
        }
    }
    Ok((pw / samples as f64, pl / samples as f64))
}

/// Seed for a query: the same `(seed, x)` always reuses the same random numbers.
pub fn query_seed(seed: u64, x: &[f64], stream: u64) -> u64 {
    derive_seed(seed, &[hash_point(x), stream])
}

/// CPTE model backed by one quantile model per arm.
pub struct SamplerModel {
    models: [Box<dyn QuantileModel>; 2],
    w: Preference,
    grid_size: usize,
    samples: usize,
    seed: u64,
}

impl SamplerModel {
    pub fn new(
        m0: Box<dyn QuantileModel>,
        m1: Box<dyn QuantileModel>,
        w: Preference,
        grid_size: usize,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        w.require_bounded()?;
        Ok(Self {
            models: [m0, m1],
            w,
            grid_size,
            samples,
            seed,
        })
    }

    /// Fits per-arm models with `fit_arm(arm, coordinate)`. Two-coordinate
    /// outcomes use a k-NN classifier (k = 11) for the binary primary coordinate
    /// and `fit_arm` for the secondary.
    pub fn fit_with<F>(
        data: &Dataset,
        w: Preference,
        grid_size: usize,
        samples: usize,
        seed: u64,
        fit_arm: F,
    ) -> Result<Self>
    where
        F: Fn(Arm, usize) -> Result<Box<dyn QuantileModel>>,
    {
        let fit = |arm: Arm| -> Result<Box<dyn QuantileModel>> {
            match data.outcome_dim() {
                1 => fit_arm(arm, 0),
                2 => {
                    let primary = data.y.column(0);
                    if primary.iter().any(|&v| v != 0.0 && v != 1.0) {
                        return Err(CpteError::InvalidInput(
                            "two-coordinate outcomes need a binary primary coordinate".into(),
                        ));
                    }
                    Ok(Box::new(FactorizedModel {
                        primary: Box::new(BernoulliQuantile {
                            classifier: KnnClassifier::fit(data, arm, 0, 11)?,
                        }),
                        secondary: fit_arm(arm, 1)?,
                    }))
                }
                d => Err(CpteError::InvalidInput(format!(
                    "sampling estimators support one or two outcome coordinates, got {d}"
                ))),
            }
        };
        let m0 = fit(Arm::Control)?;
        let m1 = fit(Arm::Treated)?;
        Self::new(m0, m1, w, grid_size, samples, seed)
    }

    pub fn model(&self, arm: Arm) -> &dyn QuantileModel {
        self.models[arm.index()].as_ref()
    }
}

impl CpteModel for SamplerModel {
    fn preference(&self) -> &Preference {
        &self.w
    }

    fn cpte(&self, x: &[f64]) -> Result<(f64, f64)> {
        algo1_estimate(
            self.model(Arm::Treated),
            self.model(Arm::Control),
            x,
            &self.w,
            self.grid_size,
            self.samples,
            query_seed(self.seed, x, 0),
        )
    }

    fn p_hat(&self, x: &[f64], arm: Arm, y: &[f64]) -> Result<(f64, f64)> {
        let mut s = query_seed(self.seed, x, 1);
        for v in y {
            s = crate::rng::splitmix64(s ^ v.to_bits());
        }
        estimate_p(
            self.model(arm.opposite()),
            x,
            arm,
            y,
            &self.w,
            self.grid_size,
            self.samples,
            s,
        )
    }

    fn summary(&self) -> String {
        format!(
            "sampler grid={} samples={} control=[{}] treated=[{}]",
            self.grid_size,
            self.samples,
            self.models[0].summary(),
            self.models[1].summary()
        )
    }
}
