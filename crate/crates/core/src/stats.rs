//! Small numerical helpers shared across modules.

use statrs::function::erf::{erfc, erfc_inv};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile. Saturates to ±∞ at 0 and 1.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        let x = -SQRT_2 * erfc_inv(2.0 * p);
        let d = normal_pdf(x);
        if d > 0.0 {
            x - (normal_cdf(x) - p) / d
        } else {
            x
        }
    }
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance.
pub fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

pub fn std_dev(v: &[f64]) -> f64 {
    variance(v).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    sab / (saa * sbb).sqrt()
}

/// Average ranks (1-based, ties share the mean rank).
pub fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&ranks(a), &ranks(b))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let v = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= v {
            i += 1;
        }
        while j < sb.len() && sb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Empirical quantile with linear interpolation between order statistics (type 7).
pub fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Piecewise-linear interpolation on a table sorted by abscissa, flat outside its range.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let (y0, y1) = (ys[k - 1], ys[k]);
    if x1 == x0 {
        return y1;
    }
    y0 + (x - x0) / (x1 - x0) * (y1 - y0)
}

/// Right-continuous step interpolation: value at the first abscissa not below `x`.
pub fn interp_step(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.partition_point(|&v| v < x);
    ys[k.min(xs.len() - 1)]
}

/// Two-component Gaussian mixture with a shared standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMixture {
    /// Weight of the low component.
    pub weight_low: f64,
    pub mu_low: f64,
    pub mu_high: f64,
    pub sigma: f64,
}

impl GaussianMixture {
    pub fn cdf(&self, x: f64) -> f64 {
        self.weight_low * normal_cdf((x - self.mu_low) / self.sigma)
            + (1.0 - self.weight_low) * normal_cdf((x - self.mu_high) / self.sigma)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        (self.weight_low * normal_pdf((x - self.mu_low) / self.sigma)
            + (1.0 - self.weight_low) * normal_pdf((x - self.mu_high) / self.sigma))
            / self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.weight_low * self.mu_low + (1.0 - self.weight_low) * self.mu_high
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.sigma * self.sigma
            + self.weight_low * (self.mu_low - m).powi(2)
            + (1.0 - self.weight_low) * (self.mu_high - m).powi(2)
    }

    /// Inverse CDF by safeguarded Newton iterations inside a bisection bracket.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        let lo_mu = self.mu_low.min(self.mu_high);
        let hi_mu = self.mu_low.max(self.mu_high);
        let mut lo = lo_mu + self.sigma * normal_quantile(u).min(0.0) - self.sigma;
        let mut hi = hi_mu + self.sigma * normal_quantile(u).max(0.0) + self.sigma;
        while self.cdf(lo) > u {
            lo -= 10.0 * self.sigma;
        }
        while self.cdf(hi) < u {
            hi += 10.0 * self.sigma;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = self.pdf(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-14 * (1.0 + x.abs()) {
                break;
            }
        }
        x
    }
}

/// E[f(Z)] for standard normal Z, composite Simpson on [-10, 10].
pub fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let steps = 8000usize;
    let (a, b) = (-10.0f64, 10.0f64);
    let h = (b - a) / steps as f64;
    let mut acc = 0.0;
    for i in 0..=steps {
        let z = a + i as f64 * h;
        let c = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += c * f(z) * normal_pdf(z);
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_roundtrip() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-10);
        }
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-10);
    }

    #[test]
    fn mixture_quantile_inverts_cdf() {
        let m = GaussianMixture {
            weight_low: 0.85,
            mu_low: 0.0,
            mu_high: 3.0,
            sigma: 0.2,
        };
        for &u in &[1e-9, 0.01, 0.5, 0.84, 0.85, 0.86, 0.99, 1.0 - 1e-9] {
            let x = m.quantile(u);
            assert!((m.cdf(x) - u).abs() < 1e-11, "u={u} x={x}");
        }
        assert!((m.mean() - 0.45).abs() < 1e-15);
        assert!((m.variance() - 1.1875).abs() < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn interpolation_is_flat_outside_grid() {
        let xs = [0.2, 0.5, 0.8];
        let ys = [1.0, 2.0, 4.0];
        assert_eq!(interp_linear(&xs, &ys, 0.0), 1.0);
        assert_eq!(interp_linear(&xs, &ys, 0.9), 4.0);
        assert!((interp_linear(&xs, &ys, 0.65) - 3.0).abs() < 1e-12);
        assert_eq!(interp_step(&xs, &ys, 0.3), 2.0);
        assert_eq!(interp_step(&xs, &ys, 0.95), 4.0);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a = [0.1, 0.4, 0.2];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&[0.0, 0.1], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn normal_expectation_moments() {
        assert!((normal_expectation(|z| z * z) - 1.0).abs() < 1e-10);
        assert!(normal_expectation(|z| z).abs() < 1e-12);
    }
}
