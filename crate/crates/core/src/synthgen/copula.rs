use super::{MixtureConstants, PotentialOutcomes, SyntheticConfig};
use crate::error::{CpteError, Result};
use crate::stats::{normal_cdf, normal_expectation, normal_quantile};

const U_FLOOR: f64 = 1e-300;
const U_CEIL: f64 = 1.0 - f64::EPSILON / 2.0;

/// Largest Pearson correlation between the simple draw and a mixture draw that a
/// Gaussian copula can produce. The attainable range is symmetric.
///
/// With `z0' = ρ z1 + sqrt(1-ρ²) z0` and `m = F⁻¹(Φ(z0'))`, the Pearson
/// correlation equals `ρ · E[Z F⁻¹(Φ(Z))] / sd(m)`, linear in `ρ`.
pub fn max_noise_correlation(c: &MixtureConstants) -> f64 {
    let m = c.mixture();
    let h = |z: f64| m.quantile(normal_cdf(z).clamp(U_FLOOR, U_CEIL));
    normal_expectation(|z| z * h(z)) / m.variance().sqrt()
}

/// Latent copula correlation that yields `target` Pearson correlation between noise draws.
pub fn latent_correlation_for(target: f64, c: &MixtureConstants) -> Result<f64> {
    let hi = max_noise_correlation(c);
    if target.abs() > hi {
        return Err(CpteError::CorrelationUnreachable {
            target,
            lo: -hi,
            hi,
        });
    }
    Ok(target / hi)
}

/// Re-couples the existing noise draws through a Gaussian copula. Each draw is
/// mapped to its normal score, the mixture score is mixed with the simple one,
/// and the result is mapped back through the mixture quantile function, so
/// both marginals are unchanged.
pub fn induce_correlation_copula(cfg: &SyntheticConfig, po: &mut PotentialOutcomes) -> Result<()> {
    if !(cfg.correlation_target.abs() < 1.0) {
        return Err(CpteError::InvalidInput(
            "correlation target must lie in (-1, 1)".into(),
        ));
    }
    let c = cfg.constants;
    let rho = latent_correlation_for(cfg.correlation_target, &c)?;
    let mix = c.mixture();
    let comp = (1.0 - rho * rho).sqrt();
    for (s, m) in po.simple.iter().zip(po.mixture.iter_mut()) {
        let z1 = (s - c.mu_s) / c.sigma;
        let z0 = normal_quantile(mix.cdf(*m).clamp(U_FLOOR, U_CEIL));
        let z = rho * z1 + comp * z0;
        *m = mix.quantile(normal_cdf(z).clamp(U_FLOOR, U_CEIL));
    }
    po.recompose();
    Ok(())
}
