//! Preference functions `w(y | y')`: how outcome `y` fares against `y'`.
//!
//! Outcomes are compared after orientation, so that larger is better on every
//! coordinate. Equality is exact value equality; no tolerance is applied.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{CpteError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreferenceKind {
    /// `1{y > y'}` on univariate outcomes; ties lose.
    PnsIndicator,
    /// `1{y ≻ y'} + 0.5·1{y ∼ y'}` under the lexicographic order.
    LexicographicWin,
    /// `y - y'`, unbounded.
    RiskDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preference {
    kind: PreferenceKind,
    orientation: Vec<f64>,
    reversed: bool,
    assume_bounded: bool,
}

impl Preference {
    pub fn pns() -> Self {
        Self::new(PreferenceKind::PnsIndicator, vec![1.0]).expect("valid orientation")
    }

    pub fn lexicographic(dim: usize) -> Self {
        Self::new(PreferenceKind::LexicographicWin, vec![1.0; dim]).expect("valid orientation")
    }

    pub fn risk_difference() -> Self {
        Self::new(PreferenceKind::RiskDifference, vec![1.0]).expect("valid orientation")
    }

    /// `orientation[c]` is `+1` when larger is better on coordinate `c`, `-1` otherwise.
    pub fn new(kind: PreferenceKind, orientation: Vec<f64>) -> Result<Self> {
        if orientation.is_empty() || orientation.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(CpteError::InvalidInput(
                "orientation entries must be +1 or -1".into(),
            ));
        }
        if kind != PreferenceKind::LexicographicWin && orientation.len() != 1 {
            return Err(CpteError::DimensionMismatch {
                expected: 1,
                got: orientation.len(),
            });
        }
        Ok(Self {
            kind,
            orientation,
            reversed: false,
            assume_bounded: false,
        })
    }

    pub fn kind(&self) -> PreferenceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.orientation.len()
    }

    pub fn orientation(&self) -> &[f64] {
        &self.orientation
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    /// Declares that outcomes are known to make `w` lie in [0, 1] (lets risk
    /// difference on unit-interval outcomes through the bounded-only paths).
    pub fn with_assumed_bound(mut self) -> Self {
        self.assume_bounded = true;
        self
    }

    pub fn is_bounded(&self) -> bool {
        self.kind != PreferenceKind::RiskDifference || self.assume_bounded
    }

    pub fn require_bounded(&self) -> Result<()> {
        if self.is_bounded() {
            Ok(())
        } else {
            Err(CpteError::UnboundedPreference)
        }
    }

    /// Whether `w(y|y') + w(y'|y) = 1` for every pair.
    pub fn is_tie_aware(&self) -> bool {
        self.kind == PreferenceKind::LexicographicWin
    }

    /// The anti-preference `w_L(y|y') = w(y'|y)`.
    pub fn reverse(&self) -> Self {
        let mut out = self.clone();
        out.reversed = !self.reversed;
        out
    }

    /// Evaluates `w(y | y')`.
    pub fn eval(&self, y: &[f64], y_ref: &[f64]) -> Result<f64> {
        self.check_dims(y, y_ref)?;
        Ok(self.eval_unchecked(y, y_ref))
    }

    /// Evaluates without dimension checks; callers guarantee `y.len() == y_ref.len() == dim`.
    #[inline]
    pub fn eval_unchecked(&self, y: &[f64], y_ref: &[f64]) -> f64 {
        let (a, b) = if self.reversed { (y_ref, y) } else { (y, y_ref) };
        match self.kind {
            PreferenceKind::PnsIndicator => {
                if self.orientation[0] * a[0] > self.orientation[0] * b[0] {
                    1.0
                } else {
                    0.0
                }
            }
            PreferenceKind::LexicographicWin => match self.lexicographic_cmp(a, b) {
                Ordering::Greater => 1.0,
                Ordering::Equal => 0.5,
                Ordering::Less => 0.0,
            },
            PreferenceKind::RiskDifference => self.orientation[0] * (a[0] - b[0]),
        }
    }

    /// Oriented lexicographic comparison: the first differing coordinate decides.
    pub fn lexicographic_cmp(&self, a: &[f64], b: &[f64]) -> Ordering {
        for ((&u, &v), &s) in a.iter().zip(b).zip(&self.orientation) {
            let (u, v) = (s * u, s * v);
            if u > v {
                return Ordering::Greater;
            }
            if u < v {
                return Ordering::Less;
            }
        }
        Ordering::Equal
    }

    fn check_dims(&self, y: &[f64], y_ref: &[f64]) -> Result<()> {
        for len in [y.len(), y_ref.len()] {
            if len != self.dim() {
                return Err(CpteError::DimensionMismatch {
                    expected: self.dim(),
                    got: len,
                });
            }
        }
        Ok(())
    }
}

/// `1{y > y'}` on univariate outcomes.
pub fn eval_pns(w: &Preference, y: &[f64], y_ref: &[f64]) -> Result<f64> {
    expect_kind(w, PreferenceKind::PnsIndicator)?;
    w.eval(y, y_ref)
}

/// Tie-aware lexicographic win.
pub fn eval_lexico_win(w: &Preference, y: &[f64], y_ref: &[f64]) -> Result<f64> {
    expect_kind(w, PreferenceKind::LexicographicWin)?;
    w.eval(y, y_ref)
}

/// Risk difference `y - y'` on univariate outcomes.
pub fn eval_risk_difference(y: &[f64], y_ref: &[f64]) -> Result<f64> {
    Preference::risk_difference().eval(y, y_ref)
}

fn expect_kind(w: &Preference, kind: PreferenceKind) -> Result<()> {
    if w.kind() == kind {
        Ok(())
    } else {
        Err(CpteError::InvalidInput(format!(
            "expected a {kind:?} preference, got {:?}",
            w.kind()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pns_examples() {
        let w = Preference::pns();
        assert_eq!(eval_pns(&w, &[1.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(eval_pns(&w, &[0.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(eval_pns(&w, &[0.7], &[0.7]).unwrap(), 0.0);
        assert!(eval_pns(&w, &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn lexico_examples() {
        let w = Preference::lexicographic(2);
        assert_eq!(eval_lexico_win(&w, &[1.0, 0.0], &[0.0, 5.0]).unwrap(), 1.0);
        assert_eq!(eval_lexico_win(&w, &[1.0, 3.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert_eq!(eval_lexico_win(&w, &[1.0, 3.0], &[1.0, 3.0]).unwrap(), 0.5);
        assert!(eval_lexico_win(&w, &[1.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(Preference::pns().reverse().eval(&[1.0], &[0.0]).unwrap(), 0.0);
        let lex = Preference::lexicographic(2).reverse();
        assert_eq!(lex.eval(&[1.0, 3.0], &[1.0, 3.0]).unwrap(), 0.5);
    }

    #[test]
    fn risk_difference_examples() {
        let rd = eval_risk_difference(&[0.4], &[0.45]).unwrap();
        assert!((rd + 0.05).abs() < 1e-15);
        assert_eq!(eval_risk_difference(&[2.5], &[2.5]).unwrap(), 0.0);
        assert_eq!(eval_risk_difference(&[3.0], &[1.0]).unwrap(), 2.0);
        assert!(!Preference::risk_difference().is_bounded());
        assert!(Preference::risk_difference().with_assumed_bound().is_bounded());
    }

    #[test]
    fn orientation_flips_coordinates() {
        let w = Preference::new(PreferenceKind::LexicographicWin, vec![-1.0, 1.0]).unwrap();
        // lower is better on the first coordinate
        assert_eq!(w.eval(&[0.0, 0.0], &[1.0, 9.0]).unwrap(), 1.0);
        assert!(Preference::new(PreferenceKind::PnsIndicator, vec![0.5]).is_err());
    }

    fn outcome_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        // small integer lattice so ties actually occur
        (1usize..=3).prop_flat_map(|d| {
            (
                prop::collection::vec((-2i32..=2).prop_map(f64::from), d),
                prop::collection::vec((-2i32..=2).prop_map(f64::from), d),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn lexico_win_is_complementary((a, b) in outcome_pair()) {
            let w = Preference::lexicographic(a.len());
            let s = w.eval(&a, &b).unwrap() + w.eval(&b, &a).unwrap();
            prop_assert_eq!(s, 1.0);
            // exactly one of ≻, ≺, ∼
            let ord = w.lexicographic_cmp(&a, &b);
            prop_assert_eq!(ord, w.lexicographic_cmp(&b, &a).reverse());
            prop_assert_eq!(ord == Ordering::Equal, a == b);
        }

        #[test]
        fn pns_is_bounded_and_exclusive(a in -3.0f64..3.0, b in -3.0f64..3.0, tie in any::<bool>()) {
            let b = if tie { a } else { b };
            let w = Preference::pns();
            let (u, v) = (w.eval(&[a], &[b]).unwrap(), w.eval(&[b], &[a]).unwrap());
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert_eq!(u * v, 0.0);
            prop_assert_eq!(u + v, if a == b { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn reverse_is_an_involution() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for w in [Preference::pns(), Preference::lexicographic(2)] {
            let ww = w.reverse().reverse();
            assert_eq!(ww, w);
            for _ in 0..1000 {
                let a: Vec<f64> = (0..w.dim()).map(|_| rng.random_range(0..3) as f64).collect();
                let b: Vec<f64> = (0..w.dim()).map(|_| rng.random_range(0..3) as f64).collect();
                assert_eq!(ww.eval(&a, &b).unwrap(), w.eval(&a, &b).unwrap());
            }
        }
    }
}
