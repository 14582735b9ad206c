//! Rank correlation between seat counts and external attribution values, and
//! the sign of each feature's correlation with the target.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::trees::Dataset;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("at least 3 points are required, got {0}")]
    TooFewPoints(usize),
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("one input is constant; correlation is undefined")]
    ZeroVariance,
    #[error("correlation coefficient {0} is outside [-1, 1]")]
    InvalidCoefficient(f64),
    #[error("feature {0:?} is constant")]
    ConstantFeature(String),
    #[error("feature index {0} is out of range")]
    UnknownFeature(usize),
}

/// Below this magnitude a correlation is reported as zero.
pub const ZERO_CORRELATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(coefficient: f64) -> Self {
        if coefficient.abs() < ZERO_CORRELATION || coefficient.is_nan() {
            Sign::Zero
        } else if coefficient > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::Zero => "zero",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A correlation coefficient together with its sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Direction {
    pub sign: Sign,
    pub coefficient: f64,
}

impl Direction {
    pub fn from_coefficient(coefficient: f64) -> Self {
        Self {
            sign: Sign::of(coefficient),
            coefficient,
        }
    }

    pub fn zero() -> Self {
        Self::from_coefficient(0.0)
    }
}

pub type DirectionMap = BTreeMap<String, Direction>;

/// 1-based ranks, ties sharing the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Two-sided p-value of `rho` from `t = rho * sqrt((n - 2) / (1 - rho^2))`
/// against Student's t with `n - 2` degrees of freedom.
pub fn spearman_p_value(rho: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFewPoints(n));
    }
    if !(-1.0..=1.0).contains(&rho) {
        return Err(StatsError::InvalidCoefficient(rho));
    }
    if rho.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    Ok(student_t_two_sided(t, df))
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    regularized_incomplete_beta(x, df / 2.0, 0.5).clamp(0.0, 1.0)
}

/// Regularized incomplete beta `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x < (a + 1) / (a + b + 2).
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let odd = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Seat counts set against an external attribution vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub entities: Vec<String>,
    pub seats: Vec<u64>,
    pub external_values: Vec<f64>,
    pub spearman_rho: f64,
    pub p_value: f64,
    pub n: usize,
}

impl ComparisonReport {
    pub fn new(
        entities: Vec<String>,
        seats: Vec<u64>,
        external_values: Vec<f64>,
    ) -> Result<Self, StatsError> {
        if entities.len() != seats.len() {
            return Err(StatsError::LengthMismatch(entities.len(), seats.len()));
        }
        let seat_values: Vec<f64> = seats.iter().map(|&s| s as f64).collect();
        let rho = spearman_rho(&seat_values, &external_values)?;
        let p_value = spearman_p_value(rho, seats.len())?;
        Ok(Self {
            n: entities.len(),
            entities,
            seats,
            external_values,
            spearman_rho: rho,
            p_value,
        })
    }
}

/// Point-biserial correlation between one feature column and the binary target.
pub fn feature_direction(data: &Dataset, feature: usize) -> Result<Direction, StatsError> {
    if feature >= data.n_features() {
        return Err(StatsError::UnknownFeature(feature));
    }
    let column = data.column(feature);
    let target: Vec<f64> = data.target().iter().map(|&t| f64::from(t)).collect();
    match pearson(&column, &target) {
        Ok(r) => Ok(Direction::from_coefficient(r)),
        Err(StatsError::ZeroVariance) => Err(StatsError::ConstantFeature(
            data.feature_names()[feature].clone(),
        )),
        Err(e) => Err(e),
    }
}

/// Direction of every feature; constant features (or a constant target) are
/// reported as zero with a warning.
pub fn dataset_directions(data: &Dataset) -> DirectionMap {
    (0..data.n_features())
        .map(|f| {
            let name = data.feature_names()[f].clone();
            let direction = feature_direction(data, f).unwrap_or_else(|e| {
                log::warn!("direction of {name:?} set to zero: {e}");
                Direction::zero()
            });
            (name, direction)
        })
        .collect()
}

/// Importance-weighted sum of the members' coefficients, as
/// `(coefficient, importance)` pairs.
pub fn alliance_direction(members: &[(f64, f64)]) -> Direction {
    let weighted: f64 = members.iter().map(|(r, w)| r * w).sum();
    Direction::from_coefficient(weighted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Student-t density integrated by composite Simpson over `[|t|, |t| + span]`
    /// in the variable `u = atan(x)`, which maps the infinite tail to a finite range.
    fn simpson_t_tail(t: f64, df: f64) -> f64 {
        let c = (libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0)).exp()
            / (df * std::f64::consts::PI).sqrt();
        let density = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
        let (lo, hi) = (t.abs().atan(), std::f64::consts::FRAC_PI_2);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let f = |u: f64| {
            if u >= std::f64::consts::FRAC_PI_2 {
                // Limit of density(x) * (1 + x^2) as x -> infinity.
                return if df == 1.0 { c } else { 0.0 };
            }
            let x = u.tan();
            density(x) * (1.0 + x * x)
        };
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let u = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
        }
        2.0 * s * h / 3.0
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 20.0, 5.0]),
            vec![2.0, 3.5, 3.5, 1.0]
        );
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 5.0, 9.0];
        assert!((spearman_rho(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            spearman_rho(&x, &x[..3]),
            Err(StatsError::LengthMismatch(4, 3))
        );
        assert_eq!(
            spearman_rho(&x[..2], &x[..2]),
            Err(StatsError::TooFewPoints(2))
        );
        assert_eq!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ZeroVariance)
        );
    }

    #[test]
    fn p_value_matches_quadrature() {
        for &(t, df) in &[
            (4.2143, 8.0),
            (0.7559, 3.0),
            (1.0, 1.0),
            (2.5, 20.0),
            (0.1, 5.0),
        ] {
            let beta = student_t_two_sided(t, df);
            let quad = simpson_t_tail(t, df);
            assert!(
                (beta - quad).abs() < 1e-9,
                "t={t} df={df}: {beta} vs {quad}"
            );
        }
    }

    #[test]
    fn p_value_edges() {
        assert!((spearman_p_value(0.0, 10).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spearman_p_value(1.0, 10).unwrap(), 0.0);
        assert_eq!(spearman_p_value(-1.0, 4).unwrap(), 0.0);
        assert_eq!(spearman_p_value(0.5, 2), Err(StatsError::TooFewPoints(2)));
        assert_eq!(
            spearman_p_value(1.5, 5),
            Err(StatsError::InvalidCoefficient(1.5))
        );
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b.
        for &x in &[0.01, 0.3, 0.5, 0.77, 0.99] {
            assert!((regularized_incomplete_beta(x, 1.0, 1.0) - x).abs() < 1e-14);
            assert!((regularized_incomplete_beta(x, 3.0, 1.0) - x.powi(3)).abs() < 1e-14);
            let expected = 1.0 - (1.0 - x).powi(4);
            assert!((regularized_incomplete_beta(x, 1.0, 4.0) - expected).abs() < 1e-14);
        }
    }

    fn dataset(column: Vec<f64>, target: Vec<u8>) -> Dataset {
        Dataset::new(
            vec!["f".into()],
            column.into_iter().map(|v| vec![v]).collect(),
            target,
        )
        .unwrap()
    }

    #[test]
    fn feature_direction_examples() {
        let t = vec![0, 1, 1, 0, 1];
        let same = dataset(t.iter().map(|&v| f64::from(v)).collect(), t.clone());
        assert_eq!(feature_direction(&same, 0).unwrap().sign, Sign::Positive);
        let flipped = dataset(t.iter().map(|&v| 1.0 - f64::from(v)).collect(), t);
        assert_eq!(feature_direction(&flipped, 0).unwrap().sign, Sign::Negative);

        // r = 1 / sqrt(5) by hand: cov = 0.25, sd_x = sqrt(1.25), sd_y = 0.5.
        let d = feature_direction(&dataset(vec![1.0, 2.0, 3.0, 4.0], vec![0, 1, 0, 1]), 0).unwrap();
        assert_eq!(d.sign, Sign::Positive);
        assert!((d.coefficient - 1.0 / 5f64.sqrt()).abs() < 1e-12);

        let constant = dataset(vec![2.0, 2.0, 2.0], vec![0, 1, 0]);
        assert_eq!(
            feature_direction(&constant, 0),
            Err(StatsError::ConstantFeature("f".into()))
        );
        assert_eq!(dataset_directions(&constant)["f"].sign, Sign::Zero);
    }

    #[test]
    fn alliance_direction_examples() {
        assert_eq!(alliance_direction(&[(-0.3, 2.0)]).sign, Sign::Negative);
        assert_eq!(
            alliance_direction(&[(0.5, 1.0), (-0.5, 1.0)]).sign,
            Sign::Zero
        );
        let d = alliance_direction(&[(0.8, 0.9), (-0.1, 0.1)]);
        assert_eq!(d.sign, Sign::Positive);
        assert!((d.coefficient - 0.71).abs() < 1e-12);
    }

    fn distinct_vec() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::hash_set(-1000i32..1000, 3..15)
            .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())
            .prop_shuffle()
    }

    proptest! {
        #[test]
        fn closed_form_agrees_without_ties((x, y) in distinct_vec().prop_flat_map(|x| {
            let n = x.len();
            (Just(x), prop::collection::hash_set(-1000i32..1000, n..=n)
                .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())
                .prop_shuffle())
        })) {
            let n = x.len() as f64;
            let (rx, ry) = (average_ranks(&x), average_ranks(&y));
            let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
            let closed = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
            let rho = spearman_rho(&x, &y).unwrap();
            prop_assert!((rho - closed).abs() < 1e-12);
            prop_assert!((rho - spearman_rho(&y, &x).unwrap()).abs() < 1e-15);
            let neg: Vec<f64> = x.iter().map(|v| -v.powi(3)).collect();
            prop_assert!((spearman_rho(&neg, &y).unwrap() + rho).abs() < 1e-12);
        }

        #[test]
        fn monotone_transform_invariance(x in distinct_vec(), y in prop::collection::vec(-50.0f64..50.0, 15)) {
            let y = &y[..x.len()];
            if let Ok(rho) = spearman_rho(&x, y) {
                let tx: Vec<f64> = x.iter().map(|v| (v / 100.0).exp() + 3.0).collect();
                prop_assert!((spearman_rho(&tx, y).unwrap() - rho).abs() < 1e-12);
            }
        }

        #[test]
        fn p_value_decreases_with_magnitude(a in 0.0f64..0.999, b in 0.0f64..0.999, n in 3usize..40) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let p_lo = spearman_p_value(lo, n).unwrap();
            let p_hi = spearman_p_value(hi, n).unwrap();
            prop_assert!(p_hi <= p_lo + 1e-12);
            prop_assert!((spearman_p_value(-hi, n).unwrap() - p_hi).abs() < 1e-12);
        }
    }
}
