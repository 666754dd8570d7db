//! Dataset quality grades and the quality-adjusted reserve price.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ahp::WeightVector;
use crate::error::{Error, Result};

/// Default quality-only weights for (accuracy, completeness, consistency,
/// timeliness); the rounded AHP result for the quality judgments.
pub const DEFAULT_QUALITY_WEIGHTS: [f64; 4] = [0.55, 0.13, 0.26, 0.06];

/// Five-level grade with its fixed score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityLevel {
    Unsatisfactory,
    Fair,
    Satisfactory,
    VeryGood,
    Excellent,
}

impl QualityLevel {
    pub const ALL: [QualityLevel; 5] = [
        QualityLevel::Excellent,
        QualityLevel::VeryGood,
        QualityLevel::Satisfactory,
        QualityLevel::Fair,
        QualityLevel::Unsatisfactory,
    ];

    pub fn score(self) -> f64 {
        match self {
            QualityLevel::Excellent => 1.2,
            QualityLevel::VeryGood => 1.0,
            QualityLevel::Satisfactory => 0.6,
            QualityLevel::Fair => 0.4,
            QualityLevel::Unsatisfactory => 0.2,
        }
    }

    /// Exact inverse of [`score`](Self::score); any other value is rejected.
    pub fn from_score(score: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.score() == score)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "quality score {score} is not one of 1.2, 1.0, 0.6, 0.4, 0.2"
                ))
            })
    }

    pub fn label(self) -> &'static str {
        match self {
            QualityLevel::Excellent => "Excellent",
            QualityLevel::VeryGood => "VeryGood",
            QualityLevel::Satisfactory => "Satisfactory",
            QualityLevel::Fair => "Fair",
            QualityLevel::Unsatisfactory => "Unsatisfactory",
        }
    }
}

impl fmt::Display for QualityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for QualityLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        grade_from_label(s)
    }
}

/// Case-insensitive grade lookup. Spaces, dashes and underscores are ignored,
/// so "Very Good" and "very_good" both parse.
pub fn grade_from_label(label: &str) -> Result<QualityLevel> {
    let key: String = label
        .chars()
        .filter(|c| !matches!(c, ' ' | '-' | '_'))
        .flat_map(char::to_lowercase)
        .collect();
    QualityLevel::ALL
        .into_iter()
        .find(|l| l.label().to_lowercase() == key)
        .ok_or_else(|| {
            Error::Parse(format!(
                "unknown quality grade `{label}`; expected one of Excellent, VeryGood, Satisfactory, Fair, Unsatisfactory"
            ))
        })
}

/// Grades for the four quality indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QualityVector {
    pub accuracy: QualityLevel,
    pub completeness: QualityLevel,
    pub consistency: QualityLevel,
    pub timeliness: QualityLevel,
}

impl QualityVector {
    pub fn new(
        accuracy: QualityLevel,
        completeness: QualityLevel,
        consistency: QualityLevel,
        timeliness: QualityLevel,
    ) -> Self {
        Self {
            accuracy,
            completeness,
            consistency,
            timeliness,
        }
    }

    pub fn uniform(level: QualityLevel) -> Self {
        Self::new(level, level, level, level)
    }

    pub fn from_levels(levels: [QualityLevel; 4]) -> Self {
        Self::new(levels[0], levels[1], levels[2], levels[3])
    }

    /// Scores in indicator order (accuracy, completeness, consistency, timeliness).
    pub fn scores(&self) -> [f64; 4] {
        self.levels().map(QualityLevel::score)
    }

    pub fn levels(&self) -> [QualityLevel; 4] {
        [self.accuracy, self.completeness, self.consistency, self.timeliness]
    }
}

impl FromStr for QualityVector {
    type Err = Error;

    /// Four comma-separated grade labels or admitted scores.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 comma-separated quality grades, got {}",
                parts.len()
            )));
        }
        let mut levels = [QualityLevel::Unsatisfactory; 4];
        for (slot, part) in levels.iter_mut().zip(parts) {
            *slot = match part.parse::<f64>() {
                Ok(score) => QualityLevel::from_score(score)?,
                Err(_) => grade_from_label(part)?,
            };
        }
        Ok(Self::from_levels(levels))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReservePrice {
    pub v1: f64,
    pub v2: f64,
    pub r0: f64,
    pub rs: f64,
}

pub fn default_quality_weights() -> WeightVector {
    WeightVector::new(DEFAULT_QUALITY_WEIGHTS.to_vec()).expect("defaults sum to one")
}

/// Weighted composite score `Σ W_i·C_i`, in `[0.2, 1.2]`.
pub fn composite_score(q: &QualityVector, w: &WeightVector) -> Result<f64> {
    if w.len() != 4 {
        return Err(Error::validation(format!(
            "quality weights need 4 entries, got {}",
            w.len()
        )));
    }
    Ok(q.scores().iter().zip(w.as_slice()).map(|(c, w)| c * w).sum())
}

/// `r0 = v1 + v2`, `rs = r0 · I_D`.
pub fn seller_reserve(v1: f64, v2: f64, q: &QualityVector, w: &WeightVector) -> Result<ReservePrice> {
    if !(v1.is_finite() && v1 >= 0.0) || !(v2.is_finite() && v2 >= 0.0) {
        return Err(Error::validation(format!(
            "cost components must be nonnegative (v1 = {v1}, v2 = {v2})"
        )));
    }
    let r0 = v1 + v2;
    let rs = r0 * composite_score(q, w)?;
    Ok(ReservePrice { v1, v2, r0, rs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use QualityLevel::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    #[test]
    fn composite_examples() {
        let w = default_quality_weights();
        assert!(close(composite_score(&QualityVector::uniform(VeryGood), &w).unwrap(), 1.0));
        let q = QualityVector::new(Excellent, VeryGood, Satisfactory, Fair);
        // 0.66 + 0.13 + 0.156 + 0.024
        assert!(close(composite_score(&q, &w).unwrap(), 0.97));
        let eq = WeightVector::uniform(4);
        assert!(close(composite_score(&QualityVector::uniform(Unsatisfactory), &eq).unwrap(), 0.2));
    }

    #[test]
    fn composite_rejects_wrong_arity() {
        let w = WeightVector::uniform(5);
        assert!(composite_score(&QualityVector::uniform(Fair), &w).is_err());
    }

    #[test]
    fn reserve_examples() {
        let w = default_quality_weights();
        let r = seller_reserve(200.0, 150.0, &QualityVector::uniform(VeryGood), &w).unwrap();
        assert!(close(r.r0, 350.0) && close(r.rs, 350.0));
        let q = QualityVector::new(Excellent, VeryGood, Satisfactory, Fair);
        assert!(close(seller_reserve(150.0, 150.0, &q, &w).unwrap().rs, 291.0));
        assert_eq!(seller_reserve(0.0, 0.0, &q, &w).unwrap().rs, 0.0);
        assert!(seller_reserve(-1.0, 10.0, &q, &w).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(grade_from_label("Excellent").unwrap().score(), 1.2);
        assert_eq!(grade_from_label("unsatisfactory").unwrap().score(), 0.2);
        assert_eq!(grade_from_label("Very Good").unwrap(), VeryGood);
        let err = grade_from_label("Good").unwrap_err().to_string();
        assert!(err.contains("Satisfactory"), "{err}");
    }

    #[test]
    fn quality_vector_from_text() {
        let q: QualityVector = "excellent, 1.0, 0.6, fair".parse().unwrap();
        assert_eq!(q, QualityVector::new(Excellent, VeryGood, Satisfactory, Fair));
        assert!("0.7, 1, 1, 1".parse::<QualityVector>().is_err());
        assert!("1, 1, 1".parse::<QualityVector>().is_err());
    }

    fn level() -> impl Strategy<Value = QualityLevel> {
        prop::sample::select(QualityLevel::ALL.to_vec())
    }

    fn positive_weights() -> impl Strategy<Value = WeightVector> {
        prop::collection::vec(0.01f64..1.0, 4).prop_map(|w| WeightVector::normalized(&w).unwrap())
    }

    proptest! {
        #[test]
        fn composite_is_bounded(levels in prop::array::uniform4(level()), w in positive_weights()) {
            let s = composite_score(&QualityVector::from_levels(levels), &w).unwrap();
            prop_assert!((0.2 - 1e-12..=1.2 + 1e-12).contains(&s));
        }

        #[test]
        fn raising_a_grade_raises_the_score(
            levels in prop::array::uniform4(level()),
            idx in 0usize..4,
            w in positive_weights(),
            v1 in 1.0f64..500.0,
        ) {
            prop_assume!(levels[idx] != Excellent);
            let mut better = levels;
            better[idx] = QualityLevel::ALL[QualityLevel::ALL.iter().position(|l| *l == levels[idx]).unwrap() - 1];
            let lo = seller_reserve(v1, 0.0, &QualityVector::from_levels(levels), &w).unwrap();
            let hi = seller_reserve(v1, 0.0, &QualityVector::from_levels(better), &w).unwrap();
            prop_assert!(hi.rs > lo.rs);
        }

        #[test]
        fn reserve_scales_linearly(levels in prop::array::uniform4(level()), v1 in 0.0f64..500.0, v2 in 0.0f64..500.0, k in 0.1f64..10.0) {
            let w = default_quality_weights();
            let q = QualityVector::from_levels(levels);
            let a = seller_reserve(v1, v2, &q, &w).unwrap().rs;
            let b = seller_reserve(k * v1, k * v2, &q, &w).unwrap().rs;
            prop_assert!((b - k * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
