//! Fractional-error characterization of a learned model on the training,
//! interpolation and extrapolation sets.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{DatasetBundle, SampledDataset};
use crate::gravity::ZonalGravityField;
use crate::{Error, Regressor, Result, Vec3};

/// Errors above this are treated as numerically meaningless and excluded.
pub const EPSILON_CEILING: f64 = 1e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetLabel {
    Train,
    InterpTest,
    ExtrapTest,
}

impl SetLabel {
    pub const ALL: [SetLabel; 3] = [SetLabel::Train, SetLabel::InterpTest, SetLabel::ExtrapTest];

    pub fn as_str(&self) -> &'static str {
        match self {
            SetLabel::Train => "train",
            SetLabel::InterpTest => "interp_test",
            SetLabel::ExtrapTest => "extrap_test",
        }
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `||a_true - a_pred|| / ||a_true||`; `None` when the true acceleration is zero.
pub fn fractional_error(a_true: &Vec3, a_pred: &Vec3) -> Option<f64> {
    let denom = a_true.norm();
    if denom > 0.0 {
        Some((a_true - a_pred).norm() / denom)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalErrorSeries {
    pub label: SetLabel,
    pub epsilon: Vec<f64>,
    pub radius: Vec<f64>,
    pub excluded: usize,
}

/// Predicts at the truth inputs and compares against the truth targets.
pub fn evaluate_set<R: Regressor + ?Sized>(model: &R, ds: &SampledDataset, label: SetLabel) -> FractionalErrorSeries {
    let pred = model.predict(&ds.truth_inputs);
    let mut series = FractionalErrorSeries {
        label,
        epsilon: Vec::with_capacity(ds.len()),
        radius: Vec::with_capacity(ds.len()),
        excluded: 0,
    };
    for ((x, t), p) in ds.truth_inputs.iter().zip(&ds.truth_targets).zip(&pred) {
        match fractional_error(t, p) {
            Some(e) if e.is_finite() && e <= EPSILON_CEILING => {
                series.epsilon.push(e);
                series.radius.push(x.norm());
            }
            _ => series.excluded += 1,
        }
    }
    if series.excluded > 0 {
        log::warn!("{label}: {} samples excluded with non-finite error", series.excluded);
    }
    series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub excluded_count: usize,
}

/// Quantile of sorted data with linear interpolation between ranks.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize_values(values: &[f64], excluded: usize) -> Result<ErrorSummary> {
    if values.is_empty() {
        return Err(Error::EmptySet("cannot summarize an empty error series".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(ErrorSummary {
        median: quantile_sorted(&sorted, 0.5),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        count: sorted.len(),
        excluded_count: excluded,
    })
}

pub fn summarize(series: &FractionalErrorSeries) -> Result<ErrorSummary> {
    summarize_values(&series.epsilon, series.excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub excluded: usize,
}

/// Least squares of `log10(test)` on `log10(train)`. Pairs with a
/// nonpositive or non-finite value are dropped and counted.
pub fn loglog_fit(train_errors: &[f64], test_errors: &[f64]) -> Result<CorrelationFit> {
    if train_errors.len() != test_errors.len() {
        return Err(Error::Config("loglog_fit needs equal-length lists".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0;
    for (&a, &b) in train_errors.iter().zip(test_errors) {
        if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
            xs.push(a.log10());
            ys.push(b.log10());
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("loglog_fit: {excluded} pairs with nonpositive error excluded");
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::EmptySet(format!("loglog_fit needs at least 3 valid pairs, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Domain("loglog_fit: training errors are all identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(CorrelationFit {
        slope,
        intercept,
        r_squared,
        n_points: n,
        excluded,
    })
}

/// Difference of log10 medians between two sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gap {
    Finite(f64),
    /// One median is zero and the other is not.
    Infinite,
}

impl Gap {
    pub fn between(reference_median: f64, other_median: f64) -> Self {
        match (reference_median > 0.0, other_median > 0.0) {
            (true, true) => Gap::Finite(other_median.log10() - reference_median.log10()),
            (false, false) => Gap::Finite(0.0),
            _ => Gap::Infinite,
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Gap::Finite(v) => *v,
            Gap::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Gap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gap::Finite(v) => s.serialize_f64(*v),
            Gap::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Gap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Gap::Finite(v)),
            Raw::Str(s) if s == "inf" => Ok(Gap::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown gap sentinel {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetReport {
    pub label: SetLabel,
    pub summary: ErrorSummary,
    pub dataset_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub sets: Vec<SetReport>,
    pub safety_gap: Gap,
    pub robustness_gap: Gap,
    pub instability_flag: bool,
    /// Per-run aggregation statistic used in correlation fits.
    pub run_statistic: String,
    #[serde(skip)]
    pub series: Vec<FractionalErrorSeries>,
}

impl CharacterizationReport {
    pub fn set(&self, label: SetLabel) -> &SetReport {
        self.sets.iter().find(|s| s.label == label).expect("all three sets present")
    }

    pub fn median(&self, label: SetLabel) -> f64 {
        self.set(label).summary.median
    }

    /// `set,label,radius,epsilon` rows for every evaluated sample.
    pub fn samples_csv(&self, run_label: &str) -> String {
        let mut out = String::from("set,label,radius,epsilon\n");
        for s in &self.series {
            for (r, e) in s.radius.iter().zip(&s.epsilon) {
                out.push_str(&format!("{},{},{},{}\n", s.label, run_label, r, e));
            }
        }
        out
    }
}

/// Evaluates all three sets of a bundle and computes the safety and
/// robustness gaps relative to the training error.
pub fn characterize<R: Regressor + ?Sized>(model: &R, bundle: &DatasetBundle) -> Result<CharacterizationReport> {
    let mut sets = Vec::with_capacity(3);
    let mut series = Vec::with_capacity(3);
    for (label, ds) in [
        (SetLabel::Train, &bundle.train),
        (SetLabel::InterpTest, &bundle.interp_test),
        (SetLabel::ExtrapTest, &bundle.extrap_test),
    ] {
        let s = evaluate_set(model, ds, label);
        sets.push(SetReport {
            label,
            summary: summarize(&s)?,
            dataset_size: ds.len(),
        });
        series.push(s);
    }
    let train = sets[0].summary.median;
    Ok(CharacterizationReport {
        safety_gap: Gap::between(train, sets[1].summary.median),
        robustness_gap: Gap::between(train, sets[2].summary.median),
        sets,
        instability_flag: model.unstable(),
        run_statistic: "median".into(),
        series,
    })
}

/// The truth field wrapped as a regressor; predicts scaled accelerations.
#[derive(Debug, Clone)]
pub struct TruthModel {
    pub field: ZonalGravityField,
    pub accel_scale: f64,
}

impl Regressor for TruthModel {
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3> {
        positions
            .iter()
            .map(|x| {
                self.field
                    .acceleration(x)
                    .map(|a| a * self.accel_scale)
                    .unwrap_or_else(|_| Vec3::repeat(f64::NAN))
            })
            .collect()
    }
}

/// Predicts zero everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroModel;

impl Regressor for ZeroModel {
    fn predict(&self, positions: &[Vec3]) -> Vec<Vec3> {
        vec![Vec3::zeros(); positions.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fractional_error_examples() {
        let e = fractional_error(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(1.01, 0.0, 0.0)).unwrap();
        assert_relative_eq!(e, 0.01, max_relative = 1e-12);
        let a = Vec3::new(0.3, -2.0, 5.0);
        assert_eq!(fractional_error(&a, &a), Some(0.0));
        assert_eq!(fractional_error(&Vec3::new(3.0, 4.0, 0.0), &Vec3::zeros()), Some(1.0));
        assert_eq!(fractional_error(&Vec3::zeros(), &a), None);
    }

    #[test]
    fn summary_examples() {
        let s = summarize_values(&[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(s.median, 2.0);
        let s = summarize_values(&[1.0; 4], 0).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.0, 1.0, 1.0));
        let s = summarize_values(&[0.1, 10.0], 0).unwrap();
        assert_relative_eq!(s.median, 5.05, max_relative = 1e-15);
        assert!(matches!(summarize_values(&[], 0), Err(Error::EmptySet(_))));
    }

    #[test]
    fn fit_examples() {
        let train = [1e-3, 3e-3, 1e-2, 5e-2, 0.2];
        let f = loglog_fit(&train, &train).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 0.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
        let test: Vec<f64> = train.iter().map(|t| 100.0 * t).collect();
        let f = loglog_fit(&train, &test).unwrap();
        assert_relative_eq!(f.slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_excludes_nonpositive() {
        let f = loglog_fit(&[1e-3, 0.0, 1e-2, 1e-1, 1.0], &[1e-3, 1.0, 1e-2, 1e-1, -1.0]).unwrap();
        assert_eq!(f.n_points, 3);
        assert_eq!(f.excluded, 2);
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gap_conventions() {
        assert_eq!(Gap::between(0.0, 0.0), Gap::Finite(0.0));
        assert_eq!(Gap::between(0.0, 1.0), Gap::Infinite);
        assert_relative_eq!(Gap::between(1e-3, 1e-1).value(), 2.0, epsilon = 1e-12);
        assert_eq!(serde_json::to_string(&Gap::Infinite).unwrap(), "\"inf\"");
        let g: Gap = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(g, Gap::Infinite);
    }
}
