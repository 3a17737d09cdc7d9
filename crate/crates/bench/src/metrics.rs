//! Per-run metrics and their aggregation across replications.

use fulladagrad::models::logistic_predict;
use fulladagrad::{LabeledSample64, SymMatrix64, Vector64};

use crate::error::Result;

/// `||theta - theta*||^2`.
pub fn metric_theta_error(theta: &Vector64, theta_star: &Vector64) -> Result<f64> {
    Ok(theta.sub(theta_star)?.norm_sq())
}

/// `||A - target||_F`, with `target` usually `Sigma^{-1/2}`.
pub fn metric_precond_error(a: &SymMatrix64, target: &SymMatrix64) -> Result<f64> {
    Ok(fulladagrad::linalg::frobenius_distance(a, target)?)
}

/// Fraction of samples whose thresholded prediction matches the label.
/// An empty set scores 0.
pub fn metric_accuracy(theta: &Vector64, samples: &[LabeledSample64]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for s in samples {
        if f64::from(logistic_predict(theta, &s.x)?) == s.y {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    /// Error of the last iterate `theta_t`.
    MseTheta,
    /// Error of the averaged iterate `theta_{t,tau}`.
    MseThetaAvg,
    /// Frobenius error of the averaged preconditioner.
    PrecondErr,
    /// Frobenius error of the current preconditioner.
    PrecondErrCurrent,
    TrainAcc,
    TestAcc,
    Skipped,
    /// Stepping time in nanoseconds, excluding metric evaluation.
    WallTimeNs,
}

pub const METRIC_COUNT: usize = 8;

impl Metric {
    pub const ALL: [Metric; METRIC_COUNT] = [
        Metric::MseTheta,
        Metric::MseThetaAvg,
        Metric::PrecondErr,
        Metric::PrecondErrCurrent,
        Metric::TrainAcc,
        Metric::TestAcc,
        Metric::Skipped,
        Metric::WallTimeNs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::MseTheta => "mse_theta",
            Metric::MseThetaAvg => "mse_theta_avg",
            Metric::PrecondErr => "precond_err",
            Metric::PrecondErrCurrent => "precond_err_current",
            Metric::TrainAcc => "train_acc",
            Metric::TestAcc => "test_acc",
            Metric::Skipped => "skipped",
            Metric::WallTimeNs => "wall_time_ns",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

pub type MetricValues = [Option<f64>; METRIC_COUNT];

/// Metrics recorded at one milestone of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub samples_seen: u64,
    pub steps: u64,
    pub values: MetricValues,
}

impl MetricRow {
    pub fn new(samples_seen: u64, steps: u64) -> Self {
        Self {
            samples_seen,
            steps,
            values: [None; METRIC_COUNT],
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        self.values[m.index()]
    }

    pub fn set(&mut self, m: Metric, v: f64) {
        self.values[m.index()] = Some(v);
    }
}

/// Metrics of one optimizer in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub label: String,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub samples_seen: u64,
    pub steps: u64,
    pub mean: MetricValues,
    pub median: MetricValues,
}

impl AggregateRow {
    pub fn mean(&self, m: Metric) -> Option<f64> {
        self.mean[m.index()]
    }

    pub fn median(&self, m: Metric) -> Option<f64> {
        self.median[m.index()]
    }
}

/// Pointwise mean and median of one optimizer over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub label: String,
    pub replications: usize,
    pub rows: Vec<AggregateRow>,
}

impl Aggregate {
    pub fn last(&self) -> Option<&AggregateRow> {
        self.rows.last()
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Aggregates runs of the same optimizer. All runs must share milestones;
/// a metric is aggregated only if every run recorded it.
pub fn aggregate(label: &str, runs: &[RunRecord]) -> Aggregate {
    let rows = match runs.first() {
        None => Vec::new(),
        Some(first) => (0..first.rows.len())
            .map(|i| {
                let base = &first.rows[i];
                let mut row = AggregateRow {
                    samples_seen: base.samples_seen,
                    steps: base.steps,
                    mean: [None; METRIC_COUNT],
                    median: [None; METRIC_COUNT],
                };
                for m in Metric::ALL {
                    let xs: Option<Vec<f64>> = runs
                        .iter()
                        .map(|r| r.rows.get(i).and_then(|row| row.get(m)))
                        .collect();
                    if let Some(xs) = xs {
                        row.mean[m.index()] = Some(mean(&xs));
                        row.median[m.index()] = Some(median(&xs));
                    }
                }
                row
            })
            .collect(),
    };
    Aggregate {
        label: label.to_owned(),
        replications: runs.len(),
        rows,
    }
}

/// Steps at which metrics are recorded: 0, then roughly every `factor`-fold
/// increase, always ending at `total`.
pub fn milestone_steps(total: u64, factor: f64) -> Vec<u64> {
    let mut out = vec![0];
    let mut s = 1u64;
    while s < total {
        out.push(s);
        s = ((s as f64 * factor).ceil() as u64).max(s + 1);
    }
    if total > 0 {
        out.push(total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use fulladagrad::Vector64;

    fn run(values: &[f64]) -> RunRecord {
        RunRecord {
            label: "x".into(),
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let mut r = MetricRow::new(i as u64, i as u64);
                    r.set(Metric::MseTheta, v);
                    r
                })
                .collect(),
        }
    }

    #[test]
    fn theta_error_examples() {
        let a = Vector64::from_vec(vec![1.0, 2.0]);
        assert_eq!(metric_theta_error(&a, &a).unwrap(), 0.0);
        let b = Vector64::from_vec(vec![0.0, 0.0]);
        assert_eq!(metric_theta_error(&a, &b).unwrap(), 5.0);
    }

    #[test]
    fn precond_error_examples() {
        let i = SymMatrix64::identity(3).unwrap();
        assert_eq!(metric_precond_error(&i, &i).unwrap(), 0.0);
        let z = SymMatrix64::scaled_identity(3, 2.0).unwrap();
        assert!((metric_precond_error(&z, &i).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn accuracy_of_zero_theta_on_balanced_labels_is_half() {
        let theta = Vector64::from_vec(vec![0.0, 0.0]);
        let samples: Vec<_> = (0..10)
            .map(|i| LabeledSample64::new(Vector64::from_vec(vec![i as f64, 1.0]), (i % 2) as f64))
            .collect();
        assert_eq!(metric_accuracy(&theta, &samples).unwrap(), 0.5);
        assert_eq!(metric_accuracy(&theta, &[]).unwrap(), 0.0);
    }

    #[test]
    fn single_replication_aggregates_to_itself() {
        let r = run(&[3.0, 2.0, 1.0]);
        let agg = aggregate("x", std::slice::from_ref(&r));
        for (a, b) in agg.rows.iter().zip(&r.rows) {
            assert_eq!(a.mean(Metric::MseTheta), b.get(Metric::MseTheta));
            assert_eq!(a.median(Metric::MseTheta), b.get(Metric::MseTheta));
            assert_eq!(a.mean(Metric::PrecondErr), None);
        }
    }

    #[test]
    fn constant_metric_has_that_mean() {
        let runs: Vec<_> = (0..7).map(|_| run(&[4.25, 4.25])).collect();
        let agg = aggregate("x", &runs);
        assert_eq!(agg.replications, 7);
        for row in &agg.rows {
            assert_eq!(row.mean(Metric::MseTheta), Some(4.25));
            assert_eq!(row.median(Metric::MseTheta), Some(4.25));
        }
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn milestones_are_increasing_and_end_at_total() {
        assert_eq!(milestone_steps(0, 1.25), vec![0]);
        assert_eq!(milestone_steps(1, 1.25), vec![0, 1]);
        let m = milestone_steps(100_000, 1.25);
        assert!(m.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*m.last().unwrap(), 100_000);
        assert!(m.len() < 70, "{}", m.len());
    }
}
