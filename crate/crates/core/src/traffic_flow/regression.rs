use std::io::Write;

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{FlowSeries, TrafficError};

/// Simple ordinary-least-squares fit `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionModel {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of x and y.
    pub r_value: f64,
    /// Two-sided p-value for the null hypothesis `slope == 0`.
    pub p_value: f64,
    /// Standard error of the slope estimate.
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvRegressionModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub r2: f64,
}

pub trait Predict {
    fn arity(&self) -> usize;
    fn predict(&self, inputs: &[f64]) -> Result<f64, TrafficError>;
}

impl Predict for RegressionModel {
    fn arity(&self) -> usize {
        1
    }

    fn predict(&self, inputs: &[f64]) -> Result<f64, TrafficError> {
        match inputs {
            [x] => Ok(self.slope * x + self.intercept),
            _ => Err(TrafficError::ArityMismatch {
                expected: 1,
                got: inputs.len(),
            }),
        }
    }
}

impl Predict for MvRegressionModel {
    fn arity(&self) -> usize {
        self.coefficients.len()
    }

    fn predict(&self, inputs: &[f64]) -> Result<f64, TrafficError> {
        if inputs.len() != self.coefficients.len() {
            return Err(TrafficError::ArityMismatch {
                expected: self.coefficients.len(),
                got: inputs.len(),
            });
        }
        Ok(self.intercept
            + self
                .coefficients
                .iter()
                .zip(inputs)
                .map(|(c, x)| c * x)
                .sum::<f64>())
    }
}

fn check_aligned(a: &FlowSeries, b: &FlowSeries) -> Result<(), TrafficError> {
    if a.len() != b.len() || !a.timestamps().eq(b.timestamps()) {
        return Err(TrafficError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Fits `y` against `x`; both series must share the same timestamps.
pub fn fit_linear(x: &FlowSeries, y: &FlowSeries) -> Result<RegressionModel, TrafficError> {
    check_aligned(x, y)?;
    fit_linear_values(&x.counts(), &y.counts())
}

pub fn fit_linear_values(x: &[f64], y: &[f64]) -> Result<RegressionModel, TrafficError> {
    if x.len() != y.len() {
        return Err(TrafficError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(TrafficError::TooFewSamples { needed: 3, got: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;

    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx <= 0.0 {
        return Err(TrafficError::DegenerateInput);
    }

    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_value = if syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
    } else {
        0.0
    };

    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let e = yi - (slope * xi + intercept);
            e * e
        })
        .sum();
    let df = nf - 2.0;
    let std_err = (sse / df / sxx).sqrt();

    let p_value = if std_err > 0.0 {
        let t = slope / std_err;
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    } else if slope == 0.0 {
        1.0
    } else {
        0.0
    };

    Ok(RegressionModel {
        slope,
        intercept,
        r_value,
        p_value,
        std_err,
    })
}

/// Ordinary least squares with an intercept over several aligned predictors.
pub fn fit_multivariate(
    predictors: &[FlowSeries],
    target: &FlowSeries,
) -> Result<MvRegressionModel, TrafficError> {
    for p in predictors {
        check_aligned(p, target)?;
    }
    let cols: Vec<Vec<f64>> = predictors.iter().map(FlowSeries::counts).collect();
    fit_multivariate_values(&cols, &target.counts())
}

/// `columns[j][i]` is predictor `j` at sample `i`.
pub fn fit_multivariate_values(
    columns: &[Vec<f64>],
    target: &[f64],
) -> Result<MvRegressionModel, TrafficError> {
    let n = target.len();
    let k = columns.len();
    for c in columns {
        if c.len() != n {
            return Err(TrafficError::LengthMismatch {
                left: c.len(),
                right: n,
            });
        }
    }
    if n <= k + 1 {
        return Err(TrafficError::TooFewSamples {
            needed: k + 2,
            got: n,
        });
    }

    // Centre the data so the intercept drops out of the least-squares system;
    // this keeps the QR well conditioned for large raw counts.
    let nf = n as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let ymean = target.iter().sum::<f64>() / nf;

    let x = DMatrix::from_fn(n, k, |i, j| columns[j][i] - means[j]);
    let y = DVector::from_iterator(n, target.iter().map(|v| v - ymean));

    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let tol = max_diag * 1e-10 * (n.max(k) as f64);
    if k > 0 && (max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= tol)) {
        return Err(TrafficError::RankDeficient);
    }

    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(TrafficError::RankDeficient)?;

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = ymean
        - coefficients
            .iter()
            .zip(&means)
            .map(|(b, m)| b * m)
            .sum::<f64>();

    let fitted = &x * &beta;
    let ss_res: f64 = (&y - fitted).iter().map(|e| e * e).sum();
    let ss_tot: f64 = y.iter().map(|e| e * e).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(MvRegressionModel {
        coefficients,
        intercept,
        r2,
    })
}

/// Writes `flow_id,slope,intercept,r_value,p_value,std_err` rows.
pub fn write_regression_rows<W: Write>(
    out: W,
    rows: &[(String, RegressionModel)],
) -> Result<(), TrafficError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["flow_id", "slope", "intercept", "r_value", "p_value", "std_err"])?;
    for (flow, m) in rows {
        w.write_record([
            flow.clone(),
            m.slope.to_string(),
            m.intercept.to_string(),
            m.r_value.to_string(),
            m.p_value.to_string(),
            m.std_err.to_string(),
        ])?;
    }
    w.flush().map_err(|e| TrafficError::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(flow: &str, counts: &[u64]) -> FlowSeries {
        FlowSeries {
            site_id: "s".into(),
            flow_id: flow.into(),
            interval_minutes: 5,
            samples: counts
                .iter()
                .enumerate()
                .map(|(i, c)| (i as i64 * 300, *c))
                .collect(),
        }
    }

    #[test]
    fn perfect_line() {
        let x: Vec<u64> = (0..10).collect();
        let y: Vec<u64> = x.iter().map(|v| 2 * v + 1).collect();
        let m = fit_linear(&series("x", &x), &series("y", &y)).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-12);
        assert!((m.intercept - 1.0).abs() < 1e-12);
        assert!((m.r_value - 1.0).abs() < 1e-12);
        assert_eq!(m.std_err, 0.0);
        assert_eq!(m.p_value, 0.0);
        assert!((m.predict(&[100.0]).unwrap() - 201.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let m = fit_linear_values(&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]).unwrap();
        assert_eq!(m.slope, 0.0);
        assert_eq!(m.r_value, 0.0);
        assert_eq!(m.p_value, 1.0);
    }

    #[test]
    fn zero_variance_predictor() {
        assert_eq!(
            fit_linear_values(&[3.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap_err(),
            TrafficError::DegenerateInput
        );
    }

    #[test]
    fn misaligned_series() {
        let a = series("a", &[1, 2, 3]);
        let mut b = series("b", &[1, 2, 3]);
        b.samples[2].0 += 300;
        assert!(matches!(
            fit_linear(&a, &b),
            Err(TrafficError::LengthMismatch { .. })
        ));
        assert!(matches!(
            fit_linear(&a, &series("c", &[1, 2])),
            Err(TrafficError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn p_value_matches_reference() {
        // scipy.stats.linregress([1,2,3,4,5,6], [2,1,4,3,7,5])
        let m = fit_linear_values(&[1., 2., 3., 4., 5., 6.], &[2., 1., 4., 3., 7., 5.]).unwrap();
        assert!((m.slope - 0.9142857142857143).abs() < 1e-12);
        assert!((m.r_value - 0.7917946548886297).abs() < 1e-12);
        assert!((m.std_err - 0.3526382586966403).abs() < 1e-12);
        assert!((m.p_value - 0.06051140336275655).abs() < 1e-9);
    }

    #[test]
    fn multivariate_exact() {
        let x1 = [1.0, 2.0, 3.0, 4.0, 5.0, 7.0];
        let x2 = [2.0, 1.0, 5.0, 3.0, 8.0, 1.0];
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + 2.0 * b).collect();
        let m = fit_multivariate_values(&[x1.to_vec(), x2.to_vec()], &y).unwrap();
        assert!((m.coefficients[0] - 1.0).abs() < 1e-10);
        assert!((m.coefficients[1] - 2.0).abs() < 1e-10);
        assert!(m.intercept.abs() < 1e-9);
        assert!((m.r2 - 1.0).abs() < 1e-12);
        let model = MvRegressionModel {
            coefficients: vec![1.0, 2.0],
            intercept: 0.0,
            r2: 1.0,
        };
        assert_eq!(model.predict(&[5.0, 10.0]).unwrap(), 25.0);
        assert!(matches!(
            model.predict(&[1.0]),
            Err(TrafficError::ArityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let x1 = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
        assert_eq!(
            fit_multivariate_values(&[x1.clone(), x1], &y).unwrap_err(),
            TrafficError::RankDeficient
        );
    }

    #[test]
    fn too_few_samples_for_predictors() {
        let c = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            fit_multivariate_values(&[c.clone(), vec![3.0, 1.0, 2.0]], &c),
            Err(TrafficError::TooFewSamples { .. })
        ));
    }

    proptest! {
        #[test]
        fn noiseless_line_recovered(a in -50.0f64..50.0, b in -100.0f64..100.0, n in 3usize..40) {
            prop_assume!(a.abs() > 1e-3);
            let x: Vec<f64> = (0..n).map(|i| i as f64 * 1.5 + 2.0).collect();
            let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let m = fit_linear_values(&x, &y).unwrap();
            prop_assert!((m.slope - a).abs() < 1e-9 * (1.0 + a.abs()));
            prop_assert!((m.intercept - b).abs() < 1e-9 * (1.0 + b.abs() + a.abs() * 60.0));
            prop_assert!((m.r_value - a.signum()).abs() < 1e-9);
        }

        #[test]
        fn residuals_match_r_squared(ys in proptest::collection::vec(0.0f64..500.0, 5..60)) {
            let x: Vec<f64> = (0..ys.len()).map(|i| (i as f64).sqrt() * 10.0).collect();
            let m = fit_linear_values(&x, &ys).unwrap();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            let ss_tot: f64 = ys.iter().map(|v| (v - mean).powi(2)).sum();
            prop_assume!(ss_tot > 1e-6);
            let rss: f64 = x.iter().zip(&ys)
                .map(|(xi, yi)| (yi - m.predict(&[*xi]).unwrap()).powi(2))
                .sum();
            let expect = (1.0 - m.r_value * m.r_value) * ss_tot;
            prop_assert!((rss - expect).abs() <= 1e-6 * ss_tot.max(1.0));
        }
    }
}
