use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub significant: bool,
    /// The differences had zero variance; `t` and `p` are limits.
    pub degenerate: bool,
}

/// Two-sided paired t-test of `a` against `b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least 2 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // Differences equal up to rounding count as constant.
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if var.sqrt() <= 1e-12 * scale {
        if scale == 0.0 {
            return Ok(TTest {
                t: 0.0,
                p: 1.0,
                significant: false,
                degenerate: true,
            });
        }
        return Ok(TTest {
            t: f64::INFINITY.copysign(mean),
            p: 0.0,
            significant: true,
            degenerate: true,
        });
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        significant: p < SIGNIFICANCE_LEVEL,
        degenerate: false,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.1, 0.2, 0.3];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!((r.t, r.p, r.significant), (0.0, 1.0, false));
    }

    #[test]
    fn constant_shift_is_degenerate_and_significant() {
        let a = [0.5, 0.6, 0.7];
        let b = [0.4, 0.5, 0.6];
        let r = paired_t_test(&a, &b).unwrap();
        assert!(r.degenerate && r.significant && r.p == 0.0 && r.t > 0.0);
    }

    #[test]
    fn matches_reference_implementation() {
        // scipy.stats.ttest_rel on the same samples.
        let a = [0.40, 0.42, 0.41, 0.43, 0.39];
        let b = [0.35, 0.36, 0.37, 0.34, 0.36];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.t - 5.244943656729231).abs() < 1e-6);
        assert!((r.p - 0.006318929342596252).abs() < 1e-6);
        assert!(r.significant);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[2.0]).is_err());
    }
}
