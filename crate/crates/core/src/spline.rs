//! Cubic piecewise polynomials used for time-dependent masses and
//! logarithmic coefficients, and for interpolating sampled series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Natural cubic spline through `(knots, values)`.
///
/// Outside the knot range the end polynomials are continued, so linear
/// and constant data are reproduced everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n < 2 || values.len() != n {
            return Err(Error::InvalidInput("spline needs >= 2 knots and matching values".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("spline knots must be strictly increasing".into()));
        }
        // tridiagonal system for the second derivatives, natural ends
        let mut second = vec![0.0; n];
        if n > 2 {
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 1..n - 1 {
                let h0 = knots[i] - knots[i - 1];
                let h1 = knots[i + 1] - knots[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0);
            }
            // Thomas algorithm; the sub-diagonal equals the previous upper entry
            for i in 1..m {
                let w = upper[i - 1] / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            second[1..n - 1].copy_from_slice(&sol);
        }
        Ok(Self { knots, values, second })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value and first derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let (t0, t1) = (self.knots[i], self.knots[i + 1]);
        let h = t1 - t0;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let deriv = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        (value, deriv)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Serialized form `{"knots": [...], "values": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplineDoc {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

/// A scalar function of time: a constant or a cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeFunction {
    Constant(f64),
    Spline(CubicSpline),
}

impl TimeFunction {
    pub fn from_doc(doc: &SplineDoc) -> Result<Self> {
        Ok(TimeFunction::Spline(CubicSpline::new(doc.knots.clone(), doc.values.clone())?))
    }

    /// Affine function `a + b t`, represented exactly.
    pub fn affine(a: f64, b: f64) -> Self {
        if b == 0.0 {
            return TimeFunction::Constant(a);
        }
        TimeFunction::Spline(
            CubicSpline::new(vec![0.0, 1.0], vec![a, a + b]).expect("two distinct knots"),
        )
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            TimeFunction::Constant(c) => (*c, 0.0),
            TimeFunction::Spline(s) => s.eval(t),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TimeFunction::Constant(_))
    }

    /// Minimum over the knots (or the constant); used for positivity checks.
    pub fn min_sampled(&self) -> f64 {
        match self {
            TimeFunction::Constant(c) => *c,
            TimeFunction::Spline(s) => {
                let k = s.knots();
                let mut lo = f64::INFINITY;
                for w in k.windows(2) {
                    for j in 0..=8 {
                        let t = w[0] + (w[1] - w[0]) * j as f64 / 8.0;
                        lo = lo.min(s.value(t));
                    }
                }
                lo
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data_with_exact_derivative() {
        let s = CubicSpline::new(vec![0.0, 0.5, 2.0, 3.0], vec![1.0, 1.05, 1.2, 1.3]).unwrap();
        for &t in &[-1.0, 0.0, 0.3, 1.7, 3.0, 4.5] {
            let (v, d) = s.eval(t);
            assert!((v - (1.0 + t / 10.0)).abs() < 1e-14, "t={t} v={v}");
            assert!((d - 0.1).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolates_knots() {
        let k = vec![0.0, 1.0, 2.5, 3.0, 5.0];
        let v = vec![0.0, 2.0, -1.0, 0.5, 4.0];
        let s = CubicSpline::new(k.clone(), v.clone()).unwrap();
        for (t, y) in k.iter().zip(&v) {
            assert!((s.value(*t) - y).abs() < 1e-13);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let s = CubicSpline::new(vec![0.0, 1.0, 2.0, 3.5], vec![1.0, 3.0, 2.0, 2.5]).unwrap();
        for &t in &[0.2, 1.3, 2.9] {
            let h = 1e-6;
            let fd = (s.value(t + h) - s.value(t - h)) / (2.0 * h);
            assert!((fd - s.eval(t).1).abs() < 1e-7);
        }
    }
}
