use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrate::{dopri5, Rescale, StepControl};
use crate::matrix::ExprMatrix;

/// `x' = A(t)x + B(t)u`, `y = C(t)x` on a closed time interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    pub name: String,
    pub a: ExprMatrix,
    pub b: Option<ExprMatrix>,
    pub c: Option<ExprMatrix>,
    pub domain: (f64, f64),
}

impl LtvSystem {
    pub fn new(
        name: impl Into<String>,
        a: ExprMatrix,
        b: Option<ExprMatrix>,
        c: Option<ExprMatrix>,
        domain: (f64, f64),
    ) -> Result<LtvSystem> {
        let sys = LtvSystem { name: name.into(), a, b, c, domain };
        sys.check()?;
        Ok(sys)
    }

    fn check(&self) -> Result<()> {
        let n = self.a.rows();
        if self.a.cols() != n {
            return Err(Error::Dimension(format!("A is {}x{}, not square", n, self.a.cols())));
        }
        if let Some(b) = &self.b {
            if b.rows() != n {
                return Err(Error::Dimension(format!("B has {} rows, A has {n}", b.rows())));
            }
        }
        if let Some(c) = &self.c {
            if c.cols() != n {
                return Err(Error::Dimension(format!("C has {} columns, A has {n}", c.cols())));
            }
        }
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid(format!("bad domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.rows()
    }

    /// Input dimension (0 without B).
    pub fn p(&self) -> usize {
        self.b.as_ref().map_or(0, ExprMatrix::cols)
    }

    /// Output dimension (0 without C).
    pub fn m(&self) -> usize {
        self.c.as_ref().map_or(0, ExprMatrix::rows)
    }

    pub fn require_b(&self) -> Result<&ExprMatrix> {
        self.b.as_ref().ok_or_else(|| Error::MissingMatrix { system: self.name.clone(), matrix: "B" })
    }

    pub fn require_c(&self) -> Result<&ExprMatrix> {
        self.c.as_ref().ok_or_else(|| Error::MissingMatrix { system: self.name.clone(), matrix: "C" })
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if t.is_finite() && t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::OutsideDomain { t, lo, hi })
        }
    }

    /// Evaluates every present matrix at `samples` equally spaced points of the
    /// domain, so broken entries surface before any integration.
    pub fn validate(&self, samples: usize) -> Result<()> {
        let (lo, hi) = self.domain;
        let samples = samples.max(2);
        for k in 0..samples {
            let t = lo + (hi - lo) * k as f64 / (samples - 1) as f64;
            self.a.eval(t)?;
            if let Some(b) = &self.b {
                b.eval(t)?;
            }
            if let Some(c) = &self.c {
                c.eval(t)?;
            }
        }
        Ok(())
    }

    /// Solution of `x' = A x + B u` from `(t0, x0)`, integrated directly.
    pub fn propagate(&self, t0: f64, x0: &DVector<f64>, u: &ExprMatrix, t: f64, ctl: &StepControl) -> Result<DVector<f64>> {
        let b = self.require_b()?;
        let n = self.n();
        if x0.len() != n {
            return Err(Error::Dimension(format!("x0 has length {}, expected {n}", x0.len())));
        }
        if u.shape() != (b.cols(), 1) {
            return Err(Error::Dimension(format!("input is {}x{}, expected {}x1", u.rows(), u.cols(), b.cols())));
        }
        self.check_time(t0)?;
        self.check_time(t)?;
        if t == t0 {
            return Ok(x0.clone());
        }
        let dir = if t > t0 { 1.0 } else { -1.0 };
        let mut am = DMatrix::zeros(n, n);
        let mut bm = DMatrix::zeros(n, b.cols());
        let mut um = DMatrix::zeros(b.cols(), 1);
        let rhs = |tau: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
            let s = t0 + dir * tau;
            self.a.eval_into(s, &mut am)?;
            b.eval_into(s, &mut bm)?;
            u.eval_into(s, &mut um)?;
            let x = DVector::from_column_slice(y);
            let v = &am * x + &bm * &um;
            for i in 0..n {
                dy[i] = dir * v[i];
            }
            Ok(())
        };
        let out = dopri5(rhs, 0.0, x0.as_slice(), &[(t - t0).abs()], ctl, Rescale::Off)?;
        Ok(DVector::from_vec(out[0].y.clone()))
    }

    /// `y = C(t) x`.
    pub fn output(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        let c = self.require_c()?;
        if x.len() != self.n() {
            return Err(Error::Dimension(format!("x has length {}, expected {}", x.len(), self.n())));
        }
        self.check_time(t)?;
        Ok(c.eval(t)? * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::TimeExpr;

    fn scalar(text: &str) -> ExprMatrix {
        ExprMatrix::parse(&[vec![text]]).unwrap()
    }

    #[test]
    fn dimension_checks() {
        let a = ExprMatrix::identity(2);
        assert!(LtvSystem::new("x", a.clone(), Some(ExprMatrix::identity(3)), None, (0.0, 1.0)).is_err());
        assert!(LtvSystem::new("x", a.clone(), None, Some(ExprMatrix::zeros(1, 3)), (0.0, 1.0)).is_err());
        assert!(LtvSystem::new("x", ExprMatrix::zeros(2, 3), None, None, (0.0, 1.0)).is_err());
        assert!(LtvSystem::new("x", a, None, None, (1.0, 0.0)).is_err());
    }

    #[test]
    fn propagate_closed_forms() {
        let ctl = StepControl::default();
        let sys = LtvSystem::new("s", ExprMatrix::zeros(2, 2), Some(ExprMatrix::identity(2)), None, (0.0, 5.0)).unwrap();
        let u = ExprMatrix::parse(&[vec!["1"], vec!["0"]]).unwrap();
        let x = sys.propagate(0.0, &DVector::zeros(2), &u, 3.0, &ctl).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-12 && x[1].abs() < 1e-12);

        let sys = LtvSystem::new("s", scalar("-1"), Some(scalar("1")), None, (0.0, 5.0)).unwrap();
        let x = sys.propagate(0.0, &DVector::zeros(1), &scalar("1"), 1.0, &ctl).unwrap();
        assert!((x[0] - (1.0 - (-1f64).exp())).abs() < 1e-9);
        // backward from t = 1 recovers the start
        let back = sys.propagate(1.0, &x, &scalar("1"), 0.0, &ctl).unwrap();
        assert!(back[0].abs() < 1e-9);

        let zero = sys.propagate(0.0, &DVector::from_vec(vec![2.0]), &scalar("0"), 1.0, &ctl).unwrap();
        assert!((zero[0] - 2.0 * (-1f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn propagate_needs_b() {
        let sys = LtvSystem::new("s", scalar("-1"), None, Some(scalar("1")), (0.0, 5.0)).unwrap();
        let r = sys.propagate(0.0, &DVector::zeros(1), &scalar("1"), 1.0, &StepControl::default());
        assert!(matches!(r, Err(Error::MissingMatrix { matrix: "B", .. })));
    }

    #[test]
    fn output_examples() {
        let sys = LtvSystem::new("s", ExprMatrix::zeros(2, 2), None, Some(ExprMatrix::identity(2)), (0.0, 5.0)).unwrap();
        let y = sys.output(1.0, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 2.0]);
        let sys = LtvSystem::new("s", ExprMatrix::zeros(2, 2), None, Some(ExprMatrix::zeros(1, 2)), (0.0, 5.0)).unwrap();
        assert_eq!(sys.output(1.0, &DVector::from_vec(vec![1.0, 2.0])).unwrap()[0], 0.0);
        let sys = LtvSystem::new("s", scalar("0"), None, Some(ExprMatrix::scalar(TimeExpr::time())), (0.0, 5.0)).unwrap();
        assert_eq!(sys.output(2.0, &DVector::from_vec(vec![3.0])).unwrap()[0], 6.0);
        assert!(sys.output(6.0, &DVector::from_vec(vec![3.0])).is_err());
    }

    #[test]
    fn validate_finds_domain_errors() {
        let sys = LtvSystem::new("s", scalar("log(t)"), None, None, (-1.0, 1.0)).unwrap();
        assert!(sys.validate(11).is_err());
    }
}
