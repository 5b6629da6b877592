use std::ops::{Add, Mul, Neg, Sub};

/// Sparse affine expression `sum_j c_j x_j + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self::term(index, 1.0)
    }

    pub fn term(index: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn push_term(&mut self, index: usize, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((index, coeff));
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>() + self.constant
    }

    /// `|constant| + sum |c_j x_j|`, the natural magnitude of the expression at `x`.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(j, c)| (c * x[j]).abs())
            .sum::<f64>()
            + self.constant.abs()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|&(j, _)| j).max()
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.iter().all(|(_, c)| c.is_finite())
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self.terms.extend(rhs.terms);
        self.constant += rhs.constant;
        self
    }
}

impl Add<f64> for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: f64) -> AffineExpr {
        self.constant += rhs;
        self
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        self + (-rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self * -1.0
    }
}

impl Mul<f64> for AffineExpr {
    type Output = AffineExpr;
    fn mul(mut self, rhs: f64) -> AffineExpr {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}
