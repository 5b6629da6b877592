use std::fmt::{self, Write as _};

use num_complex::Complex64;

use super::{AffineExpr, ConicError};

/// One constraint block of a conic program.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintBlock {
    /// Every expression equals zero.
    Equality(Vec<AffineExpr>),
    /// Every expression is at most zero.
    Inequality(Vec<AffineExpr>),
    /// `|| tail || <= head`.
    SecondOrderCone {
        head: AffineExpr,
        tail: Vec<AffineExpr>,
    },
    /// `(x1, x2, x3)` with `x2 * exp(x1 / x2) <= x3`, `x2 > 0` (closure).
    ExponentialCone([AffineExpr; 3]),
}

impl ConstraintBlock {
    pub fn kind(&self) -> &'static str {
        match self {
            ConstraintBlock::Equality(_) => "eq",
            ConstraintBlock::Inequality(_) => "le",
            ConstraintBlock::SecondOrderCone { .. } => "soc",
            ConstraintBlock::ExponentialCone(_) => "exp",
        }
    }

    pub fn exprs(&self) -> Vec<&AffineExpr> {
        match self {
            ConstraintBlock::Equality(v) | ConstraintBlock::Inequality(v) => v.iter().collect(),
            ConstraintBlock::SecondOrderCone { head, tail } => {
                std::iter::once(head).chain(tail.iter()).collect()
            }
            ConstraintBlock::ExponentialCone(e) => e.iter().collect(),
        }
    }

    /// Scale-relative violation of the block at `x` (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintBlock::Equality(v) => v
                .iter()
                .map(|e| e.eval(x).abs() / (1.0 + e.magnitude(x)))
                .fold(0.0, f64::max),
            ConstraintBlock::Inequality(v) => v
                .iter()
                .map(|e| e.eval(x).max(0.0) / (1.0 + e.magnitude(x)))
                .fold(0.0, f64::max),
            ConstraintBlock::SecondOrderCone { head, tail } => {
                let h = head.eval(x);
                let norm = tail.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
                (norm - h).max(0.0) / (1.0 + h.abs() + norm)
            }
            ConstraintBlock::ExponentialCone([a, b, c]) => {
                let (x1, x2, x3) = (a.eval(x), b.eval(x), c.eval(x));
                let scale = 1.0 + x1.abs() + x2.abs() + x3.abs();
                if x2 > 0.0 && x3 > 0.0 {
                    let bound = x2 * (x3 / x2).ln();
                    (x1 - bound).max(0.0) / (1.0 + x1.abs() + bound.abs())
                } else if x2 > 0.0 {
                    (x2 + x3.abs()) / scale
                } else {
                    // closure point: x1 <= 0, x2 = 0, x3 >= 0
                    x1.max(0.0).max(-x2).max(-x3) / scale
                }
            }
        }
    }
}

/// A contiguous run of complex variables stored as `(re, im)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexBlock {
    pub start: usize,
    pub len: usize,
}

impl ComplexBlock {
    pub fn re(&self, i: usize) -> usize {
        debug_assert!(i < self.len);
        self.start + 2 * i
    }
    pub fn im(&self, i: usize) -> usize {
        self.re(i) + 1
    }

    /// `Re` and `Im` of `sum_i a_i z_i` as affine expressions in the lifted variables.
    pub fn linear_form(&self, coeffs: &[Complex64]) -> (AffineExpr, AffineExpr) {
        let mut re = AffineExpr::default();
        let mut im = AffineExpr::default();
        for (i, a) in coeffs.iter().enumerate() {
            re.push_term(self.re(i), a.re);
            re.push_term(self.im(i), -a.im);
            im.push_term(self.re(i), a.im);
            im.push_term(self.im(i), a.re);
        }
        (re, im)
    }

    pub fn extract(&self, x: &[f64]) -> Vec<Complex64> {
        (0..self.len)
            .map(|i| Complex64::new(x[self.re(i)], x[self.im(i)]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexGroup {
    pub name: String,
    pub block: ComplexBlock,
}

/// Names of the real variables and the complex groups lifted onto them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VariableMap {
    pub names: Vec<String>,
    pub complex_groups: Vec<ComplexGroup>,
}

impl VariableMap {
    pub fn group(&self, name: &str) -> Option<ComplexBlock> {
        self.complex_groups
            .iter()
            .find(|g| g.name == name)
            .map(|g| g.block)
    }

    /// Writes complex values into their interleaved slots.
    pub fn lift(&self, name: &str, values: &[Complex64], x: &mut [f64]) -> Result<(), ConicError> {
        let block = self
            .group(name)
            .ok_or_else(|| ConicError::InvalidProgram(format!("no complex group `{name}`")))?;
        if values.len() != block.len {
            return Err(ConicError::InvalidProgram(format!(
                "group `{name}` holds {} values, got {}",
                block.len,
                values.len()
            )));
        }
        for (i, z) in values.iter().enumerate() {
            x[block.re(i)] = z.re;
            x[block.im(i)] = z.im;
        }
        Ok(())
    }

    pub fn unlift(&self, name: &str, x: &[f64]) -> Option<Vec<Complex64>> {
        self.group(name).map(|b| b.extract(x))
    }
}

/// Linear objective over the listed constraint blocks and box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    num_vars: usize,
    objective: AffineExpr,
    constraints: Vec<ConstraintBlock>,
    labels: Vec<String>,
    bounds: Vec<(f64, f64)>,
    variables: VariableMap,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }
    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }
    pub fn constraints(&self) -> &[ConstraintBlock] {
        &self.constraints
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    pub fn variables(&self) -> &VariableMap {
        &self.variables
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest scale-relative violation over all blocks and bounds.
    ///
    /// This is evaluated from the program alone, independently of whatever
    /// backend produced `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let blocks = self
            .constraints
            .iter()
            .map(|b| b.violation(x))
            .fold(0.0, f64::max);
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &xi)| ((lo - xi).max(0.0) + (xi - hi).max(0.0)) / (1.0 + xi.abs()))
            .fold(0.0, f64::max);
        blocks.max(bounds)
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.bounds.len() != self.num_vars || self.variables.names.len() != self.num_vars {
            return Err(ConicError::InvalidProgram(
                "variable bookkeeping out of sync".into(),
            ));
        }
        let check = |e: &AffineExpr, what: &str| -> Result<(), ConicError> {
            if let Some(j) = e.max_index() {
                if j >= self.num_vars {
                    return Err(ConicError::InvalidProgram(format!(
                        "{what} references variable {j} of {}",
                        self.num_vars
                    )));
                }
            }
            if !e.is_finite() {
                return Err(ConicError::InvalidProgram(format!(
                    "{what} has non-finite data"
                )));
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        for (block, label) in self.constraints.iter().zip(&self.labels) {
            if let ConstraintBlock::SecondOrderCone { tail, .. } = block {
                if tail.is_empty() {
                    return Err(ConicError::InvalidProgram(format!("empty cone `{label}`")));
                }
            }
            for e in block.exprs() {
                check(e, label)?;
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo > hi || lo.is_nan() || hi.is_nan() {
                return Err(ConicError::InvalidProgram(format!(
                    "empty bounds on variable {j}"
                )));
            }
        }
        for g in &self.variables.complex_groups {
            if g.block.start + 2 * g.block.len > self.num_vars {
                return Err(ConicError::InvalidProgram(format!(
                    "group `{}` overflows",
                    g.name
                )));
            }
        }
        Ok(())
    }

    /// Self-describing text dump for offline inspection.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let fmt_expr = |e: &AffineExpr| {
            let mut s = format!("{:e}", e.constant);
            for (j, c) in &e.terms {
                let _ = write!(s, " {c:+e}*x{j}");
            }
            s
        };
        let _ = writeln!(out, "conic-program v1");
        let _ = writeln!(out, "vars {}", self.num_vars);
        for (j, name) in self.variables.names.iter().enumerate() {
            let (lo, hi) = self.bounds[j];
            let _ = writeln!(out, "var {j} {name} [{lo:e}, {hi:e}]");
        }
        let _ = writeln!(out, "minimize {}", fmt_expr(&self.objective));
        for (i, (block, label)) in self.constraints.iter().zip(&self.labels).enumerate() {
            let _ = writeln!(out, "block {i} {} {label}", block.kind());
            for e in block.exprs() {
                let _ = writeln!(out, "  {}", fmt_expr(e));
            }
        }
        out
    }
}

impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Incremental construction of a [`ConicProgram`].
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    objective: AffineExpr,
    constraints: Vec<ConstraintBlock>,
    labels: Vec<String>,
    bounds: Vec<(f64, f64)>,
    variables: VariableMap,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.bounds.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.variables.names.push(name.into());
        self.bounds.push((f64::NEG_INFINITY, f64::INFINITY));
        self.bounds.len() - 1
    }

    pub fn add_vars(&mut self, name: &str, count: usize) -> Vec<usize> {
        (0..count)
            .map(|i| self.add_var(format!("{name}[{i}]")))
            .collect()
    }

    pub fn add_complex(&mut self, name: &str, len: usize) -> ComplexBlock {
        let start = self.num_vars();
        for i in 0..len {
            self.add_var(format!("{name}[{i}].re"));
            self.add_var(format!("{name}[{i}].im"));
        }
        let block = ComplexBlock { start, len };
        self.variables.complex_groups.push(ComplexGroup {
            name: name.to_string(),
            block,
        });
        block
    }

    pub fn set_bounds(&mut self, index: usize, lo: f64, hi: f64) {
        self.bounds[index] = (lo, hi);
    }

    pub fn add_objective_term(&mut self, index: usize, coeff: f64) {
        self.objective.push_term(index, coeff);
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective.constant += c;
    }

    pub fn push(&mut self, block: ConstraintBlock, label: impl Into<String>) {
        self.constraints.push(block);
        self.labels.push(label.into());
    }

    pub fn build(self) -> Result<ConicProgram, ConicError> {
        let program = ConicProgram {
            num_vars: self.bounds.len(),
            objective: self.objective,
            constraints: self.constraints,
            labels: self.labels,
            bounds: self.bounds,
            variables: self.variables,
        };
        program.validate()?;
        Ok(program)
    }
}
