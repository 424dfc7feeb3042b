//! Datasets under the normal linear model and their sufficient statistics.
//!
//! Designs are used exactly as supplied: no centering, no scaling, and no
//! automatic intercept column.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{PowerPriorError, Result};
use crate::linalg::{symmetrize, SpdFactor};

/// Design matrix and response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "X has {} rows but Y has length {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(PowerPriorError::ShapeMismatch(
                "dataset needs at least one row and one column".into(),
            ));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &Dataset) -> Result<Dataset> {
        if self.p() != other.p() {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "cannot stack designs with {} and {} columns",
                self.p(),
                other.p()
            )));
        }
        let n = self.n() + other.n();
        let x = DMatrix::from_fn(n, self.p(), |i, j| {
            if i < self.n() {
                self.x[(i, j)]
            } else {
                other.x[(i - self.n(), j)]
            }
        });
        let y = DVector::from_fn(n, |i, _| {
            if i < self.n() {
                self.y[i]
            } else {
                other.y[i - self.n()]
            }
        });
        Dataset::new(x, y)
    }

    /// Reads a CSV with a header row; the column named `y` is the response and
    /// every other column is a covariate, in file order.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h.trim() == "y")
            .ok_or_else(|| PowerPriorError::ShapeMismatch("CSV has no `y` column".into()))?;
        let p = headers.len() - 1;
        if p == 0 {
            return Err(PowerPriorError::ShapeMismatch(
                "CSV has no covariate columns".into(),
            ));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(PowerPriorError::ShapeMismatch(format!(
                    "row {} has {} fields, expected {}",
                    line + 1,
                    rec.len(),
                    headers.len()
                )));
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    PowerPriorError::ShapeMismatch(format!(
                        "row {}: cannot parse `{}` as a number",
                        line + 1,
                        field
                    ))
                })?;
                if j == y_col {
                    ys.push(v);
                } else {
                    xs.push(v);
                }
            }
        }
        let n = ys.len();
        Dataset::new(DMatrix::from_row_slice(n, p, &xs), DVector::from_vec(ys))
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)
            .map_err(|e| PowerPriorError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(f)
    }

    /// Writes the dataset with covariate columns `x1..xp` followed by `y`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for j in 0..self.p() {
            out.push_str(&format!("x{},", j + 1));
        }
        out.push_str("y\n");
        for i in 0..self.n() {
            for j in 0..self.p() {
                out.push_str(&format!("{:.17e},", self.x[(i, j)]));
            }
            out.push_str(&format!("{:.17e}\n", self.y[i]));
        }
        out
    }
}

/// Sufficient statistics `(X'X, X'Y, β̂, S, n, p)` of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSuffStats {
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub beta_hat: DVector<f64>,
    /// Residual sum of squares.
    pub s: f64,
    pub n: usize,
    pub p: usize,
}

impl GaussianSuffStats {
    /// `Y'Y`, recovered as `S + β̂'X'Y`.
    pub fn yty(&self) -> f64 {
        self.s + self.beta_hat.dot(&self.xty)
    }

    /// Statistics of the row-wise union of two datasets, combined through
    /// `X'X`, `X'Y` and `Y'Y` sums.
    pub fn combine(&self, other: &GaussianSuffStats) -> Result<GaussianSuffStats> {
        if self.p != other.p {
            return Err(PowerPriorError::ShapeMismatch(format!(
                "cannot combine statistics with p = {} and p = {}",
                self.p, other.p
            )));
        }
        let xtx = &self.xtx + &other.xtx;
        let xty = &self.xty + &other.xty;
        let yty = self.yty() + other.yty();
        let f = SpdFactor::new(&xtx).map_err(|_| PowerPriorError::SingularDesign)?;
        let beta_hat = f.solve(&xty);
        // Pooled S = Y'Y - β̂'X'Y, floored at zero against round-off.
        let s = (yty - beta_hat.dot(&xty)).max(0.0);
        Ok(GaussianSuffStats {
            xtx,
            xty,
            beta_hat,
            s,
            n: self.n + other.n,
            p: self.p,
        })
    }
}

/// Least-squares statistics of a full-rank dataset.
pub fn sufficient_stats(data: &Dataset) -> Result<GaussianSuffStats> {
    let (n, p) = (data.n(), data.p());
    if data.y.len() != n {
        return Err(PowerPriorError::ShapeMismatch(format!(
            "X has {n} rows but Y has length {}",
            data.y.len()
        )));
    }
    if n <= p {
        return Err(PowerPriorError::SingularDesign);
    }
    let xt = data.x.transpose();
    let mut xtx = &xt * &data.x;
    symmetrize(&mut xtx);
    let xty = &xt * &data.y;
    let f = SpdFactor::new(&xtx).map_err(|_| PowerPriorError::SingularDesign)?;
    let beta_hat = f.solve(&xty);
    let resid = &data.y - &data.x * &beta_hat;
    let s = resid.norm_squared();
    Ok(GaussianSuffStats {
        xtx,
        xty,
        beta_hat,
        s,
        n,
        p,
    })
}

/// Intercept-only statistics from a sample size, mean and standard deviation.
pub fn stats_from_summary(n: usize, ybar: f64, sd: f64) -> Result<GaussianSuffStats> {
    if n < 2 {
        return Err(PowerPriorError::InvalidSummary(format!(
            "n = {n} but at least 2 observations are required"
        )));
    }
    if !(sd > 0.0) || !sd.is_finite() || !ybar.is_finite() {
        return Err(PowerPriorError::InvalidSummary(format!(
            "need finite mean and positive sd (got ybar = {ybar}, sd = {sd})"
        )));
    }
    let nf = n as f64;
    Ok(GaussianSuffStats {
        xtx: DMatrix::from_element(1, 1, nf),
        xty: DVector::from_element(1, nf * ybar),
        beta_hat: DVector::from_element(1, ybar),
        s: (nf - 1.0) * sd * sd,
        n,
        p: 1,
    })
}

/// Summary-statistic input: `{"n": 10, "ybar": 0, "sd": 0.5}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryInput {
    pub n: usize,
    pub ybar: f64,
    pub sd: f64,
}

impl SummaryInput {
    pub fn to_stats(&self) -> Result<GaussianSuffStats> {
        stats_from_summary(self.n, self.ybar, self.sd)
    }
}
