//! Design matrix and response containers.
//!
//! Features are stored column-major and standardized at construction so that
//! every usable column has mean zero and sum of squares n. Coefficients from a
//! fit on the standardized scale can be mapped back with
//! [`unstandardize_coefficients`].

use crate::error::{Error, Result};

/// Variance threshold below which a centered column is treated as constant.
const CONSTANT_SS_PER_N: f64 = 1e-20;

/// Response vector for one of the three supported outcome types.
#[derive(Debug, Clone)]
pub enum Response {
    Continuous(Vec<f64>),
    /// Values must be 0 or 1.
    Binary(Vec<u8>),
    /// Right-censored survival times; `status[i] == 1` marks an event.
    Survival { time: Vec<f64>, status: Vec<u8> },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Continuous(y) => y.len(),
            Response::Binary(y) => y.len(),
            Response::Survival { time, .. } => time.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_survival(&self) -> bool {
        matches!(self, Response::Survival { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            Response::Continuous(y) => {
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::data("response contains non-finite values"));
                }
            }
            Response::Binary(y) => {
                if y.iter().any(|&v| v > 1) {
                    return Err(Error::data("binary response must contain only 0 and 1"));
                }
                let ones = y.iter().filter(|&&v| v == 1).count();
                if ones == 0 || ones == y.len() {
                    return Err(Error::data(
                        "binary response must contain at least one 0 and one 1",
                    ));
                }
            }
            Response::Survival { time, status } => {
                if time.len() != status.len() {
                    return Err(Error::data("survival time and status lengths differ"));
                }
                if time.iter().any(|&t| !t.is_finite() || t <= 0.0) {
                    return Err(Error::data("survival times must be finite and positive"));
                }
                if status.iter().any(|&d| d > 1) {
                    return Err(Error::data("survival status must contain only 0 and 1"));
                }
                if !status.iter().any(|&d| d == 1) {
                    return Err(Error::data("survival data must contain at least one event"));
                }
            }
        }
        Ok(())
    }

    fn reorder(&self, order: &[usize]) -> Response {
        match self {
            Response::Continuous(y) => {
                Response::Continuous(order.iter().map(|&i| y[i]).collect())
            }
            Response::Binary(y) => Response::Binary(order.iter().map(|&i| y[i]).collect()),
            Response::Survival { time, status } => Response::Survival {
                time: order.iter().map(|&i| time[i]).collect(),
                status: order.iter().map(|&i| status[i]).collect(),
            },
        }
    }
}

/// Per-column centering and scaling applied by [`standardize`].
#[derive(Debug, Clone)]
pub struct StandardizationRecord {
    pub means: Vec<f64>,
    /// Divisor applied after centering; 1.0 for constant columns.
    pub scales: Vec<f64>,
    pub constant: Vec<bool>,
}

impl StandardizationRecord {
    pub fn identity(p: usize) -> Self {
        StandardizationRecord {
            means: vec![0.0; p],
            scales: vec![1.0; p],
            constant: vec![false; p],
        }
    }
}

/// Center each column to mean zero and scale so the sum of squares equals n.
/// Constant columns are centered but not scaled, and flagged in the record.
pub fn standardize(columns: &mut [Vec<f64>]) -> Result<StandardizationRecord> {
    let p = columns.len();
    let mut record = StandardizationRecord {
        means: Vec::with_capacity(p),
        scales: Vec::with_capacity(p),
        constant: Vec::with_capacity(p),
    };
    for col in columns.iter_mut() {
        let n = col.len();
        if n == 0 {
            return Err(Error::data("cannot standardize an empty column"));
        }
        let mean = col.iter().sum::<f64>() / n as f64;
        let mut ss = 0.0;
        for v in col.iter_mut() {
            *v -= mean;
            ss += *v * *v;
        }
        let constant = ss / n as f64 <= CONSTANT_SS_PER_N;
        let scale = if constant { 1.0 } else { (ss / n as f64).sqrt() };
        if !constant {
            for v in col.iter_mut() {
                *v /= scale;
            }
        }
        record.means.push(mean);
        record.scales.push(scale);
        record.constant.push(constant);
    }
    Ok(record)
}

/// Map coefficients fit on the standardized scale back to the raw scale.
/// Returns the raw-scale coefficients and the amount to add to the intercept.
pub fn unstandardize_coefficients(
    beta: &[f64],
    record: &StandardizationRecord,
) -> (Vec<f64>, f64) {
    let mut raw = Vec::with_capacity(beta.len());
    let mut intercept_shift = 0.0;
    for (j, &b) in beta.iter().enumerate() {
        let r = b / record.scales[j];
        raw.push(r);
        intercept_shift -= r * record.means[j];
    }
    (raw, intercept_shift)
}

/// A standardized design matrix paired with its response.
///
/// Survival data are sorted by ascending time at construction; `sort_order`
/// maps internal row index to the caller's original row index.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    p: usize,
    /// Standardized features, column-major, length n * p.
    x: Vec<f64>,
    /// Raw features in internal row order, column-major.
    x_raw: Vec<f64>,
    response: Response,
    penalized: Vec<bool>,
    names: Vec<String>,
    record: StandardizationRecord,
    sort_order: Vec<usize>,
}

impl Dataset {
    /// Build a dataset from raw feature columns. Columns are standardized and,
    /// for survival responses, rows are sorted by time (events first at ties).
    pub fn from_columns(
        columns: Vec<Vec<f64>>,
        response: Response,
        penalized: Vec<bool>,
        names: Option<Vec<String>>,
    ) -> Result<Dataset> {
        let p = columns.len();
        if p == 0 {
            return Err(Error::data("design matrix must have at least one feature"));
        }
        let n = response.len();
        if n < 2 {
            return Err(Error::data("at least two observations are required"));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::data(format!(
                    "feature column {j} has {} rows but the response has {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::data(format!(
                    "non-finite value in feature column {j}, row {i}"
                )));
            }
        }
        response.validate()?;
        if penalized.len() != p {
            return Err(Error::data(format!(
                "penalized flags have length {} but there are {p} features",
                penalized.len()
            )));
        }
        let names = match names {
            Some(v) => {
                if v.len() != p {
                    return Err(Error::data(format!(
                        "feature names have length {} but there are {p} features",
                        v.len()
                    )));
                }
                v
            }
            None => (0..p).map(|j| format!("x{}", j + 1)).collect(),
        };

        let sort_order: Vec<usize> = match &response {
            Response::Survival { time, status } => {
                let mut idx: Vec<usize> = (0..n).collect();
                // Events precede censored observations at tied times.
                idx.sort_by(|&a, &b| {
                    time[a]
                        .partial_cmp(&time[b])
                        .unwrap()
                        .then(status[b].cmp(&status[a]))
                });
                idx
            }
            _ => (0..n).collect(),
        };
        let response = response.reorder(&sort_order);

        let mut cols: Vec<Vec<f64>> = columns
            .into_iter()
            .map(|col| sort_order.iter().map(|&i| col[i]).collect())
            .collect();
        let mut x_raw = Vec::with_capacity(n * p);
        for col in &cols {
            x_raw.extend_from_slice(col);
        }
        let record = standardize(&mut cols)?;

        let any_penalized = penalized.iter().any(|&f| f);
        let usable = penalized
            .iter()
            .zip(&record.constant)
            .any(|(&pen, &con)| pen && !con);
        if any_penalized && !usable {
            return Err(Error::data("no usable penalized features (all constant)"));
        }

        let mut x = Vec::with_capacity(n * p);
        for col in &cols {
            x.extend_from_slice(col);
        }
        Ok(Dataset {
            n,
            p,
            x,
            x_raw,
            response,
            penalized,
            names,
            record,
            sort_order,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Standardized column j (internal row order).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }

    /// Raw column j (internal row order).
    pub fn raw_column(&self, j: usize) -> &[f64] {
        &self.x_raw[j * self.n..(j + 1) * self.n]
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn penalized(&self) -> &[bool] {
        &self.penalized
    }

    pub fn is_penalized(&self, j: usize) -> bool {
        self.penalized[j]
    }

    pub fn is_constant(&self, j: usize) -> bool {
        self.record.constant[j]
    }

    /// Penalized, non-constant features: the candidates for selection.
    pub fn usable_penalized(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(|&j| self.penalized[j] && !self.record.constant[j])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn record(&self) -> &StandardizationRecord {
        &self.record
    }

    /// Maps internal row index to the row index passed at construction.
    pub fn sort_order(&self) -> &[usize] {
        &self.sort_order
    }

    /// Linear predictor on the raw scale, internal row order.
    pub fn linear_predictor_raw(&self, intercept: f64, beta_raw: &[f64]) -> Vec<f64> {
        let mut eta = vec![intercept; self.n];
        for (j, &b) in beta_raw.iter().enumerate() {
            if b != 0.0 {
                let col = self.raw_column(j);
                for (e, &v) in eta.iter_mut().zip(col) {
                    *e += b * v;
                }
            }
        }
        eta
    }

    /// New dataset holding the given internal rows (raw values are kept and
    /// re-standardized). Used for cross-validation folds and sample splits.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if rows.is_empty() {
            return Err(Error::data("cannot build a dataset from zero rows"));
        }
        let columns: Vec<Vec<f64>> = (0..self.p)
            .map(|j| {
                let col = self.raw_column(j);
                rows.iter().map(|&i| col[i]).collect()
            })
            .collect();
        let response = self.response.reorder(rows);
        Dataset::from_columns(
            columns,
            response,
            self.penalized.clone(),
            Some(self.names.clone()),
        )
    }
}
