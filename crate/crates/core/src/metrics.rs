//! Sample-wise cosine similarity, imbalance summaries and Pearson
//! correlation with a two-sided t-test p-value.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::graph::{DirectedFactorGraph, Norm};
use crate::matrix::FluxMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CosineSummary {
    pub mean: f64,
    pub per_sample: Vec<f64>,
    /// Prediction rows with zero norm, scored 0.
    pub zero_rows: usize,
}

/// Row-wise cosine similarity between `pred` and `truth`.
pub fn mean_cosine(pred: &FluxMatrix, truth: &FluxMatrix) -> Result<CosineSummary> {
    truth.check_shape("truth", pred.nrows(), pred.ncols())?;
    let mut zero_rows = 0;
    let per_sample: Vec<f64> = pred
        .rows_iter()
        .zip(truth.rows_iter())
        .map(|(p, t)| {
            let pn = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let tn = t.iter().map(|x| x * x).sum::<f64>().sqrt();
            if pn == 0.0 || tn == 0.0 {
                zero_rows += 1;
                return 0.0;
            }
            p.iter().zip(t).map(|(a, b)| a * b).sum::<f64>() / (pn * tn)
        })
        .collect();
    let finite: Vec<f64> = per_sample.iter().copied().filter(|c| c.is_finite()).collect();
    let mean = if finite.is_empty() {
        f64::NAN
    } else {
        finite.iter().sum::<f64>() / finite.len() as f64
    };
    Ok(CosineSummary {
        mean,
        per_sample,
        zero_rows,
    })
}

/// Sample Pearson correlation and the two-sided p-value of
/// `t = r·sqrt((n−2)/(1−r²))` under Student's t with `n − 2` degrees of
/// freedom.
pub fn pearson_with_p(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::shape("paired samples", x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 pairs, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("constant input has no correlation".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok((r, pearson_p_value(r, n)?))
}

/// Two-sided p-value for a correlation `r` over `n` pairs.
pub fn pearson_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 pairs, got {n}")));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let dof = (n - 2) as f64;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(format!("t distribution: {e}")))?;
    Ok((2.0 * dist.sf(t.abs())).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_cosine: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample_cosine: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_norm_rows: Option<usize>,
    pub l1_imbalance_mean: f64,
    pub l2_imbalance_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pearson: Option<Pearson>,
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

impl EvalReport {
    /// Copy with every real rounded to six significant digits.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| round_sig(x, 6);
        Self {
            n_samples: self.n_samples,
            mean_cosine: self.mean_cosine.map(r),
            per_sample_cosine: self
                .per_sample_cosine
                .as_ref()
                .map(|v| v.iter().map(|&x| r(x)).collect()),
            zero_norm_rows: self.zero_norm_rows,
            l1_imbalance_mean: r(self.l1_imbalance_mean),
            l2_imbalance_mean: r(self.l2_imbalance_mean),
            pearson: self.pearson.as_ref().map(|p| Pearson { r: r(p.r), p: r(p.p) }),
        }
    }

    /// Pretty JSON of the rounded report.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.rounded()).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("report: {e}")))
    }
}

/// Imbalance means over rows of `pred`, plus cosine to `truth` when given.
pub fn evaluate(
    g: &DirectedFactorGraph,
    pred: &FluxMatrix,
    truth: Option<&FluxMatrix>,
) -> Result<EvalReport> {
    if pred.ncols() != g.n_variables() {
        return Err(Error::shape("prediction columns", g.n_variables(), pred.ncols()));
    }
    let m = pred.nrows();
    let mean = |norm| {
        if m == 0 {
            0.0
        } else {
            pred.rows_iter()
                .map(|r| g.imbalance_loss_unchecked(r, norm))
                .sum::<f64>()
                / m as f64
        }
    };
    let mut report = EvalReport {
        n_samples: m,
        mean_cosine: None,
        per_sample_cosine: None,
        zero_norm_rows: None,
        l1_imbalance_mean: mean(Norm::L1),
        l2_imbalance_mean: mean(Norm::L2),
        pearson: None,
    };
    if let Some(t) = truth {
        let c = mean_cosine(pred, t)?;
        report.mean_cosine = Some(c.mean);
        report.per_sample_cosine = Some(c.per_sample);
        report.zero_norm_rows = Some(c.zero_rows);
    }
    Ok(report)
}
