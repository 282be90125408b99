//! Evaluation metrics, spectra and the CSV tables written by experiments.

use std::io::{Read, Write};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::hybrid::Network;
use crate::problems::PdeProblem;
use crate::sample::PointSet;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("length mismatch: {0} predictions for {1} reference values")]
    Length(usize, usize),
    #[error("relative error is undefined for an all-zero reference")]
    ZeroReference,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("samples are not uniformly spaced (gap {gap} at index {index}, expected {spacing})")]
    NonUniform { index: usize, gap: f64, spacing: f64 },
    #[error("invalid sample spacing {0}")]
    Spacing(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// `‖ref − pred‖₂ / ‖ref‖₂`.
pub fn relative_l2(pred: &[f64], reference: &[f64]) -> Result<f64, ReportError> {
    if pred.len() != reference.len() || pred.is_empty() {
        return Err(ReportError::Length(pred.len(), reference.len()));
    }
    let norm: f64 = reference.iter().map(|r| r * r).sum();
    if norm == 0.0 {
        return Err(ReportError::ZeroReference);
    }
    let err: f64 = pred.iter().zip(reference).map(|(p, r)| (r - p).powi(2)).sum();
    Ok((err / norm).sqrt())
}

/// Median of the finite values; `NaN` when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Reference and prediction at every grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorField {
    pub dim: usize,
    pub points: Vec<[f64; 2]>,
    pub reference: Vec<f64>,
    pub prediction: Vec<f64>,
}

impl ErrorField {
    pub fn from_values(dim: usize, points: Vec<[f64; 2]>, reference: Vec<f64>, prediction: Vec<f64>) -> Self {
        assert_eq!(points.len(), reference.len());
        assert_eq!(points.len(), prediction.len());
        ErrorField { dim, points, reference, prediction }
    }

    pub fn abs_errors(&self) -> Vec<f64> {
        self.prediction.iter().zip(&self.reference).map(|(p, r)| (p - r).abs()).collect()
    }

    pub fn relative_l2(&self) -> Result<f64, ReportError> {
        relative_l2(&self.prediction, &self.reference)
    }
}

/// `|u_θ − u_ref|` over `grid`, keeping the grid coordinates.
pub fn error_field(net: &Network, params: &[f64], problem: &PdeProblem, grid: &PointSet) -> ErrorField {
    let reference = grid.iter().map(|p| problem.reference(p)).collect();
    let prediction = net.predict(params, &grid.points);
    ErrorField::from_values(grid.dim, grid.points.clone(), reference, prediction)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumResult {
    /// Cycles per unit input, `0..=Nyquist`.
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
}

pub const MIN_SPECTRUM_SAMPLES: usize = 16;

/// Modulus of the DFT of the mean-removed samples, one-sided
/// (`N/2 + 1` bins).
pub fn fourier_spectrum(samples: &[f64], spacing: f64) -> Result<SpectrumResult, ReportError> {
    let n = samples.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(ReportError::TooFewSamples { min: MIN_SPECTRUM_SAMPLES, got: n });
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(ReportError::Spacing(spacing));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&s| Complex::new(s - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    Ok(SpectrumResult {
        frequencies: (0..bins).map(|k| k as f64 / (n as f64 * spacing)).collect(),
        magnitudes: buf[..bins].iter().map(|c| c.norm()).collect(),
    })
}

/// [`fourier_spectrum`] for samples at coordinates `xs`, which must be
/// uniformly spaced.
pub fn fourier_spectrum_at(xs: &[f64], samples: &[f64]) -> Result<SpectrumResult, ReportError> {
    if xs.len() != samples.len() {
        return Err(ReportError::Length(samples.len(), xs.len()));
    }
    if xs.len() < 2 {
        return Err(ReportError::TooFewSamples { min: MIN_SPECTRUM_SAMPLES, got: xs.len() });
    }
    let spacing = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    for (index, w) in xs.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if (gap - spacing).abs() > 1e-9 * spacing.abs().max(1.0) {
            return Err(ReportError::NonUniform { index, gap, spacing });
        }
    }
    fourier_spectrum(samples, spacing)
}

/// One trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub problem: String,
    pub xi: f64,
    pub seed: u64,
    /// `NaN` when training failed.
    pub rel_l2: f64,
    pub final_loss: f64,
    pub params: usize,
    pub seconds: f64,
    #[serde(skip)]
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub freq: f64,
    pub magnitude: f64,
}

/// Median error of one ξ across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub problem: String,
    pub xi: f64,
    pub median_rel_l2: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub xi: f64,
    pub seed: u64,
    pub rel_l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSummaryRow {
    pub sigma: f64,
    pub xi: f64,
    pub median_rel_l2: f64,
}

/// A CSV row type with a fixed header, written even when a table is empty.
pub trait Table: Serialize {
    const HEADER: &'static [&'static str];
}

impl Table for ExperimentResult {
    const HEADER: &'static [&'static str] = &["problem", "xi", "seed", "rel_l2", "final_loss", "params", "seconds"];
}

impl Table for HistoryRow {
    const HEADER: &'static [&'static str] = &["epoch", "loss", "lr"];
}

impl Table for SpectrumRow {
    const HEADER: &'static [&'static str] = &["freq", "magnitude"];
}

impl Table for SweepSummaryRow {
    const HEADER: &'static [&'static str] = &["problem", "xi", "median_rel_l2", "runs", "failures"];
}

impl Table for NoiseRow {
    const HEADER: &'static [&'static str] = &["sigma", "xi", "seed", "rel_l2"];
}

impl Table for NoiseSummaryRow {
    const HEADER: &'static [&'static str] = &["sigma", "xi", "median_rel_l2"];
}

pub fn history_rows(losses: &[f64], lrs: &[f64]) -> Vec<HistoryRow> {
    losses.iter().zip(lrs).enumerate().map(|(epoch, (&loss, &lr))| HistoryRow { epoch, loss, lr }).collect()
}

pub fn spectrum_rows(s: &SpectrumResult) -> Vec<SpectrumRow> {
    s.frequencies.iter().zip(&s.magnitudes).map(|(&freq, &magnitude)| SpectrumRow { freq, magnitude }).collect()
}

/// Writes rows under their header.
pub fn write_rows<W: Write, T: Table>(out: W, rows: &[T]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>, ReportError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(ReportError::from)).collect()
}

/// Writes an error field with columns `x[,<second>],u_ref,u_pred,abs_err`.
pub fn write_field<W: Write>(out: W, field: &ErrorField, second_axis: &str) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x"];
    if field.dim == 2 {
        header.push(second_axis);
    }
    header.extend(["u_ref", "u_pred", "abs_err"]);
    w.write_record(&header)?;
    for (i, p) in field.points.iter().enumerate() {
        let (r, u) = (field.reference[i], field.prediction[i]);
        let mut rec = vec![p[0].to_string()];
        if field.dim == 2 {
            rec.push(p[1].to_string());
        }
        rec.extend([r.to_string(), u.to_string(), (u - r).abs().to_string()]);
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn relative_l2_examples() {
        let r = [1.0, -2.0, 0.5];
        assert_eq!(relative_l2(&r, &r).unwrap(), 0.0);
        let doubled: Vec<f64> = r.iter().map(|v| 2.0 * v).collect();
        assert!((relative_l2(&doubled, &r).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_l2(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(relative_l2(&[1.0], &[0.0]), Err(ReportError::ZeroReference)));
        assert!(matches!(relative_l2(&[1.0], &[1.0, 2.0]), Err(ReportError::Length(1, 2))));
    }

    #[test]
    fn median_skips_failures() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, f64::NAN, 2.0]), 2.0);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
        assert!(median(&[f64::NAN]).is_nan());
    }

    #[test]
    fn pure_tone_has_one_peak() {
        let n = 256;
        let xs: Vec<f64> = (0..n).map(|i| 4.0 * i as f64 / n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * PI * x).sin()).collect();
        let s = fourier_spectrum(&ys, 4.0 / n as f64).unwrap();
        assert_eq!(s.frequencies.len(), n / 2 + 1);
        let peak = (0..s.magnitudes.len()).max_by(|&a, &b| s.magnitudes[a].total_cmp(&s.magnitudes[b])).unwrap();
        assert!((s.frequencies[peak] - 1.0).abs() < 1e-12);
        let others = s.magnitudes.iter().enumerate().filter(|&(k, _)| k != peak).map(|(_, m)| *m).fold(0.0, f64::max);
        assert!(others < 1e-9 * s.magnitudes[peak]);
    }

    #[test]
    fn constant_signal_is_flat() {
        let s = fourier_spectrum(&[3.25; 64], 0.1).unwrap();
        assert!(s.magnitudes.iter().all(|m| *m < 1e-12));
    }

    #[test]
    fn spectrum_errors() {
        assert!(matches!(fourier_spectrum(&[1.0; 8], 0.1), Err(ReportError::TooFewSamples { .. })));
        let mut xs: Vec<f64> = (0..32).map(|i| i as f64).collect();
        xs[10] += 0.3;
        assert!(matches!(fourier_spectrum_at(&xs, &[0.0; 32]), Err(ReportError::NonUniform { index: 9, .. })));
    }

    #[test]
    fn field_csv_layout() {
        let field = ErrorField::from_values(2, vec![[0.0, 0.5], [1.0, 0.25]], vec![1.0, 2.0], vec![1.5, 2.0]);
        let mut buf = Vec::new();
        write_field(&mut buf, &field, "t").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,t,u_ref,u_pred,abs_err\n0,0.5,1,1.5,0.5\n1,0.25,2,2,0\n");
    }
}
