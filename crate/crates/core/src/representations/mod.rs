//! Series transforms and multi-channel stacking.
//!
//! Every transform maps a length-`L` series to a length-`L` series so that
//! any subset of them can be stacked into an `R x L` network input. Spectra
//! shorter than `L` are zero-padded, the Haar approximation is upsampled by
//! repetition and derivatives replicate their last sample.

mod spectral;

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::math;
use crate::{Error, Result};

pub use spectral::{fft, ifft, Complex};

/// Standard deviation below which a sequence is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-8;
/// Energy below which the autocorrelation is reported as all zeros.
pub const DEGENERATE_ENERGY: f64 = 1e-12;

/// One univariate series with its class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub values: Vec<f64>,
    pub label: usize,
}

impl Series {
    pub fn new(values: Vec<f64>, label: usize) -> Result<Self> {
        check_finite("series", &values)?;
        Ok(Self { values, label })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RepKind {
    #[cfg_attr(feature = "serde", serde(rename = "TIME"))]
    Time,
    #[cfg_attr(feature = "serde", serde(rename = "DT1"))]
    Dt1,
    #[cfg_attr(feature = "serde", serde(rename = "DT2"))]
    Dt2,
    #[cfg_attr(feature = "serde", serde(rename = "HLB_MAG"))]
    HilbertMagnitude,
    #[cfg_attr(feature = "serde", serde(rename = "DWT_A"))]
    DwtApprox,
    #[cfg_attr(feature = "serde", serde(rename = "FFT_MAG"))]
    FftMagnitude,
    #[cfg_attr(feature = "serde", serde(rename = "DCT"))]
    Dct,
    #[cfg_attr(feature = "serde", serde(rename = "ACF"))]
    Acf,
}

impl RepKind {
    pub const ALL: [RepKind; 8] = [
        RepKind::Time,
        RepKind::Dt1,
        RepKind::Dt2,
        RepKind::HilbertMagnitude,
        RepKind::DwtApprox,
        RepKind::FftMagnitude,
        RepKind::Dct,
        RepKind::Acf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RepKind::Time => "TIME",
            RepKind::Dt1 => "DT1",
            RepKind::Dt2 => "DT2",
            RepKind::HilbertMagnitude => "HLB_MAG",
            RepKind::DwtApprox => "DWT_A",
            RepKind::FftMagnitude => "FFT_MAG",
            RepKind::Dct => "DCT",
            RepKind::Acf => "ACF",
        }
    }

    /// Applies the transform to an (already z-normalized) series.
    pub fn apply(self, values: &[f64]) -> Result<Vec<f64>> {
        match self {
            RepKind::Time => {
                check_finite("TIME", values)?;
                Ok(values.to_vec())
            }
            RepKind::Dt1 => derivative(values, 1),
            RepKind::Dt2 => derivative(values, 2),
            RepKind::HilbertMagnitude => hilbert_magnitude(values),
            RepKind::DwtApprox => dwt_approx(values),
            RepKind::FftMagnitude => fft_magnitude(values),
            RepKind::Dct => dct(values),
            RepKind::Acf => acf(values),
        }
    }
}

impl fmt::Display for RepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RepKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// Named representation sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `TIME` only.
    Raw,
    /// `TIME, DT1, FFT_MAG`.
    Minimal,
    /// All eight representations.
    Default,
}

impl Preset {
    pub fn kinds(self) -> Vec<RepKind> {
        match self {
            Preset::Raw => vec![RepKind::Time],
            Preset::Minimal => vec![RepKind::Time, RepKind::Dt1, RepKind::FftMagnitude],
            Preset::Default => RepKind::ALL.to_vec(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::Raw => "raw",
            Preset::Minimal => "minimal",
            Preset::Default => "default",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Preset::Raw),
            "minimal" => Ok(Preset::Minimal),
            "default" => Ok(Preset::Default),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown preset `{other}` (expected raw, minimal or default)"
            ))),
        }
    }
}

/// Parses a comma-separated list such as `TIME,DT1,FFT_MAG`.
pub fn parse_kinds(list: &str) -> Result<Vec<RepKind>> {
    let kinds = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(RepKind::from_str)
        .collect::<Result<Vec<_>>>()?;
    validate_kinds(&kinds)?;
    Ok(kinds)
}

fn validate_kinds(kinds: &[RepKind]) -> Result<()> {
    if kinds.is_empty() {
        return Err(Error::EmptyKinds);
    }
    for (i, k) in kinds.iter().enumerate() {
        if kinds[..i].contains(k) {
            return Err(Error::DuplicateKind(k.as_str()));
        }
    }
    Ok(())
}

/// `R x L` channel stack, row-major, rows ordered as `kinds`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepStack {
    kinds: Vec<RepKind>,
    len: usize,
    data: Vec<f64>,
}

impl RepStack {
    pub fn kinds(&self) -> &[RepKind] {
        &self.kinds
    }

    pub fn channels(&self) -> usize {
        self.kinds.len()
    }

    /// Series length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index * self.len..(index + 1) * self.len]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.len)
    }

    /// Flat row-major `R * L` values.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { context, index }),
        None => Ok(()),
    }
}

fn check_len(op: &'static str, values: &[f64], min: usize) -> Result<()> {
    if values.len() < min {
        return Err(Error::TooShort {
            op,
            len: values.len(),
            min,
        });
    }
    check_finite(op, values)
}

/// Zero mean, unit population standard deviation. Sequences whose standard
/// deviation is below [`DEGENERATE_STD`] become all zeros.
pub fn znormalize(values: &[f64]) -> Result<Vec<f64>> {
    check_len("znormalize", values, 1)?;
    let mean = math::mean(values);
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / values.len() as f64;
    let std = math::sqrt(var);
    if std < DEGENERATE_STD {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|x| (x - mean) / std).collect())
}

fn forward_difference(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut out: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    out.push(out[n - 2]);
    out
}

/// Forward difference with the last sample replicated; order 2 applies the
/// first-order rule twice.
pub fn derivative(values: &[f64], order: u8) -> Result<Vec<f64>> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    check_len("derivative", values, 3)?;
    let mut out = forward_difference(values);
    if order == 2 {
        out = forward_difference(&out);
    }
    Ok(out)
}

/// DFT magnitudes for `k = 0..=L/2`, zero-padded to `L`.
pub fn fft_magnitude(values: &[f64]) -> Result<Vec<f64>> {
    check_len("fft_magnitude", values, 4)?;
    Ok(spectral::fft_magnitude_unchecked(values))
}

/// Orthonormal DCT-II.
pub fn dct(values: &[f64]) -> Result<Vec<f64>> {
    check_len("dct", values, 4)?;
    Ok(spectral::dct_unchecked(values))
}

/// Biased autocorrelation `r[tau] = sum_t x[t] x[t+tau] / sum_t x[t]^2`,
/// all lags `0..L`. Always within `[-1, 1]`.
pub fn acf(values: &[f64]) -> Result<Vec<f64>> {
    check_len("acf", values, 4)?;
    let energy: f64 = values.iter().map(|x| x * x).sum();
    if energy < DEGENERATE_ENERGY {
        return Ok(vec![0.0; values.len()]);
    }
    let mut lagged = spectral::lagged_products(values);
    for r in lagged.iter_mut() {
        *r = (*r / energy).clamp(-1.0, 1.0);
    }
    lagged[0] = 1.0;
    Ok(lagged)
}

/// Envelope of the analytic signal.
pub fn hilbert_magnitude(values: &[f64]) -> Result<Vec<f64>> {
    check_len("hilbert_magnitude", values, 8)?;
    Ok(spectral::hilbert_magnitude_unchecked(values))
}

/// Single-level Haar approximation coefficients, each repeated twice and
/// truncated back to `L`. An odd tail sample is paired with itself.
pub fn dwt_approx(values: &[f64]) -> Result<Vec<f64>> {
    let coeffs = haar_approx_coefficients(values)?;
    let mut out = Vec::with_capacity(values.len());
    for c in coeffs {
        out.push(c);
        out.push(c);
    }
    out.truncate(values.len());
    Ok(out)
}

/// The `ceil(L/2)` Haar approximation coefficients before upsampling.
pub fn haar_approx_coefficients(values: &[f64]) -> Result<Vec<f64>> {
    check_len("dwt_approx", values, 4)?;
    let n = values.len();
    let inv_sqrt2 = 1.0 / core::f64::consts::SQRT_2;
    Ok((0..n.div_ceil(2))
        .map(|i| {
            let a = values[2 * i];
            let b = if 2 * i + 1 < n { values[2 * i + 1] } else { a };
            (a + b) * inv_sqrt2
        })
        .collect())
}

/// z-normalizes the series once, applies every requested transform and
/// z-normalizes each resulting channel.
pub fn build_stack(values: &[f64], kinds: &[RepKind]) -> Result<RepStack> {
    validate_kinds(kinds)?;
    let base = znormalize(values)?;
    let mut data = Vec::with_capacity(kinds.len() * values.len());
    for &kind in kinds {
        let channel = kind.apply(&base)?;
        data.extend(znormalize(&channel)?);
    }
    Ok(RepStack {
        kinds: kinds.to_vec(),
        len: values.len(),
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn mean_std(x: &[f64]) -> (f64, f64) {
        let m = math::mean(x);
        let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64;
        (m, math::sqrt(v))
    }

    #[test]
    fn znormalize_closed_form() {
        let z = znormalize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = math::sqrt(1.25);
        let expected = [-1.5 / s, -0.5 / s, 0.5 / s, 1.5 / s];
        assert!(close(&z, &expected, 1e-12));
        assert!(close(&z, &[-1.3416, -0.4472, 0.4472, 1.3416], 1e-4));
        let (m, sd) = mean_std(&z);
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn znormalize_constant_is_zero() {
        assert_eq!(znormalize(&[5.0; 4]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn znormalize_is_idempotent() {
        let z = znormalize(&[3.0, -1.0, 4.0, 1.0, 5.0, 9.0]).unwrap();
        assert!(close(&znormalize(&z).unwrap(), &z, 1e-12));
    }

    #[test]
    fn znormalize_rejects_non_finite() {
        assert!(matches!(
            znormalize(&[1.0, f64::NAN, 2.0]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(
            derivative(&[1.0, 2.0, 4.0, 7.0], 1).unwrap(),
            vec![1.0, 2.0, 3.0, 3.0]
        );
        assert_eq!(derivative(&[2.0; 5], 1).unwrap(), vec![0.0; 5]);
        let ramp: Vec<f64> = (0..6).map(|i| 0.5 * i as f64 - 1.0).collect();
        assert_eq!(derivative(&ramp, 2).unwrap(), vec![0.0; 6]);
        assert_eq!(derivative(&ramp, 3), Err(Error::InvalidOrder(3)));
        assert_eq!(derivative(&ramp, 0), Err(Error::InvalidOrder(0)));
    }

    #[test]
    fn double_first_order_equals_second_order() {
        let x = [0.3, -1.2, 2.5, 0.0, 4.4, -3.3, 1.0];
        let twice = derivative(&derivative(&x, 1).unwrap(), 1).unwrap();
        assert_eq!(twice, derivative(&x, 2).unwrap());
    }

    #[test]
    fn fft_magnitude_of_pure_cosine() {
        let n = 32;
        let x: Vec<f64> = (0..n)
            .map(|t| math::cos(2.0 * PI * 3.0 * t as f64 / n as f64))
            .collect();
        let mag = fft_magnitude(&x).unwrap();
        assert_eq!(mag.len(), n);
        assert!((mag[3] - 16.0).abs() < 1e-9);
        for (k, m) in mag.iter().enumerate() {
            if k != 3 {
                assert!(*m < 1e-9, "bin {k} = {m}");
            }
        }
        assert_eq!(fft_magnitude(&[0.0; 8]).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn dct_examples() {
        assert!(close(
            &dct(&[1.0; 4]).unwrap(),
            &[2.0, 0.0, 0.0, 0.0],
            1e-12
        ));
        assert!(close(&dct(&[0.0; 5]).unwrap(), &[0.0; 5], 0.0));
    }

    #[test]
    fn acf_examples() {
        let r = acf(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);
        assert!((r[1] + 0.75).abs() < 1e-12);
        assert_eq!(acf(&[0.0; 6]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn hilbert_envelope_of_cosine_is_unity() {
        let n = 64;
        let x: Vec<f64> = (0..n)
            .map(|t| math::cos(2.0 * PI * 4.0 * t as f64 / n as f64))
            .collect();
        let env = hilbert_magnitude(&x).unwrap();
        for v in &env[4..n - 4] {
            assert!((0.99..=1.01).contains(v));
        }
        assert_eq!(hilbert_magnitude(&[0.0; 8]).unwrap(), vec![0.0; 8]);
        assert!(matches!(
            hilbert_magnitude(&[1.0; 7]),
            Err(Error::TooShort { min: 8, .. })
        ));
    }

    #[test]
    fn dwt_examples() {
        let r2 = core::f64::consts::SQRT_2;
        assert_eq!(haar_approx_coefficients(&[1.0; 4]).unwrap().len(), 2);
        assert!(close(&dwt_approx(&[1.0; 4]).unwrap(), &[r2; 4], 1e-15));
        assert!(close(
            &haar_approx_coefficients(&[2.0, 0.0, 2.0, 0.0]).unwrap(),
            &[r2, r2],
            1e-15
        ));
        assert_eq!(dwt_approx(&[0.0; 4]).unwrap(), vec![0.0; 4]);
        // odd length: last sample paired with itself
        let odd = dwt_approx(&[1.0, 1.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(odd.len(), 5);
        assert!((odd[4] - 6.0 / r2).abs() < 1e-12);
    }

    #[test]
    fn build_stack_time_only_equals_znormalized_input() {
        let x = [0.5, 2.0, -1.0, 3.5, 0.0, 1.0];
        let stack = build_stack(&x, &[RepKind::Time]).unwrap();
        assert_eq!(stack.channels(), 1);
        assert!(close(stack.channel(0), &znormalize(&x).unwrap(), 1e-12));
    }

    #[test]
    fn build_stack_all_rows_normalized_or_zero() {
        let x: Vec<f64> = (0..40)
            .map(|i| math::sin(i as f64 * 0.4) + 0.05 * i as f64)
            .collect();
        let stack = build_stack(&x, &RepKind::ALL).unwrap();
        assert_eq!(stack.channels(), 8);
        for row in stack.rows() {
            assert_eq!(row.len(), 40);
            let (m, s) = mean_std(row);
            let zero = row.iter().all(|v| *v == 0.0);
            assert!(zero || (m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9));
        }
    }

    #[test]
    fn build_stack_degenerate_derivative_channel() {
        let ramp: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let stack = build_stack(&ramp, &[RepKind::Time, RepKind::Dt1]).unwrap();
        assert!(stack.channel(1).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn build_stack_rejects_duplicates_and_empty() {
        let x = [1.0, 2.0, 3.0, 5.0];
        assert_eq!(
            build_stack(&x, &[RepKind::Time, RepKind::Time]),
            Err(Error::DuplicateKind("TIME"))
        );
        assert_eq!(build_stack(&x, &[]), Err(Error::EmptyKinds));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in RepKind::ALL {
            assert_eq!(k.as_str().parse::<RepKind>().unwrap(), k);
        }
        assert!(matches!(
            "FOO".parse::<RepKind>(),
            Err(Error::UnknownKind(_))
        ));
        assert_eq!(
            parse_kinds("TIME,DT1").unwrap(),
            vec![RepKind::Time, RepKind::Dt1]
        );
        assert_eq!(Preset::Minimal.kinds().len(), 3);
        assert_eq!("Default".parse::<Preset>().unwrap().kinds().len(), 8);
    }
}
