//! Dip-to-peak metrics for a pair of neighbouring lines.

use serde::Serialize;

use super::{AnalysisError, Profile};

/// Ratio at or below which two lines count as resolved.
pub const RAYLEIGH_RATIO: f64 = 0.81;

/// Maxima below this fraction of the global maximum in prominence are ignored.
const MIN_PROMINENCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSlitMetrics {
    pub v_dip: f64,
    pub v_peak: f64,
    /// `v_dip / v_peak`; 1 when no dip exists.
    pub ratio: f64,
    /// `(1 - R) / (1 + R)`.
    pub contrast: f64,
    pub resolved: bool,
    pub no_dip: bool,
    pub peak_positions: (f64, f64),
    pub dip_position: f64,
}

impl TwoSlitMetrics {
    fn from_values(v_dip: f64, v_peak: f64, peaks: (f64, f64), dip: f64) -> Self {
        let ratio = v_dip / v_peak;
        Self {
            v_dip,
            v_peak,
            ratio,
            contrast: (1.0 - ratio) / (1.0 + ratio),
            resolved: ratio <= RAYLEIGH_RATIO,
            no_dip: false,
            peak_positions: peaks,
            dip_position: dip,
        }
    }
}

fn smooth(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn prominence(s: &[f64], i: usize) -> f64 {
    let h = s[i];
    let mut left = h;
    for j in (0..i).rev() {
        if s[j] > h {
            break;
        }
        left = left.min(s[j]);
    }
    let mut right = h;
    for &sj in &s[i + 1..] {
        if sj > h {
            break;
        }
        right = right.min(sj);
    }
    h - left.max(right)
}

/// Parabolic vertex through samples `i-1, i, i+1` as `(x, value)`.
fn refine(x: &[f64], v: &[f64], i: usize) -> (f64, f64) {
    if i == 0 || i + 1 >= v.len() {
        return (x[i], v[i]);
    }
    let (y0, y1, y2) = (v[i - 1], v[i], v[i + 1]);
    let curv = y0 - 2.0 * y1 + y2;
    if curv == 0.0 {
        return (x[i], y1);
    }
    let d = 0.5 * (y0 - y2) / curv;
    if d.abs() > 1.0 {
        return (x[i], y1);
    }
    let h = x[i + 1] - x[i];
    (x[i] + d * h, y1 - 0.25 * (y0 - y2) * d)
}

/// Raw-sample extremum within one sample of `i`.
fn snap(v: &[f64], i: usize, max: bool) -> usize {
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(v.len() - 1);
    (lo..=hi)
        .reduce(|a, b| if (v[b] > v[a]) == max && v[b] != v[a] { b } else { a })
        .unwrap_or(i)
}

/// Dip and peak levels between the two maxima nearest the profile centre.
///
/// Maxima are located on a 3-sample moving average and filtered by
/// prominence; values are refined by parabolic interpolation on the raw
/// samples. A profile without two distinct maxima yields `R = 1`.
pub fn two_slit_metrics(profile: &Profile) -> Result<TwoSlitMetrics, AnalysisError> {
    let n = profile.len();
    if n < 5 {
        return Err(AnalysisError::TooFewSamples(n));
    }
    let (x, v) = (&profile.x, &profile.v);
    let s = smooth(v);
    let gmax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(gmax > 0.0) {
        return Err(AnalysisError::NoPeak);
    }
    let maxima: Vec<usize> = (1..n - 1)
        .filter(|&i| s[i] > s[i - 1] && s[i] >= s[i + 1])
        .filter(|&i| prominence(&s, i) >= MIN_PROMINENCE * gmax)
        .collect();
    if maxima.len() < 2 {
        let (i, _) = v
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &vi)| if vi > a.1 { (i, vi) } else { a });
        let (xp, vp) = refine(x, v, i);
        return Ok(TwoSlitMetrics {
            v_dip: vp,
            v_peak: vp,
            ratio: 1.0,
            contrast: 0.0,
            resolved: false,
            no_dip: true,
            peak_positions: (xp, xp),
            dip_position: xp,
        });
    }
    let centre = 0.5 * (x[0] + x[n - 1]);
    let (a, b) = maxima
        .windows(2)
        .map(|w| (w[0], w[1]))
        .min_by(|p, q| {
            let dp = (0.5 * (x[p.0] + x[p.1]) - centre).abs();
            let dq = (0.5 * (x[q.0] + x[q.1]) - centre).abs();
            dp.total_cmp(&dq)
        })
        .expect("at least two maxima");
    let dip = (a..=b).min_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap_or(a);

    let (xa, va) = refine(x, v, snap(v, a, true));
    let (xb, vb) = refine(x, v, snap(v, b, true));
    let (xd, mut vd) = refine(x, v, snap(v, dip, false));
    // A parabola through a flat dark floor can undershoot zero.
    if v.iter().all(|&vi| vi >= 0.0) {
        vd = vd.max(0.0);
    }
    Ok(TwoSlitMetrics::from_values(vd, 0.5 * (va + vb), (xa, xb), xd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss_pair(d: f64, w: f64, n: usize) -> Profile {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * 0.02).collect();
        let v = x
            .iter()
            .map(|&t| (-((t - d / 2.0) / w).powi(2)).exp() + (-((t + d / 2.0) / w).powi(2)).exp())
            .collect();
        Profile { x, v }
    }

    #[test]
    fn well_separated_lines() {
        let m = two_slit_metrics(&gauss_pair(4.0, 0.5, 401)).unwrap();
        assert!(m.ratio < 1e-6);
        assert!(m.resolved && !m.no_dip);
        assert!((m.v_peak - 1.0).abs() < 1e-4);
        assert!((m.peak_positions.0 + 2.0).abs() < 0.01 && (m.peak_positions.1 - 2.0).abs() < 0.01);
        assert!(m.dip_position.abs() < 1e-9);
    }

    #[test]
    fn analytic_ratio() {
        // Dip at 0 is 2 exp(-1); peaks sit close to (but not exactly at) ±1.
        let m = two_slit_metrics(&gauss_pair(2.0, 1.0 / 1.2, 801)).unwrap();
        let dip = 2.0 * (-(1.2f64).powi(2)).exp();
        assert!((m.v_dip - dip).abs() < 1e-6);
        let peak = (0..20001)
            .map(|i| 0.5 + i as f64 * 1e-4)
            .map(|t| (-((t - 1.0) * 1.2f64).powi(2)).exp() + (-((t + 1.0) * 1.2f64).powi(2)).exp())
            .fold(0.0, f64::max);
        assert!((m.ratio - dip / peak).abs() < 1e-4, "{} vs {}", m.ratio, dip / peak);
        assert!((m.contrast - (1.0 - m.ratio) / (1.0 + m.ratio)).abs() < 1e-15);
    }

    #[test]
    fn merged_lines_have_no_dip() {
        let m = two_slit_metrics(&gauss_pair(0.5, 1.0, 401)).unwrap();
        assert!(m.no_dip);
        assert_eq!(m.ratio, 1.0);
        assert!(!m.resolved);
    }

    #[test]
    fn threshold_is_inclusive() {
        let m = TwoSlitMetrics::from_values(0.81, 1.0, (0.0, 0.0), 0.0);
        assert!(m.resolved);
        let m = TwoSlitMetrics::from_values(0.8101, 1.0, (0.0, 0.0), 0.0);
        assert!(!m.resolved);
    }

    #[test]
    fn picks_central_pair_of_a_triplet() {
        let x: Vec<f64> = (0..601).map(|i| (i as f64 - 300.0) * 0.02).collect();
        let v = x
            .iter()
            .map(|&t| [-2.0, 0.0, 2.0].iter().map(|c| (-((t - c) / 0.6f64).powi(2)).exp()).sum())
            .collect();
        let m = two_slit_metrics(&Profile { x, v }).unwrap();
        assert!((m.dip_position.abs() - 1.0).abs() < 0.02);
        assert!(m.peak_positions.0.abs() < 0.05 || m.peak_positions.1.abs() < 0.05);
    }

    #[test]
    fn dark_floor_dip_is_not_negative() {
        // Peaks at +-10 over a floor whose three lowest samples bend the
        // fitted parabola below zero.
        let x: Vec<f64> = (0..41).map(|i| i as f64 - 20.0).collect();
        let v: Vec<f64> = x
            .iter()
            .map(|&t| match t as i64 {
                -1 => 1e-9,
                0 => 0.0,
                1 => 3e-9,
                _ => (-(t.abs() - 10.0).powi(2) / 8.0).exp() * (t.abs() / 10.0).min(1.0),
            })
            .collect();
        let m = two_slit_metrics(&Profile { x, v }).unwrap();
        assert!(m.v_dip >= 0.0 && m.ratio >= 0.0, "{m:?}");
    }

    #[test]
    fn dark_profile_rejected() {
        let p = Profile {
            x: (0..10).map(f64::from).collect(),
            v: vec![0.0; 10],
        };
        assert!(matches!(two_slit_metrics(&p), Err(AnalysisError::NoPeak)));
    }
}
