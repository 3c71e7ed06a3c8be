use crate::panel::{is_january, MonthlyRecord};

/// Five window operations over a 24-month series ending at the snapshot `t`.
///
/// `values[0]` is month `t-23` and `values[23]` is month `t`.
#[derive(Debug, Clone, Copy)]
pub struct WindowStats<'a> {
    values: &'a [f64],
}

impl<'a> WindowStats<'a> {
    pub fn new(values: &'a [f64]) -> Self {
        assert_eq!(values.len(), 24, "window must span 24 months");
        WindowStats { values }
    }

    /// `X_t`
    pub fn current(&self) -> f64 {
        self.values[23]
    }

    /// `X_{t-lag}`
    pub fn at_lag(&self, lag: usize) -> f64 {
        self.values[23 - lag]
    }

    /// `X_t - X_{t-11}`
    pub fn delta(&self) -> f64 {
        self.values[23] - self.values[12]
    }

    /// `X_{t-12} - X_{t-23}`
    pub fn delta_lagged(&self) -> f64 {
        self.values[11] - self.values[0]
    }

    /// `X_t - X_{t-23}`
    pub fn delta_delta(&self) -> f64 {
        self.values[23] - self.values[0]
    }

    /// Mean over `[t-11, t]`.
    pub fn mean(&self) -> f64 {
        mean(&self.values[12..])
    }

    /// Mean over `[t-23, t-12]`.
    pub fn mean_lagged(&self) -> f64 {
        mean(&self.values[..12])
    }

    /// Sample standard deviation over `[t-11, t]`.
    pub fn sd(&self) -> f64 {
        sample_sd(&self.values[12..])
    }

    /// Sample standard deviation over `[t-23, t-12]`.
    pub fn sd_lagged(&self) -> f64 {
        sample_sd(&self.values[..12])
    }

    pub fn last_year(&self) -> &'a [f64] {
        &self.values[12..]
    }
}

/// `MEAN_TCREDIT_t`: mean monthly credits over `[t-23, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationBase {
    pub mean_tcredit: f64,
}

impl NormalizationBase {
    pub fn from_window(window: &[MonthlyRecord]) -> Self {
        let tc: Vec<f64> = window.iter().map(|r| r.tcredit).collect();
        NormalizationBase {
            mean_tcredit: mean(&tc),
        }
    }

    /// `x / MEAN_TCREDIT_t`, masked (`NaN`) when the base is zero.
    pub fn normalize(&self, x: f64) -> f64 {
        ratio(x, self.mean_tcredit)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub(crate) fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let ss: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (v.len() - 1) as f64).sqrt()
}

/// `num / den`, `NaN` when `den == 0`.
pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

pub(crate) fn series(window: &[MonthlyRecord], f: impl Fn(&MonthlyRecord) -> f64) -> Vec<f64> {
    window.iter().map(f).collect()
}

/// Per-month amounts recovered from a year-to-date cumulative counter.
///
/// The first entry has no predecessor and keeps its cumulative value, so
/// callers should only read positions `k >= 1` unless the window starts in January.
pub(crate) fn monthly_from_cumulative(
    window: &[MonthlyRecord],
    f: impl Fn(&MonthlyRecord) -> f64,
) -> Vec<f64> {
    window
        .iter()
        .enumerate()
        .map(|(k, r)| {
            if k == 0 || is_january(r.month_index) {
                f(r)
            } else {
                f(r) - f(&window[k - 1])
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operations_on_a_ramp() {
        let v: Vec<f64> = (0..24).map(|k| k as f64).collect();
        let w = WindowStats::new(&v);
        assert_eq!(w.current(), 23.0);
        assert_eq!(w.delta(), 11.0);
        assert_eq!(w.delta_lagged(), 11.0);
        assert_eq!(w.delta_delta(), 23.0);
        assert_eq!(w.mean(), 17.5);
        assert_eq!(w.mean_lagged(), 5.5);
        assert!((w.sd() - (13.0f64).sqrt()).abs() < 1e-12);
        assert!(w.sd() >= 0.0);
    }

    #[test]
    fn zero_base_masks() {
        let b = NormalizationBase { mean_tcredit: 0.0 };
        assert!(b.normalize(5.0).is_nan());
    }
}
