//! Piecewise cubic Hermite record of a vector signal.

use alloc::{vec, vec::Vec};

use crate::{Error, Result};

/// Lookups this close outside the recorded span snap to its ends.
fn span_slack(t: f64) -> f64 {
    1e-10 * (1.0 + t.abs())
}

/// A vector signal stored as nodes `(t_k, x_k, x'_k)` joined by cubic
/// Hermite segments.
///
/// Node times are non-decreasing. Two consecutive nodes at the same time
/// form a zero-length segment: the signal may jump there (an input that is
/// switched on at `t = 0`) or keep its value and only change slope (a
/// state trajectory leaving its initial function). Lookups at such a time
/// return the later node.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    dim: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl History {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            values: Vec::new(),
            slopes: Vec::new(),
        }
    }

    /// Constant signal equal to `value` on `[from, to]`.
    pub fn constant(value: &[f64], from: f64, to: f64) -> Result<Self> {
        let mut h = Self::new(value.len());
        let zero = vec![0.0; value.len()];
        h.push(from, value, &zero)?;
        if to > from {
            h.push(to, value, &zero)?;
        }
        Ok(h)
    }

    /// Samples `f(t) -> (value, derivative)` on `segments + 1` uniform nodes.
    pub fn from_fn<F>(dim: usize, from: f64, to: f64, segments: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> (Vec<f64>, Vec<f64>),
    {
        let mut h = Self::new(dim);
        let segments = segments.max(1);
        for k in 0..=segments {
            let t = if k == segments {
                to
            } else {
                from + (to - from) * k as f64 / segments as f64
            };
            let (v, d) = f(t);
            h.push(t, &v, &d)?;
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_min(&self) -> f64 {
        self.times.first().copied().unwrap_or(f64::NAN)
    }

    pub fn t_max(&self) -> f64 {
        self.times.last().copied().unwrap_or(f64::NAN)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn node_value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn node_slope(&self, k: usize) -> &[f64] {
        &self.slopes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn push(&mut self, t: f64, value: &[f64], slope: &[f64]) -> Result<()> {
        if value.len() != self.dim || slope.len() != self.dim {
            return Err(Error::Dimension(alloc::format!(
                "history node has dimension {}/{}, expected {}",
                value.len(),
                slope.len(),
                self.dim
            )));
        }
        if !t.is_finite() || value.iter().chain(slope).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("history node"));
        }
        if let Some(&last) = self.times.last() {
            if t < last {
                return Err(Error::Validation(alloc::format!(
                    "history node at {t} precedes the last node at {last}"
                )));
            }
        }
        self.times.push(t);
        self.values.extend_from_slice(value);
        self.slopes.extend_from_slice(slope);
        Ok(())
    }

    /// Overwrites node `k` in place.
    pub fn set_node(&mut self, k: usize, value: Option<&[f64]>, slope: Option<&[f64]>) {
        let d = self.dim;
        if let Some(v) = value {
            self.values[k * d..(k + 1) * d].copy_from_slice(v);
        }
        if let Some(s) = slope {
            self.slopes[k * d..(k + 1) * d].copy_from_slice(s);
        }
    }

    /// Checks that `[from, to]` lies inside the recorded span.
    pub fn require_span(&self, from: f64, to: f64) -> Result<()> {
        let ok = !self.is_empty()
            && from >= self.t_min() - span_slack(from)
            && to <= self.t_max() + span_slack(to);
        if ok {
            Ok(())
        } else {
            Err(Error::History {
                have_from: self.t_min(),
                have_to: self.t_max(),
                need_from: from,
                need_to: to,
            })
        }
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` used for time `t`, or the
    /// last node index when `t` sits on the right end.
    fn locate(&self, t: f64) -> Result<usize> {
        self.require_span(t, t)?;
        let n = self.times.len();
        let idx = self.times.partition_point(|&s| s <= t);
        Ok(match idx {
            0 => 0,
            i if i >= n => n - 1,
            i => i - 1,
        })
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let k = self.locate(t)?;
        let d = self.dim;
        if k + 1 >= self.times.len() {
            out.copy_from_slice(self.node_value(k));
            return Ok(());
        }
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        if h <= 0.0 {
            out.copy_from_slice(self.node_value(k + 1));
            return Ok(());
        }
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = (s3 - s2) * h;
        let (y0, y1) = (&self.values[k * d..], &self.values[(k + 1) * d..]);
        let (m0, m1) = (&self.slopes[k * d..], &self.slopes[(k + 1) * d..]);
        for i in 0..d {
            out[i] = h00 * y0[i] + h10 * m0[i] + h01 * y1[i] + h11 * m1[i];
        }
        Ok(())
    }

    /// Left limit at `t`: differs from [`History::eval_into`] only at a
    /// jump, where it returns the earlier node.
    pub fn eval_left_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        self.require_span(t, t)?;
        let idx = self.times.partition_point(|&s| s < t);
        if idx >= 1 && idx < self.times.len() {
            let (t0, t1) = (self.times[idx - 1], self.times[idx]);
            if t1 == t && t0 < t1 {
                out.copy_from_slice(self.node_value(idx));
                return Ok(());
            }
        }
        self.eval_into(t, out)
    }

    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }

    /// Exact integral of the piecewise cubic over `[from, to]`.
    pub fn integrate(&self, from: f64, to: f64) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.dim];
        if to <= from {
            if to < from {
                let mut r = self.integrate(to, from)?;
                r.iter_mut().for_each(|v| *v = -*v);
                return Ok(r);
            }
            return Ok(acc);
        }
        self.require_span(from, to)?;
        let d = self.dim;
        for k in 0..self.times.len().saturating_sub(1) {
            let (t0, t1) = (self.times[k], self.times[k + 1]);
            let h = t1 - t0;
            if h <= 0.0 || t1 <= from || t0 >= to {
                continue;
            }
            let a = ((from.max(t0) - t0) / h).clamp(0.0, 1.0);
            let b = ((to.min(t1) - t0) / h).clamp(0.0, 1.0);
            let w = |s: f64| {
                let s2 = s * s;
                let s3 = s2 * s;
                let s4 = s3 * s;
                [
                    s4 / 2.0 - s3 + s,
                    (s4 / 4.0 - 2.0 * s3 / 3.0 + s2 / 2.0) * h,
                    -s4 / 2.0 + s3,
                    (s4 / 4.0 - s3 / 3.0) * h,
                ]
            };
            let (wa, wb) = (w(a), w(b));
            let c: [f64; 4] = core::array::from_fn(|i| (wb[i] - wa[i]) * h);
            let (y0, y1) = (&self.values[k * d..], &self.values[(k + 1) * d..]);
            let (m0, m1) = (&self.slopes[k * d..], &self.slopes[(k + 1) * d..]);
            for i in 0..d {
                acc[i] += c[0] * y0[i] + c[1] * m0[i] + c[2] * y1[i] + c[3] * m1[i];
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(t: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![t * t * t - t, 2.0 * t], vec![3.0 * t * t - 1.0, 2.0])
    }

    #[test]
    fn reproduces_cubics_exactly() {
        let h = History::from_fn(2, -1.0, 2.0, 7, cubic).unwrap();
        for &t in &[-1.0, -0.33, 0.0, 0.5, 1.999, 2.0] {
            let v = h.eval(t).unwrap();
            let (want, _) = cubic(t);
            assert!((v[0] - want[0]).abs() < 1e-13 && (v[1] - want[1]).abs() < 1e-13);
        }
        // ∫_{-0.5}^{1.5} (t³ − t) dt = [t⁴/4 − t²/2] = (1.265625 − 1.125) − (0.015625 − 0.125)
        let i = h.integrate(-0.5, 1.5).unwrap();
        assert!((i[0] - 0.25).abs() < 1e-13);
        assert!((i[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn out_of_span_lookup_is_an_error() {
        let h = History::constant(&[1.0], -1.0, 0.0).unwrap();
        assert!(matches!(h.eval(0.5), Err(Error::History { .. })));
        assert!(matches!(h.eval(-1.5), Err(Error::History { .. })));
        assert_eq!(h.eval(-1.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn duplicate_node_is_a_jump() {
        let mut h = History::constant(&[0.0], -1.0, 0.0).unwrap();
        h.push(0.0, &[3.0], &[0.0]).unwrap();
        h.push(1.0, &[3.0], &[0.0]).unwrap();
        assert_eq!(h.eval(-1e-3).unwrap(), vec![0.0]);
        assert_eq!(h.eval(0.0).unwrap(), vec![3.0]);
        let mut left = [9.0];
        h.eval_left_into(0.0, &mut left).unwrap();
        assert_eq!(left, [0.0]);
        h.eval_left_into(0.5, &mut left).unwrap();
        assert_eq!(left, [3.0]);
        assert!((h.integrate(-1.0, 1.0).unwrap()[0] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_decreasing_times() {
        let mut h = History::new(1);
        h.push(1.0, &[0.0], &[0.0]).unwrap();
        assert!(h.push(0.5, &[0.0], &[0.0]).is_err());
    }
}
