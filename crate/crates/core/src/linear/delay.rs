use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Time-stamped history with linear interpolation between samples.
///
/// The line is seeded with `(t0, initial)`; queries before `t0` return the
/// initial value and queries past the newest sample return the newest.
#[derive(Debug, Clone)]
pub struct DelayLine {
    initial: f64,
    keep: f64,
    samples: VecDeque<(f64, f64)>,
}

impl DelayLine {
    /// `keep` is the longest lag that will be queried.
    pub fn new(initial: f64, t0: f64, keep: f64) -> Self {
        let mut samples = VecDeque::new();
        samples.push_back((t0, initial));
        DelayLine { initial, keep, samples }
    }

    pub fn latest(&self) -> (f64, f64) {
        *self.samples.back().unwrap()
    }

    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        let (last, _) = self.latest();
        if !(t > last) {
            return Err(Error::NonMonotoneTime { t, last });
        }
        self.samples.push_back((t, value));
        // drop samples no longer needed to interpolate at t − keep
        let horizon = t - self.keep;
        while self.samples.len() > 2 && self.samples[1].0 <= horizon {
            self.samples.pop_front();
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> f64 {
        if t < self.samples[0].0 {
            return self.initial;
        }
        let (t_last, v_last) = self.latest();
        if t >= t_last {
            return v_last;
        }
        let i = self.samples.partition_point(|s| s.0 <= t);
        let (ta, va) = self.samples[i - 1];
        let (tb, vb) = self.samples[i];
        va + (vb - va) * (t - ta) / (tb - ta)
    }

    /// Value `lag` seconds before the newest sample.
    pub fn lookup(&self, lag: f64) -> f64 {
        self.at(self.latest().0 - lag)
    }
}
