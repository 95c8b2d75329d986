//! Cosine-annealing learning-rate schedule with warm restarts.
//!
//! Within a period of length `T` the rate follows
//! `eta_min + (eta_max - eta_min) * (1 + cos(pi * t / T)) / 2` where `t`
//! counts optimizer steps since the last restart. Periods grow
//! geometrically: the first lasts `t0` steps, each following period is
//! `t_mult` times longer, so restarts land at `t0`, `t0 + t0*t_mult`, ...
//! The schedule is a pure function of the step index.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Warm-restart cosine schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub eta_max: f64,
    pub eta_min: f64,
    /// Steps in the first period (>= 1).
    pub t0: usize,
    /// Period growth factor (>= 1; 1 keeps every period at `t0`).
    pub t_mult: u32,
}

impl LrSchedule {
    pub fn new(eta_max: f64, eta_min: f64, t0: usize, t_mult: u32) -> Result<Self> {
        let ok = eta_max.is_finite()
            && eta_min.is_finite()
            && eta_min >= 0.0
            && eta_max >= eta_min
            && t0 >= 1
            && t_mult >= 1;
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "cosine schedule needs eta_max >= eta_min >= 0, t0 >= 1, t_mult >= 1; \
                 got eta_max={eta_max}, eta_min={eta_min}, t0={t0}, t_mult={t_mult}"
            )));
        }
        Ok(LrSchedule { eta_max, eta_min, t0, t_mult })
    }
}

/// Learning rate at a global step index (0-based).
pub fn lr_at(s: &LrSchedule, step: usize) -> f64 {
    let (t_cur, period) = if s.t_mult == 1 {
        (step % s.t0, s.t0)
    } else {
        let mut rem = step;
        let mut period = s.t0;
        while rem >= period {
            rem -= period;
            period = period
                .checked_mul(s.t_mult as usize)
                .expect("schedule period overflow");
        }
        (rem, period)
    };
    if t_cur == 0 {
        // Restart boundary: back to the peak exactly.
        return s.eta_max;
    }
    let cos = (PI * t_cur as f64 / period as f64).cos();
    s.eta_min + (s.eta_max - s.eta_min) * (1.0 + cos) / 2.0
}
