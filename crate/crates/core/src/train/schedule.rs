use alloc::format;
use alloc::vec::Vec;

use crate::window::WindowSpec;
use crate::{Error, Result};

/// One training stage: a share of the iterations, the window used
/// throughout it and the endpoints of its cosine learning-rate curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSpec {
    pub fraction: f64,
    pub window: WindowSpec,
    pub lr_start: f64,
    pub lr_end: f64,
}

impl StageSpec {
    pub fn new(fraction: f64, (h, w): (usize, usize), lr_start: f64, lr_end: f64) -> Result<Self> {
        Ok(StageSpec { fraction, window: WindowSpec::new(h, w)?, lr_start, lr_end })
    }

    /// Three stages, `1/2, 1/4, 1/4` of the run, over `(12,12)`, `(24,6)`
    /// and `(36,4)` windows.
    pub fn paper() -> Vec<StageSpec> {
        Self::three_stage([(12, 12), (24, 6), (36, 4)])
    }

    /// Same structure with windows sized for 24-pixel patches.
    pub fn desk() -> Vec<StageSpec> {
        Self::three_stage([(4, 4), (8, 2), (16, 1)])
    }

    fn three_stage(windows: [(usize, usize); 3]) -> Vec<StageSpec> {
        let lrs = [5e-4, 5e-5, 5e-5];
        let fractions = [0.5, 0.25, 0.25];
        (0..3).map(|i| StageSpec::new(fractions[i], windows[i], lrs[i], 5e-6).expect("valid windows")).collect()
    }
}

/// `lr_end + (lr_start - lr_end)(1 + cos(pi t / T)) / 2`, with `t` clamped
/// to `[0, T]`. `T = 0` yields `lr_start`.
pub fn cosine_lr(t: usize, period: usize, lr_start: f64, lr_end: f64) -> f64 {
    if period == 0 {
        return lr_start;
    }
    if t >= period {
        return lr_end;
    }
    let phase = core::f64::consts::PI * t as f64 / period as f64;
    lr_end + 0.5 * (lr_start - lr_end) * (1.0 + libm::cos(phase))
}

/// A stage resolved to iteration indices `start..end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stage {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub spec: StageSpec,
}

impl Stage {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, iter: usize) -> bool {
        (self.start..self.end).contains(&iter)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleStep {
    pub stage: usize,
    pub window: WindowSpec,
    pub lr: f64,
    pub first_in_stage: bool,
    pub last_in_stage: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlexibleSchedule {
    total: usize,
    stages: Vec<Stage>,
}

impl FlexibleSchedule {
    /// Splits `total` iterations at rounded cumulative fractions. Each
    /// stage's cosine curve starts at `lr_start` on its first iteration and
    /// reaches `lr_end` on its last.
    pub fn new(total: usize, specs: &[StageSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Config("schedule needs at least one stage".into()));
        }
        let sum: f64 = specs.iter().map(|s| s.fraction).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("stage fractions sum to {sum}, expected 1")));
        }
        for (i, s) in specs.iter().enumerate() {
            if !(s.fraction > 0.0) {
                return Err(Error::Config(format!("stage {i}: fraction must be positive, got {}", s.fraction)));
            }
            if !(s.lr_end > 0.0) || !(s.lr_start >= s.lr_end) || !s.lr_start.is_finite() {
                return Err(Error::Config(format!(
                    "stage {i}: need lr_start >= lr_end > 0, got {} and {}",
                    s.lr_start, s.lr_end
                )));
            }
        }
        let mut stages = Vec::with_capacity(specs.len());
        let mut acc = 0.0;
        let mut start = 0;
        for (index, &spec) in specs.iter().enumerate() {
            acc += spec.fraction;
            let end = if index + 1 == specs.len() { total } else { libm::round(acc * total as f64) as usize };
            if end <= start {
                return Err(Error::Config(format!("stage {index} gets no iterations out of {total}")));
            }
            stages.push(Stage { index, start, end, spec });
            start = end;
        }
        Ok(FlexibleSchedule { total, stages })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage_of(&self, iter: usize) -> Option<&Stage> {
        self.stages.iter().find(|s| s.contains(iter))
    }

    pub fn at(&self, iter: usize) -> Option<ScheduleStep> {
        let s = self.stage_of(iter)?;
        let t = iter - s.start;
        Some(ScheduleStep {
            stage: s.index,
            window: s.spec.window,
            lr: cosine_lr(t, s.len() - 1, s.spec.lr_start, s.spec.lr_end),
            first_in_stage: t == 0,
            last_in_stage: iter + 1 == s.end,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 10, 5e-4, 5e-6), 5e-4);
        assert_eq!(cosine_lr(10, 10, 5e-4, 5e-6), 5e-6);
        assert!((cosine_lr(5, 10, 5e-4, 5e-6) - 2.525e-4).abs() < 1e-12);
    }

    #[test]
    fn paper_stage_ranges() {
        let s = FlexibleSchedule::new(100_000, &StageSpec::paper()).unwrap();
        let r: Vec<_> = s.stages().iter().map(|s| (s.start, s.end, s.spec.window.h, s.spec.window.w)).collect();
        assert_eq!(r, vec![(0, 50_000, 12, 12), (50_000, 75_000, 24, 6), (75_000, 100_000, 36, 4)]);
        assert_eq!(s.at(0).unwrap().lr, 5e-4);
        assert_eq!(s.at(50_000).unwrap().lr, 5e-5);
        assert_eq!(s.at(99_999).unwrap().lr, 5e-6);
        assert!(s.at(100_000).is_none());
    }

    #[test]
    fn bad_fractions_are_rejected() {
        let mut st = StageSpec::paper();
        st[2].fraction = 0.3;
        assert!(matches!(FlexibleSchedule::new(100, &st), Err(Error::Config(_))));
        assert!(FlexibleSchedule::new(2, &StageSpec::paper()).is_err());
    }

    #[test]
    fn single_stage_is_plain_cosine() {
        let st = [StageSpec::new(1.0, (8, 2), 1e-3, 1e-5).unwrap()];
        let s = FlexibleSchedule::new(11, &st).unwrap();
        for i in 0..11 {
            assert_eq!(s.at(i).unwrap().lr, cosine_lr(i, 10, 1e-3, 1e-5));
        }
    }
}
