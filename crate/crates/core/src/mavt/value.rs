use super::MavtError;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Linear,
    /// `v(z) = (1 - e^{-cz}) / (1 - e^{-c})`; concave for `c > 0`.
    Exponential { c: f64 },
    /// Linear interpolation through `(z, v)` points, endpoints implied.
    Piecewise { points: Vec<(f64, f64)> },
}

/// Single-attribute value function mapping states between `worst` and `best`
/// onto [0, 1]. Works for either orientation of the attribute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ValueFunction {
    pub worst: f64,
    pub best: f64,
    pub shape: Shape,
}

/// `c` below this magnitude is treated as the linear limit.
const LINEAR_EPS: f64 = 1e-9;
const C_LIMIT: f64 = 700.0;

pub fn exponential(z: f64, c: f64) -> f64 {
    if c.abs() < LINEAR_EPS {
        z
    } else {
        (-c * z).exp_m1() / (-c).exp_m1()
    }
}

impl ValueFunction {
    pub fn linear(worst: f64, best: f64) -> Self {
        Self {
            worst,
            best,
            shape: Shape::Linear,
        }
    }

    /// Position of `state` between worst (0) and best (1), clamped.
    pub fn normalise(&self, state: f64) -> f64 {
        if self.best == self.worst {
            return 1.0;
        }
        ((state - self.worst) / (self.best - self.worst)).clamp(0.0, 1.0)
    }

    pub fn value(&self, state: f64) -> f64 {
        let z = self.normalise(state);
        if z == 0.0 || z == 1.0 {
            return z;
        }
        match &self.shape {
            Shape::Linear => z,
            Shape::Exponential { c } => exponential(z, *c),
            Shape::Piecewise { points } => {
                let mut prev = (0.0, 0.0);
                for &(pz, pv) in points.iter().chain(std::iter::once(&(1.0, 1.0))) {
                    if z <= pz {
                        let t = if pz > prev.0 { (z - prev.0) / (pz - prev.0) } else { 1.0 };
                        return prev.1 + t * (pv - prev.1);
                    }
                    prev = (pz, pv);
                }
                1.0
            }
        }
    }
}

/// An elicited mid-value point: the state judged to carry `value`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Midpoint {
    pub state: f64,
    pub value: f64,
}

/// Fits an exponential value function through elicited midpoints.
///
/// A single midpoint is matched exactly by root-finding on `c`; several are
/// fitted by least squares. No midpoints gives the linear function.
pub fn fit_savf(worst: f64, best: f64, midpoints: &[Midpoint]) -> Result<ValueFunction, MavtError> {
    if !(worst.is_finite() && best.is_finite()) || worst == best {
        return Err(MavtError::DegenerateRange { worst, best });
    }
    let lin = ValueFunction::linear(worst, best);
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(midpoints.len());
    for m in midpoints {
        let z = (m.state - worst) / (best - worst);
        if !(z > 0.0 && z < 1.0) || !(m.value > 0.0 && m.value < 1.0) {
            return Err(MavtError::MidpointOutOfRange { state: m.state, value: m.value });
        }
        pts.push((z, m.value));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.windows(2).any(|w| w[1].1 <= w[0].1 || w[1].0 == w[0].0) {
        return Err(MavtError::NonMonotone);
    }
    let c = match pts.as_slice() {
        [] => return Ok(lin),
        [(z, v)] => solve_single(*z, *v)?,
        _ => least_squares(&pts),
    };
    Ok(ValueFunction {
        shape: if c.abs() < LINEAR_EPS { Shape::Linear } else { Shape::Exponential { c } },
        ..lin
    })
}

/// Root of `exponential(z, c) = v` in `c`; the left side increases with `c`.
fn solve_single(z: f64, v: f64) -> Result<f64, MavtError> {
    let f = |c: f64| exponential(z, c) - v;
    if f(0.0).abs() < 1e-15 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = if f(0.0) < 0.0 { (0.0, 1.0) } else { (-1.0, 0.0) };
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > C_LIMIT {
            return Err(MavtError::CurvatureOutOfRange);
        }
    }
    while f(lo) > 0.0 {
        hi = lo;
        lo *= 2.0;
        if lo < -C_LIMIT {
            return Err(MavtError::CurvatureOutOfRange);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn least_squares(pts: &[(f64, f64)]) -> f64 {
    let sse = |c: f64| pts.iter().map(|&(z, v)| (exponential(z, c) - v).powi(2)).sum::<f64>();
    // coarse scan, then golden-section refinement around the best grid point
    let step = 0.1;
    let best = (-500..=500)
        .map(|k| k as f64 * step)
        .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
        .unwrap_or(0.0);
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let c1 = b - g * (b - a);
        let c2 = a + g * (b - a);
        if sse(c1) < sse(c2) {
            b = c2;
        } else {
            a = c1;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_midpoint_is_linear() {
        let f = fit_savf(0.0, 10.0, &[Midpoint { state: 5.0, value: 0.5 }]).unwrap();
        assert_eq!(f.shape, Shape::Linear);
        assert_eq!(fit_savf(0.0, 10.0, &[]).unwrap().shape, Shape::Linear);
    }

    #[test]
    fn quarter_midpoint_is_concave() {
        let f = fit_savf(0.0, 1.0, &[Midpoint { state: 0.25, value: 0.5 }]).unwrap();
        let Shape::Exponential { c } = f.shape else { panic!("expected exponential") };
        assert!((c - 2.4375).abs() < 1e-3, "{c}");
        assert!((f.value(0.25) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lower_better_orientation() {
        // worst is the high state
        let f = fit_savf(100.0, 20.0, &[Midpoint { state: 80.0, value: 0.5 }]).unwrap();
        assert_eq!(f.value(100.0), 0.0);
        assert_eq!(f.value(20.0), 1.0);
        assert!((f.value(80.0) - 0.5).abs() < 1e-9);
        assert!(f.value(50.0) > f.value(60.0));
        assert_eq!(f.value(150.0), 0.0);
    }

    #[test]
    fn invalid_midpoints_rejected() {
        assert!(matches!(
            fit_savf(0.0, 1.0, &[Midpoint { state: 0.3, value: 0.6 }, Midpoint { state: 0.6, value: 0.4 }]),
            Err(MavtError::NonMonotone)
        ));
        assert!(fit_savf(0.0, 1.0, &[Midpoint { state: 1.2, value: 0.5 }]).is_err());
        assert!(fit_savf(0.0, 1.0, &[Midpoint { state: 0.5, value: 1.0 }]).is_err());
        assert!(fit_savf(3.0, 3.0, &[]).is_err());
    }

    #[test]
    fn least_squares_recovers_consistent_points() {
        let c = 1.7;
        let pts: Vec<Midpoint> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&z| Midpoint { state: z, value: exponential(z, c) })
            .collect();
        let f = fit_savf(0.0, 1.0, &pts).unwrap();
        let Shape::Exponential { c: fitted } = f.shape else { panic!() };
        assert!((fitted - c).abs() < 1e-6);
    }

    #[test]
    fn piecewise_interpolates() {
        let f = ValueFunction {
            worst: 0.0,
            best: 1.0,
            shape: Shape::Piecewise {
                points: vec![(0.5, 0.8)],
            },
        };
        assert!((f.value(0.25) - 0.4).abs() < 1e-12);
        assert!((f.value(0.75) - 0.9).abs() < 1e-12);
    }
}
