//! Central finite-difference gradient checking.
//!
//! Only evaluates the loss; it never touches the tape, so it is an
//! independent check of the analytic gradients.

use rand::Rng;

use super::params::ParamStore;
use crate::Result;

/// Denominator floor of [`relative_error`], so coordinates whose true
/// gradient is numerically zero are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Clone, Debug, Default)]
pub struct CoordinateCheck {
    pub param: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checks: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.checks
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
    }
}

/// Picks `count` (parameter, offset) coordinates uniformly over all scalars.
pub fn sample_coordinates(params: &ParamStore<f64>, count: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let total = params.numel();
    let sizes: Vec<usize> = params.iter().map(|(_, t)| t.len()).collect();
    (0..count)
        .map(|_| {
            let mut flat = rng.random_range(0..total);
            let mut id = 0;
            while flat >= sizes[id] {
                flat -= sizes[id];
                id += 1;
            }
            (id, flat)
        })
        .collect()
}

/// Compares `analytic[id][offset]` with `(L(θ + h) − L(θ − h)) / 2h`.
pub fn check_coordinates(
    params: &ParamStore<f64>,
    analytic: &[Vec<f64>],
    coords: &[(usize, usize)],
    h: f64,
    mut loss: impl FnMut(&ParamStore<f64>) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut work = params.clone();
    let mut checks = Vec::with_capacity(coords.len());
    for &(id, offset) in coords {
        let original = work.get(id).data()[offset];
        work.get_mut(id).data_mut()[offset] = original + h;
        let plus = loss(&work)?;
        work.get_mut(id).data_mut()[offset] = original - h;
        let minus = loss(&work)?;
        work.get_mut(id).data_mut()[offset] = original;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[id][offset];
        checks.push(CoordinateCheck {
            param: params.name(id).to_string(),
            offset,
            analytic: a,
            numeric,
            rel_error: relative_error(a, numeric),
        });
    }
    Ok(GradCheckReport { checks })
}
