//! Derivative-free Nelder–Mead simplex minimization.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    /// Relative simplex-diameter tolerance.
    pub xtol: f64,
    /// Relative spread of objective values across the simplex.
    pub ftol: f64,
    /// Iteration cap across all restarts; `None` means `500 * dim`.
    pub max_iterations: Option<usize>,
    /// Rebuild the simplex around the best vertex after convergence and
    /// continue, up to this many times, while that still improves `fmin`.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions { xtol: 1e-8, ftol: 1e-10, max_iterations: None, max_restarts: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub argmin: Vec<f64>,
    pub fmin: f64,
    pub converged: bool,
    pub iterations: usize,
    pub restarts_used: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const NONZERO_STEP: f64 = 0.05;
const ZERO_STEP: f64 = 0.000_25;

/// Minimizes `objective` starting from `x0`.
///
/// Returns the best vertex found even when the iteration cap is hit; check
/// `converged`.
pub fn nelder_mead<F>(mut objective: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    if dim == 0 {
        return Err(Error::precondition("nelder_mead needs at least one coordinate"));
    }
    let f0 = objective(x0);
    if !f0.is_finite() {
        return Err(Error::InvalidStart);
    }
    let max_iter = opts.max_iterations.unwrap_or(500 * dim);

    let mut best = x0.to_vec();
    let mut fbest = f0;
    let mut iterations = 0;
    let mut restarts_used = 0;
    let mut converged;
    loop {
        let run = run_simplex(&mut objective, &best, fbest, opts, max_iter - iterations);
        iterations += run.iterations;
        let improved = fbest - run.fmin > opts.ftol * fbest.abs().max(1.0);
        if run.fmin <= fbest {
            best = run.argmin;
            fbest = run.fmin;
        }
        converged = run.converged;
        if !converged
            || restarts_used >= opts.max_restarts
            || iterations >= max_iter
            || (restarts_used > 0 && !improved)
        {
            break;
        }
        restarts_used += 1;
    }
    Ok(OptimResult { argmin: best, fmin: fbest, converged, iterations, restarts_used })
}

struct Run {
    argmin: Vec<f64>,
    fmin: f64,
    converged: bool,
    iterations: usize,
}

fn run_simplex<F>(objective: &mut F, x0: &[f64], f0: f64, opts: &NelderMeadOptions, budget: usize) -> Run
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    let mut vals: Vec<f64> = Vec::with_capacity(dim + 1);
    verts.push(x0.to_vec());
    vals.push(f0);
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] = if v[i] != 0.0 { v[i] * (1.0 + NONZERO_STEP) } else { ZERO_STEP };
        vals.push(objective(&v));
        verts.push(v);
    }

    let mut order: Vec<usize> = (0..=dim).collect();
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        let (ib, iw, isw) = (order[0], order[dim], order[dim - 1]);

        if has_converged(&verts, &vals, ib, iw, opts) {
            converged = true;
            break;
        }
        if iterations >= budget {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..dim] {
            for (c, &x) in centroid.iter_mut().zip(&verts[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= dim as f64);

        let along = |out: &mut [f64], coef: f64, worst: &[f64], centroid: &[f64]| {
            for ((o, &c), &w) in out.iter_mut().zip(centroid).zip(worst) {
                *o = c + coef * (c - w);
            }
        };

        along(&mut trial, REFLECT, &verts[iw], &centroid);
        let fr = objective(&trial);

        if fr < vals[ib] {
            along(&mut trial2, REFLECT * EXPAND, &verts[iw], &centroid);
            let fe = objective(&trial2);
            if fe < fr {
                verts[iw].copy_from_slice(&trial2);
                vals[iw] = fe;
            } else {
                verts[iw].copy_from_slice(&trial);
                vals[iw] = fr;
            }
            continue;
        }
        if fr < vals[isw] {
            verts[iw].copy_from_slice(&trial);
            vals[iw] = fr;
            continue;
        }
        // Contraction, outside when the reflection beat the worst vertex.
        let (coef, target) = if fr < vals[iw] { (REFLECT * CONTRACT, fr) } else { (-CONTRACT, vals[iw]) };
        along(&mut trial2, coef, &verts[iw], &centroid);
        let fc = objective(&trial2);
        if fc <= target {
            verts[iw].copy_from_slice(&trial2);
            vals[iw] = fc;
            continue;
        }
        let xb = verts[ib].clone();
        for &i in &order[1..] {
            for (x, &b) in verts[i].iter_mut().zip(&xb) {
                *x = b + SHRINK * (*x - b);
            }
            vals[i] = objective(&verts[i]);
        }
    }

    let ib = (0..=dim).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    Run { argmin: verts[ib].clone(), fmin: vals[ib], converged, iterations }
}

fn has_converged(verts: &[Vec<f64>], vals: &[f64], ib: usize, iw: usize, opts: &NelderMeadOptions) -> bool {
    let fb = vals[ib];
    let spread = vals[iw] - fb;
    if spread.is_finite() && spread <= opts.ftol * fb.abs() {
        return true;
    }
    let best = &verts[ib];
    verts.iter().all(|v| {
        v.iter()
            .zip(best)
            .all(|(&x, &b)| (x - b).abs() <= opts.xtol * b.abs().max(1.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(|x| x.iter().map(|v| (v - 3.0).powi(2)).sum(), &[0.0, 0.0], &Default::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - 3.0).abs() < 1e-6 && (r.argmin[1] - 3.0).abs() < 1e-6, "{:?}", r.argmin);
        assert!((r.fmin - ((r.argmin[0] - 3.0).powi(2) + (r.argmin[1] - 3.0).powi(2))).abs() < 1e-15);
    }

    #[test]
    fn rosenbrock_from_classic_start() {
        // Oracle: coarse-to-fine grid search around the reported minimum.
        let mut centre = (0.0f64, 0.0f64);
        let mut half = 2.0;
        for _ in 0..40 {
            let mut best = (f64::INFINITY, centre);
            for i in 0..=40 {
                for j in 0..=40 {
                    let p = (centre.0 - half + half * i as f64 / 20.0, centre.1 - half + half * j as f64 / 20.0);
                    let f = rosenbrock(&[p.0, p.1]);
                    if f < best.0 {
                        best = (f, p);
                    }
                }
            }
            centre = best.1;
            half *= 0.7;
        }
        assert!((centre.0 - 1.0).abs() < 1e-5 && (centre.1 - 1.0).abs() < 1e-5);

        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &Default::default()).unwrap();
        assert!(r.converged);
        assert!((r.argmin[0] - centre.0).abs() < 1e-4, "{:?}", r.argmin);
        assert!((r.argmin[1] - centre.1).abs() < 1e-4, "{:?}", r.argmin);
        assert!(r.iterations <= 1000);
    }

    #[test]
    fn constant_objective_stops_at_start() {
        let r = nelder_mead(|_| 4.5, &[1.0, -2.0, 0.0], &Default::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.argmin, vec![1.0, -2.0, 0.0]);
        assert_eq!(r.fmin, 4.5);
    }

    #[test]
    fn non_finite_start_is_rejected() {
        let err = nelder_mead(|x| if x[0] > 0.0 { 1.0 } else { f64::NAN }, &[-1.0], &Default::default());
        assert!(matches!(err, Err(Error::InvalidStart)));
        let err = nelder_mead(|_| f64::INFINITY, &[1.0], &Default::default());
        assert!(matches!(err, Err(Error::InvalidStart)));
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let opts = NelderMeadOptions { max_iterations: Some(5), ..Default::default() };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert!(r.iterations <= 5);
        assert!(r.fmin <= rosenbrock(&[-1.2, 1.0]));
    }

    #[test]
    fn best_value_never_increases_and_runs_are_deterministic() {
        // The reported minimum is the best value ever evaluated.
        let mut best = f64::INFINITY;
        let r1 = nelder_mead(
            |x| {
                let f = rosenbrock(x);
                best = best.min(f);
                f
            },
            &[-1.2, 1.0],
            &Default::default(),
        )
        .unwrap();
        assert_eq!(r1.fmin, best);
        let r2 = nelder_mead(rosenbrock, &[-1.2, 1.0], &Default::default()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn restarts_do_not_exceed_budget() {
        let opts = NelderMeadOptions { max_restarts: 3, ..Default::default() };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!(r.restarts_used <= 3);
        assert!(r.iterations <= 1000);
        assert!(r.converged);
    }
}
