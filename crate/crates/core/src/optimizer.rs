//! Unconstrained derivative-free minimization with linear interpolation
//! models over a shrinking trust region, in the style of COBYLA.
//!
//! The model is the hyperplane through `n + 1` simplex vertices. Each
//! iteration steps a distance `rho` down the model gradient from the best
//! vertex. Failed steps first repair the simplex geometry, then halve `rho`.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustRegionConfig {
    pub rhobeg: f64,
    pub rhoend: f64,
    pub max_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionResult {
    pub x: Vec<f64>,
    pub fx: f64,
    /// Function values in evaluation order.
    pub history: Vec<f64>,
    pub final_rho: f64,
}

// Vertex farther than this many rho from the pivot is replaced.
const FAR: f64 = 2.1;
// Vertex closer than this many rho to the face opposite it is replaced.
const FLAT: f64 = 0.25;
const ACCEPT: f64 = 0.1;

struct Budget<'a, F> {
    f: &'a mut F,
    history: Vec<f64>,
    max: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.history.len() >= self.max {
            return None;
        }
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        self.history.push(v);
        Some(v)
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(x, d)| x + a * d).collect()
}

pub fn cobyla_like<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], cfg: &TrustRegionConfig) -> TrustRegionResult {
    let n = x0.len();
    let mut b = Budget {
        f,
        history: Vec::new(),
        max: cfg.max_evaluations.max(1),
    };
    let mut rho = cfg.rhobeg;
    let f0 = b.eval(x0).unwrap_or(f64::INFINITY);
    let mut pts = vec![x0.to_vec()];
    let mut vals = vec![f0];
    'init: for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += rho;
        match b.eval(&x) {
            Some(v) => {
                pts.push(x);
                vals.push(v);
            }
            None => break 'init,
        }
    }
    if pts.len() == n + 1 && n > 0 {
        'outer: loop {
            let piv = (0..=n).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
            let others: Vec<usize> = (0..=n).filter(|&i| i != piv).collect();
            let d = DMatrix::from_fn(n, n, |r, c| pts[others[r]][c] - pts[piv][c]);
            let df = DVector::from_fn(n, |r, _| vals[others[r]] - vals[piv]);
            // Columns of W = D⁻¹ are the dual directions of the vertices.
            let w = d.clone().try_inverse();
            let mut step_ok = false;
            if let Some(w) = &w {
                let g = w * &df;
                let gn = g.norm();
                if gn > 0.0 && gn.is_finite() {
                    let s: Vec<f64> = g.iter().map(|v| -rho * v / gn).collect();
                    let xn = axpy(&pts[piv], 1.0, &s);
                    let Some(fnew) = b.eval(&xn) else { break 'outer };
                    let predicted = rho * gn;
                    step_ok = vals[piv] - fnew >= ACCEPT * predicted;
                    // Drop the vertex whose removal keeps the largest volume,
                    // favouring distant vertices.
                    let sv = DVector::from_column_slice(&s);
                    let j = (0..n)
                        .max_by(|&a, &c| {
                            let score = |k: usize| {
                                let sigma = (w.column(k).transpose() * &sv)[0].abs();
                                let dist = norm(&sub(&pts[others[k]], &xn)) / rho;
                                sigma * dist.max(1.0).powi(3)
                            };
                            score(a).total_cmp(&score(c))
                        })
                        .unwrap();
                    let sigma = (w.column(j).transpose() * &sv)[0].abs();
                    if fnew < vals[piv] || sigma > 1e-3 {
                        pts[others[j]] = xn;
                        vals[others[j]] = fnew;
                    }
                }
            }
            if step_ok {
                continue;
            }
            // Repair geometry before shrinking.
            let worst = match &w {
                None => Some(0),
                Some(w) => {
                    let far = (0..n)
                        .map(|k| (k, norm(&sub(&pts[others[k]], &pts[piv])) / rho))
                        .filter(|(_, dist)| *dist > FAR)
                        .max_by(|a, c| a.1.total_cmp(&c.1));
                    far.map(|(k, _)| k).or_else(|| {
                        (0..n)
                            .map(|k| (k, 1.0 / (w.column(k).norm() * rho)))
                            .filter(|(_, h)| *h < FLAT)
                            .min_by(|a, c| a.1.total_cmp(&c.1))
                            .map(|(k, _)| k)
                    })
                }
            };
            if let Some(k) = worst {
                let dir: Vec<f64> = match &w {
                    Some(w) => {
                        let col = w.column(k);
                        col.iter().map(|v| v / col.norm()).collect()
                    }
                    None => {
                        let mut e = vec![0.0; n];
                        e[k % n] = 1.0;
                        e
                    }
                };
                let xn = axpy(&pts[piv], rho, &dir);
                let Some(fnew) = b.eval(&xn) else { break 'outer };
                pts[others[k]] = xn;
                vals[others[k]] = fnew;
                continue;
            }
            if rho <= cfg.rhoend {
                break;
            }
            rho = (rho * 0.5).max(cfg.rhoend);
        }
    }
    let best = (0..pts.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    TrustRegionResult {
        x: pts[best].clone(),
        fx: vals[best],
        history: b.history,
        final_rho: rho,
    }
}
