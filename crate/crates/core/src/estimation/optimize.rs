//! Box-constrained minimizers: a real-coded genetic algorithm for the
//! global stage, projected BFGS with finite-difference gradients for the
//! local stage, and one-dimensional searches for nested problems.

use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Diagnostics;
use crate::math::{abs, ln, round, sqrt};
use crate::root::brent_min;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        Bounds { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    /// Whether coordinate `i` of `x` sits on a face of the box.
    pub fn at_bound(&self, x: &[f64], i: usize) -> bool {
        let tol = 1e-6 * (self.hi[i] - self.lo[i]);
        x[i] <= self.lo[i] + tol || x[i] >= self.hi[i] - tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub elite: usize,
    /// Extension factor of blend crossover.
    pub blend: f64,
    /// Mutation standard deviation as a fraction of the box width.
    pub mutation_scale: f64,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings { population: 50, generations: 100, tournament: 3, elite: 2, blend: 0.5, mutation_scale: 0.1 }
    }
}

#[inline]
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Standard normal draw by Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    sqrt(-2.0 * ln(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.gen_range(0..fitness.len());
        if fitness[c] < fitness[best] {
            best = c;
        }
    }
    best
}

/// Minimizes `f` over `bounds`. The initial population holds the `seeds`
/// (clamped into the box) and uniform draws. Returns the best point found.
pub fn genetic_minimize<F>(
    mut f: F,
    bounds: &Bounds,
    seeds: &[Vec<f64>],
    settings: &GaSettings,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let d = bounds.dim();
    let n = settings.population.max(2);
    let mut pop: Vec<Vec<f64>> = Vec::with_capacity(n);
    for s in seeds.iter().take(n) {
        let mut x = s.clone();
        bounds.clamp(&mut x);
        pop.push(x);
    }
    while pop.len() < n {
        pop.push((0..d).map(|i| rng.gen_range(bounds.lo[i]..=bounds.hi[i])).collect());
    }
    let mut fit: Vec<f64> = pop.iter().map(|x| sanitize(f(x))).collect();
    let elite = settings.elite.min(n);
    for _ in 0..settings.generations {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]));
        let mut next: Vec<Vec<f64>> = order.iter().take(elite).map(|&i| pop[i].clone()).collect();
        let mut next_fit: Vec<f64> = order.iter().take(elite).map(|&i| fit[i]).collect();
        while next.len() < n {
            let a = &pop[tournament(rng, &fit, settings.tournament)];
            let b = &pop[tournament(rng, &fit, settings.tournament)];
            let mut child: Vec<f64> = (0..d)
                .map(|i| {
                    let (lo, hi) = (a[i].min(b[i]), a[i].max(b[i]));
                    let ext = settings.blend * (hi - lo);
                    let (l, h) = (lo - ext, hi + ext);
                    if h > l {
                        rng.gen_range(l..=h)
                    } else {
                        l
                    }
                })
                .collect();
            for (i, c) in child.iter_mut().enumerate() {
                if rng.gen::<f64>() < 1.0 / d as f64 {
                    *c += settings.mutation_scale * (bounds.hi[i] - bounds.lo[i]) * normal(rng);
                }
            }
            bounds.clamp(&mut child);
            next_fit.push(sanitize(f(&child)));
            next.push(child);
        }
        pop = next;
        fit = next_fit;
    }
    let best = (0..n).fold(0, |b, i| if fit[i] < fit[b] { i } else { b });
    (pop[best].clone(), fit[best])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub diagnostics: Diagnostics,
}

/// Central differences with step `1e-6 (1 + |x|)`, one-sided on faces of
/// the box.
fn gradient<F>(f: &mut F, x: &[f64], fx: f64, bounds: &Bounds, evals: &mut usize) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = alloc::vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + abs(x[i]));
        let up = (x[i] + h).min(bounds.hi[i]);
        let down = (x[i] - h).max(bounds.lo[i]);
        probe[i] = up;
        let fu = if up > x[i] { *evals += 1; sanitize(f(&probe)) } else { fx };
        probe[i] = down;
        let fd = if down < x[i] { *evals += 1; sanitize(f(&probe)) } else { fx };
        probe[i] = x[i];
        g[i] = if up > down { (fu - fd) / (up - down) } else { 0.0 };
    }
    g
}

/// Zeroes gradient components that point out of the box at active faces.
fn project(g: &[f64], x: &[f64], bounds: &Bounds) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, &gi)| {
            let tol = 1e-10 * (bounds.hi[i] - bounds.lo[i]);
            if (x[i] <= bounds.lo[i] + tol && gi > 0.0) || (x[i] >= bounds.hi[i] - tol && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|a| a * a).sum())
}

/// Projected BFGS from `x0`. Stops when the projected gradient norm drops
/// below `tol`; otherwise reports non-convergence in the diagnostics.
pub fn bfgs_minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, tol: f64, max_iter: usize) -> LocalResult
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    bounds.clamp(&mut x);
    let mut evals = 1;
    let mut fx = sanitize(f(&x));
    let identity = |d: usize| -> Vec<f64> { (0..d * d).map(|k| if k % (d + 1) == 0 { 1.0 } else { 0.0 }).collect() };
    let mut h = identity(d);
    let mut g = gradient(&mut f, &x, fx, bounds, &mut evals);
    let mut pg = project(&g, &x, bounds);
    let mut iterations = 0;
    let mut converged = norm(&pg) < tol;
    while !converged && iterations < max_iter && fx.is_finite() {
        iterations += 1;
        let mut fresh = false;
        let mut dir: Vec<f64> = (0..d).map(|i| -(0..d).map(|j| h[i * d + j] * pg[j]).sum::<f64>()).collect();
        for i in 0..d {
            if pg[i] == 0.0 && g[i] != 0.0 {
                dir[i] = 0.0;
            }
        }
        let slope: f64 = dir.iter().zip(&pg).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = identity(d);
            fresh = true;
            dir = pg.iter().map(|v| -v).collect();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = (0..d).map(|i| x[i] + step * dir[i]).collect();
            bounds.clamp(&mut xn);
            let moved: f64 = (0..d).map(|i| (xn[i] - x[i]) * pg[i]).sum();
            evals += 1;
            let fxn = sanitize(f(&xn));
            if fxn <= fx + 1e-4 * moved.min(0.0) && fxn.is_finite() && xn != x {
                accepted = Some((xn, fxn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fxn)) = accepted else {
            if fresh {
                break;
            }
            h = identity(d);
            continue;
        };
        let gn = gradient(&mut f, &xn, fxn, bounds, &mut evals);
        let s: Vec<f64> = (0..d).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..d).map(|i| gn[i] - g[i]).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * norm(&s) * norm(&y) {
            let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| h[i * d + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let improvement = fx - fxn;
        x = xn;
        fx = fxn;
        g = gn;
        pg = project(&g, &x, bounds);
        converged = norm(&pg) < tol;
        if !converged && improvement <= 1e-15 * (1.0 + abs(fx)) && fresh {
            break;
        }
    }
    LocalResult {
        value: fx,
        diagnostics: Diagnostics { converged, gradient_norm: norm(&pg), iterations, evaluations: evals },
        x,
    }
}

/// Local 1-D minimization from `x0`: Brent on a window of half-width
/// `width`, slid along while the minimum sits on an interior window edge.
pub fn local_minimize_1d<F>(mut f: F, x0: f64, lo: f64, hi: f64, width: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut center = x0.clamp(lo, hi);
    let mut best = (center, sanitize(f(center)));
    for _ in 0..80 {
        let (a, b) = ((center - width).max(lo), (center + width).min(hi));
        let (x, v) = brent_min(|t| sanitize(f(t)), a, b, center, 1e-9, 200);
        if v <= best.1 {
            best = (x, v);
        }
        let edge = 1e-6 * width;
        let slide_left = x - a < edge && a > lo;
        let slide_right = b - x < edge && b < hi;
        if !(slide_left || slide_right) || v > best.1 {
            break;
        }
        center = x;
    }
    best
}

/// Global 1-D minimization: scan at `step`, then refine around the best
/// node.
pub fn global_minimize_1d<F>(f: F, lo: f64, hi: f64, step: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    global_minimize_1d_with(f, lo, hi, step, &[])
}

/// [`global_minimize_1d`] that also tries `extra` points inside `[lo, hi]`.
/// Objectives with narrow flat stretches between known breakpoints pass the
/// midpoints of those stretches here, since a uniform scan can step over them.
pub fn global_minimize_1d_with<F>(mut f: F, lo: f64, hi: f64, step: f64, extra: &[f64]) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let n = round((hi - lo) / step).max(1.0) as usize;
    let mut best = (lo, f64::INFINITY);
    let mut width = step;
    for i in 0..=n {
        let t = if i == n { hi } else { lo + i as f64 * step };
        let v = sanitize(f(t));
        if v < best.1 {
            best = (t, v);
        }
    }
    for &t in extra.iter().filter(|t| (lo..=hi).contains(*t)) {
        let v = sanitize(f(t));
        if v < best.1 {
            best = (t, v);
            // refine only within the stretch the candidate stands for
            width = extra.iter().map(|&e| abs(e - t)).filter(|&d| d > 0.0).fold(step, f64::min);
        }
    }
    let (a, b) = ((best.0 - width).max(lo), (best.0 + width).min(hi));
    let (x, v) = brent_min(|t| sanitize(f(t)), a, b, best.0, 1e-9, 200);
    if v <= best.1 {
        (x, v)
    } else {
        best
    }
}
