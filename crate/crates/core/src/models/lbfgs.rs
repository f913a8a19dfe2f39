//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over the last `memory` correction pairs; the line
//! search brackets then zooms with safeguarded cubic interpolation.

/// A differentiable objective.
pub trait Objective {
    fn dim(&self) -> usize;

    /// Value at `x`, writing the gradient into `grad`.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once the infinity norm of the gradient is at or below this.
    pub gtol: f64,
    /// Stop once the relative decrease of the objective falls to this.
    /// Zero disables the test.
    pub ftol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 1000,
            gtol: 1e-4,
            ftol: 0.0,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Gradient norm reached `gtol`.
    Converged,
    MaxIterations,
    /// Relative objective decrease fell below `ftol`.
    FunctionTolerance,
    LineSearchFailed,
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    /// Objective after each accepted iteration, starting with the initial value.
    pub history: Vec<f64>,
}

impl Outcome {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

struct Probe<'a, O: Objective + ?Sized> {
    obj: &'a O,
    x0: &'a [f64],
    dir: &'a [f64],
    x: Vec<f64>,
    g: Vec<f64>,
    evals: usize,
}

impl<O: Objective + ?Sized> Probe<'_, O> {
    /// phi(alpha) and phi'(alpha); leaves x and g at alpha.
    fn eval(&mut self, alpha: f64) -> (f64, f64) {
        for ((x, x0), d) in self.x.iter_mut().zip(self.x0).zip(self.dir) {
            *x = x0 + alpha * d;
        }
        self.evals += 1;
        let f = self.obj.value_grad(&self.x, &mut self.g);
        (f, dot(&self.g, self.dir))
    }
}

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db), if it exists.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> Option<f64> {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
    t.is_finite().then_some(t)
}

struct Point {
    alpha: f64,
    f: f64,
    d: f64,
}

enum Search {
    Found { f: f64 },
    Failed,
}

fn strong_wolfe<O: Objective + ?Sized>(
    probe: &mut Probe<'_, O>,
    f0: f64,
    d0: f64,
    alpha_init: f64,
    opts: &LbfgsOptions,
) -> Search {
    let armijo = |alpha: f64, f: f64| f <= f0 + opts.c1 * alpha * d0;
    let curvature = |d: f64| d.abs() <= -opts.c2 * d0;

    let mut prev = Point { alpha: 0.0, f: f0, d: d0 };
    let mut alpha = alpha_init;
    let mut budget = opts.max_line_search;

    // bracketing phase
    let (mut lo, mut hi) = loop {
        if budget == 0 {
            return Search::Failed;
        }
        budget -= 1;
        let (f, d) = probe.eval(alpha);
        if !f.is_finite() {
            // overshoot into an overflow region: treat as a failed Armijo step
            let cur = Point { alpha, f: f64::INFINITY, d: f64::NAN };
            break (prev, cur);
        }
        let cur = Point { alpha, f, d };
        if !armijo(alpha, f) || (prev.alpha > 0.0 && f >= prev.f) {
            break (prev, cur);
        }
        if curvature(d) {
            return Search::Found { f };
        }
        if d >= 0.0 {
            break (cur, prev);
        }
        prev = cur;
        alpha *= 2.0;
    };

    // zoom phase: lo satisfies Armijo with the lowest value seen so far
    while budget > 0 {
        budget -= 1;
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width <= f64::EPSILON * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let (left, right) = (a.min(b), a.max(b));
        let guard = 0.1 * width;
        let trial = if hi.f.is_finite() && hi.d.is_finite() {
            cubic_min(a, lo.f, lo.d, b, hi.f, hi.d)
        } else {
            None
        };
        let alpha = match trial {
            Some(t) if t > left + guard && t < right - guard => t,
            _ => 0.5 * (a + b),
        };
        let (f, d) = probe.eval(alpha);
        if !f.is_finite() || !armijo(alpha, f) || f >= lo.f {
            hi = Point {
                alpha,
                f: if f.is_finite() { f } else { f64::INFINITY },
                d,
            };
        } else {
            if curvature(d) {
                return Search::Found { f };
            }
            if d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = Point { alpha, f, d };
        }
    }

    // Fall back to the best sufficient-decrease point if one was found.
    if lo.alpha > 0.0 && lo.f < f0 {
        let _ = probe.eval(lo.alpha);
        Search::Found { f: lo.f }
    } else {
        Search::Failed
    }
}

/// Minimize `obj` starting at `x0`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &LbfgsOptions) -> Outcome {
    let n = obj.dim();
    assert_eq!(x0.len(), n, "starting point has wrong dimension");
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = obj.value_grad(&x, &mut g);
    let mut evaluations = 1;
    let mut history = vec![f];

    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(opts.memory);
    let mut rho_hist: Vec<f64> = Vec::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut alpha_buf = vec![0.0; opts.memory];

    let finish = |x: Vec<f64>, f: f64, g: &[f64], it: usize, ev: usize, status, history| Outcome {
        x,
        value: f,
        grad_norm: inf_norm(g),
        iterations: it,
        evaluations: ev,
        status,
        history,
    };

    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return finish(x, f, &g, 0, evaluations, Status::NonFinite, history);
    }

    let mut iter = 0;
    loop {
        if inf_norm(&g) <= opts.gtol {
            return finish(x, f, &g, iter, evaluations, Status::Converged, history);
        }
        if iter >= opts.max_iter {
            return finish(x, f, &g, iter, evaluations, Status::MaxIterations, history);
        }

        // two-loop recursion: dir = -H g
        for (d, gi) in dir.iter_mut().zip(&g) {
            *d = -gi;
        }
        let m = s_hist.len();
        for i in (0..m).rev() {
            let a = rho_hist[i] * dot(&s_hist[i], &dir);
            alpha_buf[i] = a;
            for (d, y) in dir.iter_mut().zip(&y_hist[i]) {
                *d -= a * y;
            }
        }
        if m > 0 {
            let gamma = dot(&s_hist[m - 1], &y_hist[m - 1]) / dot(&y_hist[m - 1], &y_hist[m - 1]);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for i in 0..m {
            let b = rho_hist[i] * dot(&y_hist[i], &dir);
            for (d, s) in dir.iter_mut().zip(&s_hist[i]) {
                *d += s * (alpha_buf[i] - b);
            }
        }

        let mut d0 = dot(&g, &dir);
        if !(d0 < 0.0) {
            // not a descent direction: restart from steepest descent
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (d, gi) in dir.iter_mut().zip(&g) {
                *d = -gi;
            }
            d0 = dot(&g, &dir);
        }
        let alpha_init = if s_hist.is_empty() {
            (1.0 / dot(&g, &g).sqrt()).min(1.0)
        } else {
            1.0
        };

        let mut probe = Probe {
            obj,
            x0: &x,
            dir: &dir,
            x: vec![0.0; n],
            g: vec![0.0; n],
            evals: 0,
        };
        let found = strong_wolfe(&mut probe, f, d0, alpha_init, opts);
        evaluations += probe.evals;
        let (f_new, x_new, g_new) = match found {
            Search::Found { f: f_new } => (f_new, probe.x, probe.g),
            Search::Failed => {
                if !s_hist.is_empty() {
                    s_hist.clear();
                    y_hist.clear();
                    rho_hist.clear();
                    continue;
                }
                return finish(x, f, &g, iter, evaluations, Status::LineSearchFailed, history);
            }
        };

        // a steepest-descent step says little about progress on badly scaled problems
        let scaled_step = !s_hist.is_empty();
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > f64::EPSILON * dot(&y, &y) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }

        let f_old = f;
        x = x_new;
        g = g_new;
        f = f_new;
        iter += 1;
        history.push(f);

        if opts.ftol > 0.0 && scaled_step && (f_old - f) <= opts.ftol * f_old.abs().max(f.abs()).max(1.0) {
            let status = if inf_norm(&g) <= opts.gtol {
                Status::Converged
            } else {
                Status::FunctionTolerance
            };
            return finish(x, f, &g, iter, evaluations, status, history);
        }
    }
}
