//! Derivative-free minimization (Nelder-Mead downhill simplex).

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Stop when the spread of simplex values falls below this, scaled by
    /// `max(1, |f_best|)`.
    pub tolerance: f64,
    /// Initial simplex edge length along each coordinate.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            max_evals: 2000,
            tolerance: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimize `f` starting from `x0`. Non-finite objective values are treated
/// as +inf. The returned value is never worse than `f(x0)`.
///
/// After convergence the simplex is rebuilt around the best point and the
/// search restarted while evaluations remain and the restart improves the
/// objective; this guards against premature simplex collapse.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: NelderMeadOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let max_evals = opts.max_evals;
    let mut eval = |x: &[f64], evals: &mut usize| {
        if *evals >= max_evals {
            return f64::INFINITY;
        }
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0, &mut evals);
    let mut converged = false;
    if x0.is_empty() {
        return Minimum {
            x: best_x,
            value: best_f,
            evals,
            converged: true,
        };
    }

    let mut step = opts.initial_step;
    while evals < opts.max_evals {
        let (x, fx, conv) = simplex_search(&mut eval, &best_x, best_f, step, opts, &mut evals);
        let improved = fx < best_f - opts.tolerance * best_f.abs().max(1.0);
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
        converged = conv;
        if !improved {
            break;
        }
        step = (step * 0.5).max(1e-4);
    }
    Minimum {
        x: best_x,
        value: best_f,
        evals,
        converged,
    }
}

fn simplex_search<E>(
    eval: &mut E,
    x0: &[f64],
    f0: f64,
    step: f64,
    opts: NelderMeadOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64], &mut usize) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        if *evals >= opts.max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs().max(1.0) } else { step };
        let fx = eval(&x, evals);
        simplex.push((x, fx));
    }
    if simplex.len() < n + 1 {
        return best_of(simplex, false);
    }

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fl, fh) = (simplex[0].1, simplex[n].1);
        if fh - fl <= opts.tolerance * fl.abs().max(1.0) {
            return best_of(simplex, true);
        }
        if *evals >= opts.max_evals {
            return best_of(simplex, false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let along = |coef: f64, out: &mut Vec<f64>| {
            for ((o, c), w) in out.iter_mut().zip(&centroid).zip(&worst) {
                *o = c + coef * (c - w);
            }
        };

        along(REFLECT, &mut trial);
        let fr = eval(&trial, evals);
        let f_second_worst = simplex[n - 1].1;
        if fr < fl {
            let reflected = trial.clone();
            along(EXPAND, &mut trial);
            let fe = eval(&trial, evals);
            simplex[n] = if fe < fr { (trial.clone(), fe) } else { (reflected, fr) };
        } else if fr < f_second_worst {
            simplex[n] = (trial.clone(), fr);
        } else {
            let outside = fr < fh;
            along(if outside { CONTRACT } else { -CONTRACT }, &mut trial);
            let fc = eval(&trial, evals);
            if (outside && fc <= fr) || (!outside && fc < fh) {
                simplex[n] = (trial.clone(), fc);
            } else {
                let best = simplex[0].0.clone();
                for k in 1..=n {
                    if *evals >= opts.max_evals {
                        break;
                    }
                    let x: Vec<f64> = best
                        .iter()
                        .zip(&simplex[k].0)
                        .map(|(b, xi)| b + SHRINK * (xi - b))
                        .collect();
                    let fx = eval(&x, evals);
                    simplex[k] = (x, fx);
                }
            }
        }
    }
}

fn best_of(simplex: Vec<(Vec<f64>, f64)>, converged: bool) -> (Vec<f64>, f64, bool) {
    let (x, f) = simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is nonempty");
    (x, f, converged)
}
