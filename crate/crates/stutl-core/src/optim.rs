//! Box-constrained Nelder-Mead minimizer with a coordinate polish pass.

#[derive(Clone, Copy, Debug)]
pub struct NmOptions {
    pub max_iter: usize,
    pub f_tol: f64,
    pub x_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self { max_iter: 4000, f_tol: 1e-12, x_tol: 1e-11 }
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    #[allow(dead_code)]
    pub evaluations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Minimizes `f` over the box by Nelder-Mead with every candidate vertex
/// clamped into the constraints, restarting once from the best point,
/// then polishing coordinatewise.
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: NmOptions,
) -> OptimResult {
    let mut evals = 0usize;
    let mut eval = |x: &[f64]| {
        evals += 1;
        f(x)
    };

    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    let (mut best_x, mut best_f, mut converged) =
        nelder_mead(&mut eval, &start, lower, upper, opts);
    // one restart from the clamped best point with a fresh simplex
    let (x2, f2, c2) = nelder_mead(&mut eval, &best_x, lower, upper, opts);
    if f2 < best_f {
        best_x = x2;
        best_f = f2;
        converged = c2;
    }
    polish(&mut eval, &mut best_x, &mut best_f, lower, upper);
    OptimResult { x: best_x, f: best_f, evaluations: evals, converged }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    eval: &mut F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: NmOptions,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        let span = upper[i] - lower[i];
        let step = if span.is_finite() && span > 0.0 {
            (0.05 * span).min(0.1 * (1.0 + x0[i].abs()))
        } else {
            0.1 * (1.0 + x0[i].abs())
        };
        v[i] += if v[i] + step <= upper[i] { step } else { -step };
        clamp(&mut v, lower, upper);
        simplex.push(v);
    }
    let mut fs: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

    let mut converged = false;
    for _ in 0..opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fs[a].partial_cmp(&fs[b]).unwrap());
        let (ibest, iworst, isecond) = (order[0], order[n], order[n - 1]);

        let f_spread = (fs[iworst] - fs[ibest]).abs();
        let x_spread = (0..n)
            .map(|i| {
                simplex
                    .iter()
                    .map(|v| v[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0_f64, f64::max);
        if f_spread <= opts.f_tol * (1.0 + fs[ibest].abs()) && x_spread <= opts.x_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for (k, v) in simplex.iter().enumerate() {
            if k == iworst {
                continue;
            }
            for i in 0..n {
                centroid[i] += v[i] / n as f64;
            }
        }

        let mut reflected: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - simplex[iworst][i]))
            .collect();
        clamp(&mut reflected, lower, upper);
        let fr = eval(&reflected);

        if fr < fs[ibest] {
            let mut expanded: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflected[i] - centroid[i]))
                .collect();
            clamp(&mut expanded, lower, upper);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[iworst] = expanded;
                fs[iworst] = fe;
            } else {
                simplex[iworst] = reflected;
                fs[iworst] = fr;
            }
        } else if fr < fs[isecond] {
            simplex[iworst] = reflected;
            fs[iworst] = fr;
        } else {
            let mut contracted: Vec<f64> = (0..n)
                .map(|i| centroid[i] + rho * (simplex[iworst][i] - centroid[i]))
                .collect();
            clamp(&mut contracted, lower, upper);
            let fc = eval(&contracted);
            if fc < fs[iworst] {
                simplex[iworst] = contracted;
                fs[iworst] = fc;
            } else {
                let best = simplex[ibest].clone();
                for (k, v) in simplex.iter_mut().enumerate() {
                    if k == ibest {
                        continue;
                    }
                    for i in 0..n {
                        v[i] = best[i] + sigma * (v[i] - best[i]);
                    }
                    clamp(v, lower, upper);
                    fs[k] = eval(v);
                }
            }
        }
    }

    let mut ibest = 0;
    for k in 1..=n {
        if fs[k] < fs[ibest] {
            ibest = k;
        }
    }
    (simplex[ibest].clone(), fs[ibest], converged)
}

/// Coordinatewise pattern refinement around the Nelder-Mead solution so
/// that micro-perturbations cannot improve the reported optimum.
fn polish<F: FnMut(&[f64]) -> f64>(
    eval: &mut F,
    x: &mut Vec<f64>,
    fx: &mut f64,
    lower: &[f64],
    upper: &[f64],
) {
    let n = x.len();
    let mut deltas: Vec<f64> = x.iter().map(|v| 1e-5 * (1.0 + v.abs())).collect();
    for _pass in 0..6 {
        for i in 0..n {
            loop {
                let mut improved = false;
                for dir in [1.0, -1.0] {
                    let mut cand = x.clone();
                    cand[i] = (cand[i] + dir * deltas[i]).clamp(lower[i], upper[i]);
                    if cand[i] == x[i] {
                        continue;
                    }
                    let fc = eval(&cand);
                    if fc < *fx {
                        *x = cand;
                        *fx = fc;
                        improved = true;
                        break;
                    }
                }
                if !improved {
                    break;
                }
            }
            deltas[i] *= 0.25;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let r = minimize_box(
            rosenbrock,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            NmOptions::default(),
        );
        assert!((r.x[0] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn respects_box_constraints() {
        let r = minimize_box(
            |x| (x[0] - 10.0).powi(2),
            &[0.0],
            &[-1.0],
            &[2.0],
            NmOptions::default(),
        );
        assert!((r.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn additive_constant_does_not_move_argmin() {
        let bowl = |x: &[f64]| (x[0] - 0.7).powi(2) + 3.0 * (x[1] + 0.2).powi(2);
        let a = minimize_box(bowl, &[0.0, 0.0], &[-5.0, -5.0], &[5.0, 5.0], NmOptions::default());
        let b = minimize_box(
            |x| bowl(x) + 1000.0,
            &[0.0, 0.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            NmOptions::default(),
        );
        assert!((a.x[0] - b.x[0]).abs() < 1e-6);
        assert!((a.x[1] - b.x[1]).abs() < 1e-6);
        assert!((b.f - a.f - 1000.0).abs() < 1e-7);
    }

    #[test]
    fn start_at_optimum_stays_there() {
        let r = minimize_box(
            |x| x[0] * x[0] + 2.0 * x[1] * x[1],
            &[0.0, 0.0],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            NmOptions::default(),
        );
        assert!(r.x[0].abs() < 1e-8 && r.x[1].abs() < 1e-8);
    }
}
