//! Small derivative-free minimiser (Nelder–Mead) used by the noise fit and
//! the blinking-envelope fit. Problems here are 3–4 dimensional and smooth.

/// Result of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimise `f` starting from `x0` with initial simplex steps `scale`.
///
/// Converges when the simplex function-value spread falls below `ftol`
/// (absolute) or `max_iter` is reached.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    scale: &[f64],
    ftol: f64,
    max_iter: usize,
) -> MinimizeResult {
    let n = x0.len();
    assert_eq!(scale.len(), n);
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += scale[i];
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        // order best..worst
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        let reorder: Vec<Vec<f64>> = idx.iter().map(|&i| simplex[i].clone()).collect();
        let refv: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        simplex = reorder;
        fv = refv;

        if (fv[n] - fv[0]).abs() <= ftol * (1.0 + fv[0].abs()) {
            converged = true;
            break;
        }

        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in cen.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflect: Vec<f64> =
            cen.iter().zip(&worst).map(|(c, w)| c + alpha * (c - w)).collect();
        let fr = f(&reflect);
        if fr < fv[0] {
            let expand: Vec<f64> =
                cen.iter().zip(&worst).map(|(c, w)| c + gamma * (c - w)).collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[n] = expand;
                fv[n] = fe;
            } else {
                simplex[n] = reflect;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = reflect;
            fv[n] = fr;
        } else {
            let contract: Vec<f64> =
                cen.iter().zip(&worst).map(|(c, w)| c + rho * (w - c)).collect();
            let fc = f(&contract);
            if fc < fv[n] {
                simplex[n] = contract;
                fv[n] = fc;
            } else {
                // shrink towards best
                let best = simplex[0].clone();
                for i in 1..=n {
                    for (x, b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    fv[i] = f(&simplex[i]);
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=n {
        if fv[i] < fv[best] {
            best = i;
        }
    }
    MinimizeResult { x: simplex[best].clone(), fx: fv[best], iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimises_rosenbrock() {
        let r = nelder_mead(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[0.5, 0.5],
            1e-14,
            2000,
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn minimises_quadratic_bowl() {
        let r = nelder_mead(
            |x| x.iter().enumerate().map(|(i, v)| (v - i as f64).powi(2)).sum(),
            &[5.0, 5.0, 5.0, 5.0],
            &[1.0, 1.0, 1.0, 1.0],
            1e-14,
            4000,
        );
        for (i, v) in r.x.iter().enumerate() {
            assert!((v - i as f64).abs() < 1e-4);
        }
    }
}
