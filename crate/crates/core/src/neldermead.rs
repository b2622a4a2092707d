//! Derivative-free simplex minimisation with a hard evaluation budget.

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from `x0`, with the initial simplex spanned by `step`
/// along each axis. Stops after `max_evals` evaluations or once all vertex
/// values coincide. The first evaluated point wins ties.
pub fn minimize<F>(mut f: F, x0: &[f64], step: f64, max_evals: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evals = 0usize;
    let mut best = Minimum { x: x0.to_vec(), value: f64::INFINITY, evaluations: 0 };
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut Minimum| -> f64 {
        *evals += 1;
        let v = f(x);
        if v < best.value {
            best.value = v;
            best.x = x.to_vec();
        }
        v
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, &mut evals, &mut best);
    simplex.push((x0.to_vec(), v0));
    for d in 0..dim {
        if evals >= max_evals {
            break;
        }
        let mut x = x0.to_vec();
        x[d] += step;
        let v = eval(&x, &mut evals, &mut best);
        simplex.push((x, v));
    }

    while evals < max_evals && simplex.len() == dim + 1 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[dim].1);
        if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|p| p.0[d]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(simplex[dim].0.iter())
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals, &mut best);
        if fr < simplex[0].1 {
            if evals >= max_evals {
                simplex[dim] = (xr, fr);
                break;
            }
            let xe = along(EXPAND);
            let fe = eval(&xe, &mut evals, &mut best);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            if evals >= max_evals {
                break;
            }
            let outside = fr < simplex[dim].1;
            let xc = if outside { along(REFLECT * CONTRACT) } else { along(-CONTRACT) };
            let fc = eval(&xc, &mut evals, &mut best);
            if fc < fr.min(simplex[dim].1) {
                simplex[dim] = (xc, fc);
            } else {
                let anchor = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    if evals >= max_evals {
                        break;
                    }
                    let x: Vec<f64> = anchor.iter().zip(p.0.iter()).map(|(a, b)| a + SHRINK * (b - a)).collect();
                    let v = eval(&x, &mut evals, &mut best);
                    *p = (x, v);
                }
            }
        }
    }
    best.evaluations = evals;
    best
}
