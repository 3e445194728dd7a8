use serde::{Deserialize, Serialize};

/// Derivative-free maximizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NelderMeadConfig {
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub f_tolerance: f64,
    /// Stop when the simplex diameter falls below this.
    pub x_tolerance: f64,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Restarts from the best vertex after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self { max_evaluations: 4000, f_tolerance: 1e-6, x_tolerance: 1e-5, initial_step: 0.5, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value after each iteration; never decreases.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maximizes `f` with the adaptive-coefficient Nelder-Mead simplex method.
///
/// Non-finite values are treated as `-inf`, so the simplex shrinks away from
/// invalid regions.
pub fn nelder_mead(mut f: impl FnMut(&[f64]) -> f64, x0: &[f64], config: &NelderMeadConfig) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut best_x = x0.to_vec();
    let mut best = eval(x0, &mut evals);
    let mut trace = vec![best];
    if n == 0 {
        return NelderMeadResult { x: best_x, value: best, trace, evaluations: evals, converged: true };
    }
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut converged = false;

    for _round in 0..=config.restarts {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best_x.clone(), best));
        for i in 0..n {
            let mut x = best_x.clone();
            x[i] += config.initial_step;
            let v = eval(&x, &mut evals);
            simplex.push((x, v));
        }
        converged = false;
        while evals < config.max_evaluations {
            // descending by value; ties keep insertion order
            simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
            if simplex[0].1 > best {
                best = simplex[0].1;
                best_x = simplex[0].0.clone();
            }
            trace.push(best);
            let spread = simplex[0].1 - simplex[n].1;
            let diameter = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread.is_finite() && spread <= config.f_tolerance && diameter <= config.x_tolerance {
                converged = true;
                break;
            }
            let centroid: Vec<f64> =
                (0..n).map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / nf).collect();
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = eval(&xr, &mut evals);
            if fr > simplex[0].1 {
                let xe = along(alpha * gamma);
                let fe = eval(&xe, &mut evals);
                simplex[n] = if fe > fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr > simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let outside = fr > worst.1;
            let xc = along(if outside { alpha * rho } else { -rho });
            let fc = eval(&xc, &mut evals);
            let accept = if outside { fc >= fr } else { fc > worst.1 };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let head = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = head.iter().zip(&vertex.0).map(|(h, v)| h + sigma * (v - h)).collect();
                let v = eval(&x, &mut evals);
                *vertex = (x, v);
            }
        }
        simplex.sort_by(|a, b| b.1.total_cmp(&a.1));
        if simplex[0].1 > best {
            best = simplex[0].1;
            best_x = simplex[0].0.clone();
            trace.push(best);
        }
        if evals >= config.max_evaluations {
            break;
        }
    }
    NelderMeadResult { x: best_x, value: best, trace, evaluations: evals, converged }
}

/// Adam ascent state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(dim: usize, learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    /// Moves `x` uphill along `grad`.
    pub fn step(&mut self, x: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            x[i] += self.learning_rate * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + self.eps);
        }
    }
}
