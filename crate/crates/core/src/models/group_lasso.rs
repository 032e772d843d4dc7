//! Multi-task group lasso solved by proximal gradient descent.
//!
//! Minimizes
//!
//! ```text
//! sum_k 1/(2 n_k) ||y_k - X_k w_k||^2  +  lambda * sum_j ||W_j||_2
//! ```
//!
//! where `w_k` is column `k` of the `d x K` weight matrix `W` and `W_j` is its
//! row `j` (one feature across all tasks). Inputs are expected centered; the
//! solver fits no intercepts.

use ndarray::{Array1, Array2, Axis};

use super::prox::block_soft_threshold;
use super::ModelError;

pub const DEFAULT_LAMBDA: f64 = 0.005;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct TaskData {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct GroupLassoProblem {
    pub tasks: Vec<TaskData>,
    pub lambda: f64,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl GroupLassoProblem {
    pub fn new(tasks: Vec<TaskData>, lambda: f64) -> Self {
        Self {
            tasks,
            lambda,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn n_features(&self) -> usize {
        self.tasks.first().map_or(0, |t| t.x.ncols())
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.tasks.is_empty() {
            return Err(ModelError::EmptyTraining);
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(ModelError::InvalidHyperparameter(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        let d = self.n_features();
        for (k, t) in self.tasks.iter().enumerate() {
            if t.x.nrows() == 0 || t.x.nrows() != t.y.len() {
                return Err(ModelError::Shape(format!(
                    "task {k}: {} rows in X, {} responses",
                    t.x.nrows(),
                    t.y.len()
                )));
            }
            if t.x.ncols() != d {
                return Err(ModelError::Shape(format!(
                    "task {k} has {} features, expected {d}",
                    t.x.ncols()
                )));
            }
            if t.x.iter().chain(t.y.iter()).any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite(format!(
                    "task {k} design or response"
                )));
            }
        }
        Ok(())
    }

    /// Smooth part of the objective.
    pub fn loss(&self, w: &Array2<f64>) -> f64 {
        self.tasks
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let r = &t.y - &t.x.dot(&w.column(k));
                r.dot(&r) / (2.0 * t.y.len() as f64)
            })
            .sum()
    }

    pub fn penalty(&self, w: &Array2<f64>) -> f64 {
        self.lambda * row_norms(w).sum()
    }

    pub fn objective(&self, w: &Array2<f64>) -> f64 {
        self.loss(w) + self.penalty(w)
    }

    /// Gradient of the smooth part, `d x K`.
    pub fn gradient(&self, w: &Array2<f64>) -> Array2<f64> {
        let mut g = Array2::zeros(w.raw_dim());
        for (k, t) in self.tasks.iter().enumerate() {
            let r = &t.y - &t.x.dot(&w.column(k));
            let gk = t.x.t().dot(&r) / -(t.y.len() as f64);
            g.column_mut(k).assign(&gk);
        }
        g
    }

    /// Largest violation of the optimality conditions at `w`.
    ///
    /// Zero rows contribute `max(0, ||g_j|| - lambda)`; nonzero rows contribute
    /// `||g_j + lambda W_j / ||W_j|| ||`.
    pub fn kkt_residual(&self, w: &Array2<f64>) -> f64 {
        let g = self.gradient(w);
        g.axis_iter(Axis(0))
            .zip(w.axis_iter(Axis(0)))
            .map(|(gj, wj)| {
                let wn = wj.dot(&wj).sqrt();
                if wn == 0.0 {
                    (gj.dot(&gj).sqrt() - self.lambda).max(0.0)
                } else {
                    let v = &gj + &(&wj * (self.lambda / wn));
                    v.dot(&v).sqrt()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Smallest lambda for which the all-zero solution is optimal.
    pub fn lambda_max(&self) -> f64 {
        let w = Array2::zeros((self.n_features(), self.tasks.len()));
        row_norms(&self.gradient(&w)).fold(0.0, |a, &b| a.max(b))
    }
}

fn row_norms(w: &Array2<f64>) -> Array1<f64> {
    w.map_axis(Axis(1), |r| r.dot(&r).sqrt())
}

/// Largest eigenvalue of the symmetric PSD matrix `a` by power iteration.
pub fn power_iteration(a: &Array2<f64>, max_iters: usize, tol: f64) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    // deterministic start vector with no special alignment to coordinate axes
    let mut v =
        Array1::from_iter((0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract()));
    v /= v.dot(&v).sqrt();
    let mut est = 0.0;
    for _ in 0..max_iters {
        let av = a.dot(&v);
        let norm = av.dot(&av).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&av);
        v = av / norm;
        if (next - est).abs() <= tol * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    // Rayleigh quotient of the final iterate
    est.max(v.dot(&a.dot(&v)))
}

/// Lipschitz constant of the smooth part's gradient.
pub fn lipschitz(problem: &GroupLassoProblem) -> f64 {
    problem
        .tasks
        .iter()
        .map(|t| {
            let gram = t.x.t().dot(&t.x) / t.y.len() as f64;
            power_iteration(&gram, 10_000, 1e-14)
        })
        .fold(0.0, f64::max)
        * (1.0 + 1e-10)
}

#[derive(Debug, Clone)]
pub struct GroupLassoSolution {
    /// `d x K`
    pub weights: Array2<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lipschitz: f64,
    /// Objective after each iteration, starting with the value at zero.
    pub history: Vec<f64>,
}

pub fn solve(problem: &GroupLassoProblem) -> Result<GroupLassoSolution, ModelError> {
    problem.validate()?;
    let d = problem.n_features();
    let k = problem.tasks.len();
    let mut w = Array2::<f64>::zeros((d, k));
    let l = lipschitz(problem);
    let mut objective = problem.objective(&w);
    let mut history = vec![objective];

    if l == 0.0 {
        if problem.lambda > 0.0 && d > 0 {
            return Err(ModelError::DegenerateDesign);
        }
        return Ok(GroupLassoSolution {
            weights: w,
            objective,
            iterations: 0,
            converged: true,
            lipschitz: l,
            history,
        });
    }

    let step = 1.0 / l;
    let tau = problem.lambda * step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < problem.max_iters {
        iterations += 1;
        let grad = problem.gradient(&w);
        let v = &w - &(grad * step);
        for (j, vj) in v.axis_iter(Axis(0)).enumerate() {
            w.row_mut(j).assign(&block_soft_threshold(vj, tau));
        }
        let next = problem.objective(&w);
        debug_assert!(
            next <= objective + 1e-10 * objective.abs().max(1e-300),
            "objective increased from {objective} to {next} at iteration {iterations}"
        );
        history.push(next);
        let change = (objective - next).abs();
        let prev = objective;
        objective = next;
        if prev == 0.0 || change <= problem.tol * prev.abs() {
            converged = true;
            break;
        }
    }
    Ok(GroupLassoSolution {
        weights: w,
        objective,
        iterations,
        converged,
        lipschitz: l,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn power_iteration_matches_known_spectrum() {
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        assert!((power_iteration(&a, 1000, 1e-15) - 3.0).abs() < 1e-12);
        let diag = array![[1.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 2.0]];
        assert!((power_iteration(&diag, 1000, 1e-15) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ols_recovered_when_unpenalized() {
        let x = array![[2.0, 0.0], [0.0, 1.0]];
        let y = array![4.0, -3.0];
        let mut p = GroupLassoProblem::new(vec![TaskData { x, y }], 0.0);
        p.tol = 1e-15;
        let sol = solve(&p).unwrap();
        assert!((sol.weights[[0, 0]] - 2.0).abs() < 1e-9);
        assert!((sol.weights[[1, 0]] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn large_lambda_zeroes_everything() {
        let x = array![[1.0, 0.5], [-1.0, 0.2], [0.3, -0.7]];
        let y = array![0.4, -0.2, -0.2];
        let mut p = GroupLassoProblem::new(vec![TaskData { x, y }], 0.0);
        p.lambda = p.lambda_max();
        let sol = solve(&p).unwrap();
        assert!(sol.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let zero = TaskData {
            x: Array2::zeros((3, 2)),
            y: array![1.0, 2.0, 3.0],
        };
        let p = GroupLassoProblem::new(vec![zero.clone()], 0.1);
        assert!(matches!(solve(&p), Err(ModelError::DegenerateDesign)));
        let p = GroupLassoProblem::new(vec![zero], 0.0);
        assert!(solve(&p).unwrap().weights.iter().all(|&w| w == 0.0));

        let nan = TaskData {
            x: array![[f64::NAN]],
            y: array![1.0],
        };
        assert!(matches!(
            solve(&GroupLassoProblem::new(vec![nan], 0.1)),
            Err(ModelError::NonFinite(_))
        ));
        let ragged = vec![
            TaskData {
                x: array![[1.0, 2.0]],
                y: array![1.0],
            },
            TaskData {
                x: array![[1.0]],
                y: array![1.0],
            },
        ];
        assert!(matches!(
            solve(&GroupLassoProblem::new(ragged, 0.1)),
            Err(ModelError::Shape(_))
        ));
    }
}
