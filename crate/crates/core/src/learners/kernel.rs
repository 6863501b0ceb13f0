//! Gaussian-kernel support vector machines solved in the dual.
//!
//! Both the binary classifier and the epsilon-insensitive regressor reduce to
//!
//! ```text
//! min_a  ½ aᵀQa + pᵀa   s.t.  sᵀa = 0,  0 <= a_t <= C
//! ```
//!
//! with `Q_tu = s_t s_u k(x_t, x_u)` and `s_t = ±1`. The solver is pairwise
//! coordinate ascent (SMO) with second-order working-set selection; every
//! step moves two coordinates along the equality constraint, so `sᵀa = 0`
//! holds throughout.

use crate::{Error, Result};

/// `exp(-‖a - b‖² / (2 scale²))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], scale: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * scale * scale)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Box constraint.
    pub c: f64,
    pub kernel_scale: f64,
    /// Tube half-width for regression; `None` picks IQR(y) / 13.49.
    pub epsilon: Option<f64>,
    /// z-score every feature with the training mean and standard deviation.
    pub standardize: bool,
    /// Stop once the maximal KKT violation drops to this value.
    pub tolerance: f64,
    pub max_iter: Option<usize>,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            c: 1.0,
            kernel_scale: 0.35,
            epsilon: None,
            standardize: false,
            tolerance: 1e-3,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMode {
    BinaryClassification,
    EpsilonRegression,
}

#[derive(Debug, Clone, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mean: Vec<f64> = (0..d).map(|f| x.iter().map(|r| r[f]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|f| {
                let var = x.iter().map(|r| (r[f] - mean[f]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// A trained kernel machine.
///
/// `dual` holds `a_i` (classification) or `β_i = α_i - α*_i` (regression);
/// the decision value is `Σ coef_i k(x, x_i) + bias` with `coef_i = y_i a_i`
/// or `β_i` respectively.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel {
    mode: KernelMode,
    points: Vec<Vec<f64>>,
    dual: Vec<f64>,
    labels: Vec<f64>,
    bias: f64,
    kernel_scale: f64,
    c: f64,
    epsilon: f64,
    standardizer: Option<Standardizer>,
    dual_trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

impl KernelModel {
    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn n_features(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn dual_coefficients(&self) -> &[f64] {
        &self.dual
    }

    /// Training labels (classification) or all ones (regression).
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn kernel_scale(&self) -> f64 {
        self.kernel_scale
    }

    /// `Σ y_i a_i` for classification, `Σ β_i` for regression.
    pub fn equality_residual(&self) -> f64 {
        self.dual.iter().zip(&self.labels).map(|(a, y)| a * y).sum()
    }

    /// Dual objective `W` (to be maximised) at the start and after every
    /// sweep of the solver, ending with the final value.
    pub fn dual_trace(&self) -> &[f64] {
        &self.dual_trace
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn n_support(&self) -> usize {
        self.dual.iter().filter(|a| **a != 0.0).count()
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        let z;
        let x = match &self.standardizer {
            Some(s) => {
                z = s.apply(x);
                &z[..]
            }
            None => x,
        };
        let sum: f64 = self
            .points
            .iter()
            .zip(self.dual.iter().zip(&self.labels))
            .filter(|(_, (a, _))| **a != 0.0)
            .map(|(p, (a, y))| a * y * gaussian_kernel(x, p, self.kernel_scale))
            .sum();
        Ok(sum + self.bias)
    }

    /// `sgn(f(x))`, with zero mapped to +1.
    pub fn classify(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.decision_value(x)? >= 0.0 { 1.0 } else { -1.0 })
    }
}

fn check_common(x: &[Vec<f64>], y: &[f64], params: &KernelParams) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "kernel machines need at least 2 samples, got {}",
            x.len()
        )));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::param("x", "rows need at least one feature"));
    }
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::LengthMismatch {
            expected: d,
            got: r.len(),
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("x", "training data must be finite"));
    }
    if !(params.c.is_finite() && params.c > 0.0) {
        return Err(Error::param("c", format!("must be > 0, got {}", params.c)));
    }
    if !(params.kernel_scale.is_finite() && params.kernel_scale > 0.0) {
        return Err(Error::param(
            "kernel_scale",
            format!("must be > 0, got {}", params.kernel_scale),
        ));
    }
    if !(params.tolerance > 0.0) {
        return Err(Error::param("tolerance", "must be > 0"));
    }
    Ok(())
}

fn prepare(x: &[Vec<f64>], params: &KernelParams) -> (Vec<Vec<f64>>, Option<Standardizer>) {
    if params.standardize {
        let s = Standardizer::fit(x);
        (x.iter().map(|r| s.apply(r)).collect(), Some(s))
    } else {
        (x.to_vec(), None)
    }
}

/// Soft-margin binary SVM; labels must be exactly ±1 with both present.
pub fn train_svm_binary(x: &[Vec<f64>], y: &[f64], params: KernelParams) -> Result<KernelModel> {
    check_common(x, y, &params)?;
    if let Some(v) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
        return Err(Error::param("y", format!("labels must be ±1, found {v}")));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::param("y", "both classes must be present"));
    }
    let (points, standardizer) = prepare(x, &params);
    let kernel = KernelMatrix::new(&points, params.kernel_scale);
    let n = y.len();
    let problem = Problem {
        kernel: &kernel,
        data_index: (0..n).collect(),
        sign: y.to_vec(),
        linear: vec![-1.0; n],
        c: params.c,
    };
    let sol = problem.solve(params.tolerance, params.max_iter);
    Ok(KernelModel {
        mode: KernelMode::BinaryClassification,
        points,
        dual: sol.alpha,
        labels: y.to_vec(),
        bias: -sol.rho,
        kernel_scale: params.kernel_scale,
        c: params.c,
        epsilon: 0.0,
        standardizer,
        dual_trace: sol.trace,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Epsilon-insensitive support vector regression.
pub fn train_svr(x: &[Vec<f64>], y: &[f64], params: KernelParams) -> Result<KernelModel> {
    check_common(x, y, &params)?;
    let epsilon = match params.epsilon {
        Some(e) if e.is_finite() && e >= 0.0 => e,
        Some(e) => return Err(Error::param("epsilon", format!("must be >= 0, got {e}"))),
        None => default_epsilon(y),
    };
    let (points, standardizer) = prepare(x, &params);
    let kernel = KernelMatrix::new(&points, params.kernel_scale);
    let n = y.len();
    // Variables [α; α*] with signs [+1; -1].
    let problem = Problem {
        kernel: &kernel,
        data_index: (0..n).chain(0..n).collect(),
        sign: std::iter::repeat_n(1.0, n)
            .chain(std::iter::repeat_n(-1.0, n))
            .collect(),
        linear: y
            .iter()
            .map(|t| epsilon - t)
            .chain(y.iter().map(|t| epsilon + t))
            .collect(),
        c: params.c,
    };
    let sol = problem.solve(params.tolerance, params.max_iter);
    let beta: Vec<f64> = (0..n).map(|i| sol.alpha[i] - sol.alpha[i + n]).collect();
    Ok(KernelModel {
        mode: KernelMode::EpsilonRegression,
        points,
        dual: beta,
        labels: vec![1.0; n],
        bias: -sol.rho,
        kernel_scale: params.kernel_scale,
        c: params.c,
        epsilon,
        standardizer,
        dual_trace: sol.trace,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

/// Interquartile range / 13.49, a robust noise-scale heuristic.
pub fn default_epsilon(y: &[f64]) -> f64 {
    let mut s = y.to_vec();
    s.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (s.len() - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(s.len() - 1);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    (q(0.75) - q(0.25)) / 13.49
}

/// Full Gram matrix when it fits comfortably in memory, otherwise rows are
/// recomputed on demand.
enum KernelMatrix<'a> {
    Full { n: usize, values: Vec<f64> },
    Lazy { points: &'a [Vec<f64>], scale: f64 },
}

const FULL_GRAM_LIMIT: usize = 4096;

impl<'a> KernelMatrix<'a> {
    fn new(points: &'a [Vec<f64>], scale: f64) -> Self {
        let n = points.len();
        if n > FULL_GRAM_LIMIT {
            return KernelMatrix::Lazy { points, scale };
        }
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in 0..i {
                let k = gaussian_kernel(&points[i], &points[j], scale);
                values[i * n + j] = k;
                values[j * n + i] = k;
            }
        }
        KernelMatrix::Full { n, values }
    }

    fn row_into(&self, i: usize, out: &mut Vec<f64>) {
        out.clear();
        match self {
            KernelMatrix::Full { n, values } => out.extend_from_slice(&values[i * n..(i + 1) * n]),
            KernelMatrix::Lazy { points, scale } => {
                out.extend(points.iter().map(|p| gaussian_kernel(&points[i], p, *scale)))
            }
        }
    }
}

struct Problem<'k, 'a> {
    kernel: &'k KernelMatrix<'a>,
    /// Data point behind each dual variable.
    data_index: Vec<usize>,
    sign: Vec<f64>,
    linear: Vec<f64>,
    c: f64,
}

struct Solution {
    alpha: Vec<f64>,
    rho: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

const TAU: f64 = 1e-12;

impl Problem<'_, '_> {
    fn solve(&self, tolerance: f64, max_iter: Option<usize>) -> Solution {
        let l = self.sign.len();
        let c = self.c;
        let s = &self.sign;
        let mut alpha = vec![0.0; l];
        let mut grad = self.linear.clone();
        // The Gaussian kernel has a unit diagonal.
        let qd = 1.0;
        let max_iter = max_iter.unwrap_or_else(|| (100 * l).max(10_000_000));

        let mut row_i = Vec::new();
        let mut row_j = Vec::new();
        let mut trace = vec![self.dual_objective(&alpha, &grad)];
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iter {
            // i: maximal violator in I_up.
            let mut g_max = f64::NEG_INFINITY;
            let mut i_sel = None;
            for t in 0..l {
                let up = if s[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
                if up && -s[t] * grad[t] >= g_max {
                    g_max = -s[t] * grad[t];
                    i_sel = Some(t);
                }
            }
            let Some(i) = i_sel else {
                converged = true;
                break;
            };
            self.kernel.row_into(self.data_index[i], &mut row_i);

            // j: second-order choice in I_low.
            let mut g_max2 = f64::NEG_INFINITY;
            let mut obj_min = f64::INFINITY;
            let mut j_sel = None;
            for t in 0..l {
                let low = if s[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let v = s[t] * grad[t];
                if v >= g_max2 {
                    g_max2 = v;
                }
                let diff = g_max + v;
                if diff > 0.0 {
                    // Q_ii + Q_tt - 2 s_i s_t Q_it reduces to 2 - 2 k_it.
                    let k_it = row_i[self.data_index[t]];
                    let mut quad = qd + qd - 2.0 * k_it;
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(diff * diff) / quad;
                    if obj <= obj_min {
                        obj_min = obj;
                        j_sel = Some(t);
                    }
                }
            }
            if g_max + g_max2 < tolerance {
                converged = true;
                break;
            }
            let Some(j) = j_sel else {
                converged = true;
                break;
            };
            self.kernel.row_into(self.data_index[j], &mut row_j);

            let q_ij = s[i] * s[j] * row_i[self.data_index[j]];
            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (mut ai, mut aj) = (old_i, old_j);
            if s[i] != s[j] {
                let mut quad = qd + qd + 2.0 * q_ij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = ai - aj;
                ai += delta;
                aj += delta;
                if diff > 0.0 {
                    if aj < 0.0 {
                        aj = 0.0;
                        ai = diff;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = -diff;
                }
                if diff > 0.0 {
                    if ai > c {
                        ai = c;
                        aj = c - diff;
                    }
                } else if aj > c {
                    aj = c;
                    ai = c + diff;
                }
            } else {
                let mut quad = qd + qd - 2.0 * q_ij;
                if quad <= 0.0 {
                    quad = TAU;
                }
                let delta = (grad[i] - grad[j]) / quad;
                let sum = ai + aj;
                ai -= delta;
                aj += delta;
                if sum > c {
                    if ai > c {
                        ai = c;
                        aj = sum - c;
                    }
                } else if aj < 0.0 {
                    aj = 0.0;
                    ai = sum;
                }
                if sum > c {
                    if aj > c {
                        aj = c;
                        ai = sum - c;
                    }
                } else if ai < 0.0 {
                    ai = 0.0;
                    aj = sum;
                }
            }
            alpha[i] = ai;
            alpha[j] = aj;

            let (di, dj) = (ai - old_i, aj - old_j);
            for t in 0..l {
                let dt = self.data_index[t];
                grad[t] += s[t] * (s[i] * row_i[dt] * di + s[j] * row_j[dt] * dj);
            }

            iterations += 1;
            if iterations % l == 0 {
                trace.push(self.dual_objective(&alpha, &grad));
            }
        }
        if iterations % l != 0 || iterations == 0 {
            trace.push(self.dual_objective(&alpha, &grad));
        }

        Solution {
            rho: self.rho(&alpha, &grad),
            alpha,
            trace,
            iterations,
            converged,
        }
    }

    /// `W(a) = -(½ aᵀQa + pᵀa)`, evaluated through the gradient `Qa + p`.
    fn dual_objective(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let f: f64 = alpha
            .iter()
            .zip(grad.iter().zip(&self.linear))
            .map(|(a, (g, p))| a * (g + p))
            .sum();
        -0.5 * f
    }

    fn rho(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum_free, mut n_free) = (0.0, 0usize);
        for t in 0..alpha.len() {
            let yg = self.sign[t] * grad[t];
            let positive = self.sign[t] > 0.0;
            if alpha[t] >= self.c {
                if positive {
                    lb = lb.max(yg);
                } else {
                    ub = ub.min(yg);
                }
            } else if alpha[t] <= 0.0 {
                if positive {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                sum_free += yg;
                n_free += 1;
            }
        }
        if n_free > 0 {
            sum_free / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}
