//! L2-regularized logistic regression used as the domain discriminator.
//!
//! Objective: `sum_i log(1 + exp(-s_i (w.x_i + b))) + reg/2 |w|^2` with
//! `s_i = +-1`. Features are centered on the training mean; the bias is
//! not penalized. Low-dimensional problems use damped Newton steps, wide
//! ones use accelerated gradient descent. Both are deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feature count above which Newton steps are replaced by gradient descent.
const NEWTON_MAX_DIM: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticRegression {
    weights: DVector<f64>,
    bias: f64,
    center: DVector<f64>,
}

fn log1p_exp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    sign: Vec<f64>,
    reg: f64,
}

impl Problem<'_> {
    fn margins(&self, w: &DVector<f64>, b: f64) -> DVector<f64> {
        (self.x * w).add_scalar(b)
    }

    fn objective(&self, w: &DVector<f64>, b: f64) -> f64 {
        let z = self.margins(w, b);
        let loss: f64 = z.iter().zip(&self.sign).map(|(z, s)| log1p_exp(-s * z)).sum();
        loss + 0.5 * self.reg * w.norm_squared()
    }

    /// Gradient and per-sample curvature `p (1 - p)`.
    fn gradient(&self, w: &DVector<f64>, b: f64) -> (DVector<f64>, f64, DVector<f64>) {
        let z = self.margins(w, b);
        let mut r = DVector::zeros(z.len());
        let mut curv = DVector::zeros(z.len());
        for i in 0..z.len() {
            // d/dz log(1 + exp(-s z)) = -s * sigmoid(-s z)
            let s = self.sign[i];
            r[i] = -s * sigmoid(-s * z[i]);
            let p = sigmoid(z[i]);
            curv[i] = p * (1.0 - p);
        }
        let gw = self.x.tr_mul(&r) + w * self.reg;
        (gw, r.sum(), curv)
    }
}

impl LogisticRegression {
    /// Fits on rows of `x` with boolean labels.
    pub fn fit(x: &DMatrix<f64>, labels: &[bool], reg: f64, max_iter: usize) -> Result<Self> {
        if x.nrows() != labels.len() || x.nrows() == 0 {
            return Err(Error::data("logistic regression needs one label per row"));
        }
        let center = x.row_mean().transpose();
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= center.transpose();
        }
        let problem = Problem {
            x: &xc,
            sign: labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect(),
            reg,
        };
        let (weights, bias) = if x.ncols() <= NEWTON_MAX_DIM {
            newton(&problem, max_iter)
        } else {
            accelerated_gradient(&problem, max_iter)
        };
        if !bias.is_finite() || weights.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("logistic regression diverged"));
        }
        Ok(Self {
            weights,
            bias,
            center,
        })
    }

    pub fn decision(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut z = x * &self.weights;
        let offset = self.bias - self.center.dot(&self.weights);
        z.add_scalar_mut(offset);
        z
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<bool> {
        self.decision(x).iter().map(|&z| z > 0.0).collect()
    }
}

fn newton(p: &Problem, max_iter: usize) -> (DVector<f64>, f64) {
    let dim = p.x.ncols();
    let mut w = DVector::zeros(dim);
    let mut b = 0.0;
    let mut f = p.objective(&w, b);
    for _ in 0..max_iter {
        let (gw, gb, curv) = p.gradient(&w, b);
        let gnorm = (gw.norm_squared() + gb * gb).sqrt();
        if gnorm <= 1e-9 * (1.0 + f.abs()) {
            break;
        }
        // Hessian over (w, b)
        let mut h = DMatrix::zeros(dim + 1, dim + 1);
        let mut weighted = p.x.clone();
        for (mut row, &c) in weighted.row_iter_mut().zip(curv.iter()) {
            row *= c;
        }
        h.view_mut((0, 0), (dim, dim)).copy_from(&(p.x.tr_mul(&weighted)));
        let cross = weighted.row_sum();
        for j in 0..dim {
            h[(j, dim)] = cross[j];
            h[(dim, j)] = cross[j];
            h[(j, j)] += p.reg;
        }
        h[(dim, dim)] = curv.sum() + 1e-10;
        let mut g = DVector::zeros(dim + 1);
        g.rows_mut(0, dim).copy_from(&gw);
        g[dim] = gb;
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&g);

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let wn = &w - step.rows(0, dim) * t;
            let bn = b - step[dim] * t;
            let fnew = p.objective(&wn, bn);
            if fnew <= f - 1e-4 * t * g.dot(&step) {
                w = wn;
                b = bn;
                f = fnew;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (w, b)
}

fn accelerated_gradient(p: &Problem, max_iter: usize) -> (DVector<f64>, f64) {
    let dim = p.x.ncols();
    let n = p.x.nrows();
    // Largest eigenvalue of [X 1]'[X 1] by power iteration.
    let mut v = DVector::from_element(dim + 1, 1.0 / ((dim + 1) as f64).sqrt());
    let mut sigma2 = 0.0;
    for _ in 0..50 {
        let xv = (p.x * v.rows(0, dim)).add_scalar(v[dim]);
        let mut next = DVector::zeros(dim + 1);
        next.rows_mut(0, dim).copy_from(&p.x.tr_mul(&xv));
        next[dim] = xv.sum();
        sigma2 = next.norm();
        if sigma2 == 0.0 {
            break;
        }
        v = next / sigma2;
    }
    let lipschitz = 1.1 * sigma2.max(n as f64) / 4.0 + p.reg;
    let step = 1.0 / lipschitz;

    let mut w = DVector::zeros(dim);
    let mut b = 0.0;
    let (mut yw, mut yb) = (w.clone(), b);
    let mut t = 1.0f64;
    let mut f = p.objective(&w, b);
    for _ in 0..max_iter.max(1) * 20 {
        let (gw, gb, _) = p.gradient(&yw, yb);
        if (gw.norm_squared() + gb * gb).sqrt() <= 1e-7 * (1.0 + f.abs()) {
            break;
        }
        let wn = &yw - gw * step;
        let bn = yb - gb * step;
        let fnew = p.objective(&wn, bn);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if fnew > f {
            // restart momentum
            yw = w.clone();
            yb = b;
            t = 1.0;
            continue;
        }
        let beta = (t - 1.0) / tn;
        yw = &wn + (&wn - &w) * beta;
        yb = bn + (bn - b) * beta;
        w = wn;
        b = bn;
        f = fnew;
        t = tn;
    }
    (w, b)
}
