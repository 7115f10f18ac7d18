//! Small regression toolkit used by the learning strategies: (weighted)
//! least squares, shrinkage fits, a gradient-descent fit, a bagged tree
//! ensemble, and k-fold cross-validation.

use nalgebra::{DMatrix, DVector};

use crate::rng::RngStream;

/// Weighted least squares on a design matrix that already contains any
/// intercept column. Singular normal equations are retried with a `1e-8`
/// ridge; `None` if that also fails.
pub fn weighted_least_squares(design: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Option<DVector<f64>> {
    let p = design.ncols();
    let mut xtwx = DMatrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    for (i, (&yi, &wi)) in y.iter().zip(weights).enumerate() {
        if wi == 0.0 {
            continue;
        }
        for a in 0..p {
            let xa = design[(i, a)] * wi;
            xtwy[a] += xa * yi;
            for b in 0..=a {
                xtwx[(a, b)] += xa * design[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(b, a)] = xtwx[(a, b)];
        }
    }
    if let Some(ch) = xtwx.clone().cholesky() {
        return Some(ch.solve(&xtwy));
    }
    log::debug!("singular normal equations; retrying with ridge 1e-8");
    let ridged = xtwx + DMatrix::identity(p, p) * 1e-8;
    ridged.cholesky().map(|ch| ch.solve(&xtwy))
}

/// Intercept and slope of `y ~ x` with the coefficient of determination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimpleFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Ordinary least squares with one regressor. `None` with fewer than three
/// points or zero variance in `x`.
pub fn simple_ols(x: &[f64], y: &[f64]) -> Option<SimpleFit> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 1e-12 * (1.0 + mx * mx) * nf {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = syy - slope * sxy;
    let r_squared = if syy > 0.0 { 1.0 - (sse / syy).max(0.0) } else { 1.0 };
    Some(SimpleFit { intercept, slope, r_squared: r_squared.min(1.0) })
}

/// The regressor family compared by cross-validation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegressorKind {
    LeastSquares,
    Ridge { lambda: f64 },
    Lasso { lambda: f64 },
    GradientDescent { iterations: usize, rate: f64 },
    Forest { trees: usize, depth: usize },
}

impl RegressorKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegressorKind::LeastSquares => "least-squares",
            RegressorKind::Ridge { .. } => "ridge",
            RegressorKind::Lasso { .. } => "lasso",
            RegressorKind::GradientDescent { .. } => "gradient-descent",
            RegressorKind::Forest { .. } => "forest",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Fitted {
    Linear { intercept: f64, coef: Vec<f64> },
    Forest(Vec<Tree>),
}

impl Fitted {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Fitted::Linear { intercept, coef } => intercept + coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>(),
            Fitted::Forest(trees) => trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64,
        }
    }
}

struct Standardized {
    z: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn standardize(x: &[Vec<f64>], y: &[f64]) -> Standardized {
    let n = x.len() as f64;
    let p = x[0].len();
    let mut mean = vec![0.0; p];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut scale = vec![0.0; p];
    for row in x {
        for j in 0..p {
            scale[j] += (row[j] - mean[j]).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-18 { s.sqrt() } else { 1.0 };
    }
    let z = x.iter().map(|row| (0..p).map(|j| (row[j] - mean[j]) / scale[j]).collect()).collect();
    let y_mean = y.iter().sum::<f64>() / n;
    let yc = y.iter().map(|v| v - y_mean).collect();
    Standardized { z, mean, scale, y_mean, yc }
}

fn unstandardize(s: &Standardized, beta: &[f64]) -> Fitted {
    let coef: Vec<f64> = beta.iter().zip(&s.scale).map(|(b, sc)| b / sc).collect();
    let intercept = s.y_mean - coef.iter().zip(&s.mean).map(|(c, m)| c * m).sum::<f64>();
    Fitted::Linear { intercept, coef }
}

/// Fit one regressor. `x` rows must share a nonzero width; `None` when the
/// data cannot support a fit.
pub fn fit(kind: RegressorKind, x: &[Vec<f64>], y: &[f64], rng: &mut RngStream) -> Option<Fitted> {
    if x.is_empty() || x.len() != y.len() || x[0].is_empty() {
        return None;
    }
    let n = x.len();
    let p = x[0].len();
    match kind {
        RegressorKind::LeastSquares => {
            let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
            let beta = design.svd(true, true).solve(&DVector::from_column_slice(y), 1e-10).ok()?;
            Some(Fitted::Linear { intercept: beta[0], coef: beta.iter().skip(1).copied().collect() })
        }
        RegressorKind::Ridge { lambda } => {
            let s = standardize(x, y);
            let z = DMatrix::from_fn(n, p, |i, j| s.z[i][j]);
            let lhs = z.transpose() * &z + DMatrix::identity(p, p) * lambda;
            let rhs = z.transpose() * DVector::from_column_slice(&s.yc);
            let beta = lhs.cholesky()?.solve(&rhs);
            Some(unstandardize(&s, beta.as_slice()))
        }
        RegressorKind::Lasso { lambda } => {
            let s = standardize(x, y);
            let nf = n as f64;
            let mut beta = vec![0.0; p];
            let mut resid = s.yc.clone();
            let col_sq: Vec<f64> = (0..p).map(|j| s.z.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf).collect();
            for _ in 0..500 {
                let mut max_delta: f64 = 0.0;
                for j in 0..p {
                    if col_sq[j] == 0.0 {
                        continue;
                    }
                    let rho = s.z.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() / nf + col_sq[j] * beta[j];
                    let new = soft_threshold(rho, lambda) / col_sq[j];
                    let delta = new - beta[j];
                    if delta != 0.0 {
                        for (r, e) in s.z.iter().zip(resid.iter_mut()) {
                            *e -= r[j] * delta;
                        }
                        beta[j] = new;
                        max_delta = max_delta.max(delta.abs());
                    }
                }
                if max_delta < 1e-10 {
                    break;
                }
            }
            Some(unstandardize(&s, &beta))
        }
        RegressorKind::GradientDescent { iterations, rate } => {
            let s = standardize(x, y);
            let nf = n as f64;
            let mut beta = vec![0.0; p];
            let mut grad = vec![0.0; p];
            for _ in 0..iterations {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for (r, yc) in s.z.iter().zip(&s.yc) {
                    let e = r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() - yc;
                    for (g, a) in grad.iter_mut().zip(r) {
                        *g += e * a / nf;
                    }
                }
                for (b, g) in beta.iter_mut().zip(&grad) {
                    *b -= rate * g;
                }
            }
            Some(unstandardize(&s, &beta))
        }
        RegressorKind::Forest { trees, depth } => {
            let forest = (0..trees.max(1))
                .map(|_| {
                    let sample: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
                    Tree::grow(x, y, sample, depth)
                })
                .collect();
            Some(Fitted::Forest(forest))
        }
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// A regression tree stored as a flat node array.
#[derive(Clone, Debug)]
pub struct Tree {
    nodes: Vec<Node>,
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

const MIN_LEAF: usize = 2;

impl Tree {
    fn grow(x: &[Vec<f64>], y: &[f64], sample: Vec<usize>, depth: usize) -> Self {
        let mut t = Tree { nodes: Vec::new() };
        t.build(x, y, sample, depth);
        t
    }

    fn build(&mut self, x: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize) -> usize {
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));
        if depth == 0 || idx.len() < 2 * MIN_LEAF {
            return slot;
        }
        let Some((feature, threshold)) = best_split(x, y, &idx) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][feature] <= threshold);
        if l.is_empty() || r.is_empty() {
            return slot;
        }
        let left = self.build(x, y, l, depth - 1);
        let right = self.build(x, y, r, depth - 1);
        self.nodes[slot] = Node::Split { feature, threshold, left, right };
        slot
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn best_split(x: &[Vec<f64>], y: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let p = x[0].len();
    let n = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order = idx.to_vec();
    for f in 0..p {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
        let mut left_sum = 0.0;
        for k in 0..n - 1 {
            left_sum += y[order[k]];
            let nl = k + 1;
            let nr = n - nl;
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            if nl < MIN_LEAF || nr < MIN_LEAF || lo == hi {
                continue;
            }
            // maximising this is minimising the children's total SSE
            let gain = left_sum * left_sum / nl as f64 + (total - left_sum).powi(2) / nr as f64;
            if best.is_none_or(|(g, _, _)| gain > g) {
                // adjacent floats can have a midpoint equal to `hi`
                let mid = 0.5 * (lo + hi);
                best = Some((gain, f, if mid < hi { mid } else { lo }));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Mean squared prediction error over `folds` contiguous folds. Folds are
/// reduced to the number of observations when data is short.
pub fn cross_validated_mse(kind: RegressorKind, x: &[Vec<f64>], y: &[f64], folds: usize, rng: &mut RngStream) -> Option<f64> {
    let n = x.len();
    let k = folds.min(n);
    if k < 2 {
        return None;
    }
    let mut sse = 0.0;
    for f in 0..k {
        let (lo, hi) = (f * n / k, (f + 1) * n / k);
        let train_x: Vec<Vec<f64>> = x[..lo].iter().chain(&x[hi..]).cloned().collect();
        let train_y: Vec<f64> = y[..lo].iter().chain(&y[hi..]).copied().collect();
        let model = fit(kind, &train_x, &train_y, rng)?;
        for i in lo..hi {
            sse += (model.predict(&x[i]) - y[i]).powi(2);
        }
    }
    Some(sse / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> RngStream {
        RngStream::from_seed(17).child("regression")
    }

    fn linear_data(n: usize, rng: &mut RngStream) -> (Vec<Vec<f64>>, Vec<f64>) {
        let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform(0.0, 40.0), rng.uniform(10.0, 20.0)]).collect();
        let y = x.iter().map(|r| 120.0 - 3.0 * r[0] + 0.5 * r[1]).collect();
        (x, y)
    }

    #[test]
    fn least_squares_exact() {
        let mut r = rng();
        let (x, y) = linear_data(40, &mut r);
        let Fitted::Linear { intercept, coef } = fit(RegressorKind::LeastSquares, &x, &y, &mut r).unwrap() else {
            panic!()
        };
        assert!((intercept - 120.0).abs() < 1e-8);
        assert!((coef[0] + 3.0).abs() < 1e-10 && (coef[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn least_squares_tolerates_constant_column() {
        let mut r = rng();
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 7.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| 10.0 + 2.0 * v[0]).collect();
        let m = fit(RegressorKind::LeastSquares, &x, &y, &mut r).unwrap();
        assert!((m.predict(&[12.5, 7.0]) - 35.0).abs() < 1e-8);
    }

    #[test]
    fn gradient_descent_approaches_least_squares() {
        let mut r = rng();
        let (x, y) = linear_data(60, &mut r);
        let m = fit(RegressorKind::GradientDescent { iterations: 2000, rate: 0.1 }, &x, &y, &mut r).unwrap();
        assert!((m.predict(&[20.0, 15.0]) - 67.5).abs() < 1e-3);
    }

    #[test]
    fn shrinkage_fits_are_close_but_biased() {
        let mut r = rng();
        let (x, y) = linear_data(60, &mut r);
        for kind in [RegressorKind::Ridge { lambda: 1.0 }, RegressorKind::Lasso { lambda: 0.1 }] {
            let m = fit(kind, &x, &y, &mut r).unwrap();
            let err = (m.predict(&[20.0, 15.0]) - 67.5).abs();
            assert!(err < 2.0, "{} err {err}", kind.name());
        }
    }

    #[test]
    fn lasso_zeroes_irrelevant_feature() {
        let mut r = rng();
        let x: Vec<Vec<f64>> = (0..80).map(|_| vec![r.uniform(0.0, 10.0), r.uniform(0.0, 10.0)]).collect();
        let y: Vec<f64> = x.iter().map(|v| 5.0 * v[0]).collect();
        let Fitted::Linear { coef, .. } = fit(RegressorKind::Lasso { lambda: 0.5 }, &x, &y, &mut r).unwrap() else {
            panic!()
        };
        assert_eq!(coef[1], 0.0);
    }

    #[test]
    fn forest_fits_step_function() {
        let mut r = rng();
        let x: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|v| if v[0] < 50.0 { 1.0 } else { 9.0 }).collect();
        let m = fit(RegressorKind::Forest { trees: 20, depth: 4 }, &x, &y, &mut r).unwrap();
        assert!((m.predict(&[10.0]) - 1.0).abs() < 0.5);
        assert!((m.predict(&[90.0]) - 9.0).abs() < 0.5);
    }

    #[test]
    fn cross_validation_prefers_true_model_class() {
        let mut r = rng();
        let (x, y) = linear_data(40, &mut r);
        let ls = cross_validated_mse(RegressorKind::LeastSquares, &x, &y, 5, &mut r).unwrap();
        let forest = cross_validated_mse(RegressorKind::Forest { trees: 20, depth: 4 }, &x, &y, 5, &mut r).unwrap();
        assert!(ls < 1e-12 && forest > ls);
        // folds shrink to the sample size
        assert!(cross_validated_mse(RegressorKind::LeastSquares, &x[..3], &y[..3], 5, &mut r).is_some());
    }

    #[test]
    fn forest_handles_adjacent_float_values() {
        let mut r = rng();
        let a = 37.864745084375784f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x: Vec<Vec<f64>> = [a, b, a, b, 10.0, 11.0, 60.0, 61.0].iter().map(|&v| vec![v]).collect();
        let y = vec![1.0, 2.0, 1.0, 2.0, 5.0, 5.0, 0.0, 0.0];
        for _ in 0..50 {
            let m = fit(RegressorKind::Forest { trees: 3, depth: 4 }, &x, &y, &mut r).unwrap();
            assert!(x.iter().all(|row| m.predict(row).is_finite()));
        }
    }

    #[test]
    fn simple_ols_r_squared() {
        let x: Vec<f64> = (1..=20).map(|v| v as f64).collect();
        let y: Vec<f64> = x.iter().map(|p| 100.0 - 2.0 * p).collect();
        let f = simple_ols(&x, &y).unwrap();
        assert!((f.r_squared - 1.0).abs() < 1e-12 && (f.slope + 2.0).abs() < 1e-12);
        assert!(simple_ols(&[3.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).is_none());
    }

    #[test]
    fn wls_uniform_weights_on_duplicates_equals_unweighted() {
        let x: Vec<f64> = vec![1.0, 2.0, 3.0, 5.0, 8.0];
        let y: Vec<f64> = vec![2.0, 2.5, 4.1, 5.0, 9.3];
        let design = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let once = weighted_least_squares(&design, &y, &[1.0; 5]).unwrap();
        let design2 = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { x[i % 5] });
        let y2: Vec<f64> = (0..10).map(|i| y[i % 5]).collect();
        let twice = weighted_least_squares(&design2, &y2, &[1.0; 10]).unwrap();
        assert!((once - twice).norm() < 1e-10);
    }
}
