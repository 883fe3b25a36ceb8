//! L1-penalised logistic regression by accelerated proximal gradient.
//!
//! Minimises `(1/W) Σ_i c_i log(1 + exp(−y_i w·x_i)) + λ Σ_{j≠0} |w_j|`
//! where `c_i` are nonnegative row multiplicities (a bootstrap resample is
//! a multiplicity vector over the original rows) and `W = Σ c_i`.

use serde::{Deserialize, Serialize};

use super::{log_sigmoid, sigmoid, FeatureVector, Response, Side, WeightVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { lambda: 1.0, max_iter: 500, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub weights: WeightVector,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Labelled design matrix in compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    side: Side,
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    labels: Vec<f64>,
}

impl LabeledFeatures {
    pub fn new(side: Side, dim: usize) -> Self {
        LabeledFeatures { side, dim, row_ptr: vec![0], cols: Vec::new(), vals: Vec::new(), labels: Vec::new() }
    }

    pub fn from_rows<'a>(side: Side, dim: usize, rows: impl IntoIterator<Item = (&'a FeatureVector, Response)>) -> Result<Self> {
        let mut data = LabeledFeatures::new(side, dim);
        for (x, y) in rows {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn push(&mut self, x: &FeatureVector, y: Response) -> Result<()> {
        if x.side != self.side {
            return Err(Error::SideMismatch { weights: self.side, features: x.side });
        }
        if x.values.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.values.len(), context: "fit data row" });
        }
        if x.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value in fit data"));
        }
        for (j, &v) in x.values.iter().enumerate() {
            if v != 0.0 {
                self.cols.push(j);
                self.vals.push(v);
            }
        }
        self.row_ptr.push(self.cols.len());
        self.labels.push(y.sign());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).map(|(j, v)| w[j] * v).sum()
    }
}

fn penalty(w: &[f64], lambda: f64) -> f64 {
    lambda * w.iter().skip(1).map(|v| v.abs()).sum::<f64>()
}

/// The fitting objective at `w` with unit multiplicities.
pub fn logistic_objective(data: &LabeledFeatures, w: &[f64], lambda: f64) -> Result<f64> {
    if w.len() != data.dim {
        return Err(Error::DimensionMismatch { expected: data.dim, got: w.len(), context: "logistic objective" });
    }
    if data.is_empty() {
        return Err(Error::EmptyHistory("logistic objective"));
    }
    let loss: f64 = (0..data.len()).map(|i| -log_sigmoid(data.labels[i] * data.margin(i, w))).sum();
    Ok(loss / data.len() as f64 + penalty(w, lambda))
}

/// Fits on every row once.
pub fn fit_l1_logistic(data: &LabeledFeatures, config: &FitConfig) -> Result<FitOutcome> {
    let counts = vec![1u32; data.len()];
    fit_l1_logistic_weighted(data, &counts, config)
}

/// Fits with per-row multiplicities `counts`.
pub fn fit_l1_logistic_weighted(data: &LabeledFeatures, counts: &[u32], config: &FitConfig) -> Result<FitOutcome> {
    if counts.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: counts.len(), context: "row multiplicities" });
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::invalid("lambda must be a nonnegative finite number"));
    }
    if config.max_iter == 0 || !(config.tol > 0.0) {
        return Err(Error::invalid("fit needs max_iter >= 1 and tol > 0"));
    }
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    if total == 0.0 {
        return Err(Error::EmptyHistory("logistic fit"));
    }
    if config.lambda == 0.0 {
        let mut seen = [false; 2];
        for (i, &c) in counts.iter().enumerate() {
            if c > 0 {
                seen[(data.labels[i] > 0.0) as usize] = true;
            }
        }
        if !(seen[0] && seen[1]) {
            return Err(Error::Precondition("unpenalised fit needs both labels present".into()));
        }
    }
    Ok(Solver::new(data, counts, total, config).run())
}

struct Solver<'a> {
    data: &'a LabeledFeatures,
    weight: Vec<f64>,
    scale: Vec<f64>,
    pen: Vec<f64>,
    config: &'a FitConfig,
}

impl<'a> Solver<'a> {
    fn new(data: &'a LabeledFeatures, counts: &[u32], total: f64, config: &'a FitConfig) -> Self {
        let weight: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        let mut sq = vec![0.0; data.dim];
        for (i, &c) in weight.iter().enumerate() {
            if c > 0.0 {
                for (j, v) in data.row(i) {
                    sq[j] += c * v * v;
                }
            }
        }
        let scale: Vec<f64> = sq.iter().map(|&s| if s > 0.0 { s.sqrt() } else { 1.0 }).collect();
        let pen = (0..data.dim)
            .map(|j| if j == 0 { 0.0 } else { config.lambda / scale[j] })
            .collect();
        Solver { data, weight, scale, pen, config }
    }

    /// Smooth part and its gradient in scaled coordinates.
    fn loss_grad(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for (i, &c) in self.weight.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let y = self.data.labels[i];
            let m: f64 = self.data.row(i).map(|(j, v)| z[j] * v / self.scale[j]).sum();
            loss -= c * log_sigmoid(y * m);
            let coef = -c * y * sigmoid(-y * m);
            for (j, v) in self.data.row(i) {
                grad[j] += coef * v / self.scale[j];
            }
        }
        loss
    }

    fn loss(&self, z: &[f64]) -> f64 {
        let mut loss = 0.0;
        for (i, &c) in self.weight.iter().enumerate() {
            if c > 0.0 {
                let m: f64 = self.data.row(i).map(|(j, v)| z[j] * v / self.scale[j]).sum();
                loss -= c * log_sigmoid(self.data.labels[i] * m);
            }
        }
        loss
    }

    fn reg(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.pen).map(|(v, p)| p * v.abs()).sum()
    }

    fn prox(&self, v: &[f64], step: f64, out: &mut [f64]) {
        for j in 0..v.len() {
            let t = step * self.pen[j];
            out[j] = if v[j] > t {
                v[j] - t
            } else if v[j] < -t {
                v[j] + t
            } else {
                0.0
            };
        }
    }

    fn run(&self) -> FitOutcome {
        let d = self.data.dim;
        let mut x = vec![0.0; d];
        let mut y = x.clone();
        let mut x_new = vec![0.0; d];
        let mut grad = vec![0.0; d];
        let mut trial = vec![0.0; d];
        let mut lip = 1.0;
        let mut theta: f64 = 1.0;
        let mut obj = self.loss(&x) + self.reg(&x);
        let mut best = (obj, x.clone());
        let mut converged = false;
        let mut iterations = 0;

        for it in 1..=self.config.max_iter {
            iterations = it;
            let fy = self.loss_grad(&y, &mut grad);
            loop {
                for j in 0..d {
                    trial[j] = y[j] - grad[j] / lip;
                }
                self.prox(&trial, 1.0 / lip, &mut x_new);
                let mut quad = fy;
                for j in 0..d {
                    let dj = x_new[j] - y[j];
                    quad += grad[j] * dj + 0.5 * lip * dj * dj;
                }
                if self.loss(&x_new) <= quad + 1e-12 * quad.abs().max(1.0) || lip > 1e12 {
                    break;
                }
                lip *= 2.0;
            }
            let new_obj = self.loss(&x_new) + self.reg(&x_new);
            if new_obj > obj {
                if y == x {
                    converged = true;
                    break;
                }
                // Function-value restart: drop momentum and take a plain step from x.
                theta = 1.0;
                y.copy_from_slice(&x);
                continue;
            }
            let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
            let beta = (theta - 1.0) / theta_next;
            for j in 0..d {
                y[j] = x_new[j] + beta * (x_new[j] - x[j]);
            }
            theta = theta_next;
            x.copy_from_slice(&x_new);
            let change = obj - new_obj;
            obj = new_obj;
            if obj < best.0 {
                best = (obj, x.clone());
            }
            if change < self.config.tol {
                converged = true;
                break;
            }
            lip = (lip * 0.9).max(1e-8);
        }

        let weights = best.1.iter().zip(&self.scale).map(|(z, s)| z / s).collect();
        FitOutcome {
            weights: WeightVector::new(weights, self.data.side),
            objective: best.0,
            iterations,
            converged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector { values, side: Side::Carrier }
    }

    fn dataset(rows: &[(Vec<f64>, i64)]) -> LabeledFeatures {
        let vs: Vec<_> = rows.iter().map(|(v, y)| (fv(v.clone()), Response::from_sign(*y).unwrap())).collect();
        LabeledFeatures::from_rows(Side::Carrier, rows[0].0.len(), vs.iter().map(|(x, y)| (x, *y))).unwrap()
    }

    /// Brute-force minimum of the objective over a regular grid.
    fn grid_min(data: &LabeledFeatures, lambda: f64, lo: f64, hi: f64, steps: usize) -> f64 {
        let d = data.dim();
        let h = (hi - lo) / steps as f64;
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; d];
        loop {
            let w: Vec<f64> = idx.iter().map(|&i| lo + h * i as f64).collect();
            best = best.min(logistic_objective(data, &w, lambda).unwrap());
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                return best;
            }
        }
    }

    #[test]
    fn balanced_symmetric_data_gives_zero_weights() {
        let data = dataset(&[(vec![1.0, 1.0], 1), (vec![1.0, 1.0], -1), (vec![1.0, -1.0], 1), (vec![1.0, -1.0], -1)]);
        let out = fit_l1_logistic(&data, &FitConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.weights.weights.iter().all(|w| w.abs() < 1e-8), "{:?}", out.weights.weights);
    }

    #[test]
    fn separable_line_gets_positive_slope_near_grid_optimum() {
        let rows: Vec<_> = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0]
            .iter()
            .map(|&x| (vec![1.0, x], if x > 0.0 { 1 } else { -1 }))
            .collect();
        let data = dataset(&rows);
        let cfg = FitConfig { lambda: 0.01, ..FitConfig::default() };
        let out = fit_l1_logistic(&data, &cfg).unwrap();
        assert!(out.weights.weights[1] > 0.0);
        let oracle = grid_min(&data, 0.01, -10.0, 10.0, 400);
        assert!(out.objective <= oracle + 1e-4, "fit {} grid {}", out.objective, oracle);
    }

    #[test]
    fn huge_penalty_zeroes_regularised_weights() {
        let rows: Vec<_> = (0..20).map(|i| (vec![1.0, i as f64 - 9.5, (i % 3) as f64], if i > 8 { 1 } else { -1 })).collect();
        let data = dataset(&rows);
        let out = fit_l1_logistic(&data, &FitConfig { lambda: 1e6, max_iter: 2000, tol: 1e-12 }).unwrap();
        assert_eq!(&out.weights.weights[1..], &[0.0, 0.0], "{out:?}");
        // The intercept is free: it matches the label log-odds 11:9.
        assert!((out.weights.weights[0] - (11.0f64 / 9.0).ln()).abs() < 1e-3);
    }

    #[test]
    fn three_parameter_fit_is_near_grid_optimum() {
        let rows: Vec<_> = (0..30)
            .map(|i| {
                let a = ((i * 7) % 11) as f64 / 5.0 - 1.0;
                let b = ((i * 3) % 7) as f64 / 3.0 - 1.0;
                (vec![1.0, a, b], if (a - 0.5 * b + 0.3 * ((i % 4) as f64 - 1.5)) > 0.0 { 1 } else { -1 })
            })
            .collect();
        let data = dataset(&rows);
        for lambda in [0.02, 0.1] {
            let out = fit_l1_logistic(&data, &FitConfig { lambda, ..FitConfig::default() }).unwrap();
            let oracle = grid_min(&data, lambda, -6.0, 6.0, 120);
            assert!(out.objective <= oracle + 1e-4, "λ={lambda}: fit {} grid {}", out.objective, oracle);
        }
    }

    #[test]
    fn multiplicities_equal_duplicated_rows() {
        let rows = vec![(vec![1.0, 0.3], 1), (vec![1.0, -0.8], -1), (vec![1.0, 1.1], -1), (vec![1.0, -0.2], 1)];
        let data = dataset(&rows);
        let cfg = FitConfig { lambda: 0.05, max_iter: 5000, tol: 1e-12 };
        let weighted = fit_l1_logistic_weighted(&data, &[2, 0, 1, 3], &cfg).unwrap();
        let expanded = dataset(&[
            rows[0].clone(),
            rows[0].clone(),
            rows[2].clone(),
            rows[3].clone(),
            rows[3].clone(),
            rows[3].clone(),
        ]);
        let plain = fit_l1_logistic(&expanded, &cfg).unwrap();
        for (a, b) in weighted.weights.weights.iter().zip(&plain.weights.weights) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut data = LabeledFeatures::new(Side::Carrier, 2);
        assert!(data.push(&fv(vec![1.0, f64::NAN]), Response::Accept).is_err());
        assert!(data.push(&fv(vec![1.0]), Response::Accept).is_err());
        assert!(data.push(&FeatureVector { values: vec![1.0, 0.0], side: Side::Shipper }, Response::Accept).is_err());
        data.push(&fv(vec![1.0, 2.0]), Response::Accept).unwrap();
        assert!(fit_l1_logistic(&data, &FitConfig { lambda: 0.0, ..FitConfig::default() }).is_err());
        assert!(fit_l1_logistic(&data, &FitConfig::default()).is_ok());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let rows: Vec<_> = (0..40).map(|i| (vec![1.0, i as f64], if i % 3 == 0 { 1 } else { -1 })).collect();
        let data = dataset(&rows);
        let out = fit_l1_logistic(&data, &FitConfig { lambda: 1e-4, max_iter: 2, tol: 1e-12 }).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
        assert!(out.objective <= logistic_objective(&data, &[0.0, 0.0], 1e-4).unwrap());
    }
}
