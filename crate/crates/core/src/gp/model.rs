use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use crate::error::{Error, Result};
use crate::numeric::LN_SQRT_2PI;
use crate::policy::PolicyParams;

/// Jitter ladder tried, in order, when the Gram matrix will not factor.
pub const JITTER_LADDER: [f64; 6] = [0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Roundoff allowance for negative predictive variances.
pub const NEGATIVE_VARIANCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub mean: f64,
    pub variance: f64,
}

impl PredictiveDistribution {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// A fitted zero-mean GP (optionally on mean-centered targets).
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: KernelSpec,
    train_inputs: Vec<PolicyParams>,
    train_targets: Vec<f64>,
    per_point_noise: Option<Vec<f64>>,
    center: bool,
    target_offset: f64,
    jitter: f64,
    gram_factor: DMatrix<f64>,
    alpha: DVector<f64>,
}

pub(crate) fn check_inputs(
    kernel: &KernelSpec,
    inputs: &[PolicyParams],
    targets: &[f64],
    per_point_noise: Option<&[f64]>,
) -> Result<()> {
    kernel.validate()?;
    if inputs.is_empty() {
        return Err(Error::argument("at least one training pair is required"));
    }
    if inputs.len() != targets.len() {
        return Err(Error::argument("inputs and targets differ in length"));
    }
    if let Some(bad) = inputs.iter().find(|p| p.dim() != kernel.dim()) {
        return Err(Error::argument(format!(
            "training input of dimension {} does not match kernel dimension {}",
            bad.dim(),
            kernel.dim()
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::argument("targets must be finite"));
    }
    if let Some(noise) = per_point_noise {
        if noise.len() != targets.len() {
            return Err(Error::argument("per-point noise length differs from targets"));
        }
        if noise.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::argument("per-point noise must be non-negative"));
        }
    }
    Ok(())
}

/// Covariance matrix plus white/per-point noise (no jitter).
pub(crate) fn noisy_gram(
    kernel: &KernelSpec,
    inputs: &[PolicyParams],
    per_point_noise: Option<&[f64]>,
) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = kernel.eval_slices(inputs[i].as_slice(), inputs[j].as_slice());
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        let extra = per_point_noise.map_or(0.0, |p| p[i]);
        k[(i, i)] = kernel.signal_variance + kernel.noise_variance + extra;
    }
    k
}

/// Cholesky with the jitter ladder. Returns the lower factor and the jitter used.
pub(crate) fn factor_with_jitter(gram: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    for &jitter in &JITTER_LADDER {
        let mut m = gram.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(ch) = m.cholesky() {
            return Ok((ch.unpack(), jitter));
        }
    }
    Err(Error::numerical(format!(
        "Gram matrix is not positive definite even with jitter {:e}",
        JITTER_LADDER[JITTER_LADDER.len() - 1]
    )))
}

fn solve_lower(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.solve_lower_triangular_unchecked_mut(b);
}

fn solve_upper_transposed(l: &DMatrix<f64>, b: &mut DVector<f64>) {
    l.tr_solve_lower_triangular_unchecked_mut(b);
}

impl GpModel {
    /// Build the noisy Gram matrix, factor it and precompute the weights.
    ///
    /// With `center` the sample mean of the targets is removed before
    /// conditioning and added back to predictions.
    pub fn fit(
        kernel: KernelSpec,
        inputs: Vec<PolicyParams>,
        targets: Vec<f64>,
        per_point_noise: Option<Vec<f64>>,
        center: bool,
    ) -> Result<Self> {
        check_inputs(&kernel, &inputs, &targets, per_point_noise.as_deref())?;
        let offset = if center {
            targets.iter().sum::<f64>() / targets.len() as f64
        } else {
            0.0
        };
        let gram = noisy_gram(&kernel, &inputs, per_point_noise.as_deref());
        let (l, jitter) = factor_with_jitter(&gram)?;
        let mut alpha = DVector::from_iterator(targets.len(), targets.iter().map(|t| t - offset));
        solve_lower(&l, &mut alpha);
        solve_upper_transposed(&l, &mut alpha);
        Ok(GpModel {
            kernel,
            train_inputs: inputs,
            train_targets: targets,
            per_point_noise,
            center,
            target_offset: offset,
            jitter,
            gram_factor: l,
            alpha,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn train_inputs(&self) -> &[PolicyParams] {
        &self.train_inputs
    }

    pub fn train_targets(&self) -> &[f64] {
        &self.train_targets
    }

    pub fn per_point_noise(&self) -> Option<&[f64]> {
        self.per_point_noise.as_deref()
    }

    pub fn centered(&self) -> bool {
        self.center
    }

    pub fn target_offset(&self) -> f64 {
        self.target_offset
    }

    /// Diagonal jitter the factorization needed (0 when none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn gram_factor(&self) -> &DMatrix<f64> {
        &self.gram_factor
    }

    pub fn len(&self) -> usize {
        self.train_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_targets.is_empty()
    }

    fn check_query(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.kernel.dim() {
            return Err(Error::argument(format!(
                "query dimension {} does not match model dimension {}",
                q.len(),
                self.kernel.dim()
            )));
        }
        Ok(())
    }

    fn cross_cov(&self, q: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.train_inputs.len(),
            self.train_inputs
                .iter()
                .map(|x| self.kernel.eval_slices(q, x.as_slice())),
        )
    }

    /// Predictive mean only; skips the triangular solve.
    pub fn predict_mean(&self, query: &[f64]) -> Result<f64> {
        self.check_query(query)?;
        Ok(self.cross_cov(query).dot(&self.alpha) + self.target_offset)
    }

    /// Posterior predictive distribution of the latent value at `query`.
    pub fn predict_slice(&self, query: &[f64]) -> Result<PredictiveDistribution> {
        self.check_query(query)?;
        let mut v = self.cross_cov(query);
        let mean = v.dot(&self.alpha) + self.target_offset;
        solve_lower(&self.gram_factor, &mut v);
        let variance = self.kernel.signal_variance - v.norm_squared();
        let variance = if variance >= 0.0 {
            variance
        } else if variance >= -NEGATIVE_VARIANCE_TOLERANCE {
            0.0
        } else {
            return Err(Error::numerical(format!(
                "predictive variance {variance:e} is negative beyond roundoff"
            )));
        };
        Ok(PredictiveDistribution { mean, variance })
    }

    pub fn predict(&self, query: &PolicyParams) -> Result<PredictiveDistribution> {
        self.predict_slice(query.as_slice())
    }

    /// Log evidence of the (centered) training targets under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let y = DVector::from_iterator(
            self.train_targets.len(),
            self.train_targets.iter().map(|t| t - self.target_offset),
        );
        let n = y.len() as f64;
        let logdet: f64 = (0..self.gram_factor.nrows())
            .map(|i| self.gram_factor[(i, i)].ln())
            .sum();
        -0.5 * y.dot(&self.alpha) - logdet - n * LN_SQRT_2PI
    }

    pub fn to_document(&self) -> GpModelDocument {
        GpModelDocument {
            kernel: self.kernel.clone(),
            train_inputs: self.train_inputs.clone(),
            train_targets: self.train_targets.clone(),
            per_point_noise: self.per_point_noise.clone(),
            center: self.center,
        }
    }

    pub fn from_document(doc: GpModelDocument) -> Result<Self> {
        GpModel::fit(
            doc.kernel,
            doc.train_inputs,
            doc.train_targets,
            doc.per_point_noise,
            doc.center,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        GpModel::from_document(serde_json::from_str(s)?)
    }
}

/// Serialized form of a [`GpModel`]. The factorization is recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModelDocument {
    pub kernel: KernelSpec,
    pub train_inputs: Vec<PolicyParams>,
    pub train_targets: Vec<f64>,
    #[serde(default)]
    pub per_point_noise: Option<Vec<f64>>,
    #[serde(default)]
    pub center: bool,
}

/// `-1/2 V'(K+S)^-1 V - 1/2 log|K+S| - n/2 log 2pi` on the targets as given.
pub fn log_marginal_likelihood(
    kernel: &KernelSpec,
    inputs: &[PolicyParams],
    targets: &[f64],
    per_point_noise: Option<&[f64]>,
) -> Result<f64> {
    check_inputs(kernel, inputs, targets, per_point_noise)?;
    let gram = noisy_gram(kernel, inputs, per_point_noise);
    let (l, _) = factor_with_jitter(&gram)?;
    Ok(lml_from_factor(&l, targets))
}

pub(crate) fn lml_from_factor(l: &DMatrix<f64>, targets: &[f64]) -> f64 {
    let mut v = DVector::from_column_slice(targets);
    solve_lower(l, &mut v);
    let logdet: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
    -0.5 * v.norm_squared() - logdet - targets.len() as f64 * LN_SQRT_2PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::kernel::Smoothness;

    fn k1(nu: Smoothness, noise: f64) -> KernelSpec {
        KernelSpec::new(nu, 1.0, vec![1.0], noise).unwrap()
    }

    #[test]
    fn interpolates_single_point() {
        let m = GpModel::fit(
            k1(Smoothness::ThreeHalves, 0.0),
            vec![PolicyParams(vec![0.5])],
            vec![1.0],
            None,
            false,
        )
        .unwrap();
        let p = m.predict(&PolicyParams(vec![0.5])).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-12);
        assert!(p.variance.abs() < 1e-12);
    }

    #[test]
    fn scalar_conditioning_by_hand() {
        let m = GpModel::fit(
            k1(Smoothness::Half, 0.0),
            vec![PolicyParams(vec![0.0])],
            vec![1.0],
            None,
            false,
        )
        .unwrap();
        let p = m.predict(&PolicyParams(vec![1.0])).unwrap();
        let e1 = (-1f64).exp();
        assert!((p.mean - e1).abs() < 1e-15);
        assert!((p.variance - (1.0 - e1 * e1)).abs() < 1e-15);
    }

    #[test]
    fn duplicate_inputs_with_noise_fit() {
        let m = GpModel::fit(
            k1(Smoothness::ThreeHalves, 0.1),
            vec![PolicyParams(vec![0.2]), PolicyParams(vec![0.2])],
            vec![0.0, 1.0],
            None,
            false,
        )
        .unwrap();
        assert_eq!(m.jitter(), 0.0);
        let p = m.predict(&PolicyParams(vec![0.2])).unwrap();
        assert!(p.mean > 0.3 && p.mean < 0.7);
    }

    #[test]
    fn duplicate_inputs_without_noise_need_jitter() {
        let m = GpModel::fit(
            k1(Smoothness::ThreeHalves, 0.0),
            vec![PolicyParams(vec![0.2]), PolicyParams(vec![0.2])],
            vec![1.0, 1.0],
            None,
            false,
        )
        .unwrap();
        assert!(m.jitter() > 0.0);
    }

    #[test]
    fn lml_scalar_density() {
        let v = log_marginal_likelihood(
            &k1(Smoothness::ThreeHalves, 0.0),
            &[PolicyParams(vec![0.0])],
            &[0.0],
            None,
        )
        .unwrap();
        assert!((v + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
        assert!((v + 0.9189).abs() < 1e-4);
    }

    #[test]
    fn lml_zero_targets_is_logdet_only() {
        let k = KernelSpec::new(Smoothness::ThreeHalves, 1.3, vec![0.4, 0.9], 0.05).unwrap();
        let xs: Vec<PolicyParams> = (0..5)
            .map(|i| PolicyParams(vec![i as f64 * 0.2, 1.0 - i as f64 * 0.15]))
            .collect();
        let v = log_marginal_likelihood(&k, &xs, &[0.0; 5], None).unwrap();
        let gram = noisy_gram(&k, &xs, None);
        let det = gram.determinant();
        let want = -0.5 * det.ln() - 2.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((v - want).abs() < 1e-10);
    }

    #[test]
    fn model_and_free_function_agree() {
        let k = KernelSpec::new(Smoothness::FiveHalves, 0.7, vec![0.3], 0.01).unwrap();
        let xs: Vec<PolicyParams> = (0..6).map(|i| PolicyParams(vec![i as f64 / 5.0])).collect();
        let ys = vec![0.1, -0.3, 0.5, 0.2, 0.0, 0.9];
        let m = GpModel::fit(k.clone(), xs.clone(), ys.clone(), None, false).unwrap();
        let direct = log_marginal_likelihood(&k, &xs, &ys, None).unwrap();
        assert!((m.log_marginal_likelihood() - direct).abs() < 1e-12);
    }

    #[test]
    fn query_dimension_checked() {
        let m = GpModel::fit(
            k1(Smoothness::Half, 0.0),
            vec![PolicyParams(vec![0.0])],
            vec![1.0],
            None,
            true,
        )
        .unwrap();
        assert!(matches!(m.predict(&PolicyParams(vec![0.0, 1.0])), Err(Error::Argument(_))));
    }

    #[test]
    fn json_round_trip_reproduces_predictions() {
        let k = KernelSpec::new(Smoothness::ThreeHalves, 0.5, vec![0.3, 2.0], 1e-4).unwrap();
        let xs = vec![
            PolicyParams(vec![0.1, 0.2]),
            PolicyParams(vec![0.7, 0.4]),
            PolicyParams(vec![0.5, 0.9]),
        ];
        let m = GpModel::fit(k, xs, vec![0.3, 0.8, 0.1], Some(vec![0.01, 0.0, 0.02]), true).unwrap();
        let back = GpModel::from_json(&m.to_json().unwrap()).unwrap();
        let q = PolicyParams(vec![0.33, 0.44]);
        assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
    }

    #[test]
    fn centering_restores_offset_far_away() {
        let k = KernelSpec::new(Smoothness::ThreeHalves, 1.0, vec![0.1], 1e-6).unwrap();
        let xs: Vec<PolicyParams> = (0..4).map(|i| PolicyParams(vec![i as f64 * 0.1])).collect();
        let m = GpModel::fit(k, xs, vec![5.0, 5.2, 4.8, 5.0], None, true).unwrap();
        let far = m.predict(&PolicyParams(vec![50.0])).unwrap();
        assert!((far.mean - 5.0).abs() < 1e-9);
    }
}
