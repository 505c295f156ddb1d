//! Noise injection, NMSE and k-fold selection of `(alpha, beta)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::lrg::{solve_batch, LrgProblem};

/// SNR values above this are treated as this (noise power ~1e-30 of signal).
pub const MAX_SNR_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

/// Adds i.i.d. Gaussian noise with variance `P / 10^(snr/10)`, `P` being the
/// mean squared entry of `clean`.
pub fn add_noise(clean: &DMatrix<f64>, spec: NoiseSpec) -> Result<DMatrix<f64>> {
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::Validation(format!("invalid SNR {}", spec.snr_db)));
    }
    if clean.is_empty() {
        return Err(Error::Validation("cannot add noise to an empty matrix".into()));
    }
    let power = clean.norm_squared() / clean.len() as f64;
    if power.is_nan() || power <= 0.0 || !power.is_finite() {
        return Err(Error::Validation(
            "signal power is zero or non-finite; SNR is undefined".into(),
        ));
    }
    let snr_db = spec.snr_db.min(MAX_SNR_DB);
    let sigma = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Validation(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noisy = clean.clone();
    // Row-major draw order so a prefix of rows gets the same noise regardless
    // of how many rows follow.
    for i in 0..noisy.nrows() {
        for j in 0..noisy.ncols() {
            noisy[(i, j)] += normal.sample(&mut rng);
        }
    }
    Ok(noisy)
}

/// `sum |truth_n - pred_n|^2 / sum |truth_n|^2` over rows (one signal per row).
pub fn nmse(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::dims(
            "nmse",
            format!("{}x{}", truth.nrows(), truth.ncols()),
            format!("{}x{}", pred.nrows(), pred.ncols()),
        ));
    }
    let denom = truth.norm_squared();
    if denom.is_nan() || denom <= 0.0 {
        return Err(Error::Validation("NMSE undefined for an all-zero reference".into()));
    }
    Ok((truth - pred).norm_squared() / denom)
}

/// Default penalty grid, `10^-4 ..= 10^2` in decades.
pub fn default_grid() -> Vec<f64> {
    (-4..=2).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub folds: usize,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 4,
            alpha_grid: default_grid(),
            beta_grid: default_grid(),
        }
    }
}

impl CvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Validation(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        check_grid("alpha", &self.alpha_grid)?;
        check_grid("beta", &self.beta_grid)
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Validation(format!("{name} grid is empty")));
    }
    if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Validation(format!("{name} grid value {v} is not a positive real")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub beta: f64,
}

/// Contiguous fold boundaries `[start, end)` over `samples` rows.
pub fn fold_ranges(samples: usize, folds: usize) -> Vec<(usize, usize)> {
    (0..folds)
        .map(|f| (f * samples / folds, (f + 1) * samples / folds))
        .collect()
}

/// Grid search for `(alpha, beta)` minimising mean validation NMSE.
///
/// Ties resolve to the smallest alpha, then the smallest beta.
pub fn cross_validate(
    phi: &DesignMatrix,
    targets: &DMatrix<f64>,
    laplacian: &DMatrix<f64>,
    cfg: &CvConfig,
) -> Result<Hyperparameters> {
    cfg.validate()?;
    grid_search(phi, targets, laplacian, cfg.folds, &cfg.alpha_grid, &cfg.beta_grid)
}

/// Ridge (`beta = 0`) variant used for the graph-free baseline.
pub fn cross_validate_ridge(
    phi: &DesignMatrix,
    targets: &DMatrix<f64>,
    folds: usize,
    alpha_grid: &[f64],
) -> Result<f64> {
    if folds < 2 {
        return Err(Error::Validation(format!(
            "cross-validation needs at least 2 folds, got {folds}"
        )));
    }
    check_grid("alpha", alpha_grid)?;
    let m = targets.ncols();
    let laplacian = DMatrix::zeros(m, m);
    Ok(grid_search(phi, targets, &laplacian, folds, alpha_grid, &[0.0])?.alpha)
}

fn grid_search(
    phi: &DesignMatrix,
    targets: &DMatrix<f64>,
    laplacian: &DMatrix<f64>,
    folds: usize,
    alpha_grid: &[f64],
    beta_grid: &[f64],
) -> Result<Hyperparameters> {
    let n = phi.samples();
    if targets.nrows() != n {
        return Err(Error::dims("cross-validation targets", n, targets.nrows()));
    }
    if n < folds {
        return Err(Error::Validation(format!(
            "cross-validation needs at least {folds} samples, got {n}"
        )));
    }
    let mut alphas = alpha_grid.to_vec();
    let mut betas = beta_grid.to_vec();
    alphas.sort_by(f64::total_cmp);
    betas.sort_by(f64::total_cmp);

    let splits: Vec<_> = fold_ranges(n, folds)
        .into_iter()
        .map(|(lo, hi)| {
            let train: Vec<usize> = (0..lo).chain(hi..n).collect();
            let valid: Vec<usize> = (lo..hi).collect();
            (
                phi.select_rows(&train),
                targets.select_rows(&train),
                phi.select_rows(&valid),
                targets.select_rows(&valid),
            )
        })
        .collect();

    let mut best: Option<(f64, Hyperparameters)> = None;
    for &alpha in &alphas {
        for &beta in &betas {
            let score = mean_validation_nmse(&splits, laplacian, alpha, beta)?;
            if let Some(score) = score {
                if best.is_none_or(|(b, _)| score < b) {
                    best = Some((score, Hyperparameters { alpha, beta }));
                }
            }
        }
    }
    best.map(|(_, h)| h).ok_or_else(|| {
        Error::Singular("every grid point produced a singular training system".into())
    })
}

type Split = (DesignMatrix, DMatrix<f64>, DesignMatrix, DMatrix<f64>);

/// `None` when the grid point cannot be fitted on some fold.
fn mean_validation_nmse(
    splits: &[Split],
    laplacian: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
) -> Result<Option<f64>> {
    let mut total = 0.0;
    for (phi_tr, t_tr, phi_va, t_va) in splits {
        let problem = LrgProblem::new(phi_tr.clone(), t_tr.clone(), laplacian.clone(), alpha, beta)?;
        let w = match solve_batch(&problem) {
            Ok(w) => w,
            Err(Error::Singular(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let pred = w.predict_design(phi_va)?;
        total += nmse(&pred, t_va)?;
    }
    let mean = total / splits.len() as f64;
    Ok(mean.is_finite().then_some(mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use rand::{Rng, SeedableRng};

    fn smooth_matrix(r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |i, j| ((i * 3 + j) as f64 * 0.41).sin() + 0.2)
    }

    #[test]
    fn huge_snr_is_nearly_clean() {
        let clean = smooth_matrix(10, 4);
        let noisy = add_noise(&clean, NoiseSpec { snr_db: f64::INFINITY, seed: 1 }).unwrap();
        assert!((noisy - &clean).abs().max() < 1e-10);
    }

    #[test]
    fn noise_power_tracks_snr() {
        let clean = smooth_matrix(200, 60);
        let power = clean.norm_squared();
        for (snr, want) in [(0.0, 1.0), (10.0, 0.1)] {
            let noisy = add_noise(&clean, NoiseSpec { snr_db: snr, seed: 7 }).unwrap();
            let ratio = (noisy - &clean).norm_squared() / power;
            assert!((ratio / want - 1.0).abs() < 0.1, "snr {snr}: ratio {ratio}");
        }
    }

    #[test]
    fn noise_is_reproducible_and_rejects_zero_power() {
        let clean = smooth_matrix(5, 3);
        let spec = NoiseSpec { snr_db: 10.0, seed: 3 };
        assert_eq!(add_noise(&clean, spec).unwrap(), add_noise(&clean, spec).unwrap());
        assert!(add_noise(&DMatrix::zeros(3, 3), spec).is_err());
        assert!(add_noise(&clean, NoiseSpec { snr_db: f64::NAN, seed: 0 }).is_err());
    }

    #[test]
    fn noise_prefix_is_stable() {
        let clean = smooth_matrix(8, 3);
        let spec = NoiseSpec { snr_db: 10.0, seed: 9 };
        let full = add_noise(&clean, spec).unwrap();
        let noise_full = &full - &clean;
        // Same power scale for the first rows when generated standalone only if
        // the power matches, so compare draws through normalised noise.
        let part = clean.rows(0, 4).clone_owned();
        let p_full = clean.norm_squared() / clean.len() as f64;
        let p_part = part.norm_squared() / part.len() as f64;
        let noise_part = (add_noise(&part, spec).unwrap() - &part) * (p_full / p_part).sqrt();
        assert!((noise_full.rows(0, 4) - noise_part).abs().max() < 1e-12);
    }

    #[test]
    fn nmse_examples() {
        let truth = dmatrix![1.0, 2.0; -1.0, 0.5];
        assert_eq!(nmse(&truth, &truth).unwrap(), 0.0);
        assert_eq!(nmse(&DMatrix::zeros(2, 2), &truth).unwrap(), 1.0);
        assert!((nmse(&(&truth * 2.0), &truth).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmse(&truth, &DMatrix::zeros(2, 2)).is_err());
        assert!(nmse(&DMatrix::zeros(1, 2), &truth).is_err());
    }

    #[test]
    fn nmse_equals_residual_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let truth = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-2.0..2.0));
            let r = DMatrix::from_fn(6, 5, |_, _| rng.random_range(-1.0..1.0));
            let got = nmse(&(&truth + &r), &truth).unwrap();
            let want = r.norm_squared() / truth.norm_squared();
            assert!((got - want).abs() <= 1e-14 * want.max(1.0));
        }
    }

    #[test]
    fn single_point_grid() {
        let phi = DesignMatrix::new(smooth_matrix(8, 3)).unwrap();
        let t = smooth_matrix(8, 2);
        let cfg = CvConfig { folds: 4, alpha_grid: vec![0.3], beta_grid: vec![2.0] };
        let h = cross_validate(&phi, &t, &DMatrix::zeros(2, 2), &cfg).unwrap();
        assert_eq!(h, Hyperparameters { alpha: 0.3, beta: 2.0 });
    }

    #[test]
    fn noiseless_data_prefers_small_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(16, 3, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        let t = &x * &w;
        let phi = DesignMatrix::new(x).unwrap();
        let l = dmatrix![1.0, -1.0; -1.0, 1.0];
        let cfg = CvConfig { folds: 4, alpha_grid: vec![1e2, 1e-8], beta_grid: vec![1e-6] };
        let h = cross_validate(&phi, &t, &l, &cfg).unwrap();
        assert_eq!(h.alpha, 1e-8);
        assert_eq!(cross_validate_ridge(&phi, &t, 4, &[1e-8, 1e2]).unwrap(), 1e-8);
    }

    #[test]
    fn ties_break_towards_small_penalties() {
        // Vanishing features: every grid point predicts zero and scores identically.
        let t = DMatrix::from_fn(8, 2, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        let phi_zero = DesignMatrix::new(DMatrix::from_element(8, 2, 1e-300)).unwrap();
        let cfg = CvConfig { folds: 2, alpha_grid: vec![3.0, 1.0, 2.0], beta_grid: vec![5.0, 4.0] };
        let h = cross_validate(&phi_zero, &t, &DMatrix::zeros(2, 2), &cfg).unwrap();
        assert_eq!(h, Hyperparameters { alpha: 1.0, beta: 4.0 });
    }

    #[test]
    fn cv_errors() {
        let phi = DesignMatrix::new(smooth_matrix(3, 2)).unwrap();
        let t = smooth_matrix(3, 1);
        let l = DMatrix::zeros(1, 1);
        assert!(cross_validate(&phi, &t, &l, &CvConfig::default()).is_err());
        let empty = CvConfig { alpha_grid: vec![], ..CvConfig::default() };
        assert!(cross_validate(&phi, &t, &l, &empty).is_err());
        let one_fold = CvConfig { folds: 1, ..CvConfig::default() };
        assert!(cross_validate(&phi, &t, &l, &one_fold).is_err());
    }

    #[test]
    fn folds_are_contiguous_and_cover() {
        assert_eq!(fold_ranges(10, 4), vec![(0, 2), (2, 5), (5, 7), (7, 10)]);
        assert_eq!(fold_ranges(4, 4), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
    }
}
