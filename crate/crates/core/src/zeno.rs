//! Survival of a history under one evolution step, and its Zeno limit.
//!
//! For a state `phi = (h_0, ..., h_{n-1})` on a grid of span `T` with
//! `dt = T / n`, the survival amplitude is the product over slots of
//! `<h_k, exp(-i dt H_k) h_k>`, each evolved slot being re-associated with
//! its own index. Its modulus squared `S(n)` tends to `prod_k |h_k|^4` as
//! `n` grows with `T` fixed. To second order,
//!
//! `S(n) ~ (prod_k |h_k|^4) * (1 - (T/n)^2 * sum_k Var(H_k; h_k))`.
//!
//! The minus sign is the one that follows from multiplying the per-factor
//! expansions `|h_k|^4 (1 - dt^2 Var)`; a plus sign would let the survival
//! of normalized states exceed one.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::aux_algebra::{
    hermitian_exponential, inner_product, random_hermitian, truncated_propagator, variance, AuxState, HermitianOperator,
};
use crate::direct_integral::{DirectIntegralState, GeneratorSpec, TimeGrid};
use crate::error::{Error, Result};
use crate::histories::{apply_chain, HistoryChain};

/// Predictions whose second-order correction exceeds this magnitude are
/// flagged as outside the validity of the expansion.
pub const VALIDITY_LIMIT: f64 = 0.5;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn check_shapes(phi: &DirectIntegralState, gen: &GeneratorSpec) -> Result<()> {
    if gen.len() != phi.len() {
        return Err(Error::GridMismatch(format!(
            "generator has {} slots, state has {}",
            gen.len(),
            phi.len()
        )));
    }
    if gen.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            found: gen.dim(),
        });
    }
    Ok(())
}

/// `prod_k <h_k, exp(-i dt H_k) h_k>`.
pub fn survival_amplitude_exact(phi: &DirectIntegralState, gen: &GeneratorSpec, dt: f64) -> Result<Complex64> {
    check_shapes(phi, gen)?;
    let mut amp = Complex64::new(1.0, 0.0);
    for (h, ham) in phi.slots().iter().zip(gen.hamiltonians()) {
        let u = hermitian_exponential(ham, dt)?;
        amp *= inner_product(h, &(&u * h))?;
    }
    Ok(amp)
}

/// The same product with `exp(-i dt H)` replaced by
/// `I - i dt H - dt^2 H^2 / 2`.
pub fn survival_amplitude_truncated(phi: &DirectIntegralState, gen: &GeneratorSpec, dt: f64) -> Result<Complex64> {
    check_shapes(phi, gen)?;
    let mut amp = Complex64::new(1.0, 0.0);
    for (h, ham) in phi.slots().iter().zip(gen.hamiltonians()) {
        let t = truncated_propagator(ham, dt)?;
        amp *= h.vector().dotc(&(t * h.vector()));
    }
    Ok(amp)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub value: f64,
    /// `|(T/n)^2 sum_k Var| > VALIDITY_LIMIT`; the raw value is still reported.
    pub out_of_validity: bool,
}

/// Second-order survival `(prod_k |h_k|^4) (1 - (T/n)^2 sum_k Var(H_k; h_k))`
/// with `T` and `n` taken from the state's grid. Never clamped.
pub fn survival_probability_predicted(phi: &DirectIntegralState, gen: &GeneratorSpec) -> Result<Prediction> {
    check_shapes(phi, gen)?;
    let dt = phi.grid().dt();
    let mut weight = 1.0;
    let mut total_variance = 0.0;
    for (h, ham) in phi.slots().iter().zip(gen.hamiltonians()) {
        total_variance += variance(ham, h)?;
        weight *= h.norm_squared().powi(2);
    }
    let correction = dt * dt * total_variance;
    Ok(Prediction {
        value: weight * (1.0 - correction),
        out_of_validity: correction.abs() > VALIDITY_LIMIT,
    })
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fit `(ln x, ln y)` over the points with `x > 0` and `y > 0`. Returns
/// `None` when fewer than three points remain.
pub fn fit_log_log(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    fit_linear(&logs)
}

pub fn fit_linear(points: &[(f64, f64)]) -> Option<SlopeFit> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).min(1.0)
    };
    Some(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: n,
    })
}

/// How slot Hamiltonians are produced for a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSpec {
    Constant(HermitianOperator),
    /// One Hamiltonian per slot; only valid on grids with that many slots.
    PerSlot(Vec<HermitianOperator>),
    /// A constant [`random_hermitian`] draw.
    Random {
        dim: usize,
        seed: u64,
    },
    /// `H(t) = base + t * slope`.
    Linear {
        base: HermitianOperator,
        slope: HermitianOperator,
    },
}

impl HamiltonianSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant(h) => h.dim(),
            Self::PerSlot(hs) => hs.first().map_or(0, HermitianOperator::dim),
            Self::Random { dim, .. } => *dim,
            Self::Linear { base, .. } => base.dim(),
        }
    }

    pub fn generator(&self, grid: &TimeGrid) -> Result<GeneratorSpec> {
        match self {
            Self::Constant(h) => GeneratorSpec::constant(h, grid.len()),
            Self::PerSlot(hs) => {
                if hs.len() != grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "{} per-slot Hamiltonians for a grid of {} slots",
                        hs.len(),
                        grid.len()
                    )));
                }
                GeneratorSpec::new(hs.clone())
            }
            Self::Random { dim, seed } => GeneratorSpec::constant(&random_hermitian(*dim, *seed)?, grid.len()),
            Self::Linear { base, slope } => {
                let hs = grid
                    .times()
                    .map(|t| base.sum(&slope.scaled(t)))
                    .collect::<Result<Vec<_>>>()?;
                GeneratorSpec::new(hs)
            }
        }
    }
}

/// How slot vectors are produced for a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    /// Every slot holds the same vector (static Zeno).
    Identical(AuxState),
    /// Explicit slots; only valid on grids with that many slots.
    PerSlot(Vec<AuxState>),
    /// Slots follow the Schroedinger evolution from `h0` under the sweep's
    /// own Hamiltonians (dynamic Zeno).
    SchroedingerPath(AuxState),
}

impl StateSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Identical(h) | Self::SchroedingerPath(h) => h.dim(),
            Self::PerSlot(hs) => hs.first().map_or(0, AuxState::dim),
        }
    }

    pub fn materialize(&self, grid: &TimeGrid, gen: &GeneratorSpec) -> Result<DirectIntegralState> {
        match self {
            Self::Identical(h) => Ok(DirectIntegralState::constant(*grid, h)),
            Self::PerSlot(hs) => DirectIntegralState::new(*grid, hs.clone()),
            Self::SchroedingerPath(h0) => make_schroedinger_path(h0, gen, grid),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoConfig {
    pub t_start: f64,
    pub span: f64,
    pub n_list: Vec<usize>,
    pub hamiltonian: HamiltonianSpec,
    pub state: StateSpec,
}

impl ZenoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.span.is_finite() && self.span > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "span must be positive, got {}",
                self.span
            )));
        }
        if self.n_list.is_empty() {
            return Err(Error::InvalidArgument("n_list is empty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "n_list must contain positive, strictly increasing counts".into(),
            ));
        }
        if self.hamiltonian.dim() != self.state.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state.dim(),
                found: self.hamiltonian.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZenoRecord {
    pub n: usize,
    pub dt: f64,
    pub s_exact: f64,
    pub s_pred: f64,
    pub deficit_exact: f64,
    pub prediction_error: f64,
    pub out_of_validity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoSweep {
    pub records: Vec<ZenoRecord>,
    /// Fit of `ln(1 - S_exact)` against `ln n`.
    pub deficit_fit: Option<SlopeFit>,
    /// Fit of `ln |S_exact - S_pred|` against `ln n`.
    pub prediction_error_fit: Option<SlopeFit>,
}

impl ZenoSweep {
    /// Refit both slopes over records with `n` in `[lo, hi]`.
    pub fn fits_over(&self, lo: usize, hi: usize) -> (Option<SlopeFit>, Option<SlopeFit>) {
        let sel: Vec<&ZenoRecord> = self.records.iter().filter(|r| r.n >= lo && r.n <= hi).collect();
        let deficit: Vec<(f64, f64)> = sel.iter().map(|r| (r.n as f64, r.deficit_exact)).collect();
        let error: Vec<(f64, f64)> = sel.iter().map(|r| (r.n as f64, r.prediction_error)).collect();
        (fit_log_log(&deficit), fit_log_log(&error))
    }
}

/// One sweep point: grid with `dt = T / n`, states and Hamiltonians
/// materialized from the config, exact and predicted survival.
pub fn zeno_record(cfg: &ZenoConfig, n: usize) -> Result<ZenoRecord> {
    let grid = TimeGrid::new(cfg.t_start, cfg.span, n)?;
    let gen = cfg.hamiltonian.generator(&grid)?;
    let phi = cfg.state.materialize(&grid, &gen)?;
    let dt = grid.dt();
    let s_exact = survival_amplitude_exact(&phi, &gen, dt)?.norm_sqr();
    let pred = survival_probability_predicted(&phi, &gen)?;
    let weight: f64 = phi.slots().iter().map(|h| h.norm_squared().powi(2)).product();
    Ok(ZenoRecord {
        n,
        dt,
        s_exact,
        s_pred: pred.value,
        deficit_exact: weight - s_exact,
        prediction_error: (s_exact - pred.value).abs(),
        out_of_validity: pred.out_of_validity,
    })
}

/// Evaluate every `n` in the config (in parallel, merged in `n` order) and
/// fit both log-log slopes over all usable points.
pub fn zeno_sweep(cfg: &ZenoConfig) -> Result<ZenoSweep> {
    cfg.validate()?;
    let records = cfg
        .n_list
        .par_iter()
        .map(|&n| zeno_record(cfg, n))
        .collect::<Result<Vec<_>>>()?;
    let deficit: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.deficit_exact)).collect();
    let error: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.prediction_error)).collect();
    Ok(ZenoSweep {
        deficit_fit: fit_log_log(&deficit),
        prediction_error_fit: fit_log_log(&error),
        records,
    })
}

/// `h_0 = h0`, `h_{k+1} = exp(-i dt H_k) h_k`.
pub fn make_schroedinger_path(h0: &AuxState, gen: &GeneratorSpec, grid: &TimeGrid) -> Result<DirectIntegralState> {
    if gen.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "generator has {} slots, grid has {}",
            gen.len(),
            grid.len()
        )));
    }
    if gen.dim() != h0.dim() {
        return Err(Error::DimensionMismatch {
            expected: h0.dim(),
            found: gen.dim(),
        });
    }
    let mut slots = Vec::with_capacity(grid.len());
    let mut h = h0.clone();
    for k in 0..grid.len() {
        if k > 0 {
            let u = hermitian_exponential(gen.slot(k - 1), grid.dt())?;
            h = &u * &h;
        }
        slots.push(h.clone());
    }
    DirectIntegralState::new(*grid, slots)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `r_k` for `k = 0..n-1` (the last slot has no forward neighbour).
    pub residuals: Vec<f64>,
    pub max: f64,
    pub dt: f64,
}

/// `r_k = || H_k phi_k - i (phi_{k+1} - phi_k) / dt ||`: how far the slot
/// sequence is from solving `H phi = i d/dt phi` under a forward difference.
pub fn schroedinger_residual(phi: &DirectIntegralState, gen: &GeneratorSpec) -> Result<StabilityReport> {
    check_shapes(phi, gen)?;
    let n = phi.len();
    if n < 2 {
        return Err(Error::TooFewSlots {
            scheme: "forward",
            needed: 2,
            found: n,
        });
    }
    let dt = phi.grid().dt();
    let residuals: Vec<f64> = (0..n - 1)
        .map(|k| {
            let h = phi.slot(k);
            let diff = (phi.slot(k + 1).vector() - h.vector()) * (I / dt);
            ((gen.slot(k) * h).into_vector() - diff).norm()
        })
        .collect();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport { residuals, max, dt })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationarityReport {
    /// `max_k || V_k P phi_k - P phi_k ||`.
    pub strict: f64,
    /// `max_k (1 - |<P phi_k, V_k P phi_k>| / |P phi_k|^2)`; insensitive to a
    /// phase picked up by an eigenvector. Slots projected to zero count as 0.
    pub phase_insensitive: f64,
}

/// Whether the projected slots of `C_alpha phi` are invariant under one step
/// `V_k = exp(-i dt H_k)`.
pub fn stationarity_check(
    chain: &HistoryChain,
    phi: &DirectIntegralState,
    gen: &GeneratorSpec,
    dt: f64,
) -> Result<StationarityReport> {
    check_shapes(phi, gen)?;
    let projected = apply_chain(chain, phi)?;
    let mut strict: f64 = 0.0;
    let mut phase: f64 = 0.0;
    for (h, ham) in projected.slots().iter().zip(gen.hamiltonians()) {
        let u = hermitian_exponential(ham, dt)?;
        let moved = &u * h;
        strict = strict.max(moved.distance(h));
        let n2 = h.norm_squared();
        if n2 > 0.0 {
            let overlap = inner_product(h, &moved)?.norm();
            phase = phase.max(1.0 - overlap / n2);
        }
    }
    Ok(StationarityReport {
        strict,
        phase_insensitive: phase,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::direct_integral::history_inner_product;
    use crate::histories::ProjectionFamily;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x_config(n_list: Vec<usize>) -> ZenoConfig {
        ZenoConfig {
            t_start: 0.0,
            span: FRAC_PI_2,
            n_list,
            hamiltonian: HamiltonianSpec::Constant(HermitianOperator::pauli_x()),
            state: StateSpec::Identical(AuxState::basis(2, 0).unwrap()),
        }
    }

    fn grid(n: usize, span: f64) -> TimeGrid {
        TimeGrid::new(0.0, span, n).unwrap()
    }

    #[test]
    fn exact_amplitude_examples() {
        let g = grid(4, 1.0);
        let phi = DirectIntegralState::from_fn(g, |k, _| AuxState::random(2, k as u64).unwrap()).unwrap();
        let zero = GeneratorSpec::zero(2, 4).unwrap();
        let a = survival_amplitude_exact(&phi, &zero, 0.3).unwrap();
        assert_abs_diff_eq!(a.re, 1.0, epsilon = 1e-14);

        let e0 = DirectIntegralState::constant(g, &AuxState::basis(2, 0).unwrap());
        let z = GeneratorSpec::constant(&HermitianOperator::pauli_z(), 4).unwrap();
        assert_abs_diff_eq!(
            survival_amplitude_exact(&e0, &z, 0.7).unwrap().norm(),
            1.0,
            epsilon = 1e-14
        );

        let theta = 0.3;
        let x = GeneratorSpec::constant(&HermitianOperator::pauli_x(), 4).unwrap();
        let a = survival_amplitude_exact(&e0, &x, theta).unwrap();
        assert_abs_diff_eq!(a.re, theta.cos().powi(4), epsilon = 1e-14);
        assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn truncated_amplitude_examples() {
        let g1 = grid(1, 1.0);
        let e0 = DirectIntegralState::constant(g1, &AuxState::basis(2, 0).unwrap());
        let x = GeneratorSpec::constant(&HermitianOperator::pauli_x(), 1).unwrap();
        let theta = 0.4;
        let a = survival_amplitude_truncated(&e0, &x, theta).unwrap();
        assert_abs_diff_eq!(a.re, 1.0 - theta * theta / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-15);

        let zero = GeneratorSpec::zero(2, 1).unwrap();
        assert_eq!(
            survival_amplitude_truncated(&e0, &zero, 0.2).unwrap(),
            survival_amplitude_exact(&e0, &zero, 0.2).unwrap()
        );
    }

    #[test]
    fn truncation_gap_scales_as_n_dt_cubed() {
        for seed in 0..5u64 {
            let n = 6;
            let g = grid(n, 1.0);
            let phi =
                DirectIntegralState::from_fn(g, |k, _| AuxState::random(2, seed * 31 + k as u64).unwrap()).unwrap();
            let gen = GeneratorSpec::constant(&random_hermitian(2, seed).unwrap(), n).unwrap();
            let gap = |dt: f64| {
                (survival_amplitude_exact(&phi, &gen, dt).unwrap()
                    - survival_amplitude_truncated(&phi, &gen, dt).unwrap())
                .norm()
            };
            let (g1, g2) = (gap(0.02), gap(0.01));
            let ratio = g1 / g2;
            assert!((ratio - 8.0).abs() < 0.8, "ratio {ratio}");
            let norm = gen.slot(0).spectral_norm();
            assert!(g1 <= n as f64 * (0.02 * norm).powi(3));
        }
    }

    #[test]
    fn prediction_examples() {
        let g = grid(3, 1.0);
        let e0 = DirectIntegralState::constant(g, &AuxState::basis(2, 0).unwrap().scaled(c(1.5, 0.0)));
        let z = GeneratorSpec::constant(&HermitianOperator::pauli_z(), 3).unwrap();
        let p = survival_probability_predicted(&e0, &z).unwrap();
        assert_eq!(p.value, 1.5f64.powi(12));
        assert!(!p.out_of_validity);

        let t = 2.0;
        let unit = DirectIntegralState::constant(grid(10, t), &AuxState::basis(2, 0).unwrap());
        let x = GeneratorSpec::constant(&HermitianOperator::pauli_x(), 10).unwrap();
        let p = survival_probability_predicted(&unit, &x).unwrap();
        assert_abs_diff_eq!(p.value, 1.0 - t * t / 10.0, epsilon = 1e-14);

        let coarse = DirectIntegralState::constant(grid(2, FRAC_PI_2), &AuxState::basis(2, 0).unwrap());
        let x2 = GeneratorSpec::constant(&HermitianOperator::pauli_x(), 2).unwrap();
        let p = survival_probability_predicted(&coarse, &x2).unwrap();
        assert_abs_diff_eq!(p.value, 1.0 - PI * PI / 8.0, epsilon = 1e-14);
        assert!(p.value < 0.0);
        assert!(p.out_of_validity);

        let zero_slot = DirectIntegralState::constant(grid(2, 1.0), &AuxState::zeros(2).unwrap());
        assert_eq!(survival_probability_predicted(&zero_slot, &x2), Err(Error::ZeroNorm));
    }

    #[test]
    fn static_zeno_closed_form() {
        let sweep = zeno_sweep(&sigma_x_config(vec![1, 2, 64, 100, 128])).unwrap();
        let s: Vec<f64> = sweep.records.iter().map(|r| r.s_exact).collect();
        assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.25, epsilon = 1e-12);
        // cos^200(pi/200) at 40 digits.
        assert_abs_diff_eq!(s[3], 0.975_626_914_143_900_3, epsilon = 1e-12);
        let ratio = sweep.records[2].deficit_exact / sweep.records[4].deficit_exact;
        assert!((ratio - 2.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn eigenvector_slots_are_exactly_stable() {
        let cfg = ZenoConfig {
            state: StateSpec::Identical(AuxState::basis(2, 1).unwrap()),
            hamiltonian: HamiltonianSpec::Constant(HermitianOperator::pauli_z()),
            ..sigma_x_config(vec![1, 2, 4, 8])
        };
        let sweep = zeno_sweep(&cfg).unwrap();
        assert!(sweep.records.iter().all(|r| r.deficit_exact.abs() <= 1e-12));
        assert!(sweep.deficit_fit.is_none());
    }

    #[test]
    fn sweep_rejects_bad_config() {
        assert!(zeno_sweep(&sigma_x_config(vec![])).is_err());
        assert!(zeno_sweep(&sigma_x_config(vec![4, 4])).is_err());
        assert!(zeno_sweep(&sigma_x_config(vec![0, 4])).is_err());
        let cfg = ZenoConfig {
            state: StateSpec::Identical(AuxState::basis(3, 0).unwrap()),
            ..sigma_x_config(vec![1, 2])
        };
        assert!(matches!(zeno_sweep(&cfg), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn fit_needs_three_points() {
        assert!(fit_log_log(&[(1.0, 1.0), (2.0, 0.5)]).is_none());
        assert!(fit_log_log(&[(1.0, 1.0), (2.0, 0.0), (4.0, -1.0)]).is_none());
        let f = fit_log_log(&[(1.0, 1.0), (2.0, 0.25), (4.0, 0.0625)]).unwrap();
        assert_abs_diff_eq!(f.slope, -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn schroedinger_path_examples() {
        let g = grid(5, 1.0);
        let h0 = AuxState::random(2, 1).unwrap();
        let zero = GeneratorSpec::zero(2, 5).unwrap();
        let path = make_schroedinger_path(&h0, &zero, &g).unwrap();
        assert_eq!(path, DirectIntegralState::constant(g, &h0));

        let e0 = AuxState::basis(2, 0).unwrap();
        let z = GeneratorSpec::constant(&HermitianOperator::pauli_z(), 5).unwrap();
        let path = make_schroedinger_path(&e0, &z, &g).unwrap();
        for k in 0..5 {
            let expected = e0.scaled(c(0.0, -(k as f64) * g.dt()).exp());
            assert!(path.slot(k).distance(&expected) < 1e-14);
        }
    }

    #[test]
    fn schroedinger_residual_examples() {
        let g = grid(6, 1.0);
        let h0 = AuxState::random(2, 2).unwrap();
        let zero = GeneratorSpec::zero(2, 6).unwrap();
        let r = schroedinger_residual(&DirectIntegralState::constant(g, &h0), &zero).unwrap();
        assert_eq!(r.residuals.len(), 5);
        assert_eq!(r.max, 0.0);

        let h = random_hermitian(3, 3).unwrap();
        let v = AuxState::random(3, 4).unwrap();
        let report = |n: usize| {
            let g = grid(n, 1.0);
            let gen = GeneratorSpec::constant(&h, n).unwrap();
            schroedinger_residual(&make_schroedinger_path(&v, &gen, &g).unwrap(), &gen).unwrap()
        };
        let coarse = report(200);
        let fine = report(400);
        let ratio = fine.max / coarse.max;
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
        let bound = 0.5 * (&h * &(&h * &v)).norm() * coarse.dt;
        assert!((coarse.max - bound).abs() < 0.1 * bound);

        // A path unrelated to the dynamics is not close to a solution.
        let g = grid(200, 1.0);
        let random = DirectIntegralState::from_fn(g, |k, _| AuxState::random(3, 1000 + k as u64).unwrap()).unwrap();
        let gen = GeneratorSpec::constant(&h, 200).unwrap();
        assert!(schroedinger_residual(&random, &gen).unwrap().max > 1.0);

        let one = DirectIntegralState::constant(grid(1, 1.0), &h0);
        assert!(schroedinger_residual(&one, &GeneratorSpec::zero(2, 1).unwrap()).is_err());
    }

    #[test]
    fn stationarity_examples() {
        let g = grid(3, 1.0);
        let fam = ProjectionFamily::computational_basis(2, 3).unwrap();
        let chain = HistoryChain::new(fam, vec![0, 0, 0].into()).unwrap();
        let phi = DirectIntegralState::from_fn(g, |k, _| AuxState::random(2, k as u64).unwrap()).unwrap();

        // |0> spans the kernel of diag(0, 1).
        let kernel = GeneratorSpec::constant(&HermitianOperator::diagonal(&[0.0, 1.0]).unwrap(), 3).unwrap();
        assert!(stationarity_check(&chain, &phi, &kernel, 0.2).unwrap().strict < 1e-14);
        let zero = GeneratorSpec::zero(2, 3).unwrap();
        assert_eq!(stationarity_check(&chain, &phi, &zero, 0.2).unwrap().strict, 0.0);

        let unit = DirectIntegralState::constant(g, &AuxState::basis(2, 0).unwrap());
        let one = GeneratorSpec::constant(&HermitianOperator::diagonal(&[1.0, 0.0]).unwrap(), 3).unwrap();
        let r = stationarity_check(&chain, &unit, &one, 0.01).unwrap();
        assert_abs_diff_eq!(r.strict, (c(0.0, -0.01).exp() - 1.0).norm(), epsilon = 1e-14);
        assert_abs_diff_eq!(r.strict, 0.01, epsilon = 1e-5);
        assert!(r.phase_insensitive < 1e-14);
    }

    #[test]
    fn zero_step_amplitude_is_history_self_product() {
        let g = grid(4, 1.0);
        let phi = DirectIntegralState::from_fn(g, |k, _| {
            AuxState::random(3, k as u64).unwrap().scaled(c(0.5 + k as f64, 0.0))
        })
        .unwrap();
        let gen = GeneratorSpec::constant(&random_hermitian(3, 1).unwrap(), 4).unwrap();
        assert_eq!(
            survival_amplitude_exact(&phi, &gen, 0.0).unwrap(),
            history_inner_product(&phi, &phi).unwrap()
        );
    }

    proptest! {
        #[test]
        fn survival_is_a_probability_and_even(seed in any::<u64>(), n in 1usize..8, dt in -2.0f64..2.0) {
            let g = grid(n, 1.0);
            let phi = DirectIntegralState::from_fn(g, |k, _| AuxState::random(3, seed.wrapping_add(k as u64)).unwrap()).unwrap();
            let gen = GeneratorSpec::constant(&random_hermitian(3, seed).unwrap(), n).unwrap();
            let fwd = survival_amplitude_exact(&phi, &gen, dt).unwrap().norm_sqr();
            let bwd = survival_amplitude_exact(&phi, &gen, -dt).unwrap().norm_sqr();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&fwd));
            prop_assert!((fwd - bwd).abs() <= 1e-12);
        }
    }
}
