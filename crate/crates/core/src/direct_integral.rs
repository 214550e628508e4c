//! States on a uniform foliation grid and their evolution.
//!
//! A [`DirectIntegralState`] assigns one auxiliary vector to each grid time.
//! The evolution `U(tau)` with `tau = m * dt` applies the slot propagator and
//! translates the sequence by `m` slots. On a finite grid the translation
//! either wraps around ([`Boundary::Cyclic`], unitary on the whole state) or
//! re-associates each evolved vector with its original slot
//! ([`Boundary::Relabel`]).

use num_complex::Complex64;

use crate::aux_algebra::{hermitian_exponential, inner_product, AuxState, HermitianOperator, UnitaryOperator};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `n` uniformly spaced times `t_start + k * dt`, `k = 0..n`, with
/// `dt = span / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    span: f64,
    n: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, span: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("slot count must be at least 1".into()));
        }
        if !(span.is_finite() && span > 0.0) {
            return Err(Error::InvalidGrid(format!("span must be positive, got {span}")));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidGrid(format!("t_start must be finite, got {t_start}")));
        }
        Ok(Self { t_start, span, n })
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.span / self.n as f64
    }

    /// Time of slot `k` (zero-based).
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.time(k))
    }

    fn ensure_same(&self, other: &TimeGrid) -> Result<()> {
        let tol = 1e-12 * self.span;
        if self.n != other.n || (self.span - other.span).abs() > tol || (self.t_start - other.t_start).abs() > tol {
            return Err(Error::GridMismatch(format!(
                "grids ({}, {}, {}) and ({}, {}, {}) differ",
                self.t_start, self.span, self.n, other.t_start, other.span, other.n
            )));
        }
        Ok(())
    }
}

/// One auxiliary vector per grid slot, all of the same dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectIntegralState {
    grid: TimeGrid,
    slots: Vec<AuxState>,
}

impl DirectIntegralState {
    pub fn new(grid: TimeGrid, slots: Vec<AuxState>) -> Result<Self> {
        if slots.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "grid has {} slots but {} vectors were given",
                grid.len(),
                slots.len()
            )));
        }
        let d = slots[0].dim();
        if let Some(bad) = slots.iter().find(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { grid, slots })
    }

    /// Every slot holds a copy of `h`.
    pub fn constant(grid: TimeGrid, h: &AuxState) -> Self {
        Self {
            grid,
            slots: vec![h.clone(); grid.len()],
        }
    }

    /// Slot `k` is `f(k, t_k)`.
    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(usize, f64) -> AuxState) -> Result<Self> {
        let slots = (0..grid.len()).map(|k| f(k, grid.time(k))).collect();
        Self::new(grid, slots)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn slots(&self) -> &[AuxState] {
        &self.slots
    }

    pub fn slot(&self, k: usize) -> &AuxState {
        &self.slots[k]
    }

    pub fn dim(&self) -> usize {
        self.slots[0].dim()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub(crate) fn with_slots(&self, slots: Vec<AuxState>) -> Self {
        debug_assert_eq!(slots.len(), self.slots.len());
        Self { grid: self.grid, slots }
    }

    /// Norm induced by [`integral_inner_product`].
    pub fn integral_norm(&self) -> f64 {
        (self.slots.iter().map(AuxState::norm_squared).sum::<f64>() * self.grid.dt()).sqrt()
    }

    /// Largest slotwise distance to `other`. Panics if shapes differ.
    pub fn max_slot_distance(&self, other: &DirectIntegralState) -> f64 {
        self.slots
            .iter()
            .zip(&other.slots)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }

    pub(crate) fn ensure_compatible(&self, other: &DirectIntegralState) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// Per-slot Hamiltonians `H_{t_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    hamiltonians: Vec<HermitianOperator>,
}

impl GeneratorSpec {
    pub fn new(hamiltonians: Vec<HermitianOperator>) -> Result<Self> {
        let first = hamiltonians
            .first()
            .ok_or_else(|| Error::InvalidArgument("generator needs at least one slot".into()))?;
        let d = first.dim();
        if let Some(bad) = hamiltonians.iter().find(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Self { hamiltonians })
    }

    /// Time-independent dynamics on `n` slots.
    pub fn constant(h: &HermitianOperator, n: usize) -> Result<Self> {
        Self::new(vec![h.clone(); n])
    }

    pub fn zero(dim: usize, n: usize) -> Result<Self> {
        Self::constant(&HermitianOperator::zero(dim)?, n)
    }

    /// `H_{t_k} = f(t_k)` on every grid time.
    pub fn from_fn(grid: &TimeGrid, mut f: impl FnMut(f64) -> HermitianOperator) -> Result<Self> {
        Self::new(grid.times().map(&mut f).collect())
    }

    pub fn hamiltonians(&self) -> &[HermitianOperator] {
        &self.hamiltonians
    }

    pub fn slot(&self, k: usize) -> &HermitianOperator {
        &self.hamiltonians[k]
    }

    pub fn len(&self) -> usize {
        self.hamiltonians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hamiltonians.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonians[0].dim()
    }

    pub(crate) fn ensure_matches(&self, phi: &DirectIntegralState) -> Result<()> {
        if self.len() != phi.len() {
            return Err(Error::GridMismatch(format!(
                "generator has {} slots, state has {}",
                self.len(),
                phi.len()
            )));
        }
        if self.dim() != phi.dim() {
            return Err(Error::DimensionMismatch {
                expected: phi.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Translation wraps indices modulo `n`.
    Cyclic,
    /// Evolved content stays attached to its original slot index.
    Relabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stencil {
    /// `(phi_{k+1} - phi_k) / dt`
    #[default]
    Forward,
    /// `(phi_{k+1} - phi_{k-1}) / (2 dt)`
    Central,
}

/// Single-step propagators `exp(-i dt H_{t_k})` for every slot.
#[derive(Debug, Clone)]
pub struct Propagators {
    steps: Vec<UnitaryOperator>,
}

impl Propagators {
    pub fn new(gen: &GeneratorSpec, dt: f64) -> Result<Self> {
        let steps = gen
            .hamiltonians
            .iter()
            .map(|h| hermitian_exponential(h, dt))
            .collect::<Result<_>>()?;
        Ok(Self { steps })
    }

    pub fn step(&self, k: usize) -> &UnitaryOperator {
        &self.steps[k]
    }

    /// Time-ordered product `V_{k+m-1} ... V_{k+1} V_k` of single steps
    /// starting at slot `k`; slot indices beyond the grid wrap around.
    pub fn over(&self, k: usize, m: usize) -> UnitaryOperator {
        let n = self.steps.len();
        if m == 0 {
            return UnitaryOperator::identity(self.steps[0].dim()).expect("nonempty");
        }
        let mut acc = self.steps[k % n].matrix().clone();
        for j in 1..m {
            acc = self.steps[(k + j) % n].matrix() * acc;
        }
        UnitaryOperator::new(acc).expect("product of unitaries is unitary")
    }

    /// Apply [`Propagators::over`] to `h` without forming the product.
    pub fn apply(&self, k: usize, m: usize, h: &AuxState) -> AuxState {
        let n = self.steps.len();
        let mut out = h.clone();
        for j in 0..m {
            out = &self.steps[(k + j) % n] * &out;
        }
        out
    }
}

/// `sum_k <phi_k, xi_k> * dt`.
pub fn integral_inner_product(phi: &DirectIntegralState, xi: &DirectIntegralState) -> Result<Complex64> {
    phi.ensure_compatible(xi)?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (a, b) in phi.slots.iter().zip(&xi.slots) {
        sum += inner_product(a, b)?;
    }
    Ok(sum * phi.grid.dt())
}

/// `prod_k <phi_k, xi_k>`, the product-form scalar product of histories.
pub fn history_inner_product(phi: &DirectIntegralState, xi: &DirectIntegralState) -> Result<Complex64> {
    phi.ensure_compatible(xi)?;
    let mut prod = Complex64::new(1.0, 0.0);
    for (a, b) in phi.slots.iter().zip(&xi.slots) {
        prod *= inner_product(a, b)?;
    }
    Ok(prod)
}

/// `U(m * dt) phi`. Each slot is propagated through `m` single steps using
/// the Hamiltonians at the intermediate grid times, then translated
/// according to `boundary`.
pub fn evolve_step(
    phi: &DirectIntegralState,
    gen: &GeneratorSpec,
    m: i64,
    boundary: Boundary,
) -> Result<DirectIntegralState> {
    if m < 0 {
        return Err(Error::NegativeSteps(m));
    }
    gen.ensure_matches(phi)?;
    let m = m as usize;
    if m == 0 {
        return Ok(phi.clone());
    }
    let props = Propagators::new(gen, phi.grid.dt())?;
    evolve_with(phi, &props, m, boundary)
}

pub(crate) fn evolve_with(
    phi: &DirectIntegralState,
    props: &Propagators,
    m: usize,
    boundary: Boundary,
) -> Result<DirectIntegralState> {
    let n = phi.len();
    let evolved: Vec<AuxState> = phi
        .slots
        .iter()
        .enumerate()
        .map(|(k, h)| props.apply(k, m, h))
        .collect();
    let slots = match boundary {
        Boundary::Relabel => evolved,
        Boundary::Cyclic => {
            let mut out = evolved.clone();
            for (k, h) in evolved.into_iter().enumerate() {
                out[(k + m) % n] = h;
            }
            out
        }
    };
    Ok(phi.with_slots(slots))
}

/// Finite-difference time derivative on the cyclic grid.
pub fn time_derivative(phi: &DirectIntegralState, scheme: Stencil) -> Result<DirectIntegralState> {
    let n = phi.len();
    let dt = phi.grid.dt();
    let (needed, name) = match scheme {
        Stencil::Forward => (2, "forward"),
        Stencil::Central => (3, "central"),
    };
    if n < needed {
        return Err(Error::TooFewSlots {
            scheme: name,
            needed,
            found: n,
        });
    }
    let s = &phi.slots;
    let slots = (0..n)
        .map(|k| {
            let next = s[(k + 1) % n].vector();
            let v = match scheme {
                Stencil::Forward => (next - s[k].vector()) / Complex64::new(dt, 0.0),
                Stencil::Central => (next - s[(k + n - 1) % n].vector()) / Complex64::new(2.0 * dt, 0.0),
            };
            AuxState::from_vector(v).expect("nonempty")
        })
        .collect();
    Ok(phi.with_slots(slots))
}

/// `K phi` with `K = H - i d/dt`, the derivative taken by `scheme`.
pub fn apply_generator(phi: &DirectIntegralState, gen: &GeneratorSpec, scheme: Stencil) -> Result<DirectIntegralState> {
    gen.ensure_matches(phi)?;
    let deriv = time_derivative(phi, scheme)?;
    let slots = phi
        .slots
        .iter()
        .zip(&deriv.slots)
        .zip(&gen.hamiltonians)
        .map(|((h, d), ham)| {
            let v = (ham * h).into_vector() - d.vector() * I;
            AuxState::from_vector(v).expect("nonempty")
        })
        .collect();
    Ok(phi.with_slots(slots))
}

/// Residual of the evolution equation `i d/dtau U(tau) phi = U(tau) K phi`
/// at `tau = 0`, using a one-sided difference quotient of width `dtau`:
///
/// `|| i (U(dtau) phi - phi) / dtau - K phi ||`
///
/// in the integral norm. `U` is taken in the relabel identification, where
/// each slot evolves by `exp(-i dtau H_{t_k})` and keeps its index; the
/// translation part of `K` is therefore zero and `K` acts as `H` slotwise.
/// The residual is first order in `dtau`.
pub fn generator_relation_check(phi: &DirectIntegralState, gen: &GeneratorSpec, dtau: f64) -> Result<f64> {
    gen.ensure_matches(phi)?;
    if !(dtau.is_finite() && dtau > 0.0) {
        return Err(Error::InvalidArgument(format!("dtau must be positive, got {dtau}")));
    }
    let mut sum = 0.0;
    for (h, ham) in phi.slots.iter().zip(&gen.hamiltonians) {
        let u = hermitian_exponential(ham, dtau)?;
        let quotient = ((&u * h).into_vector() - h.vector()) * (I / dtau);
        let k_phi = (ham * h).into_vector();
        sum += (quotient - k_phi).norm_squared();
    }
    Ok((sum * phi.grid.dt()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aux_algebra::random_hermitian;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_state(grid: TimeGrid, dim: usize, seed: u64) -> DirectIntegralState {
        DirectIntegralState::from_fn(grid, |k, _| AuxState::random(dim, seed.wrapping_add(k as u64)).unwrap()).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 0.0, 3).is_err());
        assert!(TimeGrid::new(0.0, -1.0, 3).is_err());
        let g = TimeGrid::new(1.0, 2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.5);
        let times: Vec<f64> = g.times().collect();
        assert_eq!(times, vec![1.0, 1.5, 2.0, 2.5]);
    }

    #[test]
    fn state_validation() {
        let g = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let a = AuxState::basis(2, 0).unwrap();
        let b = AuxState::basis(3, 0).unwrap();
        assert!(DirectIntegralState::new(g, vec![a.clone()]).is_err());
        assert!(matches!(
            DirectIntegralState::new(g, vec![a, b]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn integral_inner_product_examples() {
        let g = TimeGrid::new(0.0, 3.0, 6).unwrap();
        let e0 = AuxState::basis(2, 0).unwrap();
        let e1 = AuxState::basis(2, 1).unwrap();
        let phi = DirectIntegralState::constant(g, &e0);
        let ip = integral_inner_product(&phi, &phi).unwrap();
        assert_abs_diff_eq!(ip.re, 3.0, epsilon = 1e-14);
        let xi = DirectIntegralState::constant(g, &e1);
        assert_eq!(integral_inner_product(&phi, &xi).unwrap(), c(0.0, 0.0));

        // Slot overlaps 1 and i with dt = 0.5.
        let g2 = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let phi = DirectIntegralState::constant(g2, &e0);
        let xi = DirectIntegralState::new(g2, vec![e0.clone(), e0.scaled(c(0.0, 1.0))]).unwrap();
        let ip = integral_inner_product(&phi, &xi).unwrap();
        assert_abs_diff_eq!(ip.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 0.5, epsilon = 1e-15);

        let other = DirectIntegralState::constant(TimeGrid::new(0.0, 1.0, 3).unwrap(), &e0);
        assert!(matches!(
            integral_inner_product(&phi, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn history_inner_product_examples() {
        let g = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let e0 = AuxState::basis(2, 0).unwrap();
        let phi = DirectIntegralState::constant(g, &e0);
        assert_eq!(history_inner_product(&phi, &phi).unwrap(), c(1.0, 0.0));

        let mut slots = vec![e0.clone(); 3];
        slots[1] = AuxState::basis(2, 1).unwrap();
        let xi = DirectIntegralState::new(g, slots).unwrap();
        assert_eq!(history_inner_product(&phi, &xi).unwrap(), c(0.0, 0.0));

        let half = e0.scaled(c(0.5, 0.0));
        let xi = DirectIntegralState::constant(g, &half);
        let ip = history_inner_product(&phi, &xi).unwrap();
        assert_abs_diff_eq!(ip.re, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(ip.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_generator_cyclic_step_is_shift() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let phi = random_state(g, 2, 10);
        let gen = GeneratorSpec::zero(2, 4).unwrap();
        let out = evolve_step(&phi, &gen, 1, Boundary::Cyclic).unwrap();
        for k in 0..4 {
            assert_eq!(out.slot((k + 1) % 4), phi.slot(k));
        }
        assert_eq!(evolve_step(&phi, &gen, 0, Boundary::Cyclic).unwrap(), phi);
        assert_eq!(
            evolve_step(&phi, &gen, -1, Boundary::Cyclic),
            Err(Error::NegativeSteps(-1))
        );
    }

    #[test]
    fn relabel_step_with_pauli_z_is_diagonal_phase() {
        let g = TimeGrid::new(0.0, 0.6, 3).unwrap();
        let dt = g.dt();
        let phi = random_state(g, 2, 4);
        let gen = GeneratorSpec::constant(&HermitianOperator::pauli_z(), 3).unwrap();
        let out = evolve_step(&phi, &gen, 1, Boundary::Relabel).unwrap();
        for k in 0..3 {
            let v = phi.slot(k).vector();
            let expected = AuxState::new(vec![v[0] * c(0.0, -dt).exp(), v[1] * c(0.0, dt).exp()]).unwrap();
            assert!(out.slot(k).distance(&expected) < 1e-14);
        }
    }

    #[test]
    fn relabel_single_step_matches_slot_exponentials() {
        let g = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let phi = random_state(g, 3, 1);
        let gen = GeneratorSpec::from_fn(&g, |t| random_hermitian(3, 2).unwrap().scaled(1.0 + t)).unwrap();
        let out = evolve_step(&phi, &gen, 1, Boundary::Relabel).unwrap();
        for k in 0..5 {
            let u = hermitian_exponential(gen.slot(k), g.dt()).unwrap();
            assert!(out.slot(k).distance(&(&u * phi.slot(k))) < 1e-14);
        }
    }

    #[test]
    fn generator_on_constant_and_exponential_paths() {
        let g = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let v = AuxState::random(2, 3).unwrap();
        let phi = DirectIntegralState::constant(g, &v);
        let gen0 = GeneratorSpec::zero(2, 8).unwrap();
        for scheme in [Stencil::Forward, Stencil::Central] {
            let k = apply_generator(&phi, &gen0, scheme).unwrap();
            assert!(k.slots().iter().all(|s| s.norm() < 1e-14));
        }

        let one = TimeGrid::new(0.0, 1.0, 1).unwrap();
        assert!(matches!(
            apply_generator(
                &DirectIntegralState::constant(one, &v),
                &GeneratorSpec::zero(2, 1).unwrap(),
                Stencil::Forward
            ),
            Err(Error::TooFewSlots { needed: 2, .. })
        ));
        let two = TimeGrid::new(0.0, 1.0, 2).unwrap();
        assert!(matches!(
            apply_generator(
                &DirectIntegralState::constant(two, &v),
                &GeneratorSpec::zero(2, 2).unwrap(),
                Stencil::Central
            ),
            Err(Error::TooFewSlots { needed: 3, .. })
        ));
    }

    /// `phi_k = exp(-i w t_k) v` with `w T = 2 pi` so the cyclic stencil
    /// sees a smooth periodic function. With `H = 0`, `K phi = -i d/dt phi`
    /// which is `-w phi` analytically; with `H = w I` it cancels.
    #[test]
    fn generator_errors_shrink_with_dt() {
        let w = 2.0 * std::f64::consts::PI;
        let v = AuxState::random(2, 8).unwrap();
        let err = |n: usize, scheme: Stencil, shift: f64| {
            let g = TimeGrid::new(0.0, 1.0, n).unwrap();
            let phi = DirectIntegralState::from_fn(g, |_, t| v.scaled(c(0.0, -w * t).exp())).unwrap();
            let h = HermitianOperator::identity(2).unwrap().scaled(shift);
            let gen = GeneratorSpec::constant(&h, n).unwrap();
            let k = apply_generator(&phi, &gen, scheme).unwrap();
            (0..n)
                .map(|j| {
                    let analytic = phi.slot(j).scaled(c(shift - w, 0.0));
                    k.slot(j).distance(&analytic)
                })
                .fold(0.0, f64::max)
        };
        let fwd = err(64, Stencil::Forward, 0.0) / err(128, Stencil::Forward, 0.0);
        assert!((fwd - 2.0).abs() < 0.1, "forward ratio {fwd}");
        let cen = err(64, Stencil::Central, 0.0) / err(128, Stencil::Central, 0.0);
        assert!((cen - 4.0).abs() < 0.2, "central ratio {cen}");
        assert!(err(256, Stencil::Forward, w) < 0.1);
        let cancel = err(64, Stencil::Forward, w) / err(128, Stencil::Forward, w);
        assert!((cancel - 2.0).abs() < 0.1);
    }

    #[test]
    fn generator_relation_examples() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let phi = DirectIntegralState::constant(g, &AuxState::random(3, 2).unwrap());
        let gen0 = GeneratorSpec::zero(3, 4).unwrap();
        assert!(generator_relation_check(&phi, &gen0, 0.1).unwrap() < 1e-10);

        let h = random_hermitian(3, 4).unwrap();
        let gen = GeneratorSpec::constant(&h, 4).unwrap();
        let phi = random_state(g, 3, 6);
        let mut dtau = 0.05;
        let mut prev = generator_relation_check(&phi, &gen, dtau).unwrap();
        for _ in 0..3 {
            dtau /= 2.0;
            let r = generator_relation_check(&phi, &gen, dtau).unwrap();
            assert!(r <= 0.6 * prev, "{r} vs {prev}");
            prev = r;
        }
        assert!(generator_relation_check(&phi, &gen, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn cyclic_group_law_and_norm(seed in any::<u64>(), m1 in 0i64..7, m2 in 0i64..7, td in any::<bool>()) {
            let g = TimeGrid::new(0.3, 1.7, 5).unwrap();
            let phi = random_state(g, 3, seed);
            let base = random_hermitian(3, seed ^ 0xabcd).unwrap();
            let gen = if td {
                GeneratorSpec::from_fn(&g, |t| base.scaled(t.cos())).unwrap()
            } else {
                GeneratorSpec::constant(&base, 5).unwrap()
            };
            let a = evolve_step(&evolve_step(&phi, &gen, m1, Boundary::Cyclic).unwrap(), &gen, m2, Boundary::Cyclic).unwrap();
            let b = evolve_step(&phi, &gen, m1 + m2, Boundary::Cyclic).unwrap();
            prop_assert!(a.max_slot_distance(&b) < 1e-9);
            let n0 = integral_inner_product(&phi, &phi).unwrap();
            let n1 = integral_inner_product(&b, &b).unwrap();
            prop_assert!((n0 - n1).norm() < 1e-9);
        }

        #[test]
        fn history_self_product_is_product_of_norms(seed in any::<u64>(), scale in 0.2f64..1.5) {
            let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
            let phi = DirectIntegralState::from_fn(g, |k, _| {
                AuxState::random(2, seed.wrapping_add(k as u64)).unwrap().scaled(c(scale * (k as f64 + 1.0), 0.0))
            }).unwrap();
            let ip = history_inner_product(&phi, &phi).unwrap();
            let prod: f64 = phi.slots().iter().map(AuxState::norm_squared).product();
            prop_assert!(ip.im.abs() <= 1e-12 * prod.max(1.0));
            prop_assert!(ip.re >= 0.0);
            prop_assert!((ip.re - prod).abs() <= 1e-12 * prod.max(1.0));
        }
    }
}
