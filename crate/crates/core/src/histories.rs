//! Histories: per-slot projection families, chains, branches, history
//! density operators and the decoherence functional.
//!
//! History indices are zero-based. A history `alpha = (alpha_0, ..., alpha_{n-1})`
//! selects projector `alpha_k` from the family at slot `k`; its chain acts
//! slotwise on a [`DirectIntegralState`].
//!
//! Traces and decoherence functionals are literal sums over a complete set of
//! product histories. That set is built constructively: at each slot the
//! range of every family projector is split into orthonormal vectors
//! ([`Projector::range_basis`]), and a basis history picks one such vector per
//! slot. Every sum is a brute-force enumeration bounded by a cap.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::aux_algebra::{AuxState, CMatrix, Projector};
use crate::direct_integral::{evolve_step, Boundary, DirectIntegralState, GeneratorSpec, Propagators, TimeGrid};
use crate::error::{Error, Result};

/// Tolerance for the exhaustiveness and exclusivity relations of a family.
pub const FAMILY_TOL: f64 = 1e-10;
/// Default bound on the number of enumerated histories or basis histories.
pub const DEFAULT_BRANCH_CAP: usize = 4096;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn checked_count(sizes: &[usize], cap: usize) -> Result<usize> {
    let mut count: u128 = 1;
    for &s in sizes {
        count = count.saturating_mul(s as u128);
    }
    if count > cap as u128 {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok(count as usize)
}

/// All index tuples with `idx[k] < sizes[k]`, last slot varying fastest.
fn odometer(sizes: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = sizes.iter().product();
    let mut out = Vec::with_capacity(total);
    if total == 0 {
        return out;
    }
    let mut idx = vec![0usize; sizes.len()];
    loop {
        out.push(idx.clone());
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Zero-based choice of one alternative per slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HistoryIndex(Vec<usize>);

impl HistoryIndex {
    pub fn new(alpha: Vec<usize>) -> Self {
        Self(alpha)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<usize>> for HistoryIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// One exhaustive set of mutually exclusive projectors per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionFamily {
    slots: Vec<Vec<Projector>>,
}

impl ProjectionFamily {
    pub fn new(slots: Vec<Vec<Projector>>) -> Result<Self> {
        let d = slots
            .first()
            .and_then(|s| s.first())
            .map(Projector::dim)
            .ok_or_else(|| Error::InvalidArgument("family needs at least one slot and projector".into()))?;
        for (k, family) in slots.iter().enumerate() {
            if family.is_empty() {
                return Err(Error::InvalidFamily {
                    slot: k,
                    reason: "no projectors".into(),
                });
            }
            if let Some(p) = family.iter().find(|p| p.dim() != d) {
                return Err(Error::InvalidFamily {
                    slot: k,
                    reason: format!("projector dimension {} differs from {d}", p.dim()),
                });
            }
            let sum = family.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p.matrix());
            let dev = max_abs(&(sum - CMatrix::identity(d, d)));
            if dev > FAMILY_TOL {
                return Err(Error::InvalidFamily {
                    slot: k,
                    reason: format!("projectors do not sum to identity (deviation {dev:e})"),
                });
            }
            for (a, pa) in family.iter().enumerate() {
                for (b, pb) in family.iter().enumerate().skip(a + 1) {
                    let dev = max_abs(&(pa.matrix() * pb.matrix()));
                    if dev > FAMILY_TOL {
                        return Err(Error::InvalidFamily {
                            slot: k,
                            reason: format!("projectors {a} and {b} are not orthogonal (deviation {dev:e})"),
                        });
                    }
                }
            }
        }
        Ok(Self { slots })
    }

    /// The same slot family repeated on `n` slots.
    pub fn repeated(family: Vec<Projector>, n: usize) -> Result<Self> {
        Self::new(vec![family; n])
    }

    /// Only the identity at every slot: no measurement.
    pub fn trivial(dim: usize, n: usize) -> Result<Self> {
        Self::repeated(vec![Projector::identity(dim)?], n)
    }

    /// Computational-basis projectors `|e_j><e_j|` at every slot.
    pub fn computational_basis(dim: usize, n: usize) -> Result<Self> {
        let family = (0..dim).map(|j| Projector::basis(dim, j)).collect::<Result<_>>()?;
        Self::repeated(family, n)
    }

    /// Rank-one projectors onto the given vectors, one list per slot. The
    /// vectors of each slot must form an orthogonal basis.
    pub fn from_bases(bases: &[Vec<AuxState>]) -> Result<Self> {
        let slots = bases
            .iter()
            .map(|b| b.iter().map(Projector::rank_one).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Self::new(slots)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.slots[0][0].dim()
    }

    pub fn slot(&self, k: usize) -> &[Projector] {
        &self.slots[k]
    }

    /// Number of alternatives per slot.
    pub fn sizes(&self) -> Vec<usize> {
        self.slots.iter().map(Vec::len).collect()
    }

    /// Every projector is rank one.
    pub fn is_fine_grained(&self) -> bool {
        self.slots.iter().flatten().all(|p| p.rank() == 1)
    }

    /// All histories in lexicographic order, rejected above `cap`.
    pub fn histories(&self, cap: usize) -> Result<Vec<HistoryIndex>> {
        checked_count(&self.sizes(), cap)?;
        Ok(odometer(&self.sizes()).into_iter().map(HistoryIndex).collect())
    }

    pub fn check_index(&self, index: &HistoryIndex) -> Result<()> {
        if index.len() != self.len() {
            return Err(Error::InvalidHistory(format!(
                "history has {} entries, family has {} slots",
                index.len(),
                self.len()
            )));
        }
        for (k, (&a, family)) in index.0.iter().zip(&self.slots).enumerate() {
            if a >= family.len() {
                return Err(Error::InvalidHistory(format!(
                    "alternative {a} at slot {k} out of range (slot has {})",
                    family.len()
                )));
            }
        }
        Ok(())
    }

    /// Conjugate every slot projector by its `m`-step propagator,
    /// `P -> V P V^dagger`.
    pub fn evolve(&self, gen: &GeneratorSpec, grid: &TimeGrid, m: i64) -> Result<Self> {
        if m < 0 {
            return Err(Error::NegativeSteps(m));
        }
        if gen.len() != self.len() || grid.len() != self.len() {
            return Err(Error::GridMismatch(format!(
                "family has {} slots, generator {}, grid {}",
                self.len(),
                gen.len(),
                grid.len()
            )));
        }
        if gen.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: gen.dim(),
            });
        }
        let props = Propagators::new(gen, grid.dt())?;
        let slots = self
            .slots
            .iter()
            .enumerate()
            .map(|(k, family)| {
                let v = props.over(k, m as usize);
                family.iter().map(|p| p.conjugated(&v)).collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { slots })
    }

    /// Per slot: orthonormal vectors refining the family, each tagged with
    /// the alternative whose range it spans.
    fn refined_basis(&self) -> Vec<Vec<(usize, AuxState)>> {
        self.slots
            .iter()
            .map(|family| {
                family
                    .iter()
                    .enumerate()
                    .flat_map(|(a, p)| p.range_basis().into_iter().map(move |v| (a, v)))
                    .collect()
            })
            .collect()
    }
}

/// The time-ordered chain of projectors selected by one history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryChain {
    family: ProjectionFamily,
    index: HistoryIndex,
}

impl HistoryChain {
    pub fn new(family: ProjectionFamily, index: HistoryIndex) -> Result<Self> {
        family.check_index(&index)?;
        Ok(Self { family, index })
    }

    pub fn family(&self) -> &ProjectionFamily {
        &self.family
    }

    pub fn index(&self) -> &HistoryIndex {
        &self.index
    }

    pub fn projector(&self, k: usize) -> &Projector {
        &self.family.slots[k][self.index.0[k]]
    }

    pub fn projectors(&self) -> impl Iterator<Item = &Projector> + '_ {
        (0..self.family.len()).map(|k| self.projector(k))
    }
}

/// `C_alpha phi`: slot `k` becomes `P_{alpha_k} phi_k`.
pub fn apply_chain(chain: &HistoryChain, phi: &DirectIntegralState) -> Result<DirectIntegralState> {
    if chain.family.len() != phi.len() {
        return Err(Error::GridMismatch(format!(
            "chain has {} slots, state has {}",
            chain.family.len(),
            phi.len()
        )));
    }
    if chain.family.dim() != phi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim(),
            found: chain.family.dim(),
        });
    }
    let slots = chain.projectors().zip(phi.slots()).map(|(p, h)| p * h).collect();
    DirectIntegralState::new(*phi.grid(), slots)
}

/// The chain carried along by `m` evolution steps: each slot projector is
/// conjugated by its slot propagator.
pub fn evolve_chain(chain: &HistoryChain, gen: &GeneratorSpec, grid: &TimeGrid, m: i64) -> Result<HistoryChain> {
    Ok(HistoryChain {
        family: chain.family.evolve(gen, grid, m)?,
        index: chain.index.clone(),
    })
}

/// Largest slot distance between `U(tau) C_alpha phi` and
/// `C_alpha(tau) U(tau) phi` in the relabel identification, `tau = m dt`.
pub fn intertwining_check(chain: &HistoryChain, phi: &DirectIntegralState, gen: &GeneratorSpec, m: i64) -> Result<f64> {
    let lhs = evolve_step(&apply_chain(chain, phi)?, gen, m, Boundary::Relabel)?;
    let moved = evolve_chain(chain, gen, phi.grid(), m)?;
    let rhs = apply_chain(&moved, &evolve_step(phi, gen, m, Boundary::Relabel)?)?;
    Ok(lhs.max_slot_distance(&rhs))
}

/// All branches `C_alpha phi` of a state.
#[derive(Debug, Clone)]
pub struct BranchResolution {
    pub branches: Vec<(HistoryIndex, DirectIntegralState)>,
    /// `|| sum_alpha C_alpha phi - phi ||` with each history read as the
    /// product vector `phi_0 (x) phi_1 (x) ...`, the space on which the
    /// product-form scalar product is an inner product.
    pub residual: f64,
}

/// `phi_0 (x) phi_1 (x) ... (x) phi_{n-1}`, slot 0 most significant.
pub fn product_vector(phi: &DirectIntegralState) -> nalgebra::DVector<Complex64> {
    let mut acc = nalgebra::DVector::from_element(1, Complex64::new(1.0, 0.0));
    for s in phi.slots() {
        acc = acc.kronecker(s.vector());
    }
    acc
}

pub fn branch_resolution(family: &ProjectionFamily, phi: &DirectIntegralState, cap: usize) -> Result<BranchResolution> {
    let histories = family.histories(cap)?;
    checked_count(&vec![phi.dim(); phi.len()], cap)?;
    let branches = histories
        .into_iter()
        .map(|alpha| {
            let chain = HistoryChain::new(family.clone(), alpha.clone())?;
            Ok((alpha, apply_chain(&chain, phi)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = product_vector(phi) * Complex64::new(-1.0, 0.0);
    for (_, b) in &branches {
        sum += product_vector(b);
    }
    Ok(BranchResolution {
        branches,
        residual: sum.norm(),
    })
}

/// `rho = sum_alpha p_alpha prod_k P^k_{alpha_k}` over distinct histories of
/// one family.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryDensity {
    family: ProjectionFamily,
    entries: Vec<(f64, HistoryIndex)>,
}

impl HistoryDensity {
    pub fn new(family: ProjectionFamily, entries: Vec<(f64, HistoryIndex)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDensity("no histories".into()));
        }
        let mut total = 0.0;
        for (p, alpha) in &entries {
            if !(0.0..=1.0).contains(p) {
                return Err(Error::InvalidDensity(format!("probability {p} outside [0, 1]")));
            }
            family.check_index(alpha)?;
            total += p;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("probabilities sum to {total}, not 1")));
        }
        let mut seen: Vec<&HistoryIndex> = entries.iter().map(|(_, a)| a).collect();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDensity("repeated history".into()));
        }
        Ok(Self { family, entries })
    }

    pub fn family(&self) -> &ProjectionFamily {
        &self.family
    }

    pub fn entries(&self) -> &[(f64, HistoryIndex)] {
        &self.entries
    }

    /// Probability assigned to `alpha` (zero if absent).
    pub fn probability(&self, alpha: &HistoryIndex) -> f64 {
        self.entries.iter().find(|(_, a)| a == alpha).map_or(0.0, |(p, _)| *p)
    }
}

/// Brute-force evaluator for sums over the product basis of histories.
///
/// `probe` supplies the projectors of the histories `alpha`, `alpha'` being
/// tested; by default it is the density's own family. The basis histories
/// always refine the density's family.
pub struct HistoryEvaluator<'a> {
    rho: &'a HistoryDensity,
    probe: &'a ProjectionFamily,
    basis: Vec<Vec<(usize, AuxState)>>,
    basis_count: usize,
    cap: usize,
}

impl<'a> HistoryEvaluator<'a> {
    pub fn new(rho: &'a HistoryDensity, cap: usize) -> Result<Self> {
        Self::with_probe(rho, &rho.family, cap)
    }

    pub fn with_probe(rho: &'a HistoryDensity, probe: &'a ProjectionFamily, cap: usize) -> Result<Self> {
        if probe.len() != rho.family.len() {
            return Err(Error::GridMismatch(format!(
                "probe family has {} slots, density has {}",
                probe.len(),
                rho.family.len()
            )));
        }
        if probe.dim() != rho.family.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho.family.dim(),
                found: probe.dim(),
            });
        }
        let basis = rho.family.refined_basis();
        let sizes: Vec<usize> = basis.iter().map(Vec::len).collect();
        let basis_count = checked_count(&sizes, cap)?;
        Ok(Self {
            rho,
            probe,
            basis,
            basis_count,
            cap,
        })
    }

    /// Number of basis histories summed over.
    pub fn basis_count(&self) -> usize {
        self.basis_count
    }

    fn basis_histories(&self) -> Vec<Vec<usize>> {
        let sizes: Vec<usize> = self.basis.iter().map(Vec::len).collect();
        odometer(&sizes)
    }

    /// `<b, M b>` for basis vector `beta` at slot `k`.
    fn slot_expectation(&self, k: usize, beta: usize, m: &CMatrix) -> Complex64 {
        let b = self.basis[k][beta].1.vector();
        b.dotc(&(m * b))
    }

    /// `sum_beta (phi^beta, rho phi^beta)` with the product-form scalar
    /// product. Equals `sum_alpha p_alpha` when every selected projector has
    /// rank one; a rank-`r` projector contributes a factor `r`.
    pub fn trace(&self) -> f64 {
        let mut total = Complex64::new(0.0, 0.0);
        for beta in self.basis_histories() {
            for (p, alpha) in &self.rho.entries {
                let mut prod = Complex64::new(*p, 0.0);
                for (k, (&b, &a)) in beta.iter().zip(&alpha.0).enumerate() {
                    prod *= self.slot_expectation(k, b, self.rho.family.slots[k][a].matrix());
                }
                total += prod;
            }
        }
        total.re
    }

    /// `d(alpha, alpha') = sum_beta sum_{alpha''} p_{alpha''}
    /// prod_i <phi^{beta_i}, P_{alpha_i} P_{alpha''_i} P_{alpha'_i} phi^{beta_i}>`.
    pub fn decoherence(&self, alpha: &HistoryIndex, alpha_prime: &HistoryIndex) -> Result<Complex64> {
        self.probe.check_index(alpha)?;
        self.probe.check_index(alpha_prime)?;
        let n = self.rho.family.len();
        // Slot operators P_{alpha_i} P_{alpha''_i} P_{alpha'_i} per density entry.
        let ops: Vec<Vec<CMatrix>> = self
            .rho
            .entries
            .iter()
            .map(|(_, mid)| {
                (0..n)
                    .map(|k| {
                        self.probe.slots[k][alpha.0[k]].matrix()
                            * self.rho.family.slots[k][mid.0[k]].matrix()
                            * self.probe.slots[k][alpha_prime.0[k]].matrix()
                    })
                    .collect()
            })
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for beta in self.basis_histories() {
            for ((p, _), slot_ops) in self.rho.entries.iter().zip(&ops) {
                let mut prod = Complex64::new(*p, 0.0);
                for k in 0..n {
                    prod *= self.slot_expectation(k, beta[k], &slot_ops[k]);
                }
                total += prod;
            }
        }
        Ok(total)
    }

    /// Decoherence functional for every pair of probe histories, rows and
    /// columns in lexicographic history order.
    pub fn decoherence_matrix(&self) -> Result<(Vec<HistoryIndex>, Vec<Vec<Complex64>>)> {
        let histories = self.probe.histories(self.cap)?;
        let rows = histories
            .par_iter()
            .map(|a| {
                histories
                    .iter()
                    .map(|b| self.decoherence(a, b))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((histories, rows))
    }

    pub fn consistency(&self, tol: f64) -> Result<ConsistencyReport> {
        let (histories, matrix) = self.decoherence_matrix()?;
        let mut worst = 0.0;
        let mut worst_pair = None;
        for (i, row) in matrix.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if i != j && d.norm() > worst {
                    worst = d.norm();
                    worst_pair = Some((histories[i].clone(), histories[j].clone()));
                }
            }
        }
        Ok(ConsistencyReport {
            consistent: worst <= tol,
            worst_off_diagonal: worst,
            worst_pair,
        })
    }

    /// `sum_alpha p_alpha prod_i <phi^{alpha_i}, A_i phi^{alpha_i}>`, where
    /// `phi^{alpha_i}` is the unit vector selected by the rank-one projector
    /// `P_{alpha_i}`. Histories of higher rank are rejected.
    pub fn expectation(&self, observable: &HistoryObservable) -> Result<Complex64> {
        let family = &self.rho.family;
        if observable.len() != family.len() {
            return Err(Error::GridMismatch(format!(
                "observable has {} slots, family has {}",
                observable.len(),
                family.len()
            )));
        }
        if observable.dim() != family.dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: observable.dim(),
            });
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (p, alpha) in &self.rho.entries {
            let mut prod = Complex64::new(*p, 0.0);
            for (k, &a) in alpha.0.iter().enumerate() {
                let proj = &family.slots[k][a];
                if proj.rank() != 1 {
                    return Err(Error::CoarseGrained {
                        index: alpha.0.clone(),
                        slot: k,
                        rank: proj.rank(),
                    });
                }
                let v = proj.range_basis().remove(0);
                prod *= v.vector().dotc(&(&observable.ops[k] * v.vector()));
            }
            total += prod;
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub consistent: bool,
    pub worst_off_diagonal: f64,
    pub worst_pair: Option<(HistoryIndex, HistoryIndex)>,
}

/// Slotwise operators `A_k` acting on the space of histories.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryObservable {
    ops: Vec<CMatrix>,
}

impl HistoryObservable {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| Error::InvalidArgument("observable needs at least one slot".into()))?;
        let d = first.nrows();
        for m in &ops {
            if m.nrows() != m.ncols() {
                return Err(Error::NotSquare {
                    rows: m.nrows(),
                    cols: m.ncols(),
                });
            }
            if m.nrows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
        }
        Ok(Self { ops })
    }

    pub fn constant(op: CMatrix, n: usize) -> Result<Self> {
        Self::new(vec![op; n])
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }
}

pub fn history_trace(rho: &HistoryDensity) -> Result<f64> {
    Ok(HistoryEvaluator::new(rho, DEFAULT_BRANCH_CAP)?.trace())
}

pub fn decoherence_functional(
    rho: &HistoryDensity,
    alpha: &HistoryIndex,
    alpha_prime: &HistoryIndex,
) -> Result<Complex64> {
    HistoryEvaluator::new(rho, DEFAULT_BRANCH_CAP)?.decoherence(alpha, alpha_prime)
}

/// Consistent iff `max_{alpha != alpha'} |d(alpha, alpha')| <= tol`.
pub fn consistency_check(rho: &HistoryDensity, tol: f64) -> Result<ConsistencyReport> {
    HistoryEvaluator::new(rho, DEFAULT_BRANCH_CAP)?.consistency(tol)
}

pub fn history_expectation(rho: &HistoryDensity, observable: &HistoryObservable) -> Result<Complex64> {
    HistoryEvaluator::new(rho, DEFAULT_BRANCH_CAP)?.expectation(observable)
}
