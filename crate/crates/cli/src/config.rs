//! Experiment configuration: a single JSON document.
//!
//! Validation is separate from parsing so that every cross-field violation
//! can be reported at once.

use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use zeno_histories::{AuxState, HermitianOperator, HistoryIndex, ProjectionFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ZenoSweep,
    Consistency,
    Stability,
    EvolveCheck,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ZenoSweep => "zeno-sweep",
            Self::Consistency => "consistency",
            Self::Stability => "stability",
            Self::EvolveCheck => "evolve-check",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub dimension: usize,
    /// Master seed for every random draw that does not name its own.
    #[serde(default)]
    pub seed: u64,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<ProbabilityEntry>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub t_start: f64,
    /// Total span `T`.
    #[serde(rename = "T", alias = "span")]
    pub span: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HamiltonianConfig {
    /// `x X + y Y + z Z + identity I`, dimension 2 only.
    PauliCombo {
        #[serde(default)]
        x: f64,
        #[serde(default)]
        y: f64,
        #[serde(default)]
        z: f64,
        #[serde(default)]
        identity: f64,
    },
    Diagonal {
        entries: Vec<f64>,
    },
    RandomHermitian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

/// A complex number written `[re, im]`.
pub type ComplexPair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Basis {
        index: usize,
    },
    Amplitudes {
        values: Vec<ComplexPair>,
    },
    /// Unit vector with Gaussian direction. With `per_slot`, every slot gets
    /// its own draw from the same stream.
    Random {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        per_slot: bool,
    },
    SchroedingerPath {
        from: Box<StateConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyConfig {
    /// Computational-basis projectors at every slot.
    Basis,
    /// Rank-one projectors onto explicit orthogonal vectors, one list per slot.
    RankOne { slots: Vec<Vec<Vec<ComplexPair>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityEntry {
    /// Zero-based alternative per slot.
    pub history: Vec<usize>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub consistency: f64,
    pub intertwining: f64,
    pub group_law: f64,
    pub branch: f64,
    pub trace: f64,
    /// Branch and history enumeration cap.
    pub cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            consistency: 1e-10,
            intertwining: 1e-10,
            group_law: 1e-9,
            branch: 1e-10,
            trace: 1e-10,
            cap: zeno_histories::histories::DEFAULT_BRANCH_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

/// One validation problem, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config does not match the schema: {0}")]
    Parse(#[from] serde_json::Error),
}

pub fn load(path: &Path) -> Result<ExperimentConfig, LoadError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn complex(pair: &ComplexPair) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

pub(crate) fn vector_from_pairs(values: &[ComplexPair]) -> Option<AuxState> {
    AuxState::new(values.iter().map(complex).collect()).ok()
}

impl ExperimentConfig {
    /// Slot count for single-grid experiments.
    pub fn slot_count(&self) -> Option<usize> {
        self.grid.n
    }

    pub fn hamiltonian_seed(&self) -> u64 {
        match &self.hamiltonian {
            Some(HamiltonianConfig::RandomHermitian { seed: Some(s) }) => *s,
            _ => self.seed,
        }
    }

    pub fn state_seed(&self) -> u64 {
        fn find(s: &StateConfig) -> Option<u64> {
            match s {
                StateConfig::Random { seed, .. } => *seed,
                StateConfig::SchroedingerPath { from } => find(from),
                _ => None,
            }
        }
        self.state.as_ref().and_then(find).unwrap_or(self.seed)
    }

    /// Every violation, schema-level and cross-field. Empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.to_string(),
                message,
            })
        };
        let d = self.dimension;
        if d == 0 {
            diag("dimension", "must be at least 1".into());
        }

        let g = &self.grid;
        if !(g.span.is_finite() && g.span > 0.0) {
            diag("grid.T", format!("must be positive and finite, got {}", g.span));
        }
        if !g.t_start.is_finite() {
            diag("grid.t_start", "must be finite".into());
        }
        if let Some(list) = &g.n_list {
            if list.is_empty() {
                diag("n_list", "must not be empty".into());
            } else if list.contains(&0) {
                diag("n_list", "counts must be positive".into());
            } else if list.windows(2).any(|w| w[0] == w[1]) || {
                let mut s = list.clone();
                s.sort_unstable();
                s.dedup();
                s.len() != list.len()
            } {
                diag("n_list", "contains duplicates".into());
            } else if list.windows(2).any(|w| w[0] > w[1]) {
                diag("n_list", "must be strictly increasing".into());
            }
        }
        if let Some(0) = g.n {
            diag("grid.n", "must be at least 1".into());
        }
        match self.experiment {
            Experiment::ZenoSweep => {
                if g.n_list.is_none() {
                    diag("n_list", "zeno-sweep requires grid.n_list".into());
                }
            }
            Experiment::Stability => match (g.n, &g.n_list) {
                (None, None) => diag("grid.n", "stability requires grid.n or grid.n_list".into()),
                (Some(n), _) if n < 2 => diag("grid.n", "stability needs at least 2 slots".into()),
                (_, Some(list)) if list.iter().any(|&n| n < 2) => {
                    diag("n_list", "stability needs at least 2 slots per grid".into())
                }
                _ => {}
            },
            Experiment::Consistency | Experiment::EvolveCheck => {
                if g.n.is_none() {
                    diag("grid.n", format!("{} requires grid.n", self.experiment));
                }
            }
        }

        let needs_dynamics = self.experiment != Experiment::Consistency;
        match &self.hamiltonian {
            None if needs_dynamics => diag("hamiltonian", format!("required for {}", self.experiment)),
            None => {}
            Some(HamiltonianConfig::PauliCombo { x, y, z, identity }) => {
                if d != 2 {
                    diag("hamiltonian", format!("pauli-combo kind needs dimension 2, got {d}"));
                }
                if ![x, y, z, identity].iter().all(|c| c.is_finite()) {
                    diag("hamiltonian", "coefficients must be finite".into());
                }
            }
            Some(HamiltonianConfig::Diagonal { entries }) => {
                if entries.len() != d {
                    diag(
                        "hamiltonian.entries",
                        format!("has {} entries, dimension is {d}", entries.len()),
                    );
                }
                if !entries.iter().all(|c| c.is_finite()) {
                    diag("hamiltonian.entries", "entries must be finite".into());
                }
            }
            Some(HamiltonianConfig::RandomHermitian { .. }) => {}
        }

        match &self.state {
            None if needs_dynamics => diag("state", format!("required for {}", self.experiment)),
            None => {}
            Some(s) => validate_state(s, d, "state", &mut diag),
        }

        let family = match &self.family {
            None => {
                if self.experiment == Experiment::Consistency {
                    diag("family", "required for consistency".into());
                }
                None
            }
            Some(f) => self.family_checked(f, &mut diag),
        };

        match &self.probabilities {
            None => {
                if self.experiment == Experiment::Consistency {
                    diag("probabilities", "required for consistency".into());
                }
            }
            Some(entries) => {
                let total: f64 = entries.iter().map(|e| e.p).sum();
                if entries.is_empty() {
                    diag("probabilities", "must not be empty".into());
                } else if (total - 1.0).abs() > 1e-12 {
                    diag("probabilities", format!("sum to {total}, expected 1 within 1e-12"));
                }
                if entries.iter().any(|e| !(0.0..=1.0).contains(&e.p)) {
                    diag("probabilities", "every p must lie in [0, 1]".into());
                }
                let mut seen: Vec<&Vec<usize>> = entries.iter().map(|e| &e.history).collect();
                seen.sort();
                if seen.windows(2).any(|w| w[0] == w[1]) {
                    diag("probabilities", "histories must be distinct".into());
                }
                if let Some(n) = g.n {
                    for (i, e) in entries.iter().enumerate() {
                        if e.history.len() != n {
                            diag(
                                &format!("probabilities[{i}].history"),
                                format!("has {} entries, grid has {n} slots", e.history.len()),
                            );
                        } else if let Some(fam) = &family {
                            if fam.check_index(&HistoryIndex::new(e.history.clone())).is_err() {
                                diag(
                                    &format!("probabilities[{i}].history"),
                                    "alternative out of range for the family".into(),
                                );
                            }
                        }
                    }
                }
            }
        }

        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.consistency", t.consistency),
            ("tolerances.intertwining", t.intertwining),
            ("tolerances.group_law", t.group_law),
            ("tolerances.branch", t.branch),
            ("tolerances.trace", t.trace),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                diag(name, format!("must be a non-negative number, got {v}"));
            }
        }
        if t.cap == 0 {
            diag("tolerances.cap", "must be at least 1".into());
        }
        out
    }

    fn family_checked(&self, f: &FamilyConfig, diag: &mut impl FnMut(&str, String)) -> Option<ProjectionFamily> {
        let n = self.grid.n?;
        let d = self.dimension;
        if d == 0 || n == 0 {
            return None;
        }
        match f {
            FamilyConfig::Basis => ProjectionFamily::computational_basis(d, n).ok(),
            FamilyConfig::RankOne { slots } => {
                if slots.len() != n {
                    diag("family.slots", format!("has {} slots, grid has {n}", slots.len()));
                    return None;
                }
                let mut bases = Vec::with_capacity(n);
                for (k, vectors) in slots.iter().enumerate() {
                    let mut basis = Vec::new();
                    for (j, v) in vectors.iter().enumerate() {
                        if v.len() != d {
                            diag(
                                &format!("family.slots[{k}][{j}]"),
                                format!("has {} components, dimension is {d}", v.len()),
                            );
                            return None;
                        }
                        basis.push(vector_from_pairs(v)?);
                    }
                    bases.push(basis);
                }
                match ProjectionFamily::from_bases(&bases) {
                    Ok(fam) => Some(fam),
                    Err(e) => {
                        diag("family.slots", e.to_string());
                        None
                    }
                }
            }
        }
    }

    /// The projection family, if configured and valid.
    pub fn build_family(&self) -> Option<ProjectionFamily> {
        self.family
            .as_ref()
            .and_then(|f| self.family_checked(f, &mut |_, _| {}))
    }

    pub fn build_hamiltonian(&self) -> Option<HermitianOperator> {
        match self.hamiltonian.as_ref()? {
            HamiltonianConfig::PauliCombo { x, y, z, identity } => {
                Some(HermitianOperator::pauli_combo(*x, *y, *z, *identity))
            }
            HamiltonianConfig::Diagonal { entries } => HermitianOperator::diagonal(entries).ok(),
            HamiltonianConfig::RandomHermitian { .. } => {
                zeno_histories::random_hermitian(self.dimension, self.hamiltonian_seed()).ok()
            }
        }
    }
}

fn validate_state(s: &StateConfig, d: usize, field: &str, diag: &mut impl FnMut(&str, String)) {
    match s {
        StateConfig::Basis { index } => {
            if *index >= d {
                diag(
                    &format!("{field}.index"),
                    format!("{index} out of range for dimension {d}"),
                );
            }
        }
        StateConfig::Amplitudes { values } => {
            if values.len() != d {
                diag(
                    &format!("{field}.values"),
                    format!("has {} entries, dimension is {d}", values.len()),
                );
            } else if values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0) {
                diag(&format!("{field}.values"), "state has zero norm".into());
            }
            if !values.iter().flatten().all(|x| x.is_finite()) {
                diag(&format!("{field}.values"), "entries must be finite".into());
            }
        }
        StateConfig::Random { .. } => {}
        StateConfig::SchroedingerPath { from } => {
            if matches!(**from, StateConfig::SchroedingerPath { .. }) {
                diag(
                    &format!("{field}.from"),
                    "must be a single vector, not another path".into(),
                );
            } else if matches!(**from, StateConfig::Random { per_slot: true, .. }) {
                diag(
                    &format!("{field}.from"),
                    "per_slot random draws cannot seed a path".into(),
                );
            } else {
                validate_state(from, d, &format!("{field}.from"), diag);
            }
        }
    }
}
