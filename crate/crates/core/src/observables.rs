//! Fidelity, average fidelity susceptibility and block entanglement entropy
//! of ground states from either backend.

use crate::dmrg::GroundStateResult;
use crate::exact::{exact_entropy, exact_overlap, DenseState, ExactGroundState};
use crate::model::ModelParams;
use crate::mps::{overlap, MatrixProductState};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub enum Representation {
    Exact(DenseState),
    Mps(MatrixProductState),
}

/// A ground state tagged with the Hamiltonian it belongs to.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub params: ModelParams,
    pub energy: f64,
    pub repr: Representation,
    pub converged: bool,
    /// Zero for exact states.
    pub max_discarded_weight: f64,
}

impl GroundState {
    pub fn from_exact(params: ModelParams, gs: ExactGroundState) -> Self {
        Self {
            params,
            energy: gs.energy,
            converged: gs.converged,
            repr: Representation::Exact(gs.state),
            max_discarded_weight: 0.0,
        }
    }

    pub fn from_dmrg(params: ModelParams, gs: GroundStateResult) -> Self {
        Self {
            params,
            energy: gs.energy,
            converged: gs.converged,
            max_discarded_weight: gs.max_discarded_weight,
            repr: Representation::Mps(gs.state),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.params.n_sites
    }

    pub fn mps(&self) -> Option<&MatrixProductState> {
        match &self.repr {
            Representation::Mps(m) => Some(m),
            Representation::Exact(_) => None,
        }
    }

    pub fn dense(&self) -> Option<&DenseState> {
        match &self.repr {
            Representation::Exact(d) => Some(d),
            Representation::Mps(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityPoint {
    /// The driving parameter `delta_f`.
    pub lambda: f64,
    pub delta: f64,
    pub fidelity_value: f64,
    pub susceptibility: f64,
    pub n_sites: usize,
}

impl FidelityPoint {
    pub fn new(lambda: f64, delta: f64, fidelity_value: f64, n_sites: usize) -> Result<Self> {
        Ok(Self {
            lambda,
            delta,
            fidelity_value,
            susceptibility: fidelity_susceptibility(fidelity_value, n_sites, delta)?,
            n_sites,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyPoint {
    pub lambda: f64,
    pub l_sites: usize,
    pub entropy_bits: f64,
    pub n_sites: usize,
}

/// `|⟨a|b⟩|`. Both states must come from the same backend; there is no
/// implicit densification of MPS states.
pub fn fidelity(a: &GroundState, b: &GroundState) -> Result<f64> {
    if a.n_sites() != b.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: a.n_sites(),
            found: b.n_sites(),
        });
    }
    match (&a.repr, &b.repr) {
        (Representation::Exact(x), Representation::Exact(y)) => exact_overlap(x, y),
        (Representation::Mps(x), Representation::Mps(y)) => overlap(x, y),
        _ => Err(Error::RepresentationMismatch),
    }
}

/// `2 (1 − F) / (N δ²)`
pub fn fidelity_susceptibility(f: f64, n_sites: usize, delta: f64) -> Result<f64> {
    if delta == 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParams("fidelity step delta must be finite and nonzero".into()));
    }
    if n_sites == 0 {
        return Err(Error::InvalidParams("n_sites must be positive".into()));
    }
    Ok(2.0 * (1.0 - f) / (n_sites as f64 * delta * delta))
}

/// Size of the right-hand block used by default: `N/2 − 1`.
pub fn default_block_length(n_sites: usize) -> usize {
    (n_sites / 2).saturating_sub(1).max(1)
}

/// Entropy (bits) of the right-hand `l_sites` contiguous sites.
pub fn entanglement_entropy(gs: &GroundState, l_sites: usize) -> Result<EntropyPoint> {
    let n = gs.n_sites();
    if l_sites < 1 || l_sites >= n {
        return Err(Error::OutOfRange {
            what: "l_sites",
            value: l_sites as i64,
            min: 1,
            max: n as i64 - 1,
        });
    }
    let entropy_bits = match &gs.repr {
        Representation::Exact(d) => exact_entropy(d, l_sites)?,
        Representation::Mps(m) => m.schmidt_spectrum(n - l_sites)?.entropy_bits(),
    };
    Ok(EntropyPoint {
        lambda: gs.params.delta_f,
        l_sites,
        entropy_bits,
        n_sites: n,
    })
}

/// Entropy of every right-hand block `L = 1 … N−1`.
pub fn entropy_profile(gs: &GroundState) -> Result<Vec<EntropyPoint>> {
    (1..gs.n_sites()).map(|l| entanglement_entropy(gs, l)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dmrg::{run_dmrg, DmrgConfig};
    use crate::exact;

    #[test]
    fn susceptibility_arithmetic() {
        assert_eq!(fidelity_susceptibility(1.0, 78, 0.001).unwrap(), 0.0);
        let s = fidelity_susceptibility(0.99999, 78, 0.001).unwrap();
        assert!((s - 2e-5 / 78e-6).abs() < 1e-9);
        assert!((s - 0.25641).abs() < 1e-5);
        assert!(fidelity_susceptibility(0.5, 10, 0.0).is_err());
        let p = FidelityPoint::new(2.0, 0.001, 0.99999, 78).unwrap();
        assert_eq!(p.susceptibility, 2.0 * (1.0 - 0.99999) / (78.0 * 0.001 * 0.001));
    }

    #[test]
    fn singlet_entropy_both_backends() {
        let p = ModelParams::with_defaults(2, 1.0);
        let ed = GroundState::from_exact(p, exact::ground_state(&p).unwrap());
        let mp = GroundState::from_dmrg(p, run_dmrg(&p, &DmrgConfig::default()).unwrap());
        for gs in [&ed, &mp] {
            let e = entanglement_entropy(gs, 1).unwrap();
            assert!((e.entropy_bits - 1.0).abs() < 1e-12);
            assert!((fidelity(gs, gs).unwrap() - 1.0).abs() < 1e-12);
            assert!(entanglement_entropy(gs, 2).is_err());
        }
        assert!(matches!(fidelity(&ed, &mp), Err(Error::RepresentationMismatch)));
    }

    #[test]
    fn default_block() {
        assert_eq!(default_block_length(20), 9);
        assert_eq!(default_block_length(12), 5);
        assert_eq!(default_block_length(2), 1);
    }
}
