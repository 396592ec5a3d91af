use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hermitian::HermitianMatrix;
use super::{default_delta0, IndexSetResult};
use crate::error::{Error, Result};
use crate::grid::ValueGrid;
use crate::kmin::find_approx_strong_min;
use crate::oracle::{build_fejer_oracle, fejer_eps, fejer_reps_for, ApproxOracle};
use crate::verify::is_strong_set;

/// Eigenvalues of a Hamiltonian with a known eigenbasis.
///
/// With a norm bound `beta` the eigenvalues are encoded as phases
/// `lambda / (2 beta) + 1/2`; without one they must already lie in `[0, 1)`
/// and are used as phases directly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInstance {
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl SpectrumInstance {
    pub fn new(lambda: Vec<f64>, beta: Option<f64>) -> Result<Self> {
        let s = Self { lambda, beta };
        s.check()?;
        Ok(s)
    }

    /// Spectrum of `h` in the order Jacobi leaves it (diagonal order for a
    /// diagonal `h`).
    pub fn from_hamiltonian(h: &HermitianMatrix, beta: Option<f64>) -> Result<Self> {
        Self::new(h.eigenvalues(), beta)
    }

    pub fn check(&self) -> Result<()> {
        if self.lambda.is_empty() {
            return Err(Error::Argument("spectrum is empty".into()));
        }
        match self.beta {
            Some(beta) => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::Domain(format!("beta = {beta} must be positive")));
                }
                // lambda = beta would wrap around to -beta.
                if let Some(x) = self.lambda.iter().find(|x| !(-beta..beta).contains(*x)) {
                    return Err(Error::Domain(format!("eigenvalue {x} outside [-beta, beta)")));
                }
            }
            None => {
                if let Some(x) = self.lambda.iter().find(|x| !(0.0..1.0).contains(*x)) {
                    return Err(Error::Domain(format!(
                        "eigenvalue {x} outside [0, 1); give a norm bound to rescale"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Energy units per phase unit.
    pub fn scale(&self) -> f64 {
        self.beta.map_or(1.0, |b| 2.0 * b)
    }

    pub fn phases(&self) -> Vec<f64> {
        match self.beta {
            Some(beta) => self.lambda.iter().map(|x| x / (2.0 * beta) + 0.5).collect(),
            None => self.lambda.clone(),
        }
    }

    pub fn unscale(&self, phase: f64) -> f64 {
        match self.beta {
            Some(beta) => (phase - 0.5) * 2.0 * beta,
            None => phase,
        }
    }
}

/// Phase-estimation oracle over the spectrum's phases with `t` precision
/// bits and `r` median repetitions, on a grid of `t + 2` bits. Its precision
/// in energy units is `2^(1-t) * scale`.
pub fn build_energy_oracle(spectrum: &SpectrumInstance, precision_bits: u32, reps: u32) -> Result<ApproxOracle> {
    spectrum.check()?;
    let grid = ValueGrid::new(precision_bits + 2)?;
    build_fejer_oracle(&spectrum.phases(), precision_bits, reps, grid)
}

/// Smallest `t >= 2` with `2^(1-t) <= eps`.
pub fn precision_bits_for(eps: f64) -> u32 {
    let mut t = 2;
    while fejer_eps(t) > eps {
        t += 1;
    }
    t
}

/// Strong `(k, eps)`-approximate set of lowest energies: the strong finder
/// at phase precision `eps / (7 scale)` and failure `delta / 2`.
pub fn find_k_ground_energies<R: Rng + ?Sized>(
    spectrum: &SpectrumInstance,
    k: usize,
    eps: f64,
    delta: f64,
    delta0: Option<f64>,
    rng: &mut R,
) -> Result<IndexSetResult> {
    spectrum.check()?;
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(Error::Argument(format!("eps = {eps} outside (0, 1/3)")));
    }
    let n = spectrum.n();
    let delta0 = delta0.unwrap_or_else(|| default_delta0(delta, n, k));
    let scale = spectrum.scale();
    let precision_bits = precision_bits_for(eps / (7.0 * scale));
    let grid = ValueGrid::new(precision_bits + 2)?;
    let reps = fejer_reps_for(&spectrum.phases(), precision_bits, grid, delta0)?;
    let oracle = build_energy_oracle(spectrum, precision_bits, reps)?;
    if oracle.claimed_delta() > delta0 {
        return Err(Error::InvalidOracle {
            min_mass: 1.0 - oracle.claimed_delta(),
            required: 1.0 - delta0,
        });
    }
    let mut ledger = oracle.new_ledger();
    let transcript =
        find_approx_strong_min(&oracle, k, oracle.claimed_eps(), delta / 2.0, rng, &mut ledger)?;
    let tolerance = eps + scale * grid.step();
    let success = is_strong_set(&spectrum.lambda, &transcript.set, tolerance)?;
    Ok(IndexSetResult::new(&oracle, transcript, ledger, success, tolerance))
}
