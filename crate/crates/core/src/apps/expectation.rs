use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hermitian::HermitianMatrix;
use super::{default_delta0, IndexSetResult};
use crate::dist;
use crate::error::{Error, Result};
use crate::grid::ValueGrid;
use crate::kmin::find_approx_strong_min;
use crate::oracle::{smallest_reps, validate_oracle, ApproxOracle, Row};
use crate::verify::is_strong_set;

const SPECTRAL_TOLERANCE: f64 = 1e-10;

/// `tr(observable * rho)` for a density matrix `rho` and a PSD observable of
/// norm at most 1.
pub fn expectation_value(observable: &HermitianMatrix, rho: &HermitianMatrix) -> Result<f64> {
    if (rho.trace() - 1.0).abs() > SPECTRAL_TOLERANCE {
        return Err(Error::Domain(format!("state has trace {}", rho.trace())));
    }
    if !rho.is_psd(SPECTRAL_TOLERANCE) {
        return Err(Error::Domain("state is not positive semidefinite".into()));
    }
    if !observable.is_psd(SPECTRAL_TOLERANCE) {
        return Err(Error::Domain("observable is not positive semidefinite".into()));
    }
    let norm = observable.operator_norm();
    if norm > 1.0 + SPECTRAL_TOLERANCE {
        return Err(Error::Domain(format!("observable norm {norm} exceeds 1")));
    }
    let c = observable.trace_product(rho)?;
    if c.im.abs() > SPECTRAL_TOLERANCE {
        return Err(Error::Domain(format!("expectation has imaginary part {}", c.im)));
    }
    Ok(c.re.clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectationPair {
    pub rho: HermitianMatrix,
    pub observable: HermitianMatrix,
}

/// `n` state/observable pairs with `v_i = tr(O_i rho_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExpectationFile", into = "ExpectationFile")]
pub struct ExpectationInstance {
    pairs: Vec<ExpectationPair>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExpectationFile {
    pairs: Vec<ExpectationPair>,
}

impl TryFrom<ExpectationFile> for ExpectationInstance {
    type Error = Error;

    fn try_from(file: ExpectationFile) -> Result<Self> {
        Self::new(file.pairs)
    }
}

impl From<ExpectationInstance> for ExpectationFile {
    fn from(instance: ExpectationInstance) -> Self {
        Self {
            pairs: instance.pairs,
        }
    }
}

impl ExpectationInstance {
    pub fn new(pairs: Vec<ExpectationPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Argument("instance needs at least one pair".into()));
        }
        let values = pairs
            .iter()
            .map(|p| expectation_value(&p.observable, &p.rho))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { pairs, values })
    }

    /// Pairs `(|i><i|, diag(v))` on a `v.len()`-dimensional space, whose
    /// expectations are exactly `v`.
    pub fn diagonal(v: &[f64]) -> Result<Self> {
        let observable = HermitianMatrix::diagonal(v)?;
        let pairs = (0..v.len())
            .map(|i| {
                Ok(ExpectationPair {
                    rho: HermitianMatrix::basis_projector(v.len(), i)?,
                    observable: observable.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[ExpectationPair] {
        &self.pairs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Power-of-two estimation size whose one-bin error `pi / size` is at most `eps`.
pub fn expectation_kernel_size(eps: f64) -> u64 {
    ((PI / eps).ceil() as u64).next_power_of_two().max(2)
}

/// Single-run estimate distribution for `c`: phase estimation of
/// `arcsin(c) / pi` with each outcome `y` read out as `sin(pi y / size)`.
fn kernel_row(c: f64, size: u64, grid: ValueGrid) -> Result<Row> {
    let omega = c.asin() / PI;
    let atoms = dist::phase_estimation_outcomes(size, omega)
        .into_iter()
        .enumerate()
        .map(|(y, w)| Ok((grid.round((PI * y as f64 / size as f64).sin())?, w)))
        .collect::<Result<Vec<_>>>()?;
    Row::new(atoms)
}

/// Oracle whose row `i` is the median of `r` simulated square-root amplitude
/// estimations of `c_i`, with `r` the smallest odd count reaching `delta`.
/// One call costs `r (size - 1)` queries to the state preparation and
/// observable.
pub fn build_expectation_oracle(
    instance: &ExpectationInstance,
    eps: f64,
    delta: f64,
) -> Result<ApproxOracle> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::Argument(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(delta > 0.0 && delta < 1.0 / 3.0) {
        return Err(Error::Argument(format!("delta = {delta} outside (0, 1/3)")));
    }
    let size = expectation_kernel_size(eps);
    let grid = ValueGrid::for_precision(eps)?;
    let values = instance.values();
    let single = values
        .iter()
        .map(|&c| kernel_row(c, size, grid))
        .collect::<Result<Vec<_>>>()?;
    let reps = smallest_reps(&single, values, eps, grid, delta)?;
    let rows = single.iter().map(|row| row.median(reps)).collect();
    let oracle = ApproxOracle::from_rows(grid, rows, eps, delta)?;
    let report = validate_oracle(&oracle, values, eps, delta)?;
    if !report.valid {
        return Err(Error::InvalidOracle {
            min_mass: report.min_mass,
            required: 1.0 - delta,
        });
    }
    Ok(oracle.with_base_cost(reps as u64 * (size - 1)))
}

/// Strong `(k, eps)`-approximate minimum index set of the expectations:
/// the strong finder at precision `eps / 7` and failure `delta / 2` on an
/// expectation oracle with per-call failure `delta0`.
pub fn find_k_min_expectations<R: Rng + ?Sized>(
    instance: &ExpectationInstance,
    k: usize,
    eps: f64,
    delta: f64,
    delta0: Option<f64>,
    rng: &mut R,
) -> Result<IndexSetResult> {
    let n = instance.n();
    let delta0 = delta0.unwrap_or_else(|| default_delta0(delta, n, k));
    let oracle = build_expectation_oracle(instance, eps / 7.0, delta0)?;
    let mut ledger = oracle.new_ledger();
    let transcript =
        find_approx_strong_min(&oracle, k, oracle.claimed_eps(), delta / 2.0, rng, &mut ledger)?;
    let tolerance = eps + oracle.grid().step();
    let success = is_strong_set(instance.values(), &transcript.set, tolerance)?;
    Ok(IndexSetResult::new(&oracle, transcript, ledger, success, tolerance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::hermitian::tests::random_hermitian;
    use crate::rng;
    use num_complex::Complex64;
    use std::collections::BTreeSet;

    const EXAMPLE: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

    /// Random PSD matrix with spectrum in `[0, 1]` and trace 1 if `density`.
    fn random_psd<R: Rng>(rng: &mut R, dim: usize, density: bool) -> HermitianMatrix {
        let e = random_hermitian(rng, dim).eigen();
        let mut spectrum: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
        if density {
            let total: f64 = spectrum.iter().sum();
            spectrum.iter_mut().for_each(|x| *x /= total);
        }
        let data = (0..dim * dim)
            .map(|idx| {
                let (i, j) = (idx / dim, idx % dim);
                (0..dim)
                    .map(|k| e.vectors[i * dim + k] * spectrum[k] * e.vectors[j * dim + k].conj())
                    .sum::<Complex64>()
            })
            .collect();
        HermitianMatrix::new(dim, data).unwrap()
    }

    #[test]
    fn trivial_expectations() {
        let o = HermitianMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let zero = HermitianMatrix::basis_projector(2, 0).unwrap();
        assert_eq!(expectation_value(&o, &zero).unwrap(), 1.0);
        let mixed = HermitianMatrix::diagonal(&[0.5, 0.5]).unwrap();
        let obs = random_psd(&mut rng::stream(70, 0), 2, false);
        assert!((expectation_value(&obs, &mixed).unwrap() - obs.trace() / 2.0).abs() < 1e-12);
        let bad = HermitianMatrix::diagonal(&[1.5, 0.0]).unwrap();
        assert!(expectation_value(&bad, &zero).is_err());
        assert!(expectation_value(&o, &o.clone()).is_ok());
        assert!(expectation_value(&o, &HermitianMatrix::diagonal(&[0.7, 0.7]).unwrap()).is_err());
    }

    #[test]
    fn expectation_matches_eigenbasis_sum() {
        let mut r = rng::stream(71, 0);
        for _ in 0..20 {
            let rho = random_psd(&mut r, 4, true);
            let obs = random_psd(&mut r, 4, false);
            // sum_k lambda_k <phi_k| O |phi_k> over the eigenbasis of rho.
            let e = rho.eigen();
            let reference: f64 = (0..4)
                .map(|k| {
                    let phi: Vec<Complex64> = (0..4).map(|i| e.vectors[i * 4 + k]).collect();
                    let o_phi: Complex64 = (0..4)
                        .flat_map(|i| (0..4).map(move |j| (i, j)))
                        .map(|(i, j)| phi[i].conj() * obs.get(i, j) * phi[j])
                        .sum();
                    e.values[k] * o_phi.re
                })
                .sum();
            assert!((expectation_value(&obs, &rho).unwrap() - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn endpoint_rows_are_point_masses() {
        let grid = ValueGrid::for_precision(0.02).unwrap();
        let size = expectation_kernel_size(0.02);
        let zero = kernel_row(0.0, size, grid).unwrap();
        assert_eq!(zero.atoms().collect::<Vec<_>>(), vec![(0, 1.0)]);
        let one = kernel_row(1.0, size, grid).unwrap();
        let atoms: Vec<_> = one.atoms().collect();
        assert_eq!(atoms.len(), 1);
        assert_eq!(grid.value(atoms[0].0), 1.0);
    }

    #[test]
    fn half_expectation_validates() {
        let instance = ExpectationInstance::diagonal(&[0.5]).unwrap();
        let oracle = build_expectation_oracle(&instance, 0.02, 0.05).unwrap();
        let report = validate_oracle(&oracle, &[0.5], 0.02, 0.05).unwrap();
        assert!(report.valid && report.min_mass >= 0.95);
        assert_eq!(oracle.base_cost_per_call() % (expectation_kernel_size(0.02) - 1), 0);
    }

    #[test]
    fn example_vector_instance() {
        let instance = ExpectationInstance::diagonal(&EXAMPLE).unwrap();
        assert_eq!(instance.values(), &EXAMPLE);
        let mut r = rng::stream(72, 0);
        let result = find_k_min_expectations(&instance, 2, 0.05, 0.1, None, &mut r).unwrap();
        assert_eq!(result.set, BTreeSet::from([0, 1]));
        assert!(result.success);
        assert_eq!(result.ledger.total(), result.ledger.calls() * result.base_cost_per_call);
    }

    #[test]
    fn single_pair_always_selected() {
        let instance = ExpectationInstance::diagonal(&[0.3]).unwrap();
        let mut r = rng::stream(73, 0);
        let result = find_k_min_expectations(&instance, 1, 0.05, 0.1, None, &mut r).unwrap();
        assert_eq!(result.set, BTreeSet::from([0]));
    }

    #[test]
    fn json_instance_round_trip() {
        let instance = ExpectationInstance::diagonal(&[0.25, 0.75]).unwrap();
        let text = serde_json::to_string(&instance).unwrap();
        assert!(text.starts_with("{\"pairs\":[{\"rho\":[[[1.0,0.0]"));
        let back: ExpectationInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, instance);
    }
}
