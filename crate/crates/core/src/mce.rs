//! Minimum cross-entropy posterior computation, the probability-based norm
//! every calculus is scored against.
//!
//! Given a prior joint table `P` and asserted new evidence marginals
//! `Q(E1) = p1`, `Q(E2) = p2`, the posterior is the distribution `Q`
//! minimizing the directed divergence `sum Q log(Q/P)` subject to those two
//! constraints. Iterative proportional fitting solves this exactly:
//! alternately rescale the `E1` slices to hit `p1` and the `E2` slices to hit
//! `p2` until the largest marginal mismatch falls below [`IPF_TOLERANCE`].
//!
//! Because every IPF step multiplies whole `(e1, e2)` slices by a scalar, the
//! conditionals `P(C | e1, e2)` and the cross-product ratio of the `(E1, E2)`
//! marginal are carried over to the posterior unchanged.

use thiserror::Error;

use crate::joint::{JointTable, Var, CELL_COUNT};

/// Maximum absolute marginal mismatch accepted as converged.
pub const IPF_TOLERANCE: f64 = 1e-10;

/// Sweep budget before declaring the constraints unsatisfiable.
pub const IPF_MAX_ITER: usize = 100_000;

/// A pair of new-evidence probabilities asserted for `E1` and `E2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceProbe {
    pub p1: f64,
    pub p2: f64,
}

impl EvidenceProbe {
    pub fn new(p1: f64, p2: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&p1) && (0.0..=1.0).contains(&p2));
        EvidenceProbe { p1, p2 }
    }
}

/// Errors from the IPF update.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MceError {
    /// The probe asserts certainty about a state the prior gives no mass.
    #[error("probe asserts {var}={value} with certainty but the prior carries no mass there")]
    InvalidProbe { var: Var, value: bool },
    /// The marginal constraints cannot be met on the prior's support.
    #[error("IPF residual {residual:e} after {iterations} sweeps; constraints incompatible with the prior's support")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Converged IPF posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct MceSolution {
    /// The minimum cross-entropy distribution.
    pub posterior: JointTable,
    /// `posterior`'s C marginal, the norm value for this probe.
    pub posterior_c: f64,
    /// Number of full (E1 then E2) sweeps performed.
    pub iterations: usize,
    /// Largest marginal mismatch at exit.
    pub residual: f64,
}

/// Computes the minimum cross-entropy posterior of `prior` under `probe`.
pub fn mce_update(prior: &JointTable, probe: EvidenceProbe) -> Result<MceSolution, MceError> {
    let mut cells = *prior.cells();

    check_support(&cells, Var::E1, probe.p1)?;
    check_support(&cells, Var::E2, probe.p2)?;

    let mut iterations = 0;
    let mut residual = max_mismatch(&cells, probe);
    while residual >= IPF_TOLERANCE && iterations < IPF_MAX_ITER {
        fit_marginal(&mut cells, Var::E1, probe.p1);
        fit_marginal(&mut cells, Var::E2, probe.p2);
        iterations += 1;
        residual = max_mismatch(&cells, probe);
    }
    if residual >= IPF_TOLERANCE {
        return Err(MceError::NoConvergence {
            iterations,
            residual,
        });
    }

    let posterior =
        JointTable::from_unnormalized(cells).expect("IPF preserves cell validity and unit mass");
    let posterior_c = posterior.marginal(Var::C);
    Ok(MceSolution {
        posterior,
        posterior_c,
        iterations,
        residual,
    })
}

/// Solves the probe grid for one network, in probe order.
pub fn solve_probes(
    prior: &JointTable,
    probes: &[EvidenceProbe],
) -> Result<Vec<MceSolution>, MceError> {
    probes.iter().map(|&p| mce_update(prior, p)).collect()
}

fn var_bit(var: Var) -> usize {
    match var {
        Var::E1 => 2,
        Var::E2 => 1,
        Var::C => 0,
    }
}

fn slice_masses(cells: &[f64; CELL_COUNT], var: Var) -> (f64, f64) {
    let bit = var_bit(var);
    let mut mass = [0.0; 2];
    for (i, &v) in cells.iter().enumerate() {
        mass[(i >> bit) & 1] += v;
    }
    (mass[0], mass[1])
}

/// Rejects probes that are impossible on the prior's support. Certainty about
/// a zero-mass state is [`MceError::InvalidProbe`]; an interior target with a
/// zero-mass slice can never be reached by rescaling, reported as immediate
/// non-convergence with the full mismatch as residual.
fn check_support(cells: &[f64; CELL_COUNT], var: Var, target: f64) -> Result<(), MceError> {
    let (off, on) = slice_masses(cells, var);
    if (target == 1.0 && on == 0.0) || (target == 0.0 && off == 0.0) {
        return Err(MceError::InvalidProbe {
            var,
            value: target == 1.0,
        });
    }
    let residual = if on == 0.0 && target > 0.0 {
        target
    } else if off == 0.0 && target < 1.0 {
        1.0 - target
    } else {
        return Ok(());
    };
    if residual >= IPF_TOLERANCE {
        return Err(MceError::NoConvergence {
            iterations: 0,
            residual,
        });
    }
    Ok(())
}

/// Rescales the two `var` slices so the marginal of `var` equals `target`.
/// A target of exactly 0 or 1 zeroes out the excluded slice.
fn fit_marginal(cells: &mut [f64; CELL_COUNT], var: Var, target: f64) {
    let bit = var_bit(var);
    let (off, on) = slice_masses(cells, var);
    let scale_on = if target == 0.0 { 0.0 } else { target / on };
    let scale_off = if target == 1.0 {
        0.0
    } else {
        (1.0 - target) / off
    };
    for (i, v) in cells.iter_mut().enumerate() {
        *v *= if (i >> bit) & 1 == 1 { scale_on } else { scale_off };
    }
}

fn max_mismatch(cells: &[f64; CELL_COUNT], probe: EvidenceProbe) -> f64 {
    let (_, on1) = slice_masses(cells, Var::E1);
    let (_, on2) = slice_masses(cells, Var::E2);
    (on1 - probe.p1).abs().max((on2 - probe.p2).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint::{cell_index, MIN_SLICE_MASS};
    use proptest::prelude::*;

    fn t_star() -> JointTable {
        JointTable::new([0.10, 0.05, 0.20, 0.15, 0.05, 0.10, 0.15, 0.20]).unwrap()
    }

    fn arb_table() -> impl Strategy<Value = JointTable> {
        prop::array::uniform8(1e-3..1.0f64).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            let mut cells = raw;
            for c in &mut cells {
                *c /= sum;
            }
            JointTable::new(cells).unwrap()
        })
    }

    fn arb_probe() -> impl Strategy<Value = EvidenceProbe> {
        (0.01..0.99f64, 0.01..0.99f64).prop_map(|(p1, p2)| EvidenceProbe::new(p1, p2))
    }

    #[test]
    fn probe_at_prior_marginals_is_identity() {
        let t = t_star();
        let probe = EvidenceProbe::new(t.marginal(Var::E1), t.marginal(Var::E2));
        let sol = mce_update(&t, probe).unwrap();
        assert!(sol.iterations <= 1);
        assert_eq!(sol.posterior, t);
        assert_eq!(sol.posterior_c, t.marginal(Var::C));
    }

    #[test]
    fn uniform_prior_keeps_independence() {
        let sol = mce_update(&JointTable::uniform(), EvidenceProbe::new(0.25, 0.75)).unwrap();
        for e1 in [false, true] {
            for e2 in [false, true] {
                for c in [false, true] {
                    let q1 = if e1 { 0.25 } else { 0.75 };
                    let q2 = if e2 { 0.75 } else { 0.25 };
                    let expected = q1 * q2 * 0.5;
                    assert!((sol.posterior.cell(e1, e2, c) - expected).abs() < 1e-12);
                }
            }
        }
        assert!((sol.posterior_c - 0.5).abs() < 1e-12);
    }

    #[test]
    fn near_certain_probe_approaches_joint_conditional() {
        let t = t_star();
        let sol = mce_update(&t, EvidenceProbe::new(0.999, 0.999)).unwrap();
        let target = t.conditional_c(true, true).unwrap();
        assert!((sol.posterior_c - target).abs() < 5e-3);
    }

    #[test]
    fn exact_probe_zeroes_excluded_slices() {
        let t = t_star();
        let sol = mce_update(&t, EvidenceProbe::new(1.0, 1.0)).unwrap();
        for e1 in [false, true] {
            for e2 in [false, true] {
                for c in [false, true] {
                    if !(e1 && e2) {
                        assert_eq!(sol.posterior.cell(e1, e2, c), 0.0);
                    }
                }
            }
        }
        let expected = t.conditional_c(true, true).unwrap();
        assert!((sol.posterior_c - expected).abs() < 1e-12);
    }

    #[test]
    fn certain_probe_on_empty_slice_is_invalid() {
        let t = JointTable::new([0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]).unwrap();
        match mce_update(&t, EvidenceProbe::new(1.0, 0.5)) {
            Err(MceError::InvalidProbe { var: Var::E1, value: true }) => {}
            other => panic!("expected InvalidProbe, got {other:?}"),
        }
    }

    #[test]
    fn interior_probe_on_empty_slice_cannot_converge() {
        let t = JointTable::new([0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]).unwrap();
        match mce_update(&t, EvidenceProbe::new(0.5, 0.5)) {
            Err(MceError::NoConvergence { residual, .. }) => {
                assert!((residual - 0.5).abs() < 1e-15);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn marginals_hit_probe_within_tolerance(t in arb_table(), probe in arb_probe()) {
            let sol = mce_update(&t, probe).unwrap();
            prop_assert!((sol.posterior.marginal(Var::E1) - probe.p1).abs() < IPF_TOLERANCE);
            prop_assert!((sol.posterior.marginal(Var::E2) - probe.p2).abs() < IPF_TOLERANCE);
            prop_assert_eq!(sol.posterior_c, sol.posterior.marginal(Var::C));
        }

        #[test]
        fn conditionals_are_preserved(t in arb_table(), probe in arb_probe()) {
            let sol = mce_update(&t, probe).unwrap();
            let mut decomposed = 0.0;
            for e1 in [false, true] {
                for e2 in [false, true] {
                    if sol.posterior.pair_mass(e1, e2) >= MIN_SLICE_MASS {
                        let before = t.conditional_c(e1, e2).unwrap();
                        let after = sol.posterior.conditional_c(e1, e2).unwrap();
                        prop_assert!((before - after).abs() < 1e-9);
                    }
                    decomposed += sol.posterior.pair_mass(e1, e2)
                        * t.conditional_c(e1, e2).unwrap();
                }
            }
            prop_assert!((decomposed - sol.posterior_c).abs() < 1e-9);
        }

        #[test]
        fn evidence_odds_ratio_is_preserved(t in arb_table(), probe in arb_probe()) {
            let sol = mce_update(&t, probe).unwrap();
            let or = |x: &JointTable| {
                (x.pair_mass(true, true) * x.pair_mass(false, false))
                    / (x.pair_mass(true, false) * x.pair_mass(false, true))
            };
            let before = or(&t);
            let after = or(&sol.posterior);
            prop_assert!((after / before - 1.0).abs() < 1e-6);
        }

        #[test]
        fn certain_evidence_limit(t in arb_table()) {
            let probe = EvidenceProbe::new(1.0 - 1e-6, 1.0 - 1e-6);
            let sol = mce_update(&t, probe).unwrap();
            let target = t.conditional_c(true, true).unwrap();
            prop_assert!((sol.posterior_c - target).abs() < 1e-4);
        }

        #[test]
        fn update_is_idempotent(t in arb_table(), probe in arb_probe()) {
            let once = mce_update(&t, probe).unwrap();
            let twice = mce_update(&once.posterior, probe).unwrap();
            for i in 0..CELL_COUNT {
                let a = once.posterior.cells()[i];
                let b = twice.posterior.cells()[i];
                prop_assert!((a - b).abs() <= IPF_TOLERANCE);
            }
        }
    }

    #[test]
    fn cell_index_orientation_matches_var_bits() {
        // slice_masses relies on the same bit layout as cell_index.
        assert_eq!(cell_index(true, false, false), 1 << var_bit(Var::E1));
        assert_eq!(cell_index(false, true, false), 1 << var_bit(Var::E2));
        assert_eq!(cell_index(false, false, true), 1 << var_bit(Var::C));
    }
}
