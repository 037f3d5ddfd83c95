//! The standard verification suite: canonical parameter sets per family,
//! the table runner shared by the command-line tool and the acceptance
//! tests, and calibration settings for the undetermined constants.

use crate::closed_form::{rhs_value, FamilyId, ParamSet, RankSpec, TableVariant};
use crate::mc_verify::{
    compare, default_proposal, estimate_lhs, EstimateResult, McError, RefSource, Verdict,
};
use num_complex::Complex64;

/// One check of the verification table.
#[derive(Clone, Debug)]
pub struct CheckSpec {
    pub family: FamilyId,
    pub params: ParamSet,
    pub n_samples: u64,
    pub seed: u64,
}

/// Everything one table row needs for reporting.
#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub spec: CheckSpec,
    pub estimate: EstimateResult,
    pub reference: Complex64,
    pub verdict: Verdict,
    pub variant: TableVariant,
}

fn rp(lambda: &[f64], sigma: &[f64], rank: RankSpec) -> ParamSet {
    ParamSet::real(lambda, sigma, None, rank)
}

fn rpt(lambda: &[f64], sigma: &[f64], tau: &[f64], rank: RankSpec) -> ParamSet {
    ParamSet::real(lambda, sigma, Some(tau), rank)
}

/// Canonical rank-minimal parameters: n = 1 for the square families and
/// (p, q) = (1, 2) for the sections, comfortably inside the convergence
/// domain.
pub fn minimal_params(family: FamilyId) -> ParamSet {
    use FamilyId::*;
    let n1 = RankSpec::N(1);
    let pq = RankSpec::PQ(1, 2);
    match family {
        F0_1 | F0_2 | F0_3 | F0_4 => rp(&[2.0], &[5.0], n1),
        F0_5 => rpt(&[3.0], &[4.0], &[4.0], n1),
        F0_6 => rp(&[5.0], &[9.0], n1),
        F0_7 => rp(&[2.0], &[5.0], pq),
        F0_8 => rpt(&[4.0], &[4.0], &[4.0], pq),
        F0_9 => rp(&[7.0], &[12.0], pq),
        F0_10 => rpt(&[3.0], &[4.0], &[4.0], n1),
        F0_11 => rp(&[4.0], &[8.0], n1),
        F0_14 => rp(&[2.0], &[5.0], n1),
        F0_15 => rpt(&[3.0], &[4.0], &[4.0], n1),
        F0_17 => rp(&[3.0], &[7.0], n1),
        F0_18 => rpt(&[5.0], &[5.0], &[5.0], n1),
    }
}

/// Canonical rank-2 parameters for the spot-check families.
pub fn rank_two_params(family: FamilyId) -> Option<ParamSet> {
    use FamilyId::*;
    match family {
        F0_1 => Some(rp(&[3.0, 1.0], &[9.0, 4.0], RankSpec::N(2))),
        F0_4 => Some(rp(&[3.0, 2.0], &[8.0, 5.0], RankSpec::N(2))),
        F0_5 => Some(rpt(&[5.0, 3.5], &[5.5, 4.0], &[5.5, 4.0], RankSpec::N(2))),
        F0_7 => Some(rp(&[4.0, 3.0], &[9.0, 6.0], RankSpec::PQ(2, 3))),
        _ => None,
    }
}

/// Parameter settings used to calibrate the undetermined constants of the
/// bordered odd models (three per family).
pub fn calibration_settings(family: FamilyId) -> Vec<ParamSet> {
    use FamilyId::*;
    let n1 = RankSpec::N(1);
    match family {
        F0_17 => vec![
            rp(&[3.0], &[7.0], n1),
            rp(&[2.5], &[6.0], n1),
            rp(&[3.5], &[8.0], n1),
        ],
        F0_18 => vec![
            rpt(&[5.0], &[5.0], &[5.0], n1),
            rpt(&[4.5], &[5.5], &[4.5], n1),
            rpt(&[5.5], &[6.0], &[5.0], n1),
        ],
        other => vec![minimal_params(other); 3],
    }
}

/// The families of the rank-minimal verification table (the two bordered
/// odd models run in ratio mode and are reported by the calibration
/// command instead).
pub fn table_families() -> Vec<FamilyId> {
    FamilyId::all().iter().copied().filter(|f| !f.unknown_constant()).collect()
}

/// Run one table check: estimate, reference, verdict.
pub fn run_check(
    spec: &CheckSpec,
    variant: TableVariant,
    z_max: f64,
    rel_max: f64,
    shards: usize,
) -> Result<CheckRecord, McError> {
    let cfg = default_proposal(spec.family, &spec.params)?;
    let estimate = estimate_lhs(
        spec.family,
        &spec.params,
        &cfg,
        spec.n_samples,
        spec.seed,
        shards,
        false,
    )?;
    let reference = rhs_value(spec.family, &spec.params, variant)?;
    let verdict = compare(&estimate, reference, z_max, rel_max, RefSource::ClosedForm);
    Ok(CheckRecord { spec: spec.clone(), estimate, reference, verdict, variant })
}

/// The standard rank-minimal table.
pub fn rank_minimal_specs(n_samples: u64, seed: u64) -> Vec<CheckSpec> {
    table_families()
        .into_iter()
        .map(|family| CheckSpec { family, params: minimal_params(family), n_samples, seed })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::convergence_check;

    #[test]
    fn every_default_parameter_set_converges() {
        for fam in FamilyId::all() {
            let p = minimal_params(*fam);
            let rep = convergence_check(*fam, &p, TableVariant::Corrected).unwrap();
            assert!(rep.ok, "{fam:?}: {:?}", rep.violations);
            let repp = convergence_check(*fam, &p, TableVariant::AsPrinted).unwrap();
            assert!(repp.ok, "{fam:?} printed: {:?}", repp.violations);
            for s in calibration_settings(*fam) {
                assert!(convergence_check(*fam, &s, TableVariant::Corrected).unwrap().ok);
            }
            if let Some(p2) = rank_two_params(*fam) {
                assert!(convergence_check(*fam, &p2, TableVariant::Corrected).unwrap().ok);
            }
        }
    }

    #[test]
    fn run_check_produces_a_passing_row_for_the_title_family() {
        let spec = CheckSpec {
            family: FamilyId::F0_1,
            params: minimal_params(FamilyId::F0_1),
            n_samples: 60_000,
            seed: 42,
        };
        let rec = run_check(&spec, TableVariant::Corrected, 3.5, 0.05, 1).unwrap();
        assert!(rec.verdict.pass, "z = {}, rel = {}", rec.verdict.z, rec.verdict.rel_err);
    }
}
