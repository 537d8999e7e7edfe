//! The four uncertain-inference calculi under test: a linear equation, an
//! independence model, MYCIN-style certainty factors, and PROSPECTOR-style
//! likelihood-ratio updating.
//!
//! Each calculus exposes two things: evaluation of its posterior for the
//! conclusion at an evidence probe, and a theoretical initialization that
//! translates a ground-truth joint table into parameters through the
//! calculus's published definitions. The theoretical translation doubles as
//! the untuned baseline and as the optimizer's starting point.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::joint::{JointError, JointTable};
use crate::mce::EvidenceProbe;

/// Clamp applied inside odds computations so extreme tuned parameters cannot
/// divide by zero.
pub const PROB_EPSILON: f64 = 1e-9;

/// Identifies one of the four calculi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calculus {
    Linear,
    Independence,
    Mycin,
    Prospector,
}

impl Calculus {
    /// All calculi, in canonical reporting order.
    pub const ALL: [Calculus; 4] = [
        Calculus::Linear,
        Calculus::Independence,
        Calculus::Mycin,
        Calculus::Prospector,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Calculus::Linear => "linear",
            Calculus::Independence => "independence",
            Calculus::Mycin => "mycin",
            Calculus::Prospector => "prospector",
        }
    }

    /// Number of tunable parameters.
    pub fn param_count(self) -> usize {
        match self {
            Calculus::Linear => 3,
            Calculus::Independence => 4,
            Calculus::Mycin => 5,
            Calculus::Prospector => 7,
        }
    }
}

impl fmt::Display for Calculus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Calculus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Calculus::Linear),
            "independence" => Ok(Calculus::Independence),
            "mycin" => Ok(Calculus::Mycin),
            "prospector" => Ok(Calculus::Prospector),
            other => Err(format!(
                "unknown calculus '{other}' (expected linear, independence, mycin, or prospector)"
            )),
        }
    }
}

/// Intercept and evidence weights of `P'(C) = a + b1*P'(E1) + b2*P'(E2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
}

/// The four conditionals `P(C | e1, e2)` weighted by joint evidence
/// probabilities under an independence assumption.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependenceParams {
    pub q00: f64,
    pub q10: f64,
    pub q01: f64,
    pub q11: f64,
}

/// Base rates plus one certainty factor per piece of evidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MycinParams {
    pub prior_e1: f64,
    pub prior_e2: f64,
    pub prior_c: f64,
    pub cf1: f64,
    pub cf2: f64,
}

/// Base rates plus the conditional likelihood of each piece of evidence given
/// the conclusion true or false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProspectorParams {
    pub prior_e1: f64,
    pub prior_e2: f64,
    pub prior_c: f64,
    pub like1_t: f64,
    pub like1_f: f64,
    pub like2_t: f64,
    pub like2_f: f64,
}

/// Tagged union of the four parameter vectors.
///
/// Serializes as `{"calculus": "...", "values": {...}}` with field names
/// exactly as declared on the parameter structs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "calculus", content = "values", rename_all = "lowercase")]
pub enum CalculusParams {
    Linear(LinearParams),
    Independence(IndependenceParams),
    Mycin(MycinParams),
    Prospector(ProspectorParams),
}

/// Evaluation toggles shared by all calculi.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    /// Use MYCIN's historical `max(0, u)` premise attenuation instead of the
    /// signed product.
    pub mycin_clamp: bool,
}

impl CalculusParams {
    pub fn calculus(&self) -> Calculus {
        match self {
            CalculusParams::Linear(_) => Calculus::Linear,
            CalculusParams::Independence(_) => Calculus::Independence,
            CalculusParams::Mycin(_) => Calculus::Mycin,
            CalculusParams::Prospector(_) => Calculus::Prospector,
        }
    }

    /// Posterior conclusion value at `probe`. Only the linear calculus may
    /// leave `[0, 1]`.
    pub fn eval(&self, probe: EvidenceProbe, options: EvalOptions) -> f64 {
        match self {
            CalculusParams::Linear(p) => linear_eval(p, probe),
            CalculusParams::Independence(p) => independence_eval(p, probe),
            CalculusParams::Mycin(p) => mycin_eval(p, probe, options.mycin_clamp),
            CalculusParams::Prospector(p) => prospector_eval(p, probe),
        }
    }

    /// Validity of a parameter vector coming from outside the tuner
    /// (files, user input).
    pub fn validate(&self) -> Result<(), String> {
        let check_unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} is outside [0, 1]"))
            }
        };
        let check_open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(format!("{name} = {v} is outside (0, 1)"))
            }
        };
        match self {
            CalculusParams::Linear(p) => {
                for (name, v) in [("a", p.a), ("b1", p.b1), ("b2", p.b2)] {
                    if !v.is_finite() {
                        return Err(format!("{name} = {v} is not finite"));
                    }
                }
                Ok(())
            }
            CalculusParams::Independence(p) => {
                check_unit("q00", p.q00)?;
                check_unit("q10", p.q10)?;
                check_unit("q01", p.q01)?;
                check_unit("q11", p.q11)
            }
            CalculusParams::Mycin(p) => {
                check_open("prior_e1", p.prior_e1)?;
                check_open("prior_e2", p.prior_e2)?;
                check_open("prior_c", p.prior_c)?;
                for (name, v) in [("cf1", p.cf1), ("cf2", p.cf2)] {
                    if !(-1.0..=1.0).contains(&v) {
                        return Err(format!("{name} = {v} is outside [-1, 1]"));
                    }
                }
                Ok(())
            }
            CalculusParams::Prospector(p) => {
                check_open("prior_e1", p.prior_e1)?;
                check_open("prior_e2", p.prior_e2)?;
                check_open("prior_c", p.prior_c)?;
                check_open("like1_t", p.like1_t)?;
                check_open("like1_f", p.like1_f)?;
                check_open("like2_t", p.like2_t)?;
                check_open("like2_f", p.like2_f)
            }
        }
    }
}

/// `a + b1*p1 + b2*p2`, deliberately not clipped to `[0, 1]`.
pub fn linear_eval(params: &LinearParams, probe: EvidenceProbe) -> f64 {
    params.a + params.b1 * probe.p1 + params.b2 * probe.p2
}

/// The independence combination: conditionals weighted by the product of the
/// asserted evidence probabilities.
pub fn independence_eval(params: &IndependenceParams, probe: EvidenceProbe) -> f64 {
    let EvidenceProbe { p1, p2 } = probe;
    (1.0 - p1) * (1.0 - p2) * params.q00
        + p1 * (1.0 - p2) * params.q10
        + (1.0 - p1) * p2 * params.q01
        + p1 * p2 * params.q11
}

/// MYCIN-style update: evidence certainty relative to the (tunable) base
/// rate, attenuated by the certainty factor, combined incrementally, then
/// mapped back to a probability around the conclusion base rate.
pub fn mycin_eval(params: &MycinParams, probe: EvidenceProbe, clamp: bool) -> f64 {
    let c1 = mycin_contribution(probe.p1, params.prior_e1, params.cf1, clamp);
    let c2 = mycin_contribution(probe.p2, params.prior_e2, params.cf2, clamp);
    let combined = combine_certainty(c1, c2);
    if combined >= 0.0 {
        params.prior_c + combined * (1.0 - params.prior_c)
    } else {
        params.prior_c * (1.0 + combined)
    }
}

fn mycin_contribution(p: f64, prior_e: f64, cf: f64, clamp: bool) -> f64 {
    let u = if p >= prior_e {
        (p - prior_e) / (1.0 - prior_e)
    } else {
        (p - prior_e) / prior_e
    };
    let u = if clamp { u.max(0.0) } else { u };
    cf * u
}

/// MYCIN's incremental combination of two certainty contributions.
fn combine_certainty(c1: f64, c2: f64) -> f64 {
    if c1 >= 0.0 && c2 >= 0.0 {
        c1 + c2 - c1 * c2
    } else if c1 <= 0.0 && c2 <= 0.0 {
        c1 + c2 + c1 * c2
    } else {
        let denom = 1.0 - c1.abs().min(c2.abs());
        if denom == 0.0 {
            // Full belief against full disbelief; treat as no net change.
            0.0
        } else {
            (c1 + c2) / denom
        }
    }
}

/// PROSPECTOR-style update: per evidence, interpolate the conclusion
/// posterior piecewise-linearly against the asserted evidence probability
/// with pivot at the base rates, convert to an odds multiplier, and combine
/// multiplicatively on the prior odds.
pub fn prospector_eval(params: &ProspectorParams, probe: EvidenceProbe) -> f64 {
    let prior_c = clamp_prob(params.prior_c);
    let l1 = evidence_lambda(
        probe.p1,
        clamp_prob(params.prior_e1),
        prior_c,
        clamp_prob(params.like1_t),
        clamp_prob(params.like1_f),
    );
    let l2 = evidence_lambda(
        probe.p2,
        clamp_prob(params.prior_e2),
        prior_c,
        clamp_prob(params.like2_t),
        clamp_prob(params.like2_f),
    );
    let combined_odds = odds(prior_c) * l1 * l2;
    combined_odds / (1.0 + combined_odds)
}

fn evidence_lambda(p: f64, prior_e: f64, prior_c: f64, like_t: f64, like_f: f64) -> f64 {
    // Posterior of the conclusion if the evidence were certainly true/false.
    let p_true = like_t * prior_c / (like_t * prior_c + like_f * (1.0 - prior_c));
    let p_false = (1.0 - like_t) * prior_c
        / ((1.0 - like_t) * prior_c + (1.0 - like_f) * (1.0 - prior_c));
    let interpolated = if p <= prior_e {
        p_false + (p / prior_e) * (prior_c - p_false)
    } else {
        prior_c + ((p - prior_e) / (1.0 - prior_e)) * (p_true - prior_c)
    };
    odds(clamp_prob(interpolated)) / odds(prior_c)
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

#[inline]
fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

/// Translates a joint table into each calculus's parameters through the
/// published definitions: the linear weights are conditional-probability
/// differences, the independence parameters are the four conditionals, MYCIN
/// gets base rates and single-evidence certainty factors, PROSPECTOR gets
/// base rates and the four conditional likelihoods.
pub fn theoretical_init(
    table: &JointTable,
    calculus: Calculus,
) -> Result<CalculusParams, JointError> {
    match calculus {
        Calculus::Linear => {
            let profile = table.conditional_profile()?;
            let a = profile.conditional(false, false);
            Ok(CalculusParams::Linear(LinearParams {
                a,
                b1: profile.conditional(true, false) - a,
                b2: profile.conditional(false, true) - a,
            }))
        }
        Calculus::Independence => {
            let profile = table.conditional_profile()?;
            Ok(CalculusParams::Independence(IndependenceParams {
                q00: profile.conditional(false, false),
                q10: profile.conditional(true, false),
                q01: profile.conditional(false, true),
                q11: profile.conditional(true, true),
            }))
        }
        Calculus::Mycin => {
            let profile = table.conditional_profile()?;
            Ok(CalculusParams::Mycin(MycinParams {
                prior_e1: profile.prior_e1,
                prior_e2: profile.prior_e2,
                prior_c: profile.prior_c,
                cf1: certainty_factor(table.conditional_c_given_e1(true)?, profile.prior_c),
                cf2: certainty_factor(table.conditional_c_given_e2(true)?, profile.prior_c),
            }))
        }
        Calculus::Prospector => {
            let profile = table.conditional_profile()?;
            let p_c = profile.prior_c;
            if p_c < crate::joint::MIN_SLICE_MASS || 1.0 - p_c < crate::joint::MIN_SLICE_MASS {
                return Err(JointError::DegenerateMarginal {
                    var: crate::joint::Var::C,
                    value: p_c < 0.5,
                    mass: p_c.min(1.0 - p_c),
                });
            }
            let joint = |e1_or_e2: crate::joint::Var, c: bool| -> f64 {
                match e1_or_e2 {
                    crate::joint::Var::E1 => {
                        table.cell(true, false, c) + table.cell(true, true, c)
                    }
                    crate::joint::Var::E2 => {
                        table.cell(false, true, c) + table.cell(true, true, c)
                    }
                    crate::joint::Var::C => unreachable!(),
                }
            };
            Ok(CalculusParams::Prospector(ProspectorParams {
                prior_e1: profile.prior_e1,
                prior_e2: profile.prior_e2,
                prior_c: p_c,
                like1_t: joint(crate::joint::Var::E1, true) / p_c,
                like1_f: joint(crate::joint::Var::E1, false) / (1.0 - p_c),
                like2_t: joint(crate::joint::Var::E2, true) / p_c,
                like2_f: joint(crate::joint::Var::E2, false) / (1.0 - p_c),
            }))
        }
    }
}

/// MYCIN's belief-change measure for the conclusion given one piece of
/// evidence: positive values scale remaining disbelief, negative values
/// scale belief.
fn certainty_factor(p_c_given_e: f64, prior_c: f64) -> f64 {
    let diff = p_c_given_e - prior_c;
    if diff >= 0.0 {
        diff / (1.0 - prior_c)
    } else {
        diff / prior_c
    }
}
