//! Verification suite runners. Each returns the config echo that goes into
//! the bundle plus a map of named relation reports; the caller owns exit
//! codes and serialization.

use std::collections::BTreeMap;

use ozcheck_core::blocks::{alt1_witness, w_witness, z_witness, WitnessPair};
use ozcheck_core::linalg;
use ozcheck_core::matfield::{GridSpec, MatFun};
use ozcheck_core::ordzero::{validate_alt1, validate_r, validate_r_hat, OrderZeroMap};
use ozcheck_core::plfun::verify_pl_identities;
use ozcheck_core::report::{RelationEntry, RelationReport};
use ozcheck_core::tower::{hat_maps_w, hat_maps_z, FingerprintStage};
use ozcheck_core::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Pl,
    Cone,
    Z,
    W,
    Alt1,
    TowerZ,
    TowerW,
    Fingerprint,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Pl => "pl",
            Suite::Cone => "cone",
            Suite::Z => "z",
            Suite::W => "w",
            Suite::Alt1 => "alt1",
            Suite::TowerZ => "tower-z",
            Suite::TowerW => "tower-w",
            Suite::Fingerprint => "fingerprint",
        }
    }
}

pub struct SuiteRun {
    pub config: Value,
    pub reports: BTreeMap<String, RelationReport>,
}

/// Membership of every generator field in its boundary-condition block, one
/// entry per generator.
fn membership_report(maps: &[(&str, &OrderZeroMap)], tol: f64) -> Result<RelationReport> {
    let mut report = RelationReport::new();
    for (name, map) in maps {
        for (i, x) in map.row().iter().enumerate() {
            report.insert_residual(
                format!("{name}_x{}", i + 1),
                x.membership_residual()?,
                tol,
                None,
            );
        }
    }
    Ok(report)
}

fn witness_reports(
    wit: &WitnessPair,
    razak: bool,
    tol: f64,
) -> Result<BTreeMap<String, RelationReport>> {
    let mut reports = BTreeMap::new();
    reports.insert("phi_cone".into(), wit.phi.validate(tol)?);
    reports.insert("psi_cone".into(), wit.psi.validate(tol)?);
    let coupling = if razak {
        validate_r_hat(&wit.phi, &wit.psi, tol)?
    } else {
        validate_r(&wit.phi, &wit.psi, tol)?
    };
    reports.insert("coupling".into(), coupling);
    reports.insert(
        "membership".into(),
        membership_report(&[("phi", &wit.phi), ("psi", &wit.psi)], tol)?,
    );
    Ok(reports)
}

pub fn run_verify(suite: Suite, n: usize, grid: usize, tol: f64, seed: u64) -> Result<SuiteRun> {
    let g = GridSpec::new(grid)?;
    let mut reports = BTreeMap::new();
    let mut config = json!({
        "suite": suite.name(),
        "n": n,
        "grid": grid,
        "tol": tol,
    });

    match suite {
        Suite::Pl => {
            // exact rational checks; grid, n and tol play no role
            config = json!({ "suite": "pl" });
            reports.insert("pl_identities".into(), verify_pl_identities());
        }
        Suite::Cone => {
            let wit = z_witness(n, g)?;
            reports.insert("phi_cone".into(), wit.phi.validate(tol)?);
            reports.insert("psi_cone".into(), wit.psi.validate(tol)?);
        }
        Suite::Z => {
            let wit = z_witness(n, g)?;
            reports = witness_reports(&wit, false, tol)?;
        }
        Suite::W => {
            let wit = w_witness(n, g)?;
            reports = witness_reports(&wit, true, tol)?;
        }
        Suite::Alt1 => {
            let wit = alt1_witness(n, g)?;
            reports.insert("phi_cone".into(), wit.phi.validate(tol)?);
            reports.insert("psi_cone".into(), wit.psi.validate(tol)?);
            reports.insert(
                "relations".into(),
                validate_alt1(&wit.phi, &wit.psi, &wit.h, tol)?,
            );
            reports.insert(
                "membership".into(),
                membership_report(&[("phi", &wit.phi), ("psi", &wit.psi)], tol)?,
            );
        }
        Suite::TowerZ | Suite::TowerW => {
            let level = n
                .checked_pow(3)
                .ok_or_else(|| ozcheck_core::Error::Resource("level overflows usize".into()))?;
            config["input_level"] = json!(level);
            let hat = if suite == Suite::TowerZ {
                let wit = z_witness(level, g)?;
                hat_maps_z(&wit.phi, &wit.psi, tol)?
            } else {
                let wit = w_witness(level, g)?;
                hat_maps_w(&wit.phi, &wit.psi, tol)?
            };
            reports.insert("hat".into(), hat.report);
        }
        Suite::Fingerprint => {
            config["seed"] = json!(seed);
            config["random_inputs"] = json!(FINGERPRINT_INPUTS);
            let stage = FingerprintStage::new(n, g, tol)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut worst = (0.0f64, None);
            let mut shadow = (0.0f64, None);
            for _ in 0..FINGERPRINT_INPUTS {
                let a = linalg::random_hermitian(&mut rng, n);
                for j in 0..g.samples {
                    let t = g.t(j);
                    let entry = stage.check(&a, t, tol)?;
                    if entry.residual > worst.0 {
                        worst = (entry.residual, Some(t));
                    }
                    let (computed, predicted) = stage.trace_shadow(t)?;
                    let r = (computed - predicted).abs();
                    if r > shadow.0 {
                        shadow = (r, Some(t));
                    }
                }
            }
            let mut report = RelationReport::new();
            report.insert(
                "eigenvalue_multiset_match",
                RelationEntry::new(worst.0, tol, worst.1),
            );
            report.insert(
                "trace_shadow_match",
                RelationEntry::new(shadow.0, tol, shadow.1),
            );
            reports.insert("fingerprint".into(), report);
        }
    }

    Ok(SuiteRun { config, reports })
}

const FINGERPRINT_INPUTS: usize = 20;

/// Generator fields to dump for `export`, name to field.
pub fn export_fields(suite: Suite, n: usize, grid: usize) -> Result<Vec<(String, MatFun)>> {
    let g = GridSpec::new(grid)?;
    let mut out = Vec::new();
    let push_row = |name: &str, map: &OrderZeroMap, out: &mut Vec<(String, MatFun)>| {
        for (i, x) in map.row().iter().enumerate() {
            out.push((format!("{name}_x{}", i + 1), x.clone()));
        }
    };
    match suite {
        Suite::Z => {
            let wit = z_witness(n, g)?;
            push_row("phi", &wit.phi, &mut out);
            push_row("psi", &wit.psi, &mut out);
        }
        Suite::W => {
            let wit = w_witness(n, g)?;
            push_row("phi", &wit.phi, &mut out);
            push_row("psi", &wit.psi, &mut out);
        }
        Suite::Alt1 => {
            let wit = alt1_witness(n, g)?;
            push_row("phi", &wit.phi, &mut out);
            push_row("psi", &wit.psi, &mut out);
            out.push(("h".into(), wit.h));
        }
        _ => {
            return Err(ozcheck_core::Error::Precondition(format!(
                "suite {} has no generator fields to export; use z, w or alt1",
                suite.name()
            )))
        }
    }
    Ok(out)
}
