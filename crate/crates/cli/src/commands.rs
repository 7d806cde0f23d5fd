//! Command drivers: each one maps a parsed config to a CSV text.

use crate::config::RunConfig;
use crate::csvfmt::{num, table};
use crate::{validate, CliError};
use fpt_core::closed_form;
use fpt_core::estimators::{collect_hitting_records, density, joint_density_jump_part, total_mass};
use fpt_core::{HitStatus, McConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    Joint,
    Zero,
    Mass,
    Validate,
    Sample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::Joint => "joint",
            Command::Zero => "zero",
            Command::Mass => "mass",
            Command::Validate => "validate",
            Command::Sample => "sample",
        }
    }
}

fn mc(cfg: &RunConfig) -> McConfig {
    McConfig::new(cfg.n, cfg.seed, cfg.shards, cfg.depth)
}

/// CSV text of one command run, with the validation verdict when the
/// command was `validate` (the report is written either way; the caller
/// turns a failed verdict into exit code 4).
pub struct CommandOutput {
    pub csv: String,
    pub validation_failed: bool,
}

pub fn run_command(cmd: Command, cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let (csv, validation_failed) = match cmd {
        Command::Density => (density_csv(cfg)?, false),
        Command::Joint => (joint_csv(cfg)?, false),
        Command::Zero => (zero_csv(cfg), false),
        Command::Mass => (mass_csv(cfg)?, false),
        Command::Sample => (sample_csv(cfg), false),
        Command::Validate => {
            let rows = validate::run_all(cfg)?;
            let all_pass = rows.iter().all(|r| r.pass);
            (validate_table(&rows), !all_pass)
        }
    };
    Ok(CommandOutput {
        csv,
        validation_failed,
    })
}

fn validate_table(rows: &[validate::CheckRow]) -> String {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{}",
                r.name,
                num(r.value),
                num(r.reference),
                num(r.tolerance),
                r.pass
            )
        })
        .collect();
    table("check_name,value,reference,tolerance,pass", &lines)
}

fn density_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        let e = density(&cfg.model, t, mc(cfg))?;
        rows.push(format!(
            "{},{},{},{},{},{}",
            num(t),
            num(cfg.model.barrier),
            num(e.value),
            num(e.stderr),
            e.n,
            e.method
        ));
    }
    Ok(table("t,x,estimate,stderr,n,method", &rows))
}

fn joint_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for &t in &cfg.t_grid {
        for &l in &cfg.l_grid {
            let p = joint_density_jump_part(&cfg.model, t, l, mc(cfg))?;
            rows.push(format!(
                "{},{},{},{},{}",
                num(t),
                num(l),
                num(p.g),
                num(p.stderr),
                p.n
            ));
        }
    }
    Ok(table("t,l,g,stderr,n", &rows))
}

fn zero_csv(cfg: &RunConfig) -> String {
    let law = &cfg.model.law;
    let (lambda, x) = (cfg.model.intensity, cfg.model.barrier);
    let d = law.atom_mass(x);
    let rows = vec![
        format!("t0_atom_component,{}", num(0.25 * lambda * d)),
        format!(
            "t0_jump_over_component,{}",
            num(lambda * (1.0 - law.cdf(x)))
        ),
        format!("t0_boundary_atom_component,{}", num(0.5 * lambda * d)),
        format!(
            "t0_density,{}",
            num(closed_form::density_at_zero(law, lambda, x))
        ),
    ];
    table("component,value", &rows)
}

fn mass_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for &horizon in &cfg.horizons {
        let e = total_mass(&cfg.model, horizon, mc(cfg))?;
        rows.push(format!(
            "{},{},{}",
            num(horizon),
            num(e.value),
            num(e.stderr)
        ));
    }
    Ok(table("horizon,p_hit,stderr", &rows))
}

fn sample_csv(cfg: &RunConfig) -> String {
    let horizon = *cfg.horizons.last().expect("config guarantees a horizon");
    let records = collect_hitting_records(&cfg.model, horizon, mc(cfg));
    let rows: Vec<String> = records
        .iter()
        .map(|r| {
            let status = match r.status {
                HitStatus::HitContinuous => "hit_continuous",
                HitStatus::HitJump => "hit_jump",
                HitStatus::SurvivedHorizon => "survived_horizon",
            };
            let tau = r.tau.map(num).unwrap_or_default();
            format!(
                "{status},{tau},{},{},{}",
                num(r.overshoot),
                num(r.undershoot),
                r.n_jumps_before
            )
        })
        .collect();
    table("status,tau,overshoot,undershoot,n_jumps", &rows)
}
