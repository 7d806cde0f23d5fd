//! Line-based `key = value` config files with `[model]` and `[run]` sections.
//!
//! The parameter space is flat, so a bespoke parser keeps exact line numbers
//! in every error and rejects unknown keys outright.

use crate::CliError;
use fpt_core::{Atom, JumpFamily, JumpLaw, ModelParams};
use std::collections::BTreeMap;
use std::path::PathBuf;

/// A fully validated run request.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelParams,
    pub t_grid: Vec<f64>,
    pub l_grid: Vec<f64>,
    pub n: u64,
    pub horizons: Vec<f64>,
    pub depth: u32,
    pub step: f64,
    pub h: f64,
    pub seed: u64,
    pub shards: u32,
    pub out: Option<PathBuf>,
}

fn syntax(line: usize, msg: impl Into<String>) -> CliError {
    CliError::Config(format!("line {line}: {}", msg.into()))
}

fn semantic(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

struct RawEntry {
    line: usize,
    value: String,
}

/// Parse a config text into a [`RunConfig`].
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut sections: BTreeMap<&str, BTreeMap<String, RawEntry>> = BTreeMap::new();
    let mut current: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| syntax(line_no, "unterminated section header"))?
                .trim();
            current = match name {
                "model" => Some("model"),
                "run" => Some("run"),
                other => return Err(syntax(line_no, format!("unknown section [{other}]"))),
            };
            sections.entry(current.unwrap()).or_default();
            continue;
        }
        let section =
            current.ok_or_else(|| syntax(line_no, "key outside of a [model] or [run] section"))?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, "expected `key = value`"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let known: &[&str] = if section == "model" {
            &["m", "lambda", "jump", "x"]
        } else {
            &[
                "t", "l", "n", "horizon", "depth", "step", "h", "seed", "shards", "out",
            ]
        };
        if !known.contains(&key.as_str()) {
            return Err(syntax(
                line_no,
                format!("unknown key `{key}` in [{section}]"),
            ));
        }
        let entries = sections.entry(section).or_default();
        if entries.contains_key(&key) {
            return Err(syntax(line_no, format!("duplicate key `{key}`")));
        }
        entries.insert(
            key,
            RawEntry {
                line: line_no,
                value,
            },
        );
    }

    let model_sec = sections.remove("model").unwrap_or_default();
    let run_sec = sections.remove("run").unwrap_or_default();

    let m = parse_opt_f64(&model_sec, "m")?.unwrap_or(0.0);
    let lambda = parse_opt_f64(&model_sec, "lambda")?.unwrap_or(0.0);
    let x = parse_opt_f64(&model_sec, "x")?
        .ok_or_else(|| semantic("missing required key `x` in [model]"))?;
    if x <= 0.0 {
        return Err(semantic(format!("x = {x} must be positive")));
    }
    let jump_entry = model_sec
        .get("jump")
        .ok_or_else(|| semantic("missing required key `jump` in [model]"))?;
    let law = parse_jump_law(&jump_entry.value, jump_entry.line)?;
    let model =
        ModelParams::new(m, lambda, law, x).map_err(|e| semantic(format!("invalid model: {e}")))?;

    let t_grid = parse_opt_grid(&run_sec, "t")?.unwrap_or_else(|| vec![1.0]);
    require_increasing(&t_grid, "t", true)?;
    let l_grid = parse_opt_grid(&run_sec, "l")?.unwrap_or_else(|| vec![0.0]);
    require_increasing(&l_grid, "l", false)?;
    if l_grid.iter().any(|&l| l < 0.0) {
        return Err(semantic("l grid entries must be nonnegative"));
    }
    let horizons = parse_opt_grid(&run_sec, "horizon")?.unwrap_or_else(|| vec![100.0]);
    require_increasing(&horizons, "horizon", true)?;

    let n = parse_opt_u64(&run_sec, "n")?.unwrap_or(100_000);
    if n == 0 {
        return Err(semantic("n must be positive"));
    }
    let depth = parse_opt_u64(&run_sec, "depth")?.unwrap_or(20);
    if depth > 60 {
        return Err(semantic(format!("depth = {depth} must be at most 60")));
    }
    let step = parse_opt_f64(&run_sec, "step")?.unwrap_or(1.0 / 4096.0);
    if step <= 0.0 {
        return Err(semantic(format!("step = {step} must be positive")));
    }
    let h = parse_opt_f64(&run_sec, "h")?.unwrap_or(0.05);
    if h <= 0.0 {
        return Err(semantic(format!("h = {h} must be positive")));
    }
    let seed = parse_opt_u64(&run_sec, "seed")?.unwrap_or(0);
    let shards = parse_opt_u64(&run_sec, "shards")?.unwrap_or(1);
    if shards == 0 || shards > 1 << 16 {
        return Err(semantic(format!("shards = {shards} out of range")));
    }
    let out = run_sec.get("out").map(|e| PathBuf::from(&e.value));

    Ok(RunConfig {
        model,
        t_grid,
        l_grid,
        n,
        horizons,
        depth: depth as u32,
        step,
        h,
        seed,
        shards: shards as u32,
        out,
    })
}

fn require_increasing(grid: &[f64], key: &str, strictly_positive: bool) -> Result<(), CliError> {
    if grid.is_empty() {
        return Err(semantic(format!("`{key}` grid is empty")));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(semantic(format!(
            "`{key}` grid must be strictly increasing"
        )));
    }
    if strictly_positive && grid[0] <= 0.0 {
        return Err(semantic(format!("`{key}` grid entries must be positive")));
    }
    Ok(())
}

fn parse_opt_f64(sec: &BTreeMap<String, RawEntry>, key: &str) -> Result<Option<f64>, CliError> {
    sec.get(key)
        .map(|e| {
            e.value.parse::<f64>().map_err(|_| {
                syntax(
                    e.line,
                    format!("`{key}` expects a number, got `{}`", e.value),
                )
            })
        })
        .transpose()
}

fn parse_opt_u64(sec: &BTreeMap<String, RawEntry>, key: &str) -> Result<Option<u64>, CliError> {
    sec.get(key)
        .map(|e| {
            e.value.parse::<u64>().map_err(|_| {
                syntax(
                    e.line,
                    format!("`{key}` expects an integer, got `{}`", e.value),
                )
            })
        })
        .transpose()
}

fn parse_opt_grid(
    sec: &BTreeMap<String, RawEntry>,
    key: &str,
) -> Result<Option<Vec<f64>>, CliError> {
    sec.get(key)
        .map(|e| {
            e.value
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<f64>().map_err(|_| {
                        syntax(
                            e.line,
                            format!("`{key}` expects comma-separated numbers, got `{tok}`"),
                        )
                    })
                })
                .collect()
        })
        .transpose()
}

/// Jump law grammar:
/// `exp rate=<r>` | `gauss mu=<m> sigma=<s>` | `kou p=<p> eta1=<a> eta2=<b>`
/// | `mix <w1>*<component> + <w2>*<component> + ...` with `atom@<y>` as an
/// extra component form inside a mixture.
pub fn parse_jump_law(spec: &str, line: usize) -> Result<JumpLaw, CliError> {
    let spec = spec.trim();
    let (head, _) = spec.split_once(char::is_whitespace).unwrap_or((spec, ""));
    let law = if head == "mix" {
        let body = spec.strip_prefix("mix").unwrap().trim();
        if body.is_empty() {
            return Err(syntax(line, "empty mixture"));
        }
        let mut atoms = Vec::new();
        let mut components = Vec::new();
        for term in body.split('+') {
            let term = term.trim();
            let (w, comp) = term.split_once('*').ok_or_else(|| {
                syntax(
                    line,
                    format!("mixture term `{term}` expects `<weight>*<component>`"),
                )
            })?;
            let weight: f64 = w
                .trim()
                .parse()
                .map_err(|_| syntax(line, format!("bad mixture weight `{w}`")))?;
            let comp = comp.trim();
            if let Some(loc) = comp.strip_prefix("atom@") {
                let location: f64 = loc
                    .parse()
                    .map_err(|_| syntax(line, format!("bad atom location `{loc}`")))?;
                atoms.push(Atom {
                    location,
                    mass: weight,
                });
            } else {
                components.push((parse_family(comp, line)?, weight));
            }
        }
        JumpLaw::new(atoms, components)
    } else {
        JumpLaw::new(vec![], vec![(parse_family(spec, line)?, 1.0)])
    };
    law.map_err(|e| semantic(format!("line {line}: {e}")))
}

fn parse_family(spec: &str, line: usize) -> Result<JumpFamily, CliError> {
    let mut toks = spec.split_whitespace();
    let name = toks
        .next()
        .ok_or_else(|| syntax(line, "empty jump component"))?;
    let mut params = BTreeMap::new();
    for tok in toks {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected `name=value`, got `{tok}`")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| syntax(line, format!("bad numeric value `{v}` for `{k}`")))?;
        if params.insert(k.to_string(), v).is_some() {
            return Err(syntax(line, format!("duplicate parameter `{k}`")));
        }
    }
    let mut take = |k: &str| {
        params
            .remove(k)
            .ok_or_else(|| syntax(line, format!("jump family `{name}` needs parameter `{k}`")))
    };
    let fam = match name {
        "exp" => JumpFamily::Exponential {
            rate: take("rate")?,
        },
        "gauss" => JumpFamily::Gaussian {
            mu: take("mu")?,
            sigma: take("sigma")?,
        },
        "kou" => JumpFamily::Kou {
            up_prob: take("p")?,
            eta_plus: take("eta1")?,
            eta_minus: take("eta2")?,
        },
        other => return Err(syntax(line, format!("unknown jump family `{other}`"))),
    };
    if let Some(k) = params.keys().next() {
        return Err(syntax(
            line,
            format!("unknown parameter `{k}` for jump family `{name}`"),
        ));
    }
    Ok(fam)
}
