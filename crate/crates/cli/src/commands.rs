use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use cutplane::engine::{
    convergence_csv, proportions_csv, run as run_method, EngineError, Method, MethodConfig, RunStatus, RunSummary,
    Sampling,
};
use cutplane::format::{program_from_json, program_to_json};
use cutplane::lp::LpStatus;
use cutplane::models::{generate_instance, Family, InstanceParams};
use cutplane::program::{extensive_form_value, ProgramError, StochasticProgram, ValidateOptions};

use crate::{FamilyArg, ModelArgs, OracleArgs, RunArgs, ValidateArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_MODEL: u8 = 1;
pub const EXIT_MAX_ITERATIONS: u8 = 2;
pub const EXIT_TREE: u8 = 3;

fn load(args: &ModelArgs) -> Result<StochasticProgram> {
    let program = match (&args.model, args.family) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            program_from_json(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(family)) => {
            let family = match family {
                FamilyArg::Portfolio => Family::Portfolio,
                FamilyArg::Inventory => Family::Inventory,
            };
            let params = InstanceParams {
                stages: args.stages,
                realizations: args.realizations,
                assets: args.assets,
            };
            generate_instance(family, params, args.seed)?
        }
        (None, None) => bail!("either --model or --family is required"),
    };
    if let Some(path) = &args.dump_model {
        fs::write(path, program_to_json(&program)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(program)
}

/// Prints every diagnostic and reports whether the model is usable.
fn check(program: &StochasticProgram, scenarios: usize, seed: u64) -> bool {
    let diags = program.validate(&ValidateOptions { scenarios, seed });
    for d in &diags {
        eprintln!("{d}");
    }
    diags.is_empty()
}

fn methods(arg: &str) -> Result<Vec<Method>> {
    if arg == "all-six" {
        return Ok(Method::ALL.to_vec());
    }
    arg.split(',')
        .map(|s| Method::from_slug(s.trim()).with_context(|| format!("unknown method {s:?}")))
        .collect()
}

pub fn run(args: &RunArgs) -> Result<u8> {
    let methods = methods(&args.method)?;
    let program = load(&args.model)?;
    if !check(&program, 8, args.model.seed) {
        return Ok(EXIT_MODEL);
    }
    let epsilon = args
        .epsilon
        .unwrap_or(if args.model.family == Some(FamilyArg::Inventory) { 0.05 } else { 0.1 });
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut code = EXIT_OK;
    for method in methods {
        let config = MethodConfig {
            sampling: if args.exhaustive {
                Sampling::Exhaustive
            } else {
                Sampling::Sampled {
                    forward: args.forward,
                    evaluation: args.evaluation,
                }
            },
            alpha: args.alpha,
            epsilon,
            epsilon0: args.epsilon0,
            max_iterations: args.max_iters,
            seed: args.model.seed,
            workers: args.workers,
            initial_lower_bound: args.lower_bound,
            no_timing: args.no_timing,
            ..MethodConfig::for_method(method)
        };
        let result = match run_method(&program, &config) {
            Ok(r) => r,
            Err(EngineError::Tree(e @ ProgramError::TreeTooLarge { .. })) => {
                eprintln!("{}: {e}", method.label());
                return Ok(EXIT_TREE);
            }
            Err(e) => {
                eprintln!("{}: {e}", method.label());
                return Ok(EXIT_MODEL);
            }
        };
        let slug = method.slug();
        let write = |suffix: &str, body: String| {
            let path = args.out.join(format!("{slug}.{suffix}"));
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
        };
        write("convergence.csv", convergence_csv(&result.log, program.num_stages()))?;
        write("proportions.csv", proportions_csv(&result))?;
        let summary = RunSummary::new(method.label(), &config, &result);
        write("summary.json", summary.to_json())?;
        println!(
            "{:<13} {:<13} iterations {:>4}  z_inf {}  z_sup {}",
            method.label(),
            format!("{:?}", result.status),
            summary.iterations,
            significant(summary.z_inf, 10),
            summary.z_sup.map_or("-".into(), |v| significant(v, 10)),
        );
        code = code.max(match result.status {
            RunStatus::Converged => EXIT_OK,
            RunStatus::MaxIterations => EXIT_MAX_ITERATIONS,
            RunStatus::Aborted => {
                if let Some(e) = &result.error {
                    eprintln!("{}: {e}", method.label());
                }
                EXIT_MODEL
            }
        });
    }
    // a model error outranks an unfinished run
    Ok(if code == EXIT_MAX_ITERATIONS || code == EXIT_OK { code } else { EXIT_MODEL })
}

pub fn oracle(args: &OracleArgs) -> Result<u8> {
    let program = load(&args.model)?;
    let diags = program.check_structure();
    if !diags.is_empty() {
        diags.iter().for_each(|d| eprintln!("{d}"));
        return Ok(EXIT_MODEL);
    }
    match extensive_form_value(&program, args.tree_cap) {
        Ok(sol) if sol.status == LpStatus::Optimal => {
            println!("{}", significant(sol.objective_value, 10));
            Ok(EXIT_OK)
        }
        Ok(sol) => {
            eprintln!("extensive form is {:?}", sol.status);
            Ok(EXIT_MODEL)
        }
        Err(e @ ProgramError::TreeTooLarge { .. }) => {
            eprintln!("{e}");
            Ok(EXIT_TREE)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn validate(args: &ValidateArgs) -> Result<u8> {
    let program = load(&args.model)?;
    if check(&program, args.scenarios, args.model.seed) {
        println!(
            "ok: {} stages, {} scenarios",
            program.num_stages(),
            program.tree_size()
        );
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_MODEL)
    }
}

pub fn report(dir: &Path) -> Result<u8> {
    let mut summaries = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.to_string_lossy().ends_with(".summary.json") {
            let text = fs::read_to_string(&path)?;
            summaries.push(RunSummary::from_json(&text).with_context(|| format!("parsing {}", path.display()))?);
        }
    }
    if summaries.is_empty() {
        eprintln!("no run summaries in {}", dir.display());
        return Ok(EXIT_MODEL);
    }
    let rank = |s: &RunSummary| {
        Method::ALL
            .iter()
            .position(|m| m.label() == s.method)
            .unwrap_or(Method::ALL.len())
    };
    summaries.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.method.cmp(&b.method)));
    print!("{}", table(&summaries));
    Ok(EXIT_OK)
}

fn table(summaries: &[RunSummary]) -> String {
    let stages = summaries.iter().map(|s| s.mean_proportions.len()).max().unwrap_or(0);
    let mut header: Vec<String> = ["method", "status", "iterations", "time_s", "z_inf", "z_sup", "lps"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..stages).map(|t| format!("prop_t{}", t + 2)));
    let mut rows = vec![header];
    for s in summaries {
        let mut row = vec![
            s.method.clone(),
            format!("{:?}", s.status),
            s.iterations.to_string(),
            format!("{:.3}", s.elapsed_ms as f64 / 1000.0),
            significant(s.z_inf, 8),
            s.z_sup.map_or("-".into(), |v| significant(v, 8)),
            s.total_lps.to_string(),
        ];
        row.extend((0..stages).map(|t| s.mean_proportions.get(t).map_or("-".into(), |p| format!("{p:.3}"))));
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Decimal rendering with `digits` significant digits.
fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}
