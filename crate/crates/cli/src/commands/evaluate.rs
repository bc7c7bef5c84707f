use std::path::Path;

use surfreg::metrics::{evaluate_trial, permutation_test_medians, table_csv, EvaluationConfig};
use surfreg::FrameId;

use super::Flags;
use crate::failure::{CliResult, Failure};
use crate::files::{read_cloud, read_values, write_json, write_text};
use crate::manifest::{manifest_path_for, Recorder};
use crate::EvaluateArgs;

pub fn evaluate(args: &EvaluateArgs, flags: Flags) -> CliResult<()> {
    match &args.compare {
        Some(pair) => compare(args, &pair[0], &pair[1], flags),
        None => trials(args, flags),
    }
}

fn compare(args: &EvaluateArgs, a: &Path, b: &Path, flags: Flags) -> CliResult<()> {
    let out = args.json.as_ref().ok_or_else(|| Failure::input("--compare writes JSON; pass --json"))?;
    let mut rec = Recorder::new("evaluate-compare", flags.timings);
    rec.config(&serde_json::json!({ "n_sub": args.n_sub, "permutations": args.permutations }));
    rec.seed("permutation", args.seed);
    rec.input("a", a)?;
    rec.input("b", b)?;
    let result =
        permutation_test_medians(&read_values(a)?, &read_values(b)?, args.n_sub, args.permutations, args.seed)?;
    write_json(out, &result)?;
    rec.output("json", out)?;
    rec.finish(&manifest_path_for(out))?;
    Ok(())
}

fn trials(args: &EvaluateArgs, flags: Flags) -> CliResult<()> {
    if args.traced.len() != args.reference.len() {
        return Err(Failure::input(format!(
            "{} --traced files but {} --reference files",
            args.traced.len(),
            args.reference.len()
        )));
    }
    if !args.trial.is_empty() && args.trial.len() != args.traced.len() {
        return Err(Failure::input(format!("{} --trial labels for {} trials", args.trial.len(), args.traced.len())));
    }
    let cfg = EvaluationConfig {
        coverage_threshold_mm: args.threshold_mm,
        emd_directions: args.emd_directions,
        pools: args.pools,
        seed: args.seed,
    };
    let mut rec = Recorder::new("evaluate", flags.timings);
    rec.config(&cfg);
    rec.seed("pools", args.seed);

    let mut reports = Vec::with_capacity(args.traced.len());
    for (i, (traced_path, reference_path)) in args.traced.iter().zip(&args.reference).enumerate() {
        let label = args.trial.get(i).cloned().unwrap_or_else(|| {
            traced_path.file_stem().map_or_else(|| format!("trial{}", i + 1), |s| s.to_string_lossy().into_owned())
        });
        let traced = read_cloud(traced_path, FrameId::World)?;
        let reference = read_cloud(reference_path, FrameId::World)?;
        rec.input(&format!("{label}.traced"), traced_path)?;
        rec.input(&format!("{label}.reference"), reference_path)?;
        reports.push(evaluate_trial(&label, &traced, &reference, &cfg)?);
    }

    if let Some(path) = &args.csv {
        write_text(path, &table_csv(&reports)?)?;
        rec.output("csv", path)?;
    }
    if let Some(path) = &args.json {
        write_json(path, &reports)?;
        rec.output("json", path)?;
    }
    let anchor = args.json.as_ref().or(args.csv.as_ref()).expect("clap requires an output");
    rec.finish(&manifest_path_for(anchor))?;
    Ok(())
}
