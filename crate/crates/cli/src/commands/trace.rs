use surfreg::metrics::{trace_eval as run_trace_eval, TraceEvalConfig};
use surfreg::FrameId;

use super::{log_icp, Flags};
use crate::failure::CliResult;
use crate::files::{read_cloud, write_json};
use crate::manifest::{manifest_path_for, Recorder};
use crate::TraceEvalArgs;

pub fn trace_eval(args: &TraceEvalArgs, flags: Flags) -> CliResult<()> {
    let cfg = TraceEvalConfig::default();
    let mut rec = Recorder::new("trace-eval", flags.timings);
    rec.config(&cfg);
    let inputs = [
        ("ar_surface", &args.ar_surface, FrameId::World),
        ("ar_internal", &args.ar_internal, FrameId::World),
        ("ct_surface", &args.ct_surface, FrameId::ModelCt),
        ("ct_internal", &args.ct_internal, FrameId::ModelCt),
    ];
    let mut clouds = Vec::with_capacity(4);
    for (role, path, frame) in inputs {
        clouds.push(read_cloud(path, frame)?);
        rec.input(role, path)?;
    }
    let result = run_trace_eval(&clouds[0], &clouds[1], &clouds[2], &clouds[3], &cfg)?;
    if flags.verbose {
        log_icp("trace icp", &result.icp);
    }
    write_json(&args.out, &result)?;
    rec.output("summary", &args.out)?;
    rec.finish(&manifest_path_for(&args.out))?;
    Ok(())
}
