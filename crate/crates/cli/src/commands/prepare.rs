use std::time::Instant;

use surfreg::io::load_mesh;
use surfreg::sampling::{prepare_model as sample_model, SamplingConfig};

use super::{ms, Flags};
use crate::failure::{CliResult, Failure};
use crate::files::write_cloud;
use crate::manifest::{manifest_path_for, Recorder};
use crate::PrepareModelArgs;

pub fn prepare_model(args: &PrepareModelArgs, flags: Flags) -> CliResult<()> {
    if !args.mesh.is_file() {
        return Err(Failure::input(format!("{}: no such file", args.mesh.display())));
    }
    let cfg = SamplingConfig {
        voxel_size_mm: args.voxel_mm,
        target_points: args.points,
        seed: args.seed,
        ..SamplingConfig::default()
    };
    cfg.validate()?;
    let mut rec = Recorder::new("prepare-model", flags.timings);
    rec.config(&cfg);
    rec.input("mesh", &args.mesh)?;
    rec.seed("sampling", args.seed);

    let mesh = load_mesh(&args.mesh).map_err(|e| Failure::reading(&args.mesh, e))?;
    let t = Instant::now();
    let model = sample_model(&mesh.mesh, &cfg)?;
    rec.timing("prepare", ms(t));
    if model.target_shortfall {
        log::warn!("only {} points after voxel downsampling; wrote all of them", model.voxel_points);
    }
    write_cloud(&args.out, &model.cloud)?;
    rec.output("model", &args.out)?;
    rec.finish(&manifest_path_for(&args.out))?;
    Ok(())
}
