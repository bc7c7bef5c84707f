use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use surfreg::simulator::{generate_scenario, MeshSource, ScenarioSpec};

use super::{ms, Flags};
use crate::failure::{CliResult, Failure};
use crate::files::{pose_text, write_cloud, write_text};
use crate::manifest::Recorder;
use crate::SimulateArgs;

pub fn simulate(args: &SimulateArgs, flags: Flags) -> CliResult<()> {
    let text = fs::read_to_string(&args.spec).map_err(|e| Failure::input(format!("{}: {e}", args.spec.display())))?;
    let mut spec = ScenarioSpec::from_toml(&text).map_err(|e| Failure::reading(&args.spec, e))?;
    // Mesh files are relative to the scenario file.
    if let MeshSource::File(path) = &mut spec.mesh {
        if path.is_relative() {
            if let Some(dir) = args.spec.parent() {
                *path = dir.join(&*path);
            }
        }
    }
    let mut rec = Recorder::new("simulate", flags.timings);
    rec.config(&spec);
    rec.input("scenario", &args.spec)?;
    if let MeshSource::File(path) = &spec.mesh {
        rec.input("mesh", path)?;
    }

    let t = Instant::now();
    let scenario = generate_scenario(&spec)?;
    rec.timing("generate", ms(t));
    rec.seed("scenario", spec.seed);
    rec.seed("render", scenario.seeds.render);
    rec.seed("perturb", scenario.seeds.perturb);
    rec.seed("stylus", scenario.seeds.stylus);
    rec.seed("model_sampling", spec.model.seed);

    fs::create_dir_all(&args.out)?;
    let out = |name: &str| args.out.join(name);
    write_cloud(&out("scene.ply"), &scenario.scene)?;
    write_cloud(&out("model.ply"), &scenario.model.cloud)?;
    let mut stylus = String::from("x,y,z\n");
    for p in scenario.stylus.points() {
        writeln!(stylus, "{},{},{}", p.x, p.y, p.z).expect("writing to a string");
    }
    write_text(&out("stylus.csv"), &stylus)?;
    write_text(&out("init_pose.txt"), &pose_text(scenario.init.pose()))?;
    write_text(&out("world_from_sensor.txt"), &pose_text(&scenario.world_from_sensor))?;
    write_text(&out("ground_truth.txt"), &pose_text(&scenario.ground_truth))?;
    for (role, name) in [
        ("scene", "scene.ply"),
        ("model", "model.ply"),
        ("stylus", "stylus.csv"),
        ("init_pose", "init_pose.txt"),
        ("world_from_sensor", "world_from_sensor.txt"),
        ("ground_truth", "ground_truth.txt"),
    ] {
        rec.output(role, &out(name))?;
    }
    rec.finish(&out("manifest.json"))?;
    Ok(())
}
