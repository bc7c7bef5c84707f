use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use surfreg::calibration::{CalibrationSamples, InitialPose, RoiSpec};
use surfreg::registration::{register_full, RegistrationConfig};
use surfreg::simulator::pose_error;
use surfreg::{FrameId, RigidTransform};

use super::{log_icp, Flags};
use crate::failure::{CliResult, Failure};
use crate::files::{read_cloud, read_points, read_pose, write_json};
use crate::manifest::{manifest_path_for, Recorder};
use crate::RegisterArgs;

fn load_config(path: &Path) -> CliResult<RegistrationConfig> {
    let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {}", path.display(), e.message())))
}

pub fn register(args: &RegisterArgs, flags: Flags) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => RegistrationConfig::default(),
    };
    if let Some(r) = args.roi_radius {
        cfg.roi_radius_mm = r;
    }
    cfg.coarse_only |= args.coarse_only;
    cfg.validate()?;

    let mut rec = Recorder::new("register", flags.timings);
    rec.config(&cfg);
    rec.seed("coarse", cfg.coarse.seed);
    rec.input("scene", &args.scene)?;
    rec.input("model", &args.model)?;
    for (role, arg) in [("init_pose", Some(&args.init_pose)), ("world_from_sensor", args.world_from_sensor.as_ref())] {
        if let Some(path) = arg.map(Path::new).filter(|p| p.is_file()) {
            rec.input(role, path)?;
        }
    }
    if let Some(path) = &args.config {
        rec.input("config", path)?;
    }

    let scene = read_cloud(&args.scene, FrameId::DepthSensor)?;
    let model = read_cloud(&args.model, FrameId::ModelCt)?;
    let init = InitialPose::new(read_pose(&args.init_pose, FrameId::ModelCt, FrameId::World)?)?;
    let world_from_sensor = match &args.world_from_sensor {
        Some(arg) => read_pose(arg, FrameId::DepthSensor, FrameId::World)?,
        None => RigidTransform::identity(FrameId::DepthSensor, FrameId::World),
    };
    let roi = match &args.roi_center {
        Some(c) => Some(RoiSpec::new(Vector3::from(*c), cfg.roi_radius_mm)?),
        None => None,
    };
    let bias = match &args.stylus {
        Some(path) => {
            rec.input("stylus", path)?;
            Some(CalibrationSamples::new(read_points(path)?)?)
        }
        None => None,
    };
    let truth = match &args.truth {
        Some(arg) => Some(read_pose(arg, FrameId::ModelCt, FrameId::DepthSensor)?),
        None => None,
    };

    let result = register_full(&scene, &model, &init, &world_from_sensor, roi.as_ref(), bias.as_ref(), &cfg)?;
    if flags.verbose {
        if let Some(d) = &result.icp {
            log_icp("icp", d);
        }
    }
    if let Some(t) = &result.timings {
        for (stage, v) in [
            ("bias", t.bias_ms),
            ("roi", t.roi_ms),
            ("normals", t.normals_ms),
            ("coarse", t.coarse_ms),
            ("fine", t.fine_ms),
            ("pipeline", t.total_ms),
        ] {
            rec.timing(stage, v);
        }
    }

    let mut json = serde_json::to_value(&result).expect("results serialize");
    let obj = json.as_object_mut().expect("result is an object");
    if !flags.timings {
        obj.remove("timings");
    }
    if let Some(truth) = &truth {
        let err = pose_error(result.best_pose(), truth)?;
        obj.insert("pose_error".into(), serde_json::to_value(err).expect("pose error serializes"));
    }
    write_json(&args.out, &json)?;
    rec.output("result", &args.out)?;
    rec.finish(&manifest_path_for(&args.out))?;
    Ok(())
}
