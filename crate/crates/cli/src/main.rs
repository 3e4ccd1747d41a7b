mod io;
mod obj;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use polycone::congruence::{cone_congruent, spherical_congruent, CongruenceWitness};
use polycone::geom::{random_orthogonal, random_unit};
use polycone::polytope::{random_polytope, Scene};
use polycone::sightcone::support_cone;
use polycone::sphproj::spherical_projection;
use polycone::verifier::{
    counterexample_report, recover_segment, verify_balls, verify_pair, CirclePlane, Mode, Verdict, VerdictKind,
};
use polycone::Tolerance;

use crate::io::{coords, parse_point, read_angles, read_json, read_scene, ConeFile, ProjectionFile};

const EXIT_DISTINCT: u8 = 2;
const EXIT_INCONCLUSIVE: u8 = 3;

#[derive(Parser)]
#[command(name = "polycone", version, about = "Support cones, spherical projections and uniqueness checks for convex polytopes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Geometric tolerance (absolute and relative).
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Cones,
    Projections,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cones => Mode::Cones,
            ModeArg::Projections => Mode::Projections,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PairKind {
    /// Independent random polytopes.
    Random,
    /// The same polytope twice.
    Equal,
    /// A polytope and a translate of it.
    Translate,
    /// A polytope and a rotated copy.
    Rotate,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random two-polytope scene.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long, default_value_t = 0.6)]
        radius_cap: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, value_enum, default_value_t = PairKind::Random)]
        kind: PairKind,
        /// Translation length for `--kind translate`.
        #[arg(long, default_value_t = 0.1)]
        shift: f64,
    },
    /// Support cone of one polytope from a light source.
    Cone {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        z: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Spherical projection of one polytope from a light source.
    Project {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        z: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Congruence of two cones or projections written by `cone`/`project`.
    Congruent {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Cones)]
        mode: ModeArg,
    },
    /// Decide whether the two polytopes of a scene coincide.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Cones)]
        mode: ModeArg,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decide whether the two balls of a scene coincide.
    Balls {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Recover a segment from a `zx,zy,alpha` angle CSV.
    Recover {
        #[arg(long)]
        angles: PathBuf,
        /// Radius of the circle carrying the light sources.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Report on the circular versus elliptical cone fixture.
    Counterexample,
    /// Export polytopes, and optionally cones and projection arcs, as OBJ.
    ExportObj {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        z: Option<String>,
    },
}

struct Output {
    text: String,
    code: u8,
}

fn ok(value: Value) -> Output {
    Output {
        text: serde_json::to_string_pretty(&value).expect("JSON value serialises"),
        code: 0,
    }
}

fn verdict_code(kind: VerdictKind) -> u8 {
    match kind {
        VerdictKind::Equal => 0,
        VerdictKind::Distinct => EXIT_DISTINCT,
        VerdictKind::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn verdict_output(v: &Verdict) -> Output {
    Output {
        code: verdict_code(v.kind),
        ..ok(v.to_json())
    }
}

fn witness_json(w: &Option<CongruenceWitness>) -> Value {
    match w {
        Some(w) => json!({
            "congruent": true,
            "permutation": w.permutation,
            "map": w.map.matrix().row_iter().map(|row| row.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
            "determinant": w.map.determinant(),
            "residual": w.residual,
        }),
        None => json!({ "congruent": false }),
    }
}

fn tolerance(tol: Option<f64>) -> Result<Tolerance> {
    match tol {
        None => Ok(Tolerance::default()),
        Some(t) => {
            let d = Tolerance::default();
            Ok(Tolerance::new(t, t, d.residual_max.max(100.0 * t))?)
        }
    }
}

fn polytope_of(scene: &Scene, index: usize) -> Result<&polycone::polytope::Polytope> {
    scene
        .polytopes
        .get(index)
        .with_context(|| format!("scene has no polytope {index}"))
}

fn run(cli: Cli) -> Result<Output> {
    let tol = tolerance(cli.tol)?;
    match cli.command {
        Command::Gen {
            seed,
            dim,
            points,
            radius_cap,
            r,
            kind,
            shift,
        } => {
            let reach = if matches!(kind, PairKind::Translate) { radius_cap + shift } else { radius_cap };
            if reach >= r {
                bail!("bodies would not fit strictly inside the sphere");
            }
            let p = random_polytope(seed, dim, points, radius_cap, &tol)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
            let q = match kind {
                PairKind::Random => random_polytope(seed.wrapping_add(1), dim, points, radius_cap, &tol)?,
                PairKind::Equal => p.clone(),
                PairKind::Translate => p.translated(&(random_unit(&mut rng, dim) * shift), &tol)?,
                PairKind::Rotate => p.transformed(&random_orthogonal(&mut rng, dim, true), &tol)?,
            };
            let scene = Scene::new(r, vec![p, q], vec![])?;
            Ok(Output {
                text: scene.to_json(),
                code: 0,
            })
        }
        Command::Cone { scene, z, index } => {
            let scene = read_scene(&scene, &tol)?;
            let cone = support_cone(&parse_point(&z)?, polytope_of(&scene, index)?, &tol)?;
            Ok(ok(serde_json::to_value(ConeFile::from(&cone))?))
        }
        Command::Project { scene, z, index } => {
            let scene = read_scene(&scene, &tol)?;
            let proj = spherical_projection(&parse_point(&z)?, polytope_of(&scene, index)?, scene.r, &tol)?;
            Ok(ok(serde_json::to_value(ProjectionFile::from(&proj))?))
        }
        Command::Congruent { a, b, mode } => {
            let witness = match mode {
                ModeArg::Cones => {
                    let a = read_json::<ConeFile>(&a)?.into_cone()?;
                    let b = read_json::<ConeFile>(&b)?.into_cone()?;
                    cone_congruent(&a, &b, &tol)?
                }
                ModeArg::Projections => {
                    let a = read_json::<ProjectionFile>(&a)?.into_projection()?;
                    let b = read_json::<ProjectionFile>(&b)?.into_projection()?;
                    spherical_congruent(&a, &b, &tol)?
                }
            };
            let code = if witness.is_some() { 0 } else { EXIT_DISTINCT };
            Ok(Output {
                code,
                ..ok(witness_json(&witness))
            })
        }
        Command::Verify {
            scene,
            mode,
            samples,
            seed,
        } => {
            let scene = read_scene(&scene, &tol)?;
            if samples == 0 {
                bail!("--samples must be positive");
            }
            if scene.polytopes.len() != 2 {
                bail!("verify needs a scene with exactly two polytopes, found {}", scene.polytopes.len());
            }
            let v = verify_pair(&scene.polytopes[0], &scene.polytopes[1], scene.r, mode.into(), samples, seed, &tol);
            Ok(verdict_output(&v))
        }
        Command::Balls { scene } => {
            let scene = read_scene(&scene, &tol)?;
            if scene.balls.len() != 2 {
                bail!("balls needs a scene with exactly two balls, found {}", scene.balls.len());
            }
            Ok(verdict_output(&verify_balls(&scene.balls[0], &scene.balls[1], scene.r, &tol)))
        }
        Command::Recover { angles, r, seed } => {
            let samples = read_angles(&angles)?;
            let fit = recover_segment(&samples, &CirclePlane::standard(r), seed)?;
            Ok(ok(json!({
                "x": coords(&fit.x),
                "y": coords(&fit.y),
                "residual": fit.residual,
            })))
        }
        Command::Counterexample => Ok(ok(serde_json::to_value(counterexample_report(&tol)?)?)),
        Command::ExportObj { scene, z } => {
            let scene = read_scene(&scene, &tol)?;
            let z = z.as_deref().map(parse_point).transpose()?;
            Ok(Output {
                text: obj::export(&scene.polytopes, scene.r, z.as_ref(), &tol)?,
                code: 0,
            })
        }
    }
}

fn main() -> ExitCode {
    // Clap exits with 2 on usage errors, which is the "distinct" code here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let out = cli.out.clone();
    let result = run(cli).and_then(|output| {
        match &out {
            Some(path) => std::fs::write(path, &output.text).with_context(|| format!("cannot write {}", path.display()))?,
            None => println!("{}", output.text),
        }
        Ok(output.code)
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
