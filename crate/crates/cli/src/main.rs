//! `tabletop`: validate, solve, probe and render predicate-program scenes,
//! or generate them with a chat-completion agent.
//!
//! Exit codes: 0 on success, 1 when the program or scene is rejected (a
//! report is printed), 2 on usage, parse and I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use tabletop::agent::{
    extract_program, replay, run_offline, run_session, scene_file, AgentConfig, AgentError,
    ScriptedClient, SessionEnv, SessionTranscript,
};
use tabletop::catalog::{builtin_catalog, load_catalog, Catalog};
use tabletop::dsl::{parse_program, validate_grammar};
use tabletop::feedback::{grammar_report, HttpVqaClient, Issue, VqaClient};
use tabletop::physical::GridParams;
use tabletop::physics::{ProcessBackend, QuasiStatic, SimulationBackend};
use tabletop::pipeline::{solve_text, SolveConfig};
use tabletop::render::render_svg;
use tabletop::scene::SceneFile;
use tabletop::spatial::Bounds2D;
use tabletop::stability::{
    estimate_p_fail, optimize_instability, sample_dataset, PerturbationSpec, PerturbationVector,
    DIM,
};

#[derive(Parser)]
#[command(
    name = "tabletop",
    version,
    about = "Tabletop scene layout from relational predicates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a program's syntax and grammar; prints a grammar report.
    ///
    /// Program files are read like agent replies: surrounding prose and code
    /// fences are ignored and missing commas between entries are repaired.
    Validate {
        program: PathBuf,
        #[command(flatten)]
        catalog: CatalogArgs,
    },
    /// Solve a program into a scene file.
    Solve {
        program: PathBuf,
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Scene file to write on success.
        #[arg(long)]
        out: PathBuf,
        /// Also write the failure report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Estimate the probability that perturbing one object topples the scene.
    Stability {
        scene: PathBuf,
        object: String,
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        physics: PhysicsArgs,
        /// Perturbation samples.
        #[arg(long, default_value_t = PerturbationSpec::DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Eleven comma-separated perturbation scales (position xyz, rotation
        /// xyz, COM shift xyz, friction, mass); defaults derive from the asset.
        #[arg(long)]
        theta: Option<String>,
        /// Run this many rounds of instability optimization.
        #[arg(long)]
        optimize: Option<usize>,
        /// Scene file for the optimized state (with --optimize).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a scene file as a top-down SVG.
    Render {
        scene: PathBuf,
        #[command(flatten)]
        catalog: CatalogArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a scene from a prompt with the agent loop.
    Generate {
        prompt: String,
        #[command(flatten)]
        catalog: CatalogArgs,
        #[command(flatten)]
        solve: SolveArgs,
        #[command(flatten)]
        agent: AgentArgs,
        /// Scene file to write.
        #[arg(long)]
        out: PathBuf,
        /// Transcript (JSON lines) to write.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CatalogArgs {
    /// Asset manifest; the bundled primitive catalog when omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Retrieval similarity threshold.
    #[arg(long)]
    threshold: Option<f64>,
}

impl CatalogArgs {
    fn load(&self) -> Result<Catalog, String> {
        let mut cat = match &self.catalog {
            Some(p) => load_catalog(p).map_err(|e| e.to_string())?,
            None => builtin_catalog(),
        };
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(format!("--threshold must be in [0, 1], got {t}"));
            }
            cat.retrieval_threshold = t;
        }
        Ok(cat)
    }
}

#[derive(Args)]
struct PhysicsArgs {
    /// Voxel size, meters.
    #[arg(long, default_value_t = tabletop::physical::TABLETOP_RESOLUTION)]
    resolution: f64,
    /// External physics engine command speaking the JSON-lines protocol;
    /// the built-in quasi-static backend when omitted.
    #[arg(long)]
    physics_cmd: Option<String>,
}

impl PhysicsArgs {
    fn backend(&self) -> Result<Box<dyn SimulationBackend>, String> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(format!(
                "--resolution must be positive, got {}",
                self.resolution
            ));
        }
        Ok(match &self.physics_cmd {
            Some(cmd) => {
                let mut parts = cmd.split_whitespace();
                let program = parts.next().ok_or("--physics-cmd is empty")?;
                Box::new(ProcessBackend::new(program, parts))
            }
            None => Box::new(QuasiStatic::new(self.resolution)),
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Table extent and height: min_x,max_x,min_y,max_y,top_z.
    #[arg(long, default_value = "-0.5,0.5,-0.5,0.5,0.0")]
    bounds: BoundsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    physics: PhysicsArgs,
    /// Bottom layers that form an object's bottom surface.
    #[arg(long, default_value_t = 1)]
    kbottom: usize,
    /// Voxels searched below the bottom surface for contacts.
    #[arg(long, default_value_t = 1)]
    ksearch: usize,
}

impl SolveArgs {
    fn config(&self) -> Result<SolveConfig, String> {
        if self.kbottom == 0 || self.ksearch == 0 {
            return Err("--kbottom and --ksearch must be at least 1".into());
        }
        Ok(SolveConfig {
            seed: self.seed,
            grid: GridParams {
                resolution: self.physics.resolution,
                k_bottom: self.kbottom,
                k_search: self.ksearch,
                ..Default::default()
            },
            ..Default::default()
        })
    }
}

#[derive(Clone)]
struct BoundsArg(Bounds2D);

impl FromStr for BoundsArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()?;
        let [min_x, max_x, min_y, max_y, top_z] = v[..] else {
            return Err(format!(
                "expected 5 comma-separated numbers, got {}",
                v.len()
            ));
        };
        Bounds2D::new(min_x, max_x, min_y, max_y, top_z)
            .map(BoundsArg)
            .map_err(|_| "bounds need min < max on both axes".to_string())
    }
}

#[derive(Args)]
struct AgentArgs {
    /// Chat-completions base or full URL.
    #[arg(long, default_value = "https://api.openai.com/v1")]
    endpoint: String,
    #[arg(long, default_value = "o4-mini")]
    model: String,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value_t = 5)]
    max_retries: usize,
    /// Rounds of "add more objects" after the first success.
    #[arg(long, default_value_t = 1)]
    enrich: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    /// Request timeout, seconds.
    #[arg(long, default_value_t = 120.0)]
    timeout: f64,
    /// Perturbation samples per object in success reports.
    #[arg(long, default_value_t = PerturbationSpec::DEFAULT_SAMPLES)]
    stability_samples: usize,
    /// Solve a program file instead of calling the endpoint.
    #[arg(long, requires = "program")]
    offline: bool,
    /// Program file for --offline.
    #[arg(long)]
    program: Option<PathBuf>,
    /// JSON array of canned replies used instead of the endpoint.
    #[arg(long, conflicts_with_all = ["offline", "replay"])]
    script: Option<PathBuf>,
    /// Re-run a recorded transcript.
    #[arg(long, conflicts_with = "offline")]
    replay: Option<PathBuf>,
    /// Score success reports with this VQA chat-completions URL.
    #[arg(long)]
    vqa_endpoint: Option<String>,
    #[arg(long)]
    vqa_model: Option<String>,
}

enum Failure {
    /// Rejected input; the report has been printed.
    Rejected,
    Usage(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

impl From<&str> for Failure {
    fn from(s: &str) -> Self {
        Failure::Usage(s.to_string())
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn load_scene(path: &Path) -> Result<SceneFile, String> {
    SceneFile::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { program, catalog } => validate(&program, &catalog),
        Command::Solve {
            program,
            catalog,
            solve,
            out,
            report,
        } => cmd_solve(&program, &catalog, &solve, &out, report.as_deref()),
        Command::Stability {
            scene,
            object,
            catalog,
            physics,
            samples,
            seed,
            theta,
            optimize,
            out,
        } => cmd_stability(
            &scene,
            &object,
            &catalog,
            &physics,
            samples,
            seed,
            theta.as_deref(),
            optimize,
            out.as_deref(),
        ),
        Command::Render {
            scene,
            catalog,
            out,
        } => cmd_render(&scene, &catalog, &out),
        Command::Generate {
            prompt,
            catalog,
            solve,
            agent,
            out,
            transcript,
        } => cmd_generate(
            &prompt,
            &catalog,
            &solve,
            &agent,
            &out,
            transcript.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn validate(program: &Path, catalog: &CatalogArgs) -> Result<(), Failure> {
    let cat = catalog.load()?;
    let text = extract_program(&read(program)?);
    match parse_program(&text) {
        Err(e) => {
            print!(
                "{}",
                grammar_report(vec![Issue::from_syntax(&e)], None).to_json()
            );
            Err(Failure::Usage(e.to_string()))
        }
        Ok(p) => {
            let issues: Vec<Issue> = validate_grammar(&p, &cat)
                .into_iter()
                .map(|issue| Issue::Grammar { issue })
                .collect();
            let clean = issues.is_empty();
            print!("{}", grammar_report(issues, Some(&p)).to_json());
            if clean {
                Ok(())
            } else {
                Err(Failure::Rejected)
            }
        }
    }
}

fn cmd_solve(
    program: &Path,
    catalog: &CatalogArgs,
    args: &SolveArgs,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<(), Failure> {
    let cat = catalog.load()?;
    let config = args.config()?;
    let backend = args.physics.backend()?;
    let text = extract_program(&read(program)?);
    match solve_text(&text, &cat, args.bounds.0, backend.as_ref(), &config) {
        Ok(solved) => {
            write(out, &scene_file(&solved.scene, &text, &config).to_json())?;
            eprintln!(
                "solved {} objects into {}",
                solved.scene.len(),
                out.display()
            );
            Ok(())
        }
        Err(err) => {
            let json = err.report(&cat, config.grid.resolution).to_json();
            print!("{json}");
            if let Some(p) = report_path {
                write(p, &json)?;
            }
            if err.is_syntax() {
                Err(Failure::Usage(err.to_string()))
            } else {
                Err(Failure::Rejected)
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_stability(
    scene_path: &Path,
    object: &str,
    catalog: &CatalogArgs,
    physics: &PhysicsArgs,
    samples: usize,
    seed: u64,
    theta: Option<&str>,
    optimize: Option<usize>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if samples == 0 {
        return Err("--samples must be at least 1".into());
    }
    let cat = catalog.load()?;
    let backend = physics.backend()?;
    let file = load_scene(scene_path)?;
    let scene = file.to_scene();
    let placed = scene
        .get(object)
        .ok_or_else(|| format!("no object `{object}` in {}", scene_path.display()))?;
    let asset = cat
        .get(&placed.asset_id)
        .ok_or_else(|| format!("asset `{}` is not in the catalog", placed.asset_id))?;
    let mut spec = PerturbationSpec::for_asset(asset).with_samples(samples);
    if let Some(t) = theta {
        let v: Vec<f64> = t
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("--theta `{p}`: {e}"))
            })
            .collect::<Result<_, _>>()?;
        spec.theta = v
            .try_into()
            .map_err(|v: Vec<f64>| format!("--theta needs {DIM} values, got {}", v.len()))?;
    }
    spec.validate().map_err(|e| e.to_string())?;

    let json = match optimize {
        None => {
            let data = sample_dataset(&scene, &cat, object, &spec, backend.as_ref(), seed)
                .map_err(|e| e.to_string())?;
            let est = estimate_p_fail(&PerturbationVector::zero(), &data, &spec)
                .map_err(|e| e.to_string())?;
            serde_json::to_value(est).expect("estimates serialize")
        }
        Some(iterations) => {
            let r = optimize_instability(
                &scene,
                &cat,
                object,
                &spec,
                backend.as_ref(),
                iterations,
                seed,
            )
            .map_err(|e| e.to_string())?;
            if let Some(path) = out {
                write(
                    path,
                    &SceneFile::from_scene(&r.scene, file.provenance.clone()).to_json(),
                )?;
            }
            serde_json::json!({
                "initial_p_fail": r.initial_p_fail,
                "final_p_fail": r.final_p_fail,
                "center": r.center.to_array(),
                "trace": r.trace,
            })
        }
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&json).expect("values serialize")
    );
    Ok(())
}

fn cmd_render(scene_path: &Path, catalog: &CatalogArgs, out: &Path) -> Result<(), Failure> {
    let cat = catalog.load()?;
    let scene = load_scene(scene_path)?.to_scene();
    scene.check_assets(&cat).map_err(|e| e.to_string())?;
    write(out, &render_svg(&scene, &cat))?;
    Ok(())
}

fn cmd_generate(
    prompt: &str,
    catalog: &CatalogArgs,
    solve: &SolveArgs,
    args: &AgentArgs,
    out: &Path,
    transcript_path: Option<&Path>,
) -> Result<(), Failure> {
    let cat = catalog.load()?;
    let config = AgentConfig {
        endpoint: args.endpoint.clone(),
        model: args.model.clone(),
        api_key_env: args.api_key_env.clone(),
        max_retries: args.max_retries,
        temperature: args.temperature,
        timeout_secs: args.timeout,
        offline: args.offline,
        enrichment_rounds: args.enrich,
        stability_samples: args.stability_samples,
        solve: solve.config()?,
    };
    if config.stability_samples == 0 {
        return Err("--stability-samples must be at least 1".into());
    }
    let backend = solve.physics.backend()?;
    let vqa = match &args.vqa_endpoint {
        Some(url) => Some(HttpVqaClient {
            endpoint: url.clone(),
            model: args.vqa_model.clone().unwrap_or_else(|| args.model.clone()),
            api_key: std::env::var(&args.api_key_env).ok(),
            timeout: config.timeout(),
        }),
        None => None,
    };
    let idle = ScriptedClient::new(Vec::<String>::new());
    let base = SessionEnv {
        catalog: &cat,
        bounds: solve.bounds.0,
        backend: backend.as_ref(),
        chat: &idle,
        vqa: vqa.as_ref().map(|v| v as &dyn VqaClient),
    };
    let result = if args.offline {
        let program = read(
            args.program
                .as_deref()
                .expect("clap requires --program with --offline"),
        )?;
        run_offline(prompt, &program, &config, base)
    } else if let Some(path) = &args.replay {
        let t = SessionTranscript::load(path).map_err(|e| e.to_string())?;
        replay(&t, &config, base)
    } else if let Some(path) = &args.script {
        let replies: Vec<String> = serde_json::from_str(&read(path)?)
            .map_err(|e| format!("{}: expected a JSON array of strings: {e}", path.display()))?;
        let chat = ScriptedClient::new(replies);
        run_session(
            prompt,
            &config,
            SessionEnv {
                chat: &chat,
                ..base
            },
        )
    } else {
        let chat = config.http_client(false).map_err(|e| e.to_string())?;
        run_session(
            prompt,
            &config,
            SessionEnv {
                chat: &chat,
                ..base
            },
        )
    };

    let save_transcript = |t: &SessionTranscript| -> Result<(), String> {
        match transcript_path {
            Some(p) => write(p, &t.to_jsonl()),
            None => Ok(()),
        }
    };
    match result {
        Ok(outcome) => {
            save_transcript(&outcome.transcript)?;
            write(out, &outcome.scene_file(&config.solve).to_json())?;
            let rounds = outcome.transcript.rounds().count();
            eprintln!(
                "generated {} objects in {rounds} round(s) into {}",
                outcome.scene().len(),
                out.display()
            );
            Ok(())
        }
        Err(AgentError::ExhaustedRetries {
            attempts,
            best_scene,
            transcript,
        }) => {
            save_transcript(&transcript)?;
            if let Some(last) = transcript.rounds().last() {
                print!("{}", last.report.to_json());
            }
            eprintln!(
                "no valid scene after {attempts} attempts (largest partial scene: {} objects)",
                best_scene.map_or(0, |s| s.len())
            );
            Err(Failure::Rejected)
        }
        Err(AgentError::Endpoint {
            message,
            transcript,
        }) => {
            save_transcript(&transcript)?;
            Err(Failure::Usage(format!("endpoint failed: {message}")))
        }
        Err(e) => Err(Failure::Usage(e.to_string())),
    }
}
