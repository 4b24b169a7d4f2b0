//! `specstab`: meshes, eigensolves, perturbation studies, the Poisson study
//! and the verification battery from the command line.
//!
//! Exit codes: 0 when every assertion passes, 1 on an assertion or numerical
//! failure, 2 on a configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use spectral_stability::harness::{
    mf_on_mesh, poisson_csv, run_perturbation_study, run_poisson_study, study_csv, to_json, verify_suite,
    write_output, Metadata, StudySetup,
};
use spectral_stability::spectral::solve_eigs;
use spectral_stability::{Error, StudyConfig};

#[derive(Parser)]
#[command(name = "specstab", version, about = "Spectral stability under domain perturbation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Writes the reference mesh of a config as text, plus CSV or JSON on request.
    Mesh(Common),
    /// Solves the reference eigenproblem and writes the lowest eigenpairs.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Number of eigenpairs; defaults to the config's eigen count or 10.
        #[arg(long)]
        count: Option<usize>,
    },
    /// Runs the perturbation study over the config's epsilon list.
    Study(Common),
    /// Runs the Poisson stability study.
    Poisson(Common),
    /// Runs the operator identity and property battery.
    Verify(Common),
    /// Evaluates the concentration modulus of the config's source on its mesh.
    Mf {
        #[command(flatten)]
        common: Common,
        /// Area budget.
        #[arg(long)]
        area: f64,
    },
}

#[derive(Args)]
struct Common {
    /// TOML study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config's.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restricts output to one format; both are written by default.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Run(other.to_string()),
        }
    }
}

struct Context {
    config: StudyConfig,
    out: PathBuf,
    format: Option<Format>,
}

impl Context {
    fn load(common: &Common) -> Result<Self, Failure> {
        let path = common
            .config
            .as_ref()
            .ok_or_else(|| Failure::Config("--config is required for this command".into()))?;
        let mut config = StudyConfig::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        if let Some(seed) = common.seed {
            config.study.seed = seed;
        }
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
        Ok(Self {
            config,
            out,
            format: common.format,
        })
    }

    fn wants(&self, f: Format) -> bool {
        self.format.is_none_or(|g| g == f)
    }

    fn write(&self, suffix: &str, ext: &str, contents: &str) -> Result<(), Failure> {
        let stem = format!("{}{suffix}", self.config.output.stem);
        let path = write_output(Path::new(&self.out), &stem, ext, contents)?;
        println!("wrote {}", path.display());
        Ok(())
    }
}

fn report(assertions: &[spectral_stability::harness::Assertion]) -> bool {
    let mut ok = true;
    for a in assertions {
        println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
        ok &= a.passed;
    }
    ok
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::Mesh(common) => {
            let ctx = Context::load(&common)?;
            let setup = StudySetup::new(&ctx.config)?;
            let m = &setup.mesh;
            ctx.write("_mesh", "txt", &m.to_text())?;
            match ctx.format {
                Some(Format::Csv) => {
                    let mut s = String::from("kind,i,a,b,c\n");
                    for (i, p) in m.nodes.iter().enumerate() {
                        s.push_str(&format!("node,{i},{:.17e},{:.17e},\n", p[0], p[1]));
                    }
                    for (i, t) in m.triangles.iter().enumerate() {
                        s.push_str(&format!("triangle,{i},{},{},{}\n", t[0], t[1], t[2]));
                    }
                    ctx.write("_mesh", "csv", &s)?;
                }
                Some(Format::Json) => {
                    let doc = json!({
                        "nodes": m.nodes,
                        "triangles": m.triangles,
                        "free_dofs": setup.free_dofs(),
                    });
                    ctx.write("_mesh", "json", &doc.to_string())?;
                }
                None => {}
            }
            println!("{} nodes, {} triangles, {} free DOFs", m.nodes.len(), m.triangles.len(), setup.free_dofs());
            Ok(true)
        }
        Command::Solve { common, count } => {
            let ctx = Context::load(&common)?;
            let setup = StudySetup::new(&ctx.config)?;
            let k = count.or(ctx.config.study.eigen_count).unwrap_or(10);
            let sys = solve_eigs(&setup.base.pencil(), k)?;
            let vectors: Vec<Vec<f64>> = (0..sys.len())
                .map(|j| setup.dofs.extend(&sys.vectors.column(j).into_owned()).to_vec())
                .collect();
            if ctx.wants(Format::Csv) {
                let mut s = String::from("index,value,residual\n");
                for (i, (v, r)) in sys.values.iter().zip(&sys.residuals).enumerate() {
                    s.push_str(&format!("{i},{v:.12e},{r:.3e}\n"));
                }
                ctx.write("_eigen", "csv", &s)?;
            }
            if ctx.wants(Format::Json) {
                let doc = json!({
                    "values": sys.values,
                    "residuals": sys.residuals,
                    "nodal_vectors": vectors,
                });
                ctx.write("_eigen", "json", &doc.to_string())?;
            }
            for (i, v) in sys.values.iter().enumerate() {
                println!("lambda_{} = {v:.10}", i + 1);
            }
            Ok(true)
        }
        Command::Study(common) => {
            let ctx = Context::load(&common)?;
            let t = Instant::now();
            let out = run_perturbation_study(&ctx.config)?;
            let meta = Metadata::new("study", &ctx.config, t.elapsed().as_secs_f64())?;
            if ctx.wants(Format::Csv) {
                ctx.write("", "csv", &study_csv(&out.records))?;
            }
            if ctx.wants(Format::Json) {
                ctx.write("", "json", &to_json(&meta, &ctx.config, &out)?)?;
            }
            if out.exploratory {
                println!("exploratory run: slopes are reported, not asserted");
            }
            for f in &out.fits {
                if let Some(s) = &f.fit {
                    println!("fit {}: slope {:.4} (target {:.4}, R² {:.4})", f.name, s.slope, f.target, s.r_squared);
                }
            }
            Ok(report(&out.assertions))
        }
        Command::Poisson(common) => {
            let ctx = Context::load(&common)?;
            let t = Instant::now();
            let out = run_poisson_study(&ctx.config)?;
            let meta = Metadata::new("poisson", &ctx.config, t.elapsed().as_secs_f64())?;
            if ctx.wants(Format::Csv) {
                ctx.write("_poisson", "csv", &poisson_csv(&out.records))?;
            }
            if ctx.wants(Format::Json) {
                ctx.write("_poisson", "json", &to_json(&meta, &ctx.config, &out)?)?;
            }
            Ok(report(&out.assertions))
        }
        Command::Verify(common) => {
            let seed = match (&common.config, common.seed) {
                (_, Some(s)) => s,
                (Some(p), None) => StudyConfig::load(p).map_err(Failure::from)?.study.seed,
                (None, None) => 0,
            };
            let rep = verify_suite(seed);
            let doc = serde_json::to_string_pretty(&rep).map_err(|e| Failure::Run(e.to_string()))?;
            if let Some(dir) = &common.out {
                let path = write_output(dir, "verify", "json", &doc)?;
                println!("wrote {}", path.display());
            } else if common.format == Some(Format::Json) {
                println!("{doc}");
            }
            Ok(report(&rep.checks))
        }
        Command::Mf { common, area } => {
            if area.is_nan() || area < 0.0 {
                return Err(Failure::Config(format!("area must be nonnegative, got {area}")));
            }
            let ctx = Context::load(&common)?;
            let setup = StudySetup::new(&ctx.config)?;
            let src = &ctx.config.poisson.source;
            let v = mf_on_mesh(&setup.mesh, |x| src.eval(x), area)?;
            if ctx.format == Some(Format::Json) {
                println!("{}", json!({ "area": area, "mf": v }));
            } else {
                println!("{v:.12e}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
    }
}
