use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use excursion_core::estimator::{perimeter_hat, select_m_detailed};
use excursion_core::experiments::{self, clt_analysis, ExperimentConfig, ExperimentName, Scale};
use excursion_core::gkf::{
    expected_perimeter_affine, expected_perimeter_isotropic, second_spectral_moment, MaternModel, SpectralMoment,
};
use excursion_core::io::{read_grf1, read_pbm, write_grf1, write_pbm};
use excursion_core::proxy::marching_squares_length;
use excursion_core::sim::{AnisotropyTransform, FieldSampler};
use excursion_core::stats::shapiro_wilk;
use excursion_core::{threshold, topology, Error, GridSpec};

/// Perimeter estimation for excursion sets of pixelated 2D random fields.
#[derive(Parser)]
#[command(name = "excursion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate Matérn fields on [-t, t]^2 and write them as GRF1 files.
    Simulate {
        #[arg(long)]
        t: f64,
        /// Pixels per side.
        #[arg(long = "M")]
        size: usize,
        #[arg(long, default_value_t = 2.5)]
        nu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma1: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        reps: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write the excursion set at this level as `field_<rep>.pbm`.
        #[arg(long)]
        level: Option<f64>,
    },
    /// Estimate the perimeter of a PBM raster; prints `p,m,estimate`.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        p: u32,
        /// Block size, or `auto` for the topology-based rule.
        #[arg(long, default_value = "auto")]
        m: String,
        /// One line per block size 1..M-1.
        #[arg(long)]
        all_m: bool,
    },
    /// Count components and holes of a PBM raster; prints `n_cc,n_holes,euler`.
    Topology {
        #[arg(long)]
        input: PathBuf,
    },
    /// Length of the level curve of a GRF1 field (marching squares).
    Proxy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        u: f64,
    },
    /// Expected perimeter of the excursion set above u.
    Expect {
        #[arg(long)]
        area: f64,
        #[arg(long)]
        u: f64,
        /// Matérn smoothness; λ2 defaults to ν/(ν-1).
        #[arg(long, conflicts_with = "lambda2")]
        nu: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long, requires = "sigma2")]
        sigma1: Option<f64>,
        #[arg(long, requires = "sigma1")]
        sigma2: Option<f64>,
    },
    /// Adaptive block size of a PBM raster; prints `m,n_cc,n_holes,constant`.
    Mselect {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a simulation study and write per-replication CSV.
    ///
    /// Config files hold `key = value` lines. Keys: nu, sigma1, sigma2,
    /// theta (list; `pi/4` style allowed), t, M, n (schedule range `a..b`),
    /// levels (list), m (integer, `auto` or `schedule`), m_grid (list or
    /// `a..=b`), reps, seed, out. Flags override file values.
    Experiment {
        #[arg(long)]
        name: ExperimentName,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
        scale: ScaleArg,
        /// Per-replication CSV; group statistics go to `<out>.summary.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra `key=value` overrides, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Normality test on one CSV column; prints `n,W,p`.
    Stats {
        #[arg(long, value_enum, default_value_t = TestArg::Sw)]
        test: TestArg,
        #[arg(long)]
        input: PathBuf,
        /// Column name or zero-based index; defaults to the last column.
        #[arg(long)]
        column: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Sw,
}

fn open_pbm(path: &Path) -> anyhow::Result<excursion_core::BinaryField> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_pbm(BufReader::new(file))?)
}

fn simulate(
    spec: GridSpec,
    nu: f64,
    transform: AnisotropyTransform,
    seed: u64,
    reps: u64,
    out_dir: &Path,
    level: Option<f64>,
) -> anyhow::Result<()> {
    let sampler = FieldSampler::new(spec, MaternModel::new(nu)?, transform)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for rep in 0..reps {
        let field = sampler.sample(seed, rep);
        let path = out_dir.join(format!("field_{rep}.grf1"));
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        write_grf1(&field, &mut w)?;
        w.flush()?;
        if let Some(u) = level {
            let path = out_dir.join(format!("field_{rep}.pbm"));
            let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
            write_pbm(&threshold(&field, u), &mut w)?;
            w.flush()?;
        }
    }
    let report = sampler.report();
    eprintln!("embedding torus {}x{} (factor {})", report.size, report.size, report.factor);
    Ok(())
}

fn estimate(input: &Path, p: u32, m: &str, all_m: bool) -> anyhow::Result<()> {
    let bin = open_pbm(input)?;
    let sizes: Vec<usize> = if all_m {
        (1..bin.spec().size()).collect()
    } else if m == "auto" {
        vec![select_m_detailed(&bin)?.m]
    } else {
        vec![m.parse().map_err(|_| Error::Parse(format!("--m expects an integer or `auto`, got {m:?}")))?]
    };
    let mut out = io::stdout().lock();
    writeln!(out, "p,m,estimate")?;
    for m in sizes {
        writeln!(out, "{p},{m},{}", perimeter_hat(&bin, m, p)?.value)?;
    }
    Ok(())
}

fn expect(area: f64, u: f64, nu: Option<f64>, lambda2: Option<f64>, sigmas: Option<(f64, f64)>) -> anyhow::Result<f64> {
    let l2 = match lambda2 {
        Some(v) => SpectralMoment::new(v)?,
        None => second_spectral_moment(&MaternModel::new(nu.unwrap_or(2.5))?)?,
    };
    Ok(match sigmas {
        Some((s1, s2)) => expected_perimeter_affine(area, u, l2, s1, s2)?,
        None => expected_perimeter_isotropic(area, u, l2)?,
    })
}

fn experiment(
    name: ExperimentName,
    config: Option<&Path>,
    scale: ScaleArg,
    out: Option<PathBuf>,
    overrides: &[String],
    reps: Option<usize>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let scale = match scale {
        ScaleArg::Desk => Scale::Desk,
        ScaleArg::Paper => Scale::Paper,
    };
    let mut cfg = ExperimentConfig::preset(name, scale);
    if let Some(path) = config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_text(&text)?;
    }
    for kv in overrides {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")).into());
        };
        cfg.set(k, v)?;
    }
    if let Some(r) = reps {
        cfg.replications = r;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.output = out;
    }
    cfg.validate()?;

    let result = experiments::run(&cfg)?;
    match &cfg.output {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
            result.write_csv(&mut w)?;
            w.flush()?;
            let mut summary_path = path.clone().into_os_string();
            summary_path.push(".summary.csv");
            let summary_path = PathBuf::from(summary_path);
            let mut w = BufWriter::new(
                File::create(&summary_path).with_context(|| format!("creating {}", summary_path.display()))?,
            );
            result.write_summary_csv(&mut w)?;
            w.flush()?;
        }
        None => result.write_csv(io::stdout().lock())?,
    }
    if name == ExperimentName::Clt {
        let a = clt_analysis(&result, &cfg)?;
        for k in 0..a.levels.len() {
            eprintln!(
                "u={}: mean {:.3}, expected {:.3}, Shapiro-Wilk p {:.4}",
                a.levels[k], a.means[k], a.expected[k], a.marginal[k].1
            );
        }
        eprintln!("mean squared Mahalanobis distance {:.3} (df {})", a.mahalanobis_mean, a.levels.len());
    }
    Ok(())
}

fn read_column(path: &Path, column: Option<&str>) -> anyhow::Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).peekable();
    let first: Vec<&str> = match lines.peek() {
        Some(l) => l.split(',').map(str::trim).collect(),
        None => bail!(Error::Parse(format!("{} has no data", path.display()))),
    };
    let has_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let index = match column {
        Some(c) => match c.parse::<usize>() {
            Ok(k) => k,
            Err(_) => {
                first.iter().position(|f| *f == c).ok_or_else(|| Error::Parse(format!("no column named {c:?}")))?
            }
        },
        None => first.len() - 1,
    };
    if has_header {
        lines.next();
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let field = line.split(',').nth(index).map(str::trim).unwrap_or("");
            field
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("data line {}: bad value {field:?} in column {index}", k + 1)).into())
        })
        .collect()
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { t, size, nu, sigma1, sigma2, theta, seed, reps, out_dir, level } => simulate(
            GridSpec::new(t, size)?,
            nu,
            AnisotropyTransform::new(sigma1, sigma2, theta)?,
            seed,
            reps,
            &out_dir,
            level,
        ),
        Command::Estimate { input, p, m, all_m } => estimate(&input, p, &m, all_m),
        Command::Topology { input } => {
            let topo = topology(&open_pbm(&input)?);
            println!("n_cc,n_holes,euler");
            println!("{},{},{}", topo.components, topo.holes, topo.euler());
            Ok(())
        }
        Command::Proxy { input, u } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let field = read_grf1(BufReader::new(file))?;
            println!("{}", marching_squares_length(&field, u));
            Ok(())
        }
        Command::Expect { area, u, nu, lambda2, sigma1, sigma2 } => {
            println!("{}", expect(area, u, nu, lambda2, sigma1.zip(sigma2))?);
            Ok(())
        }
        Command::Mselect { input } => {
            let choice = select_m_detailed(&open_pbm(&input)?)?;
            println!("m,n_cc,n_holes,constant");
            println!("{},{},{},{}", choice.m, choice.topology.components, choice.topology.holes, choice.constant);
            Ok(())
        }
        Command::Experiment { name, config, scale, out, overrides, reps, seed } => {
            experiment(name, config.as_deref(), scale, out, &overrides, reps, seed)
        }
        Command::Stats { test: TestArg::Sw, input, column } => {
            let sample = read_column(&input, column.as_deref())?;
            let (w, p) = shapiro_wilk(&sample)?;
            println!("n,W,p");
            println!("{},{w},{p}", sample.len());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_)) => 1,
        Some(e) if e.is_numerical() => 3,
        Some(_) => 2,
        None if err.downcast_ref::<io::Error>().is_some() => 1,
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("EXCURSION_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
