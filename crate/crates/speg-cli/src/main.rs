//! Command-line front end for the safety governor.
//!
//! Exit codes: 0 on success, 1 when a check or gate fails, 2 on input or
//! validation errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nalgebra::DVector;

use speg::governor::PenaltyConfig;
use speg::safesets::SafeSetLadder;
use speg::sim::{DisturbanceProfile, NominalControl};
use speg::{acc, governor, oracle, sim, Error, ProblemConfig};

#[derive(Parser)]
#[command(
    name = "speg",
    about = "Safety protection & extension governor for constrained linear systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the safe-set ladder from a problem document and write it as JSON.
    BuildSets {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Govern a single state and print the solution as JSON.
    Govern {
        #[arg(long)]
        ladder: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// State, comma-separated (e.g. "15,0").
        #[arg(long)]
        x: String,
        /// Nominal input, comma-separated (defaults to zero).
        #[arg(long)]
        u_nom: Option<String>,
        /// Dump the assembled QP as JSON to this path.
        #[arg(long)]
        dump_qp: Option<PathBuf>,
    },
    /// Run the governed closed loop and write a CSV trace.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Initial state, comma-separated.
        #[arg(long)]
        x0: String,
        /// Disturbance profile: "constant:<w>", "piecewise:<t>=<w>;<t>=<w>;…",
        /// or "worst-case".
        #[arg(long, default_value = "worst-case")]
        w: String,
        /// Constant nominal input, comma-separated (defaults to zero).
        #[arg(long)]
        u_nom: Option<String>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Rebuild the bundled car-following study: three scenario traces plus
    /// a PASS/FAIL summary.
    ReproduceAcc {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare the one-shot governor against the series route on sampled
    /// states and report agreement and mean wall times.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_)
                | Error::Config(_)
                | Error::Dimension(_)
                | Error::Serde(_)
                | Error::SpectralRadius { .. }
                | Error::NotPositiveDefinite(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::BuildSets { config, out } => cmd_build_sets(&config, &out),
        Command::Govern { ladder, config, x, u_nom, dump_qp } => {
            cmd_govern(&ladder, &config, &x, u_nom.as_deref(), dump_qp.as_deref())
        }
        Command::Simulate { config, out, x0, w, u_nom, steps } => {
            cmd_simulate(&config, &out, &x0, &w, u_nom.as_deref(), steps)
        }
        Command::ReproduceAcc { out_dir } => cmd_reproduce_acc(&out_dir),
        Command::Verify { config, samples, seed } => cmd_verify(&config, samples, seed),
    }
}

fn parse_vector(text: &str, what: &str) -> Result<DVector<f64>, Error> {
    sim::parse_vector(text).map_err(|e| Error::Config(format!("{what}: {e}")))
}

fn load_pair(
    ladder_path: &std::path::Path,
    config_path: &std::path::Path,
) -> Result<(SafeSetLadder, PenaltyConfig), Error> {
    let ladder = SafeSetLadder::from_json(&std::fs::read_to_string(ladder_path)?)?;
    let config = ProblemConfig::load(config_path)?;
    let penalty = config.penalty_for(&ladder)?;
    if penalty.horizon() != ladder.horizon() {
        return Err(Error::Config(format!(
            "config horizon {} does not match ladder horizon {}",
            penalty.horizon(),
            ladder.horizon()
        )));
    }
    Ok((ladder, penalty))
}

fn cmd_build_sets(config: &std::path::Path, out: &std::path::Path) -> Result<ExitCode, Error> {
    let doc = ProblemConfig::load(config)?;
    let (ladder, _) = doc.build()?;
    std::fs::write(out, ladder.to_json()?)?;
    println!(
        "ladder: horizon {}, {} groups, terminal set with {} rows",
        ladder.horizon(),
        ladder.groups().len(),
        ladder.infinite_set().num_rows()
    );
    let mut all_ok = true;
    for (label, ok) in ladder.nesting_report()? {
        println!("  {label}: {}", if ok { "ok" } else { "VIOLATED" });
        all_ok &= ok;
    }
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_govern(
    ladder_path: &std::path::Path,
    config_path: &std::path::Path,
    x_text: &str,
    u_nom_text: Option<&str>,
    dump_qp: Option<&std::path::Path>,
) -> Result<ExitCode, Error> {
    let (ladder, penalty) = load_pair(ladder_path, config_path)?;
    let x = parse_vector(x_text, "state")?;
    let u_nom = match u_nom_text {
        Some(t) => parse_vector(t, "nominal input")?,
        None => DVector::zeros(ladder.system().num_inputs()),
    };
    if let Some(path) = dump_qp {
        let qp = governor::assemble(&ladder, &penalty, &x, &u_nom)?;
        std::fs::write(path, serde_json::to_string_pretty(&qp.debug_json())?)?;
    }
    let solution = governor::govern(&ladder, &penalty, &x, &u_nom)?;
    println!("{}", solution.to_json()?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(
    config_path: &std::path::Path,
    out: &std::path::Path,
    x0_text: &str,
    w_text: &str,
    u_nom_text: Option<&str>,
    steps: usize,
) -> Result<ExitCode, Error> {
    let doc = ProblemConfig::load(config_path)?;
    let (ladder, penalty) = doc.build()?;
    let x0 = parse_vector(x0_text, "initial state")?;
    let profile = DisturbanceProfile::parse(w_text, ladder.system().num_disturbances())?;
    let u_nom = match u_nom_text {
        Some(t) => parse_vector(t, "nominal input")?,
        None => DVector::zeros(ladder.system().num_inputs()),
    };
    let trace =
        sim::run(&ladder, &penalty, x0, &NominalControl::Constant(u_nom), &profile, steps)?;
    std::fs::write(out, trace.to_csv())?;
    let protected = (ladder.horizon() + 1) as i64;
    let protected_steps = trace.steps.iter().filter(|s| s.k_star == protected).count();
    println!(
        "{} steps written to {}; {} protected, first violation {:?}",
        trace.steps.len(),
        out.display(),
        protected_steps,
        trace.first_state_violation()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce_acc(out_dir: &std::path::Path) -> Result<ExitCode, Error> {
    std::fs::create_dir_all(out_dir)?;
    let (ladder, penalty) = acc::build()?;

    let trace1 = acc::run_scenario1(&ladder, &penalty, 100)?;
    let trace2 = acc::run_scenario2(&ladder, &penalty, 8)?;
    let trace3 = acc::run_scenario3(&ladder, &penalty, 60)?;
    std::fs::write(out_dir.join("case1.csv"), trace1.to_csv())?;
    std::fs::write(out_dir.join("case2.csv"), trace2.to_csv())?;
    std::fs::write(out_dir.join("case3.csv"), trace3.to_csv())?;

    let out1 = acc::check_scenario1(&ladder, &trace1);
    let out2 = acc::check_scenario2(&trace2);
    let out3 = acc::check_scenario3(&ladder, &trace3);
    let mut nesting_ok = true;
    for (_, ok) in ladder.nesting_report()? {
        nesting_ok &= ok;
    }

    let mut summary = String::new();
    let mut all_ok = true;
    let mut gate = |name: &str, ok: bool, detail: String| {
        summary.push_str(&format!(
            "{}: {name} ({detail})\n",
            if ok { "PASS" } else { "FAIL" }
        ));
        all_ok &= ok;
    };
    gate(
        "case 1 stays inside the invariant set",
        out1.stayed_inside,
        format!("min margin {:.3e}", out1.min_margin),
    );
    gate(
        "case 1 rides the boundary",
        out1.touched_boundary,
        format!("min margin {:.3e} <= 0.05", out1.min_margin),
    );
    gate("case 2 brakes at -2 for t = 0..6", out2.braking_ok, "|u+2| <= 1e-6".into());
    gate("case 2 depth counts down 5,4,3,2,1,0 then none", out2.k_star_ok, "exact".into());
    gate(
        "case 2 first violation at t = 7 with the closed-form gap",
        out2.first_violation == Some(7) && out2.gap_ok,
        format!("gap {:.12}", out2.gap_at_7),
    );
    gate(
        "case 3 leaves and re-enters the invariant set",
        out3.pass(),
        format!("exit {:?}, recovery {:?}", out3.exit_t, out3.recover_t),
    );
    gate("set nesting", nesting_ok, "containment checks".into());

    print!("{summary}");
    std::fs::write(out_dir.join("summary.txt"), &summary)?;
    Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_verify(config: &std::path::Path, samples: usize, seed: u64) -> Result<ExitCode, Error> {
    let doc = ProblemConfig::load(config)?;
    let (ladder, penalty) = doc.build()?;
    // Sample from the state box padded by 20% of its width per axis.
    let bbox = ladder.step_sets()[0].bounding_box()?;
    let bounds: Vec<(f64, f64)> = bbox
        .iter()
        .map(|(lo, hi)| {
            let pad = 0.2 * (hi - lo);
            (lo - pad, hi + pad)
        })
        .collect();
    let u_nom = DVector::zeros(ladder.system().num_inputs());
    let report = oracle::agreement_report(&ladder, &penalty, &bounds, &u_nom, samples, seed)?;
    println!("{}", report.to_json()?);
    println!("agreement {}/{}", report.matches, report.samples);
    println!(
        "one-shot mean {:.3e} s, series mean {:.3e} s ({:.2}x)",
        report.mean_governor_seconds,
        report.mean_series_seconds,
        report.series_slowdown()
    );
    Ok(if report.all_match() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
