use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfsim::analysis::{cross_entropy_fidelity, porter_thomas_check_with, sample_ideal, MIN_PT_QUBITS};
use sfsim::blocked::{schedule_gates, simulate_blocked, DEFAULT_TILE};
use sfsim::circuit::{emit_circuit, generate_random_circuit, parse_circuit, Circuit, GridLayout, RuleSet};
use sfsim::config::RunConfig;
use sfsim::dense::{read_state, simulate_dense_capped, write_state};
use sfsim::partition::{find_scheme_with, CreditModel, PartitionOptions, PartitionScheme};
use sfsim::path::{amplitude_by_split, run_task1, build_combine_plan, CombineMode};
use sfsim::repro::{run_oracle_suite, run_repro, TableId};

#[derive(Parser)]
#[command(name = "sfsim", version, about = "Partitioned simulation of grid random circuits")]
struct Cli {
    /// key = value config file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Config override, key=value (repeatable)
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Dense,
    Blocked,
    Partitioned,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gather,
    Regrouped,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Emit a random circuit in text form
    Generate {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        depth: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rules: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find a partition scheme and write it as JSON
    Partition {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, default_value_t = 64)]
        budget_exp: u32,
        #[arg(long)]
        boundary_row: Option<usize>,
        /// Count every single-qubit slot as blocking implicit decomposition
        #[arg(long)]
        structural: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the full output state
    Simulate {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long, value_enum, default_value_t = Engine::Partitioned)]
        engine: Engine,
        #[arg(long)]
        scheme: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Gather)]
        mode: Mode,
        #[arg(long)]
        local_qubits: Option<usize>,
        /// Dump the blocked gate schedule as JSON
        #[arg(long)]
        schedule_out: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Single amplitude <x|U|0>
    Amplitude {
        #[arg(long)]
        circuit: PathBuf,
        /// Basis index in hex
        #[arg(long)]
        x: String,
        #[arg(long)]
        split_layer: Option<usize>,
    },
    /// Communication plan for a scheme, as JSON
    Plan {
        #[arg(long)]
        scheme: PathBuf,
        #[arg(long)]
        workers: Option<u64>,
        #[arg(long)]
        node_exp: Option<u32>,
    },
    /// Porter-Thomas and cross-entropy statistics of a state file
    Stats {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
        report: ReportFormat,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Reproduce a table: t2, t3, t6, slice65 or all
    Repro {
        #[arg(default_value = "all")]
        table: String,
        #[arg(long)]
        json: bool,
    },
    /// Randomized comparison of all engines with the dense simulator
    Oracle {
        #[arg(long, default_value_t = 16)]
        max_qubits: usize,
        #[arg(long)]
        json: bool,
    },
}

fn read_circuit(path: &Path) -> Result<Circuit> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_circuit(&text, false)?)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_env()?.with_overrides(cli.overrides.iter().map(String::as_str))?;
    cfg.check_memory()?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global()?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli)?;
    match cli.cmd {
        Cmd::Generate { rows, cols, depth, seed, rules, out } => {
            let rules = match rules {
                Some(r) => r.parse::<RuleSet>()?,
                None => cfg.rules,
            };
            let c = generate_random_circuit(GridLayout::new(rows, cols), depth, seed.unwrap_or(cfg.seed), rules)?;
            write_text(out.as_deref(), &emit_circuit(&c))?;
        }
        Cmd::Partition { circuit, budget_exp, boundary_row, structural, out } => {
            let c = read_circuit(&circuit)?;
            let opts = PartitionOptions {
                boundary_row,
                credit: if structural { CreditModel::Structural } else { CreditModel::Exact },
                ..PartitionOptions::default()
            };
            let s = find_scheme_with(&c, budget_exp, &opts)?;
            write_text(out.as_deref(), &(serde_json::to_string_pretty(&s)? + "\n"))?;
        }
        Cmd::Simulate { circuit, engine, scheme, mode, local_qubits, schedule_out, out } => {
            let c = read_circuit(&circuit)?;
            let n_local = local_qubits.unwrap_or(cfg.n_local).min(c.n_qubits());
            if let Some(p) = &schedule_out {
                let sched = schedule_gates(&c, n_local)?;
                std::fs::write(p, serde_json::to_string_pretty(&sched)?)?;
            }
            let state = match engine {
                Engine::Dense => simulate_dense_capped(&c, None, cfg.qubit_cap)?,
                Engine::Blocked => {
                    if c.n_qubits() > cfg.qubit_cap {
                        bail!("{} qubits exceed the cap of {}", c.n_qubits(), cfg.qubit_cap);
                    }
                    simulate_blocked(&c, n_local)?
                }
                Engine::Partitioned => {
                    let s: PartitionScheme = match &scheme {
                        Some(p) => read_json(p)?,
                        None => find_scheme_with(&c, 64, &PartitionOptions::default())?,
                    };
                    let mode = match mode {
                        Mode::Gather => CombineMode::Gather,
                        Mode::Regrouped => CombineMode::Regrouped,
                    };
                    let mut params = cfg.sim_params();
                    params.n_local = n_local;
                    params.tile = if cfg.tile == 0 { DEFAULT_TILE } else { cfg.tile };
                    run_task1(&c, &s, mode, &params)?
                }
            };
            let f = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            let mut w = BufWriter::new(f);
            write_state(&mut w, &state)?;
            w.flush()?;
        }
        Cmd::Amplitude { circuit, x, split_layer } => {
            let c = read_circuit(&circuit)?;
            let x = u64::from_str_radix(x.trim_start_matches("0x"), 16).context("index is not hex")?;
            let split = split_layer.unwrap_or(c.depth() / 2);
            let a = amplitude_by_split(&c, x, split)?;
            println!("{}", serde_json::json!({ "x": x, "split_layer": split, "re": a.re, "im": a.im, "probability": a.norm_sqr() }));
        }
        Cmd::Plan { scheme, workers, node_exp } => {
            let s: PartitionScheme = read_json(&scheme)?;
            let p = build_combine_plan(&s, workers.unwrap_or(cfg.workers as u64), node_exp.unwrap_or(cfg.node_memory_exponent))?;
            println!("{}", serde_json::to_string_pretty(&p)?);
        }
        Cmd::Stats { state, report, samples } => {
            let f = File::open(&state).with_context(|| format!("opening {}", state.display()))?;
            let s = read_state(BufReader::new(f))?;
            if s.n_qubits() < MIN_PT_QUBITS {
                bail!("statistics need at least {MIN_PT_QUBITS} qubits, state has {}", s.n_qubits());
            }
            let pt = porter_thomas_check_with(&s, cfg.bin_width)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let draws = sample_ideal(&s, samples.max(1), &mut rng)?;
            let fidelity = cross_entropy_fidelity(&s, &draws)?;
            match report {
                ReportFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "n_qubits": pt.n_qubits,
                        "norm": s.norm_sqr(),
                        "ks_distance": pt.ks_distance,
                        "degenerate": pt.degenerate,
                        "zero_fraction": pt.zero_fraction,
                        "fidelity_estimate": fidelity,
                        "samples": draws.len(),
                        "histogram": pt.histogram,
                    }))?
                ),
                ReportFormat::Csv => {
                    println!("# ks_distance={} fidelity_estimate={} zero_fraction={}", pt.ks_distance, fidelity, pt.zero_fraction);
                    println!("lo,hi,mass");
                    for b in &pt.histogram {
                        println!("{},{},{}", b.lo, b.hi, b.mass);
                    }
                }
            }
        }
        Cmd::Repro { table, json } => {
            let ids = if table.eq_ignore_ascii_case("all") {
                vec![TableId::T2, TableId::T3, TableId::T6, TableId::Slice65]
            } else {
                vec![table.parse::<TableId>()?]
            };
            let reports = ids.into_iter().map(|id| run_repro(id, &cfg)).collect::<sfsim::Result<Vec<_>>>()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            } else {
                reports.iter().for_each(|r| print!("{}", r.to_text()));
            }
            return Ok(reports.iter().all(|r| r.pass));
        }
        Cmd::Oracle { max_qubits, json } => {
            let r = run_oracle_suite(max_qubits, &cfg)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&r)?);
            } else {
                for c in &r.cases {
                    let tag = if c.pass { "ok  " } else { "FAIL" };
                    println!("{tag} {:<22} {}x{} depth {:>2}  max err {:.2e}", c.kind, c.rows, c.cols, c.depth, c.max_error);
                }
                println!("{} cases, worst {:.2e}, {:.1}s: {}", r.cases.len(), r.worst_error, r.seconds, if r.pass { "PASS" } else { "FAIL" });
            }
            return Ok(r.pass);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
