mod campaign;
mod config;
mod parse;
mod report;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rug::Float;
use twistlab_core::catalog::catalog;
use twistlab_core::extraction::{extract_euler, ExtractionSpec};
use twistlab_core::invariants;
use twistlab_core::kronecker::{tau_quality, tau_search, TauSearchSpec, DEFAULT_TAU_BOUND};
use twistlab_core::mellin::{mellin_smoothing_check, MellinOptions};
use twistlab_core::mp::{fmt_real, ratio, Cx, Prec};
use twistlab_core::probe::{theorem2_probe, vertical_grid};
use twistlab_core::twists::{gk_identity_check, sum_lemma_check, twist_decomposition_check, Method};

use crate::report::Row;

#[derive(Parser)]
#[command(name = "twistlab", version, about = "Checks for linear twists of degree-2 L-functions")]
struct Cli {
    /// Working precision in bits.
    #[arg(long, global = true, default_value_t = 256)]
    precision: Prec,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the gamma-factor invariants of a catalog entry.
    Invariants { name: String },
    /// Run one identity check and print its CSV row.
    Check {
        #[command(subcommand)]
        which: CheckCmd,
    },
    /// Build the expansion tables R_nu, V_nu, A_{mu,nu}, Q_nu.
    Expansion {
        #[arg(long)]
        name: String,
        #[arg(long)]
        nu_max: usize,
        #[arg(long, value_enum, default_value = "csv")]
        emit: Emit,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find tau with |p^{-i tau} - eps_p| < 1/k for every p | q.
    TauSearch {
        #[arg(long)]
        q: u64,
        /// Targets as fractions of a turn, one per prime divisor in increasing
        /// order: `0,1/3` means eps_2 = 1, eps_3 = e(1/3).
        #[arg(long, allow_hyphen_values = true)]
        eps: String,
        #[arg(long)]
        k: u64,
        #[arg(long, default_value_t = DEFAULT_TAU_BOUND)]
        bound: f64,
    },
    /// Recover c(p^m) by averaging shifted twist sums over the torus.
    ExtractEuler {
        #[arg(long)]
        name: String,
        #[arg(long)]
        p: u64,
        #[arg(long)]
        m: usize,
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        k: u64,
        /// Square-free modulus; the conductor by default.
        #[arg(long)]
        q: Option<u64>,
    },
    /// Main-term defect of the twisted functional equation along a vertical line.
    ProbeTheorem2 {
        #[arg(long)]
        name: String,
        #[arg(long)]
        alpha: String,
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        t_max: f64,
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        #[arg(long, default_value_t = 6)]
        points: usize,
    },
    /// Run the checks listed in a config file and write CSV and summary reports.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        /// Report path prefix; `<out>.csv` and `<out>.txt` are written.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    name: String,
    /// Evaluation point: `re,im` or `a+bi`.
    #[arg(long, allow_hyphen_values = true)]
    s: String,
    /// Sum every series directly with this many terms.
    #[arg(long)]
    direct: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    residual_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    tail_tol: f64,
}

impl Common {
    fn method(&self) -> Method {
        self.direct.map_or(Method::Auto, Method::Direct)
    }
}

#[derive(Subcommand)]
enum CheckCmd {
    SumLemma {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        q: u64,
    },
    TwistDecomp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        p: u64,
    },
    Gk {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        q: u64,
        #[arg(long, default_value = "0")]
        tau: String,
    },
    Mellin {
        #[arg(long)]
        name: String,
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        x: String,
        #[arg(long)]
        quad_points: Option<usize>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        allow_degenerate: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Cache,
}

pub fn fmt_point(s: &Cx) -> String {
    let (re, im) = s.to_f64();
    format!("{re}{im:+}i")
}

fn fmt_cx(z: &Cx, digits: usize) -> String {
    let im = fmt_real(&z.im, digits);
    let im = if im.starts_with('-') { im } else { format!("+{im}") };
    format!("{}{im}i", fmt_real(&z.re, digits))
}

fn print_rows(prec: Prec, what: &str, rows: &[Row]) -> bool {
    println!("{}", report::header(what, prec));
    println!("{}", report::CSV_HEADER);
    for r in rows {
        println!("{}", r.csv());
    }
    rows.iter().all(|r| r.pass)
}

fn run_check(prec: Prec, which: CheckCmd) -> Result<bool> {
    let row = match which {
        CheckCmd::SumLemma { common, q } => {
            let f = catalog(&common.name, prec)?;
            let s = parse::complex(&common.s, prec)?;
            let o = sum_lemma_check(&f, q, &s, common.method())?;
            Row::from_outcome(&o, common.residual_tol, common.tail_tol)
        }
        CheckCmd::TwistDecomp { common, p } => {
            let f = catalog(&common.name, prec)?;
            let s = parse::complex(&common.s, prec)?;
            let o = twist_decomposition_check(&f, p, &s, common.method())?;
            Row::from_outcome(&o, common.residual_tol, common.tail_tol)
        }
        CheckCmd::Gk { common, q, tau } => {
            let f = catalog(&common.name, prec)?;
            let s = parse::complex(&common.s, prec)?;
            let tau = parse::real(&tau, prec)?;
            let o = gk_identity_check(&f, q, &s, &tau, common.method())?;
            Row::from_outcome(&o, common.residual_tol, common.tail_tol)
        }
        CheckCmd::Mellin { name, s, alpha, x, quad_points, tol, allow_degenerate } => {
            let f = catalog(&name, prec)?;
            let s = parse::complex(&s, prec)?;
            let (an, ad) = parse::fraction(&alpha)?;
            let a = ratio(prec, an, ad as i64);
            let xf = parse::real(&x, prec)?;
            let opts = MellinOptions { quad_points, tol: tol / 10.0, allow_degenerate };
            let o = mellin_smoothing_check(&f, &s, &a, &xf, &opts)?;
            eprintln!(
                "integral {} | smoothed {} | doubling change {:.3e} | |Im w| <= {:.1} | step {:.4e}",
                fmt_cx(&o.integral, 20),
                fmt_cx(&o.smoothed, 20),
                o.doubling_change,
                o.range.1,
                o.step
            );
            let mut row = Row::new("mellin", &name, ad, &s);
            row.n_terms = o.nodes as u64;
            row.residual = o.residual;
            row.tail_radius = o.tail_bound + o.discretization_bound;
            row.pass = o.residual < tol && o.doubling_change < tol;
            row
        }
    };
    Ok(print_rows(prec, "check", &[row]))
}

fn run_invariants(prec: Prec, name: &str) -> Result<bool> {
    let f = catalog(name, prec)?;
    let inv = invariants(&f.gamma)?;
    let d = 30;
    println!("{}", report::header("invariants", prec));
    println!("name = {name}");
    println!("degree = {}", fmt_real(&inv.degree, d));
    println!("conductor = {}", fmt_real(&inv.conductor, d));
    println!("omega = {}", fmt_cx(&inv.omega_f, d));
    println!("xi = {}", fmt_cx(&inv.xi, d));
    println!("eta = {}", fmt_real(&inv.eta, d));
    println!("theta = {}", fmt_real(&inv.theta, d));
    println!("omega_star = {}", fmt_cx(&inv.omega_star, d));
    println!("tau = {}", fmt_real(&inv.tau, d));
    Ok(true)
}

fn run_expansion(prec: Prec, name: &str, nu_max: usize, emit: Emit, out: Option<PathBuf>) -> Result<bool> {
    let f = catalog(name, prec)?;
    let t = twistlab_core::expansion::ExpansionTables::build(&f.gamma, nu_max)?;
    let text = match emit {
        Emit::Cache => t.to_cache_string(),
        Emit::Csv => {
            let digits = twistlab_core::mp::roundtrip_digits(prec);
            let mut s = format!("{}\npoly,index,k,re,im\n", report::header("expansion", prec));
            let mut block = |label: &str, index: usize, p: &twistlab_core::expansion::PolyC| {
                for k in 0..=p.degree().unwrap_or(0) {
                    let c = p.coeff(k);
                    s.push_str(&format!("{label},{index},{k},{},{}\n", fmt_real(&c.re, digits), fmt_real(&c.im, digits)));
                }
            };
            for (i, p) in t.r.iter().enumerate() {
                block("R", i + 1, p);
            }
            for (i, p) in t.v.iter().enumerate() {
                block("V", i + 1, p);
            }
            for (i, p) in t.q.iter().enumerate() {
                block("Q", i, p);
            }
            s
        }
    };
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(true)
}

fn run_tau(prec: Prec, q: u64, eps: &str, k: u64, bound: f64) -> Result<bool> {
    let targets: Vec<Cx> = parse::list(eps)
        .into_iter()
        .map(|e| {
            let (n, d) = parse::fraction(e)?;
            Ok(Cx::e_frac(prec, n, d as i64))
        })
        .collect::<Result<_>>()?;
    let mut spec = TauSearchSpec::new(q, targets, k)?;
    spec.bound = bound;
    let w = tau_search(&spec, prec)?;
    let check: Vec<(u64, Cx)> = spec.targets.iter().map(|(p, e)| (*p, e.with_prec(prec + 64))).collect();
    let quality = tau_quality(&check, &Float::with_val(prec + 64, &w.tau)).to_f64();
    let ok = quality < 1.0 / k as f64;
    println!("{}", report::header("tau-search", prec));
    println!("tau = {}", fmt_real(&w.tau, 30));
    println!("quality = {quality:.6e}");
    println!("bound_1_over_k = {:.6e}", 1.0 / k as f64);
    println!("pass = {ok}");
    Ok(ok)
}

fn run_extract(prec: Prec, name: &str, spec: ExtractionSpec) -> Result<bool> {
    let f = catalog(name, prec)?;
    let r = extract_euler(&f, &spec, prec)?;
    println!("{}", report::header("extract-euler", prec));
    println!("name = {name}");
    println!("q = {}", r.q);
    println!("p = {}", spec.p);
    println!("m = {}", spec.m);
    println!("grid_points = {}", r.grid_points);
    println!("average = {}", fmt_cx(&r.average, 20));
    println!("estimate = {}", fmt_cx(&r.estimate, 20));
    println!("truth = {}", fmt_cx(&r.truth, 20));
    println!("error = {:.6e}", r.error);
    println!("max_tau = {:.6e}", r.max_tau);
    println!("worst_tau_quality = {:.6e}", r.worst_quality);
    Ok(true)
}

fn run_probe(prec: Prec, name: &str, alpha: &str, k: usize, t_max: f64, sigma: f64, points: usize) -> Result<bool> {
    let f = catalog(name, prec)?;
    let alpha = parse::fraction(alpha)?;
    let grid = vertical_grid(sigma, t_max, points, prec);
    let rep = theorem2_probe(&f, alpha, k, &grid)?;
    println!("{}", report::header("probe-theorem2", prec));
    println!("# alpha = {}/{}, K = {k}", alpha.0, alpha.1);
    println!("s_re,s_im,defect_re,defect_im,abs_defect,telescoping,radius");
    for pt in &rep.points {
        let (sr, si) = pt.s.to_f64();
        println!(
            "{sr},{si},{},{},{:.6e},{:.6e},{:.6e}",
            fmt_real(&pt.defect.re, 20),
            fmt_real(&pt.defect.im, 20),
            pt.defect.abs().to_f64(),
            pt.telescoping,
            pt.radius
        );
    }
    match rep.growth_slope {
        Some(v) => println!("# growth_slope = {v:.6}"),
        None => println!("# growth_slope = n/a"),
    }
    println!("# calibrated_bound = {:.6}", rep.calibrated_bound);
    let limit = 2f64.powi(-(prec as i32) / 2);
    Ok(rep.points.iter().all(|pt| pt.telescoping <= limit))
}

fn run_campaign(config: &PathBuf, out: Option<PathBuf>) -> Result<bool> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let cfg = config::parse_config(&text).with_context(|| format!("config {}", config.display()))?;
    let rep = campaign::run(&cfg)?;
    let prefix = out.or(cfg.output.clone()).unwrap_or_else(|| PathBuf::from("twistlab-report"));
    let csv = report::csv(&rep.rows, cfg.precision_bits);
    let summary = report::summary(&rep.rows, &rep.notes, cfg.precision_bits);
    let with_ext = |ext: &str| {
        let mut p = prefix.clone().into_os_string();
        p.push(ext);
        PathBuf::from(p)
    };
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(with_ext(".csv"), csv)?;
    std::fs::write(with_ext(".txt"), &summary)?;
    print!("{summary}");
    Ok(rep.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let prec = cli.precision;
    if !(64..=4096).contains(&prec) {
        bail!("precision {prec} outside 64..=4096");
    }
    match cli.command {
        Command::Invariants { name } => run_invariants(prec, &name),
        Command::Check { which } => run_check(prec, which),
        Command::Expansion { name, nu_max, emit, out } => run_expansion(prec, &name, nu_max, emit, out),
        Command::TauSearch { q, eps, k, bound } => run_tau(prec, q, &eps, k, bound),
        Command::ExtractEuler { name, p, m, s, grid, k, q } => {
            let s = parse::complex(&s, prec)?;
            run_extract(prec, &name, ExtractionSpec { p, m, s, grid, k, q, method: Method::Auto })
        }
        Command::ProbeTheorem2 { name, alpha, k, t_max, sigma, points } => {
            run_probe(prec, &name, &alpha, k, t_max, sigma, points)
        }
        Command::Campaign { config, out } => run_campaign(&config, out),
    }
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
