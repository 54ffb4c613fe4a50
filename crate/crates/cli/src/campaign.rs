//! Expands a [`Config`] into independent jobs, runs them on a worker pool and
//! folds the rows back in job order.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use rug::Float;
use twistlab_core::arith::prime_divisors;
use twistlab_core::catalog::catalog;
use twistlab_core::expansion::{asymptotic_residual_c, compute_c, compute_v_all, exp_series_coeffs, ExpansionTables};
use twistlab_core::extraction::{extract_euler, ExtractionSpec};
use twistlab_core::kronecker::{tau_quality, tau_search, TauSearchSpec};
use twistlab_core::mellin::{mellin_smoothing_check, MellinOptions};
use twistlab_core::mp::{ratio, Cx, Prec};
use twistlab_core::probe::{theorem2_probe, vertical_grid};
use twistlab_core::twists::{gk_identity_check, kluyver_check, sum_lemma_check, twist_decomposition_check, Method};
use twistlab_core::{h_invariant, invariants};

use crate::config::{Check, Config};
use crate::report::Row;

/// Rows and notes produced by one job.
#[derive(Default)]
pub struct JobOut {
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
}

type JobFn = Box<dyn Fn(&Ctx) -> Result<JobOut> + Send + Sync>;

struct Job {
    check: &'static str,
    label: String,
    run: JobFn,
}

pub struct Ctx {
    pub prec: Prec,
    pub cache_dir: PathBuf,
}

pub struct CampaignReport {
    pub rows: Vec<Row>,
    pub notes: Vec<String>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn one(row: Row) -> Result<JobOut> {
    Ok(JobOut { rows: vec![row], notes: Vec::new() })
}

fn zero(prec: Prec) -> Cx {
    Cx::zero(prec)
}

fn job(check: &'static str, label: String, run: impl Fn(&Ctx) -> Result<JobOut> + Send + Sync + 'static) -> Job {
    Job { check, label, run: Box::new(run) }
}

fn jobs_for(check: &Check) -> Vec<Job> {
    let mut out = Vec::new();
    match check.clone() {
        Check::Invariants { functions, tol } => {
            for name in functions {
                out.push(job("invariants", name.clone(), move |ctx| invariant_row(&name, tol, ctx.prec)));
            }
        }
        Check::Kluyver { bound, tol } => out.push(job("kluyver", "-".into(), move |ctx| {
            let dev = kluyver_check(bound, ctx.prec);
            let mut row = Row::new("kluyver", "-", bound, &zero(ctx.prec));
            row.residual = dev;
            row.pass = dev < tol;
            one(row)
        })),
        Check::SumLemma { pairs, points, residual_tol, tail_tol } => {
            for (name, q) in pairs {
                for s in &points {
                    let (name, s) = (name.clone(), s.clone());
                    out.push(job("sum-lemma", name.clone(), move |ctx| {
                        let f = catalog(&name, ctx.prec)?;
                        let o = sum_lemma_check(&f, q, &s.with_prec(ctx.prec), Method::Auto)?;
                        one(Row::from_outcome(&o, residual_tol, tail_tol))
                    }));
                }
            }
        }
        Check::TwistDecomp { functions, primes, points, residual_tol, tail_tol } => {
            for name in functions {
                for &p in &primes {
                    for s in &points {
                        let (name, s) = (name.clone(), s.clone());
                        out.push(job("twist-decomp", name.clone(), move |ctx| {
                            let f = catalog(&name, ctx.prec)?;
                            let o = twist_decomposition_check(&f, p, &s.with_prec(ctx.prec), Method::Auto)?;
                            one(Row::from_outcome(&o, residual_tol, tail_tol))
                        }));
                    }
                }
            }
        }
        Check::Gk { pairs, points, heights, residual_tol, tail_tol } => {
            for (name, q) in pairs {
                for s in &points {
                    for tau in &heights {
                        let (name, s, tau) = (name.clone(), s.clone(), tau.clone());
                        out.push(job("gk", name.clone(), move |ctx| {
                            let f = catalog(&name, ctx.prec)?;
                            let tau = Float::with_val(ctx.prec, &tau);
                            let o = gk_identity_check(&f, q, &s.with_prec(ctx.prec), &tau, Method::Auto)?;
                            one(Row::from_outcome(&o, residual_tol, tail_tol))
                        }));
                    }
                }
            }
        }
        Check::Expansion { functions, nu_max, tol } => {
            for name in functions {
                out.push(job("expansion", name.clone(), move |ctx| expansion_row(&name, nu_max, tol, ctx)));
            }
        }
        Check::Decay { functions, m_max } => {
            out.push(job("decay", "ctable".into(), move |ctx| ctable_decay_row(m_max, ctx.prec)));
            for name in functions {
                out.push(job("decay", name.clone(), move |ctx| expansion_decay_row(&name, m_max, ctx.prec)));
            }
        }
        Check::TauSearch { moduli, k, shifts, denominator } => {
            for q in moduli {
                for &shift in &shifts {
                    out.push(job("tau-search", format!("q={q}"), move |ctx| tau_row(q, k, shift, denominator, ctx.prec)));
                }
            }
        }
        Check::ExtractEuler { cases, point, grid, k, tol, compare_k, compare_slack } => {
            for (name, p, m) in cases {
                let (n1, pt1) = (name.clone(), point.clone());
                out.push(job("extract-euler", name.clone(), move |ctx| {
                    let r = extraction(&n1, p, m, &pt1, grid, k, ctx.prec)?;
                    let mut row = Row::new("extract-euler", &n1, p, &pt1);
                    row.n_terms = r.grid_points as u64;
                    row.residual = r.error;
                    row.tail_radius = r.worst_quality;
                    row.pass = r.error < tol;
                    let (er, ei) = r.estimate.to_f64();
                    let (tr, ti) = r.truth.to_f64();
                    let note = format!(
                        "extract-euler {n1} p={p} m={m} k={k}: estimate {er:.6}{ei:+.6}i, truth {tr:.6}{ti:+.6}i"
                    );
                    Ok(JobOut { rows: vec![row], notes: vec![note] })
                }));
                if let (Some((k_lo, k_hi)), 1) = (compare_k, m) {
                    let pt2 = point.clone();
                    out.push(job("extract-euler-k", name.clone(), move |ctx| {
                        let lo = extraction(&name, p, m, &pt2, grid, k_lo, ctx.prec)?.error;
                        let hi = extraction(&name, p, m, &pt2, grid, k_hi, ctx.prec)?.error;
                        let mut row = Row::new("extract-euler-k", &name, p, &pt2);
                        row.n_terms = k_hi;
                        row.residual = (hi - lo).max(0.0);
                        row.pass = hi <= lo + compare_slack;
                        let note = format!("extract-euler-k {name} p={p}: error {hi:.3e} at k={k_hi}, {lo:.3e} at k={k_lo}");
                        Ok(JobOut { rows: vec![row], notes: vec![note] })
                    }));
                }
            }
        }
        Check::Probe { function, alphas, ks, sigma, t_max, grid_points, tol } => {
            for alpha in alphas {
                for &kk in &ks {
                    let name = function.clone();
                    out.push(job("probe", name.clone(), move |ctx| {
                        let f = catalog(&name, ctx.prec)?;
                        let grid = vertical_grid(sigma, t_max, grid_points, ctx.prec);
                        let rep = theorem2_probe(&f, alpha, kk, &grid)?;
                        let rows = rep
                            .points
                            .iter()
                            .map(|pt| {
                                let mut row = Row::new("probe", &name, alpha.1, &pt.s);
                                row.n_terms = kk as u64;
                                row.residual = pt.telescoping;
                                row.tail_radius = pt.radius;
                                row.pass = pt.telescoping <= tol;
                                row
                            })
                            .collect();
                        let slope = rep.growth_slope.map_or("n/a".to_string(), |v| format!("{v:.3}"));
                        let note = format!(
                            "probe {name} alpha={}/{} K={kk}: growth slope {slope}, calibrated bound 2K + A = {:.3}",
                            alpha.0, alpha.1, rep.calibrated_bound
                        );
                        Ok(JobOut { rows, notes: vec![note] })
                    }));
                }
            }
        }
        Check::Mellin { function, points, alpha, xs, tol } => {
            for s in points {
                for &x in &xs {
                    let (name, s) = (function.clone(), s.clone());
                    out.push(job("mellin", name.clone(), move |ctx| mellin_row(&name, &s, alpha, x, tol, ctx.prec)));
                }
            }
        }
    }
    out
}

fn invariant_row(name: &str, tol: f64, prec: Prec) -> Result<JobOut> {
    let f = catalog(name, prec)?;
    let inv = invariants(&f.gamma)?;
    let q = f.conductor()?;
    let h0 = h_invariant(&f.gamma, 0).dist(&Cx::from_real(inv.degree.clone())).to_f64();
    let h1 = h_invariant(&f.gamma, 1).dist(&inv.xi).to_f64();
    let dq = Float::with_val(prec, &inv.conductor - q).abs().to_f64();
    let mut row = Row::new("invariants", name, q, &zero(prec));
    row.residual = h0.max(h1).max(dq);
    row.pass = row.residual < tol;
    let (wr, wi) = inv.omega_star.to_f64();
    let note = format!("invariants {name}: d = {:.6}, q = {q}, omega* = {wr:.6}{wi:+.6}i", inv.degree.to_f64());
    Ok(JobOut { rows: vec![row], notes: vec![note] })
}

pub fn cache_path(dir: &Path, name: &str, nu_max: usize, prec: Prec) -> PathBuf {
    dir.join(format!("{name}-n{nu_max}-p{prec}.exptable"))
}

/// Loads the tables from the cache directory, building and storing them on a miss.
pub fn cached_tables(name: &str, nu_max: usize, ctx: &Ctx) -> Result<ExpansionTables> {
    let f = catalog(name, ctx.prec)?;
    let path = cache_path(&ctx.cache_dir, name, nu_max, ctx.prec);
    if path.exists() {
        return ExpansionTables::load_cache(&path, &f.gamma).with_context(|| format!("reading {}", path.display()));
    }
    let t = ExpansionTables::build(&f.gamma, nu_max)?;
    std::fs::create_dir_all(&ctx.cache_dir).with_context(|| format!("creating {}", ctx.cache_dir.display()))?;
    // write then rename so concurrent readers never see a partial file
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    t.write_cache(&tmp)?;
    std::fs::rename(&tmp, &path)?;
    Ok(t)
}

fn expansion_row(name: &str, nu_max: usize, tol: f64, ctx: &Ctx) -> Result<JobOut> {
    let t = cached_tables(name, nu_max, ctx)?;
    let text = t.to_cache_string();
    let back = ExpansionTables::from_cache_str(&text, &t.gamma)?;
    let roundtrip = back.to_cache_string() == text;
    let lit = compute_v_all(&t.r, nu_max, nu_max)?;
    let rec = exp_series_coeffs(&t.r, nu_max, nu_max);
    let v_dev = lit.iter().zip(&rec).map(|(a, b)| a.max_dist(b).to_f64()).fold(0.0, f64::max);
    let degrees = (1..=nu_max).all(|nu| t.r[nu - 1].degree() == Some(nu + 1) && t.q[nu].degree() == Some(2 * nu));
    let mut row = Row::new("expansion", name, nu_max as u64, &zero(ctx.prec));
    row.n_terms = nu_max as u64;
    row.residual = v_dev;
    row.pass = v_dev < tol && degrees && roundtrip && t.ctable.is_unitriangular() && t.ctable.is_integral();
    let mut notes = Vec::new();
    if !degrees {
        notes.push(format!("expansion {name}: degree pattern deg R = nu + 1, deg Q = 2 nu violated"));
    }
    if !roundtrip {
        notes.push(format!("expansion {name}: cache round trip not exact"));
    }
    Ok(JobOut { rows: vec![row], notes })
}

/// Smallest `(residual(w) / residual(2w)) / 2^M` over `M <= m_max`, and the
/// largest residual at `2w`.
fn decay_summary(mut pairs: impl FnMut(usize) -> Result<Vec<(f64, f64)>>, m_max: usize) -> Result<(f64, f64)> {
    let mut worst_ratio = f64::INFINITY;
    let mut worst_res = 0f64;
    for m in 1..=m_max {
        let need = f64::from(1u32 << (m + 1)) / 2.0;
        for (r1, r2) in pairs(m)? {
            worst_ratio = worst_ratio.min(r1 / r2 / need);
            worst_res = worst_res.max(r2);
        }
    }
    Ok((worst_ratio, worst_res))
}

fn ctable_decay_row(m_max: usize, prec: Prec) -> Result<JobOut> {
    let ct = compute_c(m_max + 2)?;
    let w = Cx::from_f64(prec, 500.0, 300.0);
    let (ratio_min, res) = decay_summary(
        |m| {
            (1..=m)
                .map(|mu| {
                    let r1 = asymptotic_residual_c(&ct, mu, m, &w)?.to_f64();
                    let r2 = asymptotic_residual_c(&ct, mu, m, &w.scale_i64(2))?.to_f64();
                    Ok((r1, r2))
                })
                .collect()
        },
        m_max,
    )?;
    let mut row = Row::new("decay", "ctable", m_max as u64, &w);
    row.residual = res;
    row.pass = ratio_min >= 1.0;
    Ok(JobOut { rows: vec![row], notes: vec![format!("decay ctable: min ratio / 2^M = {ratio_min:.3}")] })
}

fn expansion_decay_row(name: &str, m_max: usize, prec: Prec) -> Result<JobOut> {
    let f = catalog(name, prec)?;
    let t = ExpansionTables::build(&f.gamma, m_max + 2)?;
    let s = Cx::from_f64(prec, 2.0, 1.0);
    let w = Cx::from_f64(prec, 2e4, 1e4);
    let w2 = w.scale_i64(2);
    let (ratio_min, res) = decay_summary(
        |m| {
            Ok(vec![
                (
                    t.asymptotic_residual_exp_v(m, &s, &w)?.to_f64(),
                    t.asymptotic_residual_exp_v(m, &s, &w2)?.to_f64(),
                ),
                (t.assembly_residual(m, &s, &w)?.to_f64(), t.assembly_residual(m, &s, &w2)?.to_f64()),
            ])
        },
        m_max,
    )?;
    let mut row = Row::new("decay", name, m_max as u64, &s);
    row.residual = res;
    row.pass = ratio_min >= 1.0;
    Ok(JobOut { rows: vec![row], notes: vec![format!("decay {name}: min ratio / 2^M = {ratio_min:.3}")] })
}

fn tau_row(q: u64, k: u64, shift: i64, den: i64, prec: Prec) -> Result<JobOut> {
    let r = prime_divisors(q).len();
    let eps: Vec<Cx> = (0..r).map(|j| Cx::e_frac(prec, shift * (j as i64 + 1), den)).collect();
    let spec = TauSearchSpec::new(q, eps, k)?;
    let w = tau_search(&spec, prec)?;
    // never trust the search: recheck with extra bits
    let targets: Vec<(u64, Cx)> = spec.targets.iter().map(|(p, e)| (*p, e.with_prec(prec + 64))).collect();
    let quality = tau_quality(&targets, &Float::with_val(prec + 64, &w.tau)).to_f64();
    let mut row = Row::new("tau-search", "-", q, &Cx::new(Float::new(prec), w.tau.clone()));
    row.n_terms = k;
    row.residual = quality;
    row.pass = quality < 1.0 / k as f64 && w.tau > 0 && w.tau.to_f64() <= spec.bound;
    one(row)
}

fn extraction(
    name: &str,
    p: u64,
    m: usize,
    s: &Cx,
    grid: usize,
    k: u64,
    prec: Prec,
) -> Result<twistlab_core::extraction::ExtractionResult> {
    let f = catalog(name, prec)?;
    let spec = ExtractionSpec { p, m, s: s.with_prec(prec), grid, k, q: None, method: Method::Auto };
    Ok(extract_euler(&f, &spec, prec)?)
}

fn mellin_row(name: &str, s: &Cx, alpha: (i64, u64), x: f64, tol: f64, prec: Prec) -> Result<JobOut> {
    let f = catalog(name, prec)?;
    let a = ratio(prec, alpha.0, alpha.1 as i64);
    let xf = Float::with_val(prec, x);
    let opts = MellinOptions { tol: tol / 10.0, ..MellinOptions::default() };
    let o = mellin_smoothing_check(&f, &s.with_prec(prec), &a, &xf, &opts)?;
    let mut row = Row::new("mellin", name, alpha.1, s);
    row.n_terms = o.nodes as u64;
    row.residual = o.residual;
    row.tail_radius = o.tail_bound + o.discretization_bound;
    row.pass = o.residual < tol && o.doubling_change < tol;
    let note = format!(
        "mellin {name} s={} alpha={}/{} X={x}: residual {:.3e}, doubling change {:.3e}, range |Im w| <= {:.1}",
        crate::fmt_point(s),
        alpha.0,
        alpha.1,
        o.residual,
        o.doubling_change,
        o.range.1
    );
    Ok(JobOut { rows: vec![row], notes: vec![note] })
}

pub fn run(cfg: &Config) -> Result<CampaignReport> {
    let jobs: Vec<Job> = cfg.checks.iter().flat_map(jobs_for).collect();
    let ctx = Ctx { prec: cfg.precision_bits, cache_dir: cfg.cache_dir.clone() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    let outs: Vec<JobOut> = pool.install(|| {
        jobs.par_iter()
            .map(|j| {
                (j.run)(&ctx).unwrap_or_else(|e| {
                    let mut row = Row::new(j.check, &j.label, 0, &zero(ctx.prec));
                    row.residual = f64::INFINITY;
                    row.tail_radius = f64::INFINITY;
                    JobOut { rows: vec![row], notes: vec![format!("{} {}: error: {e:#}", j.check, j.label)] }
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for o in outs {
        rows.extend(o.rows);
        notes.extend(o.notes);
    }
    Ok(CampaignReport { rows, notes })
}
