use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use cadlag_rough::calculus::{compose, ito_formula_terms, mixed_bracket_check, rough_bracket};
use cadlag_rough::drivers::{brownian_ensemble, forward_lift_jump_path, simulate_brownian, simulate_compound_poisson};
use cadlag_rough::linalg::norm;
use cadlag_rough::norms::{chen_residual, lq_norm};
use cadlag_rough::rng::{par_members, tag};
use cadlag_rough::rsde::{align, picard_solve, sample_data, solve, stability_sweep, PicardOptions, SdeData};
use cadlag_rough::sewing::{convergence_rate, skeleton_sum, time_controls, FnGerm, RateReport};
use cadlag_rough::stats::{log2_slope, mean, std_error};
use cadlag_rough::stochint::{jump_structure_check, rough_stoch_integrate, LinearGerm};
use cadlag_rough::{
    CoefficientSet, ControlledPath, DriverKind, DriverSpec, JumpDist, MartingalePath, RoughLift, SmoothFn, TimeGrid,
};

use crate::config::{CoefficientConfig, DriverConfig, ExperimentConfig};
use crate::table::{ResultTable, Row};

pub struct Scenario {
    pub id: &'static str,
    pub about: &'static str,
    pub run: fn(&ExperimentConfig) -> Result<ResultTable>,
}

pub const SCENARIOS: [Scenario; 10] = [
    Scenario { id: "chen_check", about: "Chen residual of sampled lifts (1000 random triples per member)", run: chen_check },
    Scenario { id: "ito_bdb", about: "strong error of the left-point integral of M dM against its closed form", run: ito_bdb },
    Scenario { id: "ito_isometry", about: "E[(∫Y dM)²] - E[∫Y² d[M]] for Y in {1, M, sin M}", run: ito_isometry },
    Scenario { id: "jump_structure", about: "jump residual ΔZ - Y ΔX - Y' ΔXX of rough integrals", run: jump_structure },
    Scenario { id: "rsde", about: "RSDE terminal moments and strong error against the finest level", run: rsde },
    Scenario { id: "sewing_rate", about: "stochastic sewing rates of the Itô and quadratic-variation germs", run: sewing_rate },
    Scenario { id: "brackets", about: "rough bracket against the martingale bracket, and the mixed bracket identity", run: brackets },
    Scenario { id: "ito_formula", about: "L¹ residual of the jump Itô formula for the coefficient f", run: ito_formula },
    Scenario { id: "stability", about: "stability ratios under perturbations of y0, M and X", run: stability },
    Scenario { id: "picard", about: "Picard iteration against the step solver", run: picard },
];

pub fn find(id: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.id == id)
}

/// Row builder for one driver of one experiment.
struct Out<'a> {
    cfg: &'a ExperimentConfig,
    table: &'a mut ResultTable,
    prefix: String,
}

impl Out<'_> {
    fn row(&mut self, level: impl ToString, n: usize, metric: &str, value: f64, std_error: Option<f64>) {
        self.table.push(Row {
            scenario: self.cfg.scenario.clone(),
            level: level.to_string(),
            n,
            ensemble: self.cfg.ensemble,
            metric: format!("{}{metric}", self.prefix),
            value,
            std_error,
            seed: self.cfg.seed,
        });
    }

    fn mean_row(&mut self, level: usize, n: usize, metric: &str, xs: &[f64]) {
        self.row(level, n, metric, mean(xs), Some(std_error(xs)));
    }

    /// `log2` slope of `values` against grid size, when there are two levels.
    fn fit(&mut self, sizes: &[usize], values: &[f64], metric: &str) {
        if sizes.len() >= 2 {
            let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
            self.row("fit", *sizes.last().unwrap(), metric, log2_slope(&xs, values), None);
        }
    }
}

/// Run `body` once per configured driver, prefixing metrics with the
/// driver label when there are several.
fn per_driver(
    cfg: &ExperimentConfig,
    mut body: impl FnMut(&mut Out, usize, &DriverConfig, DriverSpec) -> Result<()>,
) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    let many = cfg.drivers.len() > 1;
    for (i, d) in cfg.drivers.iter().enumerate() {
        let prefix = if many { format!("{}.", d.label()) } else { String::new() };
        let mut out = Out { cfg, table: &mut table, prefix };
        body(&mut out, i, d, d.spec()?).with_context(|| format!("driver {}", d.label()))?;
    }
    Ok(table)
}

fn grid(cfg: &ExperimentConfig, n: usize) -> Result<Arc<TimeGrid>> {
    Ok(Arc::new(TimeGrid::uniform(cfg.horizon, n)?))
}

fn stream_tag(cfg: &ExperimentConfig, driver: usize, what: &str) -> u64 {
    tag(&format!("{}/{driver}/{what}", cfg.scenario))
}

fn collect<T>(v: Vec<cadlag_rough::Result<T>>) -> Result<Vec<T>> {
    Ok(v.into_iter().collect::<cadlag_rough::Result<Vec<T>>>()?)
}

fn require_martingale(spec: &DriverSpec, scalar: bool) -> Result<()> {
    ensure!(spec.kind != DriverKind::Smooth, "this scenario needs a martingale driver");
    ensure!(!scalar || spec.dim == 1, "this scenario needs a one-dimensional driver");
    Ok(())
}

/// A driver sampled on the finest grid, with the martingale aligned to the lift.
struct Fine {
    m: Option<MartingalePath>,
    lift: RoughLift,
}

impl Fine {
    fn sample(spec: &DriverSpec, g: &Arc<TimeGrid>, rng: &mut rand_chacha::ChaCha8Rng) -> cadlag_rough::Result<Self> {
        let d = spec.sample(g, rng)?;
        Ok(match d.martingale {
            Some(m) => {
                let (m, lift) = align(&m, &d.lift)?;
                Fine { m: Some(m), lift }
            }
            None => Fine { m: None, lift: d.lift },
        })
    }

    /// The driver observed on `g`; the finest level keeps the sampled,
    /// jump-inclusive grid.
    fn restrict(&self, g: &Arc<TimeGrid>, finest: bool) -> cadlag_rough::Result<Fine> {
        if finest {
            return Ok(Fine { m: self.m.clone(), lift: self.lift.clone() });
        }
        Ok(Fine { m: self.m.as_ref().map(|m| m.restrict(g.clone())).transpose()?, lift: self.lift.restrict(g.clone())? })
    }
}

fn levels(cfg: &ExperimentConfig) -> Result<Vec<Arc<TimeGrid>>> {
    cfg.sizes().into_iter().map(|n| grid(cfg, n)).collect()
}

fn chen_check(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        for (h, n) in cfg.sizes().into_iter().enumerate() {
            let g = grid(cfg, n)?;
            let res = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, &n.to_string()), |i, rng| {
                spec.sample(&g, rng).map(|d| chen_residual(&d.lift, 1000, i as u64))
            }))?;
            out.row(h, n, "max_residual", res.iter().cloned().fold(0.0, f64::max), None);
            out.mean_row(h, n, "mean_residual", &res);
        }
        Ok(())
    })
}

fn ito_bdb(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        require_martingale(&spec, true)?;
        let fine = grid(cfg, cfg.finest())?;
        let grids = levels(cfg)?;
        let errs = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, "fine"), |_, rng| {
            let m = spec.sample(&fine, rng)?.martingale.expect("martingale driver");
            let (m0, mt, bt) = (m.path.value(0)[0], m.path.terminal()[0], m.bracket.terminal()[0]);
            let exact = (mt * mt - m0 * m0 - bt) / 2.0;
            grids
                .iter()
                .enumerate()
                .map(|(h, g)| {
                    let mr = if h + 1 == grids.len() { m.clone() } else { m.restrict(g.clone())? };
                    Ok(skeleton_sum(&LinearGerm::new(&mr.path, &mr.path)?).terminal()[0] - exact)
                })
                .collect::<cadlag_rough::Result<Vec<f64>>>()
        }))?;
        let sizes = cfg.sizes();
        let mut l2 = Vec::new();
        for (h, &n) in sizes.iter().enumerate() {
            let e = lq_norm(&errs.iter().map(|e| e[h]).collect::<Vec<_>>(), 2.0)?;
            out.row(h, n, "L2_error", e.value, Some(e.std_error));
            l2.push(e.value);
        }
        out.fit(&sizes, &l2, "L2_error_slope");
        Ok(())
    })
}

fn ito_isometry(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let integrands: [(&str, fn(f64) -> f64); 3] = [("1", |_| 1.0), ("M", |x| x), ("sinM", f64::sin)];
    per_driver(cfg, |out, di, _, spec| {
        require_martingale(&spec, true)?;
        for (h, n) in cfg.sizes().into_iter().enumerate() {
            let g = grid(cfg, n)?;
            let samples = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, &n.to_string()), |_, rng| {
                let m = spec.sample(&g, rng)?.martingale.expect("martingale driver");
                integrands
                    .iter()
                    .map(|(_, f)| {
                        let y = m.path.map(1, |v, o| o[0] = f(v[0]));
                        let y2 = y.map(1, |v, o| o[0] = v[0] * v[0]);
                        let lhs = skeleton_sum(&LinearGerm::new(&y, &m.path)?).terminal()[0].powi(2);
                        let rhs = skeleton_sum(&LinearGerm::new(&y2, &m.bracket)?).terminal()[0];
                        Ok((lhs, rhs))
                    })
                    .collect::<cadlag_rough::Result<Vec<(f64, f64)>>>()
            }))?;
            for (k, (name, _)) in integrands.iter().enumerate() {
                let lhs: Vec<f64> = samples.iter().map(|s| s[k].0).collect();
                let rhs: Vec<f64> = samples.iter().map(|s| s[k].1).collect();
                let se = (std_error(&lhs).powi(2) + std_error(&rhs).powi(2)).sqrt();
                out.mean_row(h, n, &format!("lhs_{name}"), &lhs);
                out.mean_row(h, n, &format!("rhs_{name}"), &rhs);
                out.row(h, n, &format!("gap_{name}"), mean(&lhs) - mean(&rhs), Some(se));
            }
        }
        Ok(())
    })
}

/// `f(X)` as a controlled integrand `R^{1 x d}`.
fn integrand(coeffs: &CoefficientConfig, lift: &RoughLift) -> cadlag_rough::Result<ControlledPath> {
    let d = lift.dim();
    let id = CoefficientConfig::id(&coeffs.f).unwrap_or("sin_bundle");
    let fx = compose(&SmoothFn::registry(id, d, d)?, &ControlledPath::of_lift(lift))?;
    ControlledPath::new(fx.y, fx.yp, d)
}

fn jump_structure(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        for (h, n) in cfg.sizes().into_iter().enumerate() {
            let g = grid(cfg, n)?;
            let res = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, &n.to_string()), |_, rng| {
                let lift = spec.sample(&g, rng)?.lift;
                let cp = integrand(&cfg.coefficients, &lift)?;
                let z = rough_stoch_integrate(std::slice::from_ref(&cp), std::slice::from_ref(&lift))?;
                Ok((jump_structure_check(&z.members[0], &cp, &lift)?, lift.skeleton().jumps().len() as f64))
            }))?;
            out.row(h, n, "max_residual", res.iter().map(|r| r.0).fold(0.0, f64::max), None);
            out.mean_row(h, n, "jumps", &res.iter().map(|r| r.1).collect::<Vec<_>>());
        }
        Ok(())
    })
}

fn coefficient_set(cfg: &ExperimentConfig, spec: &DriverSpec) -> Result<CoefficientSet> {
    let c = &cfg.coefficients;
    let has_m = spec.kind != DriverKind::Smooth;
    let sigma = if has_m { CoefficientConfig::id(&c.sigma) } else { None };
    let l = if has_m { spec.dim } else { 0 };
    Ok(CoefficientSet::from_ids(c.y0.len(), l, spec.dim, CoefficientConfig::id(&c.b), sigma, CoefficientConfig::id(&c.f))?)
}

fn rsde(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        let c = coefficient_set(cfg, &spec)?;
        let fine = grid(cfg, cfg.finest())?;
        let grids = levels(cfg)?;
        let y0 = cfg.coefficients.y0.clone();
        let runs = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, "fine"), |_, rng| {
            let f = Fine::sample(&spec, &fine, rng)?;
            grids
                .iter()
                .enumerate()
                .map(|(h, g)| {
                    let r = f.restrict(g, h + 1 == grids.len())?;
                    let res = solve(&c, std::slice::from_ref(&y0), r.m.as_ref().map(std::slice::from_ref), &[r.lift])?;
                    Ok(res.y[0].terminal().to_vec())
                })
                .collect::<cadlag_rough::Result<Vec<Vec<f64>>>>()
        }))?;
        let sizes = cfg.sizes();
        let last = sizes.len() - 1;
        let mut strong = Vec::new();
        for (h, &n) in sizes.iter().enumerate() {
            let ok: Vec<&Vec<Vec<f64>>> = runs.iter().filter(|r| r.iter().all(|y| y.iter().all(|v| v.is_finite()))).collect();
            let diverged = runs.iter().filter(|r| !r[h].iter().all(|v| v.is_finite())).count();
            out.row(h, n, "diverged", diverged as f64, None);
            for a in 0..y0.len() {
                out.mean_row(h, n, &format!("terminal_mean_{a}"), &ok.iter().map(|r| r[h][a]).collect::<Vec<_>>());
            }
            if h < last {
                let e: Vec<f64> = ok.iter().map(|r| cadlag_rough::linalg::dist(&r[h], &r[last])).collect();
                let e = lq_norm(&e, 2.0)?;
                out.row(h, n, "strong_error", e.value, Some(e.std_error));
                strong.push(e.value);
            }
        }
        out.fit(&sizes[..last], &strong, "strong_error_slope");
        Ok(())
    })
}

fn rate_rows(out: &mut Out, n: usize, name: &str, r: &RateReport) {
    for (h, d) in r.distances.iter().enumerate() {
        out.row(h, n, &format!("{name}_distance"), d.value, Some(d.std_error));
    }
    out.row("fit", n, &format!("{name}_slope"), r.slope, None);
    out.row("fit", n, &format!("{name}_non_convergent"), r.non_convergent as u8 as f64, None);
}

fn sewing_rate(cfg: &ExperimentConfig) -> Result<ResultTable> {
    ensure!(cfg.levels >= 3, "sewing_rate fits a rate and needs levels >= 3");
    per_driver(cfg, |out, di, _, spec| {
        require_martingale(&spec, true)?;
        let g = grid(cfg, cfg.n)?;
        let ms: Vec<MartingalePath> = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, "paths"), |_, rng| {
            spec.sample(&g, rng).map(|d| d.martingale.expect("martingale driver"))
        }))?;
        let ito = ms.iter().map(|m| LinearGerm::new(&m.path, &m.path)).collect::<cadlag_rough::Result<Vec<_>>>()?;
        let r = convergence_rate(&ito, &time_controls, cfg.norm.q, cfg.levels - 1)?;
        rate_rows(out, cfg.n, "ito", &r);
        let qv: Vec<_> = ms
            .iter()
            .map(|m| {
                let skel = m.path.skeleton().clone();
                FnGerm {
                    skel,
                    dim: 1,
                    f: move |a: usize, b: usize, o: &mut [f64]| {
                        o[0] = (m.path.node(b)[0] - m.path.node(a)[0]).powi(2) - (m.bracket.node(b)[0] - m.bracket.node(a)[0])
                    },
                }
            })
            .collect();
        let r = convergence_rate(&qv, &time_controls, cfg.norm.q, cfg.levels - 1)?;
        rate_rows(out, cfg.n, "qv", &r);
        Ok(())
    })
}

const MIXED_REFINE: usize = 8;

fn trace(v: &[f64]) -> f64 {
    let d = (v.len() as f64).sqrt().round() as usize;
    (0..d).map(|i| v[i * d + i]).sum()
}

fn brackets(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        let fine = grid(cfg, cfg.finest())?;
        let grids = levels(cfg)?;
        let brownian = spec.kind == DriverKind::Brownian;
        // The mixed identity is observed on every level from a pair sampled
        // MIXED_REFINE times finer than the finest level.
        let mixed_fine = grid(cfg, cfg.finest() * MIXED_REFINE)?;
        let q = cfg.norm.q.max(2.0);
        let runs = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, "fine"), |_, rng| {
            let f = Fine::sample(&spec, &fine, rng)?;
            let mixed = if brownian {
                let (j, _) = simulate_compound_poisson(&mixed_fine, 1, 5.0, JumpDist::Normal { mean: 0.0, std: 1.0 }, rng)?;
                let b = simulate_brownian(j.grid(), spec.dim, &spec.vol, rng)?;
                Some((b.path.embed(j.skeleton())?, j))
            } else {
                None
            };
            grids
                .iter()
                .enumerate()
                .map(|(h, g)| {
                    let r = f.restrict(g, h + 1 == grids.len())?;
                    let got = trace(rough_bracket(&r.lift).terminal());
                    let want = r.m.as_ref().map_or(0.0, |m| trace(m.bracket.terminal()));
                    let gap = match &mixed {
                        Some((b, j)) => {
                            let (b, j) = (b.restrict(g.clone())?, j.restrict(g.clone())?);
                            let lift = forward_lift_jump_path(&j);
                            let z = ControlledPath::of_lift(&lift);
                            mixed_bracket_check(&[b], &[z], &[lift], q)?.value
                        }
                        None => f64::NAN,
                    };
                    Ok([got, want, gap])
                })
                .collect::<cadlag_rough::Result<Vec<[f64; 3]>>>()
        }))?;
        let sizes = cfg.sizes();
        let mut mixed = Vec::new();
        for (h, &n) in sizes.iter().enumerate() {
            let col = |k: usize| runs.iter().map(|r| r[h][k]).collect::<Vec<f64>>();
            let (got, want) = (col(0), col(1));
            let diff: Vec<f64> = got.iter().zip(&want).map(|(a, b)| a - b).collect();
            out.mean_row(h, n, "bracket_trace", &got);
            out.mean_row(h, n, "expected_trace", &want);
            out.mean_row(h, n, "gap", &diff);
            out.row(h, n, "max_abs_gap", diff.iter().fold(0.0, |m, x| m.max(x.abs())), None);
            out.row(h, n, "horizon", cfg.horizon, None);
            if brownian {
                let e = lq_norm(&col(2), q / 2.0)?;
                out.row(h, n, "mixed_residual", e.value, Some(e.std_error));
                mixed.push(e.value);
            }
        }
        if brownian {
            out.fit(&sizes, &mixed, "mixed_residual_slope");
        }
        Ok(())
    })
}

fn ito_formula(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        let id = CoefficientConfig::id(&cfg.coefficients.f).unwrap_or("tanh_affine");
        let f = SmoothFn::registry(id, spec.dim, 1)?;
        let fine = grid(cfg, cfg.finest())?;
        let grids = levels(cfg)?;
        let runs = collect(par_members(cfg.ensemble, cfg.seed, stream_tag(cfg, di, "fine"), |_, rng| {
            let lift = spec.sample(&fine, rng)?.lift;
            grids
                .iter()
                .enumerate()
                .map(|(h, g)| {
                    let l = if h + 1 == grids.len() { lift.clone() } else { lift.restrict(g.clone())? };
                    Ok(norm(&ito_formula_terms(&f, &ControlledPath::of_lift(&l), &l, None)?.residual))
                })
                .collect::<cadlag_rough::Result<Vec<f64>>>()
        }))?;
        let sizes = cfg.sizes();
        let mut l1 = Vec::new();
        for (h, &n) in sizes.iter().enumerate() {
            let r: Vec<f64> = runs.iter().map(|r| r[h]).collect();
            out.mean_row(h, n, "L1_residual", &r);
            out.row(h, n, "max_residual", r.iter().cloned().fold(0.0, f64::max), None);
            l1.push(mean(&r));
        }
        out.fit(&sizes, &l1, "L1_residual_slope");
        Ok(())
    })
}

/// Perturbation sizes `10^-1, ..., 10^-levels`.
fn epsilons(cfg: &ExperimentConfig) -> Vec<f64> {
    (1..=cfg.levels).map(|k| 10f64.powi(-(k as i32))).collect()
}

fn stability(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        ensure!(spec.kind == DriverKind::Brownian, "stability compares ensembles on a shared grid; use a brownian driver");
        let c = coefficient_set(cfg, &spec)?;
        let g = grid(cfg, cfg.n)?;
        let data = sample_data(&spec, &cfg.coefficients.y0, &g, cfg.ensemble, cfg.seed ^ stream_tag(cfg, di, "data"))?;
        let w = brownian_ensemble(&g, spec.dim, &spec.vol, cfg.ensemble, cfg.seed ^ stream_tag(cfg, di, "perturb"))?;
        let eps = epsilons(cfg);
        let perturbations: [(&str, Box<dyn Fn(f64) -> cadlag_rough::Result<SdeData>>); 3] = [
            ("y0", Box::new(|e| Ok(data.perturb_y0(e)))),
            ("M", Box::new(|e| data.perturb_martingale(e, &w))),
            ("X", Box::new(|e| data.perturb_lift(e))),
        ];
        for (h, e) in eps.iter().enumerate() {
            out.row(h, cfg.n, "eps", *e, None);
        }
        for (name, p) in &perturbations {
            let reports = stability_sweep(&c, &data, p, &eps, cfg.norm.p, cfg.norm.q)?;
            for (h, (_, r)) in reports.iter().enumerate() {
                out.row(h, cfg.n, &format!("lhs_{name}"), r.lhs, None);
                out.row(h, cfg.n, &format!("rhs_{name}"), r.rhs, None);
                out.row(h, cfg.n, &format!("ratio_{name}"), r.ratio, None);
            }
            let ratios: Vec<f64> = reports.iter().map(|r| r.1.ratio).collect();
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            out.row("fit", cfg.n, &format!("spread_{name}"), hi / lo, None);
        }
        Ok(())
    })
}

fn picard(cfg: &ExperimentConfig) -> Result<ResultTable> {
    per_driver(cfg, |out, di, _, spec| {
        let c = coefficient_set(cfg, &spec)?;
        let opts = PicardOptions { p: cfg.norm.p.max(2.0), ..Default::default() };
        for (h, n) in cfg.sizes().into_iter().enumerate() {
            let g = grid(cfg, n)?;
            let data = sample_data(&spec, &cfg.coefficients.y0, &g, cfg.ensemble, cfg.seed ^ stream_tag(cfg, di, &n.to_string()))?;
            let a = solve(&c, &data.y0, data.m.as_deref(), &data.lifts)?;
            let b = picard_solve(&c, &data.y0, data.m.as_deref(), &data.lifts, opts)?;
            let gap = a
                .y
                .iter()
                .zip(&b.y)
                .flat_map(|(u, v)| u.raw().iter().zip(v.raw()).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max);
            let windows: Vec<f64> = b.picard.iter().map(|l| l.windows.len() as f64).collect();
            let iters = b.picard.iter().flat_map(|l| l.distances.iter().map(Vec::len)).max().unwrap_or(0);
            let converged = b.picard.iter().filter(|l| l.converged).count() as f64 / b.picard.len().max(1) as f64;
            out.row(h, n, "sup_gap", gap, None);
            out.mean_row(h, n, "windows", &windows);
            out.row(h, n, "max_iterations", iters as f64, None);
            out.row(h, n, "converged_fraction", converged, None);
        }
        Ok(())
    })
}

/// Run the configured scenario.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    match find(&cfg.scenario) {
        Some(s) => (s.run)(cfg),
        None => bail!("unknown scenario {:?}", cfg.scenario),
    }
}
