use anyhow::{bail, Result};

use crate::config::{DriverConfig, ExperimentConfig, JumpConfig};
use crate::scenarios;
use crate::table::ResultTable;

pub struct Suite {
    pub id: &'static str,
    pub about: &'static str,
    pub run: fn(u64) -> Result<Vec<Check>>,
}

/// One gated property.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

pub const SUITES: [Suite; 6] = [
    Suite { id: "chen", about: "Chen's relation on every built-in lift", run: chen },
    Suite { id: "jump_structure", about: "canonical jump structure of rough integrals", run: jump_structure },
    Suite { id: "ito_formula", about: "Itô formula residuals on smooth and pure-jump drivers", run: ito_formula },
    Suite { id: "sewing_rate", about: "sewing rates of the Itô and quadratic-variation germs", run: sewing_rate },
    Suite { id: "stability", about: "stability ratios stay bounded as perturbations vanish", run: stability },
    Suite { id: "brackets", about: "Brownian, smooth, pure-jump and mixed brackets", run: brackets },
];

pub fn find(id: &str) -> Option<&'static Suite> {
    SUITES.iter().find(|s| s.id == id)
}

fn config(scenario: &str, seed: u64, n: usize, levels: usize, ensemble: usize, drivers: Vec<DriverConfig>) -> ExperimentConfig {
    let mut c = ExperimentConfig::from_toml(&format!("scenario = {scenario:?}")).expect("minimal config parses");
    c.seed = seed;
    c.n = n;
    c.levels = levels;
    c.ensemble = ensemble;
    c.drivers = drivers;
    c
}

fn brownian(dim: usize) -> DriverConfig {
    DriverConfig::Brownian { dim, vol: None }
}

fn poisson(dim: usize) -> DriverConfig {
    DriverConfig::CompoundPoisson { dim, lambda: 5.0, jump: JumpConfig::Normal { mean: 0.2, std: 1.0 } }
}

fn smooth(path: &str) -> DriverConfig {
    DriverConfig::Smooth { path: path.into() }
}

fn value(t: &ResultTable, metric: &str) -> Result<f64> {
    match t.find(metric).last() {
        Some(r) => Ok(r.value),
        None => bail!("metric {metric} missing from the results"),
    }
}

fn max_value(t: &ResultTable, metric: &str) -> f64 {
    t.find(metric).map(|r| r.value).fold(f64::NEG_INFINITY, f64::max)
}

fn chen(seed: u64) -> Result<Vec<Check>> {
    let drivers = vec![
        brownian(1),
        brownian(2),
        poisson(1),
        poisson(2),
        smooth("linear"),
        smooth("polynomial"),
        smooth("sine_cosine_pair"),
        DriverConfig::Mixed { dim: 2, lambda: 3.0, jump: JumpConfig::Uniform { low: -0.5, high: 0.5 } },
    ];
    let cfg = config("chen_check", seed, 256, 1, 10, drivers.clone());
    let t = scenarios::run(&cfg)?;
    Ok(drivers
        .iter()
        .map(|d| {
            let r = value(&t, &format!("{}.max_residual", d.label())).unwrap_or(f64::NAN);
            Check::new(format!("chen {}", d.label()), r <= 1e-10, format!("max relative residual {r:.2e}"))
        })
        .collect())
}

fn jump_structure(seed: u64) -> Result<Vec<Check>> {
    let drivers = vec![poisson(1), poisson(2), DriverConfig::Mixed { dim: 2, lambda: 4.0, jump: JumpConfig::Exponential { rate: 2.0 } }];
    let cfg = config("jump_structure", seed, 32, 1, 50, drivers.clone());
    let t = scenarios::run(&cfg)?;
    Ok(drivers
        .iter()
        .map(|d| {
            let r = value(&t, &format!("{}.max_residual", d.label())).unwrap_or(f64::NAN);
            Check::new(format!("jump structure {}", d.label()), r <= 1e-12, format!("max residual {r:.2e}"))
        })
        .collect())
}

fn ito_formula(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let mut cfg = config("ito_formula", seed, 16, 5, 1, vec![smooth("linear"), smooth("polynomial")]);
    cfg.coefficients.f = "tanh_affine".into();
    let t = scenarios::run(&cfg)?;
    for id in ["linear", "polynomial"] {
        let s = value(&t, &format!("{id}.L1_residual_slope"))?;
        checks.push(Check::new(format!("ito formula smooth {id}"), s <= -0.9, format!("residual slope {s:.3}")));
    }
    let mut cfg = config("ito_formula", seed, 32, 1, 50, vec![poisson(1)]);
    cfg.coefficients.f = "tanh_affine".into();
    let t = scenarios::run(&cfg)?;
    let r = max_value(&t, "max_residual");
    checks.push(Check::new("ito formula pure jump", r <= 1e-12, format!("max residual {r:.2e}")));
    Ok(checks)
}

fn sewing_rate(seed: u64) -> Result<Vec<Check>> {
    let cfg = config("sewing_rate", seed, 1024, 9, 2000, vec![brownian(1)]);
    let t = scenarios::run(&cfg)?;
    let mut checks = Vec::new();
    for germ in ["ito", "qv"] {
        let s = value(&t, &format!("{germ}_slope"))?;
        checks.push(Check::new(format!("sewing rate {germ}"), s < -0.2, format!("slope {s:.3}")));
    }
    Ok(checks)
}

fn stability(seed: u64) -> Result<Vec<Check>> {
    let mut cfg = config("stability", seed, 24, 4, 200, vec![brownian(1)]);
    cfg.coefficients.f = "tanh_affine".into();
    let t = scenarios::run(&cfg)?;
    ["y0", "M", "X"]
        .iter()
        .map(|name| {
            let spread = value(&t, &format!("spread_{name}"))?;
            let finite = t.find(&format!("ratio_{name}")).all(|r| r.value.is_finite() && r.value > 0.0);
            Ok(Check::new(
                format!("stability {name}"),
                finite && spread < 5.0,
                format!("ratio spread {spread:.3}, all finite: {finite}"),
            ))
        })
        .collect()
}

fn brackets(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cfg = config("brackets", seed, 16, 4, 500, vec![brownian(1)]);
    let t = scenarios::run(&cfg)?;
    let gap = t.find("gap").next().expect("gap row");
    let se = gap.std_error.unwrap_or(f64::NAN);
    checks.push(Check::new(
        "bracket brownian",
        gap.value.abs() <= 3.0 * se || gap.value.abs() <= 1e-12,
        format!("[X]_T - [M]_T = {:.2e} (SE {se:.2e})", gap.value),
    ));
    let s = value(&t, "mixed_residual_slope")?;
    checks.push(Check::new("bracket mixed decay", s < 0.0, format!("mixed residual slope {s:.3}")));
    let cfg = config("brackets", seed, 64, 1, 50, vec![smooth("sine_cosine_pair"), poisson(1), poisson(2)]);
    let t = scenarios::run(&cfg)?;
    for (id, what) in [("sine_cosine_pair", "smooth"), ("poisson1", "pure jump"), ("poisson2", "pure jump 2-d")] {
        let g = value(&t, &format!("{id}.max_abs_gap"))?;
        checks.push(Check::new(format!("bracket {what}"), g <= 1e-12, format!("max |[X]_T - Σ ΔX²| {g:.2e}")));
    }
    Ok(checks)
}
