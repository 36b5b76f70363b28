//! The tasks behind `[task] kind`. Each returns the files to write and the
//! result lines of the summary.

use std::fmt::Write as _;

use omega_pricer::mc::{bermudan_dp, stopped_value, symmetry_check, Claim, DpGrid, Dynamics, McConfig, StopInterval};
use omega_pricer::pricer::{optimize_boundaries_with, putcall_transform, PricerOptions};
use omega_pricer::scale::{LogGrid, ScaleTable};
use omega_pricer::{Error, Payoff, PricingProblem, PricingResult};

use crate::config::{RunConfig, Task};

pub struct Output {
    pub files: Vec<(&'static str, String)>,
    /// `(key, value)` lines of the `[result]` section.
    pub result: Vec<(String, String)>,
}

impl Output {
    fn new() -> Self {
        Output {
            files: Vec::new(),
            result: Vec::new(),
        }
    }

    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.result.push((key.into(), value.to_string()));
    }
}

pub fn run(cfg: &RunConfig) -> omega_pricer::Result<Output> {
    let problem = cfg.problem()?;
    match cfg.task.kind {
        Task::Price => price(cfg, &problem, true),
        Task::Boundaries => price(cfg, &problem, false),
        Task::Scale => scale(cfg, &problem),
        Task::McCheck => mc_check(cfg, &problem),
        Task::Symmetry => symmetry(cfg, &problem),
        Task::Bermudan => bermudan(cfg, &problem),
    }
}

fn pricer_options(cfg: &RunConfig) -> PricerOptions {
    PricerOptions {
        upper_branch: cfg.numerics.upper_branch,
        curve_points: cfg.numerics.curve_points,
        coarse_points: cfg.numerics.coarse_points,
    }
}

fn mc_config(cfg: &RunConfig, seed: u64) -> McConfig {
    let n = &cfg.numerics;
    McConfig {
        n_paths: n.n_paths,
        dt: n.dt,
        dt_far: n.dt_far,
        t_max: n.t_max,
        seed,
        antithetic: n.antithetic,
        exhaustion: n.exhaustion,
    }
}

fn require_put(problem: &PricingProblem, task: &'static str) -> omega_pricer::Result<()> {
    match problem.payoff {
        Payoff::Put => Ok(()),
        Payoff::Call => Err(Error::InvalidInput {
            op: task,
            msg: "calls go through the symmetry task".into(),
        }),
    }
}

fn record_pricing(out: &mut Output, r: &PricingResult) {
    let (b, f, d) = (r.boundaries, r.fit, &r.diagnostics);
    out.put("l_star", b.l);
    out.put("u_star", b.u);
    out.put("continuity_residual_l", f.continuity_l);
    out.put("continuity_residual_u", f.continuity_u);
    out.put("smooth_fit_residual_l", f.derivative_l);
    out.put("smooth_fit_residual_u", f.derivative_u);
    out.put("convexity_margin", d.convexity_margin);
    out.put("hjb_residual", d.hjb_residual);
    out.put("hjb_stopping_violation", d.hjb_stopping_violation);
    out.put("dominance_gap", d.dominance_gap);
    out.put("degenerate", d.degenerate);
    for (i, w) in d.warnings.iter().enumerate() {
        out.put(format!("warning_{i}"), w);
    }
}

fn price(cfg: &RunConfig, problem: &PricingProblem, curve: bool) -> omega_pricer::Result<Output> {
    require_put(problem, "price")?;
    let r = optimize_boundaries_with(problem, &pricer_options(cfg))?;
    let mut out = Output::new();
    record_pricing(&mut out, &r);
    if curve {
        out.files.push(("curve.csv", r.to_csv()));
    }
    Ok(out)
}

fn scale(cfg: &RunConfig, problem: &PricingProblem) -> omega_pricer::Result<Output> {
    let xi = problem.omega.shift_tilt(cfg.task.u, &problem.model, 0.0)?;
    let grid = LogGrid::with_step(cfg.numerics.scale_x_max, cfg.numerics.scale_step)?;
    let table = ScaleTable::build(&problem.model, &xi, grid)?;
    let mut out = Output::new();
    out.put("shift_u", cfg.task.u);
    out.put("grid_x_max", table.grid.x_max());
    out.put("grid_n", table.grid.n());
    out.put("limit_z_over_w", table.c_zw);
    out.files.push(("scale.csv", table.to_csv()));
    Ok(out)
}

fn mc_check(cfg: &RunConfig, problem: &PricingProblem) -> omega_pricer::Result<Output> {
    require_put(problem, "mc-check")?;
    let r = optimize_boundaries_with(problem, &pricer_options(cfg))?;
    let mut out = Output::new();
    record_pricing(&mut out, &r);
    let d = Dynamics::from(&problem.model);
    let interval = StopInterval::new(r.boundaries.l, r.boundaries.u)?;
    let mut csv = String::from("s,analytic,mc_mean,mc_stderr,z\n");
    let mut worst: f64 = 0.0;
    for (i, &s) in cfg.task.spots.iter().enumerate() {
        let est = stopped_value(
            &d,
            &problem.omega,
            &Claim::put(problem.strike),
            interval,
            s,
            &mc_config(cfg, cfg.numerics.seed.wrapping_add(i as u64)),
        )?;
        let v = r.value(s);
        let z = est.z_score(v, 0.0);
        if z.is_finite() {
            worst = worst.max(z.abs());
        }
        let _ = writeln!(csv, "{s},{v},{},{},{z}", est.mean, est.stderr);
        if est.unreliable {
            out.put(format!("warning_mc_{i}"), format!("horizon censored {} of paths", est.horizon_truncation_mass));
        }
    }
    out.put("max_abs_z", worst);
    out.files.push(("curve.csv", r.to_csv()));
    out.files.push(("mc.csv", csv));
    Ok(out)
}

fn symmetry(cfg: &RunConfig, problem: &PricingProblem) -> omega_pricer::Result<Output> {
    const OP: &str = "symmetry";
    if problem.payoff != Payoff::Call {
        return Err(Error::InvalidInput {
            op: OP,
            msg: "the symmetry task prices a call".into(),
        });
    }
    let k = problem.strike;
    let mut out = Output::new();
    let mut csv = String::from("s,l_c,u_c,analytic,call_mc,call_stderr,put_mc,put_stderr,z\n");
    let mut worst: f64 = 0.0;
    for (i, &s) in cfg.task.spots.iter().enumerate() {
        // The dual discount does not depend on the interval.
        let dual = putcall_transform(problem, s, 0.0, f64::INFINITY)?;
        let (l_c, u_c, analytic) = match (cfg.task.l_c, cfg.task.u_c) {
            (Some(l), u) => (l, u.unwrap_or(f64::INFINITY), f64::NAN),
            (None, _) => {
                let put = dual.as_put_problem()?;
                let r = optimize_boundaries_with(&put, &pricer_options(cfg))?;
                let b = r.boundaries;
                let u_c = if b.l > 0.0 { s * k / b.l } else { f64::INFINITY };
                (s * k / b.u, u_c, r.value(dual.spot))
            }
        };
        for w in &dual.warnings {
            out.put(format!("warning_dual_{i}"), w);
        }
        let (call, put) = symmetry_check(problem, s, l_c, u_c, &mc_config(cfg, cfg.numerics.seed.wrapping_add(i as u64)))?;
        let z = call.z_score(put.mean, put.stderr);
        if z.is_finite() {
            worst = worst.max(z.abs());
        }
        let _ = writeln!(
            csv,
            "{s},{l_c},{u_c},{analytic},{},{},{},{},{z}",
            call.mean, call.stderr, put.mean, put.stderr
        );
        out.put(format!("l_c_{i}"), l_c);
        out.put(format!("u_c_{i}"), u_c);
    }
    out.put("max_abs_z", worst);
    out.files.push(("symmetry.csv", csv));
    Ok(out)
}

fn bermudan(cfg: &RunConfig, problem: &PricingProblem) -> omega_pricer::Result<Output> {
    require_put(problem, "bermudan")?;
    let k = problem.strike;
    let n = &cfg.numerics;
    let r = optimize_boundaries_with(problem, &pricer_options(cfg))?;
    let grid = DpGrid::new(k * (-n.dp_log_below).exp(), k * n.dp_log_above.exp(), n.dp_step)?;
    let claim = match problem.payoff {
        Payoff::Put => Claim::put(k),
        Payoff::Call => Claim::call(k),
    };
    let dp = bermudan_dp(
        &Dynamics::from(&problem.model),
        &problem.omega,
        &claim,
        cfg.task.horizon,
        1usize << cfg.task.xi,
        grid,
    )?;
    let mut out = Output::new();
    record_pricing(&mut out, &r);
    out.put("dp_nodes", grid.n);
    out.put("dp_truncated_mass", dp.truncated_mass);
    out.put("dp_jump_layers", dp.jump_layers);
    let mut csv = String::from("s,bermudan,perpetual\n");
    for &s in &cfg.task.spots {
        let _ = writeln!(csv, "{s},{},{}", dp.value_at(s)?, r.value(s));
    }
    out.files.push(("bermudan.csv", csv));
    Ok(out)
}
