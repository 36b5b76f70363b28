//! Run configuration: flat `[section]` blocks of `key = value` lines.
//!
//! Every key has a default that is written back into the resolved config,
//! so a run can be repeated from its own output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use ini::Ini;
use omega_pricer::pricer::UpperBranch;
use omega_pricer::{DiscountFn, LevyModel, Payoff, PricingProblem, StepSide};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Price,
    Boundaries,
    Scale,
    McCheck,
    Symmetry,
    Bermudan,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::Price => "price",
            Task::Boundaries => "boundaries",
            Task::Scale => "scale",
            Task::McCheck => "mc-check",
            Task::Symmetry => "symmetry",
            Task::Bermudan => "bermudan",
        }
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            Task::Price,
            Task::Boundaries,
            Task::Scale,
            Task::McCheck,
            Task::Symmetry,
            Task::Bermudan,
        ]
        .into_iter()
        .find(|t| t.name() == s)
        .ok_or_else(|| format!("unknown task '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelBlock {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phi: f64,
    /// Drift from the martingale condition at rate `r + carry`.
    pub calibrate: bool,
    /// Growth in excess of `r` (storage costs of a commodity, say).
    pub carry: f64,
    /// `μ`, only read when `calibrate = false`.
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DiscountBlock {
    Constant { r: f64 },
    Linear { c: f64 },
    Rational { c: f64, d: f64 },
    Step { r: f64, jump: f64, level: f64, side: StepSide },
    LogArea { strike: f64 },
    Tabulated { s: Vec<f64>, omega: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskBlock {
    pub kind: Task,
    /// Spots of the Monte Carlo, symmetry and Bermudan tasks.
    pub spots: Vec<f64>,
    /// Shift of the scale tables; the strike when absent.
    pub u: f64,
    /// Call stopping interval `[l_c, u_c]` for the symmetry task; taken
    /// from the dual put when not given.
    pub l_c: Option<f64>,
    pub u_c: Option<f64>,
    pub horizon: f64,
    /// `2^xi` exercise dates.
    pub xi: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub curve_points: usize,
    pub coarse_points: usize,
    pub upper_branch: UpperBranch,
    pub n_paths: usize,
    pub dt: f64,
    pub dt_far: f64,
    pub t_max: f64,
    pub seed: u64,
    pub antithetic: bool,
    pub exhaustion: f64,
    pub scale_x_max: f64,
    pub scale_step: f64,
    pub dp_step: f64,
    /// DP grid from `K e^{−dp_log_below}` to `K e^{dp_log_above}`.
    pub dp_log_below: f64,
    pub dp_log_above: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelBlock,
    pub discount: DiscountBlock,
    pub payoff: Payoff,
    pub strike: f64,
    pub task: TaskBlock,
    pub numerics: Numerics,
}

/// Keys of one section, consumed as they are read.
struct Section {
    name: &'static str,
    keys: BTreeMap<String, String>,
}

impl Section {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.keys.remove(key) {
            None => Ok(None),
            Some(v) => v.trim().parse().map(Some).map_err(|_| {
                CliError::Config(format!("[{}] {key}: cannot parse '{v}'", self.name))
            }),
        }
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        self.take(key)?
            .ok_or_else(|| CliError::Config(format!("[{}] {key} is required", self.name)))
    }

    fn list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some(v) = self.keys.remove(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|_| CliError::Config(format!("[{}] {key}: cannot parse list '{v}'", self.name)))
    }

    fn finish(self) -> Result<(), CliError> {
        match self.keys.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Config(format!("[{}] unknown key '{k}'", self.name))),
        }
    }
}

const SECTIONS: [&str; 5] = ["model", "discount", "contract", "task", "numerics"];

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut sections: BTreeMap<&'static str, Section> = SECTIONS
            .iter()
            .map(|&n| {
                (
                    n,
                    Section {
                        name: n,
                        keys: BTreeMap::new(),
                    },
                )
            })
            .collect();
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("key '{k}' outside any section")));
                }
                continue;
            };
            let section = sections
                .get_mut(name)
                .ok_or_else(|| CliError::Config(format!("unknown section [{name}]")))?;
            for (k, v) in props.iter() {
                if section.keys.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(CliError::Config(format!("[{name}] {k} given twice")));
                }
            }
        }
        let mut sec = |n: &str| sections.remove(n).expect("known section");
        let (mut m, mut d, mut c, mut t, mut n) =
            (sec("model"), sec("discount"), sec("contract"), sec("task"), sec("numerics"));

        let calibrate = match m.take::<String>("calibrate")? {
            None => true,
            Some(v) => parse_bool(&v)
                .ok_or_else(|| CliError::Config(format!("[model] calibrate: expected true or false, got '{v}'")))?,
        };
        let model = ModelBlock {
            r: m.require("r")?,
            sigma: m.get("sigma", 0.0)?,
            lambda: m.get("lambda", 0.0)?,
            phi: m.get("phi", 1.0)?,
            calibrate,
            carry: m.get("carry", 0.0)?,
            mu: if calibrate { f64::NAN } else { m.require("mu")? },
        };
        m.finish()?;

        let kind: String = d.require("kind")?;
        let discount = match kind.as_str() {
            "constant" => DiscountBlock::Constant { r: d.require("r")? },
            "linear" => DiscountBlock::Linear { c: d.require("c")? },
            "rational" => DiscountBlock::Rational {
                c: d.require("c")?,
                d: d.require("d")?,
            },
            "step" => {
                let side: String = d.get("side", "above".to_string())?;
                DiscountBlock::Step {
                    r: d.require("r")?,
                    jump: d.require("jump")?,
                    level: d.require("level")?,
                    side: match side.as_str() {
                        "above" => StepSide::Above,
                        "below" => StepSide::Below,
                        _ => return Err(CliError::Config(format!("[discount] side: expected above or below, got '{side}'"))),
                    },
                }
            }
            "log_area" => DiscountBlock::LogArea { strike: d.require("strike")? },
            "tabulated" => DiscountBlock::Tabulated {
                s: d.list("s")?.ok_or_else(|| CliError::Config("[discount] s is required".into()))?,
                omega: d
                    .list("omega")?
                    .ok_or_else(|| CliError::Config("[discount] omega is required".into()))?,
            },
            other => return Err(CliError::Config(format!("[discount] unknown kind '{other}'"))),
        };
        d.finish()?;

        let payoff: String = c.get("payoff", "put".to_string())?;
        let payoff = match payoff.as_str() {
            "put" => Payoff::Put,
            "call" => Payoff::Call,
            _ => return Err(CliError::Config(format!("[contract] payoff: expected put or call, got '{payoff}'"))),
        };
        let strike: f64 = c.require("strike")?;
        c.finish()?;

        let kind: String = t.get("kind", "price".to_string())?;
        let task = TaskBlock {
            kind: kind.parse().map_err(|e| CliError::Config(format!("[task] {e}")))?,
            spots: t.list("spots")?.unwrap_or_else(|| vec![1.25 * strike]),
            u: t.get("u", strike)?,
            l_c: t.take("l_c")?,
            u_c: t.take("u_c")?,
            horizon: t.get("horizon", 10.0)?,
            xi: t.get("xi", 6)?,
        };
        t.finish()?;

        let branch: String = n.get("upper_branch", "recessive".to_string())?;
        let numerics = Numerics {
            curve_points: n.get("curve_points", 512)?,
            coarse_points: n.get("coarse_points", 64)?,
            upper_branch: match branch.as_str() {
                "recessive" => UpperBranch::Recessive,
                "frobenius" => UpperBranch::FrobeniusAtZero,
                _ => {
                    return Err(CliError::Config(format!(
                        "[numerics] upper_branch: expected recessive or frobenius, got '{branch}'"
                    )))
                }
            },
            n_paths: n.get("n_paths", 200_000)?,
            dt: n.get("dt", 1e-3)?,
            dt_far: n.get("dt_far", 0.5)?,
            t_max: n.get("t_max", 1000.0)?,
            seed: n.get("seed", 42)?,
            antithetic: match n.take::<String>("antithetic")? {
                None => false,
                Some(v) => parse_bool(&v).ok_or_else(|| {
                    CliError::Config(format!("[numerics] antithetic: expected true or false, got '{v}'"))
                })?,
            },
            exhaustion: n.get("exhaustion", 1e-8)?,
            scale_x_max: n.get("scale_x_max", 3.0)?,
            scale_step: n.get("scale_step", 2e-3)?,
            dp_step: n.get("dp_step", 5e-3)?,
            dp_log_below: n.get("dp_log_below", 4.0)?,
            dp_log_above: n.get("dp_log_above", 6.0)?,
        };
        n.finish()?;

        let cfg = RunConfig {
            model,
            discount,
            payoff,
            strike,
            task,
            numerics,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        let t = &self.task;
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return bad("[contract] strike must be positive");
        }
        if t.spots.is_empty() || t.spots.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("[task] spots must be positive");
        }
        if !(t.u > 0.0 && t.horizon > 0.0) || t.xi > 16 {
            return bad("[task] need u > 0, horizon > 0 and xi <= 16");
        }
        if n.curve_points < 2 || n.coarse_points < 8 || n.n_paths == 0 {
            return bad("[numerics] need curve_points >= 2, coarse_points >= 8 and n_paths > 0");
        }
        let positive = [n.dt, n.dt_far, n.t_max, n.scale_x_max, n.scale_step, n.dp_step, n.dp_log_below, n.dp_log_above];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || n.exhaustion < 0.0 {
            return bad("[numerics] steps, horizons and ranges must be positive");
        }
        Ok(())
    }

    pub fn model(&self) -> omega_pricer::Result<LevyModel> {
        let m = &self.model;
        if m.calibrate {
            LevyModel::martingale(m.r + m.carry, m.sigma, m.lambda, m.phi)
        } else {
            LevyModel::new(m.mu, m.sigma, m.lambda, m.phi)
        }
    }

    pub fn discount(&self) -> omega_pricer::Result<DiscountFn> {
        match &self.discount {
            DiscountBlock::Constant { r } => DiscountFn::constant(*r),
            DiscountBlock::Linear { c } => DiscountFn::linear(*c),
            DiscountBlock::Rational { c, d } => DiscountFn::rational(*c, *d),
            DiscountBlock::Step { r, jump, level, side } => DiscountFn::step(*r, *jump, *level, *side),
            DiscountBlock::LogArea { strike } => DiscountFn::log_area(*strike),
            DiscountBlock::Tabulated { s, omega } => DiscountFn::tabulated(s.clone(), omega.clone()),
        }
    }

    pub fn problem(&self) -> omega_pricer::Result<PricingProblem> {
        PricingProblem::new(self.model()?, self.discount()?, self.strike, self.payoff)
    }

    /// Every setting, defaults included, in the input format.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        let m = &self.model;
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(out, "[model]\nr = {}\nsigma = {}\nlambda = {}\nphi = {}", m.r, m.sigma, m.lambda, m.phi);
        let _ = writeln!(out, "calibrate = {}\ncarry = {}", m.calibrate, m.carry);
        if !m.calibrate {
            let _ = writeln!(out, "mu = {}", m.mu);
        }
        out.push_str("\n[discount]\n");
        let _ = match &self.discount {
            DiscountBlock::Constant { r } => writeln!(out, "kind = constant\nr = {r}"),
            DiscountBlock::Linear { c } => writeln!(out, "kind = linear\nc = {c}"),
            DiscountBlock::Rational { c, d } => writeln!(out, "kind = rational\nc = {c}\nd = {d}"),
            DiscountBlock::Step { r, jump, level, side } => {
                let side = match side {
                    StepSide::Above => "above",
                    StepSide::Below => "below",
                };
                writeln!(out, "kind = step\nr = {r}\njump = {jump}\nlevel = {level}\nside = {side}")
            }
            DiscountBlock::LogArea { strike } => writeln!(out, "kind = log_area\nstrike = {strike}"),
            DiscountBlock::Tabulated { s, omega } => {
                writeln!(out, "kind = tabulated\ns = {}\nomega = {}", list(s), list(omega))
            }
        };
        let payoff = match self.payoff {
            Payoff::Put => "put",
            Payoff::Call => "call",
        };
        let _ = writeln!(out, "\n[contract]\npayoff = {payoff}\nstrike = {}", self.strike);
        let t = &self.task;
        let _ = writeln!(out, "\n[task]\nkind = {}\nspots = {}\nu = {}", t.kind.name(), list(&t.spots), t.u);
        if let Some(l) = t.l_c {
            let _ = writeln!(out, "l_c = {l}");
        }
        if let Some(u) = t.u_c {
            let _ = writeln!(out, "u_c = {u}");
        }
        let _ = writeln!(out, "horizon = {}\nxi = {}", t.horizon, t.xi);
        let n = &self.numerics;
        let branch = match n.upper_branch {
            UpperBranch::Recessive => "recessive",
            UpperBranch::FrobeniusAtZero => "frobenius",
        };
        let _ = writeln!(
            out,
            "\n[numerics]\ncurve_points = {}\ncoarse_points = {}\nupper_branch = {branch}\nn_paths = {}\n\
             dt = {}\ndt_far = {}\nt_max = {}\nseed = {}\nantithetic = {}\nexhaustion = {}\n\
             scale_x_max = {}\nscale_step = {}\ndp_step = {}\ndp_log_below = {}\ndp_log_above = {}",
            n.curve_points,
            n.coarse_points,
            n.n_paths,
            n.dt,
            n.dt_far,
            n.t_max,
            n.seed,
            n.antithetic,
            n.exhaustion,
            n.scale_x_max,
            n.scale_step,
            n.dp_step,
            n.dp_log_below,
            n.dp_log_above
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[model]\nr = 0.05\nsigma = 0.2\n[discount]\nkind = constant\nr = 0.05\n[contract]\nstrike = 20\n";

    #[test]
    fn defaults_fill_the_missing_keys() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.task.kind, Task::Price);
        assert_eq!(cfg.numerics.curve_points, 512);
        assert_eq!(cfg.task.spots, vec![25.0]);
        assert_eq!(cfg.payoff, Payoff::Put);
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = format!("{MINIMAL}[task]\nkind = symmetry\nspots = 0.1, 3e-7, 17\nl_c = 30\n[numerics]\ndt = 0.0007\n");
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_ini()).unwrap();
        assert_eq!(cfg.to_ini(), again.to_ini());
        assert_eq!(again.task.spots[1].to_bits(), 3e-7f64.to_bits());
        assert_eq!(again.task.l_c, Some(30.0));
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        for extra in ["[model]\nvol = 0.3\n", "[extras]\na = 1\n", "[task]\nkind = hedge\n"] {
            let text = format!("{MINIMAL}{extra}");
            let err = RunConfig::parse(&text).unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{extra}: {err}");
        }
    }

    #[test]
    fn uncalibrated_model_needs_a_drift() {
        let text = MINIMAL.replace("sigma = 0.2", "sigma = 0.2\ncalibrate = false");
        assert!(RunConfig::parse(&text).is_err());
        let cfg = RunConfig::parse(&text.replace("calibrate = false", "calibrate = false\nmu = 0.02")).unwrap();
        assert_eq!(cfg.model().unwrap().mu(), 0.02);
    }
}
