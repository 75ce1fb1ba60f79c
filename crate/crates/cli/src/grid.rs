use std::fmt::Display;
use std::str::FromStr;

use mmab_core::config::RunConfig;
use mmab_core::schedule::derive_c_eps;
use mmab_core::{Environment, NoiseKind, RewardModel, ScheduleParams};

/// Comma-separated values; the empty string is the empty list.
#[derive(Debug, Clone)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| p.parse::<T>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<_, _>>()
            .map(List)
    }
}

/// Everything a single sweep job needs.
pub struct Setting {
    pub env: Environment,
    pub schedule: ScheduleParams,
    pub horizon: u64,
}

pub struct Point {
    pub parameter: &'static str,
    pub value: String,
    /// The reason the point cannot run, if any.
    pub setting: Result<Setting, String>,
}

fn base(cfg: &RunConfig) -> Setting {
    Setting {
        env: cfg.env.clone(),
        schedule: cfg.schedule,
        horizon: cfg.horizon,
    }
}

pub fn points(cfg: &RunConfig, eps: Vec<f64>, sigma: Vec<f64>, horizon: Vec<u64>) -> Vec<Point> {
    let (m, n) = (cfg.env.num_channels(), cfg.env.table.max_occupancy());
    let mut out = Vec::new();
    for e in eps {
        let mut s = base(cfg);
        s.schedule.eps = e;
        if cfg.raw.schedule.c_eps.is_none() && e > 0.0 && e < 1.0 {
            s.schedule.c_eps = derive_c_eps(e, s.schedule.exp_c, cfg.delta_gap, cfg.nu_min);
        }
        let issues = s.schedule.check(m, n);
        out.push(Point {
            parameter: "eps",
            value: e.to_string(),
            setting: if issues.is_empty() {
                Ok(s)
            } else {
                Err(issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
            },
        });
    }
    for sg in sigma {
        let mut s = base(cfg);
        let setting = if !(sg.is_finite() && sg >= 0.0) {
            Err(format!("noise.sigma: must be finite and >= 0, got {sg}"))
        } else {
            s.env.noise = match cfg.env.noise.kind {
                NoiseKind::Deterministic if sg == 0.0 => RewardModel::deterministic(),
                _ => RewardModel::gaussian(sg),
            };
            Ok(s)
        };
        out.push(Point {
            parameter: "sigma",
            value: sg.to_string(),
            setting,
        });
    }
    for h in horizon {
        let mut s = base(cfg);
        s.horizon = h;
        out.push(Point {
            parameter: "horizon",
            value: h.to_string(),
            setting: Ok(s),
        });
    }
    out
}
