//! Environment definition files (TOML).
//!
//! ```toml
//! kind = "zerosum_mg"     # bandit | linear_bandit | mdp | zerosum_mg | generalsum_mg | linear_mg
//! players = 2
//! horizon = 1
//! states = 1
//! actions = [2, 2]
//! noise = "bernoulli"     # or "none"
//! initial_state = 0       # optional
//! rewards = [[[[1.0], [0.0], [0.0], [1.0]]]]          # [h][s][joint][reward component]
//! transitions = [[[[1.0], [1.0], [1.0], [1.0]]]]      # [h][s][joint][next state]
//! ```
//!
//! Zero-sum kinds list one reward component (player 0). Linear kinds replace
//! `rewards`/`transitions` by `dim`, `features` (`[s][joint][d]`), `theta`
//! (`[h][d]`) and, for `linear_mg`, `measures` (`[h][d][S]`). Bandits may omit
//! `transitions`.
//!
//! Every error carries the line of the offending key.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::msdm::linear::{linear_bandit, linear_mg};
use crate::msdm::{EnvKind, MsdmEnv, RewardNoise, Shape};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvFile {
    kind: EnvKind,
    players: usize,
    horizon: usize,
    states: usize,
    actions: Vec<usize>,
    #[serde(default)]
    initial_state: usize,
    #[serde(default)]
    noise: RewardNoise,
    rewards: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    transitions: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    dim: Option<usize>,
    features: Option<Vec<Vec<Vec<f64>>>>,
    theta: Option<Vec<Vec<f64>>>,
    measures: Option<Vec<Vec<Vec<f64>>>>,
}

/// Line (1-based) of the first assignment to `key`, or 1.
pub(crate) fn key_line(text: &str, key: &str) -> usize {
    for (i, line) in text.lines().enumerate() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix(key) {
            let rest = rest.trim_start();
            if rest.starts_with('=') {
                return i + 1;
            }
        }
    }
    1
}

pub(crate) fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let line = err
        .span()
        .map(|r| text[..r.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    Error::Config {
        line,
        message: err.message().to_string(),
    }
}

pub fn load_env(path: impl AsRef<Path>) -> Result<MsdmEnv> {
    let text = std::fs::read_to_string(path)?;
    parse_env(&text)
}

pub fn parse_env(text: &str) -> Result<MsdmEnv> {
    let file: EnvFile = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
    build(text, file)
}

fn at(text: &str, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line: key_line(text, key),
        message: format!("{key}: {}", message.into()),
    }
}

fn relabel(text: &str, key: &str, err: Error) -> Error {
    match err {
        Error::Contract(m) => at(text, key, m),
        other => other,
    }
}

fn build(text: &str, f: EnvFile) -> Result<MsdmEnv> {
    if f.actions.len() != f.players {
        return Err(at(
            text,
            "actions",
            format!("{} entries for {} players", f.actions.len(), f.players),
        ));
    }
    let shape = Shape::new(f.horizon, f.states, f.actions.clone())
        .map_err(|e| relabel(text, "actions", e))?;
    let (hz, ns, nj) = (shape.horizon(), shape.n_states(), shape.n_joint());

    match f.kind {
        EnvKind::LinearBandit => {
            let theta = f.theta.ok_or_else(|| at(text, "kind", "linear_bandit needs `theta`"))?;
            let features = f
                .features
                .ok_or_else(|| at(text, "kind", "linear_bandit needs `features`"))?;
            if let Some(d) = f.dim {
                if theta.first().map(Vec::len) != Some(d) {
                    return Err(at(text, "theta", format!("length must equal dim = {d}")));
                }
            }
            if features.len() != 1 {
                return Err(at(text, "features", "linear bandits have a single state"));
            }
            let arms = features[0].iter().map(|a| DVector::from_vec(a.clone())).collect();
            let theta = DVector::from_vec(theta.into_iter().next().unwrap_or_default());
            linear_bandit(arms, theta, f.noise).map_err(|e| relabel(text, "features", e))
        }
        EnvKind::LinearMg => {
            let dim = f.dim.ok_or_else(|| at(text, "kind", "linear_mg needs `dim`"))?;
            let theta = f.theta.ok_or_else(|| at(text, "kind", "linear_mg needs `theta`"))?;
            let features = f.features.ok_or_else(|| at(text, "kind", "linear_mg needs `features`"))?;
            let measures = f.measures.ok_or_else(|| at(text, "kind", "linear_mg needs `measures`"))?;
            if features.len() != ns || features.iter().any(|row| row.len() != nj) {
                return Err(at(text, "features", format!("expected [{ns}][{nj}][{dim}]")));
            }
            if theta.len() != hz || theta.iter().any(|t| t.len() != dim) {
                return Err(at(text, "theta", format!("expected [{hz}][{dim}]")));
            }
            if measures.len() != hz
                || measures
                    .iter()
                    .any(|m| m.len() != dim || m.iter().any(|r| r.len() != ns))
            {
                return Err(at(text, "measures", format!("expected [{hz}][{dim}][{ns}]")));
            }
            let feats = features
                .into_iter()
                .flatten()
                .map(DVector::from_vec)
                .collect();
            let thetas = theta.into_iter().map(DVector::from_vec).collect();
            let mus = measures
                .into_iter()
                .map(|m| {
                    let flat: Vec<f64> = m.into_iter().flatten().collect();
                    DMatrix::from_row_slice(dim, ns, &flat)
                })
                .collect();
            linear_mg(shape, f.initial_state, feats, thetas, mus, f.noise)
                .map_err(|e| relabel(text, "measures", e))
        }
        kind => {
            let reward_dim = if kind.is_zero_sum() { 1 } else { f.players };
            let rewards = f.rewards.ok_or_else(|| at(text, "kind", "missing `rewards`"))?;
            let flat_r = flatten4(&rewards, [hz, ns, nj, reward_dim])
                .map_err(|m| at(text, "rewards", m))?;
            let flat_t = match f.transitions {
                Some(t) => flatten4(&t, [hz, ns, nj, ns]).map_err(|m| at(text, "transitions", m))?,
                None if ns == 1 => vec![1.0; hz * nj],
                None => return Err(at(text, "kind", "missing `transitions`")),
            };
            MsdmEnv::new(kind, shape, f.initial_state, flat_r, flat_t, f.noise).map_err(|e| {
                let key = match &e {
                    Error::Contract(m) if m.contains("transition") => "transitions",
                    Error::Contract(m) if m.contains("initial") => "initial_state",
                    _ => "rewards",
                };
                relabel(text, key, e)
            })
        }
    }
}

fn flatten4(t: &[Vec<Vec<Vec<f64>>>], dims: [usize; 4]) -> std::result::Result<Vec<f64>, String> {
    let expect = format!("expected dense [{}][{}][{}][{}]", dims[0], dims[1], dims[2], dims[3]);
    if t.len() != dims[0] {
        return Err(expect);
    }
    let mut out = Vec::with_capacity(dims.iter().product());
    for a in t {
        if a.len() != dims[1] {
            return Err(expect);
        }
        for b in a {
            if b.len() != dims[2] {
                return Err(expect);
            }
            for c in b {
                if c.len() != dims[3] {
                    return Err(expect);
                }
                out.extend_from_slice(c);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENNIES: &str = r#"
kind = "zerosum_mg"
players = 2
horizon = 1
states = 1
actions = [2, 2]
noise = "none"
rewards = [[[[1.0], [0.0], [0.0], [1.0]]]]
"#;

    #[test]
    fn parses_matrix_game() {
        let env = parse_env(PENNIES).unwrap();
        assert_eq!(env.kind(), EnvKind::ZerosumMg);
        assert_eq!(env.reward_mean(0, 0, 3, 0), 1.0);
        assert_eq!(env.noise(), RewardNoise::None);
    }

    #[test]
    fn bad_reward_points_at_rewards_line() {
        let text = PENNIES.replace("[1.0], [0.0], [0.0], [1.0]", "[1.0], [0.0], [0.0], [1.5]");
        match parse_env(&text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_transition_row_points_at_transitions_line() {
        let text = r#"kind = "mdp"
players = 1
horizon = 1
states = 2
actions = [1]
rewards = [[[[0.5]], [[0.5]]]]
transitions = [[[[0.7, 0.7]], [[0.5, 0.5]]]]
"#;
        match parse_env(text) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 7, "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "kind = \"mdp\"\nplayers = \n";
        match parse_env(text) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_shape_is_reported() {
        let text = PENNIES.replace("[[[[1.0], [0.0], [0.0], [1.0]]]]", "[[[[1.0], [0.0]]]]");
        assert!(matches!(parse_env(&text), Err(Error::Config { line: 8, .. })));
    }

    #[test]
    fn parses_linear_bandit() {
        let text = r#"
kind = "linear_bandit"
players = 1
horizon = 1
states = 1
actions = [3]
dim = 2
features = [[[1.0, 0.0], [0.0, 1.0], [0.7071067811865476, 0.7071067811865476]]]
theta = [[0.6, 0.2]]
"#;
        let env = parse_env(text).unwrap();
        assert_eq!(env.kind(), EnvKind::LinearBandit);
        assert!((env.reward_mean(0, 0, 0, 0) - 0.6).abs() < 1e-12);
        assert_eq!(env.linear_spec().unwrap().dim(), 2);
    }
}
