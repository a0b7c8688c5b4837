//! JSON game files.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::tensor::{f64_tensor_from_json, index_tensor_from_json, tensor_to_json, Tensor};

use super::{
    assemble_stage_kernel, lower_one_sided, GameDefinition, OneSidedGame, Stage, StageDynamics, StageLabels,
    StageSpaces,
};

/// A parsed game file: either general kernel form or the one-sided shorthand.
#[derive(Clone, Debug, PartialEq)]
pub enum GameFile {
    General(GameDefinition),
    OneSided(OneSidedGame),
}

impl GameFile {
    /// The game in kernel form (one-sided games are lowered).
    pub fn general(&self) -> GameDefinition {
        match self {
            GameFile::General(g) => g.clone(),
            GameFile::OneSided(g) => lower_one_sided(g),
        }
    }

    pub fn one_sided(&self) -> Option<&OneSidedGame> {
        match self {
            GameFile::OneSided(g) => Some(g),
            GameFile::General(_) => None,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            GameFile::General(g) => game_to_json(g),
            GameFile::OneSided(g) => one_sided_to_json(g),
        }
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| Error::parse(path, format!("missing field `{key}`")))
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| Error::parse(path, "expected an object"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::parse(path, "expected an array"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|n| n as usize)
        .ok_or_else(|| Error::parse(path, "expected a non-negative integer"))
}

fn located(e: Error, path: &str) -> Error {
    match e {
        Error::Shape(m) => Error::parse(path, m),
        other => other,
    }
}

const KNOWN_TOP: &[&str] = &["horizon", "stages", "initial", "labels", "one_sided"];
const KNOWN_ONE_SIDED: &[&str] = &["one_sided", "horizon", "transition", "observation2", "cost", "initial"];
const KNOWN_STAGE: &[&str] = &["spaces", "kernel", "cost", "structured"];

fn reject_unknown(obj: &Map<String, Value>, known: &[&str], path: &str) -> Result<()> {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            return Err(Error::parse(path, format!("unknown field `{k}`")));
        }
    }
    Ok(())
}

/// Parses a game file. Syntax errors carry line and column; structural errors
/// carry the JSON path of the offending field.
pub fn load_game(text: &str) -> Result<GameFile> {
    let v: Value = serde_json::from_str(text)?;
    parse_game(&v)
}

pub fn parse_game(v: &Value) -> Result<GameFile> {
    let top = as_object(v, "$")?;
    if top.get("one_sided").and_then(Value::as_bool) == Some(true) {
        return parse_one_sided(top).map(GameFile::OneSided);
    }
    reject_unknown(top, KNOWN_TOP, "$")?;
    let horizon = as_usize(field(top, "horizon", "$")?, "$.horizon")?;
    let stage_vals = as_array(field(top, "stages", "$")?, "$.stages")?;
    if stage_vals.len() != horizon {
        return Err(Error::parse(
            "$.stages",
            format!("horizon is {horizon} but {} stages are given", stage_vals.len()),
        ));
    }
    let labels: Vec<Option<StageLabels>> = match top.get("labels") {
        None | Some(Value::Null) => vec![None; horizon],
        Some(l) => {
            let arr = as_array(l, "$.labels")?;
            if arr.len() != horizon {
                return Err(Error::parse("$.labels", "one label object per stage is required"));
            }
            arr.iter()
                .enumerate()
                .map(|(t, x)| {
                    serde_json::from_value::<StageLabels>(x.clone())
                        .map(|l| (l != StageLabels::default()).then_some(l))
                        .map_err(|e| Error::parse(format!("$.labels[{t}]"), e.to_string()))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut spaces = Vec::with_capacity(horizon);
    for (t, sv) in stage_vals.iter().enumerate() {
        let path = format!("$.stages[{t}]");
        let so = as_object(sv, &path)?;
        reject_unknown(so, KNOWN_STAGE, &path)?;
        let sp: StageSpaces = serde_json::from_value(field(so, "spaces", &path)?.clone())
            .map_err(|e| Error::parse(format!("{path}.spaces"), e.to_string()))?;
        spaces.push(sp);
    }

    let mut stages = Vec::with_capacity(horizon);
    for (t, sv) in stage_vals.iter().enumerate() {
        let path = format!("$.stages[{t}]");
        let so = as_object(sv, &path)?;
        let cost_path = format!("{path}.cost");
        let cost = f64_tensor_from_json(field(so, "cost", &path)?, &cost_path, 3)?;
        let kernel = match (so.get("kernel"), so.get("structured")) {
            (Some(_), Some(_)) => {
                return Err(Error::parse(&path, "give either `kernel` or `structured`, not both"));
            }
            (Some(k), None) => Some(f64_tensor_from_json(k, &format!("{path}.kernel"), 9)?),
            (None, Some(s)) => {
                if t + 1 == horizon {
                    return Err(Error::parse(&path, "the final stage takes no dynamics"));
                }
                let spath = format!("{path}.structured");
                let d = parse_dynamics(s, &spath)?;
                Some(assemble_stage_kernel(&d, &spaces[t], &spaces[t + 1]).map_err(|e| located(e, &spath))?)
            }
            (None, None) => None,
        };
        stages.push(Stage {
            spaces: spaces[t],
            kernel,
            cost,
            labels: labels[t].clone(),
        });
    }
    let initial = f64_tensor_from_json(field(top, "initial", "$")?, "$.initial", 3)?;
    GameDefinition::new(stages, initial)
        .map(GameFile::General)
        .map_err(|e| located(e, "$"))
}

fn parse_dynamics(v: &Value, path: &str) -> Result<StageDynamics> {
    let o = as_object(v, path)?;
    reject_unknown(
        o,
        &["transition", "observation1", "observation2", "xi1", "xi2", "zeta"],
        path,
    )?;
    let f = |k: &str, rank: usize| f64_tensor_from_json(field(o, k, path)?, &format!("{path}.{k}"), rank);
    let i = |k: &str, rank: usize| index_tensor_from_json(field(o, k, path)?, &format!("{path}.{k}"), rank);
    Ok(StageDynamics {
        transition: f("transition", 4)?,
        observation1: f("observation1", 4)?,
        observation2: f("observation2", 4)?,
        xi1: i("xi1", 3)?,
        xi2: i("xi2", 3)?,
        zeta: i("zeta", 6)?,
    })
}

fn parse_one_sided(top: &Map<String, Value>) -> Result<OneSidedGame> {
    reject_unknown(top, KNOWN_ONE_SIDED, "$")?;
    let horizon = as_usize(field(top, "horizon", "$")?, "$.horizon")?;
    let list = |key: &str, rank: usize, expect: usize| -> Result<Vec<Tensor<f64>>> {
        let path = format!("$.{key}");
        let arr = as_array(field(top, key, "$")?, &path)?;
        if arr.len() != expect {
            return Err(Error::parse(&path, format!("expected {expect} stage entries, found {}", arr.len())));
        }
        arr.iter()
            .enumerate()
            .map(|(t, x)| f64_tensor_from_json(x, &format!("{path}[{t}]"), rank))
            .collect()
    };
    let transition = list("transition", 4, horizon.saturating_sub(1))?;
    let observation = list("observation2", 4, horizon.saturating_sub(1))?;
    let cost = list("cost", 3, horizon)?;
    let initial = f64_tensor_from_json(field(top, "initial", "$")?, "$.initial", 1)?;
    OneSidedGame::new(transition, observation, cost, initial.data().to_vec()).map_err(|e| located(e, "$"))
}

pub fn game_to_json(g: &GameDefinition) -> Value {
    let stages: Vec<Value> = g
        .stages()
        .iter()
        .map(|s| {
            let mut o = Map::new();
            o.insert("spaces".into(), serde_json::to_value(s.spaces).expect("plain struct"));
            if let Some(k) = &s.kernel {
                o.insert("kernel".into(), tensor_to_json(k));
            }
            o.insert("cost".into(), tensor_to_json(&s.cost));
            Value::Object(o)
        })
        .collect();
    let mut top = Map::new();
    top.insert("horizon".into(), json!(g.horizon()));
    top.insert("stages".into(), Value::Array(stages));
    top.insert("initial".into(), tensor_to_json(g.initial()));
    if g.stages().iter().any(|s| s.labels.is_some()) {
        let labels: Vec<Value> = g
            .stages()
            .iter()
            .map(|s| serde_json::to_value(s.labels.clone().unwrap_or_default()).expect("plain struct"))
            .collect();
        top.insert("labels".into(), Value::Array(labels));
    }
    Value::Object(top)
}

pub fn one_sided_to_json(g: &OneSidedGame) -> Value {
    let h = g.horizon();
    json!({
        "one_sided": true,
        "horizon": h,
        "transition": (0..h - 1).map(|t| tensor_to_json(g.transition(t))).collect::<Vec<_>>(),
        "observation2": (0..h - 1).map(|t| tensor_to_json(g.observation(t))).collect::<Vec<_>>(),
        "cost": (0..h).map(|t| tensor_to_json(g.cost(t))).collect::<Vec<_>>(),
        "initial": g.initial(),
    })
}
