//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function takes and returns JSON strings. A structure is
//! exchanged in the same record form as dataset lines, extended by a `view`
//! object holding resolved brick positions and the validity report.

use legogen::dataset::{synth_generate, RecordJson, SynthParams, ARCHETYPES};
use legogen::geometry::{check_validity, implied_edges, resolve_placements, LegoGraph, ValidityReport};
use legogen::harness::permute_once;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bound on bricks per synthesized structure.
pub const MAX_BRICKS: usize = 200;

#[derive(Debug, Serialize)]
pub struct View {
    pub record: RecordJson,
    pub report: ValidityReport,
    /// `[x, y, z, orientation]` per brick; empty when unresolvable.
    pub placements: Vec<(i32, i32, i32, &'static str)>,
    pub implied_missing: usize,
}

fn view(class: &str, g: &LegoGraph) -> View {
    let placements = resolve_placements(g)
        .map(|r| r.placements.iter().map(|p| (p.x, p.y, p.z, p.orientation.code())).collect())
        .unwrap_or_default();
    let implied_missing = implied_edges(g).map(|e| e.len()).unwrap_or(0);
    View { record: RecordJson::from_graph(class, g, None), report: check_validity(g), placements, implied_missing }
}

fn to_json(v: &View) -> String {
    serde_json::to_string(v).expect("view serializes")
}

fn parse(record_json: &str) -> Result<(String, LegoGraph), String> {
    let rec: RecordJson = serde_json::from_str(record_json).map_err(|e| format!("bad record: {e}"))?;
    let g = rec.to_graph()?;
    Ok((rec.class().to_string(), g))
}

pub fn synthesize_json(class: &str, bricks: usize, seed: u64) -> Result<String, String> {
    if !(1..=MAX_BRICKS).contains(&bricks) {
        return Err(format!("brick count must be in 1..={MAX_BRICKS}"));
    }
    let rec = synth_generate(class, SynthParams { min_bricks: bricks, max_bricks: bricks }, seed).map_err(|e| e.to_string())?;
    Ok(to_json(&view(class, &rec.graph)))
}

pub fn check_json(record_json: &str) -> Result<String, String> {
    let (class, g) = parse(record_json)?;
    Ok(to_json(&view(&class, &g)))
}

pub fn permute_json(record_json: &str, steps: usize, seed: u64) -> Result<String, String> {
    let (class, mut g) = parse(record_json)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..steps {
        g = permute_once(&g, &mut rng).map_err(|e| e.to_string())?;
    }
    Ok(to_json(&view(&class, &g)))
}

#[wasm_bindgen]
pub fn archetypes() -> String {
    serde_json::to_string(&ARCHETYPES).expect("names serialize")
}

/// Builds a synthetic structure of the named archetype.
#[wasm_bindgen]
pub fn synthesize(class: &str, bricks: u32, seed: u32) -> Result<String, JsError> {
    synthesize_json(class, bricks as usize, seed.into()).map_err(|e| JsError::new(&e))
}

/// Validity report and brick positions of an edited record.
#[wasm_bindgen]
pub fn check(record_json: &str) -> Result<String, JsError> {
    check_json(record_json).map_err(|e| JsError::new(&e))
}

/// Applies `steps` random add/delete permutations.
#[wasm_bindgen]
pub fn permute(record_json: &str, steps: u32, seed: u32) -> Result<String, JsError> {
    permute_json(record_json, steps as usize, seed.into()).map_err(|e| JsError::new(&e))
}
