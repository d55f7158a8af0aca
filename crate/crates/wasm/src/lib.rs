//! Browser bindings for the interactive demo page.
//!
//! Everything crosses the boundary as JSON strings: the page keeps the pool
//! text it got from [`build_pool`] and passes it back into the other calls,
//! so the module itself stays stateless. Errors come back as
//! `{"error": "..."}` objects instead of thrown exceptions.
//!
//! The same functions compile and run natively, which is how they are
//! unit-tested.

use serde_json::json;
use wasm_bindgen::prelude::*;

use demoselect_core::embed::{CachingProvider, HashEmbedder};
use demoselect_core::eval::{annotate_catalog, run_split, run_task_once, ExperimentConfig};
use demoselect_core::miniworld;
use demoselect_core::pool::{parse_pool, pool_to_string};
use demoselect_core::select::{
    select_candidates, trajectory_candidates, Candidate, SelectionMethod, SelectionSpec,
};
use demoselect_core::types::{AnnotationPool, RecordKind, Split};

fn error_json(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse::<Split>()
}

fn parse_method(s: &str) -> Result<SelectionMethod, String> {
    s.parse::<SelectionMethod>()
}

fn pool_from(text: &str) -> Result<AnnotationPool, String> {
    parse_pool(text).map_err(|e| e.to_string())
}

fn str_field<'a>(request: &'a serde_json::Value, name: &str) -> Result<&'a str, String> {
    request
        .get(name)
        .and_then(|v| v.as_str())
        .ok_or_else(|| format!("missing field '{name}'"))
}

/// The built-in task catalog, for populating pickers.
#[wasm_bindgen]
pub fn catalog_json() -> String {
    let tasks: Vec<serde_json::Value> = miniworld::all_tasks()
        .into_iter()
        .map(|mini| {
            json!({
                "task_id": mini.task.task_id,
                "scenario_id": mini.task.scenario_id,
                "variant": mini.task.variant,
                "split": mini.task.split.to_string(),
                "instruction": mini.task.instruction,
            })
        })
        .collect();
    json!({ "tasks": tasks }).to_string()
}

/// Runs iterative annotation over the train+dev catalog splits and returns
/// the pool in its line-delimited text form, plus admission stats.
#[wasm_bindgen]
pub fn build_pool(rounds: u32, solver: &str) -> String {
    let solver_kind = match solver {
        "react" => RecordKind::React,
        "pne" => RecordKind::Pne,
        other => return error_json(format!("unknown solver '{other}'")),
    };
    let result = annotate_catalog(
        &[Split::Train, Split::Dev],
        solver_kind,
        rounds,
        SelectionSpec::new(SelectionMethod::Cosine, 1),
        0,
        None,
    );
    match result {
        Ok(pool) => {
            let rounds_used: Vec<serde_json::Value> = pool
                .records
                .iter()
                .map(|r| json!({ "task_id": r.task.task_id, "round": r.annotated_in_round }))
                .collect();
            json!({
                "pool": pool_to_string(&pool),
                "annotated": pool.records.len(),
                "unannotated": pool.unannotated.len(),
                "admissions": rounds_used,
            })
            .to_string()
        }
        Err(e) => error_json(e),
    }
}

/// Scores and selects demonstrations for a retrieval key.
///
/// Request: `{"key": text, "method": name, "k": n, "seed"?: n,
/// "candidates"?: [{"id": ..., "text": ...}]}`. Without explicit candidates
/// the pool's react-record instructions are used. The reply carries the
/// selection plus a full per-candidate score table for the chosen metric.
#[wasm_bindgen]
pub fn select_demos(pool_jsonl: &str, request_json: &str) -> String {
    let inner = || -> Result<String, String> {
        let request: serde_json::Value =
            serde_json::from_str(request_json).map_err(|e| e.to_string())?;
        let key = str_field(&request, "key")?;
        let method = parse_method(str_field(&request, "method")?)?;
        let k = request.get("k").and_then(|v| v.as_u64()).unwrap_or(2) as usize;
        let seed = request.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);

        let candidates: Vec<Candidate> = match request.get("candidates") {
            Some(serde_json::Value::Array(entries)) => entries
                .iter()
                .map(|entry| {
                    let id = entry
                        .get("id")
                        .and_then(|v| v.as_str())
                        .ok_or("candidate missing 'id'")?;
                    let text = entry
                        .get("text")
                        .and_then(|v| v.as_str())
                        .ok_or("candidate missing 'text'")?;
                    Ok(Candidate::new(id, text))
                })
                .collect::<Result<_, &str>>()
                .map_err(|e| e.to_string())?,
            _ => {
                let pool = pool_from(pool_jsonl)?;
                trajectory_candidates(&pool, "")
            }
        };

        let embed = CachingProvider::new(HashEmbedder::default());
        let spec = SelectionSpec {
            method,
            k,
            seed,
            fixed_id: request
                .get("fixed_id")
                .and_then(|v| v.as_str())
                .map(str::to_string),
        };
        let selection =
            select_candidates(key, &candidates, &spec, &embed).map_err(|e| e.to_string())?;

        // Per-candidate score table with the underlying ranking metric.
        let table_method = match method {
            SelectionMethod::Cosine => SelectionMethod::Cosine,
            _ => SelectionMethod::Bsr,
        };
        let table = select_candidates(
            key,
            &candidates,
            &SelectionSpec::new(table_method, candidates.len().max(1)),
            &embed,
        )
        .map_err(|e| e.to_string())?;

        Ok(json!({
            "selection": selection,
            "all_scores": table.selected,
            "candidate_count": candidates.len(),
        })
        .to_string())
    };
    inner().unwrap_or_else(error_json)
}

/// Runs one catalog task against the scripted provider and reports the
/// trajectory, demonstrations, snippets, and checker verdict.
///
/// Request: `{"task_id": id, "method": name, "k": n, "snippets": bool,
/// "seed"?: n}`.
#[wasm_bindgen]
pub fn run_episode(pool_jsonl: &str, request_json: &str) -> String {
    let inner = || -> Result<String, String> {
        let request: serde_json::Value =
            serde_json::from_str(request_json).map_err(|e| e.to_string())?;
        let task_id = str_field(&request, "task_id")?;
        let method = parse_method(str_field(&request, "method")?)?;
        let k = request.get("k").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let snippets = request
            .get("snippets")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        let seed = request.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);

        let mini = miniworld::lookup_task(task_id)
            .ok_or_else(|| format!("task '{task_id}' is not in the catalog"))?;
        let pool = pool_from(pool_jsonl)?;
        let mut config =
            ExperimentConfig::new(mini.task.split, method, k, std::path::PathBuf::new());
        config.snippets = snippets;
        config.seed = seed;

        let chat = miniworld::scripted_agent_provider();
        let embed = CachingProvider::new(HashEmbedder::default());
        let runtime = demoselect_core::agent::AgentRuntime::new(&pool, &chat, &embed);
        let (result, passed, failed) =
            run_task_once(&runtime, &mini, &config).map_err(|e| e.to_string())?;

        let steps: Vec<serde_json::Value> = result
            .trajectory
            .steps
            .iter()
            .map(|s| {
                json!({
                    "index": s.index,
                    "thought": s.thought,
                    "action": s.action,
                    "observation": s.observation,
                })
            })
            .collect();
        let snippet_steps: Vec<serde_json::Value> = result
            .snippets_used
            .iter()
            .map(|s| {
                json!({
                    "step_index": s.step_index,
                    "snippets": s.snippets.iter().map(|snippet| json!({
                        "source_task": snippet.source.task_id,
                        "source_step": snippet.source.step_index,
                        "match_score": snippet.match_score,
                        "steps": snippet.steps.iter().map(|st| json!({
                            "thought": st.thought,
                            "action": st.action,
                        })).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();

        Ok(json!({
            "task_id": mini.task.task_id,
            "instruction": mini.task.instruction,
            "demos": result.demos_used.selected,
            "steps": steps,
            "outcome": result.outcome.to_string(),
            "final_answer": result.trajectory.final_answer,
            "passed": passed,
            "failed_assertions": failed,
            "input_tokens": result.total_input_tokens,
            "output_tokens": result.total_output_tokens,
            "snippet_steps": snippet_steps,
        })
        .to_string())
    };
    inner().unwrap_or_else(error_json)
}

/// Evaluates a whole split and returns the metric report.
///
/// Request: `{"split": name, "method": name, "k": n, "snippets": bool,
/// "runs"?: n, "seed"?: n}`.
#[wasm_bindgen]
pub fn eval_split(pool_jsonl: &str, request_json: &str) -> String {
    let inner = || -> Result<String, String> {
        let request: serde_json::Value =
            serde_json::from_str(request_json).map_err(|e| e.to_string())?;
        let split = parse_split(str_field(&request, "split")?)?;
        let method = parse_method(str_field(&request, "method")?)?;
        let k = request.get("k").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        let pool = pool_from(pool_jsonl)?;

        let mut config = ExperimentConfig::new(split, method, k, std::path::PathBuf::new());
        config.snippets = request
            .get("snippets")
            .and_then(|v| v.as_bool())
            .unwrap_or(false);
        config.runs = request.get("runs").and_then(|v| v.as_u64()).unwrap_or(1) as usize;
        config.seed = request.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);

        let chat = miniworld::scripted_agent_provider();
        let run = run_split(&pool, &config, &chat).map_err(|e| e.to_string())?;
        Ok(run.report.to_json())
    };
    inner().unwrap_or_else(error_json)
}

#[cfg(target_arch = "wasm32")]
#[wasm_bindgen(start)]
pub fn start() {
    // Surface panics in the browser console instead of a bare trap.
    std::panic::set_hook(Box::new(|info| {
        web_log(&info.to_string());
    }));
}

#[cfg(target_arch = "wasm32")]
#[wasm_bindgen]
extern "C" {
    #[wasm_bindgen(js_namespace = console, js_name = error)]
    fn web_log(s: &str);
}
