use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chromaflow::pipeline::{self, Outcome, PipelineConfig, PreparedSource, Timings, TransferJob};
use chromaflow::regions::{rasterize_closed_path, validate_regions, Correspondence, CorrespondenceSet, PathPoint};
use chromaflow::{io, rgb_to_lab, Error};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::session::{lock, CacheKey, JobState, Mode, Session};
use crate::AppState;

type AppResult<T> = Result<T, ApiError>;

fn upload(body: Result<Bytes, BytesRejection>) -> AppResult<Bytes> {
    let bytes = body.map_err(|e| {
        let status = e.status();
        let error = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "upload too large"
        } else {
            "unreadable body"
        };
        ApiError::new(status, error).with_detail(Value::String(e.body_text()))
    })?;
    if bytes.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty upload"));
    }
    Ok(bytes)
}

fn decode(bytes: &[u8]) -> AppResult<chromaflow::RgbImage> {
    io::decode_rgb(bytes)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "undecodable image").with_detail(e.to_string().into()))
}

pub async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<impl IntoResponse> {
    let image = decode(&upload(body)?)?;
    let id = state.sessions.insert(Session::new(image));
    Ok((StatusCode::CREATED, Json(json!({"id": id}))))
}

pub async fn add_target(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<impl IntoResponse> {
    let session = state.sessions.get(&id)?;
    let image = decode(&upload(body)?)?;
    let target_id = uuid::Uuid::new_v4().to_string();
    lock(&session).targets.insert(target_id.clone(), Arc::new(image));
    Ok((StatusCode::CREATED, Json(json!({"target_id": target_id}))))
}

/// One scribbled closed path (or pair of paths), in image pixel
/// coordinates.
#[derive(Debug, Clone, PartialEq, Deserialize, serde::Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Scribble {
    Pair {
        target_id: String,
        source_path: Vec<PathPoint>,
        target_path: Vec<PathPoint>,
    },
    Keep {
        source_path: Vec<PathPoint>,
    },
}

fn diagnostic(index: usize, path: &str, error: impl ToString) -> Value {
    json!({"index": index, "path": path, "error": error.to_string()})
}

pub async fn put_correspondences(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> AppResult<StatusCode> {
    let session = state.sessions.get(&id)?;
    let body = upload(body)?;
    let scribbles: Vec<Scribble> = serde_json::from_slice(&body).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed correspondences").with_detail(e.to_string().into())
    })?;
    let (source_dims, target_dims) = {
        let s = lock(&session);
        let targets: HashMap<String, (usize, usize)> = s.targets.iter().map(|(k, v)| (k.clone(), v.dims())).collect();
        (s.source.dims(), targets)
    };

    let mut problems = Vec::new();
    let mut pairs = Vec::new();
    let mut keeps = Vec::new();
    // Request index of each rasterized source mask, for overlap reports.
    let mut pair_origin = Vec::new();
    let mut keep_origin = Vec::new();
    for (i, s) in scribbles.iter().enumerate() {
        match s {
            Scribble::Pair {
                target_id,
                source_path,
                target_path,
            } => {
                let source = rasterize_closed_path(source_path, source_dims.0, source_dims.1);
                let target = match target_dims.get(target_id) {
                    Some(&(w, h)) => Some(rasterize_closed_path(target_path, w, h)),
                    None => {
                        problems.push(diagnostic(i, "target_id", Error::UnknownTarget(target_id.clone())));
                        None
                    }
                };
                match (source, target) {
                    (Ok(src), Some(Ok(tgt))) => {
                        pair_origin.push(i);
                        pairs.push(Correspondence {
                            source_region: src,
                            target_id: target_id.clone(),
                            target_region: tgt,
                        });
                    }
                    (src, tgt) => {
                        if let Err(e) = src {
                            problems.push(diagnostic(i, "source_path", e));
                        }
                        if let Some(Err(e)) = tgt {
                            problems.push(diagnostic(i, "target_path", e));
                        }
                    }
                }
            }
            Scribble::Keep { source_path } => match rasterize_closed_path(source_path, source_dims.0, source_dims.1) {
                Ok(m) => {
                    keep_origin.push(i);
                    keeps.push(m);
                }
                Err(e) => problems.push(diagnostic(i, "source_path", e)),
            },
        }
    }
    if !problems.is_empty() {
        let error = if problems.iter().any(|p| p["error"].as_str().is_some_and(|e| e.starts_with("empty region"))) {
            "empty region"
        } else {
            "invalid correspondences"
        };
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, error).with_detail(json!({"paths": problems})));
    }

    let set = CorrespondenceSet::new(pairs, keeps);
    let set = validate_regions(set, source_dims, &target_dims).map_err(|e| match e {
        Error::OverlappingRegions { count, pairs } => {
            let origin = |label: &str| -> usize {
                let n: usize = label
                    .split(['[', ']'])
                    .nth(1)
                    .and_then(|n| n.parse().ok())
                    .unwrap_or(0);
                if label.starts_with("keep") {
                    keep_origin[n]
                } else {
                    pair_origin[n]
                }
            };
            let mut paths: Vec<usize> = pairs.iter().flat_map(|(a, b)| [origin(a), origin(b)]).collect();
            paths.sort_unstable();
            paths.dedup();
            let overlaps: Vec<[usize; 2]> = pairs.iter().map(|(a, b)| [origin(a), origin(b)]).collect();
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "overlapping regions").with_detail(json!({
                "paths": paths.iter().map(|&i| diagnostic(i, "source_path", "overlapping regions")).collect::<Vec<_>>(),
                "overlaps": overlaps,
                "overlapping_pixels": count,
            }))
        }
        other => ApiError::from(other),
    })?;
    lock(&session).set = set;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Debug, Deserialize)]
pub struct SolveQuery {
    #[serde(default)]
    mode: Option<String>,
}

/// Work handed to the blocking solver.
struct SolveInput {
    job: TransferJob,
    mode: Mode,
    preview_dim: usize,
    cached: Option<Arc<PreparedSource>>,
    warm: Option<[Vec<f64>; 3]>,
}

struct SolveOutput {
    png: Vec<u8>,
    report: Value,
    key: CacheKey,
    prepared: Arc<PreparedSource>,
    solution: [Vec<f64>; 3],
}

fn solve_key(config: &PipelineConfig, dims: (usize, usize)) -> CacheKey {
    (config.prepare_key(), dims)
}

fn solved_dims(source: (usize, usize), mode: Mode, preview_dim: usize) -> (usize, usize) {
    match mode {
        Mode::Full => source,
        Mode::Preview => chromaflow::resample::fit_dims(source.0, source.1, preview_dim),
    }
}

fn run_solve(input: SolveInput) -> chromaflow::Result<SolveOutput> {
    let total = Instant::now();
    let job = match input.mode {
        Mode::Preview if input.job.source.width().max(input.job.source.height()) > input.preview_dim => {
            pipeline::downscale_job(&input.job, input.preview_dim)
        }
        _ => input.job,
    };
    let set = pipeline::validate_job(&job).map_err(|e| e.in_stage("validate"))?;
    let start = Instant::now();
    let targets = pipeline::targets_lab(&job);
    let hit = input.cached.is_some();
    let prepared = match input.cached {
        Some(p) => p,
        None => Arc::new(PreparedSource::new(rgb_to_lab(&job.source), &job.config)?),
    };
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let convert_ms = if hit {
        elapsed
    } else {
        elapsed - prepared.landmarks_ms() - prepared.graph_ms()
    };
    let start = Instant::now();
    let field =
        chromaflow::stats::build_constraints(prepared.lab(), &set, &targets).map_err(|e| e.in_stage("constraints"))?;
    let constraints_ms = start.elapsed().as_secs_f64() * 1e3;
    let solved = prepared.solve(&field, &job.config, input.warm.as_ref())?;
    let outcome = Outcome {
        timings: Timings {
            convert_ms: convert_ms.max(0.0),
            constraints_ms,
            landmarks_ms: if hit { 0.0 } else { prepared.landmarks_ms() },
            graph_ms: if hit { 0.0 } else { prepared.graph_ms() },
            solve_ms: solved.solve_ms,
            reconstruct_ms: solved.reconstruct_ms,
            total_ms: total.elapsed().as_secs_f64() * 1e3,
        },
        image: solved.image,
        lab: solved.lab,
        report: solved.report,
        landmark_count: prepared.landmarks().len(),
        k_used: prepared.k_used(),
        beta_used: prepared.beta_used(),
    };
    let mut report = outcome.status_json();
    report["cache_hit"] = Value::Bool(hit);
    report["mode"] = Value::String(input.mode.as_str().into());
    Ok(SolveOutput {
        png: io::encode_png(&outcome.image)?,
        report,
        key: solve_key(&job.config, job.source.dims()),
        prepared,
        solution: outcome.report.solution,
    })
}

pub async fn solve(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<SolveQuery>,
    body: Bytes,
) -> AppResult<impl IntoResponse> {
    let mode = match query.mode.as_deref() {
        None | Some("full") => Mode::Full,
        Some("preview") => Mode::Preview,
        Some(other) => {
            return Err(ApiError::new(StatusCode::BAD_REQUEST, "unknown mode").with_detail(Value::String(other.into())))
        }
    };
    let config: PipelineConfig = if body.iter().all(u8::is_ascii_whitespace) {
        PipelineConfig::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid config").with_detail(e.to_string().into()))?
    };
    config.validate().map_err(ApiError::from)?;

    let session = state.sessions.get(&id)?;
    let (job_id, input) = {
        let mut s = lock(&session);
        if let Some(running) = &s.running {
            return Err(ApiError::new(StatusCode::CONFLICT, "solve already running")
                .with_detail(json!({"job": running})));
        }
        if s.set.correspondences.is_empty() {
            return Err(ApiError::from(Error::NoCorrespondences));
        }
        let key = solve_key(&config, solved_dims(s.source.dims(), mode, state.config.preview_dim));
        let job = TransferJob {
            source: (*s.source).clone(),
            targets: s
                .targets
                .iter()
                .filter(|(k, _)| s.set.correspondences.iter().any(|c| &c.target_id == *k))
                .map(|(k, v)| (k.clone(), (**v).clone()))
                .collect::<BTreeMap<_, _>>(),
            set: s.set.clone(),
            config,
        };
        let input = SolveInput {
            job,
            mode,
            preview_dim: state.config.preview_dim,
            cached: s.cache.get(&key).cloned(),
            warm: s.warm.get(&key).cloned(),
        };
        let job_id = uuid::Uuid::new_v4().to_string();
        s.running = Some(job_id.clone());
        s.jobs.insert(job_id.clone(), JobState::Running { mode });
        (job_id, input)
    };

    let task_state = state.clone();
    let task_job = job_id.clone();
    tokio::spawn(async move {
        let result = match task_state.solves.acquire().await {
            Ok(_permit) => tokio::task::spawn_blocking(move || run_solve(input))
                .await
                .unwrap_or_else(|e| Err(Error::InvalidConfig(format!("solver task failed: {e}")))),
            Err(_) => Err(Error::InvalidConfig("solver pool closed".into())),
        };
        let mut s = lock(&session);
        let state = match result {
            Ok(out) => {
                s.remember(out.key, out.prepared, out.solution);
                JobState::Done {
                    mode,
                    png: Arc::new(out.png),
                    report: out.report,
                }
            }
            Err(e) => {
                log::warn!("solve {task_job} failed: {e}");
                JobState::Failed {
                    mode,
                    error: ApiError::from(e),
                }
            }
        };
        s.jobs.insert(task_job, state);
        s.running = None;
        s.touch();
    });

    Ok((StatusCode::ACCEPTED, Json(json!({"job": job_id, "mode": mode.as_str()}))))
}

pub async fn result(State(state): State<Arc<AppState>>, Path((id, job)): Path<(String, String)>) -> AppResult<Response> {
    let session = state.sessions.get(&id)?;
    let s = lock(&session);
    match s.jobs.get(&job) {
        None => Err(ApiError::not_found("job")),
        Some(JobState::Running { .. }) => {
            Err(ApiError::new(StatusCode::CONFLICT, "solve in progress").with_detail(json!({"job": job})))
        }
        Some(JobState::Failed { error, .. }) => Err(error.clone()),
        Some(JobState::Done { png, .. }) => {
            Ok(([(header::CONTENT_TYPE, "image/png")], png.as_ref().clone()).into_response())
        }
    }
}

pub async fn status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<Value>> {
    let session = state.sessions.get(&id)?;
    let s = lock(&session);
    let dims = |img: &chromaflow::RgbImage| json!({"width": img.width(), "height": img.height()});
    let targets: serde_json::Map<String, Value> = s.targets.iter().map(|(k, v)| (k.clone(), dims(v))).collect();
    let jobs: serde_json::Map<String, Value> = s.jobs.iter().map(|(k, v)| (k.clone(), v.summary())).collect();
    Ok(Json(json!({
        "id": id,
        "source": dims(&s.source),
        "targets": targets,
        "correspondences": s.set.correspondences.len(),
        "keep_regions": s.set.keep_regions.len(),
        "running": s.running,
        "jobs": jobs,
    })))
}

pub async fn no_route() -> ApiError {
    ApiError::not_found("endpoint")
}
