//! HTTP routes. Binary tiles are described in [`crate::tiles`]; JSON
//! errors are `{"code", "message"}` with a 4xx status for bad requests.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use featurelens_core::analytics::{
    cached_pca, correlation_matrix, histogram2d, histogram2d_masked, AxisSpec, HistogramSpec, PcaSpec,
};
use featurelens_core::cloud::{sample_point_cloud, GridAxis, PointCloud, SlicePlane};
use featurelens_core::model::{infer_bonds, DataKind, System, SystemCollection, DEFAULT_BOND_TOLERANCE};
use featurelens_core::selection::{export_selection, export_selection_to_path, Brush, CombineMode};
use featurelens_core::session::{load_session, save_session, ViewSession};
use featurelens_core::Error;
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;

use crate::error::{ApiError, ApiResult};
use crate::params::Params;
use crate::state::{blocking, AppState};
use crate::tiles;

pub const DEFAULT_CLOUD_COUNT: usize = 100_000;
/// Upper bound on a requested point cloud.
pub const MAX_CLOUD_COUNT: usize = 20_000_000;

type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/api/schema", get(schema))
        .route("/api/systems/{id}/atoms", get(atoms))
        .route("/api/systems/{id}/cloud", get(cloud))
        .route("/api/systems/{id}/features", get(features))
        .route("/api/systems/{id}/encoding", get(encoding))
        .route("/api/plot/histogram", get(plot_histogram))
        .route("/api/plot/correlation", get(plot_correlation))
        .route("/api/plot/pca", get(plot_pca))
        .route("/api/selection", get(selection))
        .route("/api/selection/brush", post(selection_brush))
        .route("/api/selection/mask", get(selection_mask))
        .route("/api/export", post(export))
        .route("/api/session", get(get_session).put(put_session))
        .route("/api/events", get(events))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

fn params(q: Result<Query<HashMap<String, String>>, QueryRejection>) -> ApiResult<Params> {
    q.map(|Query(m)| Params(m)).map_err(|e| ApiError::bad_query(e.body_text()))
}

fn json_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
}

fn system<'a>(c: &'a SystemCollection, id: &str) -> ApiResult<&'a System> {
    c.system_index(id)
        .map(|i| &c.systems()[i])
        .ok_or_else(|| ApiError::not_found(format!("unknown system `{id}`")))
}

fn versioned(state: &AppState, selection_version: u64, mut body: Value) -> Json<Value> {
    body["data_version"] = json!(state.data_version());
    body["selection_version"] = json!(selection_version);
    Json(body)
}

fn binary(state: &AppState, selection_version: Option<u64>, bytes: Vec<u8>) -> Response {
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(tiles::CONTENT_TYPE));
    headers.insert("x-data-version", HeaderValue::from_str(&state.data_version()).unwrap());
    if let Some(v) = selection_version {
        headers.insert("x-selection-version", HeaderValue::from(v));
    }
    (headers, bytes).into_response()
}

async fn index() -> Json<Value> {
    Json(json!({
        "name": "featurelens",
        "endpoints": [
            "GET /api/schema",
            "GET /api/systems/{id}/atoms",
            "GET /api/systems/{id}/cloud?count=&seed=&axis=&index=&thickness=",
            "GET /api/systems/{id}/features?kind=&columns=",
            "GET /api/systems/{id}/encoding?kind=",
            "GET /api/plot/histogram?kind=&x=&y=&x_transforms=&y_transforms=&bins=&x_range=&y_range=&pca=&standardized=&selection=",
            "GET /api/plot/correlation?kind=&columns=",
            "GET /api/plot/pca?kind=&columns=&k=&standardized=&bins=&selection=",
            "GET /api/selection",
            "POST /api/selection/brush",
            "GET /api/selection/mask?system=&kind=",
            "POST /api/export",
            "GET /api/session",
            "PUT /api/session",
            "GET /api/events",
        ],
    }))
}

fn column_summaries(c: &SystemCollection, kind: DataKind) -> Vec<Value> {
    let Some(schema) = c.schema(kind) else { return Vec::new() };
    let segments = c.segments(kind);
    schema
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let cols: Vec<_> = segments.iter().map(|s| s.table.column_at(j)).collect();
            let min = cols.iter().map(|c| c.finite_min()).fold(f64::INFINITY, f64::min);
            let max = cols.iter().map(|c| c.finite_max()).fold(f64::NEG_INFINITY, f64::max);
            let non_finite: usize = cols.iter().map(|c| c.non_finite_count()).sum();
            let unit = cols.iter().find_map(|c| c.unit());
            json!({
                "name": name,
                "unit": unit,
                "min": min.is_finite().then_some(min),
                "max": max.is_finite().then_some(max),
                "non_finite": non_finite,
            })
        })
        .collect()
}

/// Schema summary shared by the endpoint and the `stats` command.
pub fn schema_json(c: &SystemCollection) -> Value {
    let systems: Vec<Value> = c
        .systems()
        .iter()
        .map(|s| {
            let grid = s.grid.as_ref().map(|g| {
                json!({ "shape": g.shape(), "origin": g.origin(), "basis": g.basis() })
            });
            json!({
                "id": s.id,
                "atoms": s.len(DataKind::Atom),
                "voxels": s.len(DataKind::Voxel),
                "grid": grid,
                "periodic": s.atoms.as_ref().and_then(|a| a.cell()).is_some_and(|c| c.is_periodic()),
            })
        })
        .collect();
    json!({
        "systems": systems,
        "totals": { "atom": c.total(DataKind::Atom), "voxel": c.total(DataKind::Voxel) },
        "columns": {
            "atom": column_summaries(c, DataKind::Atom),
            "voxel": column_summaries(c, DataKind::Voxel),
        },
    })
}

async fn schema(State(state): Shared) -> Json<Value> {
    let v = state.selection_version();
    versioned(&state, v, schema_json(&state.collection))
}

async fn atoms(
    State(state): Shared,
    Path(id): Path<String>,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let p = params(q)?;
    p.allow(&["tolerance"])?;
    let tolerance = p.parse::<f64>("tolerance")?.unwrap_or(DEFAULT_BOND_TOLERANCE);
    let s = system(&state.collection, &id)?;
    let frame = s.atoms.as_ref().ok_or_else(|| ApiError::not_found(format!("system `{id}` has no atoms")))?;
    let bonds = infer_bonds(frame, tolerance)?;
    Ok(binary(&state, None, tiles::atoms_tile(frame, &bonds)))
}

fn slice_plane(p: &Params) -> ApiResult<Option<SlicePlane>> {
    let Some(axis) = p.parse::<GridAxis>("axis")? else {
        if p.get("index").is_some() || p.get("thickness").is_some() {
            return Err(ApiError::bad_query("`index` and `thickness` need `axis`"));
        }
        return Ok(None);
    };
    Ok(Some(SlicePlane {
        axis,
        index: p.parse("index")?.unwrap_or(0),
        thickness: p.parse("thickness")?.unwrap_or(1),
    }))
}

async fn cloud(
    State(state): Shared,
    Path(id): Path<String>,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let p = params(q)?;
    p.allow(&["count", "seed", "axis", "index", "thickness"])?;
    system(&state.collection, &id)?
        .grid
        .as_ref()
        .ok_or_else(|| ApiError::not_found(format!("system `{id}` has no volume")))?;
    let stored = state.with_owner(|_, o| o.session.clouds.get(&id).cloned()).await;
    let count = p.parse::<usize>("count")?.or(stored.as_ref().map(|s| s.target_count)).unwrap_or(DEFAULT_CLOUD_COUNT);
    if count > MAX_CLOUD_COUNT {
        return Err(ApiError::bad_query(format!("count {count} exceeds the limit of {MAX_CLOUD_COUNT}")));
    }
    let seed = p.parse::<u64>("seed")?.or(stored.as_ref().map(|s| s.seed)).unwrap_or(0);
    let plane = slice_plane(&p)?.or(stored.and_then(|s| s.slice));
    let c = state.collection.clone();
    let bytes = blocking(move || {
        let grid = c.systems()[c.system_index(&id).unwrap()].grid.as_ref().unwrap();
        let cloud = sample_point_cloud(grid, count, seed)?;
        let cloud = match plane {
            Some(plane) => {
                let keep = cloud.points_in_slice(grid, &plane)?;
                PointCloud {
                    positions: keep.iter().map(|&i| cloud.positions[i]).collect(),
                    source_voxel: keep.iter().map(|&i| cloud.source_voxel[i]).collect(),
                    ..cloud
                }
            }
            None => cloud,
        };
        Ok(tiles::cloud_tile(&cloud))
    })
    .await?;
    Ok(binary(&state, None, bytes))
}

async fn features(
    State(state): Shared,
    Path(id): Path<String>,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let p = params(q)?;
    p.allow(&["kind", "columns"])?;
    let kind = p.kind(&state.collection)?;
    let s = system(&state.collection, &id)?;
    let table = s.table(kind).ok_or_else(|| ApiError::not_found(format!("system `{id}` has no {kind} data")))?;
    let names = p.list("columns").unwrap_or_else(|| table.column_names().into_iter().map(String::from).collect());
    let cols = names
        .iter()
        .map(|n| table.column(n).map(|c| c.values()).ok_or_else(|| Error::UnknownColumn(n.clone()).into()))
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(binary(&state, None, tiles::features_tile(table.n_points(), &cols)))
}

async fn encoding(
    State(state): Shared,
    Path(id): Path<String>,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let p = params(q)?;
    p.allow(&["kind"])?;
    let kind = p.kind(&state.collection)?;
    let s = system(&state.collection, &id)?;
    let table = s.table(kind).ok_or_else(|| ApiError::not_found(format!("system `{id}` has no {kind} data")))?;
    let spec = state
        .with_owner(|_, o| {
            let enc = o.session.encodings.get(&id).cloned().unwrap_or_default();
            match kind {
                DataKind::Atom => enc.atoms,
                DataKind::Voxel => enc.voxels,
            }
        })
        .await;
    let sizes = spec.sizes(table)?;
    let colors = spec.color_positions(table)?;
    Ok(binary(&state, None, tiles::encoding_tile(table.n_points(), sizes.as_deref(), colors.as_deref())))
}

fn wants_selection(p: &Params) -> ApiResult<bool> {
    match p.get("selection") {
        None | Some("none") => Ok(false),
        Some("brushed") => Ok(true),
        Some(v) => Err(ApiError::bad_query(format!("`selection={v}`: expected `none` or `brushed`"))),
    }
}

/// Full histogram (cached per data version) plus, on request, the counts
/// of the currently selected points over the same edges.
async fn histogram_product(state: &Arc<AppState>, kind: DataKind, spec: HistogramSpec, brushed: bool) -> ApiResult<Value> {
    let snap = state.snapshot();
    let st = state.clone();
    blocking(move || {
        let c = &st.collection;
        let key = serde_json::to_string(&(kind, &spec)).expect("spec serializes");
        let full = st.histograms.get_or_try_insert(key, c.data_version(), || histogram2d(c, kind, &spec).map(Arc::new))?;
        let mut body = json!({ "kind": kind, "histogram": *full, "selection_version": snap.version });
        if brushed {
            body["selected_counts"] = json!(histogram2d_masked(c, kind, &spec, snap.mask(kind))?.counts);
        }
        Ok(body)
    })
    .await
}

async fn plot_histogram(
    State(state): Shared,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let p = params(q)?;
    p.allow(&[
        "kind", "x", "y", "x_transforms", "y_transforms", "bins", "x_range", "y_range", "pca", "standardized", "selection",
    ])?;
    let kind = p.kind(&state.collection)?;
    let [bx, by] = p.bins()?;
    let mut spec = HistogramSpec::new(p.axis("x")?, p.axis("y")?).with_bins(bx, by);
    spec.x_range = p.pair("x_range")?;
    spec.y_range = p.pair("y_range")?;
    let brushed = wants_selection(&p)?;
    let body = histogram_product(&state, kind, spec, brushed).await?;
    let v = body["selection_version"].as_u64().unwrap_or(0);
    Ok(versioned(&state, v, body))
}

fn analysis_columns(p: &Params, c: &SystemCollection, kind: DataKind) -> ApiResult<Vec<String>> {
    match p.list("columns") {
        Some(cols) => Ok(cols),
        None => c
            .schema(kind)
            .map(|s| s.to_vec())
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "schema_error", format!("no {kind} columns loaded"))),
    }
}

async fn plot_correlation(
    State(state): Shared,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let p = params(q)?;
    p.allow(&["kind", "columns"])?;
    let kind = p.kind(&state.collection)?;
    let columns = analysis_columns(&p, &state.collection, kind)?;
    let c = state.collection.clone();
    let m = blocking(move || Ok(correlation_matrix(&c, kind, &columns)?)).await?;
    let v = state.selection_version();
    Ok(versioned(&state, v, json!({ "kind": kind, "matrix": m })))
}

async fn plot_pca(
    State(state): Shared,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Json<Value>> {
    let p = params(q)?;
    p.allow(&["kind", "columns", "k", "standardized", "bins", "selection"])?;
    let kind = p.kind(&state.collection)?;
    let columns = analysis_columns(&p, &state.collection, kind)?;
    let k = p.parse::<usize>("k")?.unwrap_or(2);
    if k == 0 {
        return Err(ApiError::bad_query("`k` must be at least 1"));
    }
    let standardized = p.flag("standardized", true)?;
    let [bx, by] = p.bins()?;
    let brushed = wants_selection(&p)?;
    let spec = PcaSpec {
        columns: columns.clone(),
        k,
        standardized,
    };
    let c = state.collection.clone();
    let model = blocking(move || Ok(cached_pca(&c, kind, &spec)?)).await?;
    let axis = |i| AxisSpec::principal(columns.clone(), standardized, i);
    let hist = HistogramSpec::new(axis(0), axis(if k >= 2 { 1 } else { 0 })).with_bins(bx, by);
    let mut body = histogram_product(&state, kind, hist, brushed).await?;
    body["model"] = serde_json::to_value(&*model).expect("model serializes");
    body["explained_variance_ratio"] = json!(model.explained_variance_ratio());
    let v = body["selection_version"].as_u64().unwrap_or(0);
    Ok(versioned(&state, v, body))
}

fn selection_body(state: &AppState, version: u64, brushes: &[Brush], mode: CombineMode) -> Json<Value> {
    let snap = state.snapshot();
    versioned(
        state,
        version,
        json!({
            "combine_mode": mode,
            "brushes": brushes,
            "selected": AppState::selected_counts(&snap),
        }),
    )
}

async fn selection(State(state): Shared) -> Json<Value> {
    let (v, brushes, mode) = state
        .with_owner(|_, o| (o.selection.version(), o.selection.brushes().to_vec(), o.selection.combine_mode()))
        .await;
    selection_body(&state, v, &brushes, mode)
}

/// Body of `POST /api/selection/brush`: a bare brush (add or replace by
/// id) or one of the tagged operations.
#[derive(Debug, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum BrushOp {
    Apply { brush: Brush },
    Remove { brush_id: String },
    Clear,
    CombineMode { mode: CombineMode },
    Replace { brushes: Vec<Brush>, combine_mode: CombineMode },
}

fn parse_brush_op(body: &[u8]) -> ApiResult<BrushOp> {
    let v: Value = json_body(body)?;
    if v.get("op").is_some() {
        serde_json::from_value(v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))
    } else {
        let brush = serde_json::from_value(v).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string()))?;
        Ok(BrushOp::Apply { brush })
    }
}

async fn selection_brush(State(state): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let op = parse_brush_op(&body)?;
    let (v, brushes, mode) = state
        .mutate(move |c, o| {
            let s = &mut o.selection;
            match op {
                BrushOp::Apply { brush } => s.apply_brush(c, brush),
                BrushOp::Remove { brush_id } => s.remove_brush(c, &brush_id),
                BrushOp::Clear => s.clear(c),
                BrushOp::CombineMode { mode } => s.set_combine_mode(c, mode),
                BrushOp::Replace { brushes, combine_mode } => s.set_brushes(c, brushes, combine_mode),
            }?;
            Ok((s.version(), s.brushes().to_vec(), s.combine_mode()))
        })
        .await?;
    Ok(selection_body(&state, v, &brushes, mode))
}

async fn selection_mask(
    State(state): Shared,
    q: Result<Query<HashMap<String, String>>, QueryRejection>,
) -> ApiResult<Response> {
    let p = params(q)?;
    p.allow(&["system", "kind"])?;
    let id = p.required("system")?;
    let kind: DataKind = p.required("kind")?.parse()?;
    let c = &state.collection;
    let i = c.system_index(id).ok_or_else(|| ApiError::not_found(format!("unknown system `{id}`")))?;
    let snap = state.snapshot();
    let offs = c.offsets(kind);
    let runs = snap.mask(kind).runs(offs[i], offs[i + 1]);
    Ok(binary(&state, Some(snap.version), tiles::mask_tile(&runs)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportRequest {
    kind: DataKind,
    /// Server-side destination; without it the CSV is returned.
    #[serde(default)]
    path: Option<std::path::PathBuf>,
}

async fn export(State(state): Shared, body: Bytes) -> ApiResult<Response> {
    let req: ExportRequest = json_body(&body)?;
    let snap = state.snapshot();
    let st = state.clone();
    blocking(move || {
        let c = &st.collection;
        let mask = snap.mask(req.kind);
        match &req.path {
            Some(path) => {
                let rows = export_selection_to_path(c, mask, req.kind, path)?;
                let body = json!({ "rows": rows, "path": path, "selection_version": snap.version });
                Ok(Json(body).into_response())
            }
            None => {
                let mut out = Vec::new();
                let rows = export_selection(c, mask, req.kind, &mut out)?;
                let mut headers = HeaderMap::new();
                headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("text/csv"));
                headers.insert("x-rows", HeaderValue::from(rows));
                headers.insert("x-selection-version", HeaderValue::from(snap.version));
                Ok((headers, out).into_response())
            }
        }
    })
    .await
}

async fn current_session(state: &AppState) -> ViewSession {
    state
        .with_owner(|c, o| {
            let captured = ViewSession::capture(c, &o.selection);
            ViewSession {
                plots: o.session.plots.clone(),
                encodings: o.session.encodings.clone(),
                clouds: o.session.clouds.clone(),
                cameras: o.session.cameras.clone(),
                ..captured
            }
        })
        .await
}

async fn get_session(State(state): Shared) -> Response {
    let s = current_session(&state).await;
    ([(header::CONTENT_TYPE, "application/json")], save_session(&s)).into_response()
}

async fn put_session(State(state): Shared, body: Bytes) -> ApiResult<Json<Value>> {
    let (v, warnings) = state
        .mutate(move |c, o| {
            let restored = load_session(&body, c)?;
            let sel = &restored.session.selection;
            // Reapplied on the live state so versions keep increasing.
            let v = o.selection.set_brushes(c, sel.brushes.clone(), sel.combine_mode)?;
            o.session = restored.session;
            Ok((v, restored.warnings))
        })
        .await?;
    Ok(versioned(&state, v, json!({ "warnings": warnings })))
}

/// Push channel: a `selection` event with the current versions on
/// connect, then one per committed change. A subscriber that falls
/// `EVENT_QUEUE` messages behind gets a `reconnect` event and is dropped.
async fn events(State(state): Shared) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = state.subscribe();
    let first = state.event(state.selection_version());
    let selection_event = |e: &crate::state::SelectionEvent| {
        Event::default().event("selection").json_data(e).expect("event serializes")
    };
    let init = stream::once({
        let ev = selection_event(&first);
        async move { Ok(ev) }
    });
    let last = first.selection_version;
    let rest = stream::unfold(Some((rx, last)), move |st| async move {
        let (mut rx, mut last) = st?;
        loop {
            match rx.recv().await {
                Ok(e) if e.selection_version <= last => continue,
                Ok(e) => {
                    last = e.selection_version;
                    return Some((Ok(selection_event(&e)), Some((rx, last))));
                }
                Err(RecvError::Lagged(n)) => {
                    let ev = Event::default()
                        .event("reconnect")
                        .json_data(json!({ "reason": "lagged", "missed": n }))
                        .expect("event serializes");
                    return Some((Ok(ev), None));
                }
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(futures::StreamExt::chain(init, rest)).keep_alive(KeepAlive::default())
}
