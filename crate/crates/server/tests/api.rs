use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::http::{Request, StatusCode};
use axum::Router;
use featurelens_core::analytics::{histogram2d, AxisSpec, HistogramSpec, Transform};
use featurelens_core::ingest::load_manifest;
use featurelens_core::model::{DataKind, SystemCollection};
use featurelens_core::selection::{brush_projection, Brush, CombineMode, SelectionState};
use featurelens_core::synthetic::{write_case_study, CASE_STUDY_SYSTEMS, ERROR_COLUMN};
use featurelens_server::tiles::{decode_header, expand_runs, read_f32s, read_u32s, TileKind, HEADER_LEN};
use featurelens_server::{router, AppState};
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    app: Router,
    state: Arc<AppState>,
}

fn fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_case_study(dir.path(), 0.3).unwrap();
    let state = AppState::new(load_manifest(&manifest).unwrap());
    Fixture {
        _dir: dir,
        app: router(state.clone()),
        state,
    }
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Vec<u8>>) -> (StatusCode, Bytes, axum::http::HeaderMap) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, bytes, headers)
}

async fn get_json(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b, _) = send(app, "GET", uri, None).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (s, b, _) = send(app, "POST", uri, Some(serde_json::to_vec(&body).unwrap())).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

fn tail_brush() -> Brush {
    Brush::new(
        "tail",
        "error_vs_density",
        DataKind::Voxel,
        AxisSpec::column("density").with_transforms(vec![Transform::Log10]),
        AxisSpec::column(ERROR_COLUMN).with_transforms(vec![Transform::Log10]),
        [1.0, 10.0],
        [-0.5, 10.0],
    )
}

fn brute_count(c: &SystemCollection, system: usize, b: &Brush) -> usize {
    let t = c.systems()[system].grid.as_ref().unwrap().features();
    let x = t.column("density").unwrap().values();
    let y = t.column(ERROR_COLUMN).unwrap().values();
    x.iter()
        .zip(y)
        .filter(|(&x, &y)| {
            let (x, y) = (x.log10(), y.log10());
            x.is_finite() && y.is_finite() && x >= b.x_range[0] && x <= b.x_range[1] && y >= b.y_range[0] && y <= b.y_range[1]
        })
        .count()
}

#[tokio::test]
async fn schema_lists_systems_and_columns() {
    let f = fixture();
    let (s, v) = get_json(&f.app, "/api/schema").await;
    assert_eq!(s, StatusCode::OK);
    let systems = v["systems"].as_array().unwrap();
    assert_eq!(systems.len(), 3);
    assert_eq!(systems.iter().map(|s| s["id"].as_str().unwrap()).collect::<Vec<_>>(), CASE_STUDY_SYSTEMS);
    assert_eq!(v["columns"]["voxel"].as_array().unwrap().len(), 47 + 1);
    assert_eq!(v["columns"]["voxel"][0]["name"], "density");
    assert_eq!(v["totals"]["voxel"].as_u64().unwrap() as usize, f.state.collection.total(DataKind::Voxel));
    assert_eq!(v["selection_version"], 0);
    assert_eq!(v["data_version"].as_str().unwrap().len(), 16);
}

#[tokio::test]
async fn brush_then_mask_matches_predicate() {
    let f = fixture();
    let (s, v) = post_json(&f.app, "/api/selection/brush", serde_json::to_value(tail_brush()).unwrap()).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["selection_version"], 1);
    let c = &f.state.collection;
    let mut total = 0;
    for (i, id) in CASE_STUDY_SYSTEMS.iter().enumerate() {
        let (s, body, headers) = send(&f.app, "GET", &format!("/api/selection/mask?system={id}&kind=voxel"), None).await;
        assert_eq!(s, StatusCode::OK);
        assert_eq!(headers["x-selection-version"], "1");
        let (h, payload) = decode_header(&body).unwrap();
        assert_eq!(h.kind, TileKind::Mask);
        let runs = read_u32s(payload);
        assert_eq!(runs.len(), h.count as usize);
        let flags = expand_runs(&runs);
        assert_eq!(flags.len(), c.systems()[i].len(DataKind::Voxel));
        let selected = flags.iter().filter(|&&b| b).count();
        assert_eq!(selected, brute_count(c, i, &tail_brush()), "{id}");
        assert!(selected > 0, "{id}");
        total += selected;
    }
    assert_eq!(v["selected"]["voxel"].as_u64().unwrap() as usize, total);
    // With no atom brush the atom pool stays fully selected.
    let (_, body, _) = send(&f.app, "GET", "/api/selection/mask?system=CO2&kind=atom", None).await;
    assert_eq!(read_u32s(decode_header(&body).unwrap().1), [0, 3]);
}

#[tokio::test]
async fn cloud_tiles() {
    let f = fixture();
    let (s, body, _) = send(&f.app, "GET", "/api/systems/CO2/cloud?count=0", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body.len(), HEADER_LEN);
    let (h, _) = decode_header(&body).unwrap();
    assert_eq!((h.kind, h.count, h.payload_len), (TileKind::Cloud, 0, 0));

    let (_, body, _) = send(&f.app, "GET", "/api/systems/CO2/cloud?count=5000&seed=3", None).await;
    let (h, p) = decode_header(&body).unwrap();
    assert_eq!(h.count, 5000);
    assert_eq!(h.payload_len, 5000 * 16);
    let grid = f.state.collection.systems()[0].grid.as_ref().unwrap();
    let pos = read_f32s(&p[..5000 * 12]);
    let src = read_u32s(&p[5000 * 12..]);
    for (k, &v) in src.iter().enumerate() {
        let c = grid.voxel_center(v as usize);
        for a in 0..3 {
            assert!((pos[3 * k + a] as f64 - c[a]).abs() <= 0.3 / 2.0 + 1e-5);
        }
    }
    let (_, again, _) = send(&f.app, "GET", "/api/systems/CO2/cloud?count=5000&seed=3", None).await;
    assert_eq!(body, again);

    let (_, sliced, _) = send(&f.app, "GET", "/api/systems/CO2/cloud?count=5000&seed=3&axis=z&index=5&thickness=3", None).await;
    let (h, p) = decode_header(&sliced).unwrap();
    assert!(h.count < 5000);
    for v in read_u32s(&p[h.count as usize * 12..]) {
        let [_, _, iz] = grid.unravel(v as usize);
        assert!((5..8).contains(&iz));
    }
}

#[tokio::test]
async fn atoms_tile_has_bonds() {
    let f = fixture();
    let (s, body, _) = send(&f.app, "GET", "/api/systems/HCOOH/atoms", None).await;
    assert_eq!(s, StatusCode::OK);
    let (h, p) = decode_header(&body).unwrap();
    assert_eq!(h.count, 5);
    let n = 5;
    assert_eq!(read_u32s(&p[n * 12..n * 16]), [6, 8, 8, 1, 1]);
    let nb = read_u32s(&p[n * 16..n * 16 + 4])[0] as usize;
    assert_eq!(nb, 4);
    assert_eq!(p.len(), n * 16 + 4 + nb * 8);
}

#[tokio::test]
async fn fuzzed_tiles_match_their_length_prefix() {
    let f = fixture();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut ok = 0;
    for _ in 0..150 {
        let id = ["CO2", "N2O", "HCOOH", "nope"][rng.random_range(0..4)];
        let uri = match rng.random_range(0..5) {
            0 => {
                let mut u = format!("/api/systems/{id}/cloud?count={}&seed={}", rng.random_range(0..3000), rng.random::<u32>());
                if rng.random_bool(0.4) {
                    let axis = ["x", "y", "z", "w"][rng.random_range(0..4)];
                    u += &format!("&axis={axis}&index={}&thickness={}", rng.random_range(0..40), rng.random_range(0..5));
                }
                u
            }
            1 => format!("/api/systems/{id}/atoms?tolerance={}", rng.random_range(0.5..2.0)),
            2 => format!("/api/selection/mask?system={id}&kind={}", ["atom", "voxel", "points"][rng.random_range(0..3)]),
            3 => format!("/api/systems/{id}/features?kind=voxel&columns=density,{}", ["error", "mcsh_3", "bogus"][rng.random_range(0..3)]),
            _ => format!("/api/systems/{id}/encoding?kind={}", ["atom", "voxel"][rng.random_range(0..2)]),
        };
        let (s, body, _) = send(&f.app, "GET", &uri, None).await;
        if s == StatusCode::OK {
            let (h, p) = decode_header(&body).unwrap_or_else(|e| panic!("{uri}: {e}"));
            assert_eq!(h.payload_len as usize, p.len(), "{uri}");
            ok += 1;
        } else {
            assert!(s.is_client_error(), "{uri}: {s}");
            let v: Value = serde_json::from_slice(&body).unwrap();
            assert!(v["code"].is_string() && v["message"].is_string(), "{uri}: {v}");
        }
    }
    assert!(ok > 30);
}

#[tokio::test]
async fn malformed_requests_are_machine_readable() {
    let f = fixture();
    let cases = [
        ("/api/plot/histogram?x=density", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/plot/histogram?x=density&y=nope", StatusCode::UNPROCESSABLE_ENTITY, "unknown_column"),
        ("/api/plot/histogram?x=density&y=error&bins=0", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/plot/histogram?x=density&y=error&x_transforms=sqrt", StatusCode::BAD_REQUEST, "invalid_argument"),
        ("/api/plot/histogram?x=density&y=error&colour=red", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/systems/CO2/cloud?count=-1", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/systems/CO2/cloud?count=10&thickness=2", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/systems/CO2/cloud?count=10&axis=z&index=999", StatusCode::BAD_REQUEST, "out_of_range"),
        ("/api/systems/XX/atoms", StatusCode::NOT_FOUND, "not_found"),
        ("/api/selection/mask?system=CO2", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/plot/pca?columns=density,error&k=0", StatusCode::BAD_REQUEST, "bad_query"),
        ("/api/nothing", StatusCode::NOT_FOUND, "not_found"),
    ];
    for (uri, status, code) in cases {
        let (s, v) = get_json(&f.app, uri).await;
        assert_eq!((s, v["code"].as_str().unwrap_or("")), (status, code), "{uri}: {v}");
    }
    let (s, b, _) = send(&f.app, "POST", "/api/selection/brush", Some(b"{not json".to_vec())).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(serde_json::from_slice::<Value>(&b).unwrap()["code"], "invalid_json");
    let mut bad = serde_json::to_value(tail_brush()).unwrap();
    bad["x"]["source"]["column"] = json!("missing");
    let (s, v) = post_json(&f.app, "/api/selection/brush", bad).await;
    assert_eq!((s, v["code"].as_str().unwrap()), (StatusCode::UNPROCESSABLE_ENTITY, "schema_error"));
    assert_eq!(f.state.selection_version(), 0);
}

#[tokio::test]
async fn plots_and_brushed_counts() {
    let f = fixture();
    post_json(&f.app, "/api/selection/brush", serde_json::to_value(tail_brush()).unwrap()).await;
    let uri = "/api/plot/histogram?kind=voxel&x=density&x_transforms=log10&y=derivative&y_transforms=log10&bins=40,30&selection=brushed";
    let (s, v) = get_json(&f.app, uri).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    let c = &f.state.collection;
    let spec = HistogramSpec::new(
        AxisSpec::column("density").with_transforms(vec![Transform::Log10]),
        AxisSpec::column("derivative").with_transforms(vec![Transform::Log10]),
    )
    .with_bins(40, 30);
    let full = histogram2d(c, DataKind::Voxel, &spec).unwrap();
    assert_eq!(v["histogram"]["counts"], json!(full.counts));
    let state = SelectionState::with_brushes(c, vec![tail_brush()], CombineMode::Intersection).unwrap();
    let proj = brush_projection(c, &state, DataKind::Voxel, &spec).unwrap();
    assert_eq!(v["selected_counts"], json!(proj.counts));
    assert_eq!(v["selection_version"], 1);

    let (s, v) = get_json(&f.app, "/api/plot/correlation?kind=voxel&columns=density,error,derivative").await;
    assert_eq!(s, StatusCode::OK);
    let r = v["matrix"]["r"].as_array().unwrap();
    assert_eq!(r.len(), 9);
    assert_eq!(r[0], 1.0);

    let (s, v) = get_json(&f.app, "/api/plot/pca?kind=voxel&columns=mcsh_0,mcsh_5,mcsh_9,mcsh_20&bins=16&selection=brushed").await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["model"]["components"].as_array().unwrap().len(), 2);
    let total: u64 = v["histogram"]["counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(total as usize, c.total(DataKind::Voxel));
    let sel: u64 = v["selected_counts"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(sel as usize, state.mask(DataKind::Voxel).count_ones());

    // PCA axes also work in a plain histogram request.
    let (s, _) = get_json(&f.app, "/api/plot/histogram?x=pc1&y=pc2&pca=mcsh_0,mcsh_5,mcsh_9").await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn export_and_session_round_trip() {
    let f = fixture();
    post_json(&f.app, "/api/selection/brush", serde_json::to_value(tail_brush()).unwrap()).await;
    let (s, v) = post_json(&f.app, "/api/selection/brush", json!({"op": "combine_mode", "mode": "union"})).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["selection_version"], 2);
    let n = v["selected"]["voxel"].as_u64().unwrap() as usize;

    let (s, body, headers) = send(&f.app, "POST", "/api/export", Some(br#"{"kind":"voxel"}"#.to_vec())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(headers["x-rows"], n.to_string().as_str());
    let text = String::from_utf8(body.to_vec()).unwrap();
    assert_eq!(text.lines().count(), n + 1);
    assert!(text.starts_with("system_id,local_index,x,y,z,density,error,derivative,"));

    let out = f._dir.path().join("sel.csv");
    let (s, v) = post_json(&f.app, "/api/export", json!({"kind": "voxel", "path": out})).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), text);

    let (s, session, _) = send(&f.app, "GET", "/api/session", None).await;
    assert_eq!(s, StatusCode::OK);
    let mut doc: Value = serde_json::from_slice(&session).unwrap();
    assert_eq!(doc["selection"]["combine_mode"], "union");
    doc["clouds"] = json!({"CO2": {"target_count": 1234, "seed": 5}});

    // Clearing and then restoring the saved session brings the mask back.
    post_json(&f.app, "/api/selection/brush", json!({"op": "clear"})).await;
    let (s, b, _) = send(&f.app, "PUT", "/api/session", Some(serde_json::to_vec(&doc).unwrap())).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["selection_version"], 4);
    let (_, sel) = get_json(&f.app, "/api/selection").await;
    assert_eq!(sel["selected"]["voxel"].as_u64().unwrap() as usize, n);
    let (_, again, _) = send(&f.app, "GET", "/api/session", None).await;
    let again: Value = serde_json::from_slice(&again).unwrap();
    assert_eq!(again, doc);
    // Stored cloud parameters become the defaults.
    let (_, body, _) = send(&f.app, "GET", "/api/systems/CO2/cloud", None).await;
    assert_eq!(decode_header(&body).unwrap().0.count, 1234);

    // An incompatible session is rejected and leaves the state alone.
    doc["plots"] = json!([{"type": "correlation", "plot_id": "c", "kind": "voxel", "columns": ["density", "missing"]}]);
    let (s, b, _) = send(&f.app, "PUT", "/api/session", Some(serde_json::to_vec(&doc).unwrap())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let v: Value = serde_json::from_slice(&b).unwrap();
    assert_eq!(v["code"], "incompatible_session");
    assert!(v["message"].as_str().unwrap().contains("voxel:missing"));
    assert_eq!(f.state.selection_version(), 4);
    doc["session_version"] = json!(99);
    let (s, b, _) = send(&f.app, "PUT", "/api/session", Some(serde_json::to_vec(&doc).unwrap())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(serde_json::from_slice::<Value>(&b).unwrap()["code"], "unsupported_version");
}

async fn next_event(body: &mut Body) -> (String, Value) {
    let mut buf = String::new();
    loop {
        let frame = body.frame().await.unwrap().unwrap();
        if let Ok(data) = frame.into_data() {
            buf.push_str(std::str::from_utf8(&data).unwrap());
        }
        if buf.contains("\n\n") {
            break;
        }
    }
    let mut name = String::new();
    let mut data = String::new();
    for line in buf.lines() {
        if let Some(n) = line.strip_prefix("event: ") {
            name = n.into();
        } else if let Some(d) = line.strip_prefix("data: ") {
            data = d.into();
        }
    }
    (name, serde_json::from_str(&data).unwrap())
}

#[tokio::test]
async fn push_versions_strictly_increase() {
    let f = fixture();
    let resp = f.app.clone().oneshot(Request::get("/api/events").body(Body::empty()).unwrap()).await.unwrap();
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    let mut body = resp.into_body();
    let (name, first) = next_event(&mut body).await;
    assert_eq!(name, "selection");
    assert_eq!(first["selection_version"], 0);
    assert_eq!(first["data_version"], json!(f.state.data_version()));

    let mut b = tail_brush();
    for k in 0..5 {
        b.x_range[0] = 0.5 + 0.1 * k as f64;
        post_json(&f.app, "/api/selection/brush", serde_json::to_value(&b).unwrap()).await;
    }
    // A failed mutation publishes nothing.
    post_json(&f.app, "/api/selection/brush", json!({"op": "remove", "brush_id": "ghost"})).await;
    post_json(&f.app, "/api/selection/brush", json!({"op": "clear"})).await;
    let mut last = 0;
    for want in 1..=6 {
        let (name, e) = next_event(&mut body).await;
        assert_eq!(name, "selection");
        let v = e["selection_version"].as_u64().unwrap();
        assert!(v > last);
        assert_eq!(v, want);
        last = v;
    }
}

#[tokio::test]
async fn slow_subscribers_get_a_reconnect_hint() {
    let f = fixture();
    let resp = f.app.clone().oneshot(Request::get("/api/events").body(Body::empty()).unwrap()).await.unwrap();
    let mut body = resp.into_body();
    next_event(&mut body).await;
    for k in 0..(featurelens_server::state::EVENT_QUEUE + 10) {
        let mode = if k % 2 == 0 { "union" } else { "intersection" };
        post_json(&f.app, "/api/selection/brush", json!({"op": "combine_mode", "mode": mode})).await;
    }
    let (name, e) = next_event(&mut body).await;
    assert_eq!(name, "reconnect");
    assert_eq!(e["reason"], "lagged");
    assert!(body.frame().await.is_none());
}

#[tokio::test]
async fn gets_are_repeatable() {
    let f = fixture();
    for uri in [
        "/api/schema",
        "/api/plot/histogram?x=density&y=error",
        "/api/plot/correlation?columns=density,error",
        "/api/systems/N2O/features?kind=voxel&columns=density",
        "/api/session",
    ] {
        let (s1, b1, _) = send(&f.app, "GET", uri, None).await;
        let (s2, b2, _) = send(&f.app, "GET", uri, None).await;
        assert_eq!(s1, StatusCode::OK, "{uri}");
        assert_eq!((s1, b1), (s2, b2), "{uri}");
    }
    assert_eq!(f.state.selection_version(), 0);
}

#[tokio::test]
async fn busy_port_is_a_startup_error() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let err = featurelens_server::serve::bind("127.0.0.1", port).await.unwrap_err();
    assert!(err.contains(&port.to_string()), "{err}");
}
