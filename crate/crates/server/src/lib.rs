//! JSON-over-HTTP front end for the guiyun pipeline.
//!
//! Routes:
//!
//! | method | path            | body / query                                   |
//! |--------|-----------------|------------------------------------------------|
//! | POST   | `/generate`     | genre, first_line, theme_words, key_chars, ... |
//! | POST   | `/follow-rhyme` | text, seed, theme_fraction, key_fraction, ...  |
//! | POST   | `/analyze`      | text, strictness                               |
//! | POST   | `/extract`      | text, k_theme, k_key                           |
//! | GET    | `/ledger/check` | `?text=`                                       |
//! | GET    | `/health`       |                                                |
//!
//! Failures are `{"error": {"code": ..., "message": ...}}` with status 400
//! for domain errors and 500 otherwise.

mod config;
mod error;
mod resources;

use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::{Json, Router};
use guiyun::corpus::{normalize_text, Genre};
use guiyun::extraction::Extraction;
use guiyun::generation::{follow_rhyme, generate_fs2text, DecodeOptions, FollowMode, Generation};
use guiyun::ledger::{CheckResult, Provenance};
use guiyun::prosody::{detect_rhyme_group, validate, MeterReport, ProsodyError, Strictness};
use guiyun::Ledger;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use config::{Config, ConfigError};
pub use error::{ApiError, ErrorBody};
pub use resources::{
    book, corpus, extractor, language_model, load_book, load_corpus, load_style, Model, ResourceError, Resources,
};

/// Largest beam a request may ask for.
pub const MAX_BEAM_WIDTH: usize = 1024;
/// Seeds stay below 2^53 so JavaScript clients can echo them exactly.
pub const MAX_SEED: u64 = (1 << 53) - 1;

#[derive(Clone)]
pub struct AppState {
    pub resources: Arc<Resources>,
    pub ledger: Arc<RwLock<Ledger>>,
    pub beam_width: usize,
    pub strictness: Strictness,
}

impl AppState {
    pub fn new(resources: Resources, ledger: Ledger, config: &Config) -> Self {
        AppState {
            resources: Arc::new(resources),
            ledger: Arc::new(RwLock::new(ledger)),
            beam_width: config.beam_width,
            strictness: config.strictness,
        }
    }
}

/// Routes with a CORS layer allowing `origins` (`*` for any).
pub fn router(state: AppState, origins: &[String]) -> Router {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    let cors = CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/generate", post(generate))
        .route("/follow-rhyme", post(follow))
        .route("/analyze", post(analyze))
        .route("/extract", post(extract))
        .route("/ledger/check", get(ledger_check))
        .route("/health", get(health))
        .layer(cors)
        .with_state(state)
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(t)| t)
        .map_err(|e| ApiError::bad_request("bad_request", e.body_text()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub genre: Genre,
    pub first_line: String,
    #[serde(default)]
    pub theme_words: Vec<String>,
    /// Each string contributes all of its characters.
    #[serde(default)]
    pub key_chars: Vec<String>,
    pub style: Option<String>,
    pub seed: Option<u64>,
    pub strictness: Option<Strictness>,
    pub beam_width: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowRhymeRequest {
    pub text: String,
    pub seed: Option<u64>,
    pub theme_fraction: Option<f64>,
    pub key_fraction: Option<f64>,
    pub strictness: Option<Strictness>,
    pub follow_mode: Option<FollowMode>,
    pub beam_width: Option<usize>,
}

/// A generated poem, its provenance and its ledger id.
#[derive(Debug, Clone, Serialize)]
pub struct GenerateResponse {
    #[serde(flatten)]
    pub generation: Generation<f64>,
    pub entry_id: String,
    /// False when an identical poem was already in the ledger.
    pub created: bool,
}

fn options(state: &AppState, seed: Option<u64>, strictness: Option<Strictness>, beam: Option<usize>) -> Result<DecodeOptions<f64>, ApiError> {
    let seed = match seed {
        Some(s) if s > MAX_SEED => return Err(ApiError::bad_request("bad_request", format!("seed must be at most {MAX_SEED}"))),
        Some(s) => s,
        None => rand::random::<u64>() & MAX_SEED,
    };
    let beam_width = beam.unwrap_or(state.beam_width);
    if beam_width == 0 || beam_width > MAX_BEAM_WIDTH {
        return Err(ApiError::bad_request(
            "bad_request",
            format!("beam_width must be between 1 and {MAX_BEAM_WIDTH}"),
        ));
    }
    Ok(DecodeOptions {
        seed,
        beam_width,
        strictness: strictness.unwrap_or(state.strictness),
        ..Default::default()
    })
}

async fn decode<F>(state: &AppState, job: F) -> Result<GenerateResponse, ApiError>
where
    F: FnOnce(&Resources) -> Result<Generation<f64>, ApiError> + Send + 'static,
{
    let resources = state.resources.clone();
    let generation = tokio::task::spawn_blocking(move || job(&resources))
        .await
        .map_err(|e| ApiError::internal(format!("decoder task: {e}")))??;
    let provenance = Provenance {
        prompt: generation.prompt_text.clone(),
        lm_id: generation.lm.clone(),
        seed: generation.seed,
    };
    let recorded = state
        .ledger
        .write()
        .unwrap_or_else(|e| e.into_inner())
        .record(&generation.text, &provenance)?;
    Ok(GenerateResponse {
        generation,
        entry_id: recorded.entry_id,
        created: recorded.created,
    })
}

async fn generate(State(state): State<AppState>, payload: Result<Json<GenerateRequest>, JsonRejection>) -> ApiResult<GenerateResponse> {
    let req = body(payload)?;
    let opts = options(&state, req.seed, req.strictness, req.beam_width)?;
    let style = match &req.style {
        Some(name) => Some(
            state
                .resources
                .styles
                .get(name)
                .cloned()
                .ok_or_else(|| ApiError::bad_request("unknown_style", format!("no style named {name:?}")))?,
        ),
        None => None,
    };
    let keys: Vec<char> = req.key_chars.iter().flat_map(|k| k.chars()).collect();
    let response = decode(&state, move |r| {
        generate_fs2text(
            &req.first_line,
            req.genre,
            &req.theme_words,
            &keys,
            style.as_ref(),
            r.lm.as_ref(),
            &r.book,
            &opts,
        )
        .map_err(ApiError::from)
    })
    .await?;
    Ok(Json(response))
}

fn fraction(value: Option<f64>, name: &str) -> Result<f64, ApiError> {
    let f = value.unwrap_or(0.5);
    if (0.0..=1.0).contains(&f) {
        Ok(f)
    } else {
        Err(ApiError::bad_request("bad_request", format!("{name} must lie in [0, 1]")))
    }
}

async fn follow(State(state): State<AppState>, payload: Result<Json<FollowRhymeRequest>, JsonRejection>) -> ApiResult<GenerateResponse> {
    let req = body(payload)?;
    let mut opts = options(&state, req.seed, req.strictness, req.beam_width)?;
    opts.follow_mode = req.follow_mode.unwrap_or_default();
    let theme = fraction(req.theme_fraction, "theme_fraction")?;
    let key = fraction(req.key_fraction, "key_fraction")?;
    let original = normalize_text(&req.text)?;
    let response = decode(&state, move |r| {
        follow_rhyme(&original, &r.extractor, r.lm.as_ref(), &r.book, &opts, theme, key).map_err(ApiError::from)
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    pub text: String,
    pub strictness: Option<Strictness>,
}

/// Genre, meter report and rhyme group of a poem. Texts outside the
/// regulated forms get `report: null` and an explanatory `error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Analysis {
    pub genre: Genre,
    pub report: Option<MeterReport>,
    pub rhyme_group: Vec<String>,
    pub error: Option<ErrorBody>,
}

async fn analyze(State(state): State<AppState>, payload: Result<Json<AnalyzeRequest>, JsonRejection>) -> ApiResult<Analysis> {
    let req = body(payload)?;
    let poem = normalize_text(&req.text)?;
    let genre = poem.genre();
    let book = &state.resources.book;
    let strictness = req.strictness.unwrap_or(Strictness::Relaxed);
    let report = match validate(&poem, genre, book, strictness) {
        Ok(report) => report,
        Err(e @ ProsodyError::NoTemplate(_)) => {
            return Ok(Json(Analysis {
                genre,
                report: None,
                rhyme_group: Vec::new(),
                error: Some(ErrorBody {
                    code: "no_template",
                    message: e.to_string(),
                }),
            }))
        }
        Err(e) => return Err(e.into()),
    };
    let (rhyme_group, error) = match detect_rhyme_group(&poem, book) {
        Ok(groups) => (groups.iter().map(|&g| book.group_name(g).to_string()).collect(), None),
        Err(e) => (
            Vec::new(),
            Some(ErrorBody {
                code: error::prosody_code(&e).unwrap_or("internal"),
                message: e.to_string(),
            }),
        ),
    };
    Ok(Json(Analysis {
        genre,
        report: Some(report),
        rhyme_group,
        error,
    }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractRequest {
    pub text: String,
    pub k_theme: Option<usize>,
    pub k_key: Option<usize>,
}

async fn extract(State(state): State<AppState>, payload: Result<Json<ExtractRequest>, JsonRejection>) -> ApiResult<Extraction> {
    let req = body(payload)?;
    let poem = normalize_text(&req.text)?;
    Ok(Json(state.resources.extractor.extract(&poem, req.k_theme, req.k_key)?))
}

#[derive(Debug, Clone, Deserialize)]
pub struct CheckQuery {
    pub text: String,
}

async fn ledger_check(State(state): State<AppState>, query: Result<Query<CheckQuery>, QueryRejection>) -> ApiResult<CheckResult> {
    let Query(q) = query.map_err(|e| ApiError::bad_request("bad_request", e.body_text()))?;
    let ledger = state.ledger.read().unwrap_or_else(|e| e.into_inner());
    Ok(Json(ledger.check(&q.text)))
}

#[derive(Debug, Clone, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub lm: String,
    pub rhyme_book: String,
    pub ledger_entries: usize,
    pub styles: Vec<String>,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let r = &state.resources;
    Json(Health {
        status: "ok",
        lm: r.lm.name(),
        rhyme_book: r.book.name().to_string(),
        ledger_entries: state.ledger.read().unwrap_or_else(|e| e.into_inner()).len(),
        styles: r.styles.keys().cloned().collect(),
    })
}

/// Binds `config.bind` and serves until interrupted.
pub async fn serve(config: &Config, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(&config.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, &config.cors_origins))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
